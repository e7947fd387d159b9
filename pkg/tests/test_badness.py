import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import nongibbs.badness as badness
from nongibbs.badness import (ConfigGenerator, VariationCurve, badness_profile, default_candidates, generate,
                              largest_exact_radius, response_frontier, variation_details)
from nongibbs.lattice import FREE, MINUS, PLUS, Interaction, Lattice, SpinModel
from nongibbs.transform import TransformSpec

DECIMATE = TransformSpec.decimation("even")


def nn(d, beta, J=1.0, h=0.0):
    return SpinModel(Lattice.centered(0, d), Interaction.nearest_neighbor(d, J, h), beta)


def image(radius, d, transform, gen):
    return generate(gen, badness.image_sites(Lattice.centered(radius, d), transform))


# --- generators -------------------------------------------------------------------------

def test_checkerboard_sign_rule():
    conf = generate(ConfigGenerator.checkerboard(), Lattice.centered(2, 2))
    assert all(v == (-1) ** (x[0] + x[1]) for x, v in conf.values.items())


def test_bernoulli_degenerate():
    conf = generate(ConfigGenerator.bernoulli(1.0, seed=5), Lattice.centered(3, 2))
    assert set(conf.values.values()) == {1}


def test_bernoulli_is_seeded():
    lat = Lattice.centered(3, 2)
    a = generate(ConfigGenerator.bernoulli(0.5, seed=7), lat)
    assert a == generate(ConfigGenerator.bernoulli(0.5, seed=7), lat)
    assert a != generate(ConfigGenerator.bernoulli(0.5, seed=8), lat)


def test_perturbation_flips_only_listed_sites():
    lat = Lattice.centered(2, 2)
    base = generate(ConfigGenerator.checkerboard(), lat)
    pert = generate(ConfigGenerator.perturbation(ConfigGenerator.checkerboard(), {(0, 0)}), lat)
    assert [x for x in lat.sites if base[x] != pert[x]] == [(0, 0)]


def test_generator_validation():
    with pytest.raises(ValueError):
        ConfigGenerator.bernoulli(1.5)
    with pytest.raises(ValueError):
        ConfigGenerator("spiral")
    with pytest.raises(ValueError):
        ConfigGenerator("perturbation")


# --- single-volume variation ------------------------------------------------------------

@pytest.mark.parametrize("transform", [DECIMATE, TransformSpec.glauber(0.3), TransformSpec.glauber(0.0)])
def test_infinite_temperature_is_product(transform):
    m = nn(2, 0.0)
    omega = image(3, 2, transform, ConfigGenerator.checkerboard(2 if transform.kind == "decimation" else 1))
    assert variation_details(m, transform, omega, 2).value < 1e-12


def test_uncoupled_model_with_field_is_product():
    m = SpinModel(Lattice.centered(0, 2), Interaction({(1, 0): 0.0}, h=0.4), 1.0)
    omega = image(3, 2, DECIMATE, ConfigGenerator.checkerboard(2))
    assert variation_details(m, DECIMATE, omega, 2).value < 1e-12


def test_one_dimensional_decimation_goldens():
    c = badness_profile(nn(1, 1.5), DECIMATE, ConfigGenerator.checkerboard(2), [1, 3])
    assert math.isclose(c.variations[0], 0.9804607011180753, rel_tol=1e-9)
    # once the nearest retained spins are fixed the chain is Markov: the outside is screened off
    assert c.variations[1] < 1e-12
    assert c.variations[1] <= c.variations[0]


def test_checkerboard_decimation_two_dimensions():
    m = nn(2, 0.8)
    omega = image(4, 2, DECIMATE, ConfigGenerator.checkerboard(2))
    v = variation_details(m, DECIMATE, omega, 4)
    assert v.value > 0.1
    assert math.isclose(v.value, 0.27354527076914537, rel_tol=1e-9)


@given(st.floats(0.0, 2.0), st.floats(-0.5, 0.5), st.sampled_from([1, 2]))
@settings(max_examples=25)
def test_variation_in_unit_interval(beta, h, radius):
    m = nn(1, beta, h=h)
    omega = image(radius, 1, DECIMATE, ConfigGenerator.bernoulli(0.5, seed=1))
    v = variation_details(m, DECIMATE, omega, radius).value
    assert 0.0 <= v <= 1.0


@pytest.mark.parametrize("transform", [DECIMATE, TransformSpec.glauber(0.5)])
def test_spin_flip_covariance(transform):
    m = nn(2, 0.6)
    omega = image(2, 2, transform, ConfigGenerator.bernoulli(0.5, seed=3))
    for bc, flipped in ((PLUS, MINUS), (FREE, FREE)):
        a = variation_details(m, transform, omega, 2, bc=bc).value
        b = variation_details(m, transform, omega.flipped(), 2, bc=flipped).value
        assert abs(a - b) < 1e-12


def test_more_candidates_never_lower_the_variation():
    m = nn(2, 0.8)
    omega = image(2, 2, DECIMATE, ConfigGenerator.checkerboard(2))
    base = default_candidates(DECIMATE)
    extended = {**base, "noise": ConfigGenerator.bernoulli(0.5, seed=11)}
    v0 = variation_details(m, DECIMATE, omega, 2, candidates=base).value
    v1 = variation_details(m, DECIMATE, omega, 2, candidates=extended).value
    assert v1 >= v0


def test_decimation_origin_must_be_retained():
    m = nn(2, 0.5)
    odd = TransformSpec.decimation("odd")
    with pytest.raises(ValueError, match="origin"):
        variation_details(m, odd, image(2, 2, odd, ConfigGenerator.constant()), 2)


def test_omega_must_cover_the_box():
    m = nn(2, 0.5)
    with pytest.raises(ValueError, match="does not cover"):
        variation_details(m, DECIMATE, image(1, 2, DECIMATE, ConfigGenerator.constant()), 3)


def test_linear_response_matches_direct_conditioning(monkeypatch):
    m = nn(2, 0.8)
    t = TransformSpec.glauber(4.0)
    omega = image(3, 2, t, ConfigGenerator.checkerboard())
    direct = variation_details(m, t, omega, 2, margin=1).value
    monkeypatch.setattr(badness, "LINEAR_RESPONSE_FIELD", 1.0)
    linear = variation_details(m, t, omega, 2, margin=1).value
    assert math.isclose(linear, direct, rel_tol=1e-3)


# --- profiles ---------------------------------------------------------------------------

def test_glauber_control_decays():
    c = badness_profile(nn(2, 0.8), TransformSpec.glauber(50.0), ConfigGenerator.checkerboard(), [1, 2, 3])
    assert all(b < a for a, b in zip(c.variations, c.variations[1:]))
    assert c.slope < 0 and c.floor < 1e-80


def test_glauber_short_time_keeps_a_floor():
    c = badness_profile(nn(2, 0.8), TransformSpec.glauber(0.5), ConfigGenerator.checkerboard(), [1, 2, 3, 4])
    assert c.floor > 0.3
    assert np.allclose(c.variations, [0.3391350471190399, 0.36624831380088285, 0.3663309137738302,
                                      0.3663310855475392], rtol=1e-8)


def test_glauber_longer_time_decays_under_plus_boundary():
    c = badness_profile(nn(2, 0.8), TransformSpec.glauber(1.0), ConfigGenerator.checkerboard(), [1, 2, 3])
    assert all(b < a for a, b in zip(c.variations, c.variations[1:]))


def test_origin_perturbation_does_not_change_profile():
    t = TransformSpec.glauber(0.5)
    gen = ConfigGenerator.checkerboard()
    pert = ConfigGenerator.perturbation(gen, {(0, 0)})
    a = badness_profile(nn(2, 0.8), t, gen, [2, 3])
    b = badness_profile(nn(2, 0.8), t, pert, [2, 3])
    assert a.variations == b.variations


def test_profile_parallel_matches_serial():
    args = (nn(2, 0.7), DECIMATE, ConfigGenerator.checkerboard(2), [1, 2, 3])
    assert badness_profile(*args, jobs=1).variations == badness_profile(*args, jobs=2).variations


def test_curve_rejects_unsorted_radii():
    with pytest.raises(ValueError):
        VariationCurve([2, 1], [0.1, 0.2], [("a", "b")] * 2, 3)


def test_curve_files(tmp_path):
    c = badness_profile(nn(1, 1.0), DECIMATE, ConfigGenerator.checkerboard(2), [1, 2])
    c.write_csv(tmp_path / "v.csv")
    c.write_json(tmp_path / "v.json")
    rows = list(csv.reader(open(tmp_path / "v.csv")))
    assert rows[0] == ["radius", "variation", "eta1", "eta2"]
    assert [int(r[0]) for r in rows[1:]] == [1, 2]
    assert float(rows[1][1]) == c.variations[0]
    summary = json.load(open(tmp_path / "v.json"))
    assert summary["min_variation"] == c.floor
    assert summary["generator"] == {"kind": "checkerboard", "spacing": 2, "phase": 1}
    assert summary["transform"]["kind"] == "decimation"


# --- exact-window sizing ----------------------------------------------------------------

def test_frontier_grows_with_radius():
    m = nn(2, 0.8)
    widths = [response_frontier(m, DECIMATE, r) for r in (2, 4, 6)]
    assert widths == sorted(widths) and widths[0] < widths[-1]


def test_largest_exact_radius_respects_cap():
    m = nn(2, 0.8)
    r = largest_exact_radius(m, TransformSpec.glauber(1.0), cap=14)
    assert response_frontier(m, TransformSpec.glauber(1.0), r) <= 14
    assert response_frontier(m, TransformSpec.glauber(1.0), r + 1) > 14
