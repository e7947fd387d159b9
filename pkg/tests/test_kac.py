import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nongibbs.badness import ConfigGenerator, generate
from nongibbs.kac import (BinderCell, KacProfile, betac_pipeline, checkerboard_effective_field, checkerboard_spins,
                          crossing_from_cells, cw_envelope_free_energy, kac_couplings, kac_kernel, kac_model,
                          kernel_sum, lp_free_energy_gap, max_checkerboard_field, quenched_threequarter_model,
                          retained_fraction)
from nongibbs.lattice import Lattice, ising_model
from nongibbs.transform import decimation_constrained_model

GAMMAS = [1.0, 0.5, 0.25, 0.125]


# --- kernels ----------------------------------------------------------------------------------

def test_tophat_quarter():
    J = kac_couplings(KacProfile("tophat", 0.25))
    assert sorted(J) == [(r,) for r in range(-4, 5) if r]
    assert set(J.values()) == {0.125}


def test_tophat_unit_gamma_is_nearest_neighbour():
    assert kac_couplings(KacProfile("tophat", 1.0)) == {(-1,): 0.5, (1,): 0.5}
    # in two dimensions the sup-norm ball of radius one holds all eight neighbours
    J2 = kac_couplings(KacProfile("tophat", 1.0, 2))
    assert len(J2) == 8 and set(J2.values()) == {0.25}


def test_triangle_unit_gamma_is_empty():
    assert kac_couplings(KacProfile("triangle", 1.0)) == {}


def test_profile_validation():
    with pytest.raises(ValueError):
        KacProfile("gaussian", 0.5)
    with pytest.raises(ValueError):
        KacProfile("tophat", 0.0)
    with pytest.raises(ValueError):
        KacProfile("tophat", 1.5)
    with pytest.raises(ValueError):
        kac_model(KacProfile("tophat", 0.5, 2), Lattice((0,), (3,)), 1.0)


@pytest.mark.parametrize("name", ["tophat", "triangle"])
@pytest.mark.parametrize("d", [1, 2])
def test_kernel_sum_bound(name, d):
    devs = []
    for g in [0.5, 0.25, 0.125, 1 / 16]:
        p = KacProfile(name, g, d)
        dev = abs(kernel_sum(p) - 1.0)
        assert dev <= p.kernel_constant * g + 1e-12
        devs.append(dev)
    assert all(b <= a + 1e-12 for a, b in zip(devs, devs[1:]))


def test_triangle_deficit_is_the_missing_self_term():
    for g in [0.5, 0.25, 0.125]:
        assert kernel_sum(KacProfile("triangle", g)) == pytest.approx(1.0 - g, abs=1e-14)


@given(st.sampled_from(["tophat", "triangle"]), st.sampled_from([0.5, 1 / 3, 0.25, 0.2]), st.integers(1, 2))
def test_kernel_symmetric_and_nonnegative(name, g, d):
    J = kac_couplings(KacProfile(name, g, d))
    assert all(v > 0 for v in J.values())
    assert all(J[tuple(-c for c in r)] == v for r, v in J.items())
    assert all(max(abs(c) for c in r) <= KacProfile(name, g, d).range for r in J)


def test_kernel_interaction_has_no_self_term():
    it = kac_kernel(KacProfile("tophat", 0.5, 2), h=0.3)
    assert it.h == 0.3
    assert all(any(r) for r in it.couplings)


# --- checkerboard field -----------------------------------------------------------------------

def test_checkerboard_spins_alternate_on_s():
    conf = checkerboard_spins(Lattice.centered(4, 2).sites)
    assert conf[(0, 0)] == 1 and conf[(2, 0)] == -1 and conf[(2, 2)] == 1
    assert all(x[0] % 2 == 0 and x[1] % 2 == 0 for x in conf.values)


@pytest.mark.parametrize("g", [0.5, 0.25, 0.125, 1 / 16])
def test_checkerboard_field_bound(g):
    assert max_checkerboard_field(KacProfile("tophat", g, 2)) <= 4 * g


def test_checkerboard_field_cancels_by_reflection():
    # every S^c site has an odd coordinate; reflecting through it swaps opposite S-signs at equal distance
    for g in [1.0, 0.5, 0.25]:
        for name in ("tophat", "triangle"):
            p = KacProfile(name, g, 2)
            assert max_checkerboard_field(p) == 0.0


def test_checkerboard_field_rejects_s_sites():
    with pytest.raises(ValueError):
        checkerboard_effective_field(KacProfile("tophat", 0.5, 2), (2, 0))


def test_windowed_field_sees_the_boundary():
    p = KacProfile("tophat", 0.25, 2)
    win = Lattice((0, 0), (7, 7))
    edge = checkerboard_effective_field(p, (1, 0), window=win)
    assert edge != 0.0
    assert checkerboard_effective_field(p, (1, 0), window=win, periodic=True) == 0.0


# --- Lebowitz-Penrose ----------------------------------------------------------------------------

def test_lp_gap_shrinks_at_low_temperature():
    gaps = [lp_free_energy_gap(KacProfile("tophat", g), 2.0).gap for g in GAMMAS]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < gaps[0] / 2


def test_lp_gap_shrinks_at_one_and_a_half():
    gaps = [lp_free_energy_gap(KacProfile("tophat", g), 1.5).gap for g in GAMMAS]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_lp_golden_high_temperature():
    g = lp_free_energy_gap(KacProfile("tophat", 0.25), 0.5)
    assert g.gap < 0.02
    assert g.gap == pytest.approx(0.019376480195026913, rel=1e-9)


@pytest.mark.parametrize("h", [0.05, 0.2])
def test_lp_gap_field_symmetric(h):
    for g in (1.0, 0.5, 0.25):
        p = KacProfile("tophat", g)
        assert abs(lp_free_energy_gap(p, 1.5, h).gap - lp_free_energy_gap(p, 1.5, -h).gap) < 1e-10


@pytest.mark.parametrize("beta", [0.5, 1.5, 2.0])
@pytest.mark.parametrize("h", [0.0, 0.1])
def test_kac_free_energy_below_mean_field(beta, h):
    # a product trial state bounds the free energy from above, and the top-hat kernel sums to one
    for g in GAMMAS:
        r = lp_free_energy_gap(KacProfile("tophat", g), beta, h)
        assert r.f_gamma <= r.f_cw + 1e-9


def test_cw_envelope_closed_forms():
    assert cw_envelope_free_energy(0.5) == pytest.approx(-math.log(2) / 0.5, rel=1e-12)
    # deep in the ordered phase the envelope approaches -1/2 - |h|
    assert cw_envelope_free_energy(50.0, 0.1) == pytest.approx(-0.6, abs=1e-3)


def test_lp_preconditions():
    with pytest.raises(ValueError):
        lp_free_energy_gap(KacProfile("tophat", 0.5, 2), 1.0)
    with pytest.raises(ValueError):
        lp_free_energy_gap(KacProfile("tophat", 1 / 16), 1.0)
    with pytest.raises(ValueError):
        lp_free_energy_gap(KacProfile("tophat", 0.5), 0.0)


# --- three-quarter lattice -----------------------------------------------------------------------

def test_retained_fraction():
    assert retained_fraction(2) == 0.75 and retained_fraction(1) == 0.5


def test_threequarter_fields_match_checkerboard_field():
    p = KacProfile("tophat", 0.5, 2)
    lat = Lattice((0, 0), (7, 7))
    omega = checkerboard_spins(lat.sites)
    cm = quenched_threequarter_model(p, 1.0, omega, lat, periodic=True)
    assert cm.metadata["effective_beta"] == 0.75
    for x in cm.model.sites:
        assert cm.induced_field.get(x, 0.0) == pytest.approx(
            checkerboard_effective_field(p, x, window=lat, periodic=True), abs=1e-15)
    assert len(cm.model.sites) == 48


def test_threequarter_all_plus_gives_positive_fields():
    p = KacProfile("tophat", 0.5, 2)
    lat = Lattice((0, 0), (7, 7))
    omega = generate(ConfigGenerator.constant(1), lat.sites)
    cm = quenched_threequarter_model(p, 1.0, omega, lat, periodic=True)
    assert all(cm.induced_field[x] > 0 for x in cm.model.sites)


def test_threequarter_unit_gamma_matches_direct_decimation():
    p = KacProfile("tophat", 1.0, 2)
    lat = Lattice((0, 0), (5, 5))
    omega = generate(ConfigGenerator.bernoulli(0.5, seed=2), lat.sites)
    cm = quenched_threequarter_model(p, 0.9, omega, lat)
    direct = decimation_constrained_model(kac_model(p, lat, 0.9), omega, "even")
    assert cm.model == direct.model
    # nearest-neighbour Ising is the special case with the diagonals switched off
    nn = decimation_constrained_model(ising_model((6, 6), 0.9, J=0.25), omega, "even")
    assert set(nn.model.sites) == set(cm.model.sites)


# --- beta_c pipeline ------------------------------------------------------------------------------

def test_pipeline_high_temperature_has_no_crossing():
    rep = betac_pipeline(KacProfile("tophat", 1.0, 2), ConfigGenerator.checkerboard(2), [8, 12],
                         [0.1, 0.2, 0.3], sweeps=3000)
    assert rep.status == "no_crossing" and rep.estimate is None
    assert rep.summary()["pairs"][0]["status"] == "no_crossing"


def test_pipeline_deterministic(tmp_path):
    args = (KacProfile("tophat", 1.0, 2), ConfigGenerator.checkerboard(2), [8, 12], [1.1, 1.3, 1.5])
    for k in range(2):
        rep = betac_pipeline(*args, seeds=(0, 1), sweeps=3000)
        rep.write_csv(tmp_path / f"b{k}.csv")
        rep.write_json(tmp_path / f"c{k}.json")
    assert (tmp_path / "b0.csv").read_bytes() == (tmp_path / "b1.csv").read_bytes()
    assert (tmp_path / "c0.json").read_bytes() == (tmp_path / "c1.json").read_bytes()
    summary = json.loads((tmp_path / "c0.json").read_text())
    assert summary["mean_field_target"] == pytest.approx(4 / 3)
    assert summary["status"] in ("crossing", "no_crossing")


def test_pipeline_preconditions():
    gen = ConfigGenerator.checkerboard(2)
    with pytest.raises(ValueError, match="multiples of 4"):
        betac_pipeline(KacProfile("tophat", 1.0, 2), gen, [8, 10], [1.0])
    with pytest.raises(ValueError, match="two lattice sizes"):
        betac_pipeline(KacProfile("tophat", 1.0, 2), gen, [8], [1.0])
    with pytest.raises(ValueError, match="range"):
        betac_pipeline(KacProfile("tophat", 0.25, 2), gen, [8, 12], [1.0])
    with pytest.raises(ValueError, match="two-dimensional"):
        betac_pipeline(KacProfile("tophat", 1.0, 1), gen, [8, 12], [1.0])


def _cells(shift):
    betas = np.linspace(1.0, 1.6, 7)
    cells = []
    for L, slope in ((8, 0.5), (12, 0.8)):
        for b in betas:
            cells.append(BinderCell(L, float(b), 0.4 + slope * (b - shift), 0.002, 0.5, 1000))
    return cells


def test_crossing_of_synthetic_lines():
    status, est, err, pairs = crossing_from_cells(_cells(1.3))
    assert status == "crossing" and est == pytest.approx(1.3, abs=1e-9)
    assert 0 < err < 0.05 and pairs[0]["bracket"] == [pytest.approx(1.2), pytest.approx(1.4)]


def test_crossing_outside_grid_is_not_extrapolated():
    status, est, _, _ = crossing_from_cells(_cells(2.5))
    assert status == "no_crossing" and est is None
