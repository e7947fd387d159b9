import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nongibbs.lattice import (FREE, MINUS, PERIODIC, PLUS, BoundaryCondition, Configuration, Interaction,
                              Lattice, SpinModel, compile_model, energy, explicit_bc, gibbs_weight,
                              interaction_norm, ising_model)
from nongibbs.kac import KacProfile, kac_kernel
from strategies import boundaries, small_models, spins_for


def chain(n, J=1.0, h=0.0, beta=1.0):
    return SpinModel(Lattice((0,), (n - 1,)), Interaction.nearest_neighbor(1, J, h), beta)


# --- energy -----------------------------------------------------------------

def test_single_bond_energy():
    assert energy(np.array([1, 1]), FREE, chain(2)) == -1.0


def test_single_site_with_minus_boundary():
    assert energy(np.array([1]), MINUS, chain(1)) == 2.0


def test_periodic_three_by_three_counts_each_bond_once():
    m = ising_model((3, 3), 1.0)
    assert energy(np.ones(9, dtype=np.int8), PERIODIC, m) == -18.0


def test_explicit_boundary_missing_site_is_named():
    bc = explicit_bc({(-1,): 1})
    with pytest.raises(KeyError, match=r"\(2,\)"):
        energy(np.array([1, 1]), bc, chain(2))


def test_explicit_boundary_matches_plus():
    bc = explicit_bc({(-1,): 1, (2,): 1})
    s = np.array([1, -1])
    assert energy(s, bc, chain(2)) == energy(s, PLUS, chain(2))


def test_configuration_input_must_cover_window():
    with pytest.raises(ValueError, match="does not cover"):
        energy(Configuration({(0,): 1}), FREE, chain(2))


@given(st.data())
def test_flip_symmetry_without_field(data):
    model = data.draw(small_models())
    model = model.with_interaction(Interaction(model.interaction.couplings))
    bc = data.draw(st.sampled_from([FREE, PERIODIC]))
    s = data.draw(spins_for(model))
    assert math.isclose(energy(s, bc, model), energy(-s, bc, model), abs_tol=1e-12)


@given(st.data())
def test_plus_minus_boundary_difference(data):
    model = data.draw(small_models())
    s = data.draw(spins_for(model))
    cm_free = compile_model(model, FREE)
    cm_plus = compile_model(model, PLUS)
    # the boundary enters only through the field term; recompute it bond by bond
    ext = cm_plus.field - cm_free.field
    expected = -2.0 * float(ext @ s)
    assert math.isclose(energy(s, PLUS, model) - energy(s, MINUS, model), expected, abs_tol=1e-9)
    lat, it = model.lattice, model.interaction
    direct = 0.0
    for x, v in zip(lat.sites, s):
        for r, J in it.couplings.items():
            for sign in (1, -1):
                y = tuple(c + sign * o for c, o in zip(x, r))
                if not lat.in_window(y):
                    direct += J * v
    assert math.isclose(energy(s, PLUS, model) - energy(s, MINUS, model), -2.0 * direct, abs_tol=1e-9)


@given(st.data())
def test_energy_matches_brute_force_pair_sum(data):
    model = data.draw(small_models())
    bc = data.draw(boundaries(model))
    s = data.draw(spins_for(model))
    lat, it = model.lattice, model.interaction
    val = dict(zip(lat.sites, s))

    def spin(y):
        if lat.in_window(y):
            return val[y]
        if bc.kind == "periodic":
            return val[lat.wrap(y)]
        return bc.value(y)

    e = 0.0
    for x in lat.sites:
        e -= it.field_at(x) * val[x]
        for r, J in it.couplings.items():
            y = tuple(c + o for c, o in zip(x, r))
            if bc.kind == "periodic" and lat.wrap(y) == x:
                continue
            sy = spin(y)
            if sy is not None:
                e -= J * val[x] * sy
            # pairs sticking out on the negative side are not seen from inside
            z = tuple(c - o for c, o in zip(x, r))
            if not lat.in_window(z) and bc.kind != "periodic":
                sz = spin(z)
                if sz is not None:
                    e -= J * val[x] * sz
    assert math.isclose(energy(s, bc, model), e, abs_tol=1e-9)


# --- interaction norm ---------------------------------------------------------

def test_norm_nearest_neighbour_2d():
    assert interaction_norm(ising_model((3, 3), 1.0)) == 4.0


def test_norm_with_field():
    assert interaction_norm(chain(3, h=0.5)) == 2.5


def test_norm_kac_tophat():
    m = SpinModel(Lattice((0,), (0,)), kac_kernel(KacProfile("tophat", 0.25)), 1.0)
    assert math.isclose(interaction_norm(m), 1.0)


@given(small_models(), st.tuples(st.integers(-5, 5), st.integers(-5, 5)))
def test_norm_translation_invariant(model, shift):
    model = model.with_interaction(Interaction(model.interaction.couplings, model.interaction.h))
    shift = shift[:model.lattice.dimension]
    moved = model.with_lattice(model.lattice.translated(shift))
    assert interaction_norm(moved) == interaction_norm(model)
    assert interaction_norm(model, site=shift) == interaction_norm(model)


def test_norm_additive():
    a = Interaction({(1, 0): 0.7})
    b = Interaction({(0, 1): -0.4}, h=0.2)
    ab = Interaction({(1, 0): 0.7, (0, 1): -0.4}, h=0.2)
    lat = Lattice((0, 0), (2, 2))
    norm = lambda it: interaction_norm(SpinModel(lat, it, 1.0))
    assert math.isclose(norm(ab), norm(a) + norm(b))


# --- Gibbs weights --------------------------------------------------------------

def test_weight_at_infinite_temperature():
    m = ising_model((3, 3), 1e-12)
    rng = np.random.default_rng(0)
    s = rng.choice([-1, 1], 9)
    assert abs(gibbs_weight(s, PLUS, m) - 1.0) < 1e-9


def test_weight_single_bond():
    assert math.isclose(gibbs_weight(np.array([1, 1]), FREE, chain(2)), math.e, rel_tol=1e-15)


@given(st.data())
def test_weight_flip_symmetry(data):
    model = data.draw(small_models())
    model = model.with_interaction(Interaction(model.interaction.couplings))
    s = data.draw(spins_for(model))
    w1, w2 = gibbs_weight(s, FREE, model, log=True), gibbs_weight(-s, FREE, model, log=True)
    assert abs(w1 - w2) <= 1e-12 * max(1.0, abs(w1))


@given(st.data())
def test_log_weight_affine_in_beta(data):
    model = data.draw(small_models())
    s = data.draw(spins_for(model))
    lw = [gibbs_weight(s, PLUS, model.with_beta(b), log=True) for b in (0.5, 1.0, 1.5)]
    assert math.isclose(lw[2] - lw[1], lw[1] - lw[0], rel_tol=1e-12, abs_tol=1e-12)


def test_log_weight_avoids_overflow():
    m = ising_model((6, 6), 500.0)
    lw = gibbs_weight(np.ones(36), PLUS, m, log=True)
    assert math.isfinite(lw) and lw > 700


# --- types ------------------------------------------------------------------------

def test_lattice_rejects_empty_window():
    with pytest.raises(ValueError):
        Lattice((0, 0), (-1, 2))


def test_lattice_sites_lexicographic():
    lat = Lattice((0, 0), (1, 2))
    assert list(lat.sites) == sorted(lat.sites)
    assert len(lat) == 6


def test_sublattice_mask_selects_subset():
    lat = Lattice((-2, -2), (2, 2), sublattice="even")
    assert set(lat.sublattice_sites) <= set(lat.sites)
    assert len(lat.sublattice_sites) == 9


def test_configuration_alphabet_enforced():
    with pytest.raises(ValueError):
        Configuration({(0,): 2})
    Configuration({(0,): 0}, alphabet=(0, 1))


def test_asymmetric_couplings_rejected():
    with pytest.raises(ValueError, match="asymmetric"):
        Interaction({(1,): 1.0, (-1,): 0.5})


def test_boundary_flip():
    assert PLUS.flipped() == MINUS
    assert BoundaryCondition("explicit", Configuration({(5,): 1})).flipped().config[(5,)] == -1
