"""Independent brute-force oracles shared by the module tests and the acceptance run."""
import numpy as np

from nongibbs.exact import enumerate_distribution
from nongibbs.lattice import (FREE, MINUS, PERIODIC, PLUS, Configuration, Interaction, Lattice, SpinModel,
                              sublattice_predicate)
from nongibbs.transform import glauber_kernel


def all_spins(n):
    """Every configuration of n spins, row k = state index k (bit a of k set <=> spin a = +1)."""
    k = np.arange(1 << n)[:, None]
    return np.where((k >> np.arange(n)) & 1, 1, -1).astype(np.int8)


def glauber_conditional(model, bc, t, eta: Configuration) -> np.ndarray:
    """P(sigma | evolved = eta) from the joint weight P(sigma) prod_i p_t(sigma_i, eta_i)."""
    base = enumerate_distribution(model, bc).probabilities
    s = all_spins(model.n)
    e = eta.array(model.sites)
    K = glauber_kernel(t)
    joint = base * np.prod(K[(s + 1) // 2, (e[None, :] + 1) // 2], axis=1)
    return joint / joint.sum()


def decimation_conditional(model, bc, sublattice, omega: Configuration) -> tuple[list, np.ndarray]:
    """(S^c sites, P(sigma on S^c | sigma = omega on S)) by conditioning the full enumeration."""
    on_s = sublattice_predicate(sublattice)
    base = enumerate_distribution(model, bc).probabilities
    s = all_spins(model.n)
    s_idx = [a for a, x in enumerate(model.sites) if on_s(x)]
    rest = [a for a, x in enumerate(model.sites) if not on_s(x)]
    w = np.array([omega[model.sites[a]] for a in s_idx])
    keep = (s[:, s_idx] == w).all(axis=1)
    sub = s[keep][:, rest]
    index = (((sub + 1) // 2) << np.arange(len(rest))).sum(axis=1)
    out = np.zeros(1 << len(rest))
    out[index] = base[keep]
    return [model.sites[a] for a in rest], out / out.sum()


def random_instance(rng: np.random.Generator, max_sites: int = 16):
    """A random small model (1D or 2D, NN plus optional further pairs) with a random boundary."""
    d = int(rng.integers(1, 3))
    if d == 1:
        n = int(rng.integers(3, max_sites + 1))
        lo = int(rng.integers(-2, 3))
        lattice = Lattice((lo,), (lo + n - 1,))
        offsets = [(1,), (2,), (3,)]
    else:
        a = int(rng.integers(2, 5))
        b = int(rng.integers(2, max_sites // a + 1))
        lo = tuple(int(c) for c in rng.integers(-2, 3, size=2))
        lattice = Lattice(lo, (lo[0] + a - 1, lo[1] + b - 1))
        offsets = [(1, 0), (0, 1), (1, 1), (1, -1)]
    k = int(rng.integers(1, len(offsets) + 1))
    chosen = [offsets[i] for i in rng.choice(len(offsets), size=k, replace=False)]
    couplings = {r: float(rng.uniform(-1.2, 1.2)) for r in chosen}
    fields = {s: float(rng.uniform(-0.8, 0.8)) for s in lattice.sites} if rng.random() < 0.5 else {}
    model = SpinModel(lattice, Interaction(couplings, float(rng.uniform(-0.5, 0.5)), fields),
                      float(rng.uniform(0.1, 1.5)))
    bc = [FREE, PLUS, MINUS, PERIODIC][int(rng.integers(0, 4))]
    return model, bc


def random_spins(rng, sites) -> Configuration:
    return Configuration({s: int(v) for s, v in zip(sites, rng.choice([-1, 1], size=len(sites)))})
