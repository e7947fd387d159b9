"""Kac-scaled couplings J_gamma(r) = gamma^d J(gamma r) and the studies built on them.

Profiles are functions of the sup-norm |x| = max_k |x_k|, normalized so that
the continuum integral of J is 1.  The discrete kernel is used literally (no
rescaling to an exact unit sum), so its sum deviates from 1 by O(gamma).
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np

from .badness import ConfigGenerator, generate
from .exact import transfer_matrix_free_energy
from .lattice import PERIODIC, Configuration, Interaction, Lattice, Site, SpinModel, sublattice_predicate
from .meanfield import cw_magnetization, mf_free_energy
from .mc import binder_cumulant, run_chain
from .parallel import pmap
from .transform import ConstrainedModel, decimation_constrained_model

PROFILES = ("tophat", "triangle")
LP_RANGE_CAP = 14
_SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class KacProfile:
    name: str
    gamma: float
    d: int = 1

    def __post_init__(self):
        if self.name not in PROFILES:
            raise ValueError(f"unknown Kac profile {self.name!r}; known: {PROFILES}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.d < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def c(self) -> float:
        """Normalization making the integral of J over R^d equal to 1."""
        if self.name == "tophat":
            return 1.0 / 2 ** self.d
        return (self.d + 1) / 2 ** self.d

    @property
    def kernel_constant(self) -> float:
        """C in |sum_r J_gamma(r) - 1| <= C gamma (checked over gamma grids in the tests)."""
        return float(self.d)

    def shape(self, x: float) -> float:
        """J(x) as a function of the sup-norm |x|."""
        if self.name == "tophat":
            return self.c if x <= 1.0 + _SUPPORT_TOL else 0.0
        return self.c * max(0.0, 1.0 - x)

    @property
    def range(self) -> int:
        """Largest integer sup-norm |r| with J_gamma(r) > 0."""
        inv = 1.0 / self.gamma
        if self.name == "tophat":
            return int(math.floor(inv + _SUPPORT_TOL))
        return int(math.ceil(inv - _SUPPORT_TOL)) - 1

    def with_gamma(self, gamma: float) -> "KacProfile":
        return KacProfile(self.name, gamma, self.d)


def kac_couplings(profile: KacProfile) -> dict[tuple[int, ...], float]:
    """J_gamma(r) on every nonzero offset of the support, both r and -r listed."""
    R = profile.range
    g = profile.gamma
    out = {}
    for r in itertools.product(range(-R, R + 1), repeat=profile.d):
        if not any(r):
            continue
        J = g ** profile.d * profile.shape(g * max(abs(c) for c in r))
        if J > 0.0:
            out[r] = J
    return out


def kac_kernel(profile: KacProfile, h: float = 0.0) -> Interaction:
    """Pair interaction with the Kac couplings; r = 0 is excluded."""
    return Interaction(kac_couplings(profile), h)


def kernel_sum(profile: KacProfile) -> float:
    return math.fsum(kac_couplings(profile).values())


def kac_model(profile: KacProfile, lattice: Lattice, beta: float, h: float = 0.0) -> SpinModel:
    if lattice.dimension != profile.d:
        raise ValueError("lattice and profile dimensions differ")
    return SpinModel(lattice, kac_kernel(profile, h), beta)


# ---------------------------------------------------------------------------
# checkerboard effective field

def checkerboard_spins(sites, sublattice: str = "even") -> Configuration:
    """Alternating signs along the sublattice (S = (2Z)^d for 'even')."""
    on_s = sublattice_predicate(sublattice)
    return generate(ConfigGenerator.checkerboard(2, 1), [s for s in sites if on_s(s)])


def _checkerboard_value(j: Site) -> int:
    return -1 if sum(c // 2 for c in j) % 2 else 1


def checkerboard_effective_field(profile: KacProfile, site: Site, sublattice: str = "even",
                                 window: Lattice | None = None, periodic: bool = False) -> float:
    """sum_{j in S} J_gamma(i - j) eta(j) for the checkerboard eta on S.

    Without ``window`` the sum runs over the whole kernel support in Z^d;
    with it, only window sites of S contribute (wrapped when ``periodic``).
    """
    site = tuple(site)
    on_s = sublattice_predicate(sublattice)
    if on_s(site):
        raise ValueError(f"site {site} lies on the conditioned sublattice")
    terms = []
    for r, J in kac_couplings(profile).items():
        j = tuple(a + b for a, b in zip(site, r))
        if window is not None:
            if periodic:
                j = window.wrap(j)
                if j == site:
                    continue
            elif not window.in_window(j):
                continue
        if on_s(j):
            terms.append(J * _checkerboard_value(j))
    return math.fsum(terms)


def max_checkerboard_field(profile: KacProfile, sublattice: str = "even") -> float:
    """max |field| over one period cell of the checkerboard (4 sites per axis)."""
    on_s = sublattice_predicate(sublattice)
    cell = [s for s in itertools.product(range(4), repeat=profile.d) if not on_s(s)]
    return max(abs(checkerboard_effective_field(profile, s, sublattice)) for s in cell)


# ---------------------------------------------------------------------------
# Lebowitz-Penrose check in d = 1

def cw_envelope_free_energy(beta: float, h: float = 0.0) -> float:
    """min over m of -m^2/2 - h m + s(m)/beta (the convex envelope value)."""
    fp = cw_magnetization(beta, beta * h)
    ms = [fp.m, fp.plus, fp.minus]
    return min(float(mf_free_energy(m, beta, beta * h)) for m in ms) / beta


@dataclass(frozen=True)
class LPGap:
    gamma: float
    beta: float
    h: float
    f_gamma: float
    f_cw: float
    kernel_sum: float

    @property
    def gap(self) -> float:
        return abs(self.f_gamma - self.f_cw)


def lp_free_energy_gap(profile: KacProfile, beta: float, h: float = 0.0) -> LPGap:
    if profile.d != 1:
        raise ValueError("the Lebowitz-Penrose check is one-dimensional")
    if profile.range > LP_RANGE_CAP:
        raise ValueError(f"range {profile.range} exceeds the transfer-matrix cap {LP_RANGE_CAP}")
    if not beta > 0:
        raise ValueError("beta must be > 0")
    model = kac_model(profile, Lattice((0,), (0,)), beta, h)
    f_gamma = transfer_matrix_free_energy(model)
    return LPGap(profile.gamma, beta, h, f_gamma, cw_envelope_free_energy(beta, h), kernel_sum(profile))


# ---------------------------------------------------------------------------
# three-quarter lattice

def retained_fraction(d: int) -> float:
    """p = 1 - 2^-d, the density of the complement of (2Z)^d."""
    return 1.0 - 2.0 ** -d


def quenched_threequarter_model(profile: KacProfile, beta: float, omega: Configuration, lattice: Lattice,
                                periodic: bool = False, sublattice: str = "even") -> ConstrainedModel:
    """Kac model on S^c conditioned on omega on S; metadata carries the heuristic p beta."""
    model = kac_model(profile, lattice, beta)
    cm = decimation_constrained_model(model, omega, sublattice, periodic)
    p = retained_fraction(profile.d)
    meta = {"profile": profile.name, "gamma": profile.gamma, "p": p, "effective_beta": p * beta,
            "periodic": periodic}
    return ConstrainedModel(cm.model, cm.base, cm.transform, cm.image_digest, cm.induced_field, meta)


# ---------------------------------------------------------------------------
# Binder-crossing pipeline

@dataclass(frozen=True)
class BinderCell:
    L: int
    beta: float
    U: float
    U_err: float
    m2: float
    measurements: int


def _binder_cell(task, profile, gen, seeds, sweeps, burn_in, kind):
    L, beta = task
    lattice = Lattice.box((L,) * profile.d)
    omega = generate(gen, [s for s in lattice.sites if sublattice_predicate("even")(s)])
    cm = quenched_threequarter_model(profile, beta, omega, lattice, periodic=True)
    ms = []
    for k, seed in enumerate(seeds):
        series = run_chain(cm.model, sweeps, burn_in, seed, PERIODIC, kind, chain=k)
        ms.append(series.m)
    m = np.concatenate(ms)
    U, err = binder_cumulant(m)
    return BinderCell(L, beta, U, err, float(np.mean(m * m)), len(m))


def _bracket(betas, diff, err, resolve):
    """First (i, j): diff[i] resolved negative, diff[j] resolved positive, j the next resolved point."""
    resolved = [k for k in range(len(betas)) if abs(diff[k]) >= resolve * err[k]]
    for a, b in zip(resolved, resolved[1:]):
        if diff[a] < 0 < diff[b]:
            return a, b
    return None


def _interpolate(betas, diff, a, b) -> float:
    x0, x1, y0, y1 = betas[a], betas[b], diff[a], diff[b]
    return x0 + (x1 - x0) * (-y0) / (y1 - y0)


@dataclass
class CrossingReport:
    status: str                    # "crossing" | "no_crossing"
    estimate: float | None
    error: float | None
    pairs: list[dict]
    cells: list[BinderCell]
    settings: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"status": self.status, "estimate": self.estimate, "error": self.error, "pairs": self.pairs,
                **self.settings}

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["L", "beta", "U", "U_err", "m2", "measurements"])
            for c in self.cells:
                w.writerow([c.L, f"{c.beta:.17g}", f"{c.U:.17g}", f"{c.U_err:.17g}", f"{c.m2:.17g}",
                            c.measurements])

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def crossing_from_cells(cells: Sequence[BinderCell], bootstrap: int = 200, seed: int = 0,
                        resolve: float = 2.0) -> tuple[str, float | None, float | None, list[dict]]:
    """Crossings of U_L(beta) for consecutive sizes; parametric bootstrap for the error."""
    Ls = sorted({c.L for c in cells})
    betas = sorted({c.beta for c in cells})
    table = {(c.L, c.beta): c for c in cells}
    rng = np.random.Generator(np.random.PCG64(seed))
    pairs, estimates, errors = [], [], []
    for La, Lb in zip(Ls, Ls[1:]):
        Ua = np.array([table[La, b].U for b in betas])
        Ub = np.array([table[Lb, b].U for b in betas])
        ea = np.array([table[La, b].U_err for b in betas])
        eb = np.array([table[Lb, b].U_err for b in betas])
        diff, err = Ub - Ua, np.hypot(ea, eb)
        br = _bracket(betas, diff, err, resolve)
        if br is None:
            pairs.append({"L_small": La, "L_large": Lb, "status": "no_crossing"})
            continue
        a, b = br
        est = _interpolate(betas, diff, a, b)
        boots = []
        for _ in range(bootstrap):
            d = (Ub + eb * rng.standard_normal(len(betas))) - (Ua + ea * rng.standard_normal(len(betas)))
            if d[a] < 0 < d[b]:
                boots.append(_interpolate(betas, d, a, b))
        e = float(np.std(boots, ddof=1)) if len(boots) > 1 else float(betas[b] - betas[a])
        pairs.append({"L_small": La, "L_large": Lb, "status": "crossing", "estimate": est, "error": e,
                      "bracket": [betas[a], betas[b]], "bootstrap_accepted": len(boots)})
        estimates.append(est)
        errors.append(e)
    if not estimates:
        return "no_crossing", None, None, pairs
    # the largest pair is the least affected by corrections to scaling
    return "crossing", estimates[-1], errors[-1], pairs


def betac_pipeline(profile: KacProfile, gen: ConfigGenerator, Ls: Sequence[int], betas: Sequence[float],
                   seeds: Sequence[int] = (0,), sweeps: int = 20_000, burn_in: int | None = None,
                   kind: str = "heatbath", bootstrap: int = 200, jobs: int | None = 1) -> CrossingReport:
    """Binder scans of the periodic three-quarter-lattice model over sizes and inverse temperatures."""
    if profile.d != 2:
        raise ValueError("the pipeline runs on the two-dimensional three-quarter lattice")
    Ls = sorted(int(L) for L in Ls)
    if len(Ls) < 2:
        raise ValueError("need at least two lattice sizes")
    if any(L % 4 for L in Ls):
        raise ValueError("sizes must be multiples of 4 so the periodic checkerboard on S closes")
    if any(profile.range >= L // 2 for L in Ls):
        raise ValueError("kernel range must stay below L/2 on the periodic window")
    betas = sorted(float(b) for b in betas)
    tasks = [(L, b) for L in Ls for b in betas]
    cells = pmap(partial(_binder_cell, profile=profile, gen=gen, seeds=list(seeds), sweeps=sweeps,
                         burn_in=burn_in, kind=kind), tasks, jobs)
    status, est, err, pairs = crossing_from_cells(cells, bootstrap, seed=int(seeds[0]))
    p = retained_fraction(profile.d)
    settings = {"profile": profile.name, "gamma": profile.gamma, "Ls": Ls, "betas": betas, "seeds": list(seeds),
                "sweeps": sweeps, "kind": kind, "generator": gen.describe(), "p": p,
                "mean_field_target": 1.0 / p}
    return CrossingReport(status, est, err, pairs, cells, settings)
