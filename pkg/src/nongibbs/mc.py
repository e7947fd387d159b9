"""Single-spin-flip Markov chain Monte Carlo on compiled models.

Sweeps visit sites in index (lexicographic) order.  Random numbers come from
numpy's PCG64, one stream per chain derived from ``SeedSequence(seed,
spawn_key=(chain,))``; one uniform is consumed per site update, so a chain
state is fully described by (seed, chain, number of draws, spins).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Sequence

import numba
import numpy as np

from .lattice import (MINUS, PERIODIC, PLUS, BoundaryCondition, CompiledModel, Configuration, Site,
                      SpinModel, compile_model)
from .parallel import pmap

KINDS = {"metropolis": 0, "heatbath": 1}
_BLOCK = 512
COEXISTENCE_SIGMAS = 5.0


@numba.njit(cache=True)
def _sweeps(spins, indptr, nbr, J, h, beta, u, kind, weights, pi, pj, pJ):
    """Run u.shape[0] sweeps in place; return per-sweep magnetization and energy per site."""
    nsweeps, n = u.shape
    mags = np.empty(nsweeps)
    ens = np.empty(nsweeps)
    wsum = weights.sum()
    for t in range(nsweeps):
        for a in range(n):
            loc = h[a]
            for k in range(indptr[a], indptr[a + 1]):
                loc += J[k] * spins[nbr[k]]
            if kind == 0:
                x = 2.0 * beta * spins[a] * loc
                # a zero-cost move is taken with probability 1/2: always flipping would make
                # uncoupled spins (beta = 0, empty sites) oscillate in lockstep
                if x < 0.0 or (x == 0.0 and u[t, a] < 0.5) or (x > 0.0 and u[t, a] < math.exp(-x)):
                    spins[a] = -spins[a]
            else:
                p_up = 1.0 / (1.0 + math.exp(-2.0 * beta * loc))
                spins[a] = 1 if u[t, a] < p_up else -1
        m = 0.0
        e = 0.0
        for a in range(n):
            m += weights[a] * spins[a]
            e -= h[a] * spins[a]
        for k in range(pi.shape[0]):
            e -= pJ[k] * spins[pi[k]] * spins[pj[k]]
        mags[t] = m / wsum
        ens[t] = e / n
    return mags, ens


def _generator(seed: int, chain: int, draws: int = 0) -> np.random.Generator:
    bg = np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chain,)))
    if draws:
        bg.advance(draws)
    return np.random.Generator(bg)


def _observed_weights(cm: CompiledModel, observe: Sequence[Site] | None) -> np.ndarray:
    if observe is None:
        return np.ones(cm.n)
    idx = {s: a for a, s in enumerate(cm.sites)}
    w = np.zeros(cm.n)
    for s in observe:
        w[idx[tuple(s)]] = 1.0
    if not w.any():
        raise ValueError("no observed sites")
    return w


@dataclass(frozen=True, eq=False)
class ChainState:
    spins: np.ndarray
    model: SpinModel
    bc: BoundaryCondition
    seed: int
    chain: int = 0
    draws: int = 0
    sweeps: int = 0
    compiled: CompiledModel = field(default=None, repr=False)

    def __post_init__(self):
        if self.compiled is None:
            object.__setattr__(self, "compiled", compile_model(self.model, self.bc))
        if self.spins.shape != (self.compiled.n,):
            raise ValueError("spin array does not match the model window")

    @property
    def configuration(self) -> Configuration:
        return Configuration.from_array(self.compiled.sites, self.spins)


def initial_state(model: SpinModel, bc: BoundaryCondition = PERIODIC, seed: int = 0, chain: int = 0,
                  init: str | Configuration = "random") -> ChainState:
    cm = compile_model(model, bc)
    draws = 0
    if isinstance(init, Configuration):
        spins = init.array(cm.sites)
    elif init == "random":
        u = _generator(seed, chain).random(cm.n)
        spins = np.where(u < 0.5, -1, 1).astype(np.int8)
        draws = cm.n
    elif init in ("plus", "minus"):
        spins = np.full(cm.n, 1 if init == "plus" else -1, dtype=np.int8)
    else:
        raise ValueError(f"unknown initial condition {init!r}")
    return ChainState(spins, model, bc, seed, chain, draws, 0, cm)


def _advance(state: ChainState, nsweeps: int, kind: str, weights: np.ndarray):
    cm = state.compiled
    indptr, nbr, J = cm.csr
    spins = state.spins.copy()
    rng = _generator(state.seed, state.chain, state.draws)
    mags, ens = [], []
    done = 0
    while done < nsweeps:
        b = min(_BLOCK, nsweeps - done)
        u = rng.random((b, cm.n))
        m, e = _sweeps(spins, indptr, nbr, J, cm.field, cm.beta, u, KINDS[kind], weights,
                       cm.pi, cm.pj, cm.pJ)
        mags.append(m)
        ens.append(e)
        done += b
    new = replace(state, spins=spins, draws=state.draws + nsweeps * cm.n, sweeps=state.sweeps + nsweeps)
    empty = np.empty(0)
    return new, (np.concatenate(mags) if mags else empty), (np.concatenate(ens) if ens else empty)


def sweep(state: ChainState, kind: str = "metropolis") -> ChainState:
    """One full sweep; returns the successor state (the input is not modified)."""
    if kind not in KINDS:
        raise ValueError(f"unknown update {kind!r}")
    new, _, _ = _advance(state, 1, kind, np.ones(state.compiled.n))
    return new


@dataclass
class ObservableSeries:
    sweeps: np.ndarray
    m: np.ndarray
    e: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.m)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sweep", "m", "e"])
            for s, m, e in zip(self.sweeps, self.m, self.e):
                w.writerow([int(s), f"{m:.17g}", f"{e:.17g}"])

    @classmethod
    def concatenate(cls, parts: Sequence["ObservableSeries"]) -> "ObservableSeries":
        return cls(np.concatenate([p.sweeps for p in parts]), np.concatenate([p.m for p in parts]),
                   np.concatenate([p.e for p in parts]), {"parts": [p.metadata for p in parts]})


def run_chain(model: SpinModel, sweeps: int, burn_in: int | None = None, seed: int = 0,
              bc: BoundaryCondition = PERIODIC, kind: str = "metropolis", interval: int = 1,
              chain: int = 0, init: str | Configuration = "random",
              observe: Sequence[Site] | None = None) -> ObservableSeries:
    """Measure (m, e) every ``interval`` sweeps after ``burn_in`` (default 20% of ``sweeps``)."""
    if kind not in KINDS:
        raise ValueError(f"unknown update {kind!r}")
    burn_in = sweeps // 5 if burn_in is None else burn_in
    if not (sweeps > burn_in >= 0) or interval < 1:
        raise ValueError(f"need sweeps > burn_in >= 0 and interval >= 1 (got {sweeps}, {burn_in}, {interval})")
    state = initial_state(model, bc, seed, chain, init)
    weights = _observed_weights(state.compiled, observe)
    state, _, _ = _advance(state, burn_in, kind, weights)
    state, m, e = _advance(state, sweeps - burn_in, kind, weights)
    idx = np.arange(interval - 1, sweeps - burn_in, interval)
    meta = {"seed": seed, "chain": chain, "kind": kind, "model": model.digest(), "bc": bc.kind,
            "beta": model.beta, "sweeps": sweeps, "burn_in": burn_in, "interval": interval,
            "prng": "PCG64/SeedSequence(seed, spawn_key=(chain,))"}
    return ObservableSeries(burn_in + idx + 1, m[idx], e[idx], meta)


# ---------------------------------------------------------------------------
# error analysis

def jackknife(estimator, *series: np.ndarray, block: int | None = None) -> tuple[float, float]:
    """Blocked jackknife of estimator(*series); block defaults to floor(sqrt(len))."""
    n = len(series[0])
    block = max(1, int(math.isqrt(n))) if block is None else block
    nb = n // block
    if nb < 2:
        raise ValueError("too few measurements for a jackknife")
    trimmed = [np.asarray(s[:nb * block], dtype=np.float64) for s in series]
    full = float(estimator(*trimmed))
    mask = np.ones(nb * block, dtype=bool)
    reps = np.empty(nb)
    for b in range(nb):
        mask[:] = True
        mask[b * block:(b + 1) * block] = False
        reps[b] = estimator(*(s[mask] for s in trimmed))
    err = math.sqrt((nb - 1) / nb * float(((reps - reps.mean()) ** 2).sum()))
    return full, err


def mean_with_error(x: np.ndarray, block: int | None = None) -> tuple[float, float]:
    return jackknife(np.mean, np.asarray(x), block=block)


def _binder(m: np.ndarray) -> float:
    m2 = np.mean(m * m)
    if m2 == 0:
        raise ZeroDivisionError("<m^2> = 0: degenerate series")
    return 1.0 - np.mean(m ** 4) / (3.0 * m2 * m2)


def binder_cumulant(series, block: int | None = None) -> tuple[float, float]:
    """U = 1 - <m^4> / (3 <m^2>^2) with blocked-jackknife error."""
    m = np.asarray(series.m if isinstance(series, ObservableSeries) else series, dtype=np.float64)
    if len(m) < 100:
        raise ValueError(f"Binder cumulant needs >= 100 measurements, got {len(m)}")
    if np.mean(m * m) == 0:
        raise ZeroDivisionError("<m^2> = 0: degenerate series")
    return jackknife(_binder, m, block=block)


# ---------------------------------------------------------------------------
# two-boundary coexistence probe

def core_sites(model: SpinModel, side: int | None = None) -> list[Site]:
    """Central box of ``side`` sites per axis (default max(2, L // 8)), farthest from the boundary."""
    lat = model.lattice
    centre = [(lo + hi) / 2.0 for lo, hi in zip(lat.lower, lat.upper)]
    if side is None:
        side = max(2, min(lat.shape) // 8)
    return [s for s in lat.sites if all(abs(c - z) <= side / 2.0 for c, z in zip(s, centre))]


@dataclass
class CoexistenceRecord:
    beta: float
    plus_mean: float
    plus_err: float
    minus_mean: float
    minus_err: float
    gap: float
    gap_err: float
    sigmas: float
    coexistence: bool
    seeds: list[int]
    observed_sites: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _probe_chain(args, model, sweeps, burn_in, kind, observe):
    seed, sign = args
    bc = PLUS if sign > 0 else MINUS
    return run_chain(model, sweeps, burn_in, seed, bc, kind, init="plus" if sign > 0 else "minus",
                     chain=0 if sign > 0 else 1, observe=observe)


def coexistence_probe(model: SpinModel, sweeps: int, seeds: Sequence[int] = (0,), burn_in: int | None = None,
                      kind: str = "metropolis", core: int | None = None,
                      jobs: int | None = 1) -> CoexistenceRecord:
    """Paired plus/minus boundary chains; coexistence if the core gap exceeds 5 joint errors."""
    observe = core_sites(model, core)
    tasks = [(s, sign) for s in seeds for sign in (1, -1)]
    runs = pmap(partial(_probe_chain, model=model, sweeps=sweeps, burn_in=burn_in, kind=kind,
                        observe=observe), tasks, jobs)
    plus = np.concatenate([r.m for r, (_, sg) in zip(runs, tasks) if sg > 0])
    minus = np.concatenate([r.m for r, (_, sg) in zip(runs, tasks) if sg < 0])
    mp, ep = mean_with_error(plus)
    mm, em = mean_with_error(minus)
    gap = mp - mm
    err = math.hypot(ep, em)
    sig = gap / err if err > 0 else (math.inf if gap > 0 else 0.0)
    return CoexistenceRecord(model.beta, mp, ep, mm, em, gap, err, sig, bool(sig > COEXISTENCE_SIGMAS),
                             list(seeds), len(observe))
