"""Exact finite-volume computations.

Two independent routes to the same numbers:

* brute-force enumeration of all 2^n configurations (``enumerate_distribution``),
  capped at 25 sites, streamed in chunks with log-sum-exp;
* sequential variable elimination in lexicographic site order
  (``log_partition``), whose cost is 2^(frontier width) per site.  This is the
  row transfer matrix for 2D nearest-neighbour windows and handles the
  badness windows that enumeration cannot reach.

For infinite 1D chains the leading eigenvalue of the 2^R-state transfer
matrix is found by power iteration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .lattice import (FREE, PERIODIC, BoundaryCondition, CompiledModel, Configuration, Interaction,
                      Lattice, Site, SpinModel, compile_model)

ENUMERATION_CAP = 25
FRONTIER_CAP = 22
_CHUNK_BITS = 16


class ResourceError(RuntimeError):
    """A computation would exceed the configured exact-engine resources."""


class ConvergenceError(RuntimeError):
    pass


def _check_cap(n: int, cap: int):
    if n > cap:
        raise ResourceError(
            f"exact enumeration over {n} sites needs 2^{n} = {2 ** n:.3e} states; "
            f"cap is {cap} sites (2^{cap} states)")


def _state_spins(start: int, stop: int, n: int) -> np.ndarray:
    """Spins for states start..stop-1; bit a of the state index is site a (1 -> +1)."""
    k = np.arange(start, stop, dtype=np.int64)[:, None]
    bits = (k >> np.arange(n, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(np.int8)


def _state_index(spins: np.ndarray) -> int:
    bits = (np.asarray(spins) > 0).astype(np.int64)
    return int((bits << np.arange(len(bits), dtype=np.int64)).sum())


def iter_states(n: int, chunk_bits: int = _CHUNK_BITS):
    total = 1 << n
    step = 1 << min(n, chunk_bits)
    for start in range(0, total, step):
        yield start, _state_spins(start, min(start + step, total), n)


@dataclass(frozen=True, eq=False)
class ExactDistribution:
    model: SpinModel
    bc: BoundaryCondition
    compiled: CompiledModel
    log_z: float

    @property
    def n(self) -> int:
        return self.compiled.n

    def log_probability(self, sigma) -> float:
        s = sigma.array(self.compiled.sites) if isinstance(sigma, Configuration) else np.asarray(sigma)
        return -self.compiled.beta * self.compiled.energy(s) - self.log_z

    def probability(self, sigma) -> float:
        return math.exp(self.log_probability(sigma))

    @cached_property
    def probabilities(self) -> np.ndarray:
        """All 2^n probabilities in state-index order (memory 8 * 2^n bytes)."""
        if self.n > 22:
            raise ResourceError(f"materializing 2^{self.n} probabilities is not supported; use expect()")
        out = np.empty(1 << self.n)
        for start, s in iter_states(self.n):
            out[start:start + len(s)] = np.exp(-self.compiled.beta * self.compiled.energies(s) - self.log_z)
        return out

    def expect(self, observable: Callable[[np.ndarray], np.ndarray]) -> float:
        """Streaming expectation of a vectorized observable of a (batch, n) spin array."""
        total = 0.0
        for _, s in iter_states(self.n):
            p = np.exp(-self.compiled.beta * self.compiled.energies(s) - self.log_z)
            total += float(p @ np.asarray(observable(s), dtype=np.float64))
        return total

    def magnetization_moments(self, orders: Sequence[int] = (1, 2, 4)) -> dict[int, float]:
        acc = {k: 0.0 for k in orders}
        for _, s in iter_states(self.n):
            p = np.exp(-self.compiled.beta * self.compiled.energies(s) - self.log_z)
            m = s.mean(axis=1, dtype=np.float64)
            for k in orders:
                acc[k] += float(p @ m ** k)
        return acc


def enumerate_distribution(model: SpinModel, bc: BoundaryCondition = FREE,
                           cap: int = ENUMERATION_CAP) -> ExactDistribution:
    """Exact Gibbs distribution on the model window by full enumeration."""
    _check_cap(model.n, cap)
    cm = compile_model(model, bc)
    parts = [logsumexp(-cm.beta * cm.energies(s)) for _, s in iter_states(cm.n)]
    return ExactDistribution(model, bc, cm, float(logsumexp(parts)))


def conditional_probability(model: SpinModel, site: Site, conditioning: Configuration,
                            bc: BoundaryCondition = FREE) -> float:
    """P(sigma_site = +1 | all other window spins, bc) from two energy evaluations."""
    site = tuple(site)
    index = model.lattice.index
    if site not in index:
        raise ValueError(f"site {site} is not a window site")
    cm = compile_model(model, bc)
    s = np.array([conditioning[x] if x != site else 1 for x in cm.sites], dtype=np.float64)
    a = index[site]
    e_plus = cm.energy(s)
    s[a] = -1
    e_minus = cm.energy(s)
    return float(expit(-cm.beta * (e_plus - e_minus)))


# ---------------------------------------------------------------------------
# variable elimination

def _elimination_plan(cm: CompiledModel):
    n = cm.n
    last = np.arange(n)
    before: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for i, j, J in zip(cm.pi, cm.pj, cm.pJ):
        i, j = int(i), int(j)
        last[i] = max(last[i], j)
        before[j].append((i, float(J)))
    return last, before


def frontier_width(cm: CompiledModel) -> int:
    last, _ = _elimination_plan(cm)
    width = 0
    live = 0
    ends = np.bincount(last, minlength=cm.n)
    for k in range(cm.n):
        live += 1
        width = max(width, live)
        live -= ends[k]
    return int(width)


def log_partition(cm: CompiledModel, pinned: Mapping[int, int] | None = None,
                  direction: np.ndarray | None = None,
                  cap: int = FRONTIER_CAP) -> tuple[float, float]:
    """log Z by eliminating sites in index order.

    ``pinned`` fixes spins (index -> +-1).  ``direction`` is a field
    perturbation c; the second return value is d log Z / d eps for
    h -> h + eps * c at eps = 0, i.e. beta * <sum_i c_i s_i>.
    """
    pinned = dict(pinned or {})
    last, before = _elimination_plan(cm)
    width = frontier_width(cm)
    if width > cap:
        raise ResourceError(f"elimination frontier of {width} sites needs 2^{width} states; cap is 2^{cap}")
    beta = cm.beta
    vals = [np.array([float(pinned[k])]) if k in pinned else np.array([-1.0, 1.0]) for k in range(cm.n)]
    frontier: list[int] = []
    T = np.ones(())
    dT = np.zeros(()) if direction is not None else None
    scale = 0.0
    for k in range(cm.n):
        F = len(frontier)
        vk = vals[k]
        logf = np.zeros((1,) * F + (len(vk),))
        logf = logf + beta * cm.field[k] * vk
        for a, J in before[k]:
            p = frontier.index(a)
            shape = [1] * (F + 1)
            shape[p] = len(vals[a])
            logf = logf + beta * J * vals[a].reshape(shape) * vk.reshape((1,) * F + (-1,))
        c = float(logf.max())
        f = np.exp(logf - c)
        T_new = T[..., None] * f
        if dT is not None:
            dT = dT[..., None] * f + T_new * (beta * direction[k] * vk)
        T = T_new
        scale += c
        frontier.append(k)
        done = [p for p, a in enumerate(frontier) if last[a] <= k]
        if done:
            T = T.sum(axis=tuple(done))
            if dT is not None:
                dT = dT.sum(axis=tuple(done))
            frontier = [a for a in frontier if last[a] > k]
        m = float(T.max())
        if m <= 0 or not math.isfinite(m):
            raise ArithmeticError("partition function underflow")
        T = T / m
        if dT is not None:
            dT = dT / m
        scale += math.log(m)
    z = float(T)
    dlog = float(dT) / z if dT is not None else 0.0
    return math.log(z) + scale, dlog


def site_magnetization(cm: CompiledModel, a: int, pinned: Mapping[int, int] | None = None) -> float:
    """<s_a> from two pinned eliminations."""
    pinned = dict(pinned or {})
    lp, _ = log_partition(cm, {**pinned, a: 1})
    lm, _ = log_partition(cm, {**pinned, a: -1})
    return float(np.tanh(0.5 * (lp - lm)))


def plus_probability(cm: CompiledModel, a: int, pinned: Mapping[int, int] | None = None) -> float:
    pinned = dict(pinned or {})
    lp, _ = log_partition(cm, {**pinned, a: 1})
    lm, _ = log_partition(cm, {**pinned, a: -1})
    return float(expit(lp - lm))


def model_log_partition(model: SpinModel, bc: BoundaryCondition = FREE) -> float:
    return log_partition(compile_model(model, bc))[0]


# ---------------------------------------------------------------------------
# 1D transfer matrices

@dataclass(frozen=True)
class TransferMatrix:
    """Site-to-site transfer operator of a translation-invariant 1D chain.

    States are windows of R consecutive spins (axis 0 the oldest); the
    operator appends one spin and forgets the oldest.
    """

    couplings: tuple[float, ...]    # J(1), ..., J(R)
    h: float
    beta: float

    @classmethod
    def from_model(cls, model: SpinModel, h: float | None = None) -> "TransferMatrix":
        it = model.interaction
        if model.lattice.dimension != 1:
            raise ValueError("transfer matrices are implemented for d = 1 only")
        if it.field or it.site_weights is not None:
            raise ValueError("transfer matrix needs a translation-invariant model")
        R = max(it.range, 1)
        J = tuple(it.couplings.get((r,), 0.0) for r in range(1, R + 1))
        return cls(J, it.h if h is None else float(h), float(model.beta))

    @property
    def range(self) -> int:
        return len(self.couplings)

    @property
    def dimension(self) -> int:
        return 2 ** self.range

    @cached_property
    def log_weights(self) -> np.ndarray:
        """log w(s_1..s_R, s_new) on a (2,)*(R+1) grid; s_R is the newest old spin."""
        R = self.range
        grid = np.indices((2,) * (R + 1)).astype(np.float64) * 2 - 1
        new = grid[R]
        lw = self.beta * self.h * new
        for r, J in enumerate(self.couplings, start=1):
            lw = lw + self.beta * J * grid[R - r] * new
        return lw

    def apply(self, v: np.ndarray) -> np.ndarray:
        R = self.range
        v = v.reshape((2,) * R)
        out = (v[..., None] * np.exp(self.log_weights)).sum(axis=0)
        return out.reshape(-1)

    def dense(self) -> np.ndarray:
        if self.range > 10:
            raise ResourceError(f"dense transfer matrix of dimension 2^{self.range} refused (cap 2^10)")
        D = self.dimension
        T = np.zeros((D, D))
        w = np.exp(self.log_weights).reshape(D, 2)
        for s in range(D):
            # s has oldest spin as most significant bit in C order
            for new in range(2):
                t = ((s << 1) | new) & (D - 1)
                T[s, t] = w[s, new]
        return T


def leading_eigenvalue(tm: TransferMatrix, tol: float = 1e-12, max_iter: int = 2_000_000) -> float:
    """Perron eigenvalue by power iteration; flip-symmetrized when h = 0."""
    symmetric = tm.h == 0.0
    v = np.ones(tm.dimension)
    v /= np.linalg.norm(v)
    lam_old = 0.0
    history = []
    for it in range(1, max_iter + 1):
        w = tm.apply(v)
        if symmetric:
            w = 0.5 * (w + w[::-1])
        lam = float(np.linalg.norm(w))
        v = w / lam
        if it > 2 and abs(lam - lam_old) <= tol * lam:
            return lam
        history.append(abs(lam - lam_old))
        lam_old = lam
    ratio = history[-1] / history[-2] if len(history) > 1 and history[-2] > 0 else float("nan")
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps; "
                           f"estimated |lambda_2/lambda_1| ~ {ratio:.6f}")


def transfer_matrix_free_energy(model: SpinModel, h: float | None = None, tol: float = 1e-12) -> float:
    """Free energy per site -(1/beta) log lambda_max of the infinite chain."""
    tm = TransferMatrix.from_model(model, h)
    if tm.range > 14:
        raise ResourceError(f"transfer matrix of dimension 2^{tm.range} exceeds cap 2^14")
    if model.beta <= 0:
        raise ValueError("free energy per site needs beta > 0")
    return -math.log(leading_eigenvalue(tm, tol)) / model.beta


def ring_log_partition(model: SpinModel, L: int, h: float | None = None) -> float:
    """log Tr T^L for a ring of L sites, by repeated squaring with rescaling."""
    T = TransferMatrix.from_model(model, h).dense()
    base, base_log = T, 0.0          # base * exp(base_log) == T^(2^i)
    result, result_log = None, 0.0
    k = L
    while k:
        if k & 1:
            result = base.copy() if result is None else result @ base
            result_log += base_log
            m = np.abs(result).max()
            result, result_log = result / m, result_log + math.log(m)
        k >>= 1
        if k:
            base = base @ base
            m = np.abs(base).max()
            base, base_log = base / m, 2 * base_log + math.log(m)
    return math.log(np.trace(result)) + result_log


def ground_state_degeneracy(model: SpinModel, bc: BoundaryCondition = FREE,
                            cap: int = ENUMERATION_CAP, rtol: float = 1e-9) -> int:
    """Number of configurations attaining the minimum energy (exact count)."""
    _check_cap(model.n, cap)
    cm = compile_model(model, bc)
    scale = 1.0 + np.abs(cm.pJ).sum() + np.abs(cm.field).sum()
    e_min, count = math.inf, 0
    for _, s in iter_states(cm.n):
        e = cm.energies(s)
        lo = float(e.min())
        if lo < e_min - rtol * scale:
            e_min, count = lo, 0
        if lo <= e_min + rtol * scale:
            count += int((e <= e_min + rtol * scale).sum())
    return count
