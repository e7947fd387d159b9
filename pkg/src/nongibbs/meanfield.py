"""Curie-Weiss decimation: conditional probabilities at fixed empirical magnetization.

A Curie-Weiss model with Gibbs weight exp(beta/(2N) (sum s)^2 + beta h sum s)
keeps a fraction 1 - p of its spins.  Conditioning the retained spins on
their empirical magnetization alpha leaves the p N hidden spins in the
self-consistent state

    m = tanh(p beta m + (1 - p) beta alpha + beta h),

and a retained spin is +1 with probability e^x / (2 cosh x),
x = beta (p m + (1 - p) alpha) + beta h.  For p beta > 1 and h = 0 the hidden
system has two branches at alpha = 0 and the conditional jumps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit, gammaln, logsumexp, xlogy

DAMPING = 0.5
TOL = 1e-12
MAX_ITER = 100_000
JUMP_EPS = 1e-8
JUMP_THRESHOLD = 1e-6


class BranchError(ValueError):
    pass


@dataclass(frozen=True)
class CWParams:
    beta: float
    h: float = 0.0
    p: float = 0.75
    alpha: float = 0.0

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must lie in (0, 1), got {self.p}")
        if not -1.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [-1, 1], got {self.alpha}")


def neg_entropy(m):
    """s(m) = sum over +-1 of ((1 +- m)/2) log((1 +- m)/2); zero at m = +-1 limits."""
    m = np.asarray(m, dtype=np.float64)
    up, dn = 0.5 * (1.0 + m), 0.5 * (1.0 - m)
    return xlogy(up, up) + xlogy(dn, dn)


def mf_free_energy(m, a: float, b: float):
    """-a m^2/2 - b m + s(m); its critical points solve m = tanh(a m + b)."""
    return -0.5 * a * np.square(m) - b * np.asarray(m) + neg_entropy(m)


def solve_fixed_point(a: float, b: float, start: float, tol: float = TOL, max_iter: int = MAX_ITER) -> float:
    """Damped iteration of m -> tanh(a m + b) from ``start``, then Newton polishing."""
    m = float(start)
    for _ in range(max_iter):
        new = (1.0 - DAMPING) * m + DAMPING * math.tanh(a * m + b)
        if abs(new - m) < tol:
            m = new
            break
        m = new
    # Newton on g(m) = m - tanh(a m + b); accepted only while |g| shrinks
    g = m - math.tanh(a * m + b)
    for _ in range(60):
        if g == 0.0:
            break
        t = math.tanh(a * m + b)
        dg = 1.0 - a * (1.0 - t * t)
        if dg <= 0.0:
            break
        trial = min(1.0, max(-1.0, m - g / dg))
        gt = trial - math.tanh(a * trial + b)
        if abs(gt) >= abs(g):
            break
        m, g = trial, gt
    return m


@dataclass(frozen=True)
class FixedPoint:
    """Global minimizer plus both extreme branches of m = tanh(a m + b)."""
    m: float
    plus: float
    minus: float
    tie: bool

    @property
    def two_branch(self) -> bool:
        return abs(self.plus - self.minus) > 1e-9


def _fixed_point(a: float, b: float) -> FixedPoint:
    plus = solve_fixed_point(a, b, 1.0)
    minus = solve_fixed_point(a, b, -1.0)
    fp, fm = float(mf_free_energy(plus, a, b)), float(mf_free_energy(minus, a, b))
    tie = abs(plus - minus) > 1e-9 and abs(fp - fm) <= 1e-12
    m = plus if fp <= fm else minus
    return FixedPoint(m, plus, minus, tie)


def cw_magnetization(beta_eff: float, h_eff: float = 0.0) -> FixedPoint:
    """Minimizer of -beta_eff m^2/2 - h_eff m + s(m); on a tie (h_eff = 0) the positive branch."""
    if not beta_eff > 0:
        raise ValueError("beta_eff must be > 0")
    if h_eff == 0.0 and beta_eff <= 1.0:
        # m = 0 is the only solution of m = tanh(beta_eff m)
        return FixedPoint(0.0, 0.0, 0.0, False)
    return _fixed_point(beta_eff, h_eff)


def _hidden_coefficients(params: CWParams, alpha: float | None = None) -> tuple[float, float]:
    alpha = params.alpha if alpha is None else alpha
    return params.p * params.beta, (1.0 - params.p) * params.beta * alpha + params.beta * params.h


def _conditional_from_m(params: CWParams, m: float, alpha: float | None = None) -> float:
    alpha = params.alpha if alpha is None else alpha
    x = params.beta * (params.p * m + (1.0 - params.p) * alpha) + params.beta * params.h
    return float(expit(2.0 * x))


@dataclass(frozen=True)
class Conditional:
    value: float
    m: float
    branch: str
    tie: bool = False


def cw_conditional_details(params: CWParams, branch: str = "auto", strict: bool = False) -> Conditional:
    if branch not in ("auto", "plus", "minus"):
        raise BranchError(f"unknown branch {branch!r}")
    if params.beta == 0:
        return Conditional(0.5, 0.0, branch)
    a, b = _hidden_coefficients(params)
    fp = _fixed_point(a, b)
    if branch == "auto":
        m, chosen = fp.m, ("plus" if fp.m == fp.plus else "minus")
    else:
        if strict and not fp.two_branch:
            raise BranchError(f"only one branch exists at beta={params.beta}, alpha={params.alpha}")
        m, chosen = (fp.plus, "plus") if branch == "plus" else (fp.minus, "minus")
    return Conditional(_conditional_from_m(params, m), m, chosen, fp.tie)


def cw_decimated_conditional(params: CWParams, branch: str = "auto", strict: bool = False) -> float:
    """Large-N P(retained spin = +1 | retained magnetization alpha)."""
    return cw_conditional_details(params, branch, strict).value


def one_sided_limits(params: CWParams, eps: float = JUMP_EPS) -> tuple[float, float]:
    """Conditionals at alpha -> alpha0 +- 0: select the branch at alpha0 +- eps, follow it to alpha0."""
    out = []
    a = params.p * params.beta
    for side in (1.0, -1.0):
        near = CWParams(params.beta, params.h, params.p, min(1.0, max(-1.0, params.alpha + side * eps)))
        m_near = cw_conditional_details(near).m
        _, b0 = _hidden_coefficients(params)
        m0 = solve_fixed_point(a, b0, m_near)
        out.append(_conditional_from_m(params, m0))
    return out[0], out[1]


@dataclass
class JumpScan:
    p: float
    h: float
    betas: list[float]
    jumps: list[float]
    threshold: float | None
    eps: float = JUMP_EPS
    detection: float = JUMP_THRESHOLD

    def rows(self):
        return list(zip(self.betas, self.jumps))

    def summary(self) -> dict:
        return {"p": self.p, "h": self.h, "threshold_estimate": self.threshold,
                "predicted_threshold": 1.0 / self.p if self.h == 0 else None,
                "grid_step": float(np.min(np.diff(self.betas))) if len(self.betas) > 1 else None,
                "eps": self.eps, "detection": self.detection,
                "beta_min": self.betas[0], "beta_max": self.betas[-1]}


def cw_jump(beta: float, p: float, h: float = 0.0, eps: float = JUMP_EPS) -> float:
    hi, lo = one_sided_limits(CWParams(beta, h, p, 0.0), eps)
    return abs(hi - lo)


def cw_jump_scan(betas: Sequence[float], p: float, h: float = 0.0, eps: float = JUMP_EPS,
                 detection: float = JUMP_THRESHOLD) -> JumpScan:
    betas = [float(b) for b in betas]
    if any(b2 < b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValueError("beta grid must be sorted")
    jumps = [cw_jump(b, p, h, eps) for b in betas]
    threshold = next((b for b, j in zip(betas, jumps) if j > detection), None)
    return JumpScan(p, h, betas, jumps, threshold, eps, detection)


# ---------------------------------------------------------------------------
# finite-N oracle

def _integral(x: float, what: str) -> int:
    k = round(x)
    if abs(x - k) > 1e-9:
        raise ValueError(f"{what} = {x} is not an integer")
    return int(k)


def cw_finite_n_oracle(N: int, params: CWParams) -> float:
    """Exact P(s_0 = +1) for N spins: p N hidden, (1 - p) N conditioned at alpha, plus s_0.

    Sums over magnetization sectors of the hidden spins with binomial weights
    under exp(beta/(2N) M^2 + beta h M), M the total magnetization.
    """
    if N > 10_000:
        raise ValueError("finite-N oracle is limited to N <= 10^4")
    K = _integral(params.p * N, "p N")
    C = _integral((1.0 - params.p) * N, "(1 - p) N")
    k_plus = _integral(C * (1.0 + params.alpha) / 2.0, "(1 - p) N (1 + alpha) / 2")
    Mc = 2 * k_plus - C
    j = np.arange(K + 1)
    log_binom = gammaln(K + 1) - gammaln(j + 1) - gammaln(K - j + 1)
    Mh = 2 * j - K
    logs = []
    for s0 in (1, -1):
        M = (Mh + Mc + s0).astype(np.float64)
        logs.append(logsumexp(log_binom + params.beta / (2.0 * N) * M * M + params.beta * params.h * M))
    return float(expit(logs[0] - logs[1]))


def richardson(Ns: Sequence[int], values: Sequence[float]) -> float:
    """Polynomial extrapolation in 1/N to 1/N = 0 through all given points."""
    x = 1.0 / np.asarray(Ns, dtype=np.float64)
    coef = np.polyfit(x, np.asarray(values, dtype=np.float64), len(Ns) - 1)
    return float(np.polyval(coef, 0.0))


def cw_oracle_extrapolated(params: CWParams, Ns: Sequence[int] = (500, 1000, 2000)) -> float:
    return richardson(Ns, [cw_finite_n_oracle(N, params) for N in Ns])


# ---------------------------------------------------------------------------
# mean-field random-field magnetization

def cw_rfim_magnetization(beta: float, h: float, q: float = 0.5, start: float = 1.0,
                          tol: float = TOL, max_iter: int = MAX_ITER) -> float:
    """Solve m = q tanh(beta (m + h)) + (1 - q) tanh(beta (m - h)) by damped iteration from ``start``."""
    m = float(start)
    for _ in range(max_iter):
        new = (1 - DAMPING) * m + DAMPING * (q * math.tanh(beta * (m + h)) + (1 - q) * math.tanh(beta * (m - h)))
        if abs(new - m) < tol:
            return new
        m = new
    return m


def cw_rfim_jump(beta: float, h: float, q: float = 0.5) -> float:
    """Distance between the branches reached from +1 and -1 (zero where the solution is unique)."""
    return abs(cw_rfim_magnetization(beta, h, q, 1.0) - cw_rfim_magnetization(beta, h, q, -1.0))
