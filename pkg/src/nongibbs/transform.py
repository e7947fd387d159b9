"""Decimation and infinite-temperature Glauber evolution as constrained models.

A transformed measure is never represented directly.  Instead the original
system is conditioned on an image configuration, which yields an ordinary
:class:`SpinModel` (the first-layer model) with extra single-site fields:

* decimation to a sublattice S: the S-spins are fixed to omega, become holes,
  and every remaining spin i feels sum_{j in S} J(i - j) omega_j;
* Glauber evolution for time t with rate-1 independent flips: the evolved
  spin eta_i adds a field h_t * eta_i with h_t = atanh(exp(-2t)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .lattice import (BoundaryCondition, Configuration, FREE, Site, SpinModel, sublattice_predicate)


@dataclass(frozen=True)
class TransformSpec:
    kind: str                      # "decimation" | "glauber"
    sublattice: str | None = None
    t: float | None = None
    description: str = ""

    def __post_init__(self):
        if self.kind == "decimation":
            if self.sublattice is None:
                raise ValueError("decimation needs a sublattice mask")
            sublattice_predicate(self.sublattice)
        elif self.kind == "glauber":
            if self.t is None or not self.t >= 0:
                raise ValueError(f"glauber time must be >= 0, got {self.t}")
        else:
            raise ValueError(f"unknown transform kind {self.kind!r}")

    @classmethod
    def decimation(cls, sublattice: str = "even") -> "TransformSpec":
        return cls("decimation", sublattice=sublattice, description=f"decimation to {sublattice} sublattice")

    @classmethod
    def glauber(cls, t: float) -> "TransformSpec":
        return cls("glauber", t=float(t), description=f"infinite-temperature Glauber, t={t}")

    def as_dict(self) -> dict:
        return {"kind": self.kind, "sublattice": self.sublattice, "t": self.t}


@dataclass(frozen=True)
class ConstrainedModel:
    model: SpinModel
    base: SpinModel
    transform: TransformSpec
    image_digest: str
    induced_field: Mapping[Site, float] = field(default_factory=dict)
    metadata: Mapping[str, object] = field(default_factory=dict)


def pin_sites(model: SpinModel, values: Mapping[Site, int], periodic: bool = False) -> tuple[SpinModel, dict]:
    """Fix window spins to ``values``: they become holes and their bonds become fields.

    Returns the reduced model and the induced field per remaining site.
    """
    lat, it = model.lattice, model.interaction
    values = {tuple(s): int(v) for s, v in values.items()}
    unknown = [s for s in values if s not in lat.index]
    if unknown:
        raise ValueError(f"pinned site {unknown[0]} is not a window site")
    induced: dict[Site, float] = {}
    for x in lat.sites:
        if x in values:
            continue
        wx = it.weight(x)
        total = 0.0
        for r, J in it.couplings.items():
            for sign in (1, -1):
                y = tuple(c + sign * o for c, o in zip(x, r))
                if periodic:
                    y = lat.wrap(y)
                    if y == x:
                        continue
                if y in values:
                    total += J * wx * it.weight(y) * values[y]
        if total != 0.0:
            induced[x] = total
    reduced = SpinModel(lat.with_holes(values), it.with_field(induced), model.beta)
    return reduced, induced


def decimation_constrained_model(model: SpinModel, omega: Configuration, sublattice: str | None = None,
                                 periodic: bool = False) -> ConstrainedModel:
    """Model on the S-complement conditioned on decimated spins omega on S."""
    name = sublattice or model.lattice.sublattice
    if name is None:
        raise ValueError("no sublattice given and the lattice carries no mask")
    on_s = sublattice_predicate(name)
    s_sites = [x for x in model.sites if on_s(x)]
    missing = [x for x in s_sites if x not in omega]
    if missing:
        raise ValueError(f"omega does not cover decimated site {missing[0]}")
    if len(s_sites) == model.n:
        raise ValueError("sublattice covers the whole window; nothing left to constrain")
    reduced, induced = pin_sites(model, {x: omega[x] for x in s_sites}, periodic)
    omega_s = omega.restrict(s_sites)
    return ConstrainedModel(reduced, model, TransformSpec.decimation(name), omega_s.digest(), induced)


def glauber_kernel(t: float) -> np.ndarray:
    """p_t(sigma, eta) = (1 + exp(-2t) sigma eta) / 2; rows sigma = -1, +1, columns eta = -1, +1."""
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    c = math.exp(-2.0 * t)
    s = np.array([-1.0, 1.0])
    return 0.5 * (1.0 + c * np.outer(s, s))


def dynamical_field(t: float) -> float:
    """h_t = atanh(exp(-2t)); ``math.inf`` at t = 0 where conditioning pins the spin."""
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    if t == 0:
        return math.inf
    return math.atanh(math.exp(-2.0 * t))


def conditioning_field(t: float, beta: float) -> float:
    """Field h_t / beta, so that exp(-beta E) carries the factor exp(h_t sigma_i eta_i)."""
    if beta <= 0:
        raise ValueError("at beta = 0 the evolved-spin factor cannot be absorbed into a field")
    return dynamical_field(t) / beta


def evolution_constrained_model(model: SpinModel, t: float, eta: Configuration) -> ConstrainedModel:
    """Initial model conditioned on the time-t configuration eta on the whole window."""
    if t <= 0:
        raise ValueError("evolution_constrained_model needs t > 0 (t = 0 gives an infinite field)")
    missing = [x for x in model.sites if x not in eta]
    if missing:
        raise ValueError(f"eta does not cover site {missing[0]}")
    ht = dynamical_field(t)
    hf = conditioning_field(t, model.beta)
    induced = {x: hf * eta[x] for x in model.sites}
    constrained = model.with_interaction(model.interaction.with_field(induced))
    return ConstrainedModel(constrained, model, TransformSpec.glauber(t),
                            eta.restrict(model.sites).digest(), induced, {"h_t": ht})
