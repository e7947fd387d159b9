"""Finite-volume quasilocality test for transformed measures.

For an image configuration omega, a box Lambda of radius R around the origin
and two exterior image configurations eta1, eta2, the variation is

    V = max |P(s'_0 = + | omega on Lambda, eta1 outside) - P(s'_0 = + | omega on Lambda, eta2 outside)|

where s' are image spins.  Infinite volume is replaced by a window of radius
R + margin with a fixed original-spin boundary condition outside it, and the
supremum over eta by a finite, labelled candidate set.  Conditional
probabilities are exact (variable elimination over the original spins).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

from .exact import FRONTIER_CAP, frontier_width, log_partition
from .lattice import (PLUS, BoundaryCondition, Configuration, Lattice, Site, SpinModel, compile_model,
                      origin, sublattice_predicate)
from .parallel import pmap
from .transform import TransformSpec, conditioning_field, dynamical_field, pin_sites

LINEAR_RESPONSE_FIELD = 1e-6


class ConditioningError(ArithmeticError):
    """The conditioning event has probability zero."""


@dataclass(frozen=True)
class ConfigGenerator:
    kind: str                          # checkerboard | bernoulli | perturbation | constant
    q: float = 0.5
    seed: int = 0
    value: int = 1
    spacing: int = 1
    phase: int = 1
    base: "ConfigGenerator | None" = None
    flips: frozenset = frozenset()

    def __post_init__(self):
        if self.kind not in ("checkerboard", "bernoulli", "perturbation", "constant"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q must lie in [0, 1], got {self.q}")
        if self.kind == "perturbation" and self.base is None:
            raise ValueError("perturbation needs a base generator")
        if self.value not in (-1, 1) or self.phase not in (-1, 1):
            raise ValueError("constant value and checkerboard phase must be +-1")
        object.__setattr__(self, "flips", frozenset(tuple(s) for s in self.flips))

    @classmethod
    def checkerboard(cls, spacing: int = 1, phase: int = 1) -> "ConfigGenerator":
        return cls("checkerboard", spacing=spacing, phase=phase)

    @classmethod
    def bernoulli(cls, q: float, seed: int = 0) -> "ConfigGenerator":
        return cls("bernoulli", q=q, seed=seed)

    @classmethod
    def constant(cls, value: int = 1) -> "ConfigGenerator":
        return cls("constant", value=value)

    @classmethod
    def perturbation(cls, base: "ConfigGenerator", flips) -> "ConfigGenerator":
        return cls("perturbation", base=base, flips=frozenset(flips))

    def describe(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "checkerboard":
            d.update(spacing=self.spacing, phase=self.phase)
        elif self.kind == "bernoulli":
            d.update(q=self.q, seed=self.seed)
        elif self.kind == "constant":
            d.update(value=self.value)
        else:
            d.update(base=self.base.describe(), flips=sorted(list(s) for s in self.flips))
        return d


def generate(gen: ConfigGenerator, sites) -> Configuration:
    """Deterministic image configuration on ``sites`` (a Lattice or an iterable of sites)."""
    sites = list(sites.sites if isinstance(sites, Lattice) else sites)
    if gen.kind == "constant":
        return Configuration({s: gen.value for s in sites})
    if gen.kind == "checkerboard":
        return Configuration({s: gen.phase * (-1) ** (sum(c // gen.spacing for c in s) % 2) for s in sites})
    if gen.kind == "bernoulli":
        rng = np.random.Generator(np.random.PCG64(gen.seed))
        u = rng.random(len(sites))
        return Configuration({s: 1 if x < gen.q else -1 for s, x in zip(sorted(sites), u)})
    base = generate(gen.base, sites)
    return base.updated({s: -base[s] for s in gen.flips if s in base})


def default_candidates(transform: TransformSpec) -> dict[str, ConfigGenerator]:
    spacing = 2 if transform.kind == "decimation" else 1
    return {
        "plus": ConfigGenerator.constant(1),
        "minus": ConfigGenerator.constant(-1),
        "checkerboard": ConfigGenerator.checkerboard(spacing, 1),
        "checkerboard_flip": ConfigGenerator.checkerboard(spacing, -1),
    }


def default_margin(model: SpinModel) -> int:
    return max(model.interaction.range, 1) + 2


def image_sites(window: Lattice, transform: TransformSpec) -> list[Site]:
    if transform.kind == "decimation":
        on_s = sublattice_predicate(transform.sublattice)
        return [s for s in window.sites if on_s(s)]
    return list(window.sites)


def _in_box(site: Site, radius: int) -> bool:
    return all(abs(c) <= radius for c in site)


@dataclass(frozen=True)
class _ImageResponse:
    """Either the direct conditional probability or its first-order response."""
    value: float          # P(s'_0 = +) (direct) or slope (linear)
    linear: bool


def _image_response(model: SpinModel, transform: TransformSpec, image: Mapping[Site, int],
                    bc: BoundaryCondition) -> _ImageResponse:
    o = origin(model.lattice.dimension)
    if transform.kind == "decimation" or transform.t == 0:
        reduced, _ = pin_sites(model, image)
        cm = compile_model(reduced, bc)
        a = reduced.lattice.index[o]
        lp, _ = log_partition(cm, {a: 1})
        lm, _ = log_partition(cm, {a: -1})
        if not (math.isfinite(lp) or math.isfinite(lm)):
            raise ConditioningError("conditioning on the image configuration has probability zero")
        return _ImageResponse(float(expit(lp - lm)), False)

    ht = dynamical_field(transform.t)
    decay = math.exp(-2.0 * transform.t)
    if model.beta == 0:
        # product measure: the origin ignores every other evolved spin
        return _ImageResponse(0.5, False)
    a = model.lattice.index[o]
    if ht >= LINEAR_RESPONSE_FIELD:
        hf = conditioning_field(transform.t, model.beta)
        fields = {s: hf * v for s, v in image.items()}
        cm = compile_model(model.with_interaction(model.interaction.with_field(fields)), bc)
        lp, _ = log_partition(cm, {a: 1})
        lm, _ = log_partition(cm, {a: -1})
        m0 = math.tanh(0.5 * (lp - lm))
        return _ImageResponse(0.5 * (1.0 + decay * m0), False)
    # dynamical fields below double resolution: d<s_0>/dh along the image direction
    cm = compile_model(model, bc)
    c = np.zeros(cm.n)
    for s, v in image.items():
        c[model.lattice.index[s]] = v
    lp, dp = log_partition(cm, {a: 1}, c)
    lm, dm = log_partition(cm, {a: -1}, c)
    pp = float(expit(lp - lm))
    slope = 2.0 * pp * (1.0 - pp) * (dp - dm)
    # the derivative is taken in field units, in which the perturbation is h_t / beta
    return _ImageResponse(0.5 * decay * ht / model.beta * slope, True)


@dataclass(frozen=True)
class Variation:
    radius: int
    value: float
    eta1: str
    eta2: str
    probabilities: Mapping[str, float]


def variation_details(model: SpinModel, transform: TransformSpec, omega: Configuration, radius: int,
                      margin: int | None = None, bc: BoundaryCondition = PLUS,
                      candidates: Mapping[str, ConfigGenerator] | None = None) -> Variation:
    d = model.lattice.dimension
    margin = default_margin(model) if margin is None else margin
    window = Lattice.centered(radius + margin, d)
    wmodel = model.with_lattice(window)
    o = origin(d)
    if transform.kind == "decimation" and not sublattice_predicate(transform.sublattice)(o):
        raise ValueError("decimation variation needs the origin on the retained sublattice")
    img = [s for s in image_sites(window, transform) if s != o]
    inner = [s for s in img if _in_box(s, radius)]
    outer = [s for s in img if not _in_box(s, radius)]
    missing = [s for s in inner if s not in omega]
    if missing:
        raise ValueError(f"omega does not cover image site {missing[0]}")
    candidates = default_candidates(transform) if candidates is None else candidates
    responses = {}
    for name, gen in candidates.items():
        eta = generate(gen, outer)
        image = {**{s: omega[s] for s in inner}, **eta.values}
        responses[name] = _image_response(wmodel, transform, image, bc)
    vals = {k: r.value for k, r in responses.items()}
    hi = max(vals, key=vals.get)
    lo = min(vals, key=vals.get)
    value = vals[hi] - vals[lo]
    if not all(r.linear for r in responses.values()):
        value = min(max(value, 0.0), 1.0)
    return Variation(radius, float(value), hi, lo, vals)


def variation_at_volume(model: SpinModel, transform: TransformSpec, omega: Configuration, radius: int,
                        margin: int | None = None, bc: BoundaryCondition = PLUS,
                        candidates: Mapping[str, ConfigGenerator] | None = None) -> float:
    return variation_details(model, transform, omega, radius, margin, bc, candidates).value


def response_frontier(model: SpinModel, transform: TransformSpec, radius: int, margin: int | None = None,
                      bc: BoundaryCondition = PLUS) -> int:
    """log2 of the elimination frontier needed for one conditional probability at ``radius``."""
    d = model.lattice.dimension
    margin = default_margin(model) if margin is None else margin
    window = Lattice.centered(radius + margin, d)
    wmodel = model.with_lattice(window)
    if transform.kind == "decimation" or transform.t == 0:
        o = origin(d)
        wmodel, _ = pin_sites(wmodel, {s: 1 for s in image_sites(window, transform) if s != o})
    return frontier_width(compile_model(wmodel, bc))


def largest_exact_radius(model: SpinModel, transform: TransformSpec, margin: int | None = None,
                         bc: BoundaryCondition = PLUS, cap: int = FRONTIER_CAP, limit: int = 256) -> int:
    """Largest radius whose window stays within the elimination cap (0 if none does)."""
    best = 0
    for r in range(1, limit + 1):
        if response_frontier(model, transform, r, margin, bc) > cap:
            break
        best = r
    return best


@dataclass
class VariationCurve:
    radii: list[int]
    variations: list[float]
    eta_pairs: list[tuple[str, str]]
    margin: int
    provenance: dict = field(default_factory=dict)
    generator: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ValueError("radii must be strictly increasing")

    @property
    def floor(self) -> float:
        return min(self.variations)

    @property
    def slope(self) -> float:
        if len(self.radii) < 2:
            return 0.0
        return float(np.polyfit(self.radii, self.variations, 1)[0])

    def summary(self) -> dict:
        return {"radii": self.radii, "min_variation": self.floor, "fit_slope": self.slope,
                "margin": self.margin, "generator": self.generator, **self.provenance}

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["radius", "variation", "eta1", "eta2"])
            for r, v, (a, b) in zip(self.radii, self.variations, self.eta_pairs):
                w.writerow([r, f"{v:.17g}", a, b])

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _profile_cell(radius, model, transform, omega, margin, bc, candidates):
    return variation_details(model, transform, omega, radius, margin, bc, candidates)


def badness_profile(model: SpinModel, transform: TransformSpec, gen: ConfigGenerator, radii: Sequence[int],
                    margin: int | None = None, bc: BoundaryCondition = PLUS,
                    candidates: Mapping[str, ConfigGenerator] | None = None,
                    jobs: int | None = 1) -> VariationCurve:
    radii = sorted(int(r) for r in radii)
    margin = default_margin(model) if margin is None else margin
    big = Lattice.centered(radii[-1], model.lattice.dimension)
    omega = generate(gen, image_sites(big, transform))
    candidates = default_candidates(transform) if candidates is None else dict(candidates)
    cells = pmap(partial(_profile_cell, model=model, transform=transform, omega=omega, margin=margin,
                         bc=bc, candidates=candidates), radii, jobs)
    provenance = {"transform": transform.as_dict(), "model": model.digest(), "beta": model.beta,
                  "boundary": bc.kind, "candidates": sorted(candidates), "omega": omega.digest()}
    return VariationCurve(radii, [c.value for c in cells], [(c.eta1, c.eta2) for c in cells], margin,
                          provenance, gen.describe())
