"""Scenario files: schema, validation and execution.

A scenario is one YAML document with a ``name``, a ``kind``, a format
version and one table of parameters named after the kind, e.g.::

    format: 1
    name: cw-threshold
    kind: cw_scan
    cw_scan:
      p: 0.75
      beta_min: 1.0
      beta_max: 2.0
      step: 0.01

Validation checks every field and every resource cap before anything runs.
Results are CSV (17 significant digits) and sorted-key JSON, followed by a
manifest with the config hash, seeds, package version and wall time.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import re
import time
from dataclasses import dataclass, field
from functools import partial
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import __version__
from .badness import ConfigGenerator, badness_profile, response_frontier
from .exact import ENUMERATION_CAP, FRONTIER_CAP, frontier_width
from .kac import KacProfile, LP_RANGE_CAP, betac_pipeline, kac_kernel, lp_free_energy_gap
from .lattice import (FREE, MINUS, PLUS, Interaction, Lattice, SpinModel, compile_model, SUBLATTICES)
from .meanfield import CWParams, cw_decimated_conditional, cw_finite_n_oracle, cw_jump_scan, richardson
from .mc import KINDS as MC_KINDS
from .parallel import pmap
from .quenched import DisorderField, JointModel, bad_disorder_probe, two_chain_geometry, two_chain_report
from .transform import TransformSpec

FORMAT_VERSION = 1
KINDS = ("badness_profile", "quenched_probe", "cw_scan", "lp_check", "betac_pipeline", "degeneracy",
         "oracle_crosscheck")
BOUNDARIES = {"plus": PLUS, "minus": MINUS, "free": FREE}


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads YAML 1.2 floats such as ``1e-15`` (YAML 1.1 wants a dot)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?([0-9]+\.[0-9]*|\.[0-9]+)([eE][-+]?[0-9]+)?$|^[-+]?[0-9]+[eE][-+]?[0-9]+$"
               r"|^[-+]?\.(inf|Inf|INF)$|^\.(nan|NaN|NAN)$"),
    list("-+0123456789."))


class ValidationError(ValueError):
    def __init__(self, path: str, message: str, line: int | None = None):
        self.path, self.message, self.line = path, message, line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{path}: {message}")


# ---------------------------------------------------------------------------
# typed parameter tables

def _check(cond: bool, path: str, message: str):
    if not cond:
        raise ValidationError(path, message)


def _number(v, path, lo=-math.inf, hi=math.inf, lo_open=False, hi_open=False) -> float:
    _check(isinstance(v, (int, float)) and not isinstance(v, bool), path, f"expected a number, got {v!r}")
    v = float(v)
    ok = math.isfinite(v) and (v > lo if lo_open else v >= lo) and (v < hi if hi_open else v <= hi)
    lb, rb = "(" if lo_open else "[", ")" if hi_open else "]"
    _check(ok, path, f"{v} outside the allowed range {lb}{lo}, {hi}{rb}")
    return v


def _integer(v, path, lo=-math.inf, hi=math.inf) -> int:
    _check(isinstance(v, int) and not isinstance(v, bool), path, f"expected an integer, got {v!r}")
    _check(lo <= v <= hi, path, f"{v} outside the allowed range [{lo}, {hi}]")
    return v


def _choice(v, path, options) -> str:
    _check(v in options, path, f"{v!r} is not one of {sorted(options)}")
    return v


def _list(v, path, item, nonempty=True, increasing=False) -> list:
    _check(isinstance(v, list), path, f"expected a list, got {v!r}")
    _check(not nonempty or len(v) > 0, path, "list must not be empty")
    out = [item(x, f"{path}[{k}]") for k, x in enumerate(v)]
    if increasing:
        _check(all(b > a for a, b in zip(out, out[1:])), path, "values must be strictly increasing")
    return out


@dataclass
class ModelConfig:
    d: int = 2
    beta: float = 1.0
    J: float = 1.0
    h: float = 0.0
    interaction: str = "nearest_neighbor"        # or "kac"
    kac_profile: str = "tophat"
    gamma: float = 1.0

    def validate(self, path: str):
        _integer(self.d, f"{path}.d", 1, 3)
        _number(self.beta, f"{path}.beta", 0.0, lo_open=True)
        _number(self.J, f"{path}.J")
        _number(self.h, f"{path}.h")
        _choice(self.interaction, f"{path}.interaction", {"nearest_neighbor", "kac"})
        _choice(self.kac_profile, f"{path}.kac_profile", {"tophat", "triangle"})
        _number(self.gamma, f"{path}.gamma", 0.0, 1.0, lo_open=True)

    def build(self) -> SpinModel:
        if self.interaction == "kac":
            inter = kac_kernel(KacProfile(self.kac_profile, self.gamma, self.d), self.h)
        else:
            inter = Interaction.nearest_neighbor(self.d, self.J, self.h)
        return SpinModel(Lattice.centered(0, self.d), inter, self.beta)


@dataclass
class TransformConfig:
    kind: str = "decimation"
    sublattice: str = "even"
    t: float = 1.0

    def validate(self, path: str):
        _choice(self.kind, f"{path}.kind", {"decimation", "glauber"})
        _choice(self.sublattice, f"{path}.sublattice", set(SUBLATTICES))
        _number(self.t, f"{path}.t", 0.0)

    def build(self) -> TransformSpec:
        if self.kind == "decimation":
            return TransformSpec.decimation(self.sublattice)
        return TransformSpec.glauber(self.t)


@dataclass
class GeneratorConfig:
    kind: str = "checkerboard"
    spacing: int = 2
    phase: int = 1
    q: float = 0.5
    seed: int = 0
    value: int = 1

    def validate(self, path: str):
        _choice(self.kind, f"{path}.kind", {"checkerboard", "bernoulli", "constant"})
        _integer(self.spacing, f"{path}.spacing", 1)
        _choice(self.phase, f"{path}.phase", {-1, 1})
        _number(self.q, f"{path}.q", 0.0, 1.0)
        _integer(self.seed, f"{path}.seed", 0)
        _choice(self.value, f"{path}.value", {-1, 1})

    def build(self) -> ConfigGenerator:
        if self.kind == "checkerboard":
            return ConfigGenerator.checkerboard(self.spacing, self.phase)
        if self.kind == "bernoulli":
            return ConfigGenerator.bernoulli(self.q, self.seed)
        return ConfigGenerator.constant(self.value)


@dataclass
class BadnessProfileParams:
    model: ModelConfig = field(default_factory=ModelConfig)
    transform: TransformConfig = field(default_factory=TransformConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    radii: list = field(default_factory=lambda: [1, 2, 3])
    margin: int | None = None
    boundary: str = "plus"
    frontier_cap: int = FRONTIER_CAP

    def validate(self, path: str):
        self.model.validate(f"{path}.model")
        self.transform.validate(f"{path}.transform")
        self.generator.validate(f"{path}.generator")
        radii = _list(self.radii, f"{path}.radii", lambda v, p: _integer(v, p, 1), increasing=True)
        if self.margin is not None:
            _integer(self.margin, f"{path}.margin", 0)
        _choice(self.boundary, f"{path}.boundary", set(BOUNDARIES))
        _integer(self.frontier_cap, f"{path}.frontier_cap", 1, 30)
        if self.transform.kind == "decimation":
            _check(SUBLATTICES[self.transform.sublattice]((0,) * self.model.d), f"{path}.transform.sublattice",
                   "the origin must lie on the retained sublattice")
        width = response_frontier(self.model.build(), self.transform.build(), radii[-1], self.margin,
                                  BOUNDARIES[self.boundary])
        _check(width <= self.frontier_cap, f"{path}.radii",
               f"largest window needs an elimination frontier of 2^{width} states; cap is 2^{self.frontier_cap}")

    def run(self, out: Path, jobs: int, seeds: list[int]) -> list[Path]:
        curve = badness_profile(self.model.build(), self.transform.build(), self.generator.build(), self.radii,
                                self.margin, BOUNDARIES[self.boundary], jobs=jobs)
        curve.write_csv(out / "variation.csv")
        curve.write_json(out / "summary.json")
        return [out / "variation.csv", out / "summary.json"]


@dataclass
class QuenchedProbeParams:
    beta: float = 1.0
    J: float = 1.0
    h: float = 1.0
    q: float = 0.5
    disorder_seed: int = 0
    window: int = 4
    radii: list = field(default_factory=lambda: [1, 2, 3])
    boundary: str = "free"
    frontier_cap: int = FRONTIER_CAP

    def validate(self, path: str):
        _number(self.beta, f"{path}.beta", 0.0, lo_open=True)
        _number(self.J, f"{path}.J")
        _number(self.h, f"{path}.h")
        _number(self.q, f"{path}.q", 0.0, 1.0)
        _integer(self.disorder_seed, f"{path}.disorder_seed", 0)
        _integer(self.window, f"{path}.window", 1)
        radii = _list(self.radii, f"{path}.radii", lambda v, p: _integer(v, p, 0), increasing=True)
        _check(radii[-1] < self.window, f"{path}.radii", "inner boxes must be smaller than the window")
        _choice(self.boundary, f"{path}.boundary", set(BOUNDARIES))
        _integer(self.frontier_cap, f"{path}.frontier_cap", 1, 30)
        lat = Lattice.centered(self.window, 2)
        width = frontier_width(compile_model(SpinModel(lat, Interaction.nearest_neighbor(2)), FREE))
        _check(width <= self.frontier_cap, f"{path}.window",
               f"window needs an elimination frontier of 2^{width} states; cap is 2^{self.frontier_cap}")

    def run(self, out: Path, jobs: int, seeds: list[int]) -> list[Path]:
        lattice = Lattice.centered(self.window, 2)
        dis = DisorderField("random_field", h=self.h, q=self.q).sample(lattice, self.disorder_seed)
        jm = JointModel(dis, lattice, self.J, self.beta)
        bc = BOUNDARIES[self.boundary]
        values = pmap(partial(_probe_cell, jm=jm, bc=bc), self.radii, jobs)
        _write_rows(out / "probe.csv", ["radius", "probe"], zip(self.radii, values))
        _write_json(out / "disorder.json", dis.as_dict())
        return [out / "probe.csv", out / "disorder.json"]


def _probe_cell(radius, jm, bc):
    return bad_disorder_probe(jm, jm.disorder.realization, Lattice.centered(radius, 2), bc)


@dataclass
class CWScanParams:
    p: float = 0.75
    h: float = 0.0
    beta_min: float = 1.0
    beta_max: float = 2.0
    step: float = 0.01

    def validate(self, path: str):
        _number(self.p, f"{path}.p", 0.0, 1.0, lo_open=True, hi_open=True)
        _number(self.h, f"{path}.h")
        _number(self.beta_min, f"{path}.beta_min", 0.0, lo_open=True)
        _number(self.beta_max, f"{path}.beta_max", self.beta_min)
        _number(self.step, f"{path}.step", 0.0, lo_open=True)
        _check((self.beta_max - self.beta_min) / self.step <= 1e6, f"{path}.step", "grid exceeds 10^6 points")

    def betas(self) -> list[float]:
        n = int(round((self.beta_max - self.beta_min) / self.step))
        return [round(self.beta_min + k * self.step, 12) for k in range(n + 1)]

    def run(self, out: Path, jobs: int, seeds: list[int]) -> list[Path]:
        scan = cw_jump_scan(self.betas(), self.p, self.h)
        _write_rows(out / "scan.csv", ["beta", "jump"], scan.rows())
        summary = scan.summary()
        summary["grid_step"] = self.step
        _write_json(out / "threshold.json", summary)
        return [out / "scan.csv", out / "threshold.json"]


@dataclass
class LPCheckParams:
    profile: str = "tophat"
    gammas: list = field(default_factory=lambda: [1.0, 0.5, 0.25, 0.125])
    betas: list = field(default_factory=lambda: [2.0])
    fields: list = field(default_factory=lambda: [0.0])

    def validate(self, path: str):
        _choice(self.profile, f"{path}.profile", {"tophat", "triangle"})
        gammas = _list(self.gammas, f"{path}.gammas", lambda v, p: _number(v, p, 0.0, 1.0, lo_open=True))
        _list(self.betas, f"{path}.betas", lambda v, p: _number(v, p, 0.0, lo_open=True))
        _list(self.fields, f"{path}.fields", _number)
        for k, g in enumerate(gammas):
            R = KacProfile(self.profile, g, 1).range
            _check(R <= LP_RANGE_CAP, f"{path}.gammas[{k}]",
                   f"range {R} needs a 2^{R}-state transfer matrix; cap is 2^{LP_RANGE_CAP}")

    def run(self, out: Path, jobs: int, seeds: list[int]) -> list[Path]:
        cells = [(b, h, g) for b in self.betas for h in self.fields for g in self.gammas]
        results = pmap(partial(_lp_cell, profile=self.profile), cells, jobs)
        _write_rows(out / "lp.csv", ["beta", "h", "gamma", "f_gamma", "f_cw", "gap", "kernel_sum"],
                    [(r.beta, r.h, r.gamma, r.f_gamma, r.f_cw, r.gap, r.kernel_sum) for r in results])
        monotone = {}
        for b in self.betas:
            for h in self.fields:
                seq = [r for r in results if r.beta == b and r.h == h]
                seq.sort(key=lambda r: -r.gamma)
                gaps = [r.gap for r in seq]
                monotone[f"beta={b!r},h={h!r}"] = all(y < x for x, y in zip(gaps, gaps[1:]))
        _write_json(out / "summary.json", {"profile": self.profile, "gap_decreasing_in_1/gamma": monotone,
                                           "max_f_gamma_minus_f_cw": max(r.f_gamma - r.f_cw for r in results)})
        return [out / "lp.csv", out / "summary.json"]


def _lp_cell(cell, profile):
    b, h, g = cell
    return lp_free_energy_gap(KacProfile(profile, g, 1), b, h)


@dataclass
class BetacParams:
    profile: str = "tophat"
    gamma: float = 1.0
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    sizes: list = field(default_factory=lambda: [8, 12])
    betas: list = field(default_factory=lambda: [1.1, 1.2, 1.3, 1.4, 1.5])
    sweeps: int = 20000
    burn_in: int | None = None
    update: str = "heatbath"
    bootstrap: int = 200

    def validate(self, path: str):
        _choice(self.profile, f"{path}.profile", {"tophat", "triangle"})
        _number(self.gamma, f"{path}.gamma", 0.0, 1.0, lo_open=True)
        self.generator.validate(f"{path}.generator")
        R = KacProfile(self.profile, self.gamma, 2).range
        sizes = _list(self.sizes, f"{path}.sizes", lambda v, p: _integer(v, p, 4), increasing=True)
        _check(len(sizes) >= 2, f"{path}.sizes", "need at least two lattice sizes")
        for k, L in enumerate(sizes):
            _check(L % 4 == 0, f"{path}.sizes[{k}]", f"{L} is not a multiple of 4")
            _check(R < L // 2, f"{path}.sizes[{k}]", f"kernel range {R} must stay below L/2 = {L // 2}")
        _list(self.betas, f"{path}.betas", lambda v, p: _number(v, p, 0.0, lo_open=True), increasing=True)
        _integer(self.sweeps, f"{path}.sweeps", 100)
        if self.burn_in is not None:
            _integer(self.burn_in, f"{path}.burn_in", 0, self.sweeps - 100)
        _choice(self.update, f"{path}.update", set(MC_KINDS))
        _integer(self.bootstrap, f"{path}.bootstrap", 2)

    def run(self, out: Path, jobs: int, seeds: list[int]) -> list[Path]:
        report = betac_pipeline(KacProfile(self.profile, self.gamma, 2), self.generator.build(), self.sizes,
                                self.betas, seeds, self.sweeps, self.burn_in, self.update, self.bootstrap, jobs)
        report.write_csv(out / "binder.csv")
        report.write_json(out / "crossing.json")
        return [out / "binder.csv", out / "crossing.json"]


@dataclass
class DegeneracyParams:
    length: int = 4
    beta: float = 20.0
    J: float = 1.0
    enumeration_cap: int = ENUMERATION_CAP

    def validate(self, path: str):
        _integer(self.length, f"{path}.length", 2)
        _number(self.beta, f"{path}.beta", 0.0, lo_open=True)
        _number(self.J, f"{path}.J", 0.0, lo_open=True)
        _integer(self.enumeration_cap, f"{path}.enumeration_cap", 1, ENUMERATION_CAP)
        lattice, _, _ = two_chain_geometry(self.length)
        _check(len(lattice) <= self.enumeration_cap, f"{path}.length",
               f"window of {len(lattice)} sites needs 2^{len(lattice)} states; "
               f"enumeration cap is 2^{self.enumeration_cap}")

    def run(self, out: Path, jobs: int, seeds: list[int]) -> list[Path]:
        report = two_chain_report(self.length, self.beta, self.J)
        _write_json(out / "degeneracy.json", report.as_dict())
        return [out / "degeneracy.json"]


@dataclass
class OracleParams:
    p: float = 0.75
    h: float = 0.0
    betas: list = field(default_factory=lambda: [0.8, 1.2, 1.5, 2.0, 3.0])
    alphas: list = field(default_factory=lambda: [-0.6, -0.2, 0.2, 0.6])
    sizes: list = field(default_factory=lambda: [500, 1000, 2000])
    tolerance: float = 5e-3

    def validate(self, path: str):
        _number(self.p, f"{path}.p", 0.0, 1.0, lo_open=True, hi_open=True)
        _number(self.h, f"{path}.h")
        _list(self.betas, f"{path}.betas", lambda v, p: _number(v, p, 0.0, lo_open=True))
        alphas = _list(self.alphas, f"{path}.alphas", lambda v, p: _number(v, p, -1.0, 1.0))
        sizes = _list(self.sizes, f"{path}.sizes", lambda v, p: _integer(v, p, 1, 10_000), increasing=True)
        _number(self.tolerance, f"{path}.tolerance", 0.0, lo_open=True)
        for N in sizes:
            for a in alphas:
                try:
                    cw_finite_n_oracle(N, CWParams(1.0, self.h, self.p, a))
                except ValueError as exc:
                    raise ValidationError(f"{path}.sizes", f"N={N}, alpha={a}: {exc}") from None

    def run(self, out: Path, jobs: int, seeds: list[int]) -> list[Path]:
        cells = [(b, a) for b in self.betas for a in self.alphas]
        rows = pmap(partial(_oracle_cell, p=self.p, h=self.h, sizes=self.sizes), cells, jobs)
        _write_rows(out / "oracle.csv", ["beta", "alpha", "large_n", "extrapolated", "abs_error"], rows)
        worst = max(r[4] for r in rows)
        _write_json(out / "summary.json", {"max_abs_error": worst, "tolerance": self.tolerance,
                                           "within_tolerance": worst <= self.tolerance, "sizes": self.sizes,
                                           "p": self.p, "h": self.h})
        return [out / "oracle.csv", out / "summary.json"]


def _oracle_cell(cell, p, h, sizes):
    b, a = cell
    params = CWParams(b, h, p, a)
    large = cw_decimated_conditional(params)
    extra = richardson(sizes, [cw_finite_n_oracle(N, params) for N in sizes])
    return b, a, large, extra, abs(large - extra)


PARAMS: dict[str, type] = {
    "badness_profile": BadnessProfileParams,
    "quenched_probe": QuenchedProbeParams,
    "cw_scan": CWScanParams,
    "lp_check": LPCheckParams,
    "betac_pipeline": BetacParams,
    "degeneracy": DegeneracyParams,
    "oracle_crosscheck": OracleParams,
}


# ---------------------------------------------------------------------------
# parsing

def _line_index(node, path="", out=None) -> dict[str, int]:
    """Map dotted field paths to 1-based source lines."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            p = f"{path}.{k.value}" if path else str(k.value)
            out[p] = k.start_mark.line + 1
            _line_index(v, p, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            p = f"{path}[{i}]"
            out[p] = v.start_mark.line + 1
            _line_index(v, p, out)
    return out


def _nearest_line(lines: dict[str, int], path: str) -> int | None:
    """Line of ``path`` or of its closest enclosing field present in the file."""
    while path:
        if path in lines:
            return lines[path]
        shorter = re.sub(r"(\.[^.\[]+|\[\d+\])$", "", path)
        if shorter == path:
            break
        path = shorter
    return None


def _from_mapping(cls, data, path: str):
    _check(isinstance(data, dict), path, f"expected a table, got {data!r}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    _check(not unknown, f"{path}.{unknown[0]}" if unknown else path, f"unknown field; allowed: {sorted(names)}")
    kwargs = {}
    for k, v in data.items():
        sub = {"model": ModelConfig, "transform": TransformConfig, "generator": GeneratorConfig}.get(k)
        kwargs[k] = _from_mapping(sub, v, f"{path}.{k}") if sub and isinstance(names[k].default_factory, type) \
            else v
    return cls(**kwargs)


@dataclass
class Scenario:
    name: str
    kind: str
    params: Any
    seeds: list = field(default_factory=lambda: [0])
    output: str | None = None
    format: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        d = {"format": self.format, "name": self.name, "kind": self.kind, "seeds": list(self.seeds),
             self.kind: dataclasses.asdict(self.params)}
        if self.output is not None:
            d["output"] = self.output
        return d

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def validate(self):
        self.params.validate(self.kind)

    def run(self, out: Path, jobs: int) -> list[Path]:
        return self.params.run(out, jobs, list(self.seeds))


def parse_scenario(text: str) -> Scenario:
    """Parse and fully validate scenario text; raises ValidationError with a line number when known."""
    try:
        node = yaml.compose(text, Loader=_Loader)
        data = yaml.load(text, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ValidationError("<document>", f"YAML syntax error: {exc.problem}",
                              None if mark is None else mark.line + 1) from None
    lines = _line_index(node) if node is not None else {}
    try:
        _check(isinstance(data, dict), "<document>", "a scenario must be a table")
        allowed = {"format", "name", "kind", "seeds", "output"}
        kind = _choice(data.get("kind"), "kind", set(KINDS))
        unknown = sorted(set(data) - allowed - {kind})
        _check(not unknown, unknown[0] if unknown else "", f"unknown top-level field; allowed: "
                                                          f"{sorted(allowed | {kind})}")
        _check(data.get("format", FORMAT_VERSION) == FORMAT_VERSION, "format",
               f"unsupported format {data.get('format')!r}; this version reads format {FORMAT_VERSION}")
        name = data.get("name")
        _check(isinstance(name, str) and name != "", "name", "scenario needs a non-empty name")
        seeds = _list(data.get("seeds", [0]), "seeds", lambda v, p: _integer(v, p, 0, 2 ** 63 - 1))
        output = data.get("output")
        _check(output is None or isinstance(output, str), "output", "output must be a path string")
        params = _from_mapping(PARAMS[kind], data.get(kind, {}) or {}, kind)
        scenario = Scenario(name, kind, params, seeds, output)
        scenario.validate()
    except ValidationError as exc:
        line = exc.line if exc.line is not None else _nearest_line(lines, exc.path)
        raise ValidationError(exc.path, exc.message, line) from None
    except TypeError as exc:
        raise ValidationError("<document>", str(exc)) from None
    return scenario


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text())


# ---------------------------------------------------------------------------
# execution

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _write_rows(path: Path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(repr(float(obj))) if math.isfinite(obj) else str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path: Path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunResult:
    out: Path
    outputs: list[Path]
    failures: list[dict]
    manifest: dict

    @property
    def ok(self) -> bool:
        return not self.failures


def run_scenario(scenario: Scenario, config_text: str, out: Path, jobs: int) -> RunResult:
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    failures, outputs = [], []
    try:
        outputs = scenario.run(out, jobs)
    except Exception as exc:  # recorded in the manifest; the exit status reports it
        failures.append({"cell": scenario.kind, "error": f"{type(exc).__name__}: {exc}"})
    manifest = {
        "name": scenario.name,
        "kind": scenario.kind,
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "format": scenario.format,
        "seeds": list(scenario.seeds),
        "version": __version__,
        "jobs": jobs,
        "wall_time_s": time.perf_counter() - start,
        "outputs": {p.name: _sha256(p) for p in outputs},
        "failures": failures,
    }
    _write_json(out / "manifest.json", manifest)
    return RunResult(out, outputs, failures, manifest)


def example_files() -> list[Path]:
    root = resources.files("nongibbs") / "examples"
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".yaml"))


def catalog() -> str:
    lines = ["scenario kinds:"]
    for kind in KINDS:
        fields = ", ".join(f.name for f in dataclasses.fields(PARAMS[kind]))
        lines.append(f"  {kind}: {fields}")
    lines.append("example files:")
    lines.extend(f"  {p.name}" for p in example_files())
    return "\n".join(lines)
