"""Quenched joint measures K(n, sigma) = P(n) exp(-beta H(n, sigma)) / Z(n).

Two disorder families:

* site dilution, n_i in {0, 1} with P(n_i = 0) = p; bonds carry J n_i n_j.
  Empty sites keep a free spin, so every empty site contributes log 2 to
  log Z(n).  With that convention the free-energy increment of occupying a
  site isolates the entropy change of the occupied clusters.
* random fields, n_i in {-1, +1} with P(n_i = +1) = q; site fields h n_i.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .exact import ground_state_degeneracy, log_partition, site_magnetization
from .lattice import (FREE, OCCUPATION, SPIN, BoundaryCondition, Configuration, Interaction, Lattice, Site,
                      SpinModel, compile_model)

EMPTY_SITE_CONVENTION = "empty sites carry a free spin (log 2 each in log Z)"


@dataclass(frozen=True)
class DisorderField:
    kind: str                  # "dilution" | "random_field"
    p: float = 0.0             # dilution: P(n_i = 0)
    h: float = 0.0             # random field strength
    q: float = 0.5             # random field: P(n_i = +1)
    realization: Configuration | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("dilution", "random_field"):
            raise ValueError(f"unknown disorder kind {self.kind!r}")
        for name in ("p", "q"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.realization is not None and self.realization.alphabet != self.alphabet:
            raise ValueError(f"{self.kind} realizations take values in {self.alphabet}")

    @property
    def alphabet(self) -> tuple[int, ...]:
        return OCCUPATION if self.kind == "dilution" else SPIN

    def site_log_probability(self, value: int) -> float:
        if self.kind == "dilution":
            pr = self.p if value == 0 else 1.0 - self.p
        else:
            pr = self.q if value == 1 else 1.0 - self.q
        return math.log(pr) if pr > 0 else -math.inf

    def log_probability(self, n: Configuration) -> float:
        return sum(self.site_log_probability(v) for v in n.values.values())

    def sample(self, lattice: Lattice, seed: int) -> "DisorderField":
        rng = np.random.Generator(np.random.PCG64(seed))
        u = rng.random(len(lattice.sites))
        if self.kind == "dilution":
            vals = [0 if x < self.p else 1 for x in u]
        else:
            vals = [1 if x < self.q else -1 for x in u]
        n = Configuration.from_array(lattice.sites, vals, self.alphabet)
        return DisorderField(self.kind, self.p, self.h, self.q, n, seed)

    def as_dict(self) -> dict:
        out = {"kind": self.kind, "p": self.p, "h": self.h, "q": self.q, "seed": self.seed}
        if self.realization is not None:
            sites = sorted(self.realization.values)
            out["sites"] = [list(s) for s in sites]
            out["values"] = [self.realization[s] for s in sites]
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "DisorderField":
        real = None
        if "sites" in d:
            alphabet = OCCUPATION if d["kind"] == "dilution" else SPIN
            real = Configuration.from_array([tuple(s) for s in d["sites"]], d["values"], alphabet)
        return cls(d["kind"], d.get("p", 0.0), d.get("h", 0.0), d.get("q", 0.5), real, d.get("seed"))


@dataclass(frozen=True)
class JointModel:
    disorder: DisorderField
    lattice: Lattice
    J: float = 1.0
    beta: float = 1.0

    def induced_model(self, n: Configuration, drop_empty: bool = False) -> SpinModel:
        """Spin model mu[n].  ``drop_empty`` removes empty sites instead of keeping free spins."""
        missing = [s for s in self.lattice.sites if s not in n]
        if missing:
            raise ValueError(f"disorder does not cover site {missing[0]}")
        d = self.lattice.dimension
        if self.disorder.kind == "dilution":
            weights = {s: float(n[s]) for s in self.lattice.sites}
            lattice = self.lattice
            if drop_empty:
                lattice = lattice.with_holes(s for s in lattice.sites if n[s] == 0)
            return SpinModel(lattice, Interaction.nearest_neighbor(d, self.J, site_weights=weights), self.beta)
        fields = {s: self.disorder.h * n[s] for s in self.lattice.sites}
        return SpinModel(self.lattice, Interaction.nearest_neighbor(d, self.J, field=fields), self.beta)

    def log_z(self, n: Configuration, bc: BoundaryCondition = FREE) -> float:
        return log_partition(compile_model(self.induced_model(n), bc))[0]


def joint_weight(jm: JointModel, n: Configuration, sigma: Configuration, bc: BoundaryCondition = FREE,
                 log: bool = False) -> float:
    """K(n, sigma) = P(n) exp(-beta H(n, sigma)) / Z(n)."""
    model = jm.induced_model(n)
    cm = compile_model(model, bc)
    lw = jm.disorder.log_probability(n.restrict(jm.lattice.sites))
    lw += -cm.beta * cm.energy(sigma.array(cm.sites)) - log_partition(cm)[0]
    return lw if log else math.exp(lw)


def free_energy_increment(jm: JointModel, n: Configuration, add_site: Site,
                          bc: BoundaryCondition = FREE) -> float:
    """log Z(n with add_site occupied) - log Z(n); see EMPTY_SITE_CONVENTION."""
    if jm.disorder.kind != "dilution":
        raise ValueError("free-energy increments are defined for site dilution")
    add_site = tuple(add_site)
    if n.get(add_site) != 0:
        raise ValueError(f"site {add_site} must be empty in n")
    occupied = n.updated({add_site: 1})
    return jm.log_z(occupied, bc) - jm.log_z(n, bc)


def quenched_magnetization(jm: JointModel, n: Configuration, bc: BoundaryCondition = FREE,
                           site: Site | None = None) -> float:
    """<sigma_site> under mu[n] (site defaults to the window centre)."""
    model = jm.induced_model(n)
    site = jm.lattice.center() if site is None else tuple(site)
    cm = compile_model(model, bc)
    return site_magnetization(cm, model.lattice.index[site])


def override_outside(n: Configuration, inner: Lattice, value: int) -> Configuration:
    return n.updated({s: value for s in n.values if not inner.in_window(s)})


def bad_disorder_probe(jm: JointModel, n: Configuration, inner: Lattice, bc: BoundaryCondition = FREE,
                       site: Site | None = None) -> float:
    """|<sigma_0>(n on inner, +1 outside) - <sigma_0>(n on inner, -1 outside)|.

    Depends on the disorder only; spins are summed over the whole window.
    """
    if jm.disorder.kind != "random_field":
        raise ValueError("the disorder probe is defined for random fields")
    if any(not jm.lattice.in_window(c) for c in (inner.lower, inner.upper)):
        raise ValueError("inner box must lie inside the window")
    plus = quenched_magnetization(jm, override_outside(n, inner, 1), bc, site)
    minus = quenched_magnetization(jm, override_outside(n, inner, -1), bc, site)
    return abs(plus - minus)


def write_probe_csv(path, rows):
    """rows: iterables of (radius, probe value)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["radius", "probe"])
        for r, v in rows:
            w.writerow([r, f"{v:.17g}"])


def save_disorder(path, field_: DisorderField):
    with open(path, "w") as fh:
        json.dump(field_.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_disorder(path) -> DisorderField:
    with open(path) as fh:
        return DisorderField.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# two-chain dilution geometry

def two_chain_geometry(length: int = 4, connected: bool = False,
                       bridged: bool = False) -> tuple[Lattice, Configuration, Site]:
    """Two occupied chains (rows 0 and 2) separated by an empty gap row.

    The gap row is empty except for an optional far connector at its last
    site and the bridging site at its first.  Returns (lattice, n, bridge).
    """
    if length < 2:
        raise ValueError("chains need length >= 2")
    lattice = Lattice((0, 0), (2, length - 1))
    bridge, connector = (1, 0), (1, length - 1)
    n = {s: int(s[0] != 1) for s in lattice.sites}
    n[connector] = int(connected)
    n[bridge] = int(bridged)
    return lattice, Configuration(n, OCCUPATION), bridge


@dataclass(frozen=True)
class DegeneracyReport:
    beta: float
    increment_unconnected: float
    increment_connected: float
    degeneracy_unbridged: int
    degeneracy_bridged: int

    @property
    def increment_difference(self) -> float:
        return self.increment_connected - self.increment_unconnected

    def as_dict(self) -> dict:
        return {**self.__dict__, "increment_difference": self.increment_difference, "log2": math.log(2.0),
                "convention": EMPTY_SITE_CONVENTION}


def two_chain_report(length: int = 4, beta: float = 20.0, J: float = 1.0) -> DegeneracyReport:
    """Bridge-site free-energy increments and ground-state counts on the two-chain geometry."""
    dis = DisorderField("dilution", p=0.5)
    incs = []
    for connected in (False, True):
        lattice, n, bridge = two_chain_geometry(length, connected)
        incs.append(free_energy_increment(JointModel(dis, lattice, J, beta), n, bridge))
    counts = []
    for bridged in (False, True):
        lattice, n, _ = two_chain_geometry(length, False, bridged)
        counts.append(ground_state_degeneracy(JointModel(dis, lattice, J, beta).induced_model(n, drop_empty=True)))
    return DegeneracyReport(beta, incs[0], incs[1], counts[0], counts[1])
