"""Lattice windows, spin configurations, pair interactions and Hamiltonians.

Every engine in the package consumes a :class:`SpinModel` together with a
:class:`BoundaryCondition`.  The model is compiled once into flat numpy arrays
(:class:`CompiledModel`): internal pairs, and a single-site field that already
contains the contribution of the boundary spins.  Energies follow

    E(sigma) = - sum_{pairs} J_ij s_i s_j - sum_i h_i s_i

and Gibbs weights are ``exp(-beta * E)``.
"""
from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

Site = tuple[int, ...]

SPIN = (-1, 1)
OCCUPATION = (0, 1)


def _even(site: Site) -> bool:
    return all(c % 2 == 0 for c in site)


def _odd(site: Site) -> bool:
    return all(c % 2 != 0 for c in site)


def _even_sum(site: Site) -> bool:
    return sum(site) % 2 == 0


# Named sublattice predicates; names keep masks serializable in scenario files.
SUBLATTICES: dict[str, Callable[[Site], bool]] = {
    "even": _even,
    "odd": _odd,
    "even_sum": _even_sum,
}


def sublattice_predicate(name: str) -> Callable[[Site], bool]:
    try:
        return SUBLATTICES[name]
    except KeyError:
        raise ValueError(f"unknown sublattice {name!r}; known: {sorted(SUBLATTICES)}") from None


def box_sites(lower: Sequence[int], upper: Sequence[int]) -> Iterator[Site]:
    """Sites of the box ``lower <= x <= upper`` in lexicographic order."""
    return itertools.product(*(range(lo, hi + 1) for lo, hi in zip(lower, upper)))


def origin(d: int) -> Site:
    return (0,) * d


@dataclass(frozen=True)
class Lattice:
    """Axis-aligned window of Z^d.

    ``holes`` are window sites that carry no spin (e.g. the sublattice that was
    conditioned away); pairs touching a hole are dropped.  ``sublattice`` only
    marks a subset, it does not remove anything.
    """

    lower: tuple[int, ...]
    upper: tuple[int, ...]
    sublattice: str | None = None
    holes: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(int(c) for c in self.lower))
        object.__setattr__(self, "upper", tuple(int(c) for c in self.upper))
        object.__setattr__(self, "holes", frozenset(tuple(h) for h in self.holes))
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ValueError("lower/upper must be non-empty and of equal length")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"empty window {self.lower}..{self.upper}")
        if self.sublattice is not None:
            sublattice_predicate(self.sublattice)
        if not self.sites:
            raise ValueError("window has no spin-carrying sites")

    @classmethod
    def box(cls, shape: Sequence[int], **kw) -> "Lattice":
        return cls(tuple(0 for _ in shape), tuple(n - 1 for n in shape), **kw)

    @classmethod
    def centered(cls, radius: int, d: int, **kw) -> "Lattice":
        return cls((-radius,) * d, (radius,) * d, **kw)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(hi - lo + 1 for lo, hi in zip(self.lower, self.upper))

    @cached_property
    def sites(self) -> tuple[Site, ...]:
        return tuple(s for s in box_sites(self.lower, self.upper) if s not in self.holes)

    @cached_property
    def index(self) -> dict[Site, int]:
        return {s: a for a, s in enumerate(self.sites)}

    def __len__(self) -> int:
        return len(self.sites)

    def in_window(self, site: Site) -> bool:
        return all(lo <= c <= hi for c, lo, hi in zip(site, self.lower, self.upper))

    def wrap(self, site: Site) -> Site:
        return tuple(lo + (c - lo) % n for c, lo, n in zip(site, self.lower, self.shape))

    def in_sublattice(self, site: Site) -> bool:
        if self.sublattice is None:
            raise ValueError("lattice has no sublattice mask")
        return sublattice_predicate(self.sublattice)(site)

    @property
    def sublattice_sites(self) -> tuple[Site, ...]:
        return tuple(s for s in self.sites if self.in_sublattice(s))

    def center(self) -> Site:
        """The origin when it lies in the window, otherwise the (lower) middle site."""
        o = origin(self.dimension)
        if self.in_window(o) and o not in self.holes:
            return o
        return tuple((lo + hi) // 2 for lo, hi in zip(self.lower, self.upper))

    def with_holes(self, extra: Iterable[Site]) -> "Lattice":
        return Lattice(self.lower, self.upper, self.sublattice, self.holes | frozenset(extra))

    def translated(self, shift: Sequence[int]) -> "Lattice":
        mv = lambda s: tuple(c + t for c, t in zip(s, shift))
        return Lattice(mv(self.lower), mv(self.upper), self.sublattice,
                       frozenset(mv(h) for h in self.holes))


@dataclass(frozen=True)
class Configuration:
    """Assignment of values in ``alphabet`` to a finite set of sites."""

    values: Mapping[Site, int]
    alphabet: tuple[int, ...] = SPIN

    def __post_init__(self):
        vals = {tuple(int(c) for c in s): int(v) for s, v in dict(self.values).items()}
        bad = [(s, v) for s, v in vals.items() if v not in self.alphabet]
        if bad:
            raise ValueError(f"values {bad[:3]} outside alphabet {self.alphabet}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_array(cls, sites: Sequence[Site], values: Sequence[int], alphabet=SPIN) -> "Configuration":
        return cls(dict(zip(sites, (int(v) for v in values))), alphabet)

    @classmethod
    def constant(cls, sites: Iterable[Site], value: int = 1, alphabet=SPIN) -> "Configuration":
        return cls({s: value for s in sites}, alphabet)

    @property
    def domain(self) -> frozenset:
        return frozenset(self.values)

    def __getitem__(self, site: Site) -> int:
        return self.values[site]

    def __contains__(self, site) -> bool:
        return site in self.values

    def __len__(self) -> int:
        return len(self.values)

    def get(self, site: Site, default=None):
        return self.values.get(site, default)

    def array(self, sites: Sequence[Site]) -> np.ndarray:
        return np.array([self.values[s] for s in sites], dtype=np.int8)

    def restrict(self, sites: Iterable[Site]) -> "Configuration":
        return Configuration({s: self.values[s] for s in sites if s in self.values}, self.alphabet)

    def updated(self, other: Mapping[Site, int]) -> "Configuration":
        return Configuration({**self.values, **dict(other)}, self.alphabet)

    def flipped(self) -> "Configuration":
        if self.alphabet != SPIN:
            raise ValueError("global flip is defined for +-1 spins only")
        return Configuration({s: -v for s, v in self.values.items()}, self.alphabet)

    def digest(self) -> str:
        h = hashlib.sha256()
        for s in sorted(self.values):
            h.update(repr((s, self.values[s])).encode())
        return h.hexdigest()[:16]


BC_KINDS = ("free", "plus", "minus", "explicit", "periodic")


@dataclass(frozen=True)
class BoundaryCondition:
    kind: str = "free"
    config: Configuration | None = None

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise ValueError(f"unknown boundary condition {self.kind!r}")
        if (self.kind == "explicit") != (self.config is not None):
            raise ValueError("explicit boundary conditions need a configuration (and only they)")

    def value(self, site: Site) -> int | None:
        """Spin at an exterior site; ``None`` means the bond is dropped."""
        if self.kind == "plus":
            return 1
        if self.kind == "minus":
            return -1
        if self.kind == "explicit":
            v = self.config.get(site)
            if v is None:
                raise KeyError(f"explicit boundary condition does not resolve exterior site {site}")
            return v
        return None

    def flipped(self) -> "BoundaryCondition":
        swap = {"plus": "minus", "minus": "plus"}
        if self.kind in swap:
            return BoundaryCondition(swap[self.kind])
        if self.kind == "explicit":
            return BoundaryCondition("explicit", self.config.flipped())
        return self


FREE = BoundaryCondition("free")
PLUS = BoundaryCondition("plus")
MINUS = BoundaryCondition("minus")
PERIODIC = BoundaryCondition("periodic")


def explicit_bc(values: Mapping[Site, int]) -> BoundaryCondition:
    return BoundaryCondition("explicit", Configuration(values))


def canonical_offset(r: Sequence[int]) -> tuple[tuple[int, ...], bool]:
    """Return (positive representative of +-r, whether r was negated)."""
    r = tuple(int(c) for c in r)
    if not any(r):
        raise ValueError("zero offset is a self-interaction")
    neg = tuple(-c for c in r)
    return (r, False) if r > neg else (neg, True)


@dataclass(frozen=True)
class Interaction:
    """Pair couplings by offset plus single-site fields.

    ``couplings`` maps offsets to J(r); r and -r denote the same pair term and
    are stored once.  ``site_weights`` multiplies a bond (i, j) by w_i * w_j
    (sites without an entry have weight 1); this is how site dilution enters.
    """

    couplings: Mapping[tuple[int, ...], float] = field(default_factory=dict)
    h: float = 0.0
    field: Mapping[Site, float] = field(default_factory=dict)
    site_weights: Mapping[Site, float] | None = None

    def __post_init__(self):
        canon: dict[tuple[int, ...], float] = {}
        for r, J in dict(self.couplings).items():
            key, _ = canonical_offset(r)
            if key in canon and not math.isclose(canon[key], J, rel_tol=0, abs_tol=1e-15):
                raise ValueError(f"asymmetric couplings for offset {key}: {canon[key]} vs {J}")
            canon[key] = float(J)
        dims = {len(r) for r in canon}
        if len(dims) > 1:
            raise ValueError("offsets of mixed dimension")
        object.__setattr__(self, "couplings", canon)
        object.__setattr__(self, "field", {tuple(s): float(v) for s, v in dict(self.field).items()})
        if self.site_weights is not None:
            object.__setattr__(self, "site_weights",
                               {tuple(s): float(v) for s, v in dict(self.site_weights).items()})

    @classmethod
    def nearest_neighbor(cls, d: int, J: float = 1.0, h: float = 0.0, **kw) -> "Interaction":
        offs = {tuple(int(k == a) for k in range(d)): J for a in range(d)}
        return cls(offs, h, **kw)

    @property
    def range(self) -> int:
        """Max-norm of the longest offset (0 for a pure field)."""
        return max((max(abs(c) for c in r) for r in self.couplings), default=0)

    def field_at(self, site: Site) -> float:
        return self.h + self.field.get(site, 0.0)

    def weight(self, site: Site) -> float:
        if self.site_weights is None:
            return 1.0
        return self.site_weights.get(site, 1.0)

    def with_field(self, extra: Mapping[Site, float]) -> "Interaction":
        merged = dict(self.field)
        for s, v in extra.items():
            merged[s] = merged.get(s, 0.0) + v
        return Interaction(self.couplings, self.h, merged, self.site_weights)

    def with_h(self, h: float) -> "Interaction":
        return Interaction(self.couplings, h, self.field, self.site_weights)


@dataclass(frozen=True)
class SpinModel:
    lattice: Lattice
    interaction: Interaction
    beta: float = 1.0

    def __post_init__(self):
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be finite and >= 0, got {self.beta}")
        d = {len(r) for r in self.interaction.couplings}
        if d and d != {self.lattice.dimension}:
            raise ValueError("interaction and lattice dimensions differ")

    @property
    def sites(self) -> tuple[Site, ...]:
        return self.lattice.sites

    @property
    def n(self) -> int:
        return len(self.lattice.sites)

    def with_lattice(self, lattice: Lattice) -> "SpinModel":
        return SpinModel(lattice, self.interaction, self.beta)

    def with_beta(self, beta: float) -> "SpinModel":
        return SpinModel(self.lattice, self.interaction, beta)

    def with_interaction(self, interaction: Interaction) -> "SpinModel":
        return SpinModel(self.lattice, interaction, self.beta)

    def digest(self) -> str:
        it = self.interaction
        payload = repr((self.lattice.lower, self.lattice.upper, self.lattice.sublattice,
                        sorted(self.lattice.holes), sorted(it.couplings.items()), it.h,
                        sorted(it.field.items()),
                        None if it.site_weights is None else sorted(it.site_weights.items()),
                        self.beta))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def ising_model(shape: Sequence[int], beta: float, J: float = 1.0, h: float = 0.0,
                centered: bool = False) -> SpinModel:
    """Nearest-neighbour Ising model on a box; ``centered`` puts the origin in the middle."""
    if centered:
        lower = tuple(-(n // 2) for n in shape)
        lattice = Lattice(lower, tuple(lo + n - 1 for lo, n in zip(lower, shape)))
    else:
        lattice = Lattice.box(shape)
    return SpinModel(lattice, Interaction.nearest_neighbor(len(shape), J, h), beta)


@dataclass(frozen=True, eq=False)
class CompiledModel:
    """Flat-array form of (model, boundary condition).

    ``pi, pj, pJ`` are the internal pairs (pi < pj); ``field`` is the
    single-site field including boundary contributions.
    """

    sites: tuple[Site, ...]
    beta: float
    pi: np.ndarray
    pj: np.ndarray
    pJ: np.ndarray
    field: np.ndarray

    @property
    def n(self) -> int:
        return len(self.sites)

    @cached_property
    def coupling_matrix(self) -> np.ndarray:
        M = np.zeros((self.n, self.n))
        np.add.at(M, (self.pi, self.pj), self.pJ)
        np.add.at(M, (self.pj, self.pi), self.pJ)
        return M

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric neighbour lists (indptr, neighbours, couplings)."""
        src = np.concatenate([self.pi, self.pj])
        dst = np.concatenate([self.pj, self.pi])
        J = np.concatenate([self.pJ, self.pJ])
        order = np.lexsort((dst, src))
        src, dst, J = src[order], dst[order], J[order]
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        return np.cumsum(indptr), dst.astype(np.int64), J.astype(np.float64)

    def energy(self, spins) -> float:
        s = np.asarray(spins, dtype=np.float64)
        return float(-(self.pJ * s[self.pi] * s[self.pj]).sum() - self.field @ s)

    def energies(self, spins: np.ndarray) -> np.ndarray:
        """Energies for a batch of configurations, shape (batch, n)."""
        s = np.asarray(spins, dtype=np.float64)
        if len(self.pJ) > 2 * self.n:
            pair = 0.5 * np.einsum("bi,bi->b", s @ self.coupling_matrix, s)
        else:
            pair = (s[:, self.pi] * s[:, self.pj]) @ self.pJ
        return -pair - s @ self.field

    def local_field(self, spins, a: int) -> float:
        indptr, nbr, J = self.csr
        s = np.asarray(spins, dtype=np.float64)
        return float(self.field[a] + J[indptr[a]:indptr[a + 1]] @ s[nbr[indptr[a]:indptr[a + 1]]])


def _neighbour_terms(model: SpinModel, bc: BoundaryCondition):
    """Yield (a, partner, J_eff) where partner is a window index or ('ext', value)."""
    lat, it = model.lattice, model.interaction
    index = lat.index
    periodic = bc.kind == "periodic"
    for a, x in enumerate(lat.sites):
        wx = it.weight(x)
        for r, J in it.couplings.items():
            for sign in (1, -1):
                if periodic and sign < 0:
                    continue
                y = tuple(c + sign * o for c, o in zip(x, r))
                if periodic:
                    y = lat.wrap(y)
                if lat.in_window(y):
                    if sign < 0 or y in lat.holes:
                        continue
                    b = index[y]
                    if b == a:
                        continue
                    yield a, b, J * wx * it.weight(y)
                else:
                    v = bc.value(y)
                    if v is not None:
                        yield a, ("ext", v), J * wx * it.weight(y)


def compile_model(model: SpinModel, bc: BoundaryCondition = FREE) -> CompiledModel:
    lat, it = model.lattice, model.interaction
    n = len(lat.sites)
    field_ = np.array([it.field_at(s) for s in lat.sites], dtype=np.float64)
    pairs: dict[tuple[int, int], float] = {}
    for a, partner, J in _neighbour_terms(model, bc):
        if isinstance(partner, tuple):
            field_[a] += J * partner[1]
        else:
            key = (min(a, partner), max(a, partner))
            pairs[key] = pairs.get(key, 0.0) + J
    keys = sorted(k for k, v in pairs.items() if v != 0.0)
    pi = np.array([k[0] for k in keys], dtype=np.int64)
    pj = np.array([k[1] for k in keys], dtype=np.int64)
    pJ = np.array([pairs[k] for k in keys], dtype=np.float64)
    return CompiledModel(lat.sites, float(model.beta), pi, pj, pJ, field_)


def _spins(sigma, model: SpinModel) -> np.ndarray:
    if isinstance(sigma, Configuration):
        missing = [s for s in model.sites if s not in sigma]
        if missing:
            raise ValueError(f"configuration does not cover site {missing[0]}")
        return sigma.array(model.sites)
    s = np.asarray(sigma)
    if s.shape != (model.n,):
        raise ValueError(f"expected {model.n} spins, got shape {s.shape}")
    return s


def energy(sigma, bc: BoundaryCondition, model: SpinModel) -> float:
    """Finite-volume energy H(sigma, eta); every pair meeting the window is counted once."""
    return compile_model(model, bc).energy(_spins(sigma, model))


def gibbs_weight(sigma, bc: BoundaryCondition, model: SpinModel, log: bool = False) -> float:
    lw = -model.beta * energy(sigma, bc, model)
    return lw if log else math.exp(lw)


def interaction_norm(model: SpinModel, site: Site | None = None) -> float:
    """sum over X containing ``site`` of sup|Phi_X|: each offset contributes twice (r and -r)."""
    it = model.interaction
    x = origin(model.lattice.dimension) if site is None else tuple(site)
    total = abs(it.field_at(x))
    wx = it.weight(x)
    for r, J in it.couplings.items():
        for sign in (1, -1):
            y = tuple(c + sign * o for c, o in zip(x, r))
            total += abs(J * wx * it.weight(y))
    return total
