"""Integer-lattice layer: fans, moment polytopes, lattice points, Picard classes.

Conventions
-----------
Generators are stored as the rows of an integer matrix ``V`` of shape
``(d, n)``.  Maximal cones are tuples of 0-based row indices (the JSON format
uses 1-based indices).  The facet functions are ``l_i(x) = <x, v_i> + lambda_i``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from .errors import ConfigError, MalformedFan, NotAmple, ZeroCoordinate

_COMPLETENESS_SEED = 20090101


@dataclass(frozen=True)
class Fan:
    dim: int
    generators: tuple[tuple[int, ...], ...]
    max_cones: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.dim < 1:
            raise MalformedFan(f"dimension must be positive, got {self.dim}")
        if not self.generators or not self.max_cones:
            raise MalformedFan("fan needs at least one generator and one cone")
        for v in self.generators:
            if len(v) != self.dim:
                raise MalformedFan(f"generator {v} does not have {self.dim} entries")
            if not any(v):
                raise MalformedFan("zero generator")
        if len(set(self.generators)) != len(self.generators):
            raise MalformedFan("duplicate generators")
        d = len(self.generators)
        for cone in self.max_cones:
            if len(cone) != self.dim:
                raise MalformedFan(f"cone {cone} does not have {self.dim} generators")
            if len(set(cone)) != len(cone):
                raise MalformedFan(f"cone {cone} repeats a generator")
            if any(i < 0 or i >= d for i in cone):
                raise MalformedFan(f"cone {cone} has an index out of range")

    @classmethod
    def from_lists(cls, generators, max_cones, *, one_based=False) -> "Fan":
        gens = tuple(tuple(int(x) for x in np.atleast_1d(v)) for v in generators)
        shift = 1 if one_based else 0
        cones = tuple(tuple(int(i) - shift for i in c) for c in max_cones)
        return cls(len(gens[0]), gens, cones)

    @property
    def n(self) -> int:
        return self.dim

    @property
    def d(self) -> int:
        return len(self.generators)

    @cached_property
    def V(self) -> np.ndarray:
        return np.array(self.generators, dtype=np.int64).reshape(self.d, self.dim)

    def cone_matrix(self, cone) -> np.ndarray:
        """Rows are the generators of ``cone`` (an index tuple or a cone number)."""
        if isinstance(cone, (int, np.integer)):
            cone = self.max_cones[cone]
        return self.V[list(cone)]

    def cone_inverse(self, cone) -> np.ndarray:
        """Exact integer inverse of a unimodular cone matrix."""
        inv = np.linalg.inv(self.cone_matrix(cone).astype(float))
        return np.rint(inv).astype(np.int64)


@dataclass(frozen=True)
class FanReport:
    primitive: tuple[bool, ...]
    smooth: tuple[bool, ...]
    determinants: tuple[int, ...]
    all_generators_used: bool
    complete: bool
    completeness_method: str

    @property
    def ok(self) -> bool:
        return (all(self.primitive) and all(self.smooth)
                and self.all_generators_used and self.complete)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "primitive": list(self.primitive),
            "smooth": list(self.smooth),
            "determinants": list(self.determinants),
            "all_generators_used": self.all_generators_used,
            "complete": self.complete,
            "completeness_method": self.completeness_method,
        }


def _in_cone(fan: Fan, cone, w: np.ndarray, tol: float = 1e-12) -> bool:
    coeffs = np.linalg.solve(fan.cone_matrix(cone).T.astype(float), w)
    return bool(np.all(coeffs >= -tol))


def _complete_exact_2d(fan: Fan) -> bool:
    # coverage is constant on the open arcs between consecutive generator angles
    angles = sorted({math.atan2(v[1], v[0]) for v in fan.generators})
    probes = []
    for a, b in zip(angles, angles[1:] + [angles[0] + 2 * math.pi]):
        probes.append(a)
        probes.append(0.5 * (a + b))
    for ang in probes:
        w = np.array([math.cos(ang), math.sin(ang)])
        if not any(_in_cone(fan, c, w) for c in fan.max_cones):
            return False
    return True


def _complete_sampled(fan: Fan, seed: int = _COMPLETENESS_SEED) -> bool:
    rng = np.random.default_rng(seed)
    count = 10 ** fan.dim
    dirs = rng.normal(size=(count, fan.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    covered = np.zeros(count, dtype=bool)
    for cone in fan.max_cones:
        coeffs = np.linalg.solve(fan.cone_matrix(cone).T.astype(float), dirs.T).T
        covered |= np.all(coeffs >= -1e-12, axis=1)
    return bool(covered.all())


def validate_fan(fan: Fan) -> FanReport:
    """Check primitivity, smoothness, usage and completeness of ``fan``.

    Completeness is exact for ``n <= 2`` (arc cover of the circle) and
    sampled with ``10**n`` seeded random directions otherwise.
    """
    primitive = tuple(math.gcd(*map(abs, v)) == 1 for v in fan.generators)
    dets = tuple(int(round(np.linalg.det(fan.cone_matrix(c).astype(float))))
                 for c in fan.max_cones)
    smooth = tuple(abs(x) == 1 for x in dets)
    used = set(itertools.chain.from_iterable(fan.max_cones)) == set(range(fan.d))
    if fan.dim == 1:
        signs = {int(np.sign(fan.generators[c[0]][0])) for c in fan.max_cones}
        complete, method = signs == {-1, 1}, "exact"
    elif not all(d != 0 for d in dets):
        complete, method = False, "exact"
    elif fan.dim == 2:
        complete, method = _complete_exact_2d(fan), "exact"
    else:
        complete, method = _complete_sampled(fan), f"sampled-{10 ** fan.dim}"
    return FanReport(primitive, smooth, dets, used, complete, method)


@dataclass(frozen=True)
class Polytope:
    """Moment polytope ``{x : <x, v_i> + lambda_i >= 0}`` of an ample divisor.

    Use :func:`polytope_from` to construct; it fills the derived fields.
    """

    fan: Fan
    offsets: tuple[int, ...]
    vertices: np.ndarray = field(repr=False, compare=False)
    volume: float = field(compare=False)
    facet_volumes: tuple[float, ...] = field(compare=False)

    @property
    def n(self) -> int:
        return self.fan.dim

    @property
    def d(self) -> int:
        return self.fan.d

    @cached_property
    def lam(self) -> np.ndarray:
        return np.array(self.offsets, dtype=np.int64)

    def facet_values(self, x) -> np.ndarray:
        """``l_i(x)`` for every facet; ``x`` may be batched with shape ``(..., n)``."""
        x = np.asarray(x, dtype=float)
        return x @ self.fan.V.T.astype(float) + self.lam

    @cached_property
    def lattice_points(self) -> np.ndarray:
        return lattice_points(self)

    def __hash__(self):
        return hash((self.fan, self.offsets))


def _facet_lattice_volume(verts: np.ndarray, normal: np.ndarray) -> float:
    k = verts.shape[1] - 1
    if k == 0:
        return 1.0
    # orthonormal basis of the hyperplane orthogonal to ``normal``
    q, _ = np.linalg.qr(np.column_stack([normal, np.eye(len(normal))]))
    basis = q[:, 1:k + 1]
    proj = (verts - verts[0]) @ basis
    if k == 1:
        euclid = float(proj.max() - proj.min())
    else:
        euclid = float(ConvexHull(proj).volume)
    return euclid / float(np.linalg.norm(normal))


def polytope_from(fan: Fan, offsets) -> Polytope:
    """Build the moment polytope of ``D = sum lambda_i D_i`` over ``fan``.

    Vertices come from intersecting, for each maximal cone, the facet
    hyperplanes of its generators.  Raises :class:`NotAmple` when some vertex
    violates another facet inequality or lies on a facet it should not touch.
    """
    report = validate_fan(fan)
    if not report.ok:
        raise MalformedFan(f"fan is not smooth and complete: {report.to_dict()}")
    lam = np.array([int(x) for x in offsets], dtype=np.int64)
    if lam.shape != (fan.d,):
        raise ConfigError(f"expected {fan.d} offsets, got {len(lam)}")
    verts = []
    for cone in fan.max_cones:
        x = -fan.cone_inverse(cone) @ lam[list(cone)]
        vals = fan.V @ x + lam
        others = [i for i in range(fan.d) if i not in cone]
        if np.any(vals[others] <= 0):
            raise NotAmple(f"offsets {tuple(lam)} do not define an ample divisor "
                           f"(vertex {tuple(x)} of cone {cone} touches or leaves P)")
        verts.append(x)
    verts = np.array(verts, dtype=np.int64)
    if len({tuple(v) for v in verts}) != len(verts):
        raise NotAmple("vertices coincide")
    if fan.dim == 1:
        volume = float(verts.max() - verts.min())
    else:
        volume = float(ConvexHull(verts.astype(float)).volume)
    facet_vols = []
    for i in range(fan.d):
        idx = [c for c, cone in enumerate(fan.max_cones) if i in cone]
        facet_vols.append(_facet_lattice_volume(verts[idx].astype(float),
                                                fan.V[i].astype(float)))
    return Polytope(fan, tuple(int(x) for x in lam), verts, volume, tuple(facet_vols))


def lattice_points(P: Polytope) -> np.ndarray:
    """Integer points of the closed polytope, sorted lexicographically."""
    lo = P.vertices.min(axis=0)
    hi = P.vertices.max(axis=0)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, P.n)
    keep = np.all(grid @ P.fan.V.T + P.lam >= 0, axis=1)
    pts = grid[keep]
    order = np.lexsort(pts.T[::-1])
    return pts[order]


def iota(fan_or_polytope, u) -> np.ndarray:
    """The embedding ``M -> Z^d``, ``u -> (<u, v_1>, ..., <u, v_d>)``."""
    fan = getattr(fan_or_polytope, "fan", fan_or_polytope)
    return fan.V @ np.asarray(u, dtype=np.int64).reshape(fan.dim)


@dataclass(frozen=True)
class PicardClass:
    representative: tuple[int, ...]
    canonical: tuple[int, ...]

    def __eq__(self, other):
        if not isinstance(other, PicardClass):
            return NotImplemented
        return self.canonical == other.canonical

    def __hash__(self):
        return hash(self.canonical)


def _shift_to_basis_cone(fan: Fan, a: np.ndarray) -> np.ndarray:
    cone = list(fan.max_cones[0])
    return fan.cone_inverse(cone) @ a[cone]


def picard_reduce(fan_or_polytope, a) -> PicardClass:
    """Canonical representative of ``[a]`` in ``Z^d / iota(M)``.

    The canonical form vanishes on the generators of the first maximal cone.
    """
    fan = getattr(fan_or_polytope, "fan", fan_or_polytope)
    a = np.asarray(a, dtype=np.int64).reshape(fan.d)
    u = _shift_to_basis_cone(fan, a)
    canon = a - fan.V @ u
    return PicardClass(tuple(int(x) for x in a), tuple(int(x) for x in canon))


def picard_equal(fan_or_polytope, a, b) -> bool:
    """True iff ``a - b`` lies in ``iota(M)``."""
    fan = getattr(fan_or_polytope, "fan", fan_or_polytope)
    diff = np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64)
    u = _shift_to_basis_cone(fan, diff)
    return bool(np.array_equal(fan.V @ u, diff))


def superpotential_eval(fan_or_polytope, z, offsets=None) -> complex:
    """``W(z) = sum_i exp(-lambda_i) z^{v_i}``.

    ``W`` makes sense for any offsets, ample or not, so a bare fan plus
    ``offsets`` is accepted as well as a polytope.
    """
    fan = getattr(fan_or_polytope, "fan", fan_or_polytope)
    lam = np.asarray(fan_or_polytope.lam if offsets is None else offsets, dtype=float)
    z = np.asarray(z, dtype=complex).reshape(fan.n)
    if np.any(z == 0):
        raise ZeroCoordinate("superpotential needs all coordinates nonzero")
    monomials = np.prod(z[None, :] ** fan.V, axis=1)
    return complex(np.sum(np.exp(-lam) * monomials))


# --- JSON ------------------------------------------------------------------

_GEOMETRY_KEYS = {"dim", "generators", "max_cones", "offsets"}


def _require_int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{what} must be an integer, got {value!r}")
    return value


def fan_from_dict(doc: dict) -> Fan:
    unknown = set(doc) - _GEOMETRY_KEYS
    if unknown:
        raise ConfigError(f"unknown geometry keys: {sorted(unknown)}")
    for key in ("dim", "generators", "max_cones"):
        if key not in doc:
            raise ConfigError(f"geometry is missing '{key}'")
    dim = _require_int(doc["dim"], "dim")
    gens = []
    for v in doc["generators"]:
        v = v if isinstance(v, list) else [v]
        gens.append(tuple(_require_int(x, "generator entry") for x in v))
    cones = []
    for c in doc["max_cones"]:
        c = c if isinstance(c, list) else [c]
        cones.append(tuple(_require_int(i, "cone index") - 1 for i in c))
    fan = Fan(dim, tuple(gens), tuple(cones))
    return fan


def polytope_from_dict(doc: dict) -> Polytope:
    fan = fan_from_dict(doc)
    if "offsets" not in doc:
        raise ConfigError("geometry is missing 'offsets'")
    offsets = [_require_int(x, "offset") for x in doc["offsets"]]
    return polytope_from(fan, offsets)


def load_geometry_doc(path) -> dict:
    """Read a geometry file; bare names resolve to the bundled examples."""
    p = Path(path)
    if not p.exists():
        bundled = Path(__file__).with_name("data") / p.name
        if bundled.exists():
            p = bundled
        else:
            raise ConfigError(f"geometry file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
