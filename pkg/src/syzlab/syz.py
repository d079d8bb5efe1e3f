"""The transform from torus-invariant metrics to Lagrangian sections and back.

A Lagrangian section of the mirror fibration is stored through a potential
``g`` of one lift: the section map is ``y = grad g``.  Since ``y`` is a
gradient the lift is exact, hence Lagrangian, by construction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, NotExtendable
from .fields import AffineField, ScalarField, SumField, ZeroField, as_batch
from .growth import infer_class
from .kaehler import ToricPotential, legendre_inverse
from .metrics import GuilleminPotential, MetricPotential, correction_from_dict
from .toric import PicardClass, iota, picard_reduce


@dataclass(frozen=True)
class LagrangianSection:
    """Section ``xi -> (xi, y(xi))`` with ``y = grad g``.

    Parameters
    ----------
    tp : ToricPotential
        Fixes the polytope, so the section can also be read over ``P``.
    potential : ScalarField
        The potential ``g`` of the stored lift.
    divisor : tuple of int, optional
        Representative ``a`` matching this lift, when known.
    """

    tp: ToricPotential
    potential: ScalarField
    divisor: tuple[int, ...] | None = field(default=None)

    @property
    def polytope(self):
        return self.tp.polytope

    @property
    def dim(self) -> int:
        return self.tp.dim

    def y(self, xi):
        return self.potential.grad(xi)

    @property
    def picard(self) -> PicardClass | None:
        if self.divisor is None:
            return None
        return picard_reduce(self.polytope, self.divisor)


def zero_section(tp: ToricPotential) -> LagrangianSection:
    return LagrangianSection(tp, ZeroField(tp.dim), (0,) * tp.polytope.d)


def transform(m: MetricPotential) -> LagrangianSection:
    """Send the metric with potential ``g_h`` to the section ``y = dg_h``."""
    return LagrangianSection(m.tp, m.potential, tuple(int(x) for x in m.divisor))


def inverse_transform(s: LagrangianSection, **growth_options) -> MetricPotential:
    """Recover a metric whose transform is ``s``.

    The class is inferred from the boundary behaviour of ``s`` and verified
    against the growth conditions; the correction is ``g - g_{h0, a}``.

    Raises
    ------
    NotExtendable
        If no representative passes the growth check, i.e. ``s`` is not the
        transform of any metric.
    """
    found = infer_class(s, **growth_options)
    if found is None:
        raise NotExtendable("section fails the growth conditions for every representative")
    a, _ = found
    correction = SumField([(1.0, s.potential), (-1.0, GuilleminPotential(s.tp, a))])
    return MetricPotential(s.tp, tuple(int(x) for x in a), correction)


def lift_shift(s: LagrangianSection, u) -> LagrangianSection:
    """Another lift of the same section: ``g - <u, xi>`` with ``a -> a + iota(u)``."""
    u = np.asarray(u).reshape(s.dim)
    if not np.all(u == np.rint(u)):
        raise ValueError(f"lift shift must be integral, got {u.tolist()}")
    u = u.astype(np.int64)
    potential = SumField([(1.0, s.potential), (-1.0, AffineField(u))])
    divisor = None
    if s.divisor is not None:
        divisor = tuple(int(x) for x in np.asarray(s.divisor) + iota(s.polytope, u))
    return replace(s, potential=potential, divisor=divisor)


def section_over_polytope(s: LagrangianSection, x):
    """``y(Psi(x))`` for interior points ``x`` of the polytope."""
    xi = legendre_inverse(s.tp, x)
    return s.potential.grad(xi)


def box_nodes(dim: int, box: float, resolution: int) -> np.ndarray:
    nodes = np.linspace(-box, box, resolution)
    return np.stack(np.meshgrid(*([nodes] * dim), indexing="ij"), axis=-1).reshape(-1, dim)


def affine_fit(values: np.ndarray, points: np.ndarray) -> AffineField:
    """Least-squares affine function ``<u, xi> + alpha`` through samples."""
    design = np.column_stack([points, np.ones(len(points))])
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    return AffineField(coef[:-1], coef[-1])


def gauge_fix(f: ScalarField, box: float, resolution: int = 33) -> ScalarField:
    """Remove the best-fit affine function of ``f`` on ``[-box, box]^n``."""
    pts = box_nodes(f.dim, box, resolution)
    return SumField([(1.0, f), (-1.0, affine_fit(f.value(pts), pts))])


def polytope_grid(P, resolution: int, margin: float = 1e-2) -> np.ndarray:
    """Points of a uniform grid on the bounding box of ``P`` lying at least
    ``margin`` inside every facet."""
    lo = P.vertices.min(axis=0).astype(float)
    hi = P.vertices.max(axis=0).astype(float)
    axes = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, P.n)
    return pts[np.min(P.facet_values(pts), axis=1) >= margin]


def write_section_csv(s: LagrangianSection, path, *, box: float = 4.0, resolution: int = 41,
                      over: str = "xi", margin: float = 1e-2) -> Path:
    """Plot-ready samples of ``y`` over a ``xi``-grid (``over="xi"``) or an
    interior polytope grid (``over="x"``)."""
    n = s.dim
    if over == "xi":
        pts = box_nodes(n, box, resolution)
        ys = s.y(pts).reshape(len(pts), n)
        coord = [f"xi{j + 1}" for j in range(n)]
    elif over == "x":
        pts = polytope_grid(s.polytope, resolution, margin)
        ys = section_over_polytope(s, pts).reshape(len(pts), n)
        coord = [f"x{j + 1}" for j in range(n)]
    else:
        raise ValueError(f"over must be 'xi' or 'x', got {over!r}")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(coord + [f"y{j + 1}" for j in range(n)])
        for p, y in zip(pts, ys):
            w.writerow([repr(float(t)) for t in p] + [repr(float(t)) for t in y])
    return path


def max_y_difference(s1: LagrangianSection, s2: LagrangianSection, box: float,
                     resolution: int = 21) -> float:
    pts = box_nodes(s1.dim, box, resolution)
    x, _ = as_batch(pts, s1.dim)
    return float(np.max(np.abs(s1.potential.grad(x) - s2.potential.grad(x))))


_SECTION_KEYS = {"potential", "divisor"}


def section_from_dict(doc: dict, tp: ToricPotential) -> LagrangianSection:
    """Section from ``{"potential": <field>, "divisor": [...]?}``.

    ``potential`` uses the correction field formats of the metric files; the
    optional ``divisor`` records the representative the lift is claimed to
    match and is not used for inference.
    """
    unknown = set(doc) - _SECTION_KEYS
    if unknown:
        raise ConfigError(f"unknown section keys: {sorted(unknown)}")
    if "potential" not in doc:
        raise ConfigError("section is missing 'potential'")
    g = correction_from_dict(doc["potential"], tp.dim) or ZeroField(tp.dim)
    a = doc.get("divisor")
    if a is not None:
        a = tuple(int(x) for x in a)
        if len(a) != tp.polytope.d:
            raise ConfigError(f"divisor must have {tp.polytope.d} entries")
    return LagrangianSection(tp, g, a)
