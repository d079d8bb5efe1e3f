"""Real functions on N_R with value, gradient and Hessian.

Every field evaluates batches: ``xi`` of shape ``(n,)`` or ``(N, n)`` gives
values of shape ``()`` / ``(N,)``, gradients ``(n,)`` / ``(N, n)`` and
Hessians ``(n, n)`` / ``(N, n, n)``.

Fields form a vector space: ``f + g``, ``c * f`` and ``f - g`` build a
:class:`SumField`, which flattens nested sums and merges terms that are linear
in a parameter (affine parts, Guillemin potentials over the same toric
potential).
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.interpolate import NdBSpline, make_interp_spline

from .errors import OutsideBox


def as_batch(xi, n: int) -> tuple[np.ndarray, bool]:
    """Return ``(xi as (N, n) float array, was_single_point)``."""
    arr = np.asarray(xi, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    single = arr.ndim == 1
    arr = arr.reshape(-1, n)
    return arr, single


def _unbatch(out: np.ndarray, single: bool) -> np.ndarray:
    return out[0] if single else out


class ScalarField:
    """Base class; subclasses implement the batched ``_value/_grad/_hess``."""

    dim: int
    #: half-width of the sampling box for grid-backed fields, ``None`` if global
    box: float | None = None

    def value(self, xi):
        x, single = as_batch(xi, self.dim)
        self._check_box(x)
        return _unbatch(self._value(x), single)

    def grad(self, xi):
        x, single = as_batch(xi, self.dim)
        self._check_box(x)
        return _unbatch(self._grad(x), single)

    def hess(self, xi):
        x, single = as_batch(xi, self.dim)
        self._check_box(x)
        return _unbatch(self._hess(x), single)

    def pairing(self, xi, v, offset=0.0):
        """``<grad(xi), v> + offset``; overridden where cancellation matters."""
        x, single = as_batch(xi, self.dim)
        self._check_box(x)
        return _unbatch(self._pairing(x, np.asarray(v, dtype=float), offset), single)

    def hess_pair(self, xi, v, w):
        """``v^T Hess(xi) w``."""
        x, single = as_batch(xi, self.dim)
        self._check_box(x)
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        return _unbatch(self._hess_pair(x, v, w), single)

    def _pairing(self, x, v, offset):
        return self._grad(x) @ v + offset

    def _hess_pair(self, x, v, w):
        return np.einsum("i,nij,j->n", v, self._hess(x), w)

    def _check_box(self, x):
        if self.box is not None and np.any(np.abs(x) > self.box * (1 + 1e-12)):
            raise OutsideBox(f"query outside the sampling box [-{self.box}, {self.box}]^n")

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, ScalarField):
            return NotImplemented
        return SumField([(1.0, self), (1.0, other)])

    def __rmul__(self, c):
        return SumField([(float(c), self)])

    __mul__ = __rmul__

    def __neg__(self):
        return SumField([(-1.0, self)])

    def __sub__(self, other):
        if not isinstance(other, ScalarField):
            return NotImplemented
        return SumField([(1.0, self), (-1.0, other)])

    # linear-merge protocol used by SumField
    @property
    def is_zero(self) -> bool:
        return False

    def merge_key(self):
        return ("id", id(self))

    def scaled(self, c: float) -> "ScalarField | None":
        """A field equal to ``c * self`` without wrapping, or ``None``."""
        return None

    def merged_with(self, other: "ScalarField") -> "ScalarField | None":
        return None


class ZeroField(ScalarField):
    def __init__(self, dim: int):
        self.dim = dim

    is_zero = True

    def _value(self, x):
        return np.zeros(len(x))

    def _grad(self, x):
        return np.zeros_like(x)

    def _hess(self, x):
        return np.zeros((len(x), self.dim, self.dim))


class AffineField(ScalarField):
    """``<u, xi> + alpha``: the gauge freedom between lifts."""

    def __init__(self, u, alpha: float = 0.0):
        self.u = np.atleast_1d(np.asarray(u, dtype=float))
        self.alpha = float(alpha)
        self.dim = len(self.u)

    def _value(self, x):
        return x @ self.u + self.alpha

    def _grad(self, x):
        return np.broadcast_to(self.u, x.shape).copy()

    def _hess(self, x):
        return np.zeros((len(x), self.dim, self.dim))

    @property
    def is_zero(self):
        return not self.u.any() and self.alpha == 0.0

    def merge_key(self):
        return ("affine",)

    def scaled(self, c):
        return AffineField(c * self.u, c * self.alpha)

    def merged_with(self, other):
        return AffineField(self.u + other.u, self.alpha + other.alpha)


class AnalyticField(ScalarField):
    """Closed-form field from vectorized callables on ``(N, n)`` arrays."""

    def __init__(self, dim: int, value: Callable, grad: Callable, hess: Callable,
                 name: str = "analytic"):
        self.dim = dim
        self._f, self._g, self._h = value, grad, hess
        self.name = name

    def _value(self, x):
        return np.asarray(self._f(x), dtype=float).reshape(len(x))

    def _grad(self, x):
        return np.asarray(self._g(x), dtype=float).reshape(len(x), self.dim)

    def _hess(self, x):
        return np.asarray(self._h(x), dtype=float).reshape(len(x), self.dim, self.dim)

    def __repr__(self):
        return f"AnalyticField({self.name!r}, dim={self.dim})"


def polynomial_field(dim: int, coeffs: dict[tuple[int, ...], float]) -> AnalyticField:
    """Polynomial ``sum c_alpha xi^alpha`` with exact derivatives."""
    terms = [(np.array(k, dtype=int), float(c)) for k, c in coeffs.items()]

    def mono(x, e):
        out = np.ones(len(x))
        for j, p in enumerate(e):
            if p < 0:
                return np.zeros(len(x))
            if p:
                out = out * x[:, j] ** p
        return out

    def value(x):
        return sum(c * mono(x, e) for e, c in terms)

    def grad(x):
        g = np.zeros_like(x)
        for e, c in terms:
            for j in range(dim):
                if e[j]:
                    d = e.copy()
                    d[j] -= 1
                    g[:, j] += c * e[j] * mono(x, d)
        return g

    def hess(x):
        h = np.zeros((len(x), dim, dim))
        for e, c in terms:
            for j in range(dim):
                for k in range(dim):
                    d = e.copy()
                    f = d[j]
                    d[j] -= 1
                    f *= d[k]
                    d[k] -= 1
                    if f:
                        h[:, j, k] += c * f * mono(x, d)
        return h

    name = " + ".join(f"{c:g}*xi^{tuple(int(p) for p in e)}" for e, c in terms)
    return AnalyticField(dim, value, grad, hess, name=name)


def bump(center, radius: float, amplitude: float = 1.0) -> AnalyticField:
    """Compactly supported bump ``A (1 - |xi-c|^2/R^2)^4``.

    It is C^3 across the sphere of radius ``R`` and vanishes outside it.  A
    polynomial profile keeps quadrature of its derivatives well behaved,
    unlike ``exp(-1/(1-s))`` whose higher derivatives are huge near the edge.
    """
    c = np.atleast_1d(np.asarray(center, dtype=float))
    dim = len(c)
    R2 = float(radius) ** 2
    A = float(amplitude)

    def parts(x):
        dx = x - c
        q = np.clip(1.0 - np.sum(dx * dx, axis=1) / R2, 0.0, None)
        return dx, q

    def value(x):
        return A * parts(x)[1] ** 4

    def grad(x):
        dx, q = parts(x)
        return A * (-8.0 / R2 * q**3)[:, None] * dx

    def hess(x):
        dx, q = parts(x)
        outer = np.einsum("ni,nj->nij", dx, dx)
        eye = np.eye(dim)[None]
        return A * ((48.0 / R2**2 * q**2)[:, None, None] * outer
                    + (-8.0 / R2 * q**3)[:, None, None] * eye)

    return AnalyticField(dim, value, grad, hess,
                         name=f"bump(c={c.tolist()}, R={radius:g}, A={A:g})")


class GridField(ScalarField):
    """Uniform samples on ``[-T, T]^n`` with a tensor-product cubic spline.

    The spline is C^2; its second derivatives serve as the Hessian.  Queries
    outside the box raise :class:`OutsideBox`.
    """

    def __init__(self, box: float, samples):
        samples = np.asarray(samples, dtype=float)
        self.dim = samples.ndim
        self.box = float(box)
        self.samples = samples
        self.resolution = samples.shape
        coeffs = samples
        knots = []
        for ax, count in enumerate(samples.shape):
            nodes = np.linspace(-self.box, self.box, count)
            spl = make_interp_spline(nodes, np.moveaxis(coeffs, ax, 0), k=3)
            coeffs = np.moveaxis(spl.c, 0, ax)
            knots.append(spl.t)
        self._spline = NdBSpline(tuple(knots), coeffs, 3)

    @classmethod
    def from_function(cls, fn: Callable, dim: int, box: float, resolution: int):
        nodes = np.linspace(-box, box, resolution)
        mesh = np.stack(np.meshgrid(*([nodes] * dim), indexing="ij"), axis=-1)
        vals = np.asarray(fn(mesh.reshape(-1, dim)), dtype=float)
        return cls(box, vals.reshape((resolution,) * dim))

    def nodes(self) -> np.ndarray:
        axes = [np.linspace(-self.box, self.box, c) for c in self.resolution]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)

    def _value(self, x):
        return self._spline(x)

    def _grad(self, x):
        out = np.empty_like(x)
        for j in range(self.dim):
            nu = [0] * self.dim
            nu[j] = 1
            out[:, j] = self._spline(x, nu=tuple(nu))
        return out

    def _hess(self, x):
        out = np.empty((len(x), self.dim, self.dim))
        for j in range(self.dim):
            for k in range(j, self.dim):
                nu = [0] * self.dim
                nu[j] += 1
                nu[k] += 1
                out[:, j, k] = out[:, k, j] = self._spline(x, nu=tuple(nu))
        return out


class SumField(ScalarField):
    """Finite linear combination of fields."""

    def __init__(self, terms):
        flat: list[tuple[float, ScalarField]] = []
        dims = set()
        for c, f in terms:
            dims.add(f.dim)
            if isinstance(f, SumField):
                flat.extend((c * c2, f2) for c2, f2 in f.terms)
            elif not isinstance(f, ZeroField):
                flat.append((float(c), f))
        merged: dict = {}
        order = []
        for c, f in flat:
            scaled = f.scaled(c)
            coef, fld = (1.0, scaled) if scaled is not None else (c, f)
            key = fld.merge_key()
            if key in merged:
                c0, f0 = merged[key]
                if scaled is not None:
                    merged[key] = (1.0, f0.merged_with(fld))
                else:
                    merged[key] = (c0 + coef, f0)
                continue
            merged[key] = (coef, fld)
            order.append(key)
        self.terms = [merged[k] for k in order
                      if merged[k][0] != 0.0 and not merged[k][1].is_zero]
        if len(dims) > 1:
            raise ValueError(f"cannot add fields of dimensions {sorted(dims)}")
        self.dim = dims.pop() if dims else 0
        boxes = [f.box for _, f in self.terms if f.box is not None]
        self.box = min(boxes) if boxes else None

    def _value(self, x):
        out = np.zeros(len(x))
        for c, f in self.terms:
            out += c * f._value(x)
        return out

    def _grad(self, x):
        out = np.zeros_like(x)
        for c, f in self.terms:
            out += c * f._grad(x)
        return out

    def _hess(self, x):
        out = np.zeros((len(x), self.dim, self.dim))
        for c, f in self.terms:
            out += c * f._hess(x)
        return out

    def _pairing(self, x, v, offset):
        # exact-ish constant parts first, then hand them to one precise term
        total = float(offset)
        rest = []
        for c, f in self.terms:
            if isinstance(f, AffineField):
                total += c * float(f.u @ v)
            else:
                rest.append((c, f))
        out = None
        for c, f in rest:
            if out is None and c == 1.0 and type(f)._pairing is not ScalarField._pairing:
                out = f._pairing(x, v, total)
                total = None
            else:
                part = c * (f._grad(x) @ v)
                out = part if out is None else out + part
        if out is None:
            out = np.zeros(len(x))
        if total is not None:
            out = out + total
        return out

    def _hess_pair(self, x, v, w):
        out = np.zeros(len(x))
        for c, f in self.terms:
            out += c * f._hess_pair(x, v, w)
        return out

    def __repr__(self):
        return "SumField(" + ", ".join(f"{c:g}*{f!r}" for c, f in self.terms) + ")"
