"""Torus-invariant hermitian metric potentials.

A metric on the line bundle of a divisor ``a`` is stored through its potential
``g_h = -1/2 log h(s, s)``, written as the Guillemin reference potential plus a
correction field ``f``.  The section ``s`` itself is never represented.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import ConfigError
from .fields import (GridField, ScalarField, SumField, ZeroField, as_batch, bump,
                     polynomial_field)
from .kaehler import ToricPotential, centered_cov_pair, lattice_log_terms, weighted_moments
from .toric import PicardClass, picard_reduce


class GuilleminPotential(ScalarField):
    r"""Potential of the Guillemin metric ``h_0(s, s) = prod_i (l_i o mu)^{a_i}``.

    .. math::

        g(\xi) = -\tfrac12 \sum_i a_i \log
            \frac{\sum_u c_u l_i(u) e^{2\langle u,\xi\rangle}}
                 {\sum_u c_u e^{2\langle u,\xi\rangle}}

    Gradient and Hessian are the closed forms obtained by differentiating the
    two lattice sums; they are differences of means and covariances of the
    lattice points under the two weightings.

    The divisor may hold real entries, which keeps the field closed under the
    linear operations of :class:`~syzlab.fields.SumField`.
    """

    def __init__(self, tp: ToricPotential, divisor):
        self.tp = tp
        self.dim = tp.dim
        self.divisor = np.asarray(divisor, dtype=float).reshape(tp.polytope.d)
        self._facets = []
        for i, a_i in enumerate(self.divisor):
            if a_i == 0.0:
                continue
            support = tp.facet_values[:, i] > 0
            logw = tp.log_weights[support] + np.log(tp.facet_values[support, i])
            self._facets.append((i, a_i, support, logw))

    def _base(self, x):
        return self.tp.logits(x)

    def _facet_logits(self, x, support, logw):
        return lattice_log_terms(self.tp.points[support], logw, x)

    def _value(self, x):
        if not self._facets:
            return np.zeros(len(x))
        base = logsumexp(self._base(x), axis=1)
        out = np.zeros(len(x))
        for _, a_i, support, logw in self._facets:
            out += a_i * (logsumexp(self._facet_logits(x, support, logw), axis=1) - base)
        return -0.5 * out

    def _grad(self, x):
        out = np.zeros_like(x)
        if not self._facets:
            return out
        _, mean0, _ = weighted_moments(self._base(x), self.tp.points)
        for _, a_i, support, logw in self._facets:
            _, mean_i, _ = weighted_moments(self._facet_logits(x, support, logw),
                                            self.tp.points[support])
            out += a_i * (mean0 - mean_i)
        return out

    def _hess(self, x):
        out = np.zeros((len(x), self.dim, self.dim))
        if not self._facets:
            return out
        _, _, cov0 = weighted_moments(self._base(x), self.tp.points)
        for _, a_i, support, logw in self._facets:
            _, _, cov_i = weighted_moments(self._facet_logits(x, support, logw),
                                           self.tp.points[support])
            out += a_i * (cov0 - cov_i)
        return 2.0 * out

    def _generator_index(self, v):
        V = self.tp.polytope.fan.V
        hits = np.flatnonzero(np.all(V == v[None, :], axis=1))
        return int(hits[0]) if len(hits) else None

    def _pairing(self, x, v, offset):
        # Along a generator v_k the pairing tends to -a_k; evaluating it in
        # facet coordinates keeps the small remainder free of cancellation.
        k = self._generator_index(v)
        if k is None or not self._facets:
            return super()._pairing(x, v, offset)
        lk = self.tp.facet_values[:, k].astype(float)
        p0 = softmax(self._base(x), axis=1)
        total_a = sum(a_i for _, a_i, _, _ in self._facets)
        rest = total_a * (p0 @ lk)
        a_k = 0.0
        for i, a_i, support, logw in self._facets:
            q = softmax(self._facet_logits(x, support, logw), axis=1)
            if i == k:
                a_k = a_i
                rest -= a_i * (q @ (lk[support] - 1.0))
            else:
                rest -= a_i * (q @ lk[support])
        return rest + (offset - a_k)

    def _hess_pair(self, x, v, w):
        if not self._facets:
            return np.zeros(len(x))
        pts = self.tp.points.astype(float)
        pv, pw = pts @ v, pts @ w
        out = np.zeros(len(x))
        p0 = softmax(self._base(x), axis=1)
        base = centered_cov_pair(p0, pv, pw)
        for _, a_i, support, logw in self._facets:
            q = softmax(self._facet_logits(x, support, logw), axis=1)
            out += a_i * (base - centered_cov_pair(q, pv[support], pw[support]))
        return 2.0 * out

    @property
    def is_zero(self):
        return not self._facets

    def merge_key(self):
        return ("guillemin", id(self.tp))

    def scaled(self, c):
        return GuilleminPotential(self.tp, c * self.divisor)

    def merged_with(self, other):
        return GuilleminPotential(self.tp, self.divisor + other.divisor)

    def __repr__(self):
        return f"GuilleminPotential(a={self.divisor.tolist()})"


def guillemin_eval(tp: ToricPotential, a, xi):
    return GuilleminPotential(tp, a).value(xi)


def guillemin_grad(tp: ToricPotential, a, xi):
    return GuilleminPotential(tp, a).grad(xi)


def guillemin_hess(tp: ToricPotential, a, xi):
    return GuilleminPotential(tp, a).hess(xi)


@dataclass(frozen=True)
class MetricPotential:
    """A torus-invariant metric: divisor representative plus correction ``f``.

    The total potential is ``g_h = g_{h_0, a} + f``.
    """

    tp: ToricPotential
    divisor: tuple[int, ...]
    correction: ScalarField | None = field(default=None)

    @property
    def potential(self) -> ScalarField:
        parts = [(1.0, GuilleminPotential(self.tp, self.divisor))]
        if self.correction is not None:
            parts.append((1.0, self.correction))
        return SumField(parts)

    @property
    def picard(self) -> PicardClass:
        return picard_reduce(self.tp.polytope, self.divisor)


def curvature_matrix(m: MetricPotential, xi):
    """Coefficients of ``sqrt(-1) F_h`` in the ``dxi_j ^ du_k`` frame: ``Hess g_h``."""
    return m.potential.hess(xi)


def he_residual(m: MetricPotential, lam: float, xi):
    """``sum_{jk} phi^{jk} (g_h)_{jk} - lam``; zero exactly for Hermitian-Einstein metrics."""
    x, single = as_batch(xi, m.tp.dim)
    H_phi = m.tp.hess(x)
    H_g = m.potential.hess(x)
    out = np.trace(np.linalg.solve(H_phi, H_g), axis1=1, axis2=2) - lam
    return out[0] if single else out


# --- JSON ------------------------------------------------------------------

_METRIC_KEYS = {"divisor", "correction"}
_CORRECTION_KEYS = {
    "zero": {"type"},
    "grid": {"type", "box", "samples"},
    "bumps": {"type", "bumps"},
    "polynomial": {"type", "terms"},
}


def correction_from_dict(doc: dict | None, dim: int) -> ScalarField | None:
    if doc is None:
        return None
    kind = doc.get("type")
    if kind not in _CORRECTION_KEYS:
        raise ConfigError(f"correction type must be one of {sorted(_CORRECTION_KEYS)}, got {kind!r}")
    unknown = set(doc) - _CORRECTION_KEYS[kind]
    if unknown:
        raise ConfigError(f"unknown correction keys: {sorted(unknown)}")
    if kind == "zero":
        return None
    if kind == "grid":
        samples = np.asarray(doc["samples"], dtype=float)
        if samples.ndim == 1 and dim > 1:
            side = round(len(samples) ** (1.0 / dim))
            samples = samples.reshape((side,) * dim)
        if samples.ndim != dim or len(set(samples.shape)) != 1:
            raise ConfigError(f"grid samples must form a {dim}-dimensional cube")
        return GridField(float(doc["box"]), samples)
    if kind == "polynomial":
        coeffs = {}
        for term in doc["terms"]:
            exps, coef = term
            exps = tuple(int(e) for e in (exps if isinstance(exps, list) else [exps]))
            if len(exps) != dim or min(exps) < 0:
                raise ConfigError(f"polynomial exponent {list(exps)} does not fit dimension {dim}")
            coeffs[exps] = coeffs.get(exps, 0.0) + float(coef)
        return polynomial_field(dim, coeffs)
    total = None
    for b in doc["bumps"]:
        if set(b) - {"center", "radius", "amplitude"}:
            raise ConfigError(f"unknown bump keys: {sorted(set(b) - {'center', 'radius', 'amplitude'})}")
        f = bump(b["center"], b["radius"], b.get("amplitude", 1.0))
        if f.dim != dim:
            raise ConfigError("bump center has the wrong dimension")
        total = f if total is None else total + f
    return total if total is not None else ZeroField(dim)


def metric_from_dict(doc: dict, tp: ToricPotential) -> MetricPotential:
    unknown = set(doc) - _METRIC_KEYS
    if unknown:
        raise ConfigError(f"unknown metric keys: {sorted(unknown)}")
    if "divisor" not in doc:
        raise ConfigError("metric is missing 'divisor'")
    a = doc["divisor"]
    if len(a) != tp.polytope.d or any(isinstance(x, bool) or not isinstance(x, int) for x in a):
        raise ConfigError(f"divisor must be {tp.polytope.d} integers, got {a!r}")
    return MetricPotential(tp, tuple(a), correction_from_dict(doc.get("correction"), tp.dim))
