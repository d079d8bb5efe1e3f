"""Toric Kaehler potential, moment map and its Legendre inverse.

``phi(xi) = 1/2 log sum_u c_u exp(2 <u, xi>)`` over the lattice points of the
polytope.  All lattice sums are evaluated with max-shifted exponentials, so
``|xi|`` up to a few hundred is safe.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import BoundaryPoint, ConfigError, NoConvergence, NumericOverflow, OutsidePolytope
from .fields import ScalarField, as_batch
from .toric import Polytope

INTERIOR_MARGIN = 1e-6


def lattice_log_terms(points: np.ndarray, log_weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Exponents ``log w_u + 2 <u, xi>`` with shape ``(N, m)``."""
    return log_weights[None, :] + 2.0 * x @ points.T.astype(float)


def weighted_moments(logits: np.ndarray, points: np.ndarray):
    """Softmax weights, mean and centered covariance of ``points``.

    Returns ``(p, mean, cov)`` with shapes ``(N, m)``, ``(N, n)``, ``(N, n, n)``.
    """
    p = softmax(logits, axis=1)
    pts = points.astype(float)
    mean = p @ pts
    dev = pts[None, :, :] - mean[:, None, :]
    cov = np.einsum("nm,nmi,nmj->nij", p, dev, dev)
    return p, mean, cov


def centered_cov_pair(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``Cov_p[a, b]`` for per-point values ``a``, ``b`` of shape ``(m,)``."""
    am = p @ a
    bm = p @ b
    return np.einsum("nm,nm,nm->n", p, a[None, :] - am[:, None], b[None, :] - bm[:, None])


class ToricPotential(ScalarField):
    """The potential ``phi`` of a toric Kaehler metric on the polytope ``P``.

    Parameters
    ----------
    polytope : Polytope
    weights : dict, optional
        Map from lattice point (tuple) to a nonnegative weight ``c_u``.  Points
        not listed get weight 1.  Zero weights are allowed as long as every
        vertex keeps a positive weight.
    stable : bool
        Evaluate lattice sums with max-shifting (default).  Without it large
        ``|xi|`` raises :class:`NumericOverflow`.
    """

    def __init__(self, polytope: Polytope, weights: dict | None = None, *, stable: bool = True):
        self.polytope = polytope
        self.dim = polytope.n
        self.stable = stable
        pts = polytope.lattice_points
        c = np.ones(len(pts))
        if weights:
            index = {tuple(int(t) for t in u): i for i, u in enumerate(pts)}
            for key, w in weights.items():
                key = tuple(int(t) for t in np.atleast_1d(key))
                if key not in index:
                    raise ConfigError(f"weight given for {key}, which is not a lattice point of P")
                if not w >= 0:
                    raise ConfigError(f"weight for {key} must be nonnegative, got {w}")
                c[index[key]] = float(w)
        vertex_keys = {tuple(v) for v in polytope.vertices}
        for i, u in enumerate(pts):
            if tuple(u) in vertex_keys and c[i] <= 0:
                raise ConfigError(f"vertex {tuple(u)} needs a positive weight")
        keep = c > 0
        self.points = pts[keep]
        self.weights = c[keep]
        self.log_weights = np.log(self.weights)
        # l_i(u) for every supported lattice point, shape (m, d)
        self.facet_values = self.points @ polytope.fan.V.T + polytope.lam

    def logits(self, x: np.ndarray) -> np.ndarray:
        z = lattice_log_terms(self.points, self.log_weights, x)
        if not self.stable and np.any(z > 700):
            raise NumericOverflow("lattice sum overflows without max-shifting")
        return z

    def moments(self, x: np.ndarray):
        return weighted_moments(self.logits(x), self.points)

    def _value(self, x):
        z = self.logits(x)
        if self.stable:
            return 0.5 * logsumexp(z, axis=1)
        return 0.5 * np.log(np.sum(np.exp(z), axis=1))

    def _grad(self, x):
        return self.moments(x)[1]

    def _hess(self, x):
        return 2.0 * self.moments(x)[2]

    def _hess_pair(self, x, v, w):
        p = softmax(self.logits(x), axis=1)
        pts = self.points.astype(float)
        return 2.0 * centered_cov_pair(p, pts @ v, pts @ w)

    def __repr__(self):
        return f"ToricPotential(offsets={self.polytope.offsets}, m={len(self.points)})"


def phi_eval(tp: ToricPotential, xi):
    return tp.value(xi)


def phi_grad(tp: ToricPotential, xi):
    return tp.grad(xi)


def phi_hess(tp: ToricPotential, xi):
    return tp.hess(xi)


def moment_map(tp: ToricPotential, xi):
    """Image of ``xi`` in the open polytope, with a positivity check.

    The facet values are evaluated as ``sum_u p_u l_i(u)``, a sum of
    nonnegative terms, so they stay accurate near the boundary.
    """
    x, single = as_batch(xi, tp.dim)
    p = softmax(tp.logits(x), axis=1)
    mu = p @ tp.points.astype(float)
    facet = p @ tp.facet_values.astype(float)
    if np.any(facet <= 0):
        raise OutsidePolytope("moment map left the open polytope; check the weights")
    return mu[0] if single else mu


def facet_margin(P: Polytope, x) -> np.ndarray:
    return np.min(P.facet_values(x), axis=-1)


def legendre_inverse(tp: ToricPotential, x, *, tol: float = 1e-10,
                     margin: float = INTERIOR_MARGIN, max_iter: int = 200):
    """Solve ``grad phi(xi) = x`` for ``xi`` (the map Psi).

    Damped Newton iteration on the strictly convex function
    ``phi(xi) - <x, xi>``, run on all points of a batch at once.

    Raises
    ------
    BoundaryPoint
        If some ``x`` is within ``margin`` of the polytope boundary.
    NoConvergence
        If the iteration cap is hit before ``|Phi(xi) - x| <= tol``.
    """
    xs, single = as_batch(x, tp.dim)
    if np.any(facet_margin(tp.polytope, xs) < margin):
        raise BoundaryPoint(f"point within {margin:g} of the polytope boundary")
    xi = np.zeros_like(xs)

    def objective(z):
        return tp._value(z) - np.sum(xs * z, axis=1)

    f = objective(xi)
    done = np.zeros(len(xs), dtype=bool)
    for _ in range(max_iter):
        _, mean, cov = tp.moments(xi)
        g = mean - xs
        gnorm = np.max(np.abs(g), axis=1)
        done = gnorm <= 1e-3 * tol
        if done.all():
            break
        H = 2.0 * cov
        step = -np.linalg.solve(H, g[:, :, None])[:, :, 0]
        tiny = np.max(np.abs(step), axis=1) <= 1e-15 * (1.0 + np.max(np.abs(xi), axis=1))
        done |= tiny & (gnorm <= tol)
        if done.all():
            break
        step[done] = 0.0
        slope = np.sum(g * step, axis=1)
        alpha = np.ones(len(xs))
        accepted = done.copy()
        for _ in range(60):
            trial = xi + alpha[:, None] * step
            ft = objective(trial)
            ok = ft <= f + 1e-4 * alpha * slope + 1e-13 * (1.0 + np.abs(f))
            newly = ok & ~accepted
            xi[newly] = trial[newly]
            f[newly] = ft[newly]
            accepted |= ok
            if accepted.all():
                break
            alpha = np.where(accepted, alpha, 0.5 * alpha)
    resid = np.max(np.abs(tp._grad(xi) - xs), axis=1)
    if np.any(resid > tol):
        raise NoConvergence(f"Legendre inversion residual {resid.max():.3g} exceeds {tol:g}")
    return xi[0] if single else xi


def psi_hess(tp: ToricPotential, x):
    """Hessian of the dual potential: the inverse of ``Hess phi`` at ``Psi(x)``."""
    xi = legendre_inverse(tp, x)
    return np.linalg.inv(tp.hess(xi))
