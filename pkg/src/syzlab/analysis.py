"""Slope, harmonic sections and the special Lagrangian residual.

The slope of a section is the polytope average of ``div_x y``.  Pulled back
by ``x = grad phi(xi)`` the integrand becomes ``tr(adj(Hess phi) Hess g)``,
which decays exponentially in every direction, so the integral is taken
over a ``xi``-box with tensor Gauss-Legendre panels.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import lsqr, spsolve

from .errors import QuadratureFailure, ResidualTooLarge, SolverFailure
from .fields import GridField, SumField, as_batch
from .kaehler import ToricPotential, legendre_inverse
from .metrics import GuilleminPotential
from .syz import LagrangianSection, polytope_grid
from .toric import Polytope


# --- slope ---------------------------------------------------------------------

@dataclass(frozen=True)
class SlopeResult:
    quadrature: float | None
    topological: float
    volume: float
    facet_contributions: tuple[float, ...]
    box: float | None = None
    refinement_gap: float | None = None

    def to_dict(self) -> dict:
        return {
            "quadrature": self.quadrature,
            "topological": self.topological,
            "volume": self.volume,
            "facet_contributions": list(self.facet_contributions),
            "box": self.box,
            "refinement_gap": self.refinement_gap,
        }


def slope_topological(P: Polytope, a) -> float:
    """``(1/Vol P) sum_k a_k vol_lat(F_k)``; equals ``a_1 + a_2`` on CP^1."""
    a = np.asarray(a, dtype=float).reshape(P.d)
    return float(a @ np.asarray(P.facet_volumes)) / P.volume


def slope_result(P: Polytope, a, quadrature=None, **extra) -> SlopeResult:
    a = np.asarray(a, dtype=float).reshape(P.d)
    contrib = tuple(float(x) for x in a * np.asarray(P.facet_volumes))
    return SlopeResult(quadrature, slope_topological(P, a), P.volume, contrib, **extra)


def _gauss_panels(T: float, width: float, order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    count = max(1, int(round(2 * T / width)))
    edges = np.linspace(-T, T, count + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    pts = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    wts = (half[:, None] * weights[None, :]).ravel()
    return pts, wts


def _adjugate(H: np.ndarray) -> np.ndarray:
    n = H.shape[-1]
    if n == 1:
        return np.ones_like(H)
    if n == 2:
        out = np.empty_like(H)
        out[:, 0, 0] = H[:, 1, 1]
        out[:, 1, 1] = H[:, 0, 0]
        out[:, 0, 1] = -H[:, 0, 1]
        out[:, 1, 0] = -H[:, 1, 0]
        return out
    # Hess phi is positive definite, so adj = det * inverse is safe
    return np.linalg.det(H)[:, None, None] * np.linalg.inv(H)


def _divergence_integral(s: LagrangianSection, T: float, width: float, order: int,
                         chunk: int = 65536) -> float:
    n = s.dim
    pts1, wts1 = _gauss_panels(T, width, order)
    grids = np.meshgrid(*([pts1] * n), indexing="ij")
    wgrid = np.ones_like(grids[0])
    for w in np.meshgrid(*([wts1] * n), indexing="ij"):
        wgrid = wgrid * w
    pts = np.stack(grids, axis=-1).reshape(-1, n)
    wts = wgrid.ravel()
    total = 0.0
    for start in range(0, len(pts), chunk):
        x = pts[start:start + chunk]
        adj = _adjugate(s.tp.hess(x).reshape(len(x), n, n))
        Hg = s.potential.hess(x).reshape(len(x), n, n)
        integrand = np.einsum("nij,nji->n", adj, Hg)
        total += float(wts[start:start + chunk] @ integrand)
    return total


def slope_quadrature(s: LagrangianSection, *, boxes=(8.0, 12.0, 16.0), width: float = 1.0,
                     order: int = 8, tol: float = 1e-4, max_halvings: int = 3) -> SlopeResult:
    """``(1/Vol P) int_P div_x y dx`` by quadrature in ``xi``-coordinates.

    The box is enlarged through ``boxes`` until two successive values agree
    within ``tol``; panels are then halved until the value changes by less
    than ``tol``.  Sections sampled on a finite box use boxes up to it.

    Raises
    ------
    QuadratureFailure
        If enlargement or refinement does not settle within ``tol``.
    """
    P = s.polytope
    limit = s.potential.box
    levels = [b for b in boxes if limit is None or b <= limit]
    if limit is not None and (not levels or levels[-1] < limit):
        levels.append(limit)
    if limit is not None and len(levels) == 1:
        levels.insert(0, max(limit - 2.0, 0.5 * limit))
    prev = None
    value = None
    for T in levels:
        value = _divergence_integral(s, T, width, order) / P.volume
        if prev is not None and abs(value - prev) <= tol * max(1.0, abs(value)):
            break
        prev = value
    else:
        raise QuadratureFailure(f"slope did not settle with the box (last change "
                                f"{abs(value - prev):.3g})")
    w = width
    for _ in range(max_halvings):
        w /= 2
        refined = _divergence_integral(s, T, w, order) / P.volume
        gap = abs(refined - value)
        value = refined
        if gap <= tol * max(1.0, abs(value)):
            break
    else:
        raise QuadratureFailure(f"panel refinement still changes the slope by {gap:.3g}")
    a = s.divisor if s.divisor is not None else np.zeros(P.d)
    return slope_result(P, a, float(value), box=float(T), refinement_gap=float(gap))


# --- harmonic sections -----------------------------------------------------------

@dataclass(frozen=True)
class HarmonicSolution:
    section: LagrangianSection
    lam: float
    correction: GridField
    box: float
    resolution: int
    interior_residual: float
    interior_l2: float
    weighted_residual: float
    discrete_residual: float
    divisor: tuple[int, ...] = field(default=())

    @property
    def h(self) -> float:
        return 2.0 * self.box / (self.resolution - 1)

    def header(self) -> dict:
        return {
            "lambda": self.lam,
            "divisor": list(self.divisor),
            "box": self.box,
            "resolution": self.resolution,
            "h": self.h,
            "interior_residual_max": self.interior_residual,
            "interior_residual_rms": self.interior_l2,
            "weighted_residual_max": self.weighted_residual,
            "discrete_residual_max": self.discrete_residual,
        }

    def write_csv(self, path) -> Path:
        path = Path(path)
        f = self.correction
        pts = f.nodes()
        g = self.section.potential.value(pts)
        n = f.dim
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"xi{j + 1}" for j in range(n)] + ["f", "g"])
            for p, fv, gv in zip(pts, f.samples.ravel(), g):
                w.writerow([repr(float(t)) for t in p] + [repr(float(fv)), repr(float(gv))])
        return path

    def write_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.header(), indent=2))
        return path


def harmonic_ansatz(P: Polytope, a):
    """``(c, u)`` with ``c phi + <u, xi>`` in the growth class of ``a``.

    Solves ``c lambda_i - <u, v_i> = a_i``; raises ``ValueError`` when ``a`` is
    not of that form (Picard rank above one and ``a`` not proportional to the
    polytope class).
    """
    V = P.fan.V.astype(float)
    lam = P.lam.astype(float)
    a = np.asarray(a, dtype=float).reshape(P.d)
    A = np.column_stack([lam, -V])
    sol, *_ = np.linalg.lstsq(A, a, rcond=None)
    if np.max(np.abs(A @ sol - a)) > 1e-9:
        raise ValueError(f"divisor {a.tolist()} has no harmonic potential of the form c phi + <u, xi>")
    return float(sol[0]), sol[1:]


def _flat(multi: np.ndarray, N: int) -> np.ndarray:
    return np.ravel_multi_index(tuple(multi.T), (N,) * multi.shape[1])


def _equation_residual(tp, g0, f, lam, x):
    Hphi = tp.hess(x).reshape(len(x), tp.dim, tp.dim)
    Hg = g0.hess(x).reshape(len(x), tp.dim, tp.dim) + f.hess(x).reshape(len(x), tp.dim, tp.dim)
    inv = np.linalg.inv(Hphi)
    return np.einsum("nij,nij->n", inv, Hg) - lam


def harmonic_solve(P: Polytope, a, *, box: float = 8.0, resolution: int = 129,
                   weights: dict | None = None, tp: ToricPotential | None = None,
                   residual_constant: float = 2.0) -> HarmonicSolution:
    """Solve ``sum phi^{jk} g_{jk} = lambda`` for ``g = g_{h0,a} + f``.

    Second-order conservative finite differences for ``f`` on
    ``[-box, box]^n`` with zero flux through the box faces, the gauge
    ``f(0) = 0`` and ``lambda`` as an extra unknown.  ``interior_residual``
    is the unweighted residual ``sum phi^{jk} g_{jk} - lambda`` of the
    spline interpolant at the nodes with ``|xi|_inf <= box - 1``.

    Raises
    ------
    SolverFailure
        If neither the sparse direct solve nor the least-squares fallback
        produces a finite solution.
    ResidualTooLarge
        If the equation residual of the interpolated solution, weighted by
        ``det Hess phi / max det Hess phi``, exceeds ``residual_constant * h^2`` on the
        interior ``|xi|_inf <= box - 1``.
    """
    tp = tp or ToricPotential(P, weights)
    n = P.n
    N = int(resolution)
    if N < 5:
        raise ValueError("resolution must be at least 5")
    a = tuple(int(x) for x in np.asarray(a).reshape(P.d))
    g0 = GuilleminPotential(tp, a)
    h = 2.0 * box / (N - 1)
    axis = np.linspace(-box, box, N)
    multi = np.stack(np.meshgrid(*([np.arange(N)] * n), indexing="ij"), axis=-1).reshape(-1, n)
    nodes = axis[multi]
    count = len(nodes)

    # Multiplying by det Hess phi turns the equation into divergence form,
    #   div(B grad f) = (lambda - rho0) det Hess phi,   B = adj(Hess phi),
    # because the adjugate of a Hessian is divergence free.  The flux B grad f
    # vanishes at infinity, so a zero-flux box boundary matches the true
    # solution even where the box edge is not normal to a facet.
    Hphi = tp.hess(nodes).reshape(count, n, n)
    B = _adjugate(Hphi)
    D = np.linalg.det(Hphi)
    source = np.einsum("nij,nji->n", B, g0.hess(nodes).reshape(count, n, n))

    # B = sum_{j<k} |B_jk| (e_j +- e_k)(e_j +- e_k)^T + sum_j beta_j e_j e_j^T;
    # the dominant directions of B near facets and vertices are of this form
    eye = np.eye(n, dtype=int)
    directions, betas = [], []
    beta_axis = np.einsum("nii->ni", B).copy()
    for j in range(n):
        for k in range(j + 1, n):
            off = B[:, j, k]
            beta_axis[:, j] -= np.abs(off)
            beta_axis[:, k] -= np.abs(off)
            for sign in (1, -1):
                directions.append(eye[j] + sign * eye[k])
                betas.append(np.where(np.sign(off) == sign, np.abs(off), 0.0))
    for j in range(n):
        directions.append(eye[j])
        betas.append(beta_axis[:, j])

    rows, cols, vals = [], [], []
    for d, beta in zip(directions, betas):
        nb = multi + d
        inside = np.all((nb >= 0) & (nb < N), axis=1)
        i = np.flatnonzero(inside)
        k = _flat(nb[inside], N)
        w = 0.5 * (beta[i] + beta[k]) / h**2
        rows += [i, i, k, k]
        cols += [k, i, i, k]
        vals += [w, -w, w, -w]
    # lambda column and gauge row f(center) = 0
    center = _flat(np.full((1, n), N // 2), N)[0]
    rows += [np.arange(count), np.array([count])]
    cols += [np.full(count, count), np.array([center])]
    vals += [-D, np.array([1.0])]
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(count + 1, count + 1)).tocsc()
    b = np.concatenate([-source, [0.0]])
    sol = spsolve(A, b)
    if not np.all(np.isfinite(sol)):
        sol = lsqr(A, b, atol=1e-14, btol=1e-14, iter_lim=20 * count)[0]
        if not np.all(np.isfinite(sol)):
            raise SolverFailure("linear solve for the harmonic correction failed")
    discrete = float(np.max(np.abs(A @ sol - b)))
    f_vals = sol[:count].reshape((N,) * n)
    lam = float(sol[count])
    f = GridField(box, f_vals)

    interior = np.max(np.abs(nodes), axis=1) <= box - 1.0 + 1e-12
    res = _equation_residual(tp, g0, f, lam, nodes[interior])
    res_max = float(np.max(np.abs(res)))
    res_rms = float(np.sqrt(np.mean(res**2)))
    # phi^{jk} grows like exp(2|xi|), which magnifies interpolation error of
    # the spline Hessian near the box edge; the acceptance test is therefore
    # made on the residual weighted by det Hess phi, relative to its peak
    weighted = float(np.max(np.abs(res) * D[interior]) / np.max(D))
    bound = residual_constant * h**2
    if not weighted <= bound:
        raise ResidualTooLarge(f"weighted interior residual {weighted:.3g} exceeds {bound:.3g}")
    section = LagrangianSection(tp, SumField([(1.0, g0), (1.0, f)]), a)
    return HarmonicSolution(section, lam, f, float(box), N, res_max, res_rms, weighted,
                            discrete, a)


# --- special Lagrangian residual -------------------------------------------------

@dataclass(frozen=True)
class SlagResidual:
    points: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    theta: float

    @property
    def max_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def section_jacobian(s: LagrangianSection, xi) -> np.ndarray:
    """``dy/dx`` at ``xi``: ``Hess g (Hess phi)^{-1}`` by the chain rule."""
    x, _ = as_batch(xi, s.dim)
    n = s.dim
    Hphi = s.tp.hess(x).reshape(len(x), n, n)
    Hg = s.potential.hess(x).reshape(len(x), n, n)
    # Hess g Hess phi^{-1} = (Hess phi^{-1} Hess g)^T since both are symmetric
    return np.transpose(np.linalg.solve(Hphi, Hg), (0, 2, 1))


def slag_residual(s: LagrangianSection, theta: float, *, resolution: int = 41,
                  margin: float = 1e-2, points=None) -> SlagResidual:
    """``Im(e^{i theta} det(I - i dy/dx))`` over an interior polytope grid."""
    if points is None:
        points = polytope_grid(s.polytope, resolution, margin)
    points = np.asarray(points, dtype=float).reshape(-1, s.dim)
    xi = legendre_inverse(s.tp, points).reshape(len(points), s.dim)
    J = section_jacobian(s, xi)
    det = np.linalg.det(np.eye(s.dim)[None] - 1j * J)
    vals = np.imag(np.exp(1j * theta) * det)
    return SlagResidual(points, vals, float(theta))


def fiber_rescale(s: LagrangianSection, eps: float) -> LagrangianSection:
    """Replace ``y`` by ``eps * y``; the potential becomes ``eps * g``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if eps == 1.0:
        return s
    return LagrangianSection(s.tp, SumField([(float(eps), s.potential)]), None)
