"""Numerical verification of the growth conditions along maximal cones.

For a maximal cone generated by ``v_{i_1}, ..., v_{i_n}`` write
``xi(t) = sum_j t_j v_{i_j}``.  A potential ``g`` satisfies the growth
condition for a representative ``a`` when, as one ``t_j -> -infinity`` with
the other coordinates frozen,

1. ``2 e^{-2t_j} (<dg, v_{i_j}> + a_{i_j})`` and
   ``e^{-2t_j} v_{i_j}^T Hess(g) v_{i_j}`` share a limit;
2. every ``v_{i_j}^T Hess(g) v_{i_k}`` has a limit as any ``t_l -> -infinity``;
3. ``e^{-t_j-t_k} v_{i_j}^T Hess(g) v_{i_k}`` tends to zero for ``j != k`` as
   either coordinate goes to ``-infinity``.

Limits are estimated by fitting ``c0 + sum_m c_m e^{r_m t}`` to samples at
``t = -T0 - m*delta`` and comparing with the same fit one step further out.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import Diverging, EmptyStratum, NumericalFailure, Oscillating, OutsideBox
from .fields import ScalarField
from .toric import Fan, Polytope

#: integer representatives are searched only up to this size
A_MAX = 16


@dataclass(frozen=True)
class GrowthOptions:
    T0: float = 6.0
    delta: float = 0.5
    M: int = 8
    tol_fit: float = 1e-7
    tol_lim: float = 1e-6
    tol_match: float = 1e-5
    tol_zero: float = 1e-6
    seed: int = 42
    threads: int = 1

    def __post_init__(self):
        for name in ("T0", "delta", "tol_fit", "tol_lim", "tol_match", "tol_zero"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.M < 3:
            raise ValueError("need at least 3 samples per window")


def cone_coords(fan: Fan, cone, t) -> np.ndarray:
    """``xi(t) = sum_j t_j v_{i_j}``; ``t`` may be batched ``(N, n)``."""
    t = np.asarray(t, dtype=float)
    return t @ fan.cone_matrix(cone).astype(float)


# --- tail fitting ------------------------------------------------------------

@dataclass(frozen=True)
class TailFit:
    """Least-squares tail model ``c0 + c1 e^{r t} + ...`` on one window.

    ``converged`` means the fit residual is within tolerance and the estimate
    of ``c0`` from the window shifted by ``delta`` agrees with it.
    """

    c0: float
    c1: float
    residual: float
    T0: float
    delta: float
    M: int
    converged: bool
    status: str
    c0_shifted: float = float("nan")
    exponents: tuple[float, ...] = (2.0,)

    def to_dict(self) -> dict:
        return asdict(self)


def _window(T0, delta, count):
    return -T0 - delta * np.arange(count)


def _fit(ts, vals, exponents):
    cols = [np.ones_like(ts)] + [np.exp(r * ts) for r in exponents]
    design = np.column_stack(cols)
    scale = np.max(np.abs(design), axis=0)
    coef, *_ = np.linalg.lstsq(design / scale, vals, rcond=None)
    coef = coef / scale
    resid = float(np.sqrt(np.mean((design @ coef - vals) ** 2)))
    return coef, resid


def _grows(vals) -> bool:
    mags = np.abs(vals)
    return bool(np.all(np.diff(mags) > 0))


def tail_limit(sampler, T0: float = 6.0, delta: float = 0.5, M: int = 8, *,
               exponents=(2.0,), tol_fit: float = 1e-7, tol_lim: float = 1e-6,
               strict: bool = True) -> TailFit:
    """Estimate ``lim_{t -> -inf} sampler(t)``.

    ``sampler`` maps an array of ``t`` values to an array of samples.
    Tolerances are relative to ``max(1, |c0|)``.

    Raises
    ------
    Diverging
        Samples are non-finite, or the model does not fit and ``|samples|``
        grows monotonically toward ``-inf``.
    Oscillating
        The model does not fit and there is no such trend.

    With ``strict=False`` these cases are returned as a fit with status
    ``"diverging"`` / ``"oscillating"`` instead.
    """
    exponents = tuple(float(r) for r in exponents)
    ts = _window(T0, delta, M + 1)
    vals = np.asarray(sampler(ts), dtype=float).reshape(-1)
    a_vals, b_vals = vals[:M], vals[1:M + 1]
    ta, tb = ts[:M], ts[1:M + 1]

    def failed(status, exc, msg, c0=np.nan, c1=np.nan, resid=np.inf):
        if strict:
            raise exc(msg)
        return TailFit(float(c0), float(c1), float(resid), T0, delta, M, False, status,
                       exponents=exponents)

    if not np.all(np.isfinite(vals)):
        return failed("diverging", Diverging, "non-finite samples in the tail window")
    coef, resid = _fit(ta, a_vals, exponents)
    scale = max(1.0, abs(coef[0]))
    if resid > tol_fit * scale:
        if _grows(vals[:M + 1]):
            return failed("diverging", Diverging,
                          f"samples grow without bound (last |f| = {abs(vals[M]):.3g})",
                          coef[0], coef[1], resid)
        return failed("oscillating", Oscillating,
                      f"tail model residual {resid:.3g} above {tol_fit * scale:.3g}",
                      coef[0], coef[1], resid)
    coef_b, resid_b = _fit(tb, b_vals, exponents)
    stable = resid_b <= tol_fit * scale and abs(coef_b[0] - coef[0]) <= tol_lim * scale
    return TailFit(float(coef[0]), float(coef[1]), resid, T0, delta, M, bool(stable),
                   "converged" if stable else "unstable", float(coef_b[0]), exponents)


# --- growth report -----------------------------------------------------------

@dataclass(frozen=True)
class GrowthEntry:
    """One limit check.

    ``cone`` lists 1-based generator indices; ``index`` holds 1-based
    positions inside the cone: ``(j,)`` for condition 1, ``(j, k, l)`` for
    condition 2 and ``(j, k, l)`` with ``l`` in ``{j, k}`` the limiting
    coordinate for condition 3.  ``frozen`` numbers the frozen-coordinate
    configuration.
    """

    cone: tuple[int, ...]
    condition: int
    index: tuple[int, ...]
    frozen: int
    limit_lhs: float | None
    limit_rhs: float | None
    residual: float | None
    verdict: str
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "cone": list(self.cone),
            "condition": self.condition,
            "index": list(self.index),
            "frozen": self.frozen,
            "limit_lhs": self.limit_lhs,
            "limit_rhs": self.limit_rhs,
            "residual": self.residual,
            "verdict": self.verdict,
            "note": self.note,
        }


@dataclass(frozen=True)
class GrowthReport:
    divisor: tuple[int, ...]
    entries: tuple[GrowthEntry, ...]
    frozen_configs: tuple[tuple[float, ...], ...]
    window_T0: float
    clamped: bool = False
    verdicts_by_config: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return _combine(e.verdict for e in self.entries)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def shared_limits(self, frozen: int = 0) -> dict:
        """Condition-1 limits ``{(cone, j): lhs}`` for one frozen configuration."""
        return {(e.cone, e.index[0]): e.limit_lhs for e in self.entries
                if e.condition == 1 and e.frozen == frozen}

    def to_dict(self) -> dict:
        return {
            "divisor": list(self.divisor),
            "verdict": self.verdict,
            "verdicts_by_config": {str(k): v for k, v in self.verdicts_by_config.items()},
            "frozen_configs": [list(c) for c in self.frozen_configs],
            "window_T0": self.window_T0,
            "clamped": self.clamped,
            "checks": [e.to_dict() for e in self.entries],
        }


def _combine(verdicts) -> str:
    verdicts = list(verdicts)
    if "fail" in verdicts:
        return "fail"
    if "inconclusive" in verdicts:
        return "inconclusive"
    return "pass"


def frozen_configs(n: int, seed: int = 42) -> list[np.ndarray]:
    """Values for the non-limiting coordinates: all zero, and one seeded
    uniform draw from ``[-1, 1]^{n-1}``."""
    if n == 1:
        return [np.zeros(0)]
    rng = np.random.default_rng(seed)
    return [np.zeros(n - 1), rng.uniform(-1.0, 1.0, n - 1)]


def standard_chart_fan(n: int) -> Fan:
    """The single cone spanned by ``e_1, ..., e_n`` (one affine chart)."""
    return Fan(n, tuple(tuple(int(i == j) for i in range(n)) for j in range(n)),
               (tuple(range(n)),))


def _window_start(g: ScalarField, fan: Fan, frozen: np.ndarray, opts: GrowthOptions):
    """Largest ``T0 <= opts.T0`` whose windows stay inside ``g``'s box."""
    if g.box is None:
        return opts.T0, False
    vmax = float(np.max(np.abs(fan.V)))
    reach = (g.box - vmax * float(np.sum(np.abs(frozen)))) / vmax - opts.delta * opts.M
    if reach >= opts.T0:
        return opts.T0, False
    return reach, True


class _Context:
    def __init__(self, g, fan, a, opts):
        self.g, self.fan, self.a, self.opts = g, fan, np.asarray(a, dtype=float), opts
        self.V = fan.V.astype(float)

    def xi(self, cone, frozen, pos, ts):
        t = np.empty((len(ts), self.fan.dim))
        others = [m for m in range(self.fan.dim) if m != pos]
        t[:, others] = frozen[None, :]
        t[:, pos] = ts
        return cone_coords(self.fan, cone, t)

    def fit(self, sampler, T0, exponents):
        o = self.opts
        return tail_limit(sampler, T0, o.delta, o.M, exponents=exponents,
                          tol_fit=o.tol_fit, tol_lim=o.tol_lim, strict=False)


def _failed_fit_verdict(fit: TailFit, clamped: bool) -> str:
    # On a clamped window the weights e^{-2t} magnify interpolation error of
    # sampled fields, so a failed fit there is missing data, not a violation.
    return "inconclusive" if clamped else "fail"


def _entry_condition1(ctx, cone, frozen, fi, j, T0, clamped):
    i = cone[j]
    v = ctx.V[i]

    def first(ts):
        return 2.0 * np.exp(-2.0 * ts) * ctx.g.pairing(ctx.xi(cone, frozen, j, ts), v, ctx.a[i])

    def second(ts):
        return np.exp(-2.0 * ts) * ctx.g.hess_pair(ctx.xi(cone, frozen, j, ts), v, v)

    f1 = ctx.fit(first, T0, (2.0,))
    f2 = ctx.fit(second, T0, (2.0,))
    base = dict(cone=tuple(c + 1 for c in cone), condition=1, index=(j + 1,), frozen=fi,
                limit_lhs=_finite(f1.c0), limit_rhs=_finite(f2.c0),
                residual=_finite(max(f1.residual, f2.residual)))
    if not (f1.converged and f2.converged):
        bad = f1 if not f1.converged else f2
        return GrowthEntry(**base, verdict=_failed_fit_verdict(bad, clamped),
                           note=f"tail fit {bad.status}")
    scale = max(1.0, abs(f1.c0))
    ok = abs(f1.c0 - f2.c0) <= ctx.opts.tol_match * scale
    return GrowthEntry(**base, verdict="pass" if ok else "fail",
                       note="" if ok else "limits differ")


def _entry_condition2(ctx, cone, frozen, fi, j, k, l, T0, clamped):
    vj, vk = ctx.V[cone[j]], ctx.V[cone[k]]

    def q(ts):
        return ctx.g.hess_pair(ctx.xi(cone, frozen, l, ts), vj, vk)

    f = ctx.fit(q, T0, (2.0, 4.0))
    base = dict(cone=tuple(c + 1 for c in cone), condition=2, index=(j + 1, k + 1, l + 1),
                frozen=fi, limit_lhs=_finite(f.c0), limit_rhs=None, residual=_finite(f.residual))
    if not f.converged:
        return GrowthEntry(**base, verdict=_failed_fit_verdict(f, clamped),
                           note=f"tail fit {f.status}")
    return GrowthEntry(**base, verdict="pass")


def _entry_condition3(ctx, cone, frozen, fi, j, k, l, T0, clamped):
    vj, vk = ctx.V[cone[j]], ctx.V[cone[k]]
    others = [m for m in range(ctx.fan.dim) if m != l]

    def q(ts):
        x = ctx.xi(cone, frozen, l, ts)
        t_all = np.empty((len(ts), ctx.fan.dim))
        t_all[:, others] = frozen[None, :]
        t_all[:, l] = ts
        return np.exp(-t_all[:, j] - t_all[:, k]) * ctx.g.hess_pair(x, vj, vk)

    f = ctx.fit(q, T0, (1.0, 3.0))
    base = dict(cone=tuple(c + 1 for c in cone), condition=3, index=(j + 1, k + 1, l + 1),
                frozen=fi, limit_lhs=_finite(f.c0), limit_rhs=0.0, residual=_finite(f.residual))
    if not f.converged:
        return GrowthEntry(**base, verdict=_failed_fit_verdict(f, clamped),
                           note=f"tail fit {f.status}")
    ok = abs(f.c0) <= ctx.opts.tol_zero
    return GrowthEntry(**base, verdict="pass" if ok else "fail",
                       note="" if ok else "limit is not zero")


def _finite(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _run(task):
    fn, args = task
    try:
        return fn(*args)
    except OutsideBox as exc:
        ctx, cone, frozen, fi = args[:4]
        return GrowthEntry(tuple(c + 1 for c in cone), _condition_of(fn), (), fi,
                           None, None, None, "inconclusive", note=str(exc))
    except NumericalFailure as exc:
        ctx, cone, frozen, fi = args[:4]
        return GrowthEntry(tuple(c + 1 for c in cone), _condition_of(fn), (), fi,
                           None, None, None, "fail", note=f"{type(exc).__name__}: {exc}")


def _condition_of(fn) -> int:
    return {_entry_condition1: 1, _entry_condition2: 2, _entry_condition3: 3}[fn]


def _check(g: ScalarField, fan: Fan, a, opts: GrowthOptions) -> GrowthReport:
    n = fan.dim
    ctx = _Context(g, fan, a, opts)
    configs = frozen_configs(n, opts.seed)
    tasks = []
    inconclusive = []
    starts = []
    any_clamped = False
    for fi, frozen in enumerate(configs):
        T0, clamped = _window_start(g, fan, frozen, opts)
        starts.append(T0)
        any_clamped |= clamped
        for cone in fan.max_cones:
            if T0 < 1.0:
                inconclusive.append(GrowthEntry(
                    tuple(c + 1 for c in cone), 0, (), fi, None, None, None, "inconclusive",
                    note=f"sampling box {g.box:g} cannot hold the tail window"))
                continue
            for j in range(n):
                tasks.append((_entry_condition1, (ctx, cone, frozen, fi, j, T0, clamped)))
            for j in range(n):
                for k in range(j, n):
                    for l in range(n):
                        tasks.append((_entry_condition2,
                                      (ctx, cone, frozen, fi, j, k, l, T0, clamped)))
            for j in range(n):
                for k in range(j + 1, n):
                    for l in (j, k):
                        tasks.append((_entry_condition3,
                                      (ctx, cone, frozen, fi, j, k, l, T0, clamped)))
    if opts.threads > 1:
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            entries = list(pool.map(_run, tasks))
    else:
        entries = [_run(t) for t in tasks]
    entries = inconclusive + entries
    # deterministic cone-then-condition order
    cone_rank = {tuple(c + 1 for c in cone): r for r, cone in enumerate(fan.max_cones)}
    entries.sort(key=lambda e: (e.frozen, cone_rank[e.cone], e.condition, e.index))
    by_config = {fi: _combine(e.verdict for e in entries if e.frozen == fi)
                 for fi in range(len(configs))}
    return GrowthReport(tuple(int(x) for x in np.asarray(a).reshape(-1)), tuple(entries),
                        tuple(tuple(float(x) for x in c) for c in configs),
                        float(min(starts)), any_clamped, by_config)


def check_growth(s, a, options: GrowthOptions | None = None, **kwargs) -> GrowthReport:
    """Check the growth conditions for the lift ``s`` and representative ``a``.

    Every condition is checked on every maximal cone under each frozen
    configuration.  Failed fits become failing (or, for sections sampled on a
    box too small for the default window, inconclusive) entries.
    """
    opts = options or GrowthOptions(**kwargs)
    fan = s.polytope.fan
    a = np.asarray(a, dtype=np.int64).reshape(fan.d)
    return _check(s.potential, fan, a, opts)


def extendability_check(f: ScalarField, fan: Fan | None = None,
                        options: GrowthOptions | None = None, **kwargs) -> GrowthReport:
    """Growth check with ``a = 0`` on each chart of ``fan``.

    With the default fan (the standard cone of ``R^n``) this decides whether
    ``f`` extends as a C^2 function across the coordinate hyperplanes of
    ``C^n`` in the sense of the three conditions.
    """
    opts = options or GrowthOptions(**kwargs)
    fan = fan or standard_chart_fan(f.dim)
    return _check(f, fan, np.zeros(fan.d, dtype=np.int64), opts)


def _ray_limit(g: ScalarField, v: np.ndarray, opts: GrowthOptions) -> TailFit:
    T0 = opts.T0
    if g.box is not None:
        vmax = float(np.max(np.abs(v)))
        T0 = min(T0, g.box / vmax - opts.delta * opts.M)
        if T0 < 1.0:
            raise OutsideBox("sampling box too small to estimate boundary limits")

    def q(ts):
        return -g.pairing(ts[:, None] * v[None, :], v, 0.0)

    return tail_limit(q, T0, opts.delta, opts.M, exponents=(2.0,), tol_fit=1e-3,
                      tol_lim=1e-2, strict=False)


def infer_class(s, options: GrowthOptions | None = None, **kwargs):
    """Find the representative ``a`` matching the lift ``s``.

    Each ``a_i`` is minus the limit of ``<y, v_i>`` along ``xi = t v_i`` as
    ``t -> -inf``, rounded to an integer.  The candidate is then verified with
    :func:`check_growth`; a verified or inconclusive (box-limited) report
    yields ``(a, report)``, anything else ``None``.
    """
    opts = options or GrowthOptions(**kwargs)
    fan = s.polytope.fan
    a = []
    for v in fan.V.astype(float):
        try:
            fit = _ray_limit(s.potential, v, opts)
        except OutsideBox:
            return None
        if fit.status in ("diverging", "oscillating") or not np.isfinite(fit.c0):
            return None
        r = round(fit.c0)
        if abs(fit.c0 - r) > 0.1 or abs(r) > A_MAX:
            return None
        a.append(int(r))
    report = check_growth(s, a, opts)
    if report.verdict == "fail":
        return None
    return tuple(a), report


# --- closed-form limits for the Guillemin potential --------------------------

def _strata(P: Polytope, a, c, cone, k, frozen):
    pts = P.lattice_points
    L = pts @ P.fan.V.T + P.lam
    if c is None:
        c = np.ones(len(pts))
    elif isinstance(c, dict):
        w = np.ones(len(pts))
        index = {tuple(int(x) for x in u): m for m, u in enumerate(pts)}
        for key, val in c.items():
            w[index[tuple(int(x) for x in np.atleast_1d(key))]] = val
        c = w
    c = np.asarray(c, dtype=float)
    cone = list(cone)
    frozen = np.asarray(frozen, dtype=float).reshape(len(cone) - 1)
    others = [cone[m] for m in range(len(cone)) if m != k]
    b = c * np.exp(2.0 * (L[:, others] @ frozen))
    ik = cone[k]
    lk = L[:, ik]
    a = np.asarray(a, dtype=float)

    def ratio(num_mask, den_mask, w):
        den = np.sum(w[den_mask])
        if den <= 0:
            raise EmptyStratum(f"no lattice point with positive weight in the stratum "
                               f"needed for facet {ik + 1}")
        return np.sum(w[num_mask]) / den

    base = ratio(lk == 1, lk == 0, b)
    cross = 0.0
    for i in range(P.d):
        if i == ik or a[i] == 0:
            continue
        w = L[:, i] * b
        cross += a[i] * ratio((lk == 1) & (L[:, i] >= 1), (lk == 0) & (L[:, i] >= 1), w)
    own = ratio(lk == 2, lk == 1, b) if a[ik] != 0 else 0.0
    return float(np.sum(a)), base, cross, a[ik], own


def appendix_limit(P: Polytope, a, c, cone, k: int, frozen=()) -> float:
    """Closed-form ``lim e^{-2t_k} (<dg_{h0}, v> + a)`` along position ``k``
    (0-based) of ``cone``, other cone coordinates frozen at ``frozen``."""
    total, base, cross, a_k, own = _strata(P, a, c, cone, k, frozen)
    return total * base - cross - 2.0 * a_k * own


def appendix_hessian_limit(P: Polytope, a, c, cone, k: int, frozen=()) -> float:
    """Closed-form ``lim e^{-2t_k} v^T Hess(g_{h0}) v`` for the same data."""
    total, base, cross, a_k, own = _strata(P, a, c, cone, k, frozen)
    return 2.0 * total * base - 2.0 * cross - 4.0 * a_k * own
