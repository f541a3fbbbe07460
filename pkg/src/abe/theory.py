"""Leading-order error predictions: divergences, binary MSE formulas, Fisher-Rao
path lengths and the distance bounds.

Integrals over ``x`` use Gauss-Legendre rules.  In one or two dimensions the
rule is a tensor product of composite Gauss-Legendre panels; in higher
dimensions it is only available when every density involved is an isotropic
Gaussian (or mixture of them) around one common mean, in which case the
integral reduces to one radial dimension.  Infinite divergences are returned
as ``math.inf``, never as a large finite number.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.special import gammaln, log_expit, logsumexp

from .expfam import (
    GaussianDiag,
    NaturalParams,
    SimplyUnnormalizedModel,
    bhattacharyya_log,
    hessian_log_partition,
    mean_params,
    strong_constants,
)
from .paths import GaussianMixture, PathSpec, alpha_h, optimal_coefficients

INF = math.inf
LOSSES = ("IS", "RevIS", "NCE", "IS_RevIS")


class QuadratureUnavailable(ValueError):
    """No quadrature rule for these densities (dimension above 2, not radially symmetric)."""


# ---------------------------------------------------------------- quadrature


@lru_cache(maxsize=None)
def _leggauss(order: int) -> tuple[NDArray, NDArray]:
    return np.polynomial.legendre.leggauss(order)


def composite_gauss_legendre(a: float, b: float, panels: int, order: int = 16) -> tuple[NDArray, NDArray]:
    """Nodes and weights of ``panels`` equal Gauss-Legendre panels on ``[a, b]``."""
    x, w = _leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _components(dist) -> tuple[NDArray, list[GaussianDiag]]:
    if isinstance(dist, GaussianDiag):
        return np.ones(1), [dist]
    if isinstance(dist, GaussianMixture):
        w, comps = dist.components()
        keep = w > 0
        return w[keep], [c for c, k in zip(comps, keep) if k]
    raise TypeError(f"unsupported density {type(dist).__name__}")


def _all_components(dists) -> list[GaussianDiag]:
    out = []
    for d in dists:
        out.extend(_components(d)[1])
    return out


def _radial_center(comps: Sequence[GaussianDiag]) -> NDArray | None:
    m = comps[0].mean
    for c in comps:
        if not (np.allclose(c.mean, m, rtol=0, atol=1e-14) and np.ptp(c.var) <= 1e-14 * c.var[0]):
            return None
    return m


@dataclass(frozen=True)
class QuadRule:
    """Nodes ``x`` (n, D) and log weights for ``int g(x) dx ~= sum w g(x)``."""

    x: NDArray
    log_w: NDArray

    def log_integral(self, log_g: NDArray) -> float:
        return float(logsumexp(self.log_w + log_g))

    def integral(self, g: NDArray) -> float:
        return float(np.sum(np.exp(self.log_w) * g))


def quadrature_rule(dists: Sequence, panels: int | None = None, order: int = 16, width: float = 40.0) -> QuadRule:
    """A rule that integrates smooth functions of the given densities.

    In 1D and 2D the box spans every component mean plus ``width`` of the
    largest standard deviation; ``width`` is generous because integrands such
    as ``p^2 / q`` can be wider than either density.  Higher dimensions use the
    radial rule and raise ``QuadratureUnavailable`` when it does not apply.
    """
    comps = _all_components(dists)
    dim = comps[0].dim
    if dim <= 2:
        panels = panels or (2000 if dim == 1 else 40)
        axes = []
        for i in range(dim):
            sd = max(math.sqrt(c.var[i]) for c in comps)
            lo = min(c.mean[i] for c in comps) - width * sd
            hi = max(c.mean[i] for c in comps) + width * sd
            axes.append(composite_gauss_legendre(lo, hi, panels, order))
        if dim == 1:
            nodes, w = axes[0]
            return QuadRule(nodes[:, None], np.log(w))
        (x0, w0), (x1, w1) = axes
        xx = np.stack(np.meshgrid(x0, x1, indexing="ij"), axis=-1).reshape(-1, 2)
        ww = np.log(np.outer(w0, w1).ravel())
        return QuadRule(xx, ww)
    center = _radial_center(comps)
    if center is None:
        raise QuadratureUnavailable("quadrature in dimension > 2 needs isotropic densities sharing one mean")
    return _radial_rule(center, [float(c.var[0]) for c in comps], panels or 400, order)


def _radial_rule(center: NDArray, variances: Sequence[float], panels: int, order: int) -> QuadRule:
    # x = center + sqrt(s) e_1, s = exp(u); dx -> c_D s^{D/2 - 1} ds = c_D s^{D/2} du
    dim = center.size
    vmin, vmax = min(variances), max(variances)
    half = 0.5 * dim
    u_lo = math.log(vmin * dim) - 80.0 / half - 5.0
    u_hi = math.log(vmax * (dim + 40.0 * math.sqrt(dim) + 400.0)) + 2.0
    u, w = composite_gauss_legendre(u_lo, u_hi, panels, order)
    log_c = half * math.log(math.pi) - gammaln(half)
    s = np.exp(u)
    x = np.tile(center, (u.size, 1))
    x[:, 0] += np.sqrt(s)
    return QuadRule(x, np.log(w) + log_c + half * u)


def log_integral(log_g: Callable[[NDArray], NDArray], dists: Sequence, **kw) -> float:
    rule = quadrature_rule(dists, **kw)
    return rule.log_integral(log_g(rule.x))


# ---------------------------------------------------------------- divergences


def _max_component_var(dist) -> NDArray:
    return np.max(np.stack([c.var for c in _components(dist)[1]]), axis=0)


def chi2_closed(p: GaussianDiag, q: GaussianDiag) -> float:
    """``int p^2 / q - 1`` for diagonal Gaussians; ``inf`` unless ``2 var_q > var_p`` in every dimension."""
    s = 2.0 * q.var - p.var
    if np.any(s <= 0):
        return INF
    log_int = np.sum(np.log(q.var) - 0.5 * np.log(p.var) - 0.5 * np.log(s) + (p.mean - q.mean) ** 2 / s)
    return float(np.expm1(log_int))


def chi2(p, q, **kw) -> float:
    """Chi-square divergence ``int p^2/q - 1``; closed form for Gaussian pairs, quadrature for mixtures."""
    if isinstance(p, GaussianDiag) and isinstance(q, GaussianDiag):
        return chi2_closed(p, q)
    # tail of p^2/q is governed by the widest component of each side
    if np.any(2.0 * _max_component_var(q) <= _max_component_var(p)):
        return INF
    return chi2_quad(p, q, **kw)


def chi2_quad(p, q, **kw) -> float:
    rule = quadrature_rule([p, q], **kw)
    lp, lq = p.log_density(rule.x), q.log_density(rule.x)
    with np.errstate(over="ignore"):
        return float(np.expm1(rule.log_integral(2.0 * lp - lq)))


def hellinger2(p, q, **kw) -> float:
    """Squared Hellinger distance ``1 - int sqrt(p q)``, in [0, 1]."""
    if isinstance(p, GaussianDiag) and isinstance(q, GaussianDiag):
        return float(min(max(-math.expm1(bhattacharyya_log(p, q)), 0.0), 1.0))
    return hellinger2_quad(p, q, **kw)


def hellinger2_quad(p, q, **kw) -> float:
    rule = quadrature_rule([p, q], **kw)
    val = -math.expm1(rule.log_integral(0.5 * (p.log_density(rule.x) + q.log_density(rule.x))))
    return float(min(max(val, 0.0), 1.0))


def harmonic(p, q, pi_weight: float = 0.5, **kw) -> float:
    """``1 - int (pi / p + (1 - pi) / q)^-1``, the weighted harmonic divergence in [0, 1]."""
    if not 0.0 <= pi_weight <= 1.0:
        raise ValueError("pi_weight must lie in [0, 1]")
    if pi_weight in (0.0, 1.0):
        return 0.0
    rule = quadrature_rule([p, q], **kw)
    lp, lq = p.log_density(rule.x), q.log_density(rule.x)
    log_g = -np.logaddexp(math.log(pi_weight) - lp, math.log1p(-pi_weight) - lq)
    val = -math.expm1(rule.log_integral(log_g))
    return float(min(max(val, 0.0), 1.0))


def symmetric_chi2_mixture(p1, p0, **kw) -> float:
    """``int (p1 - p0)^2 / (p0 + p1)``, the f-divergence in the arithmetic-path bound."""
    rule = quadrature_rule([p0, p1], **kw)
    l1, l0 = p1.log_density(rule.x), p0.log_density(rule.x)
    return float(np.exp(rule.log_integral(2.0 * _log_abs_diff(l1, l0) - np.logaddexp(l0, l1))))


def _log_abs_diff(a: NDArray, b: NDArray) -> NDArray:
    hi, lo = np.maximum(a, b), np.minimum(a, b)
    with np.errstate(divide="ignore"):
        return hi + np.log(-np.expm1(lo - hi))


# ---------------------------------------------------------------- binary predictions


def mse_pred_binary(loss_name: str, p0, p1, N: float, nu: float = 1.0, **kw) -> float:
    """Leading-order MSE of the one-step estimator of ``log Z1`` with ``N`` samples.

    Returns ``inf`` when the divergence the loss depends on is infinite.
    """
    if N <= 0 or nu <= 0:
        raise ValueError("N and nu must be positive")
    if loss_name == "IS":
        return (1.0 + nu) / (nu * N) * chi2(p1, p0, **kw)
    if loss_name == "RevIS":
        return (1.0 + nu) / N * chi2(p0, p1, **kw)
    if loss_name == "NCE":
        hm = harmonic(p1, p0, nu / (1.0 + nu), **kw)
        return INF if hm >= 1.0 else (1.0 + nu) ** 2 / (nu * N) * hm / (1.0 - hm)
    if loss_name == "IS_RevIS":
        bc = 1.0 - hellinger2(p0, p1, **kw)
        return INF if bc <= 0.0 else (1.0 + nu) ** 2 / (nu * N) * (1.0 - bc**2) / bc**2
    raise ValueError(f"unknown loss {loss_name!r}")


# ---------------------------------------------------------------- Fisher information along paths


def _require_samplable(spec: PathSpec) -> None:
    if spec.kind == "q_mean" and spec.q != 1.0:
        raise QuadratureUnavailable("q-mean paths with q < 1 have no closed-form normalized density")


def _geometric_info(spec: PathSpec, ts: NDArray) -> NDArray:
    theta0 = spec.p0.natural().theta
    dtheta = spec.f1.theta.theta - theta0
    out = np.empty(ts.size)
    for i, t in enumerate(ts):
        h = hessian_log_partition(NaturalParams(theta0 + t * dtheta))
        out[i] = dtheta @ h @ dtheta
    return out


def _chunk_rows(n_nodes: int, budget: int = 1 << 22) -> int:
    # keeps each (times x nodes) block near 32 MB; 2D tensor rules have millions of nodes
    return max(1, min(64, budget // max(n_nodes, 1)))


class _ArithmeticInfo:
    """``I(t) = w'(t)^2 int (p1 - p0)^2 / p_t`` with the endpoint densities cached on the nodes."""

    def __init__(self, spec: PathSpec, **kw):
        self.spec = spec
        self.log_z1 = spec.log_z1
        # coarser than the generic rule: the mixture integrand is evaluated at many times
        kw.setdefault("panels", {1: 400, 2: 30}.get(spec.p0.dim))
        rule = quadrature_rule([spec.p0, spec.p1], **kw)
        self.l0 = spec.p0.log_density(rule.x)
        self.l1 = spec.p1.log_density(rule.x)
        self.log_num = rule.log_w + 2.0 * _log_abs_diff(self.l1, self.l0)

    def mixture_integrals(self, ts: NDArray) -> NDArray:
        ell = np.array([self.spec.schedule.logit(float(t), self.log_z1) for t in ts])
        out = np.empty(ell.size)
        step = _chunk_rows(self.l0.size)
        for i in range(0, ell.size, step):
            e = ell[i : i + step, None]
            log_pt = np.logaddexp(log_expit(-e) + self.l0, log_expit(e) + self.l1)
            out[i : i + step] = np.exp(logsumexp(self.log_num - log_pt, axis=1))
        return out

    def __call__(self, ts: NDArray) -> NDArray:
        ts = np.asarray(ts, dtype=float)
        sched = self.spec.schedule
        rate = np.array([sched.normalized_weight_derivative(float(t), self.log_z1) for t in ts])
        return rate**2 * self.mixture_integrals(ts)


def _optimal_info(spec: PathSpec, ts: NDArray) -> NDArray:
    alpha = alpha_h(spec.p0, spec.p1)
    bc = math.exp(bhattacharyya_log(spec.p0, spec.p1))
    out = np.empty(ts.size)
    for i, t in enumerate(ts):
        _, _, da, db = optimal_coefficients(alpha, float(t))
        # (d_t p)^2 / p = 4 (a' sqrt(p0) + b' sqrt(p1))^2
        out[i] = 4.0 * (da * da + db * db + 2.0 * da * db * bc)
    return out


def fisher_info_fd(spec: PathSpec, t: float, h: float = 1e-4, **kw) -> float:
    """``E_{p_t}[(d/dt log p_t)^2]`` with a finite difference in ``t`` and quadrature in ``x``.

    Central differences in the interior, second-order one-sided ones within
    ``h`` of an endpoint.
    """
    _require_samplable(spec)
    comps = [spec.p0, spec.p1]
    rule = quadrature_rule(comps, **kw)

    def log_p(s: float) -> NDArray:
        return spec.point(s).dist.log_density(rule.x)

    lp = log_p(t)
    if t - h < 0.0:
        dlog = (-3.0 * lp + 4.0 * log_p(t + h) - log_p(t + 2 * h)) / (2 * h)
    elif t + h > 1.0:
        dlog = (3.0 * lp - 4.0 * log_p(t - h) + log_p(t - 2 * h)) / (2 * h)
    else:
        dlog = (log_p(t + h) - log_p(t - h)) / (2 * h)
    with np.errstate(invalid="ignore"):
        terms = np.where(np.isfinite(lp), np.exp(rule.log_w + lp) * dlog**2, 0.0)
    return float(np.sum(terms))


def _info_function(spec: PathSpec, method: str, **kw) -> Callable[[NDArray], NDArray]:
    _require_samplable(spec)
    if method == "fd":
        return lambda ts: np.array([fisher_info_fd(spec, float(t), **kw) for t in ts])
    if method != "analytic":
        raise ValueError("method must be 'analytic' or 'fd'")
    if spec.kind == "geometric":
        return lambda ts: _geometric_info(spec, np.asarray(ts, dtype=float))
    if spec.kind == "optimal":
        return lambda ts: _optimal_info(spec, np.asarray(ts, dtype=float))
    return _ArithmeticInfo(spec, **kw)


def fisher_info_time(spec: PathSpec, t: float, method: str = "analytic", **kw) -> float:
    """Fisher information of the normalized path w.r.t. ``t``.

    ``analytic`` uses parameter derivatives (geometric), the mixture form
    ``w'^2 int (p1 - p0)^2 / p_t`` (arithmetic) or the coefficient form
    (optimal); ``fd`` differentiates ``log p_t`` numerically.
    """
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    return float(_info_function(spec, method, **kw)(np.array([t]))[0])


def adaptive_gauss_legendre(
    f: Callable[[NDArray], NDArray],
    a: float,
    b: float,
    rtol: float = 1e-6,
    order: int = 16,
    initial_panels: int = 4,
    max_panels: int = 4096,
) -> tuple[float, float]:
    """Integrate a vectorized ``f`` on ``[a, b]`` by panel bisection.

    Every panel is compared with the sum over its two halves (twice the
    points).  While the summed differences exceed ``rtol`` of the total, the
    panels contributing more than their average share are split.  The global
    criterion copes with integrable endpoint singularities, where a per-width
    tolerance would never be met.  Returns ``(value, error_estimate)``.
    """
    x, w = _leggauss(order)

    def panel_values(lo: NDArray, hi: NDArray) -> NDArray:
        half = 0.5 * (hi - lo)
        nodes = (0.5 * (lo + hi))[:, None] + half[:, None] * x[None, :]
        vals = np.asarray(f(nodes.ravel()), dtype=float).reshape(nodes.shape)
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("integrand is not finite at an interior node")
        return half * (vals @ w)

    edges = np.linspace(a, b, initial_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    coarse = panel_values(lo, hi)
    left, right = panel_values(lo, mid), panel_values(mid, hi)
    while True:
        fine = left + right
        err = np.abs(fine - coarse)
        total, err_total = float(fine.sum()), float(err.sum())
        if err_total <= rtol * abs(total) or lo.size >= max_panels:
            return total, err_total
        split = err > err_total / lo.size
        keep = ~split
        # split panels become their two halves; the halves' values are reused as coarse values
        lo = np.concatenate([lo[keep], lo[split], mid[split]])
        hi_new = np.concatenate([hi[keep], mid[split], hi[split]])
        coarse = np.concatenate([coarse[keep], left[split], right[split]])
        left_keep, right_keep = left[keep], right[keep]
        hi = hi_new
        mid = 0.5 * (lo + hi)
        n_keep = int(keep.sum())
        new_lo, new_mid, new_hi = lo[n_keep:], mid[n_keep:], hi[n_keep:]
        left = np.concatenate([left_keep, panel_values(new_lo, new_mid)])
        right = np.concatenate([right_keep, panel_values(new_mid, new_hi)])


def _arithmetic_length(spec: PathSpec, rtol: float, **kw) -> float:
    """Length of an arithmetic path integrated over ``l = logit`` of the normalized weight.

    With ``w = expit(l)`` the length is ``int J(w) (w (1 - w))^2 dl/dt dl`` where
    ``J(w) = int (p1 - p0)^2 / p_w``.  Near the endpoints ``I(t)`` can carry an
    integrable singularity concentrated closer to ``t = 1`` than double
    precision resolves, while in ``l`` the integrand decays exponentially.
    """
    info = _ArithmeticInfo(spec, **kw)
    sched = spec.schedule
    shift = sched.shift(info.log_z1)

    def log_integrand(ell: NDArray) -> NDArray:
        ell = np.asarray(ell, dtype=float)
        out = np.empty(ell.size)
        step = _chunk_rows(info.l0.size)
        for i in range(0, ell.size, step):
            e = ell[i : i + step, None]
            log_pt = np.logaddexp(log_expit(-e) + info.l0, log_expit(e) + info.l1)
            out[i : i + step] = logsumexp(info.log_num - log_pt, axis=1)
        return out + 2.0 * (log_expit(ell) + log_expit(-ell)) + sched.log_base_rate(ell - shift)

    def f(ell: NDArray) -> NDArray:
        return np.exp(log_integrand(ell))

    peak = float(log_integrand(np.array([shift]))[0])
    if peak == -math.inf:
        # p1 == p0: the path does not move
        return 0.0
    bounds = []
    for direction in (-1.0, 1.0):
        step, ell = 10.0, shift
        for _ in range(2000):
            ell += direction * step
            if log_integrand(np.array([ell]))[0] < peak - 45.0:
                break
            step = min(step * 1.2, 200.0)
        else:
            raise FloatingPointError("arithmetic path length integrand does not decay")
        bounds.append(ell)
    value, _ = adaptive_gauss_legendre(f, bounds[0], bounds[1], rtol=rtol, order=16, initial_panels=16)
    return value


def fisher_rao_length(spec: PathSpec, quad_points: int = 16, method: str = "analytic", rtol: float = 1e-6, **kw) -> float:
    """``int_0^1 I(t) dt`` by adaptive composite Gauss-Legendre quadrature.

    ``quad_points`` is the rule order per panel; panels are halved until the
    refinement changes the result by less than ``rtol`` relative.  Analytic
    arithmetic lengths are integrated over the logit of the mixture weight
    instead of ``t`` (an exact change of variables).
    """
    if quad_points < 16:
        raise ValueError("quad_points must be >= 16")
    _require_samplable(spec)
    if method == "analytic" and spec.kind in ("arithmetic", "q_mean"):
        return _arithmetic_length(spec, rtol, **kw)
    info = _info_function(spec, method, **kw)
    max_panels = 4096 if method == "analytic" else 128
    value, _ = adaptive_gauss_legendre(info, 0.0, 1.0, rtol=rtol, order=quad_points, max_panels=max_panels)
    return value


def fisher_rao_length_closed(spec: PathSpec) -> float:
    """Closed forms: ``(theta1 - theta0) . (mu1 - mu0)`` for the geometric path, ``16 alpha_H^2`` for the optimal one."""
    if spec.kind == "geometric":
        theta0, theta1 = spec.p0.natural(), spec.f1.theta
        return float((theta1.theta - theta0.theta) @ (mean_params(theta1) - mean_params(theta0)))
    if spec.kind == "optimal":
        return 16.0 * alpha_h(spec.p0, spec.p1) ** 2
    raise ValueError(f"no closed form for the {spec.kind} path length")


def mse_pred_annealed(spec: PathSpec, K: int, N: float, loss_name: str = "NCE", nu: float = 1.0, **kw) -> float:
    """Sum of one-step predictions between consecutive grid points, each with budget ``N / K``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    _require_samplable(spec)
    dists = [spec.point(k / K).dist for k in range(K + 1)]
    return float(sum(mse_pred_binary(loss_name, dists[k], dists[k + 1], N / K, nu, **kw) for k in range(K)))


# ---------------------------------------------------------------- distance bounds


@dataclass(frozen=True)
class TheoremBounds:
    """Bounds in the natural-parameter distance ``|theta1 - theta0|``.

    ``thm4_structural`` omits the unspecified constant of the arithmetic-path
    lower bound and keeps ``(1/Z1 + 1 + Z1) D / (3N)`` with ``D`` the
    ``int (p1 - p0)^2 / (p0 + p1)`` divergence.
    """

    M: float
    L: float
    distance: float
    thm2_lower: float
    thm3_upper: float
    thm4_structural: float
    thm5_upper: float
    d_phi: float


def theorem_bounds(p0: GaussianDiag, f1: SimplyUnnormalizedModel, N: float, grid: int = 101, **kw) -> TheoremBounds:
    theta0, theta1 = p0.natural(), f1.theta
    M, L = strong_constants(theta0, theta1, grid)
    dist2 = float(np.sum((theta1.theta - theta0.theta) ** 2))
    z1 = math.exp(f1.log_z())
    try:
        d_phi = symmetric_chi2_mixture(f1.normalized(), p0, **kw)
    except QuadratureUnavailable:
        d_phi = math.nan
    return TheoremBounds(
        M=M,
        L=L,
        distance=math.sqrt(dist2),
        thm2_lower=4.0 / N * math.expm1(M * dist2 / 8.0),
        thm3_upper=L * L * dist2 / (M * N),
        thm4_structural=(1.0 / z1 + 1.0 + z1) * d_phi / (3.0 * N),
        thm5_upper=(2.0 + L * dist2) / N,
        d_phi=d_phi,
    )


def chi2_mixture_bound_check(p, q, w: float, **kw) -> tuple[float, float]:
    """``(chi2(p, w p + (1 - w) q), chi2(p, q) + 1)``; the first never exceeds the second."""
    if not 0.0 < w < 1.0:
        raise ValueError("w must lie in (0, 1)")
    mix = GaussianMixture(np.array([w, 1.0 - w]), (p, q))
    return chi2_quad(p, mix, **kw), chi2(p, q, **kw) + 1.0


# ---------------------------------------------------------------- report


@dataclass
class TheoryReport:
    d_chi2_fwd: float
    d_chi2_rev: float
    d_hellinger2: float
    d_harmonic: float
    fisher_rao_length: float
    mse_pred_binary: dict
    mse_pred_annealed: float
    alpha_h: float
    optimal_mse: float
    bounds: dict
    M: float
    L: float
    overlap: float
    path: str = "geometric"
    K: int = 1
    N: float = 1.0
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def _safe(fn, *args, **kw) -> float:
    try:
        return fn(*args, **kw)
    except QuadratureUnavailable:
        return math.nan


def theory_report(spec: PathSpec, K: int, N: float, loss_name: str = "NCE", nu: float = 1.0) -> TheoryReport:
    """Every prediction for one ``(p0, f1, path, K, N)`` tuple.

    Fields that would need quadrature in an unsupported dimension are ``nan``.
    ``d_chi2_fwd`` is ``chi2(p1, p0)`` and ``d_chi2_rev`` is ``chi2(p0, p1)``.
    """
    p0, p1 = spec.p0, spec.p1
    alpha = alpha_h(p0, p1)
    bounds = theorem_bounds(p0, spec.f1, N)
    return TheoryReport(
        d_chi2_fwd=chi2(p1, p0),
        d_chi2_rev=chi2(p0, p1),
        d_hellinger2=hellinger2(p0, p1),
        d_harmonic=_safe(harmonic, p1, p0, nu / (1.0 + nu)),
        fisher_rao_length=_safe(fisher_rao_length, spec),
        mse_pred_binary={name: _safe(mse_pred_binary, name, p0, p1, N, nu) for name in LOSSES},
        mse_pred_annealed=_safe(mse_pred_annealed, spec, K, N, loss_name, nu),
        alpha_h=alpha,
        optimal_mse=16.0 * alpha**2 / N,
        bounds={k: v for k, v in asdict(bounds).items() if k.startswith("thm") or k in ("distance", "d_phi")},
        M=bounds.M,
        L=bounds.L,
        overlap=math.exp(bhattacharyya_log(p0, p1)),
        path=spec.kind,
        K=K,
        N=N,
    )
