"""Annealing paths from a normalized proposal ``p0`` to an unnormalized target ``f1``.

Every path exposes, at time ``t``, the unnormalized log-density ``log f_t`` that
the estimators see, plus (when available) the normalized distribution ``p_t``
with an exact sampler and the exact ``log Z_t``.  Intermediate distributions
are sampled in closed form: Gaussians on the geometric path and finite
Gaussian mixtures on the arithmetic and optimal paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import expit, log_expit, logsumexp

from .expfam import (
    GaussianDiag,
    NaturalParams,
    SimplyUnnormalizedModel,
    _as_points,
    bhattacharyya_log,
    interpolate,
    log_partition,
)

PATH_KINDS = ("geometric", "arithmetic", "q_mean", "optimal")
SCHEDULE_KINDS = ("vanilla", "oracle", "oracle_trig")


class UnsupportedPathError(ValueError):
    """Raised when a path point has no exact sampler."""


@dataclass(frozen=True)
class GaussianMixture:
    """Finite mixture of diagonal Gaussians sharing one dimension."""

    weights: NDArray
    comps: tuple[GaussianDiag, ...]

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        comps = tuple(self.comps)
        if w.size != len(comps) or not comps:
            raise ValueError("need one weight per component")
        if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"mixture weights must be nonnegative and sum to 1, got {w}")
        if len({c.dim for c in comps}) != 1:
            raise ValueError("components must share a dimension")
        w = np.clip(w, 0.0, None)
        w = w / w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "comps", comps)

    @property
    def dim(self) -> int:
        return self.comps[0].dim

    def components(self):
        return self.weights, list(self.comps)

    def log_density(self, x: ArrayLike):
        pts, single = _as_points(x, self.dim)
        active = [(w, c) for w, c in zip(self.weights, self.comps) if w > 0]
        logs = np.stack([c.log_density(pts) + math.log(w) for w, c in active])
        out = logsumexp(logs, axis=0)
        return float(out[0]) if single else out

    def sample(self, n: int, rng: np.random.Generator) -> NDArray:
        if n < 1:
            raise ValueError("n must be >= 1")
        means = np.stack([c.mean for c in self.comps])
        sds = np.sqrt(np.stack([c.var for c in self.comps]))
        idx = rng.choice(len(self.comps), size=n, p=self.weights)
        return means[idx] + sds[idx] * rng.standard_normal((n, self.dim))

    def moments(self) -> tuple[NDArray, NDArray]:
        w = self.weights[:, None]
        means = np.stack([c.mean for c in self.comps])
        second = np.stack([c.var + c.mean**2 for c in self.comps])
        m = (w * means).sum(axis=0)
        return m, (w * second).sum(axis=0) - m**2


@dataclass(frozen=True)
class Schedule:
    """Mixture-weight schedule ``t -> w_t`` of the arithmetic path.

    ``oracle`` and ``oracle_trig`` are built from a value of ``Z1`` passed
    explicitly (in log form) so that an estimate can be plugged in.
    """

    kind: str = "vanilla"
    log_z1: float = 0.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not math.isfinite(self.log_z1):
            raise ValueError("log_z1 must be finite")

    @classmethod
    def vanilla(cls) -> "Schedule":
        return cls("vanilla")

    @classmethod
    def oracle(cls, z1: float | None = None, *, log_z1: float | None = None) -> "Schedule":
        return cls("oracle", _resolve_log_z1(z1, log_z1))

    @classmethod
    def oracle_trig(cls, z1: float | None = None, *, log_z1: float | None = None) -> "Schedule":
        return cls("oracle_trig", _resolve_log_z1(z1, log_z1))

    def _shift(self) -> float:
        return 0.0 if self.kind == "vanilla" else -self.log_z1

    def logit(self, t: float, log_z_target: float = 0.0) -> float:
        """``log w - log(1 - w)`` with ``log_z_target`` added.

        With ``log_z_target = 0`` this is the logit of the unnormalized weight
        ``w_t``; with the true ``log Z1`` it is the logit of the normalized
        weight of ``p1`` in ``p_t``.
        """
        t = _check_t(t)
        if t == 0.0:
            return -math.inf
        if t == 1.0:
            return math.inf
        if self.kind == "oracle_trig":
            u = 0.5 * math.pi * t
            base = 2.0 * (math.log(math.sin(u)) - math.log(math.cos(u)))
        else:
            base = math.log(t) - math.log1p(-t)
        return base + self._shift() + log_z_target

    def shift(self, log_z1_true: float) -> float:
        """Offset between the base logit and the logit of the normalized weight."""
        return self._shift() + log_z1_true

    def time_of_base_logit(self, base: NDArray) -> NDArray:
        """Inverse of the base logit ``logit(t)`` or ``2 log tan(pi t / 2)``."""
        base = np.asarray(base, dtype=float)
        if self.kind == "oracle_trig":
            return 2.0 / math.pi * np.arctan(np.exp(0.5 * base))
        return expit(base)

    def log_base_rate(self, base: NDArray) -> NDArray:
        """``log d(base)/dt`` written in terms of the base logit."""
        base = np.asarray(base, dtype=float)
        log_2cosh = np.logaddexp(0.5 * base, -0.5 * base)
        if self.kind == "oracle_trig":
            # d/dt 2 log tan(pi t/2) = 2 pi / sin(pi t) = 2 pi cosh(base/2)
            return math.log(math.pi) + log_2cosh
        # d/dt logit(t) = 1 / (t (1 - t)) = (2 cosh(base/2))^2
        return 2.0 * log_2cosh

    def weight(self, t: float) -> float:
        return float(expit(self.logit(t)))

    def normalized_weight(self, t: float, log_z1_true: float) -> float:
        return float(expit(self.logit(t, log_z1_true)))

    def normalized_weight_derivative(self, t: float, log_z1_true: float) -> float:
        """``d/dt`` of the normalized weight, finite at both endpoints."""
        t = _check_t(t)
        log_r = self._shift() + log_z1_true
        if self.kind == "oracle_trig":
            u = 0.5 * math.pi * t
            s, c = math.sin(u) ** 2, math.cos(u) ** 2
            rate = 0.5 * math.pi * math.sin(math.pi * t)
            if rate <= 0.0:
                return 0.0
            denom = np.logaddexp(math.log(c) if c > 0 else -math.inf, log_r + (math.log(s) if s > 0 else -math.inf))
            return float(math.exp(log_r + math.log(rate) - 2.0 * denom))
        denom = np.logaddexp(
            math.log1p(-t) if t < 1 else -math.inf, log_r + (math.log(t) if t > 0 else -math.inf)
        )
        return float(math.exp(log_r - 2.0 * denom))


def _resolve_log_z1(z1: float | None, log_z1: float | None) -> float:
    if log_z1 is not None:
        return float(log_z1)
    if z1 is None:
        raise ValueError("oracle schedules need z1 or log_z1")
    if not z1 > 0:
        raise ValueError("z1 must be positive")
    return math.log(z1)


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return t


@dataclass(frozen=True)
class PathSpec:
    kind: str
    p0: GaussianDiag
    f1: SimplyUnnormalizedModel
    schedule: Schedule = field(default_factory=Schedule)
    q: float = 1.0

    def __post_init__(self):
        if self.kind not in PATH_KINDS:
            raise ValueError(f"unknown path kind {self.kind!r}")
        if self.p0.dim != self.f1.dim:
            raise ValueError("proposal and target dimensions differ")
        if self.kind == "q_mean" and not 0.0 < self.q <= 1.0:
            raise ValueError("q must lie in (0, 1]")

    @classmethod
    def geometric(cls, p0, f1) -> "PathSpec":
        return cls("geometric", p0, f1)

    @classmethod
    def arithmetic(cls, p0, f1, schedule: Schedule | None = None) -> "PathSpec":
        return cls("arithmetic", p0, f1, schedule or Schedule())

    @classmethod
    def optimal(cls, p0, f1) -> "PathSpec":
        return cls("optimal", p0, f1)

    @classmethod
    def q_mean(cls, p0, f1, q: float) -> "PathSpec":
        return cls("q_mean", p0, f1, q=q)

    @property
    def p1(self) -> GaussianDiag:
        return self.f1.normalized()

    @property
    def log_z1(self) -> float:
        return self.f1.log_z()

    def log_f(self, t: float, x: ArrayLike):
        t = _check_t(t)
        if t == 0.0:
            return self.p0.log_density(x)
        if t == 1.0:
            return self.f1.log_f(x)
        if self.kind == "geometric":
            return geometric_log_f(self, t, x)
        if self.kind == "q_mean":
            return qmean_log_f(self, t, x)
        if self.kind == "arithmetic":
            return _arithmetic_log_f(self, t, x)
        dist = optimal_point(self, t)
        return dist.log_density(x) + t * self.log_z1

    def point(self, t: float) -> "PathPoint":
        t = _check_t(t)
        log_f = lambda x, _t=t: self.log_f(_t, x)  # noqa: E731
        if self.kind == "geometric":
            dist, log_z = geometric_gaussian_point(self, t)
        elif self.kind == "arithmetic" or (self.kind == "q_mean" and self.q == 1.0):
            dist, log_z = arithmetic_point(self, t)
        elif self.kind == "optimal":
            dist, log_z = optimal_point(self, t), t * self.log_z1
        else:
            dist, log_z = None, None
            if t == 0.0:
                dist, log_z = self.p0, 0.0
            elif t == 1.0:
                dist, log_z = self.p1, self.log_z1
        return PathPoint(t, log_f, dist, log_z)


@dataclass(frozen=True)
class PathPoint:
    """One distribution along a path: unnormalized log-density, sampler, ``log Z_t``."""

    t: float
    log_f: Callable[[ArrayLike], NDArray]
    dist: Optional[object] = None
    log_z: Optional[float] = None

    def sample(self, n: int, rng: np.random.Generator) -> NDArray:
        if self.dist is None:
            raise UnsupportedPathError(f"no exact sampler for the path point at t={self.t}")
        return self.dist.sample(n, rng)


@dataclass(frozen=True)
class PathGrid:
    ts: NDArray
    points: tuple[PathPoint, ...]

    @property
    def K(self) -> int:
        return len(self.points) - 1

    def __getitem__(self, k: int) -> PathPoint:
        return self.points[k]

    def __len__(self) -> int:
        return len(self.points)


def geometric_log_f(spec: PathSpec, t: float, x: ArrayLike):
    t = _check_t(t)
    return (1.0 - t) * spec.p0.log_density(x) + t * spec.f1.log_f(x)


def geometric_gaussian_point(spec: PathSpec, t: float) -> tuple[GaussianDiag, float]:
    t = _check_t(t)
    theta0 = spec.p0.natural()
    if t == 0.0:
        return spec.p0, 0.0
    theta_t = interpolate(theta0, spec.f1.theta, t)
    log_z = log_partition(theta_t) - (1.0 - t) * log_partition(theta0) + t * spec.f1.log_scale
    return theta_t.to_gaussian(), log_z


def _arith_log_weights(spec: PathSpec, t: float) -> tuple[float, float]:
    ell = spec.schedule.logit(t)
    return float(log_expit(-ell)), float(log_expit(ell))


def _arithmetic_log_f(spec: PathSpec, t: float, x: ArrayLike):
    log_1mw, log_w = _arith_log_weights(spec, t)
    return np.logaddexp(log_1mw + spec.p0.log_density(x), log_w + spec.f1.log_f(x))


def arithmetic_point(spec: PathSpec, t: float) -> tuple[GaussianMixture, float]:
    """Normalized mixture ``(1 - w~) p0 + w~ p1`` and ``log Z_t`` of ``(1 - w) p0 + w f1``."""
    t = _check_t(t)
    log_z1 = spec.log_z1
    w_tilde = spec.schedule.normalized_weight(t, log_z1)
    log_1mw, log_w = _arith_log_weights(spec, t)
    log_z = float(np.logaddexp(log_1mw, log_w + log_z1))
    return GaussianMixture(np.array([1.0 - w_tilde, w_tilde]), (spec.p0, spec.p1)), log_z


def qmean_log_f(spec: PathSpec, t: float, x: ArrayLike):
    if spec.kind != "q_mean":
        raise ValueError("qmean_log_f needs a q_mean path")
    q = spec.q
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    t = _check_t(t)
    if t == 0.0:
        return spec.p0.log_density(x)
    if t == 1.0:
        return spec.f1.log_f(x)
    a = math.log1p(-t) + q * np.asarray(spec.p0.log_density(x))
    b = math.log(t) + q * np.asarray(spec.f1.log_f(x))
    out = np.logaddexp(a, b) / q
    return float(out) if np.ndim(out) == 0 else out


def alpha_h(p0: GaussianDiag, p1: GaussianDiag) -> float:
    """``arctan(sqrt(H2 / (2 - H2)))`` of the squared Hellinger distance ``H2``."""
    h2 = -math.expm1(bhattacharyya_log(p0, p1))
    h2 = min(max(h2, 0.0), 1.0)
    return math.atan(math.sqrt(h2 / (2.0 - h2)))


def optimal_coefficients(alpha: float, t: float) -> tuple[float, float, float, float]:
    """``(a, b, da/dt, db/dt)`` for ``p_t = (a sqrt(p0) + b sqrt(p1))^2``.

    ``a = sin(2 alpha (1 - t)) / sin(2 alpha)`` and ``b = sin(2 alpha t) / sin(2 alpha)``,
    which is the cos/sin difference form rewritten; ``alpha -> 0`` gives
    ``a = 1 - t``, ``b = t``.
    """
    if alpha < 1e-8:
        return 1.0 - t, t, -1.0, 1.0
    s = math.sin(2.0 * alpha)
    a = math.sin(2.0 * alpha * (1.0 - t)) / s
    b = math.sin(2.0 * alpha * t) / s
    da = -2.0 * alpha * math.cos(2.0 * alpha * (1.0 - t)) / s
    db = 2.0 * alpha * math.cos(2.0 * alpha * t) / s
    return a, b, da, db


def geometric_midpoint(p0: GaussianDiag, p1: GaussianDiag) -> GaussianDiag:
    theta = NaturalParams(0.5 * (p0.natural().theta + p1.natural().theta))
    return theta.to_gaussian()


def optimal_point(spec: PathSpec, t: float) -> GaussianMixture:
    """Expansion of ``(a sqrt(p0) + b sqrt(p1))^2`` into three Gaussian components.

    ``sqrt(p0 p1) = BC * p_mid`` where ``p_mid`` is the normalized Gaussian at the
    natural-parameter midpoint and ``BC`` the Bhattacharyya coefficient, so
    ``p_t = a^2 p0 + b^2 p1 + 2 a b BC p_mid``.
    """
    t = _check_t(t)
    p0, p1 = spec.p0, spec.p1
    alpha = alpha_h(p0, p1)
    a, b, _, _ = optimal_coefficients(alpha, t)
    bc = math.exp(bhattacharyya_log(p0, p1))
    weights = np.array([a * a, b * b, 2.0 * a * b * bc])
    return GaussianMixture(weights, (p0, p1, geometric_midpoint(p0, p1)))


def discretize(spec: PathSpec, K: int) -> PathGrid:
    """Uniform grid ``t_k = k / K`` for ``k = 0..K``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    ts = np.arange(K + 1) / K
    return PathGrid(ts, tuple(spec.point(float(t)) for t in ts))


def custom_grid(points: Sequence[PathPoint]) -> PathGrid:
    """Grid from hand-built points, e.g. a bridge density without a sampler."""
    pts = tuple(points)
    if len(pts) < 2:
        raise ValueError("a grid needs at least two points")
    return PathGrid(np.array([p.t for p in pts]), pts)
