"""Diagonal-covariance Gaussians viewed as an exponential family.

Sufficient statistics are ``t(x) = (x_i, x_i**2)`` per dimension, and natural
parameter vectors are stored interleaved: ``theta[2*i] = mu_i / v_i`` and
``theta[2*i + 1] = -1 / (2 v_i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

LOG_2PI = math.log(2.0 * math.pi)


def _as_points(x: ArrayLike, dim: int) -> tuple[NDArray, bool]:
    """Return ``x`` as an (n, dim) array and whether the input was a single point."""
    arr = np.asarray(x, dtype=float)
    single = False
    if arr.ndim == 0:
        arr, single = arr.reshape(1, 1), True
    elif arr.ndim == 1:
        if arr.size == dim:
            arr, single = arr.reshape(1, dim), True
        elif dim == 1:
            # a flat vector of 1D points
            arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[-1] != dim:
        raise ValueError(f"dimension mismatch: expected points of length {dim}, got shape {arr.shape}")
    return arr, single


def _squeeze(values: NDArray, single: bool):
    return float(values[0]) if single else values


@dataclass(frozen=True)
class NaturalParams:
    theta: NDArray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).ravel()
        if theta.size == 0 or theta.size % 2:
            raise ValueError("natural parameter vector must have even length 2D >= 2")
        if not np.all(np.isfinite(theta)):
            raise ValueError("natural parameters must be finite")
        if np.any(theta[1::2] >= 0):
            raise ValueError("second natural parameter of every dimension must be strictly negative")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def dim(self) -> int:
        return self.theta.size // 2

    @property
    def linear(self) -> NDArray:
        return self.theta[0::2]

    @property
    def quadratic(self) -> NDArray:
        return self.theta[1::2]

    def to_gaussian(self) -> "GaussianDiag":
        var = -0.5 / self.quadratic
        return GaussianDiag(self.linear * var, var)

    def __add__(self, other: "NaturalParams") -> "NaturalParams":
        return NaturalParams(self.theta + other.theta)

    def scaled(self, c: float) -> "NaturalParams":
        return NaturalParams(c * self.theta)


def interpolate(theta_a: NaturalParams, theta_b: NaturalParams, t: float) -> NaturalParams:
    """Point ``(1 - t) theta_a + t theta_b`` on the straight parameter segment."""
    return NaturalParams((1.0 - t) * theta_a.theta + t * theta_b.theta)


@dataclass(frozen=True)
class GaussianDiag:
    """Gaussian with independent coordinates, ``N(mean, diag(var))``."""

    mean: NDArray
    var: NDArray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).ravel()
        var = np.array(self.var, dtype=float).ravel()
        if var.size == 1 and mean.size > 1:
            var = np.full_like(mean, var[0])
        if mean.size == 1 and var.size > 1:
            mean = np.full_like(var, mean[0])
        if mean.size == 0 or mean.size != var.size:
            raise ValueError("mean and var must have equal length D >= 1")
        if not (np.all(np.isfinite(var)) and np.all(var > 0)):
            raise ValueError("variances must be strictly positive and finite")
        if not np.all(np.isfinite(mean)):
            raise ValueError("mean must be finite")
        mean.setflags(write=False)
        var.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    @classmethod
    def isotropic(cls, dim: int, var: float = 1.0, mean: float = 0.0) -> "GaussianDiag":
        return cls(np.full(dim, float(mean)), np.full(dim, float(var)))

    @property
    def dim(self) -> int:
        return self.mean.size

    def natural(self) -> NaturalParams:
        theta = np.empty(2 * self.dim)
        theta[0::2] = self.mean / self.var
        theta[1::2] = -0.5 / self.var
        return NaturalParams(theta)

    def log_density(self, x: ArrayLike):
        pts, single = _as_points(x, self.dim)
        z = (pts - self.mean) ** 2 / self.var
        out = -0.5 * (z.sum(axis=-1) + np.sum(np.log(self.var)) + self.dim * LOG_2PI)
        return _squeeze(out, single)

    def sample(self, n: int, rng: np.random.Generator) -> NDArray:
        if n < 1:
            raise ValueError("n must be >= 1")
        return self.mean + np.sqrt(self.var) * rng.standard_normal((n, self.dim))

    def moments(self) -> tuple[NDArray, NDArray]:
        return self.mean.copy(), self.var.copy()

    def components(self) -> tuple[NDArray, list["GaussianDiag"]]:
        return np.ones(1), [self]


@dataclass(frozen=True)
class SimplyUnnormalizedModel:
    """Density ``exp(<theta, t(x)> + log_scale)``; no log-partition term.

    ``log_scale`` defaults to zero, which is the plain simply unnormalized model.
    A nonzero value multiplies the density by a constant (``log_scale =
    -log_partition(theta)`` makes it normalized).
    """

    theta: NaturalParams
    log_scale: float = 0.0

    @classmethod
    def from_gaussian(cls, g: GaussianDiag, log_scale: float = 0.0) -> "SimplyUnnormalizedModel":
        return cls(g.natural(), log_scale)

    @property
    def dim(self) -> int:
        return self.theta.dim

    def log_f(self, x: ArrayLike):
        return log_density_unnormalized(self, x)

    def log_z(self) -> float:
        return log_partition(self.theta) + self.log_scale

    def normalized(self) -> GaussianDiag:
        return self.theta.to_gaussian()

    def scaled(self, log_c: float) -> "SimplyUnnormalizedModel":
        return SimplyUnnormalizedModel(self.theta, self.log_scale + log_c)


def log_density(g: GaussianDiag, x: ArrayLike):
    return g.log_density(x)


def log_density_unnormalized(m: SimplyUnnormalizedModel, x: ArrayLike):
    pts, single = _as_points(x, m.dim)
    out = pts @ m.theta.linear + (pts**2) @ m.theta.quadratic + m.log_scale
    return _squeeze(np.asarray(out), single)


def log_partition(theta: NaturalParams) -> float:
    """Per-dimension ``-theta1^2 / (4 theta2) - 0.5 log(-2 theta2)`` plus the ``log(2 pi)/2`` base term.

    The base-measure term is folded in so that ``exp(<theta, t(x)> - log Z)``
    integrates to one against Lebesgue measure.
    """
    a, b = theta.linear, theta.quadratic
    per_dim = -(a**2) / (4.0 * b) - 0.5 * np.log(-2.0 * b) + 0.5 * LOG_2PI
    return float(np.sum(per_dim))


def mean_params(theta: NaturalParams) -> NDArray:
    """Gradient of the log-partition: ``(E[x_i], E[x_i^2])`` interleaved."""
    g = theta.to_gaussian()
    out = np.empty(2 * g.dim)
    out[0::2] = g.mean
    out[1::2] = g.var + g.mean**2
    return out


def hessian_log_partition(theta: NaturalParams) -> NDArray:
    """Covariance of the sufficient statistics, block-diagonal with 2x2 blocks.

    Each block is ``[[v, 2 mu v], [2 mu v, 2 v^2 + 4 mu^2 v]]``.
    """
    g = theta.to_gaussian()
    mu, v = g.mean, g.var
    d = g.dim
    h = np.zeros((2 * d, 2 * d))
    idx = np.arange(d)
    h[2 * idx, 2 * idx] = v
    h[2 * idx, 2 * idx + 1] = 2 * mu * v
    h[2 * idx + 1, 2 * idx] = 2 * mu * v
    h[2 * idx + 1, 2 * idx + 1] = 2 * v**2 + 4 * mu**2 * v
    return h


def _block_eigenvalues(theta: NaturalParams) -> NDArray:
    g = theta.to_gaussian()
    mu, v = g.mean, g.var
    a, b, c = v, 2 * mu * v, 2 * v**2 + 4 * mu**2 * v
    mid = 0.5 * (a + c)
    rad = np.sqrt(0.25 * (a - c) ** 2 + b**2)
    return np.concatenate([mid - rad, mid + rad])


def strong_constants(theta_a: NaturalParams, theta_b: NaturalParams, grid: int = 101) -> tuple[float, float]:
    """Min and max Hessian eigenvalue of the log-partition along the segment ``theta_a -> theta_b``."""
    if grid < 2:
        raise ValueError("grid must be >= 2")
    if theta_a.dim != theta_b.dim:
        raise ValueError("parameter dimension mismatch")
    lo, hi = math.inf, -math.inf
    for t in np.linspace(0.0, 1.0, grid):
        raw = (1.0 - t) * theta_a.theta + t * theta_b.theta
        if np.any(raw[1::2] >= 0):
            raise ValueError("parameter segment leaves the valid domain")
        eig = _block_eigenvalues(NaturalParams(raw))
        lo = min(lo, float(eig.min()))
        hi = max(hi, float(eig.max()))
    return lo, hi


def bhattacharyya_log(p: GaussianDiag, q: GaussianDiag) -> float:
    """``log of the integral of sqrt(p q)`` for diagonal Gaussians."""
    if p.dim != q.dim:
        raise ValueError("dimension mismatch")
    s = p.var + q.var
    terms = 0.25 * np.log(p.var) + 0.25 * np.log(q.var) - 0.5 * np.log(0.5 * s)
    terms -= (p.mean - q.mean) ** 2 / (4.0 * s)
    return float(np.sum(terms))


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``key`` under master ``seed``.

    Mixing is numpy's ``SeedSequence`` hash of ``(seed, key)``, so the stream of
    one (task, step, class) never depends on which other streams were used.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key)))


def sample(g: GaussianDiag, n: int, rng: np.random.Generator) -> NDArray:
    return g.sample(n, rng)
