"""Annealed Bregman estimator: a sum of per-step log-ratio estimates along a path.

Each step ``k`` classifies samples of ``p_{k/K}`` (lower class) against samples
of ``p_{(k+1)/K}`` (upper class) with its own Bregman loss and fresh samples.
The proposal is normalized, so ``log Z_0 = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .bregman import StepError, StepTask, fit_nce, get_generator, step_estimate_closed
from .expfam import GaussianDiag, SimplyUnnormalizedModel, substream
from .paths import PathGrid, PathPoint, PathSpec, Schedule, custom_grid, discretize

LOWER, UPPER = 0, 1


class EstimationError(RuntimeError):
    """A step failed; carries its index and the diagnostics gathered so far."""

    def __init__(self, step: int, cause: Exception, diagnostics: dict):
        self.step = step
        self.cause = cause
        self.diagnostics = diagnostics
        super().__init__(f"estimation failed at step {step}: {cause}")


@dataclass(frozen=True)
class AbeConfig:
    """Estimator configuration.

    ``losses`` is one generator name for every step or a sequence of ``K``
    names.  ``task`` selects the RNG substream family so that several
    estimation tasks sharing a master seed stay independent.
    """

    path: PathSpec
    K: int
    N: int
    nu: float = 1.0
    losses: str | Sequence[str] = "NCE"
    seed: int = 0
    task: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise ValueError("nu must be positive")
        if self.N < 2 * self.K or self.N // self.K < 2:
            raise ValueError("N must give every step at least 2 samples")
        losses = self.losses
        if isinstance(losses, str):
            losses = (losses,) * self.K
        losses = tuple(losses)
        if len(losses) != self.K:
            raise ValueError(f"need 1 or K={self.K} loss names, got {len(losses)}")
        for name in losses:
            get_generator(name)
        object.__setattr__(self, "losses", losses)

    def class_counts(self, k: int) -> tuple[int, int]:
        return class_counts(self.N, self.K, k, self.nu)


def class_counts(N: int, K: int, k: int, nu: float = 1.0) -> tuple[int, int]:
    """``(n_lower, n_upper)`` at step ``k``.

    Every step gets ``N // K`` samples and the first ``N % K`` steps one more;
    the lower class takes the rounding remainder of the ``nu : 1`` split.
    """
    base, extra = divmod(N, K)
    n = base + (1 if k < extra else 0)
    n_upper = int(math.floor(n / (1.0 + nu)))
    return n - n_upper, n_upper


@dataclass
class EstimateResult:
    log_z1_hat: float
    step_betas: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def true_step_log_ratios(grid: PathGrid) -> np.ndarray:
    """Exact ``log Z_{k+1} - log Z_k`` for grids whose points know ``log Z_t``."""
    logs = [p.log_z for p in grid.points]
    if any(v is None for v in logs):
        raise ValueError("some grid points have no exact log normalizer")
    return np.diff(np.asarray(logs, dtype=float))


def estimate_on_grid(
    grid: PathGrid,
    losses: Sequence[str],
    N: int,
    nu: float = 1.0,
    seed: int = 0,
    task: int = 0,
) -> EstimateResult:
    """Run the estimator over an already discretized grid."""
    K = grid.K
    if len(losses) != K:
        raise ValueError("one loss per step required")

    betas = np.empty(K)
    diag = {"n_lower": [], "n_upper": [], "iterations": [], "failed": [False] * K, "losses": list(losses)}
    for k in range(K):
        gen = get_generator(losses[k])
        n_lower, n_upper = class_counts(N, K, k, nu)
        try:
            step = StepTask(grid[k], grid[k + 1], n_lower, n_upper, step=k)
            samples = step.draw(
                substream(seed, task, k, LOWER),
                substream(seed, task, k, UPPER),
                need_lower=gen.uses_lower,
                need_upper=gen.uses_upper,
            )
            if gen.name == "NCE":
                fit = fit_nce(samples)
                betas[k], iters = fit.beta, fit.iterations
            else:
                betas[k], iters = step_estimate_closed(gen.name, samples), 0
        except (StepError, ValueError, FloatingPointError) as exc:
            diag["failed"][k] = True
            raise EstimationError(k, exc, diag) from exc
        diag["n_lower"].append(samples.lower.size)
        diag["n_upper"].append(samples.upper.size)
        diag["iterations"].append(iters)
    # ordered summation keeps the result independent of evaluation order
    return EstimateResult(float(math.fsum(betas)), betas, diag)


def abe_log_z(config: AbeConfig) -> EstimateResult:
    grid = discretize(config.path, config.K)
    return estimate_on_grid(grid, config.losses, config.N, config.nu, config.seed, config.task)


def _bridge_grid(p0: GaussianDiag, f1: SimplyUnnormalizedModel, mid: PathPoint) -> PathGrid:
    start = PathPoint(0.0, p0.log_density, p0, 0.0)
    end = PathPoint(1.0, f1.log_f, f1.normalized(), f1.log_z())
    return custom_grid([start, replace(mid, t=0.5), end])


def _as_point(mid) -> PathPoint:
    if isinstance(mid, PathPoint):
        return mid
    if hasattr(mid, "log_density"):
        return PathPoint(0.5, mid.log_density, mid, 0.0)
    if callable(mid):
        return PathPoint(0.5, mid, None, None)
    raise TypeError("middle density must be a PathPoint, a distribution or a log-density callable")


def bridge_sampling(p0, f1, f_mid, N: int, seed: int = 0, nu: float = 1.0) -> EstimateResult:
    """Two steps through ``f_mid`` with IS then RevIS; only ``p0`` and ``p1`` are sampled."""
    grid = _bridge_grid(p0, f1, _as_point(f_mid))
    return estimate_on_grid(grid, ("IS", "RevIS"), N, nu, seed)


def umbrella_sampling(p0, f1, p_mid, N: int, seed: int = 0, nu: float = 1.0) -> EstimateResult:
    """Two steps through ``p_mid`` with RevIS then IS; every sample comes from ``p_mid``."""
    mid = _as_point(p_mid)
    if mid.dist is None:
        raise ValueError("umbrella sampling needs a samplable middle distribution")
    grid = _bridge_grid(p0, f1, mid)
    return estimate_on_grid(grid, ("RevIS", "IS"), N, nu, seed)


def ais(p0, f1, path: str | PathSpec = "geometric", K: int = 1, N: int = 1000, seed: int = 0) -> EstimateResult:
    """Annealed importance sampling: the IS loss at every step."""
    spec = path if isinstance(path, PathSpec) else PathSpec(path, p0, f1)
    return abe_log_z(AbeConfig(spec, K, N, losses="IS", seed=seed))


def two_step(
    p0: GaussianDiag,
    f1: SimplyUnnormalizedModel,
    K: int,
    N: int,
    seed: int = 0,
    final_schedule: str = "oracle_trig",
    loss: str = "NCE",
    nu: float = 1.0,
    split_budget: bool = False,
) -> EstimateResult:
    """Pre-estimate ``log Z1`` on the geometric path, then rerun on the arithmetic path
    whose schedule uses that estimate.

    Each stage gets budget ``N`` (``N // 2`` each with ``split_budget``); the
    stages use RNG task ids 0 and 1.
    """
    if final_schedule not in ("oracle", "oracle_trig"):
        raise ValueError("final_schedule must be 'oracle' or 'oracle_trig'")
    n_stage = N // 2 if split_budget else N
    first = abe_log_z(AbeConfig(PathSpec.geometric(p0, f1), K, n_stage, nu, loss, seed, task=0))
    schedule = Schedule(final_schedule, first.log_z1_hat)
    second = abe_log_z(AbeConfig(PathSpec.arithmetic(p0, f1, schedule), K, n_stage, nu, loss, seed, task=1))
    second.diagnostics["stage1_log_z1_hat"] = first.log_z1_hat
    second.diagnostics["stage1_step_betas"] = first.step_betas
    return second
