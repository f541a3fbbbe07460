"""Bregman classification losses for estimating one log-ratio ``beta = log(Z_upper / Z_lower)``.

A generator ``phi`` defines the loss

    L(beta) = E_lower[phi'(r) r - phi(r)] - E_upper[phi'(r)],
    r(x; beta) = exp(-beta) f_upper(x) / f_lower(x).

Everything is computed from the per-sample log-ratios ``log f_upper - log f_lower``;
raw density ratios are never formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import brentq
from scipy.special import expit, logsumexp

LOG2 = math.log(2.0)


class StepError(RuntimeError):
    """A single log-ratio estimate could not be computed."""

    def __init__(self, message: str, step: int | None = None, **details):
        self.step = step
        self.details = details
        prefix = f"step {step}: " if step is not None else ""
        super().__init__(prefix + message)


class OptimizationFailure(StepError):
    pass


@dataclass(frozen=True)
class BregmanGenerator:
    """Convex ``phi`` plus the two loss integrands written in ``log r``.

    ``lower_term(l)`` is ``phi'(r) r - phi(r)`` and ``upper_term(l)`` is
    ``phi'(r)``, both at ``r = exp(l)``.
    """

    name: str
    phi: Callable[[NDArray], NDArray]
    phi_prime: Callable[[NDArray], NDArray]
    lower_term: Callable[[NDArray], NDArray]
    upper_term: Callable[[NDArray], NDArray]
    uses_lower: bool = True
    uses_upper: bool = True


def _xlogx(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


GENERATORS: dict[str, BregmanGenerator] = {
    "IS": BregmanGenerator(
        "IS",
        phi=_xlogx,
        phi_prime=lambda x: np.log(x) + 1.0,
        lower_term=np.exp,
        upper_term=lambda l: l + 1.0,
        uses_upper=False,
    ),
    "RevIS": BregmanGenerator(
        "RevIS",
        phi=lambda x: -np.log(x),
        phi_prime=lambda x: -1.0 / np.asarray(x),
        lower_term=lambda l: l - 1.0,
        upper_term=lambda l: -np.exp(-l),
        uses_lower=False,
    ),
    "NCE": BregmanGenerator(
        "NCE",
        phi=lambda x: _xlogx(x) - (1.0 + np.asarray(x)) * np.log((1.0 + np.asarray(x)) / 2.0),
        phi_prime=lambda x: np.log(2.0 * np.asarray(x) / (1.0 + np.asarray(x))),
        lower_term=lambda l: np.logaddexp(0.0, l) - LOG2,
        upper_term=lambda l: LOG2 + l - np.logaddexp(0.0, l),
    ),
    "IS_RevIS": BregmanGenerator(
        "IS_RevIS",
        phi=lambda x: (1.0 - np.sqrt(x)) ** 2,
        phi_prime=lambda x: 1.0 - 1.0 / np.sqrt(x),
        lower_term=lambda l: np.exp(0.5 * l) - 1.0,
        upper_term=lambda l: 1.0 - np.exp(-0.5 * l),
    ),
}

LOSS_NAMES = tuple(GENERATORS)


def get_generator(name: str | BregmanGenerator) -> BregmanGenerator:
    if isinstance(name, BregmanGenerator):
        return name
    try:
        return GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; expected one of {LOSS_NAMES}") from None


@dataclass
class StepSamples:
    """Log-ratios ``log f_upper(x) - log f_lower(x)`` at the drawn samples.

    ``lower`` holds values at samples from the lower distribution and ``upper``
    at samples from the upper one; a class the loss does not use may be empty.
    """

    lower: NDArray = field(default_factory=lambda: np.empty(0))
    upper: NDArray = field(default_factory=lambda: np.empty(0))
    step: int | None = None

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()

    def shifted(self, c: float) -> "StepSamples":
        """Samples for ``f_upper`` multiplied by ``exp(c)``."""
        return StepSamples(self.lower + c, self.upper + c, self.step)


@dataclass(frozen=True)
class StepTask:
    """One classification task between two neighbouring path points.

    ``lower`` and ``upper`` are path points (``log_f`` plus ``sample``);
    ``nu = n_lower / n_upper``.
    """

    lower: object
    upper: object
    n_lower: int
    n_upper: int
    step: int = 0

    def __post_init__(self):
        if self.n_lower < 2 or self.n_upper < 2:
            raise ValueError("each class needs at least 2 samples")

    @property
    def nu(self) -> float:
        return self.n_lower / self.n_upper

    def draw(self, rng_lower, rng_upper, need_lower: bool = True, need_upper: bool = True) -> StepSamples:
        lower = upper = np.empty(0)
        if need_lower:
            x = self.lower.sample(self.n_lower, rng_lower)
            lower = np.asarray(self.upper.log_f(x)) - np.asarray(self.lower.log_f(x))
        if need_upper:
            x = self.upper.sample(self.n_upper, rng_upper)
            upper = np.asarray(self.upper.log_f(x)) - np.asarray(self.lower.log_f(x))
        return StepSamples(lower, upper, self.step)


def _check_finite(values: NDArray, what: str, step: int | None) -> None:
    if values.size and not np.all(np.isfinite(values)):
        bad = int(np.sum(~np.isfinite(values)))
        raise StepError(f"{bad} non-finite {what}", step=step)


def loss_eval(phi: str | BregmanGenerator, beta: float, samples: StepSamples) -> float:
    """Monte Carlo estimate of the classification loss at ``beta``."""
    gen = get_generator(phi)
    _check_finite(samples.lower, "log density ratios", samples.step)
    _check_finite(samples.upper, "log density ratios", samples.step)
    total = 0.0
    with np.errstate(over="ignore"):
        if samples.lower.size:
            lo = gen.lower_term(samples.lower - beta)
            _check_finite(lo, "density ratios (overflow)", samples.step)
            total += float(np.mean(lo))
        if samples.upper.size:
            up = gen.upper_term(samples.upper - beta)
            _check_finite(up, "density ratios (overflow)", samples.step)
            total -= float(np.mean(up))
    return total


def _log_mean_exp(values: NDArray) -> float:
    return float(logsumexp(values) - math.log(values.size))


def step_estimate_closed(phi_name: str, samples: StepSamples) -> float:
    """Closed-form minimizers for IS, RevIS and IS_RevIS."""
    step = samples.step
    if phi_name in ("IS", "IS_RevIS") and samples.lower.size < 2:
        raise StepError(f"{phi_name} needs at least 2 lower-class samples", step=step)
    if phi_name in ("RevIS", "IS_RevIS") and samples.upper.size < 2:
        raise StepError(f"{phi_name} needs at least 2 upper-class samples", step=step)
    _check_finite(samples.lower, "log density ratios", step)
    _check_finite(samples.upper, "log density ratios", step)
    if phi_name == "IS":
        return _log_mean_exp(samples.lower)
    if phi_name == "RevIS":
        return -_log_mean_exp(-samples.upper)
    if phi_name == "IS_RevIS":
        # minimizer of the (1 - sqrt x)^2 loss: a geometric bridge between the two classes
        return _log_mean_exp(0.5 * samples.lower) - _log_mean_exp(-0.5 * samples.upper)
    raise ValueError(f"no closed form for loss {phi_name!r}")


def _nce_slope(beta: float, lower: NDArray, upper: NDArray) -> float:
    # derivative of the NCE loss in beta; increasing, from -1 to +1
    return float(np.mean(expit(beta - upper)) - np.mean(expit(lower - beta)))


@dataclass
class NceFit:
    beta: float
    iterations: int
    bracket: tuple[float, float]


def fit_nce(samples: StepSamples, bracket_hint: tuple[float, float] | None = None, xtol: float = 1e-10) -> NceFit:
    """Minimize the NCE loss in ``beta`` by a bracketed root search on its slope.

    The NCE loss is convex in ``beta`` (a sum of softplus terms of ``+-beta``), so
    its minimizer is the unique sign change of the slope.  The default bracket
    spans the IS and RevIS estimates widened by 2 on each side and is doubled
    at most three times.
    """
    lower, upper, step = samples.lower, samples.upper, samples.step
    if lower.size < 2 or upper.size < 2:
        raise StepError("NCE needs at least 2 samples in each class", step=step)
    _check_finite(lower, "log density ratios", step)
    _check_finite(upper, "log density ratios", step)
    if bracket_hint is None:
        b_is = _log_mean_exp(lower)
        b_rev = -_log_mean_exp(-upper)
        lo, hi = min(b_is, b_rev) - 2.0, max(b_is, b_rev) + 2.0
    else:
        lo, hi = map(float, bracket_hint)
    for _ in range(4):
        f_lo, f_hi = _nce_slope(lo, lower, upper), _nce_slope(hi, lower, upper)
        if f_lo <= 0.0 <= f_hi:
            break
        width = hi - lo
        lo, hi = lo - width, hi + width
    else:
        raise OptimizationFailure("no sign change of the NCE slope in the expanded bracket", step=step, bracket=(lo, hi))
    if f_lo == 0.0:
        return NceFit(lo, 0, (lo, hi))
    if f_hi == 0.0:
        return NceFit(hi, 0, (lo, hi))
    beta, info = brentq(_nce_slope, lo, hi, args=(lower, upper), xtol=xtol, full_output=True)
    if not info.converged:
        raise OptimizationFailure("NCE root search did not converge", step=step, bracket=(lo, hi))
    return NceFit(float(beta), int(info.iterations), (lo, hi))


def step_estimate_nce(samples: StepSamples, bracket_hint: tuple[float, float] | None = None) -> float:
    return fit_nce(samples, bracket_hint).beta


def step_estimate(phi: str | BregmanGenerator, samples: StepSamples) -> float:
    gen = get_generator(phi)
    if gen.name == "NCE":
        return step_estimate_nce(samples)
    return step_estimate_closed(gen.name, samples)
