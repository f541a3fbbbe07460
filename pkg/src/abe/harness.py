"""Monte Carlo experiments over isotropic Gaussian pairs, written as long-format CSV.

The proposal is always ``N(0, I)``.  For the distance sweep the target is
``N(0, v I)`` with ``v = 1 / (1 + 2 d / sqrt(D))``, which puts the natural
parameters at Euclidean distance exactly ``d`` from the proposal's.

Every (grid point, seed index) pair gets its own cell seed, shared by all
estimators and losses so their errors are paired.  Cells are pure, so the
CSV is byte-identical for any number of worker processes.
"""

from __future__ import annotations

import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .bregman import LOSS_NAMES
from .estimator import AbeConfig, EstimationError, abe_log_z, two_step
from .expfam import GaussianDiag, SimplyUnnormalizedModel
from .paths import PathSpec, Schedule, alpha_h
from .theory import (
    QuadratureUnavailable,
    fisher_rao_length,
    mse_pred_annealed,
    mse_pred_binary,
    theorem_bounds,
    theory_report,
)

EXPERIMENTS = ("compare_losses", "sweep_distance", "sweep_dimension", "estimate_once", "theory_report")
ESTIMATORS = ("none", "geometric", "arithmetic", "two_step", "two_step_trig")

CELL_COLUMNS = [
    "row_type",
    "experiment",
    "sweep_value",
    "estimator",
    "loss",
    "path",
    "K",
    "N",
    "dim",
    "seed",
    "log_z_hat",
    "true_log_z",
    "squared_error",
    "status",
]
SUMMARY_COLUMNS = [
    "mse",
    "mse_se",
    "n_ok",
    "n_fail",
    "pred_mse_K",
    "pred_mse_limit",
    "optimal_mse",
    "thm2_lower",
    "thm3_upper",
    "thm4_structural",
    "thm5_upper",
]
COLUMNS = CELL_COLUMNS + SUMMARY_COLUMNS

TOKENS_DOC = (
    "tokens: 'inf' = infinite divergence or prediction; 'nan' = not computable in this dimension; "
    "'fail:<reason>' = the estimate failed (row kept, excluded from mse)"
)


# ---------------------------------------------------------------- configuration


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class SweepConfig:
    """Experiment settings; the config file has one ``key = value`` per field."""

    experiment: str = "sweep_distance"
    dim: int = 10
    N: int = 10_000
    K: int = 9
    seeds: int = 50
    seed: int = 0
    nu: float = 1.0
    distances: tuple[float, ...] = (1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    dims: tuple[int, ...] = (5, 10, 20, 50)
    target_var: float = 0.25
    compare_var: float = 2.0
    estimators: tuple[str, ...] = ESTIMATORS
    losses: tuple[str, ...] = ("NCE",)
    split_two_step_budget: bool = False
    out: str = ""
    jobs: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}")
        for name in self.estimators:
            if name not in ESTIMATORS:
                raise ValueError(f"unknown estimator {name!r}")
        for name in self.losses:
            if name not in LOSS_NAMES:
                raise ValueError(f"unknown loss {name!r}")
        if self.dim < 1 or self.K < 1 or self.N < 2 * self.K or self.jobs < 1:
            raise ValueError("need dim >= 1, K >= 1, N >= 2K, jobs >= 1")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if self.experiment in ("compare_losses", "sweep_distance", "sweep_dimension") and self.seeds < 2:
            raise ValueError("MSE aggregation needs seeds >= 2")
        if not self.estimators or not self.losses:
            raise ValueError("estimator and loss lists must be non-empty")
        grid = self.dims if self.experiment == "sweep_dimension" else self.distances
        if not grid:
            raise ValueError("sweep grid must be non-empty")
        if self.experiment == "sweep_dimension" and list(self.dims) != sorted(self.dims):
            raise ValueError("dimension grid must be ascending")
        if not (self.target_var > 0 and self.compare_var > 0 and self.nu > 0):
            raise ValueError("variances and nu must be positive")

    def to_text(self, exclude: Sequence[str] = ()) -> str:
        lines = []
        for f in fields(self):
            if f.name in exclude:
                continue
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines)


_PARSERS = {
    "experiment": str.strip,
    "dim": int,
    "N": int,
    "K": int,
    "seeds": int,
    "seed": int,
    "nu": float,
    "distances": _floats,
    "dims": _ints,
    "target_var": float,
    "compare_var": float,
    "estimators": _names,
    "losses": _names,
    "split_two_step_budget": _bool,
    "out": str.strip,
    "jobs": int,
}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Unknown keys are errors."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    return values


def load_config(path: str | None, experiment: str, **overrides) -> SweepConfig:
    values = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            values = parse_config_text(fh.read())
    if values.get("experiment", experiment) != experiment:
        raise ValueError(f"config is for {values['experiment']!r}, not {experiment!r}")
    values["experiment"] = experiment
    if experiment == "compare_losses" and "losses" not in values:
        values["losses"] = ("NCE", "IS", "RevIS")
    values.update({k: v for k, v in overrides.items() if v is not None})
    return SweepConfig(**values)


def paper_scale(config: SweepConfig) -> SweepConfig:
    """Sample size, seeds and dimension of the full-scale protocol."""
    return replace(config, N=50_000, seeds=100, dim=50)


# ---------------------------------------------------------------- problems and cells


def distance_variance(distance: float, dim: int) -> float:
    """Target variance whose natural parameters sit at ``distance`` from those of ``N(0, I)``."""
    return 1.0 / (1.0 + 2.0 * distance / math.sqrt(dim))


@dataclass(frozen=True)
class Problem:
    sweep_value: float
    dim: int
    var: float
    normalized_target: bool = False

    def endpoints(self) -> tuple[GaussianDiag, SimplyUnnormalizedModel]:
        p0 = GaussianDiag.isotropic(self.dim)
        f1 = SimplyUnnormalizedModel.from_gaussian(GaussianDiag.isotropic(self.dim, self.var))
        if self.normalized_target:
            f1 = f1.scaled(-f1.log_z())
        return p0, f1

    def true_log_z(self) -> float:
        return 0.0 if self.normalized_target else self.endpoints()[1].log_z()


def problems(config: SweepConfig) -> list[Problem]:
    exp = config.experiment
    if exp == "compare_losses":
        return [Problem(float(config.dim), config.dim, config.compare_var, normalized_target=True)]
    if exp == "sweep_dimension":
        return [Problem(float(d), d, config.target_var) for d in config.dims]
    if exp == "estimate_once":
        return [Problem(config.target_var, config.dim, config.target_var)]
    return [Problem(d, config.dim, distance_variance(d, config.dim)) for d in config.distances]


def estimator_k(config: SweepConfig, estimator: str) -> int:
    if estimator == "none":
        return 1
    if config.experiment == "compare_losses":
        return 2
    return config.K


def estimator_path(estimator: str) -> str:
    return {
        "none": "geometric",
        "geometric": "geometric",
        "arithmetic": "arithmetic",
        "two_step": "arithmetic_oracle",
        "two_step_trig": "arithmetic_oracle_trig",
    }[estimator]


def cell_seed(master: int, grid_index: int, seed_index: int) -> int:
    """Seed of one (grid point, replicate) cell, shared across estimators and losses."""
    return int(np.random.SeedSequence([master, grid_index, seed_index]).generate_state(1, np.uint32)[0])


@dataclass(frozen=True)
class Cell:
    problem: Problem
    estimator: str
    loss: str
    K: int
    N: int
    nu: float
    seed: int
    split_budget: bool = False


def run_cell(cell: Cell) -> tuple[float | None, str]:
    """One estimate: ``(log_z_hat, "ok")`` or ``(None, "fail:<reason>")``."""
    p0, f1 = cell.problem.endpoints()
    try:
        if cell.estimator in ("two_step", "two_step_trig"):
            sched = "oracle" if cell.estimator == "two_step" else "oracle_trig"
            res = two_step(p0, f1, cell.K, cell.N, cell.seed, sched, cell.loss, cell.nu, cell.split_budget)
        else:
            spec = PathSpec.arithmetic(p0, f1) if cell.estimator == "arithmetic" else PathSpec.geometric(p0, f1)
            res = abe_log_z(AbeConfig(spec, cell.K, cell.N, cell.nu, cell.loss, cell.seed))
    except EstimationError as exc:
        return None, f"fail:step{exc.step}-{type(exc.cause).__name__}"
    except (ValueError, FloatingPointError) as exc:
        return None, f"fail:{type(exc).__name__}"
    if not math.isfinite(res.log_z1_hat):
        return None, "fail:nonfinite"
    return res.log_z1_hat, "ok"


def _theory_columns(config: SweepConfig, problem: Problem, estimator: str, loss: str) -> dict:
    """Predictions next to each summary row (quadrature-free where closed forms exist)."""
    p0, f1 = problem.endpoints()
    K, N, nu = estimator_k(config, estimator), float(config.N), config.nu
    if estimator in ("two_step", "two_step_trig"):
        sched = Schedule("oracle" if estimator == "two_step" else "oracle_trig", f1.log_z())
        spec = PathSpec.arithmetic(p0, f1, sched)
    elif estimator == "arithmetic":
        spec = PathSpec.arithmetic(p0, f1)
    else:
        spec = PathSpec.geometric(p0, f1)
    out = {}
    try:
        if estimator == "none":
            out["pred_mse_K"] = mse_pred_binary(loss, p0, f1.normalized(), N, nu)
        else:
            out["pred_mse_K"] = mse_pred_annealed(spec, K, N, loss, nu)
    except QuadratureUnavailable:
        out["pred_mse_K"] = math.nan
    if estimator == "none":
        out["pred_mse_limit"] = out["pred_mse_K"]
    else:
        try:
            out["pred_mse_limit"] = fisher_rao_length(spec) / N
        except (QuadratureUnavailable, FloatingPointError):
            out["pred_mse_limit"] = math.nan
    b = theorem_bounds(p0, f1, N)
    out["optimal_mse"] = 16.0 * alpha_h(p0, f1.normalized()) ** 2 / N
    out.update(thm2_lower=b.thm2_lower, thm3_upper=b.thm3_upper, thm4_structural=b.thm4_structural, thm5_upper=b.thm5_upper)
    return out


# ---------------------------------------------------------------- formatting


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(value)


def header_comment(config: SweepConfig) -> str:
    # the worker count is left out so output does not depend on it
    lines = [f"abe {__version__}", TOKENS_DOC, "config:"] + config.to_text(exclude=("jobs",)).splitlines()
    return "".join(f"# {line}\n" for line in lines)


def write_csv(rows: Iterable[dict], config: SweepConfig, columns: Sequence[str] = COLUMNS) -> str:
    buf = io.StringIO()
    buf.write(header_comment(config))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def read_csv(path_or_text: str) -> list[dict]:
    """Rows of a file written by this module (comment lines skipped)."""
    if "\n" in path_or_text:
        text = path_or_text
    else:
        with open(path_or_text, encoding="utf-8") as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return list(csv.DictReader(lines))


# ---------------------------------------------------------------- runners


def _map(fn, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _grid_rows(config: SweepConfig) -> list[dict]:
    plist = problems(config)
    combos = [(e, l) for e in config.estimators for l in config.losses]
    cells, keys = [], []
    for gi, prob in enumerate(plist):
        for est, loss in combos:
            for si in range(config.seeds):
                cells.append(
                    Cell(prob, est, loss, estimator_k(config, est), config.N, config.nu, cell_seed(config.seed, gi, si), config.split_two_step_budget)
                )
                keys.append((gi, est, loss, si))
    results = _map(run_cell, cells, config.jobs)

    rows = []
    by_group: dict[tuple, list] = {}
    for cell, key, (value, status) in zip(cells, keys, results):
        prob = cell.problem
        truth = prob.true_log_z()
        row = {
            "row_type": "cell",
            "experiment": config.experiment,
            "sweep_value": prob.sweep_value,
            "estimator": cell.estimator,
            "loss": cell.loss,
            "path": estimator_path(cell.estimator),
            "K": cell.K,
            "N": cell.N,
            "dim": prob.dim,
            "seed": cell.seed,
            "log_z_hat": value if value is not None else status,
            "true_log_z": truth,
            "squared_error": (value - truth) ** 2 if value is not None else None,
            "status": status,
        }
        rows.append(row)
        by_group.setdefault(key[:3], []).append(row)

    if config.seeds >= 2:
        for gi, prob in enumerate(plist):
            for est, loss in combos:
                group = by_group[(gi, est, loss)]
                errs = np.array([r["squared_error"] for r in group if r["status"] == "ok"], dtype=float)
                n_ok = errs.size
                summary = {
                    "row_type": "summary",
                    "experiment": config.experiment,
                    "sweep_value": prob.sweep_value,
                    "estimator": est,
                    "loss": loss,
                    "path": estimator_path(est),
                    "K": estimator_k(config, est),
                    "N": config.N,
                    "dim": prob.dim,
                    "true_log_z": prob.true_log_z(),
                    "status": "ok" if n_ok == len(group) else f"partial:{len(group) - n_ok}-failed",
                    "mse": float(np.mean(errs)) if n_ok else math.nan,
                    "mse_se": float(np.std(errs, ddof=1) / math.sqrt(n_ok)) if n_ok >= 2 else math.nan,
                    "n_ok": n_ok,
                    "n_fail": len(group) - n_ok,
                }
                summary.update(_theory_columns(config, prob, est, loss))
                rows.append(summary)
    return rows


def run_compare_losses(config: SweepConfig) -> str:
    """K=2 geometric path to a normalized target, one row per seed and loss plus summaries."""
    config = replace(config, experiment="compare_losses", estimators=("geometric",))
    return write_csv(_grid_rows(config), config)


def run_sweep_distance(config: SweepConfig) -> str:
    config = replace(config, experiment="sweep_distance")
    return write_csv(_grid_rows(config), config)


def run_sweep_dimension(config: SweepConfig) -> str:
    config = replace(config, experiment="sweep_dimension")
    return write_csv(_grid_rows(config), config)


def run_estimate_once(config: SweepConfig) -> str:
    config = replace(config, experiment="estimate_once")
    return write_csv(_grid_rows(config), config)


THEORY_PATHS = ("geometric", "arithmetic", "arithmetic_oracle", "arithmetic_oracle_trig", "optimal")


def _theory_spec(kind: str, p0: GaussianDiag, f1: SimplyUnnormalizedModel) -> PathSpec:
    if kind == "geometric":
        return PathSpec.geometric(p0, f1)
    if kind == "optimal":
        return PathSpec.optimal(p0, f1)
    if kind == "arithmetic":
        return PathSpec.arithmetic(p0, f1)
    sched = "oracle_trig" if kind.endswith("trig") else "oracle"
    return PathSpec.arithmetic(p0, f1, Schedule(sched, f1.log_z()))


def theory_rows(config: SweepConfig) -> tuple[list[dict], list[str]]:
    rows = []
    for prob in problems(replace(config, experiment="sweep_distance") if config.experiment == "theory_report" else config):
        p0, f1 = prob.endpoints()
        for kind in THEORY_PATHS:
            rep = theory_report(_theory_spec(kind, p0, f1), config.K, float(config.N), config.losses[0], config.nu)
            flat = {"sweep_value": prob.sweep_value, "dim": prob.dim, "target_var": prob.var, "true_log_z": prob.true_log_z()}
            for key, value in rep.as_dict().items():
                if isinstance(value, dict):
                    flat.update({f"{key}_{k}": v for k, v in value.items()})
                elif key != "extra":
                    flat[key] = value
            flat["path"] = kind
            rows.append(flat)
    columns = list(rows[0]) if rows else ["sweep_value"]
    return rows, columns


def run_theory_report(config: SweepConfig) -> str:
    """One theory report per (distance grid point, path)."""
    config = replace(config, experiment="theory_report")
    rows, columns = theory_rows(config)
    return write_csv(rows, config, columns)


RUNNERS = {
    "compare_losses": run_compare_losses,
    "sweep_distance": run_sweep_distance,
    "sweep_dimension": run_sweep_dimension,
    "estimate_once": run_estimate_once,
    "theory_report": run_theory_report,
}


def run(config: SweepConfig) -> str:
    return RUNNERS[config.experiment](config)


def nce_ordering_holds(csv_text: str) -> bool:
    """Whether the NCE summary MSE is no larger than every other loss's."""
    summaries = {r["loss"]: float(r["mse"]) for r in read_csv(csv_text) if r["row_type"] == "summary"}
    if "NCE" not in summaries:
        return False
    return all(summaries["NCE"] <= v for k, v in summaries.items() if k != "NCE")


def write_output(text: str, out: str | None) -> None:
    if not out or out == "-":
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
