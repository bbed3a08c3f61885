"""Derivative-free optimizers over a renderer and target feature statistics.

The primary algorithm is a greedy per-coordinate grid search: every
(attribute, component) mean is in turn set to the grid value minimizing
the Frechet distance between rendered-sample statistics and the target,
holding all other means fixed; a full pass over the coordinates is one
epoch. Baselines: uniform random attributes (no learning), random search
over continuous parameter vectors, and a score-function (REINFORCE-style)
policy search.

With common random numbers enabled (default), every candidate inside one
coordinate sweep is evaluated under the same sampling seed, so the argmin
ranks parameter changes rather than sampling noise, and the incumbent
value (always itself a grid member) can never be displaced by a worse
candidate under that seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .attributes import (
    AttributeSchema,
    DistributionParams,
    coordinate_list,
    default_params,
    replace_mean,
    sample_batch,
    uniform_batch,
    validate_params,
)
from .errors import DimensionMismatchError, FormatError, OptimizerError
from .rng import derive_seed, make_generator
from .stats import FeatureStats, accumulate_stats, frechet_distance

__all__ = [
    "EvalConfig",
    "TraceRecord",
    "OptimizationTrace",
    "OptimResult",
    "ReinforceHyper",
    "RANDOM_ATTRIBUTES",
    "random_attributes",
    "evaluate",
    "attribute_descent",
    "random_search",
    "reinforce_search",
    "uniform_baseline",
    "sweep_seed",
    "descent_budget",
    "write_trace",
    "read_trace",
    "write_result",
]

# namespace tags keeping the seed streams of different consumers apart
_TAG_DESCENT = 101
_TAG_RANDOM_SEARCH = 102
_TAG_REINFORCE = 103
_TAG_UNIFORM = 104

TRACE_COLUMNS = ("eval", "epoch", "coordinate", "candidate", "fid", "best_fid", "millis")


@dataclass(frozen=True)
class EvalConfig:
    """How a single objective evaluation is performed."""

    samples_per_eval: int = 500
    base_seed: int = 0
    common_random_numbers: bool = True
    epochs: int = 2

    def __post_init__(self):
        if self.samples_per_eval < 2:
            raise OptimizerError("samples_per_eval must be >= 2")
        if self.epochs < 1:
            raise OptimizerError("epochs must be >= 1")


@dataclass(frozen=True)
class TraceRecord:
    eval_index: int
    epoch: int
    coordinate: int  # -1 for methods without a coordinate structure
    candidate: float  # nan for methods without grid candidates
    fid: float
    best_fid: float
    millis: float


@dataclass
class OptimizationTrace:
    """Ordered record of every objective evaluation in a run."""

    records: list[TraceRecord] = field(default_factory=list)

    @property
    def total_evaluations(self) -> int:
        return len(self.records)

    def best_fid(self) -> float:
        return self.records[-1].best_fid if self.records else math.inf

    def add(self, epoch: int, coordinate: int, candidate: float, fid: float, millis: float):
        best = min(self.best_fid(), fid)
        self.records.append(
            TraceRecord(len(self.records), epoch, coordinate, candidate, fid, best, millis)
        )


@dataclass
class OptimResult:
    """Best parameters seen, their objective value, and the full trace."""

    best_params: DistributionParams | None
    best_fid: float
    trace: OptimizationTrace
    final_params: DistributionParams | None = None


class _UniformSampling:
    """Marker directive: evaluate with uniform sampling over the domains."""

    def __repr__(self):
        return "RANDOM_ATTRIBUTES"


RANDOM_ATTRIBUTES = _UniformSampling()


def random_attributes(schema: AttributeSchema) -> _UniformSampling:
    """Directive for the no-learning baseline; pass it to evaluate() as params."""
    return RANDOM_ATTRIBUTES


def evaluate(
    schema: AttributeSchema,
    params,
    renderer,
    target: FeatureStats,
    cfg: EvalConfig,
    eval_seed: int,
) -> float:
    """Objective: distance between rendered-sample statistics and the target.

    ``params`` is a DistributionParams, or RANDOM_ATTRIBUTES to sample
    uniformly over the attribute domains instead.
    """
    if renderer.feature_dim != target.dim:
        raise DimensionMismatchError(renderer.feature_dim, target.dim)
    if isinstance(params, _UniformSampling):
        batch = uniform_batch(schema, cfg.samples_per_eval, eval_seed)
    else:
        batch = sample_batch(schema, params, cfg.samples_per_eval, eval_seed)
    stats = accumulate_stats(renderer.render(batch))
    return frechet_distance(stats, target)


class _Run:
    """Shared bookkeeping: trace, timing, and best-ever tracking."""

    def __init__(self, schema, renderer, target, cfg):
        self.schema = schema
        self.renderer = renderer
        self.target = target
        self.cfg = cfg
        self.trace = OptimizationTrace()
        self.best_fid = math.inf
        self.best_params: DistributionParams | None = None

    def measure(self, params, eval_seed: int, *, epoch: int, coordinate: int, candidate: float):
        t0 = time.perf_counter()
        try:
            fid = evaluate(self.schema, params, self.renderer, self.target, self.cfg, eval_seed)
        except Exception as exc:
            # let callers salvage the evaluations made before the failure
            exc.partial_trace = self.trace
            raise
        millis = (time.perf_counter() - t0) * 1000.0
        self.trace.add(epoch, coordinate, candidate, fid, millis)
        if fid < self.best_fid:
            self.best_fid = fid
            self.best_params = params if not isinstance(params, _UniformSampling) else None
        return fid

    def result(self, final_params=None) -> OptimResult:
        return OptimResult(self.best_params, self.best_fid, self.trace, final_params)


def sweep_seed(cfg: EvalConfig, epoch: int, coordinate: int) -> int:
    """The sampling seed shared by all candidates of one coordinate sweep."""
    return derive_seed(cfg.base_seed, _TAG_DESCENT, epoch, coordinate)


def descent_budget(schema: AttributeSchema, cfg: EvalConfig) -> int:
    """Exact number of evaluations a descent run performs: epochs * sum |grid_i|."""
    per_epoch = sum(len(schema.attributes[ai].grid) for ai, _ in coordinate_list(schema))
    return cfg.epochs * per_epoch


@dataclass(frozen=True)
class SweepInfo:
    epoch: int
    coordinate: int
    seed: int
    params_before: DistributionParams
    params_after: DistributionParams


def attribute_descent(
    schema: AttributeSchema,
    init: DistributionParams,
    renderer,
    target: FeatureStats,
    cfg: EvalConfig,
    on_sweep: Callable[[SweepInfo], None] | None = None,
) -> OptimResult:
    """Greedy per-coordinate grid search, one coordinate at a time.

    Updates are applied in place, so later coordinates in an epoch see the
    already-updated values of earlier ones. Ties resolve to the smallest
    grid index. ``init`` must sit on the grid of every coordinate.
    """
    validate_params(schema, init)
    coords = coordinate_list(schema)
    grids = [schema.attributes[ai].grid for ai, _ in coords]
    for i, grid in enumerate(grids):
        if init.means[i] not in grid:
            raise OptimizerError(
                f"initial mean {init.means[i]} for {schema.coordinate_label(i)} is off-grid"
            )
    run = _Run(schema, renderer, target, cfg)
    current = init
    for epoch in range(1, cfg.epochs + 1):
        for ci in range(len(coords)):
            seed = sweep_seed(cfg, epoch, ci)
            before = current
            best_value = None
            best_fid = math.inf
            for gi, z in enumerate(grids[ci]):
                candidate = replace_mean(current, ci, z)
                eval_seed = (
                    seed
                    if cfg.common_random_numbers
                    else derive_seed(cfg.base_seed, _TAG_DESCENT, epoch, ci, gi)
                )
                fid = run.measure(candidate, eval_seed, epoch=epoch, coordinate=ci, candidate=z)
                if fid < best_fid:
                    best_fid = fid
                    best_value = z
            current = replace_mean(current, ci, best_value)
            if on_sweep is not None:
                on_sweep(SweepInfo(epoch, ci, seed, before, current))
    return run.result(final_params=current)


def random_search(
    schema: AttributeSchema,
    renderer,
    target: FeatureStats,
    cfg: EvalConfig,
    budget: int,
) -> OptimResult:
    """Uniform random parameter vectors; keeps the best of ``budget`` draws.

    Coordinates are drawn from the continuous attribute domains, not the
    search grids.
    """
    if budget < 1:
        raise OptimizerError("budget must be >= 1")
    coords = coordinate_list(schema)
    attrs = [schema.attributes[ai] for ai, _ in coords]
    weights = default_params(schema).component_weights
    rng = make_generator(cfg.base_seed, _TAG_RANDOM_SEARCH)
    shared_seed = derive_seed(cfg.base_seed, _TAG_RANDOM_SEARCH, 0)
    run = _Run(schema, renderer, target, cfg)
    for t in range(budget):
        means = tuple(a.lo + a.width * rng.random() for a in attrs)
        candidate = DistributionParams(means=means, component_weights=weights)
        eval_seed = (
            shared_seed
            if cfg.common_random_numbers
            else derive_seed(cfg.base_seed, _TAG_RANDOM_SEARCH, 1, t)
        )
        run.measure(candidate, eval_seed, epoch=0, coordinate=-1, candidate=math.nan)
    return run.result(final_params=run.best_params)


@dataclass(frozen=True)
class ReinforceHyper:
    """Score-function search hyperparameters.

    The policy lives in domain-normalized coordinates: ``policy_sigma`` is
    the per-coordinate deviation as a fraction of the domain width, and the
    update divides by ``policy_sigma`` squared in those units, so one
    (step_size, policy_sigma) pair serves attributes of any range. Defaults
    were calibrated on a scalar quadratic objective (see tests).
    """

    population: int = 8
    step_size: float = 0.2
    policy_sigma: float = 0.1

    def __post_init__(self):
        if self.population < 2:
            raise OptimizerError("population must be >= 2")
        if not (math.isfinite(self.step_size) and self.step_size >= 0):
            raise OptimizerError("step_size must be >= 0")
        if not (math.isfinite(self.policy_sigma) and self.policy_sigma >= 0):
            raise OptimizerError("policy_sigma must be >= 0")


def _project_means(schema: AttributeSchema, means: np.ndarray) -> tuple[float, ...]:
    coords = coordinate_list(schema)
    return tuple(
        schema.attributes[ai].project(float(v)) for (ai, _), v in zip(coords, means)
    )


def reinforce_search(
    schema: AttributeSchema,
    renderer,
    target: FeatureStats,
    cfg: EvalConfig,
    budget: int,
    hyper: ReinforceHyper | None = None,
    init: DistributionParams | None = None,
) -> OptimResult:
    """Policy-gradient ascent on a Gaussian policy over the mean vector.

    Each iteration draws a population around the policy mean, scores it,
    and moves the mean along the advantage-weighted perturbations. Runs
    floor(budget / population) iterations; returns the best-ever candidate.
    """
    hyper = hyper or ReinforceHyper()
    if budget < hyper.population:
        raise OptimizerError("budget must be at least one population")
    if init is None:
        init = default_params(schema)
    validate_params(schema, init)
    coords = coordinate_list(schema)
    attrs = [schema.attributes[ai] for ai, _ in coords]
    widths = np.array([a.width for a in attrs])
    sigma = hyper.policy_sigma * widths
    frozen = hyper.step_size == 0 or hyper.policy_sigma == 0
    rng = make_generator(cfg.base_seed, _TAG_REINFORCE)
    run = _Run(schema, renderer, target, cfg)
    theta = np.array(init.means, dtype=float)
    iterations = budget // hyper.population
    for it in range(iterations):
        shared_seed = derive_seed(cfg.base_seed, _TAG_REINFORCE, it)
        deltas = rng.standard_normal((hyper.population, len(theta))) * sigma
        fids = np.empty(hyper.population)
        for p in range(hyper.population):
            candidate = DistributionParams(
                means=_project_means(schema, theta + deltas[p]),
                component_weights=init.component_weights,
            )
            eval_seed = (
                shared_seed
                if cfg.common_random_numbers
                else derive_seed(cfg.base_seed, _TAG_REINFORCE, it, p)
            )
            fids[p] = run.measure(candidate, eval_seed, epoch=it, coordinate=-1, candidate=math.nan)
        if not frozen:
            advantage = -(fids - fids.mean())
            step = (
                hyper.step_size
                * (advantage[:, None] * deltas).mean(axis=0)
                / hyper.policy_sigma**2
            )
            theta = np.array(_project_means(schema, theta + step))
    final = DistributionParams(
        means=_project_means(schema, theta), component_weights=init.component_weights
    )
    return run.result(final_params=final)


def uniform_baseline(
    schema: AttributeSchema,
    renderer,
    target: FeatureStats,
    cfg: EvalConfig,
) -> OptimResult:
    """One uniform-sampling evaluation: the random-attributes baseline."""
    run = _Run(schema, renderer, target, cfg)
    seed = derive_seed(cfg.base_seed, _TAG_UNIFORM)
    run.measure(RANDOM_ATTRIBUTES, seed, epoch=0, coordinate=-1, candidate=math.nan)
    return run.result()


# ---------------------------------------------------------------------------
# trace and result files


def write_trace(trace: OptimizationTrace, path) -> None:
    with open(path, "w", encoding="ascii") as f:
        f.write(",".join(TRACE_COLUMNS) + "\n")
        for r in trace.records:
            f.write(
                f"{r.eval_index},{r.epoch},{r.coordinate},{r.candidate!r},"
                f"{r.fid!r},{r.best_fid!r},{r.millis:.3f}\n"
            )


def read_trace(path) -> OptimizationTrace:
    """Parse a trace file; malformed rows report their line number."""
    trace = OptimizationTrace()
    with open(path, "r", encoding="ascii") as f:
        header = f.readline()
        if header.strip() != ",".join(TRACE_COLUMNS):
            raise FormatError(f"{path}: line 1: bad or missing trace header")
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            parts = line.strip().split(",")
            if len(parts) != len(TRACE_COLUMNS):
                raise FormatError(
                    f"{path}: line {lineno}: expected {len(TRACE_COLUMNS)} fields, "
                    f"got {len(parts)}"
                )
            try:
                record = TraceRecord(
                    eval_index=int(parts[0]),
                    epoch=int(parts[1]),
                    coordinate=int(parts[2]),
                    candidate=float(parts[3]),
                    fid=float(parts[4]),
                    best_fid=float(parts[5]),
                    millis=float(parts[6]),
                )
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
            trace.records.append(record)
    return trace


def write_result(
    path,
    *,
    schema: AttributeSchema,
    schema_ref: str,
    method: str,
    budget: int,
    fid: float,
    params: DistributionParams | None,
) -> None:
    """Human-readable result document: final mean per coordinate plus the score."""
    lines = [
        "[result]",
        f"schema = {schema_ref}",
        f"method = {method}",
        f"budget = {budget}",
        f"fid = {fid:.6f}",
    ]
    if params is None:
        lines.append("sampling = uniform")
    else:
        for i, value in enumerate(params.means):
            lines.append(f"mean {schema.coordinate_label(i)} = {value!r}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
