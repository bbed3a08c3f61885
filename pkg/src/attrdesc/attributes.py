"""Attribute declarations, distribution parameters, and batch sampling.

An attribute is a scalar scene property (vehicle orientation, light
intensity, camera height, ...) modeled by a Gaussian with a fixed standard
deviation, or by a mixture of ``components`` such Gaussians for multimodal
attributes. Only the means are optimizable; each (attribute, component)
pair is one coordinate of the flattened mean vector, and each coordinate
carries a finite search grid of candidate mean values.

Sampling draws one value per attribute per row: pick a mixture component
by weight (mixtures only), draw Normal(mean, sigma^2), then wrap circular
values into [0, 360) or clamp linear values into the attribute domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import SchemaError
from .rng import row_generator

__all__ = [
    "AttributeDecl",
    "AttributeSchema",
    "DistributionParams",
    "SampleBatch",
    "validate_schema",
    "coordinate_list",
    "validate_params",
    "default_params",
    "uniform_weights",
    "replace_mean",
    "sample_batch",
    "uniform_batch",
]

CIRCULAR = "circular"
LINEAR = "linear"

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class AttributeDecl:
    """One attribute: kind, domain, mixture size, deviation, and search grid.

    ``kind`` is "circular" (degrees, domain exactly [0, 360), sampling wraps)
    or "linear" (engine units, sampling clamps to the domain). ``fixed_sigma``
    may be 0 for a degenerate deterministic attribute. ``grid`` is the ordered
    list of candidate mean values searched for every component.
    """

    name: str
    kind: str
    domain: tuple[float, float]
    grid: tuple[float, ...]
    components: int = 1
    fixed_sigma: float = 0.0

    @property
    def lo(self) -> float:
        return self.domain[0]

    @property
    def hi(self) -> float:
        return self.domain[1]

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def validate(self) -> None:
        if not self.name:
            raise SchemaError("attribute name must be non-empty")
        if self.kind not in (CIRCULAR, LINEAR):
            raise SchemaError(f"attribute {self.name!r}: unknown kind {self.kind!r}")
        lo, hi = self.domain
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise SchemaError(f"attribute {self.name!r}: non-finite domain")
        if lo > hi:
            raise SchemaError(f"attribute {self.name!r}: domain lo >= hi ({lo} > {hi})")
        if self.kind == CIRCULAR and (lo, hi) != (0.0, 360.0):
            raise SchemaError(f"attribute {self.name!r}: circular domain must be [0, 360)")
        if self.components < 1:
            raise SchemaError(f"attribute {self.name!r}: components must be >= 1")
        if not (np.isfinite(self.fixed_sigma) and self.fixed_sigma >= 0):
            raise SchemaError(f"attribute {self.name!r}: fixed_sigma must be >= 0")
        if len(self.grid) == 0:
            raise SchemaError(f"attribute {self.name!r}: empty grid")
        for v in self.grid:
            if not np.isfinite(v):
                raise SchemaError(f"attribute {self.name!r}: non-finite grid value")
            if not self.contains(v):
                raise SchemaError(f"attribute {self.name!r}: grid value outside domain ({v})")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise SchemaError(f"attribute {self.name!r}: grid not strictly increasing")

    def contains(self, value: float) -> bool:
        if self.kind == CIRCULAR:
            return 0.0 <= value < 360.0
        return self.lo <= value <= self.hi

    def project(self, value: float) -> float:
        """Wrap (circular) or clamp (linear) a value into the domain."""
        if self.kind == CIRCULAR:
            v = float(np.mod(value, 360.0))
            # np.mod can round up to exactly 360.0 for tiny negative inputs
            return 0.0 if v >= 360.0 else v
        return float(min(max(value, self.lo), self.hi))


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attribute declarations; the order fixes coordinate flattening."""

    attributes: tuple[AttributeDecl, ...]
    version: int = 1

    @cached_property
    def coordinate_count(self) -> int:
        """Total number of optimizable means across all attributes."""
        return sum(a.components for a in self.attributes)

    @cached_property
    def coordinates(self) -> tuple[tuple[int, int], ...]:
        return tuple(
            (ai, ci)
            for ai, attr in enumerate(self.attributes)
            for ci in range(attr.components)
        )

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    def attribute_of_coordinate(self, index: int) -> AttributeDecl:
        ai, _ = self.coordinates[index]
        return self.attributes[ai]

    def coordinate_label(self, index: int) -> str:
        ai, ci = self.coordinates[index]
        attr = self.attributes[ai]
        return attr.name if attr.components == 1 else f"{attr.name}[{ci}]"


def validate_schema(schema: AttributeSchema) -> AttributeSchema:
    """Check all declaration invariants; returns the schema unchanged."""
    if not schema.attributes:
        raise SchemaError("schema declares no attributes")
    seen: set[str] = set()
    for attr in schema.attributes:
        attr.validate()
        if attr.name in seen:
            raise SchemaError(f"duplicate attribute name {attr.name!r}")
        seen.add(attr.name)
    # materializes and caches the flattened coordinate count
    assert schema.coordinate_count >= len(schema.attributes)
    return schema


def coordinate_list(schema: AttributeSchema) -> tuple[tuple[int, int], ...]:
    """Deterministic (attribute index, component index) flattening.

    Attributes appear in declaration order, components in ascending index;
    this is the per-epoch sweep order of the optimizer.
    """
    return schema.coordinates


@dataclass(frozen=True)
class DistributionParams:
    """The optimizable mean of every coordinate plus fixed mixture weights.

    ``means`` is the flattened mean vector (length = coordinate count);
    ``component_weights`` holds one weight tuple per attribute (a 1-tuple
    ``(1.0,)`` for single Gaussians).
    """

    means: tuple[float, ...]
    component_weights: tuple[tuple[float, ...], ...]

    def mean_of(self, schema: AttributeSchema, attr_index: int, comp_index: int) -> float:
        offset = sum(a.components for a in schema.attributes[:attr_index])
        return self.means[offset + comp_index]


def uniform_weights(schema: AttributeSchema) -> tuple[tuple[float, ...], ...]:
    return tuple((1.0 / a.components,) * a.components for a in schema.attributes)


def default_params(schema: AttributeSchema) -> DistributionParams:
    """Deterministic on-grid start: the first grid point of every coordinate."""
    means = tuple(attr.grid[0] for attr in schema.attributes for _ in range(attr.components))
    return DistributionParams(means=means, component_weights=uniform_weights(schema))


def replace_mean(params: DistributionParams, index: int, value: float) -> DistributionParams:
    means = list(params.means)
    means[index] = float(value)
    return DistributionParams(means=tuple(means), component_weights=params.component_weights)


def validate_params(schema: AttributeSchema, params: DistributionParams) -> DistributionParams:
    m = schema.coordinate_count
    if len(params.means) != m:
        raise SchemaError(f"expected {m} means, got {len(params.means)}")
    if len(params.component_weights) != len(schema.attributes):
        raise SchemaError(
            f"expected weights for {len(schema.attributes)} attributes, "
            f"got {len(params.component_weights)}"
        )
    for index, ((ai, ci), mean) in enumerate(zip(schema.coordinates, params.means)):
        attr = schema.attributes[ai]
        if not np.isfinite(mean):
            raise SchemaError(f"mean for {schema.coordinate_label(index)} is not finite")
        if not attr.contains(mean):
            raise SchemaError(
                f"mean {mean} for {schema.coordinate_label(index)} outside domain of {attr.name!r}"
            )
    for attr, weights in zip(schema.attributes, params.component_weights):
        if len(weights) != attr.components:
            raise SchemaError(f"attribute {attr.name!r}: expected {attr.components} weights")
        if any(w < 0 for w in weights):
            raise SchemaError(f"attribute {attr.name!r}: negative component weight")
        if abs(sum(weights) - 1.0) > _WEIGHT_TOL:
            raise SchemaError(f"attribute {attr.name!r}: component weights must sum to 1")
    return params


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """K sampled attribute rows (columns in declaration order) plus the seed."""

    values: np.ndarray  # (K, N) float64
    seed: int

    @property
    def count(self) -> int:
        return self.values.shape[0]


def _attribute_means(schema: AttributeSchema, params: DistributionParams) -> list[np.ndarray]:
    out = []
    offset = 0
    for attr in schema.attributes:
        out.append(np.asarray(params.means[offset : offset + attr.components], dtype=float))
        offset += attr.components
    return out


def sample_batch(
    schema: AttributeSchema,
    params: DistributionParams,
    count: int,
    seed: int,
) -> SampleBatch:
    """Draw ``count`` attribute rows from the parameterized distributions.

    Each row uses its own spawned RNG stream, so the batch is a pure
    function of (schema, params, count, seed), bit for bit.
    """
    if count < 1:
        raise SchemaError("sample count must be >= 1")
    validate_params(schema, params)
    means = _attribute_means(schema, params)
    cumweights = [np.cumsum(w) for w in params.component_weights]
    attrs = schema.attributes
    values = np.empty((count, len(attrs)), dtype=np.float64)
    for r in range(count):
        rng = row_generator(seed, r)
        for j, attr in enumerate(attrs):
            if attr.components == 1:
                mean = means[j][0]
            else:
                k = int(np.searchsorted(cumweights[j], rng.random(), side="right"))
                mean = means[j][min(k, attr.components - 1)]
            values[r, j] = attr.project(mean + attr.fixed_sigma * rng.standard_normal())
    return SampleBatch(values=values, seed=int(seed))


def uniform_batch(schema: AttributeSchema, count: int, seed: int) -> SampleBatch:
    """Draw ``count`` rows uniformly over each attribute's domain."""
    if count < 1:
        raise SchemaError("sample count must be >= 1")
    validate_schema(schema)
    attrs = schema.attributes
    values = np.empty((count, len(attrs)), dtype=np.float64)
    for r in range(count):
        rng = row_generator(seed, r)
        for j, attr in enumerate(attrs):
            values[r, j] = attr.lo + attr.width * rng.random()
    return SampleBatch(values=values, seed=int(seed))
