import numpy as np
import pytest

from attrdesc.attributes import (
    AttributeDecl,
    AttributeSchema,
    DistributionParams,
    uniform_weights,
    validate_schema,
)
from attrdesc.oracle import OracleConfig, oracle_target_stats

import calibration


def make_schema(*attrs: AttributeDecl) -> AttributeSchema:
    return validate_schema(AttributeSchema(attributes=tuple(attrs)))


def circular_attr(name="angle", components=1, sigma=10.0, step=30):
    return AttributeDecl(
        name=name,
        kind="circular",
        domain=(0.0, 360.0),
        grid=tuple(float(v) for v in range(0, 360, step)),
        components=components,
        fixed_sigma=sigma,
    )


def linear_attr(name="size", lo=0.0, hi=10.0, points=11, sigma=0.5, components=1):
    return AttributeDecl(
        name=name,
        kind="linear",
        domain=(lo, hi),
        grid=tuple(float(v) for v in np.linspace(lo, hi, points)),
        components=components,
        fixed_sigma=sigma,
    )


def params_for(schema: AttributeSchema, *means: float) -> DistributionParams:
    return DistributionParams(means=tuple(float(m) for m in means),
                              component_weights=uniform_weights(schema))


def ks_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    a = np.sort(np.asarray(a, float))
    b = np.sort(np.asarray(b, float))
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / len(a)
    cdf_b = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.abs(cdf_a - cdf_b).max())


def circular_distance(a: float, b: float) -> float:
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


@pytest.fixture(scope="session")
def vehiclex5():
    return calibration.vehiclex5_schema()


@pytest.fixture(scope="session")
def planted_config(vehiclex5) -> OracleConfig:
    return calibration.planted_oracle(vehiclex5)


@pytest.fixture(scope="session")
def planted_target(planted_config):
    return oracle_target_stats(
        planted_config, calibration.TARGET_COUNT, seed=calibration.TARGET_SEED
    )


@pytest.fixture
def small_schema():
    return make_schema(circular_attr(components=2, sigma=5.0), linear_attr(points=6))
