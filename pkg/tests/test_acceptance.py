"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s``. Statistical criteria
use frozen fixtures and thresholds from calibration.py.
"""

import itertools
import math
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

import calibration

from attrdesc.attributes import (
    AttributeDecl,
    AttributeSchema,
    DistributionParams,
    SampleBatch,
    coordinate_list,
    default_params,
    uniform_weights,
    validate_schema,
)
from attrdesc.configfile import load_oracle_file, load_schema_file
from attrdesc.conformance import fuzz_peer
from attrdesc.errors import ProtocolError
from attrdesc.loopback import noise_entropy
from attrdesc.optimize import (
    EvalConfig,
    ReinforceHyper,
    attribute_descent,
    descent_budget,
    evaluate,
    random_search,
    reinforce_search,
    uniform_baseline,
)
from attrdesc.oracle import OracleConfig, OracleRenderer, oracle_render, oracle_target_stats
from attrdesc.protocol import decode_message, encode_message, open_external
from attrdesc.rng import derive_seed
from attrdesc.stats import FeatureStats, frechet_distance, sqrt_psd


@contextmanager
def criterion(name: str):
    info = {"detail": ""}
    start = time.perf_counter()
    try:
        yield info
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL ({time.perf_counter() - start:.1f}s)")
        raise
    elapsed = time.perf_counter() - start
    print(f"ACCEPTANCE {name}: PASS ({elapsed:.1f}s) {info['detail']}")


def gaussian_stats(mean, cov):
    mean = np.asarray(mean, float)
    return FeatureStats(dim=len(mean), count=100, mean=mean, cov=np.asarray(cov, float))


def assert_trace_valid(trace):
    best = math.inf
    for i, record in enumerate(trace.records):
        assert record.eval_index == i, "eval indices must be contiguous from 0"
        best = min(best, record.fid)
        assert record.best_fid == best, "best-so-far must be non-increasing"


def test_fid_closed_form_suite():
    with criterion("fid-closed-form") as info:
        start = time.perf_counter()
        rng = np.random.default_rng(12001)
        worst = 0.0
        for i in range(1000):
            d = 1 if i % 2 == 0 else int(rng.integers(2, 65))
            mu_a, mu_b = rng.standard_normal(d), rng.standard_normal(d)
            lam_a = rng.uniform(0.05, 9.0, d)
            lam_b = rng.uniform(0.05, 9.0, d)
            got = frechet_distance(
                gaussian_stats(mu_a, np.diag(lam_a)), gaussian_stats(mu_b, np.diag(lam_b))
            )
            want = float(
                ((mu_a - mu_b) ** 2).sum() + ((np.sqrt(lam_a) - np.sqrt(lam_b)) ** 2).sum()
            )
            rel = abs(got - want) / want
            worst = max(worst, rel)
            assert rel <= 1e-8, f"instance {i}: relative error {rel:.3e}"
        for _ in range(50):
            d = int(rng.integers(1, 17))
            a = gaussian_stats(rng.standard_normal(d), _random_psd(rng, d))
            b = gaussian_stats(rng.standard_normal(d), _random_psd(rng, d))
            assert frechet_distance(a, a) <= 1e-6
            ab, ba = frechet_distance(a, b), frechet_distance(b, a)
            assert abs(ab - ba) <= 1e-6 * (1 + ab)
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0, f"runtime {elapsed:.1f}s over budget"
        info["detail"] = f"1000 closed-form instances, worst rel err {worst:.2e}"


def _random_psd(rng, dim, rank=None):
    a = rng.standard_normal((dim, rank or dim))
    return a @ a.T / dim


def test_matrix_sqrt_suite():
    with criterion("matrix-sqrt") as info:
        start = time.perf_counter()
        assert np.array_equal(sqrt_psd(np.eye(8)), np.eye(8))
        assert np.allclose(sqrt_psd(np.diag([4.0, 9.0, 16.0])), np.diag([2.0, 3.0, 4.0]),
                           atol=1e-12)
        rng = np.random.default_rng(12002)
        worst = 0.0
        for i in range(100):
            d = int(rng.integers(2, 129))
            rank = d if i % 3 else max(1, d // 2)  # every third matrix rank-deficient
            s = _random_psd(rng, d, rank)
            root = sqrt_psd(s)
            scale = 1.0 + float(np.abs(s).max())
            err = float(np.abs(root @ root - s).max()) / scale
            worst = max(worst, err)
            assert err <= 1e-6, f"instance {i} (D={d}): reconstruction error {err:.3e}"
        elapsed = time.perf_counter() - start
        assert elapsed < 30.0, f"runtime {elapsed:.1f}s over budget"
        info["detail"] = f"100 matrices up to D=128, worst rel err {worst:.2e}"


def _recovered(schema, params) -> bool:
    planted = calibration.PLANTED_MEANS
    orient = planted[:6]
    for i in range(6):
        d = min(_circ(params.means[i], p) for p in orient)
        if d > 30.0 + 1e-9:
            return False
    for ci in range(6, 10):
        step = _grid_step(schema, ci)
        if abs(params.means[ci] - planted[ci]) > step + 1e-9:
            return False
    return True


def _circ(a, b):
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def _grid_step(schema, coord_index):
    ai, _ = coordinate_list(schema)[coord_index]
    grid = schema.attributes[ai].grid
    return max(b - a for a, b in zip(grid, grid[1:]))


@pytest.mark.slow
def test_planted_recovery(vehiclex5, planted_config, planted_target):
    with criterion("planted-recovery") as info:
        start = time.perf_counter()
        hits = 0
        for s in calibration.ACCEPT_SEEDS:
            cfg = EvalConfig(samples_per_eval=500, base_seed=s, epochs=2)
            renderer = OracleRenderer(planted_config, seed=derive_seed(s, 500))
            result = attribute_descent(
                vehiclex5, default_params(vehiclex5), renderer, planted_target, cfg
            )
            assert_trace_valid(result.trace)
            assert result.trace.total_evaluations == descent_budget(vehiclex5, cfg) == 224
            hits += _recovered(vehiclex5, result.final_params)
        elapsed = time.perf_counter() - start
        assert hits >= 18, f"recovered in only {hits}/20 seeds"
        assert elapsed < 300.0, f"runtime {elapsed:.1f}s over budget"
        info["detail"] = f"{hits}/20 seeds recovered"


@pytest.mark.slow
def test_budget_matched_comparison(vehiclex5, planted_config, planted_target):
    with criterion("budget-matched-comparison") as info:
        start = time.perf_counter()
        budget = descent_budget(vehiclex5, EvalConfig(epochs=2))
        wins_search, wins_uniform = 0, 0
        lts_between = 0
        for s in calibration.ACCEPT_SEEDS:
            cfg = EvalConfig(samples_per_eval=500, base_seed=s, epochs=2)
            renderer = OracleRenderer(planted_config, seed=derive_seed(s, 500))
            descent = attribute_descent(
                vehiclex5, default_params(vehiclex5), renderer, planted_target, cfg
            )
            search = random_search(vehiclex5, renderer, planted_target, cfg, budget)
            uniform = uniform_baseline(vehiclex5, renderer, planted_target, cfg)
            lts = reinforce_search(vehiclex5, renderer, planted_target, cfg, budget)
            for result, expected in (
                (descent, budget),
                (search, budget),
                (lts, ReinforceHyper().population * (budget // ReinforceHyper().population)),
                (uniform, 1),
            ):
                assert_trace_valid(result.trace)
                assert result.trace.total_evaluations == expected
            wins_search += descent.best_fid <= search.best_fid
            wins_uniform += descent.best_fid <= uniform.best_fid
            lts_between += descent.best_fid <= lts.best_fid <= search.best_fid
        elapsed = time.perf_counter() - start
        # the policy-search reproduction is reported, not gated
        info["detail"] = (
            f"descent<=search {wins_search}/20, descent<=uniform {wins_uniform}/20, "
            f"descent<=policy-search<=search {lts_between}/20 (reported)"
        )
        assert wins_search >= 18, f"descent beat random search in only {wins_search}/20"
        assert wins_uniform >= 18, f"descent beat uniform sampling in only {wins_uniform}/20"
        assert elapsed < 1200.0, f"runtime {elapsed:.1f}s over budget"


GROUPS = {
    "C": ("camera_height", "camera_distance"),
    "O": ("orientation",),
    "L": ("light_direction", "light_intensity"),
}


def _ordered_fixture(vehiclex5, order):
    by_name = {a.name: a for a in vehiclex5.attributes}
    planted_by_name = {}
    offset = 0
    for attr in vehiclex5.attributes:
        planted_by_name[attr.name] = calibration.PLANTED_MEANS[
            offset : offset + attr.components
        ]
        offset += attr.components
    names = [n for g in order for n in GROUPS[g]]
    schema = validate_schema(AttributeSchema(attributes=tuple(by_name[n] for n in names)))
    means = tuple(v for n in names for v in planted_by_name[n])
    planted = DistributionParams(means=means, component_weights=uniform_weights(schema))
    config = OracleConfig(
        schema=schema,
        planted_means=planted,
        feature_dim=calibration.FEATURE_DIM,
        mixing_seed=calibration.MIXING_SEED,
        noise_sigma=calibration.NOISE_SIGMA,
        separable=True,
    )
    return schema, config


@pytest.mark.slow
def test_order_robustness(vehiclex5):
    with criterion("order-robustness") as info:
        start = time.perf_counter()
        orders = ["".join(p) for p in itertools.permutations("COL")]
        fixtures = {o: _ordered_fixture(vehiclex5, o) for o in orders}
        targets = {
            o: oracle_target_stats(cfg, calibration.TARGET_COUNT, seed=calibration.TARGET_SEED)
            for o, (_, cfg) in fixtures.items()
        }
        bound = 2.0 * calibration.SEPARABLE_NOISE_FLOOR
        worst = 0.0
        for s in range(10):
            finals = []
            for o in orders:
                schema, config = fixtures[o]
                cfg = EvalConfig(samples_per_eval=500, base_seed=s, epochs=2)
                renderer = OracleRenderer(config, seed=derive_seed(s, 500))
                result = attribute_descent(
                    schema, default_params(schema), renderer, targets[o], cfg
                )
                assert_trace_valid(result.trace)
                finals.append(result.best_fid)
            spread = max(finals) - min(finals)
            worst = max(worst, spread)
            assert spread <= bound, f"seed {s}: ordering spread {spread:.5f} > {bound:.5f}"
        elapsed = time.perf_counter() - start
        assert elapsed < 600.0, f"runtime {elapsed:.1f}s over budget"
        info["detail"] = f"max spread {worst:.5f} <= {bound:.5f} over 6 orderings x 10 seeds"


def _random_small_problem(rng):
    n_attrs = int(rng.integers(1, 3))
    attrs = []
    means = []
    for i in range(n_attrs):
        if rng.random() < 0.5:
            size = int(rng.integers(2, 5))
            attrs.append(
                AttributeDecl(
                    f"c{i}", "circular", (0.0, 360.0),
                    grid=tuple(float(v) for v in np.linspace(0, 300, size)),
                    components=int(rng.integers(1, 3)),
                    fixed_sigma=float(rng.uniform(0, 20)),
                )
            )
        else:
            lo = float(rng.uniform(-5, 5))
            hi = lo + float(rng.uniform(1, 10))
            size = int(rng.integers(2, 5))
            attrs.append(
                AttributeDecl(
                    f"l{i}", "linear", (lo, hi),
                    grid=tuple(float(v) for v in np.linspace(lo, hi, size)),
                    components=1,
                    fixed_sigma=float(rng.uniform(0, 1)),
                )
            )
    schema = validate_schema(AttributeSchema(attributes=tuple(attrs)))
    for attr in attrs:
        pick = attr.grid[int(rng.integers(0, len(attr.grid)))]
        means.extend([pick] * attr.components)
    planted = DistributionParams(means=tuple(means), component_weights=uniform_weights(schema))
    config = OracleConfig(
        schema=schema,
        planted_means=planted,
        feature_dim=int(rng.integers(5, 9)),
        mixing_seed=int(rng.integers(0, 1000)),
        noise_sigma=float(rng.uniform(0, 0.1)),
    )
    return schema, config


def test_monotonicity_budget_and_crn():
    with criterion("monotonicity-budget-crn") as info:
        rng = np.random.default_rng(777)
        sweeps_checked = 0
        runs = 0
        while sweeps_checked < 100:
            schema, config = _random_small_problem(rng)
            target = oracle_target_stats(config, 200, seed=int(rng.integers(0, 10**6)))
            renderer = OracleRenderer(config, seed=int(rng.integers(0, 10**6)))
            cfg = EvalConfig(
                samples_per_eval=25, base_seed=int(rng.integers(0, 10**6)), epochs=2
            )
            sweeps = []
            result = attribute_descent(
                schema, default_params(schema), renderer, target, cfg, on_sweep=sweeps.append
            )
            assert_trace_valid(result.trace)
            assert result.trace.total_evaluations == descent_budget(schema, cfg)
            assert result.best_fid == min(r.fid for r in result.trace.records)
            for sweep in sweeps:
                before = evaluate(
                    schema, sweep.params_before, renderer, target, cfg, sweep.seed
                )
                after = evaluate(
                    schema, sweep.params_after, renderer, target, cfg, sweep.seed
                )
                assert after <= before, "post-sweep objective must not regress under CRN"
            sweeps_checked += len(sweeps)
            runs += 1
        info["detail"] = f"{sweeps_checked} sweeps across {runs} random problems"


ORACLE_DOC = """
[attribute angle]
kind = circular
domain = 0 360
components = 2
fixed_sigma = 5
grid = 0:330:30

[attribute size]
kind = linear
domain = 0 10
fixed_sigma = 0.5
grid = segments:5

[oracle]
feature_dim = 6
mixing_seed = 3
noise_sigma = 0.05
planted_means = 60 240 7.5
"""


def test_protocol_conformance(tmp_path):
    with criterion("protocol-conformance") as info:
        start = time.perf_counter()
        cfg_path = tmp_path / "oracle.cfg"
        cfg_path.write_text(ORACLE_DOC)
        schema = load_schema_file(cfg_path)
        config = load_oracle_file(cfg_path)

        rng = np.random.default_rng(321)
        for _ in range(500):
            msg = _random_message(rng)
            line = encode_message(msg)
            assert decode_message(line) == msg
            assert encode_message(decode_message(line)) == line
        for garbage in ("", "{", "null", '{"type":"render","id":0,"samples":[[1],[2,3]]}'):
            with pytest.raises(ProtocolError):
                decode_message(garbage)

        command = f"{sys.executable} -m attrdesc.loopback --config {cfg_path} --seed 17"
        worst = 0.0
        with open_external(command) as session:
            assert session.feature_dim == 6
            for request_id in range(4):
                rows = np.column_stack(
                    [rng.uniform(0, 360, 8), rng.uniform(0, 10, 8)]
                )
                served = session.render(rows)
                local = oracle_render(
                    config,
                    SampleBatch(values=rows, seed=request_id),
                    noise_entropy(17, request_id),
                )
                worst = max(worst, float(np.abs(served - local).max()))
                assert worst <= 1e-12, f"loopback deviation {worst:.3e}"

        report = fuzz_peer(command.split(), schema, seed=1, timeout=60.0)
        assert report.passed, report.summary()
        elapsed = time.perf_counter() - start
        assert elapsed < 60.0, f"runtime {elapsed:.1f}s over budget"
        info["detail"] = f"round-trip x500, loopback max dev {worst:.1e}, fuzz passed"


def _random_message(rng):
    kind = ["hello", "render", "features", "error", "shutdown"][int(rng.integers(0, 5))]
    if kind == "hello":
        return {"type": "hello", "version": int(rng.integers(0, 9)),
                "feature_dim": int(rng.integers(1, 4096))}
    if kind == "shutdown":
        return {"type": "shutdown"}
    mid = int(rng.integers(0, 2**53))
    if kind == "error":
        return {"type": "error", "id": mid, "message": "x" * int(rng.integers(0, 40))}
    rows = int(rng.integers(1, 5))
    width = int(rng.integers(1, 5))
    data = [
        [float(v) if rng.random() < 0.8 else int(rng.integers(-99, 99)) for v in row]
        for row in rng.standard_normal((rows, width))
    ]
    key = "samples" if kind == "render" else "data"
    return {"type": kind, "id": mid, key: data}
