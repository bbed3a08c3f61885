import numpy as np
import pytest

from attrdesc.errors import (
    DimensionMismatchError,
    FormatError,
    NotPSDError,
    StatsError,
)
from attrdesc.stats import (
    FMATX_MAGIC,
    FSTAT_MAGIC,
    FeatureStats,
    accumulate_stats,
    frechet_distance,
    read_feature_matrix,
    read_stats,
    sniff_format,
    sqrt_psd,
    stats_from_file,
    write_feature_matrix,
    write_stats,
)


def gaussian_stats(mean, cov, count=100):
    mean = np.asarray(mean, float)
    cov = np.asarray(cov, float)
    return FeatureStats(dim=len(mean), count=count, mean=mean, cov=cov)


def diagonal_closed_form(mu_a, lam_a, mu_b, lam_b):
    """Independent oracle for commuting (diagonal) covariances."""
    mu_a, lam_a = np.asarray(mu_a), np.asarray(lam_a)
    mu_b, lam_b = np.asarray(mu_b), np.asarray(lam_b)
    return float(((mu_a - mu_b) ** 2).sum() + ((np.sqrt(lam_a) - np.sqrt(lam_b)) ** 2).sum())


def random_psd(rng, dim, rank=None):
    a = rng.standard_normal((dim, rank or dim))
    return a @ a.T / dim


class TestAccumulate:
    def test_two_point_covariance_by_hand(self):
        stats = accumulate_stats(np.array([[0.0, 0.0], [2.0, 2.0]]))
        assert np.array_equal(stats.mean, [1.0, 1.0])
        assert np.array_equal(stats.cov, [[2.0, 2.0], [2.0, 2.0]])
        assert stats.count == 2

    def test_identical_rows_zero_covariance(self):
        stats = accumulate_stats(np.tile([3.0, -1.0, 7.0], (10, 1)))
        assert np.allclose(stats.cov, 0.0, atol=1e-14)

    def test_single_row_rejected(self):
        with pytest.raises(StatsError, match="count < 2"):
            accumulate_stats(np.ones((1, 4)))

    def test_non_finite_rejected(self):
        x = np.ones((3, 2))
        x[1, 1] = np.nan
        with pytest.raises(StatsError, match="non-finite"):
            accumulate_stats(x)

    def test_matches_numpy_cov(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((50, 6))
        stats = accumulate_stats(x)
        assert np.allclose(stats.cov, np.cov(x, rowvar=False), atol=1e-12)


class TestSqrtPsd:
    def test_identity(self):
        assert np.array_equal(sqrt_psd(np.eye(5)), np.eye(5))

    def test_diagonal(self):
        assert np.allclose(sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-12)

    def test_reconstruction_over_random_seeds(self):
        for seed in range(30):
            rng = np.random.default_rng(seed)
            s = random_psd(rng, 32)
            r = sqrt_psd(s)
            scale = 1.0 + np.abs(s).max()
            assert np.abs(r @ r - s).max() <= 1e-6 * scale
            assert np.array_equal(r, r.T)

    def test_zero_matrix(self):
        assert np.array_equal(sqrt_psd(np.zeros((3, 3))), np.zeros((3, 3)))

    def test_asymmetric_rejected(self):
        s = np.array([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(StatsError, match="asymmetry"):
            sqrt_psd(s)

    def test_negative_definite_rejected(self):
        with pytest.raises(NotPSDError):
            sqrt_psd(np.diag([1.0, -0.5]))

    def test_tiny_negative_eigenvalue_clipped(self):
        s = np.diag([1.0, -1e-9])
        r = sqrt_psd(s)
        assert r[1, 1] == 0.0


class TestFrechet:
    def test_identity_of_indiscernibles(self):
        rng = np.random.default_rng(1)
        a = gaussian_stats(rng.standard_normal(16), random_psd(rng, 16))
        assert frechet_distance(a, a) <= 1e-6

    def test_one_dimensional_closed_form(self):
        a = gaussian_stats([0.0], [[1.0]])
        b = gaussian_stats([3.0], [[4.0]])
        assert frechet_distance(a, b) == pytest.approx(10.0, abs=1e-9)

    def test_two_dimensional_diagonal(self):
        a = gaussian_stats([0.0, 0.0], np.diag([1.0, 4.0]))
        b = gaussian_stats([1.0, 1.0], np.diag([4.0, 1.0]))
        assert frechet_distance(a, b) == pytest.approx(4.0, abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            d = int(rng.integers(1, 12))
            a = gaussian_stats(rng.standard_normal(d), random_psd(rng, d))
            b = gaussian_stats(rng.standard_normal(d), random_psd(rng, d))
            ab, ba = frechet_distance(a, b), frechet_distance(b, a)
            assert abs(ab - ba) <= 1e-6 * (1 + ab)

    def test_diagonal_oracle_up_to_dim_64(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            d = int(rng.integers(1, 65))
            mu_a, mu_b = rng.standard_normal(d), rng.standard_normal(d)
            lam_a, lam_b = rng.uniform(0.1, 5.0, d), rng.uniform(0.1, 5.0, d)
            got = frechet_distance(
                gaussian_stats(mu_a, np.diag(lam_a)), gaussian_stats(mu_b, np.diag(lam_b))
            )
            want = diagonal_closed_form(mu_a, lam_a, mu_b, lam_b)
            assert got == pytest.approx(want, rel=1e-8)

    def test_product_eigenvalue_oracle_low_dim(self):
        # trace term equals the sum of square roots of eig(cov_a @ cov_b)
        rng = np.random.default_rng(4)
        for _ in range(50):
            d = int(rng.integers(1, 4))
            cov_a, cov_b = random_psd(rng, d), random_psd(rng, d)
            a = gaussian_stats(np.zeros(d), cov_a)
            b = gaussian_stats(np.zeros(d), cov_b)
            eig = np.linalg.eigvals(cov_a @ cov_b)
            want = float(
                np.trace(cov_a) + np.trace(cov_b)
                - 2.0 * np.sqrt(np.clip(eig.real, 0, None)).sum()
            )
            assert frechet_distance(a, b) == pytest.approx(want, abs=1e-6)

    def test_translation_invariance(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((40, 6))
        y = rng.standard_normal((60, 6)) * 1.3 + 0.2
        shift = rng.standard_normal(6) * 10
        base = frechet_distance(accumulate_stats(x), accumulate_stats(y))
        moved = frechet_distance(accumulate_stats(x + shift), accumulate_stats(y + shift))
        assert moved == pytest.approx(base, abs=1e-6)

    def test_dimension_mismatch(self):
        a = gaussian_stats(np.zeros(4), np.eye(4))
        b = gaussian_stats(np.zeros(8), np.eye(8))
        with pytest.raises(DimensionMismatchError, match="dimension mismatch 4 vs 8"):
            frechet_distance(a, b)

    def test_regularization_retry(self):
        # one eigenvalue below the PSD tolerance, recoverable by the identity bump
        rng = np.random.default_rng(6)
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        bad = (q * np.array([1.5, 1.5, -1.5e-6])) @ q.T
        bad = 0.5 * (bad + bad.T)
        a = gaussian_stats(np.zeros(3), bad)
        b = gaussian_stats(np.ones(3), np.eye(3))
        with pytest.raises(NotPSDError):
            sqrt_psd(bad)
        value = frechet_distance(a, b)
        assert value > 0

    def test_rank_deficient_sample_covariances(self):
        # fewer rows than dimensions: the usual rank-deficient regime
        rng = np.random.default_rng(7)
        a = accumulate_stats(rng.standard_normal((5, 16)))
        b = accumulate_stats(rng.standard_normal((6, 16)))
        assert frechet_distance(a, b) >= 0


class TestFileFormats:
    def test_feature_matrix_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((7, 5))
        path = tmp_path / "x.fmatx"
        write_feature_matrix(x, path)
        assert np.array_equal(read_feature_matrix(path), x)

    def test_stats_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(9)
        stats = accumulate_stats(rng.standard_normal((30, 8)))
        path = tmp_path / "s.fstat"
        write_stats(stats, path)
        back = read_stats(path)
        assert back.dim == 8 and back.count == 30
        assert np.array_equal(back.mean, stats.mean)
        assert np.array_equal(back.cov, stats.cov)

    def test_exact_byte_layout(self, tmp_path):
        x = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        path = tmp_path / "x.fmatx"
        write_feature_matrix(x, path)
        raw = path.read_bytes()
        header = b'FMATX1\n{"rows":3,"dim":2,"dtype":"f64"}\n'
        assert raw[: len(header)] == header
        assert raw[len(header):] == x.astype("<f8").tobytes()
        stats = accumulate_stats(x)
        spath = tmp_path / "s.fstat"
        write_stats(stats, spath)
        sheader = b'FSTAT1\n{"dim":2,"count":3,"dtype":"f64"}\n'
        assert spath.read_bytes()[: len(sheader)] == sheader

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad"
        path.write_bytes(b"NOTAFMT\nwhatever")
        with pytest.raises(FormatError, match="unrecognized format"):
            read_feature_matrix(path)
        with pytest.raises(FormatError, match="unrecognized format"):
            read_stats(path)

    def test_truncated_payload(self, tmp_path):
        x = np.ones((4, 3))
        path = tmp_path / "x.fmatx"
        write_feature_matrix(x, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(FormatError, match="truncated payload"):
            read_feature_matrix(path)

    def test_dim_payload_inconsistency(self, tmp_path):
        # header says dim 4 but payload holds dim-3 rows
        path = tmp_path / "x.fmatx"
        payload = np.ones(2 * 3).astype("<f8").tobytes()
        path.write_bytes(FMATX_MAGIC + b'{"rows":2,"dim":4,"dtype":"f64"}\n' + payload)
        with pytest.raises(FormatError, match="truncated payload"):
            read_feature_matrix(path)

    def test_trailing_data(self, tmp_path):
        x = np.ones((2, 2))
        path = tmp_path / "x.fmatx"
        write_feature_matrix(x, path)
        path.write_bytes(path.read_bytes() + b"extra")
        with pytest.raises(FormatError, match="trailing data"):
            read_feature_matrix(path)

    def test_stats_count_inconsistency(self, tmp_path):
        path = tmp_path / "s.fstat"
        payload = np.zeros(2 + 4).astype("<f8").tobytes()
        path.write_bytes(FSTAT_MAGIC + b'{"dim":2,"count":1,"dtype":"f64"}\n' + payload)
        with pytest.raises(FormatError, match="inconsistency"):
            read_stats(path)

    def test_sniff_and_auto_accumulate(self, tmp_path):
        rng = np.random.default_rng(10)
        x = rng.standard_normal((12, 4))
        mpath, spath = tmp_path / "m.fmatx", tmp_path / "s.fstat"
        write_feature_matrix(x, mpath)
        write_stats(accumulate_stats(x), spath)
        assert sniff_format(mpath) == "fmatx"
        assert sniff_format(spath) == "fstat"
        a, b = stats_from_file(mpath), stats_from_file(spath)
        assert np.array_equal(a.mean, b.mean)
        assert np.array_equal(a.cov, b.cov)
