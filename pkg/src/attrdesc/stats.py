"""Gaussian feature statistics, the Frechet distance, and their file formats.

A feature set is summarized by its column mean and sample covariance
(n-1 normalization). The distance between two summaries (m1, C1), (m2, C2)
is

    ||m1 - m2||^2 + Tr(C1) + Tr(C2) - 2 Tr((C1 C2)^(1/2))

where the trace of the matrix geometric cross term is evaluated through
the symmetric PSD product sqrt(sqrt(C1) C2 sqrt(C1)), which has the same
eigenvalues as C1 C2 but admits a real symmetric eigendecomposition.

File formats (bit-exact):

    FMATX1\\n{"rows":n,"dim":D,"dtype":"f64"}\\n  + n*D little-endian f64
    FSTAT1\\n{"dim":D,"count":n,"dtype":"f64"}\\n + D f64 (mean) + D*D f64 (cov)
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, FormatError, NotPSDError, StatsError

__all__ = [
    "FeatureStats",
    "accumulate_stats",
    "sqrt_psd",
    "frechet_distance",
    "write_feature_matrix",
    "read_feature_matrix",
    "write_stats",
    "read_stats",
    "sniff_format",
    "stats_from_file",
    "FMATX_MAGIC",
    "FSTAT_MAGIC",
]

FMATX_MAGIC = b"FMATX1\n"
FSTAT_MAGIC = b"FSTAT1\n"

# max |C - C^T| allowed relative to max |C|
_SYMMETRY_RTOL_STATS = 1e-9
_SYMMETRY_RTOL_SQRT = 1e-8
# eigenvalues of a PSD input may undershoot zero by this fraction of the spectral norm
_PSD_RTOL = 1e-6
# eigenvalues this small relative to the spectral norm are numerical zeros;
# flushing them avoids the square root amplifying them to ~sqrt(eps)
_ZERO_RTOL = 1e-12
# relative size of the identity bump used in the one-shot regularization retry
_REGULARIZE_EPS = 1e-6
# negative distances within this relative tolerance of zero are clamped to zero
_NEGATIVE_CLAMP_RTOL = 1e-8


def _as_feature_matrix(features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise StatsError(f"feature matrix must be 2-d, got shape {x.shape}")
    n, d = x.shape
    if n < 1 or d < 1:
        raise StatsError(f"feature matrix must be at least 1x1, got {n}x{d}")
    if not np.all(np.isfinite(x)):
        raise StatsError("feature matrix contains non-finite entries")
    return x


@dataclass(frozen=True, eq=False)
class FeatureStats:
    """Mean vector, covariance matrix, and sample count of a feature set."""

    dim: int
    count: int
    mean: np.ndarray  # (dim,)
    cov: np.ndarray  # (dim, dim)

    def __post_init__(self):
        if self.count < 2:
            raise StatsError(f"count < 2: covariance undefined for count={self.count}")
        if self.mean.shape != (self.dim,):
            raise StatsError(f"mean shape {self.mean.shape} does not match dim {self.dim}")
        if self.cov.shape != (self.dim, self.dim):
            raise StatsError(f"cov shape {self.cov.shape} does not match dim {self.dim}")
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.cov))):
            raise StatsError("statistics contain non-finite entries")
        scale = 1.0 + float(np.abs(self.cov).max(initial=0.0))
        asym = float(np.abs(self.cov - self.cov.T).max(initial=0.0))
        if asym > _SYMMETRY_RTOL_STATS * scale:
            raise StatsError(f"covariance asymmetry {asym:.3e} exceeds tolerance")


def accumulate_stats(features) -> FeatureStats:
    """Column mean and unbiased sample covariance of a feature matrix."""
    x = _as_feature_matrix(features)
    n, d = x.shape
    if n < 2:
        raise StatsError(f"count < 2: need at least 2 rows, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T)
    return FeatureStats(dim=d, count=n, mean=mean, cov=cov)


def sqrt_psd(matrix) -> np.ndarray:
    """Symmetric PSD square root via the self-adjoint eigendecomposition.

    Eigenvalues are clipped at zero; an eigenvalue below -1e-6 times the
    spectral norm means the input is not PSD and raises NotPSDError.
    """
    s = np.asarray(matrix, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise StatsError(f"matrix square root needs a square matrix, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise StatsError("matrix contains non-finite entries")
    scale = 1.0 + float(np.abs(s).max(initial=0.0))
    asym = float(np.abs(s - s.T).max(initial=0.0))
    if asym > _SYMMETRY_RTOL_SQRT * scale:
        raise StatsError(f"matrix asymmetry {asym:.3e} exceeds tolerance")
    s = 0.5 * (s + s.T)
    eigvals, eigvecs = np.linalg.eigh(s)
    norm = float(np.abs(eigvals).max(initial=0.0))
    if float(eigvals.min(initial=0.0)) < -_PSD_RTOL * norm:
        raise NotPSDError(
            f"eigenvalue {eigvals.min():.6e} below PSD tolerance {-_PSD_RTOL * norm:.6e}"
        )
    eigvals = np.where(eigvals < _ZERO_RTOL * norm, 0.0, eigvals)
    root = (eigvecs * np.sqrt(eigvals)) @ eigvecs.T
    return 0.5 * (root + root.T)


def _trace_sqrt_product(cov_a: np.ndarray, cov_b: np.ndarray) -> float:
    root_a = sqrt_psd(cov_a)
    inner = root_a @ cov_b @ root_a
    return float(np.trace(sqrt_psd(0.5 * (inner + inner.T))))


def frechet_distance(a: FeatureStats, b: FeatureStats) -> float:
    """Frechet distance between the Gaussian summaries ``a`` and ``b``.

    Rank-deficient covariances that fail the PSD check are retried once
    with a small identity bump on both covariances. Tiny negative results
    (numerical noise) are clamped to zero; anything more negative raises.
    """
    if a.dim != b.dim:
        raise DimensionMismatchError(a.dim, b.dim)
    dmu = a.mean - b.mean
    mean_term = float(dmu @ dmu)
    cov_a, cov_b = a.cov, b.cov
    try:
        cross = _trace_sqrt_product(cov_a, cov_b)
    except NotPSDError:
        eps_a = _REGULARIZE_EPS * float(np.trace(cov_a)) / a.dim
        eps_b = _REGULARIZE_EPS * float(np.trace(cov_b)) / b.dim
        eye = np.eye(a.dim)
        cov_a = cov_a + eps_a * eye
        cov_b = cov_b + eps_b * eye
        cross = _trace_sqrt_product(cov_a, cov_b)
    trace_a = float(np.trace(cov_a))
    trace_b = float(np.trace(cov_b))
    value = mean_term + trace_a + trace_b - 2.0 * cross
    if value < 0.0:
        # scale-aware reading of the near-zero clamp: eigensolver noise is
        # relative to the magnitude of the traces involved
        clamp = _NEGATIVE_CLAMP_RTOL * (1.0 + mean_term + trace_a + trace_b)
        if value >= -clamp:
            return 0.0
        raise StatsError(f"negative distance {value:.6e} beyond numerical tolerance")
    return value


# ---------------------------------------------------------------------------
# file formats


def _write_header(f, magic: bytes, header: dict) -> None:
    f.write(magic)
    f.write(json.dumps(header, separators=(",", ":")).encode("ascii"))
    f.write(b"\n")


def _read_header(f, magic: bytes, path) -> dict:
    got = f.read(len(magic))
    if got != magic:
        raise FormatError(f"{path}: unrecognized format (expected {magic[:-1].decode()} magic)")
    line = f.readline(4096)
    if not line.endswith(b"\n"):
        raise FormatError(f"{path}: truncated or overlong header")
    try:
        header = json.loads(line.decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: malformed header: {exc}") from exc
    if not isinstance(header, dict) or header.get("dtype") != "f64":
        raise FormatError(f"{path}: unsupported header {header!r}")
    return header


def _read_payload(f, count: int, path) -> np.ndarray:
    raw = f.read(count * 8)
    if len(raw) < count * 8:
        raise FormatError(f"{path}: truncated payload ({len(raw)} of {count * 8} bytes)")
    if f.read(1):
        raise FormatError(f"{path}: trailing data after payload")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64)


def _header_int(header: dict, key: str, path) -> int:
    v = header.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise FormatError(f"{path}: header field {key!r} must be a non-negative integer")
    return v


def write_feature_matrix(features, path) -> None:
    x = _as_feature_matrix(features)
    n, d = x.shape
    with open(path, "wb") as f:
        _write_header(f, FMATX_MAGIC, {"rows": n, "dim": d, "dtype": "f64"})
        f.write(np.ascontiguousarray(x, dtype="<f8").tobytes())


def read_feature_matrix(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = _read_header(f, FMATX_MAGIC, path)
        n = _header_int(header, "rows", path)
        d = _header_int(header, "dim", path)
        if n < 1 or d < 1:
            raise FormatError(f"{path}: rows/dim inconsistency ({n}x{d})")
        data = _read_payload(f, n * d, path)
    return _as_feature_matrix(data.reshape(n, d))


def write_stats(stats: FeatureStats, path) -> None:
    with open(path, "wb") as f:
        _write_header(f, FSTAT_MAGIC, {"dim": stats.dim, "count": stats.count, "dtype": "f64"})
        f.write(np.ascontiguousarray(stats.mean, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(stats.cov, dtype="<f8").tobytes())


def read_stats(path) -> FeatureStats:
    with open(path, "rb") as f:
        header = _read_header(f, FSTAT_MAGIC, path)
        d = _header_int(header, "dim", path)
        n = _header_int(header, "count", path)
        if d < 1 or n < 2:
            raise FormatError(f"{path}: dim/count inconsistency (dim={d}, count={n})")
        data = _read_payload(f, d + d * d, path)
    try:
        return FeatureStats(dim=d, count=n, mean=data[:d], cov=data[d:].reshape(d, d))
    except StatsError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def sniff_format(path) -> str:
    """Identify a statistics file on disk: "fmatx", "fstat", or "unknown"."""
    size = len(FMATX_MAGIC)
    with open(path, "rb") as f:
        head = f.read(size)
    if head == FMATX_MAGIC:
        return "fmatx"
    if head == FSTAT_MAGIC:
        return "fstat"
    return "unknown"


def stats_from_file(path) -> FeatureStats:
    """Read either format, accumulating a feature matrix into statistics."""
    kind = sniff_format(path)
    if kind == "fstat":
        return read_stats(path)
    if kind == "fmatx":
        return accumulate_stats(read_feature_matrix(path))
    raise FormatError(f"{path}: unrecognized format")
