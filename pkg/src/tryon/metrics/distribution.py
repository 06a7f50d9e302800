"""Fréchet distance and unbiased kernel distance between feature sets."""

from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError, DimensionError


@dataclass(frozen=True)
class FeatureSet:
    """One feature row per image."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise DimensionError(f"features must be an (n, d) matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ArgumentError("features contain non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def d(self):
        return self.data.shape[1]

    def concat(self, other):
        return FeatureSet(np.concatenate([self.data, other.data], axis=0))


def _as_features(x):
    return x.data if isinstance(x, FeatureSet) else FeatureSet(x).data


def _canonical(a, b):
    """Order two arrays deterministically so both call orders do identical arithmetic."""
    ka = (a.shape, a.tobytes())
    kb = (b.shape, b.tobytes())
    return (b, a) if kb < ka else (a, b)


def _check_pair(a, b, minimum=2):
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"feature widths differ: {a.shape[1]} vs {b.shape[1]}")
    if min(a.shape[0], b.shape[0]) < minimum:
        raise ArgumentError(f"need at least {minimum} samples per set, got {a.shape[0]} and {b.shape[0]}")


def _sqrt_psd(m):
    w, v = np.linalg.eigh((m + m.T) / 2)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def trace_sqrt_product(sigma_a, sigma_b):
    """``Tr((Σa Σb)^{1/2})`` via the symmetric form ``√Σa Σb √Σa``."""
    root = _sqrt_psd(sigma_a)
    inner = root @ sigma_b @ root
    w = np.linalg.eigvalsh((inner + inner.T) / 2)
    return float(np.sqrt(np.clip(w, 0.0, None)).sum())


def fid(a, b):
    """Fréchet distance between Gaussian fits of two feature sets.

    Covariances use the Bessel correction; negative eigenvalues from
    round-off are clamped at zero.
    """
    a, b = _canonical(_as_features(a), _as_features(b))
    _check_pair(a, b)
    mu_a, mu_b = a.mean(0), b.mean(0)
    sa = np.atleast_2d(np.cov(a, rowvar=False, ddof=1))
    sb = np.atleast_2d(np.cov(b, rowvar=False, ddof=1))
    diff = mu_a - mu_b
    value = diff @ diff + np.trace(sa) + np.trace(sb) - 2.0 * trace_sqrt_product(sa, sb)
    return max(float(value), 0.0)


def polynomial_kernel(x, y, degree=3):
    return (x @ y.T / x.shape[1] + 1.0) ** degree


def mmd2_unbiased(x, y, degree=3):
    """Unbiased squared MMD with the polynomial kernel (diagonals excluded)."""
    m, n = x.shape[0], y.shape[0]
    kxx = polynomial_kernel(x, x, degree)
    kyy = polynomial_kernel(y, y, degree)
    kxy = polynomial_kernel(x, y, degree)
    sxx = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    syy = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    return float(sxx + syy - 2.0 * kxy.sum() / (m * n))


def kid(a, b, degree=3, block_size=None):
    """Kernel distance averaged over contiguous blocks.

    Both sets are cut into ``k = min(n_a, n_b) // block_size`` contiguous
    blocks; block ``i`` of one set is compared with block ``i`` of the other.

    Args:
        block_size: rows per block; defaults to ``min(n_a, n_b, 1000)``.

    Returns:
        ``(mean, stderr)``; ``stderr`` is NaN when there is a single block.
    """
    a, b = _canonical(_as_features(a), _as_features(b))
    _check_pair(a, b)
    n = min(a.shape[0], b.shape[0])
    size = min(n, 1000) if block_size is None else int(block_size)
    if size < 2:
        raise ArgumentError(f"block size must be at least 2, got {size}")
    if size > n:
        raise ArgumentError(f"block size {size} exceeds the smaller set ({n} samples)")
    k = n // size
    values = np.array([mmd2_unbiased(a[i * size:(i + 1) * size], b[i * size:(i + 1) * size], degree)
                       for i in range(k)])
    stderr = float(values.std(ddof=1) / np.sqrt(k)) if k > 1 else float("nan")
    return float(values.mean()), stderr
