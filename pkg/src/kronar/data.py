"""Time-series ingestion, preprocessing and covariance-lag statistics."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal

from .spectral import FreqGrid, PseudoPoly, SpectralField, evaluate

__all__ = [
    "DataError",
    "Series",
    "CovLags",
    "load_series",
    "save_series",
    "aggregate",
    "normalize_detrend",
    "stack",
    "covariance_lags",
    "truncated_periodogram",
    "toeplitz_check",
    "block_toeplitz",
]

logger = logging.getLogger(__name__)


class DataError(ValueError):
    """Malformed or unusable input data."""


@dataclass
class Series:
    """N x m real samples, one row per time instant."""

    data: np.ndarray
    names: list[str] | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim == 1:
            self.data = self.data[:, None]
        if self.data.ndim != 2:
            raise DataError("series data must be two-dimensional")
        if not np.all(np.isfinite(self.data)):
            r, c = np.argwhere(~np.isfinite(self.data))[0]
            raise DataError(f"non-finite value at row {r}, column {c}")
        if self.names is not None and len(self.names) != self.m:
            raise DataError(f"{len(self.names)} channel names for {self.m} channels")

    @property
    def N(self) -> int:
        return self.data.shape[0]

    @property
    def m(self) -> int:
        return self.data.shape[1]


@dataclass
class CovLags:
    """Sample covariance lags R_0..R_n, shape (n+1, m, m), from N samples."""

    R: np.ndarray
    N: int

    @property
    def n(self) -> int:
        return self.R.shape[0] - 1

    @property
    def m(self) -> int:
        return self.R.shape[1]


_MISSING = {"", "na", "nan", "null", "none", "-"}


def load_series(path, delimiter: str = ",", header: bool | None = None, columns=None) -> Series:
    """Read a delimited text file into a :class:`Series`.

    ``header=None`` sniffs the first row: it is a header if any field fails to
    parse as a float. ``columns`` selects channels by index or by header name.
    Missing-value tokens are rejected with the offending line number.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [(i + 1, row) for i, row in enumerate(csv.reader(fh, delimiter=delimiter))]
    rows = [(ln, [c.strip() for c in row]) for ln, row in rows if any(c.strip() for c in row)]
    if not rows:
        raise DataError(f"{path}: empty file")

    names = None
    if header is None:
        header = not all(_is_number(c) for c in rows[0][1])
    if header:
        names = rows[0][1]
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")

    width = len(rows[0][1])
    data = np.empty((len(rows), width))
    for i, (ln, row) in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: line {ln} has {len(row)} fields, expected {width}")
        for c, cell in enumerate(row):
            if cell.lower() in _MISSING:
                raise DataError(f"{path}: missing value at line {ln}, column {c + 1}")
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric value {cell!r} at line {ln}, column {c + 1}") from None
            if not np.isfinite(v):
                raise DataError(f"{path}: non-finite value {cell!r} at line {ln}, column {c + 1}")
            data[i, c] = v

    if columns is not None:
        idx = []
        for col in columns:
            if isinstance(col, str) and not col.lstrip("-").isdigit():
                if names is None or col not in names:
                    raise DataError(f"{path}: unknown column {col!r}")
                idx.append(names.index(col))
            else:
                idx.append(int(col))
        data = data[:, idx]
        if names is not None:
            names = [names[i] for i in idx]
    return Series(data, names)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def save_series(s: Series, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if s.names is not None:
            w.writerow(s.names)
        for row in s.data:
            w.writerow([repr(float(v)) for v in row])


def aggregate(s: Series, window: int) -> Series:
    """Means over non-overlapping windows; a trailing partial window is dropped."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if s.N < window:
        raise DataError(f"series of length {s.N} shorter than window {window}")
    N = s.N // window
    if s.N % window:
        logger.info("aggregate: dropping %d trailing rows", s.N % window)
    blocks = s.data[: N * window].reshape(N, window, s.m)
    return Series(blocks.mean(axis=1), s.names)


def normalize_detrend(
    s: Series, unit_variance: bool = True, remove_mean: bool = True, linear_detrend: bool = True
) -> Series:
    """Per channel: subtract the mean, then a least-squares line, then scale to unit sample variance."""
    if s.N < 2:
        raise DataError("need at least two samples")
    x = s.data.copy()
    if remove_mean:
        x -= x.mean(axis=0)
    if linear_detrend:
        x = signal.detrend(x, axis=0, type="linear")
    if unit_variance:
        sd = x.std(axis=0, ddof=1)
        bad = np.flatnonzero(sd <= 1e-12 * max(1.0, np.abs(s.data).max()))
        if bad.size:
            raise DataError(f"channel {bad[0]} has zero variance; cannot normalize")
        x /= sd
    return Series(x, s.names)


def stack(s: Series, m1: int) -> Series:
    """Stack ``m1`` consecutive samples into one: y(t) = [x(t m1)^T ... x(t m1 + m1 - 1)^T]^T."""
    if m1 < 1:
        raise ValueError("m1 must be >= 1")
    if s.N < m1:
        raise DataError(f"series of length {s.N} shorter than stacking factor {m1}")
    N = s.N // m1
    if s.N % m1:
        logger.info("stack: dropping %d trailing rows", s.N % m1)
    names = None
    if s.names is not None:
        names = [f"{nm}@{h}" for h in range(m1) for nm in s.names]
    return Series(s.data[: N * m1].reshape(N, m1 * s.m), names)


def covariance_lags(s: Series | np.ndarray, n: int) -> CovLags:
    """R_s = 1/(N-n) sum_{t=1}^{N-s} y(t) y(t+s)^T for s = 0..n."""
    y = s.data if isinstance(s, Series) else np.asarray(s, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    N, m = y.shape
    if N <= n:
        raise DataError(f"need more than n={n} samples, got {N}")
    R = np.empty((n + 1, m, m))
    for lag in range(n + 1):
        R[lag] = y[: N - lag].T @ y[lag:]
    R /= N - n
    R[0] = 0.5 * (R[0] + R[0].T)
    return CovLags(R, N)


def lag_poly(lags: CovLags) -> PseudoPoly:
    """The truncated periodogram as a pseudo-polynomial (S_0 = R_0, S_s = 2 R_s)."""
    S = lags.R.copy()
    S[1:] *= 2.0
    return PseudoPoly(S)


def truncated_periodogram(lags: CovLags, grid: FreqGrid) -> SpectralField:
    """R_0 + sum_{s=1}^n (R_s exp(-i s theta) + R_s^T exp(i s theta))."""
    return evaluate(lag_poly(lags), grid)


def block_toeplitz(R: np.ndarray) -> np.ndarray:
    """Symmetric block-Toeplitz matrix with first block row [R_0 R_1 ... R_n]."""
    n1, m, _ = R.shape
    T = np.empty((n1 * m, n1 * m))
    for i in range(n1):
        for j in range(n1):
            blk = R[j - i] if j >= i else R[i - j].T
            T[i * m:(i + 1) * m, j * m:(j + 1) * m] = blk
    return T


def toeplitz_check(lags: CovLags) -> tuple[float, bool]:
    """Minimum eigenvalue of the block-Toeplitz lag matrix and whether it is positive definite."""
    lam = float(np.linalg.eigvalsh(block_toeplitz(lags.R)).min())
    return lam, lam > 0
