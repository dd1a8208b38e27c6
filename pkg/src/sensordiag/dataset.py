"""Time-series ingestion, standardization, and lag embedding.

The raw input is an ``m x n`` matrix: one row per sample instant, one column
per physical sensor. Standardization brings every column to zero mean and
unit (sample) variance using statistics fitted on training data only. For
dynamic modelling, consecutive samples are stacked into a lag-extended
vector ``[x(k), x(k-1), ..., x(k-d)]`` of width ``n*(d+1)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CsvParseError, DimensionMismatch, LagTooLarge, ZeroVarianceColumn

__all__ = [
    "RawDataset",
    "ScalerParams",
    "LagSpec",
    "ScaledDataset",
    "fit_scaler",
    "apply_scaler",
    "inverse_scaler",
    "embed_lags",
    "read_raw_csv",
    "write_raw_csv",
]


@dataclass(frozen=True)
class RawDataset:
    """Multivariate time series in physical units.

    Attributes
    ----------
    samples : ndarray, shape (m, n)
        One row per sample, one column per sensor. All values finite.
    sensor_names : tuple of str
        Unique column labels, length n.
    sample_period_s : float
        Seconds between consecutive rows.
    """

    samples: np.ndarray
    sensor_names: tuple[str, ...]
    sample_period_s: float = 0.1

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2:
            raise ValueError(f"samples must be 2-D, got shape {samples.shape}")
        m, n = samples.shape
        if m < 2:
            raise ValueError(f"need at least 2 samples, got {m}")
        if n < 1:
            raise ValueError("need at least 1 sensor column")
        if not np.isfinite(samples).all():
            raise ValueError("samples contain non-finite values")
        names = tuple(str(s) for s in self.sensor_names)
        if len(names) != n:
            raise ValueError(f"{len(names)} sensor names for {n} columns")
        if len(set(names)) != n:
            raise ValueError("sensor names must be unique")
        if not (self.sample_period_s > 0):
            raise ValueError("sample_period_s must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sensor_names", names)

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class ScalerParams:
    """Per-column mean and sample standard deviation (ddof=1)."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        std = np.asarray(self.std, dtype=float)
        if mean.ndim != 1 or std.ndim != 1 or mean.shape != std.shape:
            raise ValueError("mean and std must be 1-D vectors of equal length")
        if not (np.isfinite(mean).all() and np.isfinite(std).all()):
            raise ValueError("scaler parameters must be finite")
        if (std <= 0).any():
            raise ValueError("every std component must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def __len__(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class LagSpec:
    """Number of delayed sample blocks appended to each observation."""

    d: int = 0

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or self.d < 0:
            raise ValueError(f"lag depth must be a non-negative integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))


@dataclass(frozen=True)
class ScaledDataset:
    """Standardized samples together with the scaler that produced them.

    After :func:`embed_lags` the columns are the lag-extended variables; the
    scaler is then the per-column statistics of the extended layout and
    ``lag_depth`` records the embedding depth (0 for plain data).
    """

    samples: np.ndarray
    scaler: ScalerParams
    sensor_names: tuple[str, ...]
    sample_period_s: float = 0.1
    lag_depth: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2:
            raise ValueError("samples must be 2-D")
        if samples.shape[1] != len(self.scaler):
            raise ValueError("scaler length does not match column count")
        names = tuple(str(s) for s in self.sensor_names)
        if len(names) != samples.shape[1]:
            raise ValueError("one name per column required")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sensor_names", names)

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def n_columns(self) -> int:
        return self.samples.shape[1]

    @property
    def n_base(self) -> int:
        """Physical sensor count, before lag extension."""
        return self.samples.shape[1] // (self.lag_depth + 1)

    @property
    def base_sensor_names(self) -> tuple[str, ...]:
        """Physical sensor labels (lag suffixes stripped)."""
        if self.lag_depth == 0:
            return self.sensor_names
        return tuple(
            name.rsplit("@lag", 1)[0] for name in self.sensor_names[: self.n_base]
        )


def fit_scaler(data: RawDataset) -> ScalerParams:
    """Fit per-column mean and sample standard deviation on training data.

    Raises
    ------
    ZeroVarianceColumn
        If any column is constant relative to its own magnitude; a dead
        sensor invalidates a correlation-based model and must be handled
        upstream rather than epsilon-scaled away.
    """
    x = data.samples
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=1)
    floor = 1e-12 * np.maximum(1.0, np.abs(mean))
    dead = np.nonzero(std < floor)[0]
    if dead.size:
        raise ZeroVarianceColumn(data.sensor_names[int(dead[0])])
    return ScalerParams(mean=mean, std=std)


def apply_scaler(data: RawDataset, scaler: ScalerParams) -> ScaledDataset:
    """Standardize ``data`` column-wise: ``(x - mean) / std``."""
    if data.n != len(scaler):
        raise DimensionMismatch(
            f"data has {data.n} columns but scaler expects {len(scaler)}"
        )
    z = (data.samples - scaler.mean) / scaler.std
    return ScaledDataset(
        samples=z,
        scaler=scaler,
        sensor_names=data.sensor_names,
        sample_period_s=data.sample_period_s,
    )


def inverse_scaler(data: ScaledDataset) -> np.ndarray:
    """Map standardized samples back to physical units (``z * std + mean``)."""
    return data.samples * data.scaler.std + data.scaler.mean


def embed_lags(data: ScaledDataset, lags: LagSpec) -> ScaledDataset:
    """Stack each sample with its ``d`` predecessors into one wide row.

    Row ``k`` of the output (0-based, ``k = 0 .. m-d-1``) corresponds to
    source time ``k + d`` and reads ``[x(k+d), x(k+d-1), ..., x(k)]``, i.e.
    lag-0 block first. The output therefore has ``m - d`` rows and
    ``n*(d+1)`` columns; values are copied, never recomputed. Extended
    column names are ``<sensor>@lag<L>``.

    Raises
    ------
    LagTooLarge
        If ``d >= m`` (no row has enough history).
    """
    if data.lag_depth != 0:
        raise ValueError("data is already lag-extended")
    d = lags.d
    m, n = data.samples.shape
    if d >= m:
        raise LagTooLarge(f"lag depth {d} requires more than {m} samples")
    if d == 0:
        return ScaledDataset(
            samples=data.samples.copy(),
            scaler=data.scaler,
            sensor_names=data.sensor_names,
            sample_period_s=data.sample_period_s,
            lag_depth=0,
        )
    out = np.empty((m - d, n * (d + 1)), dtype=data.samples.dtype)
    for lag in range(d + 1):
        out[:, lag * n : (lag + 1) * n] = data.samples[d - lag : m - lag, :]
    names = tuple(
        f"{name}@lag{lag}" for lag in range(d + 1) for name in data.sensor_names
    )
    scaler = ScalerParams(
        mean=np.tile(data.scaler.mean, d + 1),
        std=np.tile(data.scaler.std, d + 1),
    )
    return ScaledDataset(
        samples=out,
        scaler=scaler,
        sensor_names=names,
        sample_period_s=data.sample_period_s,
        lag_depth=d,
    )


def read_raw_csv(path: str | Path, sample_period_s: float = 0.1) -> RawDataset:
    """Read a strict CSV: header row of sensor names, body of finite floats.

    Any missing, empty, or non-finite cell is a hard error; silent repair
    would make experiments irreproducible.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: file is empty") from None
        names = [h.strip() for h in header]
        if any(not h for h in names):
            raise CsvParseError(f"{path}: blank sensor name in header")
        if len(set(names)) != len(names):
            raise CsvParseError(f"{path}: duplicate sensor names in header")
        n = len(names)
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != n:
                raise CsvParseError(
                    f"{path}:{lineno}: expected {n} cells, got {len(row)}"
                )
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise CsvParseError(f"{path}:{lineno}: unparseable cell") from None
            if not all(math.isfinite(v) for v in values):
                raise CsvParseError(f"{path}:{lineno}: non-finite value")
            rows.append(values)
    if len(rows) < 2:
        raise CsvParseError(f"{path}: need at least 2 data rows, got {len(rows)}")
    return RawDataset(
        samples=np.array(rows, dtype=float),
        sensor_names=tuple(names),
        sample_period_s=sample_period_s,
    )


def write_raw_csv(data: RawDataset, path: str | Path) -> None:
    """Write a dataset in the same strict CSV layout ``read_raw_csv`` accepts."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(data.sensor_names)
        for row in data.samples:
            writer.writerow([repr(float(v)) for v in row])
