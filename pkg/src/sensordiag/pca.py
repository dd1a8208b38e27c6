"""Principal-component model fitting, projections, and persistence.

The model is fitted on standardized (optionally lag-extended) training data:
the sample covariance is eigendecomposed, the leading ``l`` eigenvectors
span the principal subspace and the remainder the residual subspace. ``l``
is the smallest count whose eigenvalues explain at least the requested
variance fraction. The fitted model is the single persisted artifact; it
carries the scaler, both loading blocks, both eigenvalue blocks, and the
empirical control limits for the two detection indices.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .dataset import ScaledDataset, ScalerParams
from .errors import (
    CorruptModelFile,
    DegenerateSpectrum,
    DimensionMismatch,
    EigendecompositionFailure,
    IndexOutOfRange,
    SchemaVersionMismatch,
    SingularLambda,
    UndersampledFit,
)

__all__ = [
    "PcaModel",
    "Projection",
    "covariance",
    "fit_pca",
    "project",
    "save_model",
    "load_model",
    "model_digest",
]

MODEL_SCHEMA_VERSION = 1

# Eigenvalues closer than this (relative to the spectrum top) are treated as
# a repeated block that the principal/residual split must not cut through.
_TIE_RTOL = 1e-9


@dataclass(eq=False)
class PcaModel:
    """Fitted principal/residual subspace decomposition.

    Attributes
    ----------
    p_hat : ndarray, shape (n_e, l)
        Principal loading matrix (leading eigenvectors).
    p_tilde : ndarray, shape (n_e, n_e - l)
        Residual loading matrix (trailing eigenvectors).
    lambda_hat, lambda_tilde : ndarray
        Corresponding eigenvalues, each block sorted descending.
    l : int
        Retained component count.
    n : int
        Physical sensor count; the column space has ``n_e = n * (d + 1)``
        extended variables.
    d : int
        Lag depth the model was fitted with (0 for plain PCA).
    scaler : ScalerParams
        Standardization parameters over the n_e extended columns.
    sensor_names : tuple of str
        The n physical sensor labels.
    spe_limit, t2_limit : float
        Empirical control limits fitted on the training indices.
    alpha : float
        Tail probability used for the control limits.
    variance_fraction : float
        Explained-variance target used to choose ``l``.
    """

    p_hat: np.ndarray
    p_tilde: np.ndarray
    lambda_hat: np.ndarray
    lambda_tilde: np.ndarray
    l: int
    n: int
    d: int
    scaler: ScalerParams
    sensor_names: tuple[str, ...]
    variance_fraction: float
    alpha: float
    spe_limit: float
    t2_limit: float

    def __post_init__(self):
        self.p_hat = np.asarray(self.p_hat, dtype=float).reshape(self.n_e, self.l)
        self.p_tilde = np.asarray(self.p_tilde, dtype=float).reshape(
            self.n_e, self.n_e - self.l
        )
        self.lambda_hat = np.asarray(self.lambda_hat, dtype=float).reshape(self.l)
        self.lambda_tilde = np.asarray(self.lambda_tilde, dtype=float).reshape(
            self.n_e - self.l
        )
        self.sensor_names = tuple(str(s) for s in self.sensor_names)

    @property
    def n_e(self) -> int:
        """Extended variable count ``n * (d + 1)``."""
        return self.n * (self.d + 1)

    @cached_property
    def c_hat(self) -> np.ndarray:
        """Orthogonal projector onto the principal subspace."""
        return self.p_hat @ self.p_hat.T

    @cached_property
    def c_tilde(self) -> np.ndarray:
        """Orthogonal projector onto the residual subspace."""
        return self.p_tilde @ self.p_tilde.T

    @cached_property
    def d_mat(self) -> np.ndarray:
        """Inverse-eigenvalue-weighted principal projector (Mahalanobis kernel)."""
        self._require_invertible_lambda()
        return (self.p_hat / self.lambda_hat) @ self.p_hat.T

    @cached_property
    def d_sqrt(self) -> np.ndarray:
        """Unique PSD square root of :attr:`d_mat`."""
        self._require_invertible_lambda()
        return (self.p_hat / np.sqrt(self.lambda_hat)) @ self.p_hat.T

    def _require_invertible_lambda(self) -> None:
        if self.l == 0 or (self.lambda_hat <= 1e-12).any():
            raise SingularLambda(
                "a retained eigenvalue is numerically zero; the principal-"
                "subspace index is undefined (l reaches into noise eigenvalues)"
            )

    @property
    def base_scaler(self) -> ScalerParams:
        """Scaler restricted to the n physical (lag-0) columns."""
        return ScalerParams(
            mean=self.scaler.mean[: self.n], std=self.scaler.std[: self.n]
        )

    def residual_std(self, sensor: int, physical: bool = True) -> float:
        """Standard deviation of one sensor's residual-subspace component.

        Computed from the fitted spectrum: the residual part of extended
        column ``i`` has variance ``sum_j lambda_tilde[j] * p_tilde[i, j]**2``
        under the training distribution. ``physical=True`` converts back to
        the sensor's engineering units via its scaler std.
        """
        if not 0 <= sensor < self.n:
            raise IndexOutOfRange(f"sensor {sensor} not in [0, {self.n})")
        var = float(np.sum(self.lambda_tilde * self.p_tilde[sensor, :] ** 2))
        std = np.sqrt(max(var, 0.0))
        if physical:
            std *= float(self.scaler.std[sensor])
        return float(std)


@dataclass(frozen=True)
class Projection:
    """Decomposition of one sample into principal and residual parts."""

    x_hat: np.ndarray
    x_tilde: np.ndarray


def covariance(data: ScaledDataset) -> np.ndarray:
    """Sample covariance ``X^T X / (m - 1)`` of standardized data.

    The result is explicitly symmetrized to remove accumulation asymmetry
    from the matrix product.
    """
    x = data.samples
    m = x.shape[0]
    if m < 2:
        raise ValueError("need at least 2 samples for a covariance estimate")
    s = x.T @ x / (m - 1)
    return (s + s.T) / 2.0


def _descending_eigh(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        w, v = np.linalg.eigh(s)
    except np.linalg.LinAlgError as exc:
        raise EigendecompositionFailure(str(exc)) from exc
    w = w[::-1]
    v = v[:, ::-1]
    # Deterministic sign: largest-magnitude entry of each eigenvector positive.
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return w, v * signs


def _component_count(w: np.ndarray, variance_fraction: float) -> int:
    total = float(w.sum())
    if total <= 0:
        raise EigendecompositionFailure("covariance spectrum is entirely zero")
    ratio = np.cumsum(w) / total
    l = int(np.searchsorted(ratio, variance_fraction - 1e-12) + 1)
    l = min(l, w.shape[0])
    # Never split a repeated eigenvalue: the residual projector would not be
    # a function of the data alone. Grow l until a clear gap.
    tie_tol = _TIE_RTOL * max(float(w[0]), 1e-300)
    while l < w.shape[0] and abs(float(w[l - 1]) - float(w[l])) <= tie_tol:
        l += 1
    return l


def fit_pca(
    data: ScaledDataset,
    variance_fraction: float = 0.98,
    alpha: float = 0.01,
) -> PcaModel:
    """Fit the principal/residual decomposition on standardized training data.

    Parameters
    ----------
    data : ScaledDataset
        Standardized (optionally lag-extended) training matrix.
    variance_fraction : float in (0, 1]
        Retain the smallest l whose eigenvalues explain at least this
        fraction of total variance.
    alpha : float in (0, 1)
        Tail probability for the empirical control limits, fitted on the
        training-set index values themselves.
    """
    from .detection import fit_threshold, spe, t2

    if not 0 < variance_fraction <= 1:
        raise ValueError(f"variance_fraction must be in (0, 1], got {variance_fraction}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    x = data.samples
    m, n_e = x.shape
    if m <= n_e:
        warnings.warn(
            f"only {m} samples for {n_e} extended variables; covariance is "
            "rank-deficient and trailing eigenvalues are meaningless",
            UndersampledFit,
            stacklevel=2,
        )
    s = covariance(data)
    w, v = _descending_eigh(s)
    if (w < 1e-12).any():
        warnings.warn(
            "trailing eigenvalues are numerically zero (rank-deficient data)",
            DegenerateSpectrum,
            stacklevel=2,
        )
    w = np.maximum(w, 0.0)
    l = _component_count(w, variance_fraction)

    model = PcaModel(
        p_hat=v[:, :l],
        p_tilde=v[:, l:],
        lambda_hat=w[:l],
        lambda_tilde=w[l:],
        l=l,
        n=data.n_base,
        d=data.lag_depth,
        scaler=data.scaler,
        sensor_names=data.base_sensor_names,
        variance_fraction=float(variance_fraction),
        alpha=float(alpha),
        spe_limit=np.nan,
        t2_limit=np.nan,
    )
    model.spe_limit = float(fit_threshold(spe(model, x), alpha))
    model.t2_limit = float(fit_threshold(t2(model, x), alpha))
    return model


def project(model: PcaModel, x: np.ndarray) -> Projection:
    """Split a standardized sample into principal and residual parts."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_e,):
        raise DimensionMismatch(
            f"expected a vector of length {model.n_e}, got shape {x.shape}"
        )
    return Projection(x_hat=model.c_hat @ x, x_tilde=model.c_tilde @ x)


def _model_payload(model: PcaModel) -> dict:
    return {
        "schema_version": MODEL_SCHEMA_VERSION,
        "n": model.n,
        "d": model.d,
        "l": model.l,
        "alpha": model.alpha,
        "variance_fraction": model.variance_fraction,
        "sensor_names": list(model.sensor_names),
        "scaler": {
            "mean": model.scaler.mean.tolist(),
            "std": model.scaler.std.tolist(),
        },
        "p_hat": model.p_hat.tolist(),
        "p_tilde": model.p_tilde.tolist(),
        "lambda_hat": model.lambda_hat.tolist(),
        "lambda_tilde": model.lambda_tilde.tolist(),
        "spe_limit": model.spe_limit,
        "t2_limit": model.t2_limit,
    }


def save_model(model: PcaModel, path: str | Path) -> None:
    """Serialize the model to JSON; floats round-trip exactly."""
    Path(path).write_text(
        json.dumps(_model_payload(model), indent=1) + "\n", encoding="utf-8"
    )


_REQUIRED_KEYS = {
    "schema_version",
    "n",
    "d",
    "l",
    "alpha",
    "variance_fraction",
    "sensor_names",
    "scaler",
    "p_hat",
    "p_tilde",
    "lambda_hat",
    "lambda_tilde",
    "spe_limit",
    "t2_limit",
}


def load_model(path: str | Path) -> PcaModel:
    """Load a model saved by :func:`save_model`, validating shape consistency."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptModelFile(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise CorruptModelFile(f"{path}: top-level JSON object expected")
    version = raw.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"{path}: schema version {version!r}, expected {MODEL_SCHEMA_VERSION}"
        )
    missing = _REQUIRED_KEYS - raw.keys()
    if missing:
        raise CorruptModelFile(f"{path}: missing keys {sorted(missing)}")
    unknown = raw.keys() - _REQUIRED_KEYS
    if unknown:
        raise CorruptModelFile(f"{path}: unknown keys {sorted(unknown)}")
    try:
        n, d, l = int(raw["n"]), int(raw["d"]), int(raw["l"])
        n_e = n * (d + 1)
        scaler = ScalerParams(
            mean=np.asarray(raw["scaler"]["mean"], dtype=float),
            std=np.asarray(raw["scaler"]["std"], dtype=float),
        )
        p_hat = np.asarray(raw["p_hat"], dtype=float).reshape(n_e, l)
        p_tilde = np.asarray(raw["p_tilde"], dtype=float).reshape(n_e, n_e - l)
        model = PcaModel(
            p_hat=p_hat,
            p_tilde=p_tilde,
            lambda_hat=np.asarray(raw["lambda_hat"], dtype=float),
            lambda_tilde=np.asarray(raw["lambda_tilde"], dtype=float),
            l=l,
            n=n,
            d=d,
            scaler=scaler,
            sensor_names=tuple(raw["sensor_names"]),
            variance_fraction=float(raw["variance_fraction"]),
            alpha=float(raw["alpha"]),
            spe_limit=float(raw["spe_limit"]),
            t2_limit=float(raw["t2_limit"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModelFile(f"{path}: {exc}") from exc
    if len(scaler) != n_e or len(model.sensor_names) != n:
        raise CorruptModelFile(f"{path}: inconsistent dimensions")
    for arr in (model.p_hat, model.p_tilde, model.lambda_hat, model.lambda_tilde):
        if not np.isfinite(arr).all():
            raise CorruptModelFile(f"{path}: non-finite model values")
    return model


def model_digest(model: PcaModel) -> str:
    """Stable content hash of the serialized model (for report provenance)."""
    blob = json.dumps(_model_payload(model), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()
