"""Per-sensor fault attribution and amplitude reconstruction.

Two families of per-sensor scores decompose a detection alarm:

* contribution scores square the sensor-direction component of the index
  kernel applied to the sample;
* reconstruction-based scores measure how much of the index an optimal
  single-sensor correction along that direction removes. For a fault lying
  exactly on a candidate direction, the reconstruction-based score of the
  true sensor provably dominates every other sensor's score (a
  Cauchy-Schwarz argument in the kernel inner product), which plain
  contributions do not guarantee.

For a lag-extended model, a steady additive bias on one sensor displaces
every lagged copy of that sensor equally, so the candidate direction of
sensor ``i`` is the unnormalized sum of the unit vectors of all its lag
copies. With that choice the reconstructed amplitude of a steady fault is
the physical bias itself (after unscaling); during the first ``d`` samples
after onset the window is only partially displaced and scores are
transient.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from .errors import DegenerateDirection, DimensionMismatch, IndexOutOfRange

if TYPE_CHECKING:
    from .pca import PcaModel

__all__ = [
    "ContributionMethod",
    "DetectionIndex",
    "IsolationMethod",
    "ContributionVector",
    "FaultEstimate",
    "direction",
    "direction_matrix",
    "contributions",
    "contribution_matrix",
    "isolate",
    "estimate_fault",
    "estimate_matrix",
    "reconstruct",
]

_DEGENERATE_TOL = 1e-12


class ContributionMethod(str, Enum):
    """How a detection index is attributed to individual sensors."""

    CP = "cp"
    RBC = "rbc"


class DetectionIndex(str, Enum):
    """Which quadratic index the attribution decomposes."""

    SPE = "spe"
    T2 = "t2"


@dataclass(frozen=True)
class IsolationMethod:
    """One of the four (method, index) attribution variants."""

    method: ContributionMethod
    index: DetectionIndex

    def __str__(self) -> str:
        return f"{self.method.value}/{self.index.value}"


@dataclass(frozen=True)
class ContributionVector:
    """Per-sensor scores for one sample under one attribution variant.

    ``winner`` is the argmax sensor, lowest index on ties.
    """

    values: np.ndarray
    method_tag: IsolationMethod
    winner: int


@dataclass(frozen=True)
class FaultEstimate:
    """Reconstructed single-sensor fault amplitude.

    ``amplitude_scaled`` is in standardized units; ``amplitude`` converts to
    the sensor's physical units via its (lag-0) scaler std.
    """

    sensor: int
    amplitude: float
    amplitude_scaled: float


def direction(model: "PcaModel", sensor: int) -> np.ndarray:
    """Candidate fault direction of a physical sensor in extended space.

    For ``d > 0`` the direction has a 1 at every lag copy of the sensor
    (positions ``sensor + L*n`` for ``L = 0..d``); for a plain model it is
    the ``sensor``-th column of the identity.
    """
    if not 0 <= sensor < model.n:
        raise IndexOutOfRange(f"sensor {sensor} not in [0, {model.n})")
    u = np.zeros(model.n_e)
    u[sensor :: model.n] = 1.0
    return u


def direction_matrix(model: "PcaModel") -> np.ndarray:
    """All candidate directions stacked as columns, shape (n_e, n)."""
    return np.tile(np.eye(model.n), (model.d + 1, 1))


def _kernel(model: "PcaModel", tag: IsolationMethod) -> np.ndarray:
    """Matrix whose sensor-direction components are squared into scores."""
    if tag.index is DetectionIndex.SPE:
        return model.c_tilde
    if tag.method is ContributionMethod.CP:
        return model.d_sqrt
    return model.d_mat


def _rbc_denominators(model: "PcaModel", kernel: np.ndarray, what: str) -> np.ndarray:
    u = direction_matrix(model)
    dens = np.einsum("ji,jk,ki->i", u, kernel, u)
    bad = np.nonzero(dens < _DEGENERATE_TOL)[0]
    if bad.size:
        raise DegenerateDirection(int(bad[0]), what)
    return dens


def _lag_aggregate(model: "PcaModel", v: np.ndarray) -> np.ndarray:
    """Sum each sensor's lag-copy components: rows (m, n_e) -> (m, n)."""
    m = v.shape[0]
    return v.reshape(m, model.d + 1, model.n).sum(axis=1)


def contribution_matrix(
    model: "PcaModel", x: np.ndarray, tag: IsolationMethod
) -> np.ndarray:
    """Per-sensor scores for a batch of standardized row vectors.

    Returns an (m, n) array; each row is the score vector of one sample.
    """
    x = np.asarray(x, dtype=float)
    rows = x[None, :] if x.ndim == 1 else x
    if rows.ndim != 2 or rows.shape[1] != model.n_e:
        raise DimensionMismatch(
            f"expected vectors of length {model.n_e}, got shape {x.shape}"
        )
    kernel = _kernel(model, tag)
    agg = _lag_aggregate(model, rows @ kernel)
    scores = agg**2
    if tag.method is ContributionMethod.RBC:
        scores = scores / _rbc_denominators(model, kernel, str(tag))
    return scores


def contributions(
    model: "PcaModel", x: np.ndarray, method_tag: IsolationMethod
) -> ContributionVector:
    """Score every sensor for one sample and pick the argmax winner."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("contributions expects a single sample vector")
    values = contribution_matrix(model, x, method_tag)[0]
    return ContributionVector(
        values=values, method_tag=method_tag, winner=int(np.argmax(values))
    )


def isolate(model: "PcaModel", x: np.ndarray, method_tag: IsolationMethod) -> int:
    """Sensor index with the largest score (lowest index on ties)."""
    return contributions(model, x, method_tag).winner


def _estimate_kernel(model: "PcaModel", index: DetectionIndex) -> np.ndarray:
    return model.c_tilde if index is DetectionIndex.SPE else model.d_mat


def estimate_matrix(
    model: "PcaModel",
    x: np.ndarray,
    sensor: int,
    index: DetectionIndex = DetectionIndex.SPE,
) -> np.ndarray:
    """Standardized fault amplitudes along one sensor for a batch of rows."""
    x = np.asarray(x, dtype=float)
    rows = x[None, :] if x.ndim == 1 else x
    if rows.ndim != 2 or rows.shape[1] != model.n_e:
        raise DimensionMismatch(
            f"expected vectors of length {model.n_e}, got shape {x.shape}"
        )
    u = direction(model, sensor)
    kernel = _estimate_kernel(model, index)
    ku = kernel @ u
    den = float(u @ ku)
    if den < _DEGENERATE_TOL:
        raise DegenerateDirection(sensor, f"amplitude estimation ({index.value})")
    return rows @ ku / den


def estimate_fault(
    model: "PcaModel",
    x: np.ndarray,
    sensor: int,
    index: DetectionIndex = DetectionIndex.SPE,
) -> FaultEstimate:
    """Optimal additive fault amplitude along one sensor's direction.

    The estimate minimizes the chosen index after subtracting
    ``amplitude_scaled * direction`` from the sample; it is linear in the
    sample, so a steady bias plus fault-free background decomposes exactly.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("estimate_fault expects a single sample vector")
    f = float(estimate_matrix(model, x, sensor, index)[0])
    return FaultEstimate(
        sensor=sensor,
        amplitude=f * float(model.scaler.std[sensor]),
        amplitude_scaled=f,
    )


def reconstruct(
    model: "PcaModel",
    x: np.ndarray,
    sensor: int,
    index: DetectionIndex = DetectionIndex.SPE,
) -> np.ndarray:
    """Sample with the optimal single-sensor correction removed.

    The corrected sample never scores a larger index value than the input;
    equality holds exactly when the sample has no component along the
    sensor's direction in the index kernel.
    """
    x = np.asarray(x, dtype=float)
    est = estimate_fault(model, x, sensor, index)
    return x - direction(model, sensor) * est.amplitude_scaled
