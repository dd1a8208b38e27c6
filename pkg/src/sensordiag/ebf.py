"""Evidence-based filtering of the per-sample isolation decision.

Each sensor carries an accumulated evidence level. Every sample, the sensor
that won the raw isolation gets a fixed reward added to its evidence and
every other sensor pays a fixed penalty; levels are clamped to a saturation
band so the filter stays reactive. A fault is declared once some sensor's
evidence crosses the decision threshold, and the declared sensor is the
evidence argmax among the exceeders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange

__all__ = ["EbfParams", "EbfState", "ebf_step", "ebf_decide", "ebf_reset", "filter_stream"]

# Makes threshold comparisons follow exact decimal arithmetic: accumulated
# float evidence can land one ulp below an exactly-reachable boundary, and
# reachable levels are never closer to the threshold than the penalty step.
_DECISION_TOL = 1e-12

NO_DECLARATION = -1


@dataclass(frozen=True)
class EbfParams:
    """Accumulator constants. Defaults: reward 0.01, penalty -0.005,
    declaration threshold 0.2, saturation band [0, 1]."""

    reward: float = 0.01
    penalty: float = -0.005
    decision_threshold: float = 0.2
    upper_sat: float = 1.0
    lower_sat: float = 0.0

    def __post_init__(self):
        if not self.reward > 0 > self.penalty:
            raise ValueError("need reward > 0 > penalty")
        if not self.lower_sat < self.decision_threshold <= self.upper_sat:
            raise ValueError("need lower_sat < decision_threshold <= upper_sat")
        if not self.lower_sat <= 0 <= self.upper_sat:
            raise ValueError("saturation band must contain the initial level 0")


@dataclass(frozen=True)
class EbfState:
    """Per-sensor evidence levels after ``k`` filter steps."""

    s: np.ndarray
    k: int = 0

    @classmethod
    def fresh(cls, n_sensors: int) -> "EbfState":
        if n_sensors < 1:
            raise ValueError("need at least one sensor")
        return cls(s=np.zeros(n_sensors), k=0)


def ebf_step(state: EbfState, winner: int, params: EbfParams) -> EbfState:
    """Advance the accumulator by one sample whose raw winner is ``winner``."""
    n = state.s.shape[0]
    if not 0 <= winner < n:
        raise IndexOutOfRange(f"winner {winner} not in [0, {n})")
    g = np.full(n, params.penalty)
    g[winner] = params.reward
    s = np.clip(state.s + g, params.lower_sat, params.upper_sat)
    return EbfState(s=s, k=state.k + 1)


def ebf_decide(state: EbfState, params: EbfParams) -> int | None:
    """Declared sensor, or None while no evidence level reaches the threshold.

    Among sensors at or above the threshold the one with the most evidence
    wins; ties break to the lowest index.
    """
    top = int(np.argmax(state.s))
    if state.s[top] >= params.decision_threshold - _DECISION_TOL:
        return top
    return None


def ebf_reset(state: EbfState) -> EbfState:
    """Zeroed evidence, step counter back to 0."""
    return EbfState.fresh(state.s.shape[0])


def filter_stream(winners, n_sensors: int, params: EbfParams) -> np.ndarray:
    """Run the accumulator over a whole winner stream from a fresh state.

    Returns one declared sensor per input sample, ``NO_DECLARATION`` (-1)
    where no evidence level had crossed the threshold yet. Arithmetic is
    identical to iterating :func:`ebf_step` + :func:`ebf_decide`.
    """
    winners = np.asarray(winners, dtype=int)
    if winners.ndim != 1:
        raise ValueError("winners must be a 1-D stream")
    if winners.size and not ((winners >= 0) & (winners < n_sensors)).all():
        raise IndexOutOfRange("winner stream contains out-of-range sensors")
    s = np.zeros(n_sensors)
    out = np.full(winners.shape[0], NO_DECLARATION, dtype=int)
    thresh = params.decision_threshold - _DECISION_TOL
    for t, w in enumerate(winners):
        g = np.full(n_sensors, params.penalty)
        g[w] = params.reward
        s = np.clip(s + g, params.lower_sat, params.upper_sat)
        top = int(np.argmax(s))
        if s[top] >= thresh:
            out[t] = top
    return out
