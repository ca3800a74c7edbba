"""Pohar Perme nonparametric net survival, the model-free baseline.

The excess cumulative hazard gets an increment at every observed event time,
with each subject weighted by the inverse of their own expected survival, and
a continuous correction subtracting the weighted average population hazard:

    dH_E(t) = sum_i dN_i(t)/S_Pi(t) / sum_i Y_i(t)/S_Pi(t)
            - sum_i Y_i(t) h_Pi(t)/S_Pi(t) / sum_i Y_i(t)/S_Pi(t) dt

Net survival is exp(-H_E). The correction integral is accumulated segment by
segment on the union of all subjects' hazard breakpoints and the observed
times, where every population hazard is constant; the inverse-survival
weights are taken at segment midpoints.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class PPEstimate:
    """Step-function estimate evaluated at the observed event times."""

    times: np.ndarray
    net_survival: np.ndarray
    at_risk: np.ndarray
    max_followup: float

    def evaluate(self, t) -> np.ndarray:
        """Step value at arbitrary times; 1 before the first event."""
        t = np.asarray(t, dtype=float)
        if np.any(t > self.max_followup):
            warnings.warn(
                "evaluating beyond the last observed time; estimate is "
                "truncated there", RuntimeWarning,
            )
        idx = np.searchsorted(self.times, t, side="right") - 1
        vals = np.concatenate(([1.0], self.net_survival))
        return vals[idx + 1]


def pohar_perme(times, events, curves) -> PPEstimate:
    """Compute the estimator for a cohort with matched population curves."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events)
    if times.ndim != 1 or times.size == 0:
        raise DomainError("times must be a nonempty 1-d array")
    if events.shape != times.shape:
        raise DomainError("events must align with times")
    if not np.all((events == 0) | (events == 1)):
        raise DomainError("events must be 0/1")
    if np.any(~np.isfinite(times) | (times < 0)):
        raise DomainError("times must be finite and nonnegative")
    curves = list(curves)
    if len(curves) != times.size:
        raise DomainError("need one population curve per subject")
    events = events.astype(bool)
    max_followup = float(times.max())

    event_times = np.unique(times[events])
    n_events = event_times.size
    if n_events == 0:
        return PPEstimate(event_times, np.empty(0), np.empty(0), max_followup)

    # segment grid: every point where any population hazard can jump, plus
    # the observed times so risk sets are constant within a segment
    pieces = [np.array([0.0]), times]
    for c in curves:
        b = c.breakpoints if hasattr(c, "breakpoints") else c.starts
        pieces.append(b[(b > 0.0) & (b < max_followup)])
    grid = np.unique(np.concatenate(pieces))
    seg_hi = grid[1:]
    mids = (grid[:-1] + grid[1:]) / 2.0
    widths = np.diff(grid)

    num = np.zeros(n_events)       # weighted event counts at event times
    den = np.zeros(n_events)       # weighted risk set at event times
    haz_num = np.zeros(mids.size)  # weighted population hazard per segment
    haz_den = np.zeros(mids.size)  # weighted risk set per segment

    for x, d, curve in zip(times, events, curves):
        k = int(np.searchsorted(seg_hi, x, side="right"))
        if k:
            m = mids[:k]
            w = np.exp(curve.cumulative_hazard(m))
            haz_num[:k] += curve.hazard(m) * w
            haz_den[:k] += w
        j = int(np.searchsorted(event_times, x, side="right"))
        if j:
            den[:j] += np.exp(curve.cumulative_hazard(event_times[:j]))
        if d:
            je = int(np.searchsorted(event_times, x))
            num[je] += np.exp(curve.cumulative_hazard(x))

    with np.errstate(invalid="ignore"):
        seg_incr = np.where(haz_den > 0.0, haz_num / haz_den, 0.0) * widths
    correction = np.cumsum(seg_incr)
    # correction accrued up to each event time: segments ending at or before it
    upto = np.searchsorted(seg_hi, event_times, side="right") - 1
    excess = np.cumsum(num / den) - np.where(upto >= 0, correction[upto], 0.0)
    return PPEstimate(
        times=event_times,
        net_survival=np.exp(-excess),
        at_risk=den,
        max_followup=max_followup,
    )
