"""Parametric lifetime distributions used for disease and background mortality.

Every distribution exposes the same small surface: ``cdf``, ``sf``, ``pdf``,
``log_pdf``, ``log_sf``, ``hazard`` and ``quantile``, all vectorized over
nonnegative times. Log-space variants exist so likelihood code can stay away
from underflow; densities at t = 0 return the exact limit (possibly +inf)
instead of raising, so optimizers see a value they can rank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


def _check_times(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("times must be finite")
    if np.any(t < 0):
        raise DomainError("times must be nonnegative")
    return t


def _check_probs(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p) | (p < 0) | (p > 1)):
        raise DomainError("probabilities must lie in [0, 1]")
    return p


def _positive(ok: bool, what: str):
    if not ok:
        raise DomainError(f"{what} must be positive and finite")


@dataclass(frozen=True)
class Weibull:
    """Weibull lifetime in rate form: F(t) = 1 - exp(-rate * t^shape)."""

    rate: float
    shape: float

    family = "weibull"
    param_names = ("rate", "shape")

    def __post_init__(self):
        _positive(np.isfinite(self.rate) and self.rate > 0, "rate")
        _positive(np.isfinite(self.shape) and self.shape > 0, "shape")

    def log_sf(self, t):
        t = _check_times(t)
        with np.errstate(over="ignore"):
            return -self.rate * t**self.shape

    def sf(self, t):
        return np.exp(self.log_sf(t))

    def cdf(self, t):
        return -np.expm1(self.log_sf(t))

    def log_pdf(self, t):
        t = _check_times(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = (
                np.log(self.rate * self.shape)
                + (self.shape - 1.0) * np.log(t)
                - self.rate * t**self.shape
            )
        if self.shape == 1.0:
            out = np.where(t == 0.0, np.log(self.rate), out)
        return out

    def pdf(self, t):
        # t = 0 limit: +inf for shape < 1, rate for shape == 1, 0 above.
        return np.exp(self.log_pdf(t))

    def hazard(self, t):
        t = _check_times(t)
        with np.errstate(divide="ignore"):
            return self.rate * self.shape * t ** (self.shape - 1.0)

    def quantile(self, p):
        p = _check_probs(p)
        return (-np.log1p(-p) / self.rate) ** (1.0 / self.shape)

    def as_vector(self) -> np.ndarray:
        return np.array([self.rate, self.shape])

    @classmethod
    def from_vector(cls, v) -> "Weibull":
        return cls(float(v[0]), float(v[1]))


@dataclass(frozen=True)
class ExpWeibull:
    """Exponentiated Weibull: F(t) = (1 - exp(-(t/scale)^shape))^power.

    The extra exponent buys non-monotone hazards: bathtub shapes for
    shape > 1 with shape*power < 1, unimodal ones in the mirror case.
    power = 1 recovers the ordinary (scale-form) Weibull.
    """

    scale: float
    shape: float
    power: float

    family = "expweibull"
    param_names = ("scale", "shape", "power")

    def __post_init__(self):
        for name in self.param_names:
            v = getattr(self, name)
            _positive(np.isfinite(v) and v > 0, name)

    def _log_g(self, t):
        """log of the inner Weibull cdf, -inf at t = 0."""
        with np.errstate(over="ignore"):
            x = (t / self.scale) ** self.shape
        with np.errstate(divide="ignore"):
            return np.log(-np.expm1(-x))

    def cdf(self, t):
        t = _check_times(t)
        return np.exp(self.power * self._log_g(t))

    def sf(self, t):
        t = _check_times(t)
        return -np.expm1(self.power * self._log_g(t))

    def log_sf(self, t):
        t = _check_times(t)
        with np.errstate(divide="ignore"):
            return np.log(-np.expm1(self.power * self._log_g(t)))

    def log_pdf(self, t):
        t = _check_times(t)
        with np.errstate(over="ignore"):
            x = (t / self.scale) ** self.shape
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                np.log(self.power * self.shape / self.scale)
                + (self.shape - 1.0) * np.log(t / self.scale)
                - x
                + (self.power - 1.0) * self._log_g(t)
            )
        exponent = self.shape * self.power - 1.0
        if exponent == 0.0:
            out = np.where(t == 0.0, np.log(self.power * self.shape / self.scale), out)
        elif exponent > 0.0:
            out = np.where(t == 0.0, -np.inf, out)
        else:
            out = np.where(t == 0.0, np.inf, out)
        return out

    def pdf(self, t):
        return np.exp(self.log_pdf(t))

    def hazard(self, t):
        return np.exp(self.log_pdf(t) - self.log_sf(t))

    def quantile(self, p):
        """Inverse cdf: scale * (-log(1 - p^(1/power)))^(1/shape)."""
        p = _check_probs(p)
        with np.errstate(divide="ignore"):
            lg = np.log(p) / self.power
            # -log(1 - e^lg) needs both branches: expm1 keeps precision
            # when e^lg is near 1, log1p when it is near 0; one branch
            # alone collapses small quantiles to exactly zero
            inner = np.where(
                lg > -np.log(2.0),
                -np.log(-np.expm1(lg)),
                -np.log1p(-np.exp(lg)),
            )
        return self.scale * inner ** (1.0 / self.shape)

    def as_vector(self) -> np.ndarray:
        return np.array([self.scale, self.shape, self.power])

    @classmethod
    def from_vector(cls, v) -> "ExpWeibull":
        return cls(float(v[0]), float(v[1]), float(v[2]))


@dataclass(frozen=True)
class Exponential:
    """Constant-hazard lifetime, F(t) = 1 - exp(-rate * t)."""

    rate: float

    family = "exponential"
    param_names = ("rate",)

    def __post_init__(self):
        _positive(np.isfinite(self.rate) and self.rate > 0, "rate")

    def log_sf(self, t):
        return -self.rate * _check_times(t)

    def sf(self, t):
        return np.exp(self.log_sf(t))

    def cdf(self, t):
        return -np.expm1(self.log_sf(t))

    def log_pdf(self, t):
        return np.log(self.rate) - self.rate * _check_times(t)

    def pdf(self, t):
        return np.exp(self.log_pdf(t))

    def hazard(self, t):
        return np.full_like(_check_times(t), self.rate)

    def quantile(self, p):
        return -np.log1p(-_check_probs(p)) / self.rate

    def as_vector(self) -> np.ndarray:
        return np.array([self.rate])

    @classmethod
    def from_vector(cls, v) -> "Exponential":
        return cls(float(v[0]))


class PiecewiseExponential:
    """Piecewise-constant-hazard lifetime.

    ``starts`` are segment start times beginning at 0, strictly increasing;
    ``rates[k]`` applies on [starts[k], starts[k+1]) and the last rate extends
    to infinity. The hazard at an exact segment boundary takes the value of
    the segment ending there (left rule); at t = 0 the first rate applies.
    """

    family = "piecewise_exponential"

    def __init__(self, starts, rates):
        starts = np.asarray(starts, dtype=float)
        rates = np.asarray(rates, dtype=float)
        if starts.ndim != 1 or starts.size == 0 or starts[0] != 0.0:
            raise DomainError("starts must be a 1-d array beginning at 0")
        if np.any(np.diff(starts) <= 0):
            raise DomainError("starts must be strictly increasing")
        if rates.shape != starts.shape:
            raise DomainError("rates must align with starts")
        if np.any(~np.isfinite(rates) | (rates < 0)):
            raise DomainError("rates must be finite and nonnegative")
        self.starts = starts
        self.rates = rates
        self._cum = np.concatenate(
            ([0.0], np.cumsum(rates[:-1] * np.diff(starts)))
        )

    def cumulative_hazard(self, t):
        t = _check_times(t)
        idx = np.clip(np.searchsorted(self.starts, t, side="right") - 1, 0, None)
        return self._cum[idx] + self.rates[idx] * (t - self.starts[idx])

    def hazard(self, t):
        t = _check_times(t)
        idx = np.clip(np.searchsorted(self.starts, t, side="left") - 1, 0, None)
        return self.rates[idx]

    def log_sf(self, t):
        return -self.cumulative_hazard(t)

    def sf(self, t):
        return np.exp(self.log_sf(t))

    def cdf(self, t):
        return -np.expm1(self.log_sf(t))

    def log_pdf(self, t):
        with np.errstate(divide="ignore"):
            return np.log(self.hazard(t)) - self.cumulative_hazard(t)

    def pdf(self, t):
        return self.hazard(t) * self.sf(t)

    def quantile(self, p):
        p = _check_probs(p)
        target = -np.log1p(-p)
        idx = np.clip(np.searchsorted(self._cum, target, side="left") - 1, 0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = self.starts[idx] + (target - self._cum[idx]) / self.rates[idx]
        # a zero-rate segment can only be hit when the target sits exactly on
        # its flat stretch; the quantile then is the segment start
        t = np.where(target == self._cum[idx], self.starts[idx], t)
        return t


FAMILIES = {
    cls.family: cls for cls in (Weibull, ExpWeibull, Exponential)
}


def family_from_name(name: str):
    """Look up a fittable family by its tag; piecewise curves are not fittable."""
    try:
        return FAMILIES[name]
    except KeyError:
        raise DomainError(
            f"unknown marginal family {name!r}; expected one of {sorted(FAMILIES)}"
        ) from None
