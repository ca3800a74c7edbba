"""Archimedean copulas linking the disease and other-cause lifetimes.

Three families: Gumbel C(u1,u2) = exp(-[(-ln u1)^theta + (-ln u2)^theta]^(1/theta)),
Clayton C(u1,u2) = (u1^-theta + u2^-theta - 1)^(-1/theta), and the independence
(product) copula. Everything is evaluated in log space so extreme marginals do
not overflow, and near-independence parameter values dispatch to the product
branch outright.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

GUMBEL = "gumbel"
CLAYTON = "clayton"
PRODUCT = "product"
FAMILIES = (GUMBEL, CLAYTON, PRODUCT)

# below these the families are numerically indistinguishable from independence
GUMBEL_INDEP_THETA = 1.0 + 1e-8
CLAYTON_INDEP_THETA = 1e-8

# marginal values are clamped into [U_CLIP, 1 - U_CLIP] before diagonal work
U_CLIP = 1e-12


@dataclass(frozen=True)
class CopulaSpec:
    """A copula family plus its dependence parameter.

    The product family carries no parameter; theta is stored as 0 there.
    """

    family: str
    theta: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(
                f"unknown copula family {self.family!r}; expected one of {FAMILIES}"
            )
        if not np.isfinite(self.theta):
            raise DomainError("theta must be finite")
        if self.family == GUMBEL and self.theta < 1.0:
            raise DomainError("Gumbel requires theta >= 1")
        if self.family == CLAYTON and self.theta <= 0.0:
            raise DomainError("Clayton requires theta > 0")
        if self.family == PRODUCT:
            object.__setattr__(self, "theta", 0.0)

    @property
    def is_product(self) -> bool:
        if self.family == PRODUCT:
            return True
        if self.family == GUMBEL:
            return self.theta <= GUMBEL_INDEP_THETA
        return self.theta <= CLAYTON_INDEP_THETA


def tau_from_theta(spec: CopulaSpec) -> float:
    """Kendall's tau implied by the copula parameter."""
    if spec.family == PRODUCT:
        return 0.0
    if spec.family == GUMBEL:
        return 1.0 - 1.0 / spec.theta
    return spec.theta / (spec.theta + 2.0)


def theta_from_tau(family: str, tau: float) -> CopulaSpec:
    """Invert the tau map; tau = 0 yields the product copula for any family."""
    if family not in FAMILIES:
        raise DomainError(
            f"unknown copula family {family!r}; expected one of {FAMILIES}"
        )
    if not np.isfinite(tau) or tau < 0.0 or tau >= 1.0:
        raise DomainError("tau must lie in [0, 1)")
    if tau == 0.0 or family == PRODUCT:
        if family == PRODUCT and tau != 0.0:
            raise DomainError("product copula only represents tau = 0")
        return CopulaSpec(PRODUCT)
    if family == GUMBEL:
        return CopulaSpec(GUMBEL, 1.0 / (1.0 - tau))
    return CopulaSpec(CLAYTON, 2.0 * tau / (1.0 - tau))


def _check_unit(u, name) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(u) | (u < 0.0) | (u > 1.0)):
        raise DomainError(f"{name} must lie in [0, 1]")
    return u


def copula_cdf(spec: CopulaSpec, u1, u2) -> np.ndarray:
    """C(u1, u2), elementwise; boundary identities hold exactly."""
    u1 = _check_unit(u1, "u1")
    u2 = _check_unit(u2, "u2")
    u1, u2 = np.broadcast_arrays(u1, u2)
    if spec.is_product:
        return u1 * u2
    if spec.family == GUMBEL:
        interior = _gumbel_cdf(u1, u2, spec.theta)
    else:
        interior = _clayton_cdf(u1, u2, spec.theta)
    out = np.where(u1 == 1.0, u2, np.where(u2 == 1.0, u1, interior))
    return np.where((u1 == 0.0) | (u2 == 0.0), 0.0, out)


def _gumbel_log_cdf(u1, u2, theta):
    with np.errstate(divide="ignore", invalid="ignore"):
        lx1 = np.log(-np.log(u1))
        lx2 = np.log(-np.log(u2))
        la = np.logaddexp(theta * lx1, theta * lx2)
        return -np.exp(la / theta)


def _gumbel_cdf(u1, u2, theta):
    return np.exp(_gumbel_log_cdf(u1, u2, theta))


def _clayton_log_sm1(u1, u2, theta):
    """log(u1^-theta + u2^-theta - 1), stable for tiny marginals."""
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.logaddexp(-theta * np.log(u1), -theta * np.log(u2))
        # s >= log 2 on the unit square, so exp(-s) stays below 1/2
        return s + np.log1p(-np.exp(-s))


def _clayton_cdf(u1, u2, theta):
    return np.exp(-_clayton_log_sm1(u1, u2, theta) / theta)


@dataclass(frozen=True)
class DiagonalEval:
    """Joint CDF/density of (T1, T2) at equal coordinates, with components."""

    cdf: np.ndarray
    density: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    f1: np.ndarray
    f2: np.ndarray


def diagonal(spec: CopulaSpec, u1, u2, f1, f2) -> DiagonalEval:
    """Evaluate F(t,t) = C(F1, F2) and its time derivative on the diagonal.

    The density follows from the chain rule,
    f(t,t) = dC/du1 * f1 + dC/du2 * f2, with the copula partials in closed
    form per family. Marginal CDF values are clamped into
    [U_CLIP, 1 - U_CLIP] first so the log-space partials stay finite.
    """
    u1 = np.clip(_check_unit(u1, "u1"), U_CLIP, 1.0 - U_CLIP)
    u2 = np.clip(_check_unit(u2, "u2"), U_CLIP, 1.0 - U_CLIP)
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    if np.any(np.isnan(f1)) or np.any(f1 < 0) or np.any(np.isnan(f2)) or np.any(f2 < 0):
        raise DomainError("marginal densities must be nonnegative")
    u1, u2, f1, f2 = np.broadcast_arrays(u1, u2, f1, f2)

    if spec.is_product:
        return DiagonalEval(u1 * u2, u2 * f1 + u1 * f2, u1, u2, f1, f2)

    theta = spec.theta
    if spec.family == GUMBEL:
        lx1 = np.log(-np.log(u1))
        lx2 = np.log(-np.log(u2))
        la = np.logaddexp(theta * lx1, theta * lx2)
        log_c = -np.exp(la / theta)
        shared = log_c + (1.0 / theta - 1.0) * la
        lp1 = shared + (theta - 1.0) * lx1 - np.log(u1)
        lp2 = shared + (theta - 1.0) * lx2 - np.log(u2)
    else:
        log_sm1 = _clayton_log_sm1(u1, u2, theta)
        log_c = -log_sm1 / theta
        shared = log_c - log_sm1
        lp1 = shared - (theta + 1.0) * np.log(u1)
        lp2 = shared - (theta + 1.0) * np.log(u2)

    density = np.exp(lp1) * f1 + np.exp(lp2) * f2
    return DiagonalEval(np.exp(log_c), density, u1, u2, f1, f2)


def sample_pairs(spec: CopulaSpec, n: int, rng: np.random.Generator):
    """Draw n dependent uniform pairs by the frailty construction.

    Clayton mixes on a gamma frailty; Gumbel on a positive stable one built
    with the Chambers-Mallows-Stuck / Kanter representation. Returns a pair
    of length-n arrays.
    """
    if n < 0:
        raise DomainError("n must be nonnegative")
    if spec.is_product:
        return rng.random(n), rng.random(n)
    if spec.family == CLAYTON:
        theta = spec.theta
        v = rng.gamma(1.0 / theta, 1.0, size=n)
        e1 = rng.exponential(1.0, size=n)
        e2 = rng.exponential(1.0, size=n)
        u1 = np.exp(-np.log1p(e1 / v) / theta)
        u2 = np.exp(-np.log1p(e2 / v) / theta)
        return u1, u2
    # Gumbel: V positive stable with index a = 1/theta, Laplace transform
    # exp(-s^a); U_j = exp(-(E_j / V)^a). Log-space throughout because the
    # Zolotarev exponents blow up as theta -> 1.
    a = 1.0 / spec.theta
    w = rng.uniform(0.0, np.pi, size=n)
    e0 = rng.exponential(1.0, size=n)
    e1 = rng.exponential(1.0, size=n)
    e2 = rng.exponential(1.0, size=n)
    with np.errstate(divide="ignore"):
        log_aw = (
            a / (1.0 - a) * np.log(np.sin(a * w))
            + np.log(np.sin((1.0 - a) * w))
            - np.log(np.sin(w)) / (1.0 - a)
        )
        log_v = (1.0 - a) / a * (log_aw - np.log(e0))
        u1 = np.exp(-np.exp(a * (np.log(e1) - log_v)))
        u2 = np.exp(-np.exp(a * (np.log(e2) - log_v)))
    return u1, u2
