"""Censored all-cause likelihood with a copula-linked latent competing risk.

With T = min(T1, T2), the observable all-cause quantities are

    S_T(t)  = 1 - F1(t) - F2(t) + C(F1(t), F2(t))
    f_T(t)  = f1(t) + f2(t) - f(t,t)

where f(t,t) is the joint density on the diagonal. Each subject contributes
ln f_T at an observed event and ln S_T under censoring. The disease marginal
F1 carries the free parameters; the other-cause marginal F2 is fixed, either
a matched population curve or a known parametric model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .copulas import CopulaSpec, diagonal
from .errors import DegeneracyError, DomainError, ModelInconsistencyError
from .marginals import family_from_name

log = logging.getLogger(__name__)

TIME_FLOOR = 1e-10       # observed times clamped this far from zero
CONTRIB_FLOOR = 1e-300   # likelihood contributions floored before taking logs
FLOOR_LIMIT = 0.01       # flooring beyond this fraction of subjects is an error
DEFAULT_BOUNDS = (1e-6, 1e3)


@dataclass(frozen=True)
class LikelihoodDiagnostics:
    value: float
    n_floored: int
    n_subjects: int

    @property
    def floored_fraction(self) -> float:
        return self.n_floored / self.n_subjects


@dataclass(frozen=True)
class LikelihoodProblem:
    """Immutable data + model wiring for one fit.

    ``background_cdf`` / ``background_pdf`` hold F2 and f2 pre-evaluated at
    each subject's observed time, so a likelihood evaluation only has to
    recompute the disease marginal.
    """

    times: np.ndarray
    events: np.ndarray
    background_cdf: np.ndarray
    background_pdf: np.ndarray
    copula: CopulaSpec
    family: type
    bounds: np.ndarray

    @property
    def n_subjects(self) -> int:
        return self.times.size

    @property
    def n_params(self) -> int:
        return len(self.family.param_names)

    @property
    def n_events(self) -> int:
        return int(self.events.sum())

    def with_copula(self, spec: CopulaSpec) -> "LikelihoodProblem":
        """Same data, different dependence assumption."""
        return replace(self, copula=spec)

    def _check_eta(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        if eta.shape != (self.n_params,):
            raise DomainError(
                f"eta must have {self.n_params} components for {self.family.family}"
            )
        return eta

    def in_bounds(self, eta) -> bool:
        eta = self._check_eta(eta)
        return bool(
            np.all(np.isfinite(eta))
            and np.all(eta >= self.bounds[:, 0])
            and np.all(eta <= self.bounds[:, 1])
        )

    def _pieces(self, eta):
        model = self.family.from_vector(self._check_eta(eta))
        u1 = model.cdf(self.times)
        f1 = model.pdf(self.times)
        d = diagonal(self.copula, u1, self.background_cdf, f1, self.background_pdf)
        surv = 1.0 - d.u1 - d.u2 + d.cdf
        dens = d.f1 + d.f2 - d.density
        return surv, dens

    def all_cause_survival(self, eta) -> np.ndarray:
        """S_T at each observed time; collapse to <= 0 is an error."""
        surv, _ = self._pieces(eta)
        bad = np.flatnonzero(surv <= 0.0)
        if bad.size:
            raise DegeneracyError(
                f"all-cause survival vanished for subject index {bad[0]}"
            )
        return surv

    def all_cause_density(self, eta) -> np.ndarray:
        """f_T at each observed time; rounding-level negatives clip to 0."""
        surv, dens = self._pieces(eta)
        scale = self.background_pdf + np.abs(dens)
        bad = np.flatnonzero(dens < -1e-8 * (scale + 1.0))
        if bad.size:
            raise ModelInconsistencyError(
                f"all-cause density negative beyond rounding for "
                f"{bad.size} subjects (first index {bad[0]})"
            )
        return np.maximum(dens, 0.0)

    def log_likelihood(self, eta) -> float:
        """Sum of censored log contributions; -inf outside the bounds box."""
        return self.log_likelihood_report(eta).value

    def log_likelihood_report(self, eta) -> LikelihoodDiagnostics:
        eta = self._check_eta(eta)
        n = self.n_subjects
        if not self.in_bounds(eta):
            return LikelihoodDiagnostics(-np.inf, 0, n)
        surv, dens = self._pieces(eta)
        contrib = np.where(self.events, dens, surv)
        if not np.all(np.isfinite(contrib)):
            idx = np.flatnonzero(~np.isfinite(contrib))
            log.warning(
                "non-finite likelihood contribution for subject index %d "
                "(eta=%s); returning -inf", idx[0], eta,
            )
            return LikelihoodDiagnostics(-np.inf, n, n)
        n_floored = int(np.count_nonzero(contrib < CONTRIB_FLOOR))
        value = float(np.sum(np.log(np.maximum(contrib, CONTRIB_FLOOR))))
        if not np.isfinite(value):
            value = -np.inf
        return LikelihoodDiagnostics(value, n_floored, n)

    def check_at(self, eta) -> LikelihoodDiagnostics:
        """Post-fit audit: persistent flooring marks a model/data mismatch."""
        rep = self.log_likelihood_report(eta)
        if rep.n_floored > FLOOR_LIMIT * rep.n_subjects:
            raise ModelInconsistencyError(
                f"likelihood floored for {rep.n_floored} of {rep.n_subjects} "
                f"subjects at eta={np.asarray(eta)}"
            )
        return rep


def _default_bounds(n_params: int) -> np.ndarray:
    return np.tile(np.array(DEFAULT_BOUNDS), (n_params, 1))


def _resolve_family(family):
    if isinstance(family, str):
        return family_from_name(family)
    return family


def build_problem(times, events, background, copula: CopulaSpec, family,
                  bounds=None) -> LikelihoodProblem:
    """Assemble a problem from observed data and a fixed other-cause model.

    ``background`` is either one distribution-like applied to every subject
    or a sequence of per-subject curves aligned with ``times``.
    """
    times = np.asarray(times, dtype=float)
    events = np.asarray(events)
    if times.ndim != 1 or times.size == 0:
        raise DomainError("times must be a nonempty 1-d array")
    if events.shape != times.shape:
        raise DomainError("events must align with times")
    if not np.all(np.isfinite(times)) or np.any(times < 0):
        raise DomainError("times must be finite and nonnegative")
    if not np.all((events == 0) | (events == 1)):
        raise DomainError("events must be 0/1")
    events = events.astype(bool)
    times = np.maximum(times, TIME_FLOOR)

    family = _resolve_family(family)
    if hasattr(background, "cdf"):
        bg_cdf = np.asarray(background.cdf(times), dtype=float)
        bg_pdf = np.asarray(background.pdf(times), dtype=float)
    else:
        curves = list(background)
        if len(curves) != times.size:
            raise DomainError("need one background curve per subject")
        bg_cdf = np.array([float(c.cdf(t)) for c, t in zip(curves, times)])
        bg_pdf = np.array([float(c.pdf(t)) for c, t in zip(curves, times)])

    if bounds is None:
        bounds = _default_bounds(len(family.param_names))
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape != (len(family.param_names), 2):
        raise DomainError("bounds must have shape (n_params, 2)")
    if np.any(bounds[:, 0] <= 0) or np.any(bounds[:, 0] >= bounds[:, 1]):
        raise DomainError("bounds must satisfy 0 < low < high")

    return LikelihoodProblem(
        times=times,
        events=events,
        background_cdf=bg_cdf,
        background_pdf=bg_pdf,
        copula=copula,
        family=family,
        bounds=bounds,
    )


def build_problem_from_cohort(subjects, curves, copula: CopulaSpec, family,
                              bounds=None) -> LikelihoodProblem:
    """Registry-data entry point: subjects plus their matched curves."""
    times = np.array([s.time for s in subjects])
    events = np.array([s.status for s in subjects])
    return build_problem(times, events, list(curves), copula, family, bounds)
