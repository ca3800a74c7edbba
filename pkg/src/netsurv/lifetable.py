"""Population life tables and their reduction to per-subject hazard curves.

Tables arrive in the HMD period 1x1 text layout: two header lines, then
whitespace-separated columns Year, Age, mx, qx, ax, lx, dx, Lx, Tx, ex (a
stray column-name line or blank lines are tolerated). Only Year, Age and the
central death rate mx are consumed; Age "110+" marks the open terminal group.

Matching walks a subject's follow-up clock, splitting at every integer age
and integer calendar-year crossing, and assigns each segment the mx of the
(year, age) cell active there. The result is a piecewise-constant expected
mortality hazard for that subject.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, DomainError, ParseError
from .marginals import PiecewiseExponential

SEXES = ("F", "M")

COHORT_HEADER = ("id", "age", "sex", "diag_year", "time", "status")


@dataclass(frozen=True)
class SubjectRecord:
    """One registry subject: follow-up starts at diagnosis."""

    id: str
    age: float
    sex: str
    diag_year: float
    time: float
    status: int

    def __post_init__(self):
        if self.sex not in SEXES:
            raise DomainError(f"subject {self.id!r}: sex must be one of {SEXES}")
        if not (np.isfinite(self.age) and self.age >= 0):
            raise DomainError(f"subject {self.id!r}: age must be nonnegative")
        if not (np.isfinite(self.diag_year) and self.diag_year > 0):
            raise DomainError(f"subject {self.id!r}: diag_year must be positive")
        if not (np.isfinite(self.time) and self.time >= 0):
            raise DomainError(f"subject {self.id!r}: follow-up time must be >= 0")
        if self.status not in (0, 1):
            raise DomainError(f"subject {self.id!r}: status must be 0 or 1")
        if self.age + self.time > 130.0:
            raise DomainError(
                f"subject {self.id!r}: age plus follow-up exceeds 130 years"
            )


class LifeTable:
    """Central death rates mx indexed by (calendar year, integer age)."""

    def __init__(self, sex: str, rates: dict):
        if sex not in SEXES:
            raise DomainError(f"sex must be one of {SEXES}")
        self.sex = sex
        self._by_year: dict[int, dict[int, float]] = {}
        for (year, age), mx in rates.items():
            self._by_year.setdefault(year, {})[age] = mx
        self._terminal_age = {y: max(ages) for y, ages in self._by_year.items()}

    @property
    def years(self):
        return sorted(self._by_year)

    def rate(self, year: int, age: int) -> float:
        """mx for a cell; ages beyond the terminal group use its rate."""
        ages = self._by_year.get(year)
        if ages is None:
            raise CoverageError(year, age, self.sex)
        capped = min(age, self._terminal_age[year])
        try:
            return ages[capped]
        except KeyError:
            raise CoverageError(year, age, self.sex) from None


def parse_hmd(text: str, sex: str) -> LifeTable:
    """Parse HMD period 1x1 life-table text for one sex."""
    if sex not in SEXES:
        raise DomainError(f"sex must be one of {SEXES}")
    lines = text.splitlines()
    rates: dict[tuple[int, int], float] = {}
    for lineno, raw in enumerate(lines, start=1):
        if lineno <= 2:
            continue
        fields = raw.split()
        if not fields:
            continue
        if fields[0] == "Year":
            continue
        if len(fields) != 10:
            raise ParseError(
                f"expected 10 whitespace-separated columns, found {len(fields)}",
                line=lineno,
            )
        year_s, age_s, mx_s = fields[0], fields[1], fields[2]
        if "." == year_s or "." == age_s or "." == mx_s:
            raise ParseError("missing value '.' in Year/Age/mx", line=lineno)
        try:
            year = int(year_s)
        except ValueError:
            raise ParseError(f"bad Year field {year_s!r}", line=lineno) from None
        try:
            age = int(age_s[:-1]) if age_s.endswith("+") else int(age_s)
        except ValueError:
            raise ParseError(f"bad Age field {age_s!r}", line=lineno) from None
        try:
            mx = float(mx_s)
        except ValueError:
            raise ParseError(f"bad mx field {mx_s!r}", line=lineno) from None
        if age < 0:
            raise ParseError(f"negative age {age}", line=lineno)
        if not math.isfinite(mx) or mx < 0:
            raise ParseError(f"mx must be finite and nonnegative, got {mx}", line=lineno)
        if (year, age) in rates:
            raise ParseError(f"duplicate entry for year {year}, age {age}", line=lineno)
        rates[(year, age)] = mx
    if not rates:
        raise ParseError("no data rows")
    return LifeTable(sex, rates)


def load_hmd(path, sex: str) -> LifeTable:
    with open(path, "r", encoding="utf-8") as f:
        return parse_hmd(f.read(), sex)


class PopulationCurve(PiecewiseExponential):
    """A subject's expected-mortality hazard on the follow-up clock.

    Inherits the piecewise-exponential machinery; ``breakpoints`` /
    ``hazards`` name the segment structure, and the hazard at an exact
    breakpoint is the left segment's rate.
    """

    def __init__(self, starts, rates, subject_id=None):
        super().__init__(starts, rates)
        self.subject_id = subject_id

    @property
    def breakpoints(self) -> np.ndarray:
        return self.starts

    @property
    def hazards(self) -> np.ndarray:
        return self.rates

    @property
    def cumulative_hazards(self) -> np.ndarray:
        """Cumulative hazard accrued at each breakpoint."""
        return self._cum


def match_subject(table: LifeTable, subject: SubjectRecord, horizon: float) -> PopulationCurve:
    """Build the subject's population hazard curve over [0, horizon].

    Every integer age and integer calendar-year crossing opens a new segment;
    the last segment's rate extends beyond the horizon unchanged.
    """
    if not (np.isfinite(horizon) and horizon > 0):
        raise DomainError("horizon must be positive and finite")
    if subject.sex != table.sex:
        raise DomainError(
            f"subject {subject.id!r} has sex {subject.sex!r}, table covers {table.sex!r}"
        )
    cuts = []
    for origin in (subject.age, subject.diag_year):
        first = math.floor(origin) + 1.0
        k = np.arange(first - origin, horizon, 1.0)
        cuts.append(k[k > 0.0])
    cuts = np.unique(np.concatenate(cuts))
    bounds = np.concatenate(([0.0], cuts, [horizon]))
    mids = (bounds[:-1] + bounds[1:]) / 2.0
    rates = np.array(
        [
            table.rate(math.floor(subject.diag_year + m), math.floor(subject.age + m))
            for m in mids
        ]
    )
    return PopulationCurve(bounds[:-1], rates, subject_id=subject.id)


def cumulative_hazard_to_rates(s_begin: float, s_end: float, width: float) -> float:
    """Constant hazard over an interval from survival values at its ends."""
    if not (0.0 < s_begin <= 1.0 and 0.0 < s_end <= 1.0):
        raise DomainError("survival values must lie in (0, 1]")
    if s_end > s_begin:
        raise DomainError("survival must not increase over the interval")
    if not (np.isfinite(width) and width > 0):
        raise DomainError("width must be positive")
    return (math.log(s_begin) - math.log(s_end)) / width


def read_cohort(source) -> list[SubjectRecord]:
    """Read subjects from cohort CSV (header id,age,sex,diag_year,time,status)."""
    if hasattr(source, "read"):
        return _read_cohort_stream(source)
    with open(source, "r", encoding="utf-8", newline="") as f:
        return _read_cohort_stream(f)


def _read_cohort_stream(f) -> list[SubjectRecord]:
    reader = csv.reader(f)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty cohort file") from None
    if tuple(h.strip() for h in header) != COHORT_HEADER:
        raise ParseError(
            f"cohort header must be {','.join(COHORT_HEADER)}", line=1
        )
    subjects = []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 6:
            raise ParseError(f"expected 6 fields, found {len(row)}", line=lineno)
        sid, age_s, sex, year_s, time_s, status_s = (x.strip() for x in row)
        try:
            age = float(age_s)
            year = float(year_s)
            time = float(time_s)
            status = int(status_s)
        except ValueError as exc:
            raise ParseError(f"bad numeric field ({exc})", line=lineno) from None
        try:
            subjects.append(
                SubjectRecord(sid, age, sex, year, time, status)
            )
        except DomainError as exc:
            raise ParseError(str(exc), line=lineno) from None
    if not subjects:
        raise ParseError("cohort has no subjects")
    return subjects


def write_cohort(path, subjects) -> None:
    """Inverse of read_cohort; used by the simulation tooling and demos."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(COHORT_HEADER)
        for s in subjects:
            w.writerow([s.id, repr(s.age), s.sex, repr(s.diag_year), repr(s.time), s.status])
