"""Shared fixtures: synthetic life tables, cohort builders, acceptance log.

The synthetic population follows a Gompertz law with a mild calendar trend,

    m(age, year) = 2e-5 * exp(0.095 * age) * exp(-0.004 * (year - 2000))

written out in the HMD period 1x1 life-table text layout. Male rates carry a
constant multiplier so sex mix-ups cannot cancel out in tests.
"""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from netsurv.copulas import sample_pairs
from netsurv.lifetable import SubjectRecord, match_subject, parse_hmd

settings.register_profile(
    "suite", deadline=None, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

MALE_FACTOR = 1.4
TABLE_YEARS = range(1995, 2046)
TABLE_AGES = range(0, 111)


def gompertz_rate(age: int, year: int, sex: str = "F") -> float:
    m = 2e-5 * math.exp(0.095 * age) * math.exp(-0.004 * (year - 2000))
    m *= MALE_FACTOR if sex == "M" else 1.0
    # rounded exactly as written to the fixture files
    return float(f"{m:.8f}")


def hmd_text(sex: str) -> str:
    lines = [
        f"Synthetica, Life tables (period 1x1), {sex}",
        "",
        "  Year          Age         mx       qx    ax      lx     dx     Lx      Tx     ex",
    ]
    for year in TABLE_YEARS:
        for age in TABLE_AGES:
            mx = gompertz_rate(age, year, sex)
            age_s = "110+" if age == 110 else str(age)
            qx = mx / (1.0 + 0.5 * mx)
            lines.append(
                f"  {year}   {age_s:>5}   {mx:.8f}   {qx:.6f}"
                "   0.50   100000   0   0   0   0.0"
            )
    return "\n".join(lines) + "\n"


@pytest.fixture(scope="session")
def hmd_paths(tmp_path_factory):
    """(female path, male path) of the synthetic tables on disk."""
    d = tmp_path_factory.mktemp("tables")
    f = d / "table_f.txt"
    m = d / "table_m.txt"
    f.write_text(hmd_text("F"), encoding="utf-8")
    m.write_text(hmd_text("M"), encoding="utf-8")
    return f, m


@pytest.fixture(scope="session")
def life_tables(hmd_paths):
    """Parsed {sex: LifeTable} for the synthetic population."""
    f, m = hmd_paths
    return {
        "F": parse_hmd(f.read_text(encoding="utf-8"), "F"),
        "M": parse_hmd(m.read_text(encoding="utf-8"), "M"),
    }


def synth_cohort(tables, copula, t1_model, n, seed, age_lo=45.0, age_hi=80.0,
                 horizon=15.0, curve_span=35.0):
    """Simulate a registry cohort against the synthetic tables.

    Disease times come from ``t1_model``, other-cause times from each
    subject's matched population curve through the copula; follow-up is
    administratively cut at ``horizon``. Returns (subjects, curves) with
    curves rebuilt on the observed follow-up as the CLI would.
    """
    rng = np.random.default_rng(seed)
    subjects = []
    for i in range(n):
        age = float(rng.uniform(age_lo, age_hi))
        sex = "F" if rng.uniform() < 0.5 else "M"
        year = float(rng.uniform(2000.0, 2010.0))
        probe = SubjectRecord(id=f"s{i:05d}", age=age, sex=sex, diag_year=year,
                              time=0.0, status=0)
        curve = match_subject(tables[sex], probe, horizon=curve_span)
        u1, u2 = sample_pairs(copula, 1, rng)
        t = min(float(t1_model.quantile(u1[0])), float(curve.quantile(u2[0])))
        time = min(t, horizon)
        status = int(t <= horizon)
        subjects.append(SubjectRecord(id=f"s{i:05d}", age=age, sex=sex,
                                      diag_year=year, time=time, status=status))
    curves = [match_subject(tables[s.sex], s, horizon=max(s.time, 1e-6))
              for s in subjects]
    return subjects, curves


def write_cohort_csv(path, subjects) -> None:
    lines = ["id,age,sex,diag_year,time,status"]
    lines += [f"{s.id},{s.age!r},{s.sex},{s.diag_year!r},{s.time!r},{s.status}"
              for s in subjects]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ------------------------------------------------- acceptance bookkeeping

_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


class AcceptanceLog:
    """Records one verdict per criterion for the terminal summary."""

    def check(self, num: int, label: str, ok: bool, detail: str = ""):
        _ACCEPTANCE[num] = (label, bool(ok), detail)
        assert ok, f"criterion {num} ({label}) failed: {detail}"


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        label, ok, detail = _ACCEPTANCE[num]
        line = f"criterion {num:>2} [{'PASS' if ok else 'FAIL'}] {label}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
