"""Command-line front end.

Subcommands: ``fit`` (net survival at a fixed dependence), ``sensitivity``
(tau sweep, optionally by age band), ``compare`` (parametric independence fit
against Pohar Perme), and ``simulate`` (Monte-Carlo study from a config
file). Primary outputs are CSV files with raw doubles plus a presentation
text table (survival x 1e-2, SE x 1e-3) and a key=value run manifest.

Exit codes: 2 parse/argument error, 3 life-table coverage gap,
4 optimization/calibration failure.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .copulas import FAMILIES as COPULA_FAMILIES
from .copulas import theta_from_tau
from .errors import (
    CalibrationError,
    CoverageError,
    DegeneracyError,
    DomainError,
    FitError,
    ModelInconsistencyError,
    ParseError,
    StudyError,
)
from .inference import DEFAULT_STARTS, fit, net_survival, sensitivity_sweep
from .lifetable import load_hmd, match_subject, read_cohort
from .likelihood import build_problem_from_cohort
from .marginals import FAMILIES as MARGINAL_FAMILIES
from .marginals import family_from_name
from .pohar_perme import pohar_perme
from .simulate import (
    SimulationConfig,
    expand_grid,
    run_misspecification_study,
    run_study,
)

AGE_BANDS = (
    ("15-44", 15.0, 45.0),
    ("45-54", 45.0, 55.0),
    ("55-64", 55.0, 65.0),
    ("65-74", 65.0, 75.0),
    ("75-99", 75.0, 100.0),
)

DEFAULT_TIMES = "2,5,10,15"


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CoverageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FitError, CalibrationError, StudyError, ModelInconsistencyError,
            DegeneracyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="netsurv",
        description="net survival under copula-linked other-cause mortality",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, times=True):
        sp.add_argument("--seed", type=int, default=0, help="RNG seed")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker cap; outputs do not depend on it")
        sp.add_argument("--out-dir", required=True, help="output directory")
        if times:
            sp.add_argument("--times", default=DEFAULT_TIMES,
                            help="comma-separated report times in years")

    def cohort_args(sp):
        sp.add_argument("cohort", help="cohort CSV (id,age,sex,diag_year,time,status)")
        sp.add_argument("--table-f", help="HMD 1x1 period life table, females")
        sp.add_argument("--table-m", help="HMD 1x1 period life table, males")
        sp.add_argument("--family", default="weibull",
                        choices=sorted(MARGINAL_FAMILIES),
                        help="disease marginal family")
        sp.add_argument("--starts", type=int, default=DEFAULT_STARTS,
                        help="optimizer multi-start count")

    sp = sub.add_parser("fit", help="net survival at one dependence level")
    cohort_args(sp)
    sp.add_argument("--copula", default="gumbel", choices=sorted(COPULA_FAMILIES))
    sp.add_argument("--tau", type=float, default=0.0, help="assumed Kendall tau")
    common(sp)
    sp.set_defaults(handler=cmd_fit)

    sp = sub.add_parser("sensitivity", help="sweep assumed Kendall tau")
    cohort_args(sp)
    sp.add_argument("--copula", default="gumbel", choices=sorted(COPULA_FAMILIES))
    sp.add_argument("--taus", default="0,0.25,0.5,0.75",
                    help="comma-separated tau values")
    sp.add_argument("--by-age-groups", action="store_true",
                    help="also stratify by the standard age bands")
    common(sp)
    sp.set_defaults(handler=cmd_sensitivity)

    sp = sub.add_parser("compare", help="independence fit vs Pohar Perme")
    cohort_args(sp)
    common(sp)
    sp.set_defaults(handler=cmd_compare)

    sp = sub.add_parser("simulate", help="Monte-Carlo study from a config file")
    sp.add_argument("config", help="study config (INI key=value sections)")
    sp.add_argument("--seed", type=int, default=None,
                    help="override the config seed")
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(handler=cmd_simulate)
    return p


# ---------------------------------------------------------------- helpers

def _cell(v) -> str:
    """One CSV cell: repr of a python float, so values round-trip exactly."""
    return repr(float(v))


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise ParseError(f"bad {what} list {text!r}") from None
    if not vals:
        raise ParseError(f"{what} list is empty")
    if any(not np.isfinite(v) or v < 0 for v in vals):
        raise ParseError(f"{what} values must be finite and nonnegative")
    return vals


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _ensure_out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8")


def _manifest(out: Path, entries: list[tuple[str, object]]):
    lines = [f"{k}={v}" for k, v in entries]
    _write(out / "manifest.txt", "\n".join(lines) + "\n")


def _load_tables(args, subjects):
    sexes = {s.sex for s in subjects}
    tables = {}
    if "F" in sexes:
        if not args.table_f:
            raise DomainError("cohort contains female subjects; --table-f required")
        tables["F"] = load_hmd(args.table_f, "F")
    if "M" in sexes:
        if not args.table_m:
            raise DomainError("cohort contains male subjects; --table-m required")
        tables["M"] = load_hmd(args.table_m, "M")
    return tables


def _match_all(tables, subjects):
    return [
        match_subject(tables[s.sex], s, horizon=max(s.time, 1e-6))
        for s in subjects
    ]


def _fmt_scaled_row(t, surv, se) -> str:
    return f"{t:>8.3g}{100.0 * surv:>10.1f}{1000.0 * se:>10.2f}"


def _input_entries(args) -> list[tuple[str, object]]:
    entries = [("cohort", args.cohort), ("cohort_sha256", _sha256(args.cohort))]
    for key, path in (("table_f", args.table_f), ("table_m", args.table_m)):
        if path:
            entries.append((key, path))
            entries.append((f"{key}_sha256", _sha256(path)))
    return entries


def _age_band(age: float) -> str:
    for label, lo, hi in AGE_BANDS:
        if lo <= age < hi:
            return label
    raise DomainError(
        f"age {age} falls outside the age bands "
        f"{AGE_BANDS[0][0]} .. {AGE_BANDS[-1][0]}"
    )


# ------------------------------------------------------------ subcommands

def cmd_fit(args) -> int:
    t_start = time.perf_counter()
    out = _ensure_out_dir(args)
    times = _parse_floats(args.times, "times")
    subjects = read_cohort(args.cohort)
    tables = _load_tables(args, subjects)
    curves = _match_all(tables, subjects)
    spec = theta_from_tau(args.copula, args.tau)
    problem = build_problem_from_cohort(subjects, curves, spec, args.family)
    result = fit(problem, starts=args.starts, rng=np.random.default_rng(args.seed))
    est = net_survival(problem, result, times)

    csv_lines = ["t,S_T1,SE"]
    for t, s, se in zip(est.times, est.survival, est.std_err):
        csv_lines.append(",".join(_cell(v) for v in (t, s, se)))
    _write(out / "fit.csv", "\n".join(csv_lines) + "\n")

    text = [
        f"net survival, {args.copula} copula, tau={args.tau:g} "
        f"(survival x 1e-2, SE x 1e-3)",
        f"{'t':>8}{'S_T1':>10}{'SE':>10}",
    ]
    text += [_fmt_scaled_row(t, s, se)
             for t, s, se in zip(est.times, est.survival, est.std_err)]
    report = "\n".join(text) + "\n"
    _write(out / "fit.txt", report)
    print(report, end="")

    eta = ",".join(_cell(v) for v in result.eta_hat)
    _manifest(out, [
        ("subcommand", "fit"),
        ("version", __version__),
        *_input_entries(args),
        ("family", args.family),
        ("copula", args.copula),
        ("tau", args.tau),
        ("times", args.times),
        ("starts", args.starts),
        ("seed", args.seed),
        ("threads", args.threads),
        ("n_subjects", problem.n_subjects),
        ("n_events", problem.n_events),
        ("eta_hat", eta),
        ("loglik", _cell(result.loglik)),
        ("converged", result.converged),
        ("duration_seconds", f"{time.perf_counter() - t_start:.3f}"),
    ])
    return 0


def _sweep_stratum(task):
    """Worker: one stratum's full tau sweep (picklable payload)."""
    label, problem, family, taus, times, starts, seed = task
    entries = sensitivity_sweep(problem, family, taus, times,
                                starts=starts, seed=seed)
    return label, entries


def cmd_sensitivity(args) -> int:
    t_start = time.perf_counter()
    out = _ensure_out_dir(args)
    times = _parse_floats(args.times, "times")
    taus = _parse_floats(args.taus, "taus")
    for tau in taus:
        theta_from_tau(args.copula, tau)  # validate against the family early
    subjects = read_cohort(args.cohort)
    tables = _load_tables(args, subjects)
    curves = _match_all(tables, subjects)

    strata = [("all", list(range(len(subjects))))]
    if args.by_age_groups:
        by_band = {label: [] for label, _, _ in AGE_BANDS}
        for i, s in enumerate(subjects):
            by_band[_age_band(s.age)].append(i)
        strata += [(label, idx) for label, _, _ in AGE_BANDS
                   for idx in [by_band[label]]]

    tasks = []
    for k, (label, idx) in enumerate(strata):
        if not idx:
            continue
        sub = [subjects[i] for i in idx]
        cur = [curves[i] for i in idx]
        spec = theta_from_tau(args.copula, taus[0])
        problem = build_problem_from_cohort(sub, cur, spec, args.family)
        child_seed = int(np.random.SeedSequence([args.seed, k]).generate_state(1)[0])
        tasks.append((label, problem, args.copula, taus, times,
                      args.starts, child_seed))

    if args.threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as ex:
            swept = list(ex.map(_sweep_stratum, tasks))
    else:
        swept = [_sweep_stratum(t) for t in tasks]
    results = dict(swept)

    counts = {label: len(idx) for label, idx in strata}
    csv_lines = ["age_group,tau,t,S_T1,SE"]
    text = [
        f"tau sweep, {args.copula} copula (survival x 1e-2, SE x 1e-3)",
        f"{'group':>8}{'tau':>8}{'t':>8}{'S_T1':>10}{'SE':>10}",
    ]
    for label, idx in strata:
        if not idx:
            print(f"warning: age band {label} is empty; emitting NA rows",
                  file=sys.stderr)
            for tau in taus:
                for t in times:
                    csv_lines.append(f"{label},{_cell(tau)},{_cell(t)},NA,NA")
            continue
        for entry in results[label]:
            if entry.error is not None:
                print(f"warning: stratum {label} tau={entry.tau:g} failed: "
                      f"{entry.error}", file=sys.stderr)
                for t in times:
                    csv_lines.append(f"{label},{_cell(entry.tau)},{_cell(t)},NA,NA")
                continue
            est = entry.estimate
            for t, s, se in zip(est.times, est.survival, est.std_err):
                csv_lines.append(f"{label},{_cell(entry.tau)},{_cell(t)},{_cell(s)},{_cell(se)}")
                text.append(f"{label:>8}{entry.tau:>8.2f}" + _fmt_scaled_row(t, s, se))
    _write(out / "sensitivity.csv", "\n".join(csv_lines) + "\n")

    # plot-ready per-tau curves for the whole cohort
    grid = np.linspace(0.0, max(times), 101)
    for entry in results["all"]:
        if entry.error is not None:
            continue
        model = family_from_name(args.family).from_vector(entry.fit.eta_hat)
        surv = np.asarray(model.sf(grid), dtype=float)
        lines = ["t,S_T1"]
        lines += [f"{_cell(t)},{_cell(s)}" for t, s in zip(grid, surv)]
        _write(out / f"curve_tau{entry.tau:g}.csv", "\n".join(lines) + "\n")

    report = "\n".join(text) + "\n"
    _write(out / "sensitivity.txt", report)
    print(report, end="")

    _manifest(out, [
        ("subcommand", "sensitivity"),
        ("version", __version__),
        *_input_entries(args),
        ("family", args.family),
        ("copula", args.copula),
        ("taus", args.taus),
        ("times", args.times),
        ("by_age_groups", args.by_age_groups),
        ("starts", args.starts),
        ("seed", args.seed),
        ("threads", args.threads),
        *[(f"stratum_{label}", counts[label]) for label, _ in strata],
        ("duration_seconds", f"{time.perf_counter() - t_start:.3f}"),
    ])
    return 0


def cmd_compare(args) -> int:
    t_start = time.perf_counter()
    out = _ensure_out_dir(args)
    times = _parse_floats(args.times, "times")
    subjects = read_cohort(args.cohort)
    tables = _load_tables(args, subjects)
    curves = _match_all(tables, subjects)

    x = np.array([s.time for s in subjects])
    d = np.array([s.status for s in subjects])
    pp = pohar_perme(x, d, curves)
    pp_vals = pp.evaluate(times)

    problem = build_problem_from_cohort(
        subjects, curves, theta_from_tau("product", 0.0), args.family
    )
    result = fit(problem, starts=args.starts, rng=np.random.default_rng(args.seed))
    est = net_survival(problem, result, times)
    diff = np.abs(pp_vals - est.survival)

    csv_lines = ["t,PP,S_T1,SE,abs_diff"]
    for t, p_, s, se, dd in zip(times, pp_vals, est.survival, est.std_err, diff):
        csv_lines.append(",".join(_cell(v) for v in (t, p_, s, se, dd)))
    _write(out / "compare.csv", "\n".join(csv_lines) + "\n")

    text = [
        "independence fit vs Pohar Perme (values x 1e-2, SE x 1e-3)",
        f"{'t':>8}{'PP':>10}{'S_T1':>10}{'SE':>10}{'|diff|':>10}",
    ]
    for t, p_, s, se, dd in zip(times, pp_vals, est.survival, est.std_err, diff):
        text.append(f"{t:>8.3g}{100 * p_:>10.1f}{100 * s:>10.1f}"
                    f"{1000 * se:>10.2f}{100 * dd:>10.2f}")
    report = "\n".join(text) + "\n"
    _write(out / "compare.txt", report)
    print(report, end="")

    _manifest(out, [
        ("subcommand", "compare"),
        ("version", __version__),
        *_input_entries(args),
        ("family", args.family),
        ("times", args.times),
        ("starts", args.starts),
        ("seed", args.seed),
        ("threads", args.threads),
        ("n_subjects", problem.n_subjects),
        ("n_events", problem.n_events),
        ("duration_seconds", f"{time.perf_counter() - t_start:.3f}"),
    ])
    return 0


# ------------------------------------------------------- simulate command

_STUDY_KEYS = {
    "mode", "tau", "taus", "n", "sizes", "replications", "copula",
    "censoring", "estimate", "fit_family", "starts", "seed",
    "calibration_draws",
}


def _parse_marginal(cp: configparser.ConfigParser, section: str):
    if not cp.has_section(section):
        raise ParseError(f"config missing [{section}] section")
    opts = dict(cp.items(section))
    family = opts.pop("family", None)
    if family is None:
        raise ParseError(f"[{section}] needs a family key")
    cls = family_from_name(family)
    values = []
    for name in cls.param_names:
        if name not in opts:
            raise ParseError(f"[{section}] missing {name} for family {family}")
        try:
            values.append(float(opts.pop(name)))
        except ValueError:
            raise ParseError(f"[{section}] {name} must be a number") from None
    if opts:
        raise ParseError(f"[{section}] has unknown keys: {sorted(opts)}")
    return cls(*values)


def parse_study_config(path):
    """Read an INI study config into (base SimulationConfig, taus, sizes, mode)."""
    cp = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as f:
            cp.read_file(f)
    except (OSError, configparser.Error) as exc:
        raise ParseError(f"cannot read study config {path}: {exc}") from None
    if not cp.has_section("study"):
        raise ParseError("config missing [study] section")
    study = dict(cp.items("study"))
    unknown = set(study) - _STUDY_KEYS
    if unknown:
        raise ParseError(f"[study] has unknown keys: {sorted(unknown)}")

    def take(key, default=None):
        return study.get(key, default)

    mode = take("mode", "params")
    if mode not in ("params", "misspecification"):
        raise ParseError("mode must be 'params' or 'misspecification'")
    taus_text = take("taus", take("tau", "0"))
    sizes_text = take("sizes", take("n", None))
    if sizes_text is None:
        raise ParseError("[study] needs n or sizes")
    try:
        taus = [float(v) for v in str(taus_text).split(",")]
        sizes = [int(v) for v in str(sizes_text).split(",")]
        replications = int(take("replications", "1"))
        censoring = float(take("censoring", "0.1"))
        starts = int(take("starts", "8"))
        seed = int(take("seed", "0"))
        calibration_draws = int(take("calibration_draws", "100000"))
    except ValueError as exc:
        raise ParseError(f"bad numeric value in [study]: {exc}") from None

    base = SimulationConfig(
        n=sizes[0],
        replications=replications,
        copula_family=take("copula", "gumbel"),
        tau=taus[0],
        t1_model=_parse_marginal(cp, "t1"),
        t2_model=_parse_marginal(cp, "t2"),
        censor_target=censoring,
        seed=seed,
        fit_family=take("fit_family", "weibull"),
        estimate_which=take("estimate", "T1"),
        starts=starts,
        calibration_draws=calibration_draws,
    )
    extra = set(cp.sections()) - {"study", "t1", "t2"}
    if extra:
        raise ParseError(f"unknown config sections: {sorted(extra)}")
    return base, taus, sizes, mode


def cmd_simulate(args) -> int:
    t_start = time.perf_counter()
    out = _ensure_out_dir(args)
    base, taus, sizes, mode = parse_study_config(args.config)
    if args.seed is not None:
        base = replace(base, seed=args.seed)
    base = replace(base, threads=args.threads)

    cells = expand_grid(base, taus, sizes)
    labels = [f"tau{tau:g}_n{n}" for tau in taus for n in sizes]
    texts = []
    manifest_rows: list[tuple[str, object]] = [
        ("subcommand", "simulate"),
        ("version", __version__),
        ("config", args.config),
        ("config_sha256", _sha256(args.config)),
        ("mode", mode),
        ("seed", base.seed),
        ("threads", args.threads),
        ("replications", base.replications),
    ]
    try:
        for label, cell in zip(labels, cells):
            if mode == "params":
                report = run_study(cell)
                _write(out / f"params_{label}.csv", report.params_csv())
            else:
                report = run_misspecification_study(cell)
                _write(out / f"quantiles_{label}.csv", report.quantiles_csv())
            texts.append(f"[{label}]\n{report.text()}")
            manifest_rows.append((f"cell_{label}_gamma", repr(report.gamma)))
            manifest_rows.append((f"cell_{label}_failed", report.n_failed))
    except (CalibrationError, StudyError) as exc:
        # keep whatever cells finished; record the failure and bail out
        _write(out / "report.txt", "\n".join(texts))
        manifest_rows.append(("error", str(exc)))
        _manifest(out, manifest_rows)
        print(f"error: {exc}", file=sys.stderr)
        return 4

    report_text = "\n".join(texts)
    _write(out / "report.txt", report_text)
    print(report_text, end="" if report_text.endswith("\n") else "\n")
    manifest_rows.append(
        ("duration_seconds", f"{time.perf_counter() - t_start:.3f}")
    )
    _manifest(out, manifest_rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
