"""pssclock CLI: batch runner for clock simulations and limit-theorem checks."""

from __future__ import annotations

import argparse
import gettext
import locale
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from pssclock import __version__
from pssclock.config import FAMILY_SEPARATOR, RunConfig, load_config
from pssclock.errors import (
    ClockError,
    ConfigError,
    DomainError,
    FamilySpecError,
    InvalidParameterError,
    NoSamplerError,
    PreconditionError,
)
from pssclock.levy import REPRESENTATIVE_SPECS, LevyFamily, cumulants, fmt_number, parse_family_spec
from pssclock.report import covariance_rows, csv_text, emit_report, json_text, summary

TEXTDOMAIN = "pssclock"
LOCALEDIR = "/usr/share/locale"
try:
    locale.bindtextdomain(TEXTDOMAIN, LOCALEDIR)
    locale.textdomain(TEXTDOMAIN)
except AttributeError:
    pass
_ = gettext.gettext

logger = logging.getLogger(__name__)

USAGE_ERRORS = (FamilySpecError, ConfigError, InvalidParameterError, PreconditionError, DomainError, NoSamplerError)

_DEFAULT_FAMILIES = {
    "cumulants": REPRESENTATIVE_SPECS,
    "iinf-check": REPRESENTATIVE_SPECS[:5],
    "mellin-check": REPRESENTATIVE_SPECS[:5],
    "ergodicity": REPRESENTATIVE_SPECS,
}
_CONFIG_DESTS = (
    "families", "regime", "a", "log_t", "n", "t_grid", "lln_log_t", "times", "seed", "workers",
    "dt", "draws", "ks_draws", "C", "output", "format", "dump_paths", "bias_allowance",
)


def _output(data, as_json=False, quiet=False):
    """Output data as JSON or human-readable text."""
    if as_json:
        print(json_text(data), end="")
    elif not quiet:
        if isinstance(data, str):
            print(data, end="" if data.endswith("\n") else "\n")
        elif isinstance(data, list):
            for line in data:
                print(line)


def _fail(args, exc: Exception, code: int) -> int:
    if getattr(args, "json", False):
        _output({"error": str(exc)}, as_json=True)
    else:
        print(_("error: {message}").format(message=exc), file=sys.stderr)
    return code


def _families(cfg: RunConfig) -> list[tuple[LevyFamily, float]]:
    specs = cfg.families or _DEFAULT_FAMILIES.get(cfg.command, ("bessel(nu=1)",))
    return [parse_family_spec(spec) for spec in specs]


def _single_family(cfg: RunConfig) -> tuple[LevyFamily, float]:
    families = _families(cfg)
    if len(families) != 1:
        raise ConfigError(_("{command} takes exactly one --family").format(command=cfg.command))
    return families[0]


def _rng(cfg: RunConfig, index: int) -> np.random.Generator:
    from pssclock.checkers.clt import replica_rng
    return replica_rng(cfg.seed, index)


def _finish(args, cfg: RunConfig, name: str, header: list[str], rows: list[dict], passed: bool,
            started: float, extra_tables=None, **extra) -> int:
    data = summary(cfg, passed, time.perf_counter() - started, **extra)
    if cfg.output:
        emit_report(name, header, rows, data, cfg.output, cfg.format, extra_tables)
    if args.json:
        _output({**data, "rows": rows}, as_json=True)
    elif not args.quiet:
        _output(csv_text(header, rows))
        verdict = _("PASS") if passed else _("FAIL")
        print(_("{name}: {verdict} (seed {seed})").format(name=name, verdict=verdict, seed=cfg.seed),
              file=sys.stderr)
    return 0 if passed else 1


def _cmd_cumulants(args, cfg: RunConfig) -> int:
    """p, σ² and v² per family."""
    started = time.perf_counter()
    rows, lines = [], []
    for family, alpha in _families(cfg):
        c = cumulants(family, alpha)
        tab_sigma2, tab_v2 = family.tabulated_values(alpha)
        rows.append({"family": family.name, "alpha": alpha, "p": c.p, "sigma2": c.sigma2, "v2": c.v2,
                     "tabulated_sigma2": tab_sigma2, "tabulated_v2": tab_v2})
        line = (f"{family.name},{fmt_number(alpha)},p={fmt_number(c.p)},"
                f"sigma2={fmt_number(c.sigma2)},v2={fmt_number(c.v2)}")
        if args.tabulated:
            line += f",tabulated_sigma2={fmt_number(tab_sigma2)},tabulated_v2={fmt_number(tab_v2)}"
        lines.append(line)
    header = ["family", "alpha", "p", "sigma2", "v2", "tabulated_sigma2", "tabulated_v2"]
    data = summary(cfg, True, time.perf_counter() - started)
    if cfg.output:
        emit_report("cumulants", header, rows, data, cfg.output, cfg.format)
    if args.json:
        _output({**data, "rows": rows}, as_json=True)
    else:
        _output(lines, quiet=args.quiet)
    return 0


def _cmd_iinf_check(args, cfg: RunConfig) -> int:
    """𝔼[I∞⁻¹] = αp and closed-form vs truncated-integral KS."""
    from pssclock.expfunc import iinf_check
    started = time.perf_counter()
    rows, passed = [], True
    for index, (family, alpha) in enumerate(_families(cfg)):
        check = iinf_check(family, alpha, cfg.draws, _rng(cfg, index), cfg.ks_draws, cfg.dt)
        passed = passed and check.passed
        rows.append({"family": check.family, "alpha": check.alpha, "n": check.n,
                     "mean_inv_Iinf": check.mean_inv_iinf, "alpha_p": check.alpha_p, "se": check.se,
                     "ks_p_closed_vs_mc": check.ks_p_closed_vs_mc})
    header = ["family", "alpha", "n", "mean_inv_Iinf", "alpha_p", "se", "ks_p_closed_vs_mc"]
    return _finish(args, cfg, "iinf_check", header, rows, passed, started)


def _cmd_mellin_check(args, cfg: RunConfig) -> int:
    """Mellin recursion residuals and the Mellin route to v²."""
    from pssclock.checkers.mellin import MellinChecker
    started = time.perf_counter()
    rows, routes, passed = [], [], True
    for index, (family, alpha) in enumerate(_families(cfg)):
        checker = MellinChecker(family, alpha, _rng(cfg, index), cfg.draws, prefer_mc=args.mc)
        report = checker.check()
        passed = passed and report.passed
        rows.extend({"family": r.family, "z": r.z, "residual": r.residual, "tolerance": r.tolerance,
                     "pass": r.passed} for r in report.rows)
        routes.append({"family": family.name, "alpha": alpha, "provenance": report.provenance,
                       "v2_mellin": report.v2_mellin, "v2_mellin_se": report.v2_mellin_se,
                       "v2_cumulants": report.v2_cumulants, "normalization_residual": report.normalization,
                       "pass": report.passed})
    header = ["family", "z", "residual", "tolerance", "pass"]
    return _finish(args, cfg, "mellin_check", header, rows, passed, started, v2_routes=routes)


def _cmd_ergodicity(args, cfg: RunConfig) -> int:
    """Drift-criterion verdict per family."""
    from pssclock.checkers.ergodicity import ErgodicityChecker
    started = time.perf_counter()
    checker = ErgodicityChecker(cfg.C)
    rows, verified = [], []
    for family, alpha in _families(cfg):
        verdict = checker.classify(family, alpha)
        consts = verdict.constants
        rows.append({"family": family.name, "alpha": alpha, "verdict": verdict.classification,
                     "witness_m": verdict.witness_m,
                     "C": consts.C if consts else None,
                     "K": consts.K if consts else None,
                     "D": consts.D if consts else None})
        verified.append({"family": family.spec(), "verified": verdict.verified})
    header = ["family", "alpha", "verdict", "witness_m", "C", "K", "D"]
    passed = all(v["verified"] is not False for v in verified)
    return _finish(args, cfg, "ergodicity", header, rows, passed, started, lyapunov=verified)


def _cmd_lln(args, cfg: RunConfig) -> int:
    """clock(T)/log T along one path."""
    from pssclock.checkers.clt import lln_check
    started = time.perf_counter()
    family, alpha = _single_family(cfg)
    report = lln_check(family, alpha, cfg.a, cfg.lln_log_t, cfg.seed, cfg.dt)
    rows = [{"log_t": L, "ratio": r, "target": report.target, "deviation": d, "bound": report.bound}
            for L, r, d in zip(report.log_t, report.ratios, report.deviations)]
    header = ["log_t", "ratio", "target", "deviation", "bound"]
    return _finish(args, cfg, "lln", header, rows, report.passed, started)


def _experiment(cfg: RunConfig, t_grid: tuple[float, ...]):
    from pssclock.checkers.clt import ExperimentConfig, run_experiment
    family, alpha = _single_family(cfg)
    exp = ExperimentConfig(family=family, alpha=alpha, log_t=cfg.log_t, replicas=cfg.n, seed=cfg.seed,
                           regime=cfg.regime, a=cfg.a, t_grid=t_grid, dt=cfg.dt, workers=cfg.workers)
    return exp, run_experiment(exp)


def _cmd_clt(args, cfg: RunConfig) -> int:
    """Marginal CLT for W_T(1)."""
    from pssclock.checkers.clt import clt_test
    started = time.perf_counter()
    exp, paths = _experiment(cfg, (1.0,))
    report = clt_test(paths[:, 0], exp.v2, cfg.log_t)
    header = ["t", "mean", "var", "se", "target", "pass"]
    return _finish(args, cfg, "clt", header, report.rows(), report.passed, started,
                   ks_stat=report.ks_stat, ks_p=report.ks_p, v2=exp.v2, verdicts=report.verdicts)


def _cmd_fclt(args, cfg: RunConfig) -> int:
    """Covariance structure of W_T over the t grid."""
    from pssclock.checkers.clt import fclt_covariance_test
    started = time.perf_counter()
    exp, paths = _experiment(cfg, cfg.t_grid)
    report = fclt_covariance_test(paths, cfg.t_grid, exp.v2, cfg.log_t, bias_allowance=cfg.bias_allowance)
    header = ["t", "mean", "var", "se", "target", "pass"]
    tables = {"covariance": covariance_rows(cfg.t_grid, report.cov)}
    return _finish(args, cfg, "fclt", header, report.rows(), report.passed, started, tables,
                   increment_ks_stat=report.ks_stat, increment_ks_p=report.ks_p, v2=exp.v2,
                   verdicts=report.verdicts)


def _cmd_simulate_clock(args, cfg: RunConfig) -> int:
    """T(t) and X(t) on a time grid for one replica."""
    from pssclock.paths import path_sampler, solve_tau_log
    started = time.perf_counter()
    family, alpha = _single_family(cfg)
    if cfg.dump_paths and not cfg.output:
        raise ConfigError(_("--dump-paths needs --output"))
    times = np.asarray(cfg.times, dtype=float)
    if np.any(times < 0):
        raise ConfigError(_("times must be >= 0"))
    sampler = path_sampler(family, _rng(cfg, 0), cfg.dt)
    ap = alpha * cumulants(family, alpha).p
    with np.errstate(divide="ignore"):
        log_levels = np.log(times) - alpha * math.log(cfg.a)
    path = sampler.sample_for_level(ap, float(np.max(log_levels)))
    sol = solve_tau_log(path, alpha, log_levels, sampler)
    x = cfg.a * np.exp(sol.path.value_at(sol.tau))
    rows = [{"t": t, "clock": c, "X": xv} for t, c, xv in zip(times, sol.tau, x)]
    if cfg.dump_paths:
        sol.path.to_csv(Path(cfg.output) / "simulate_clock_path.csv")
    header = ["t", "clock", "X"]
    logger.debug("simulated %d clock values (%d extensions)", len(rows), sol.extensions)
    return _finish(args, cfg, "simulate_clock", header, rows, True, started, extensions=sol.extensions)


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _overrides(args) -> dict:
    out = {}
    for dest in _CONFIG_DESTS:
        value = getattr(args, dest, None)
        if value is None:
            continue
        if dest == "families":
            value = FAMILY_SEPARATOR.join(value)
        out[dest] = value
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pssclock",
        description=_("Clocks of positive self-similar Markov processes via the Lamperti transform"),
    )
    parser.add_argument("-V", "--version", action="version", version=f"pssclock {__version__}")
    parser.add_argument("--about", action="store_true", help=_("Show application info and exit"))
    parser.add_argument("--json", "-j", action="store_true", help=_("JSON output"))
    parser.add_argument("--quiet", "-q", action="store_true", help=_("Suppress non-essential output"))
    parser.add_argument("--verbose", "-v", action="count", default=0, help=_("More logging (-vv for debug)"))

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=_("key = value file, or a JSON summary to replay"))
    common.add_argument("--family", dest="families", action="append",
                        help=_("Family spec, e.g. \"saw(a=1,b=2)@alpha=1\" (repeatable)"))
    common.add_argument("--seed", help=_("Master seed (integer or 'auto')"))
    common.add_argument("--output", "-o", help=_("Directory for CSV/JSON files"))
    common.add_argument("--format", choices=["csv", "json"], help=_("Table format for --output"))
    common.add_argument("--dt", type=float, help=_("Grid step for Brownian families"))

    experiment = argparse.ArgumentParser(add_help=False)
    experiment.add_argument("--regime", choices=["Qa", "Q0"], help=_("Start at a (Qa) or from the entrance law (Q0)"))
    experiment.add_argument("--a", type=float, help=_("Starting point under Qa"))
    experiment.add_argument("--logT", dest="log_t", type=float, help=_("Centering horizon L = log T"))
    experiment.add_argument("--n", type=int, help=_("Number of replicas"))
    experiment.add_argument("--workers", type=int, help=_("Worker processes"))

    sub = parser.add_subparsers(dest="command", help=_("Command"))

    p_cum = sub.add_parser("cumulants", parents=[common], help=_("p, sigma2 and v2 per family"))
    p_cum.add_argument("--tabulated", action="store_true", help=_("Also print the tabulated sigma2/v2"))
    p_cum.set_defaults(func=_cmd_cumulants)

    p_iinf = sub.add_parser("iinf-check", parents=[common], help=_("Normalization of the exponential functional"))
    p_iinf.add_argument("--draws", type=int, help=_("Draws for the mean of 1/I"))
    p_iinf.add_argument("--ks-draws", dest="ks_draws", type=int, help=_("Draws per side for the KS comparison"))
    p_iinf.set_defaults(func=_cmd_iinf_check)

    p_mel = sub.add_parser("mellin-check", parents=[common], help=_("Mellin recursion and v2 route"))
    p_mel.add_argument("--draws", type=int, help=_("Draws for an estimated transform"))
    p_mel.add_argument("--mc", action="store_true", help=_("Estimate M even where a closed form exists"))
    p_mel.set_defaults(func=_cmd_mellin_check)

    p_erg = sub.add_parser("ergodicity", parents=[common], help=_("Drift-criterion verdicts"))
    p_erg.add_argument("--C", dest="C", type=float, help=_("Drift constant C in (0, alpha*m)"))
    p_erg.set_defaults(func=_cmd_ergodicity)

    p_lln = sub.add_parser("lln", parents=[common], help=_("Law of large numbers on one path"))
    p_lln.add_argument("--a", type=float, help=_("Starting point"))
    p_lln.add_argument("--logT", dest="lln_log_t", type=float, nargs="+", help=_("Values of log T"))
    p_lln.set_defaults(func=_cmd_lln)

    p_clt = sub.add_parser("clt", parents=[common, experiment], help=_("Marginal CLT at t = 1"))
    p_clt.set_defaults(func=_cmd_clt)

    p_fclt = sub.add_parser("fclt", parents=[common, experiment], help=_("Covariance of the rescaled clock"))
    p_fclt.add_argument("--t-grid", dest="t_grid", type=float, nargs="+", help=_("Time grid"))
    p_fclt.add_argument("--bias-allowance", dest="bias_allowance", action="store_true", default=None,
                        help=_("Widen the covariance bands by 3*v2/sqrt(logT)"))
    p_fclt.set_defaults(func=_cmd_fclt)

    p_sim = sub.add_parser("simulate-clock", parents=[common], help=_("Clock and process values for one replica"))
    p_sim.add_argument("--a", type=float, help=_("Starting point"))
    p_sim.add_argument("--times", type=float, nargs="+", help=_("Times t at which to report T(t) and X(t)"))
    p_sim.add_argument("--dump-paths", dest="dump_paths", action="store_true", default=None,
                       help=_("Write the underlying Levy path to the output directory"))
    p_sim.set_defaults(func=_cmd_simulate_clock)
    return parser


def main(argv: list[str] | None = None):
    parser = _build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    args = parser.parse_args(argv)
    if args.about:
        print(f"pssclock {__version__}")
        print(_("Clocks of positive self-similar Markov processes"))
        print()
        print(f"{_('License')}:    MIT")
        return 0
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2

    _configure_logging(args.verbose)
    try:
        cfg = load_config(args.command, args.config, _overrides(args))
        if isinstance(args.seed, str) and args.seed.strip().lower() == "auto":
            print(_("seed: {seed}").format(seed=cfg.seed), file=sys.stderr)
        return args.func(args, cfg)
    except USAGE_ERRORS as exc:
        return _fail(args, exc, 2)
    except ClockError as exc:
        return _fail(args, exc, 1)


if __name__ == "__main__":
    sys.exit(main())
