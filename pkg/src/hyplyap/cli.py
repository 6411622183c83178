"""Command-line driver: ``hyplyap run|check|table|sv``."""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Sequence, TextIO

import numpy as np

from .config import RunConfig, RunSetup, build_run, load_config
from .errors import ConfigError, HyplyapError, NumericalBlowupError
from .model import ExponentialWeights, linear_example, realize_weights
from .solver import SimulationResult, simulate
from .stability import ConditionReport, check_conditions, check_continuous, decay_rate_exponential

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CONDITIONS = 2
EXIT_BLOWUP = 3

SERIES_HEADER = ("n", "t", "L", "L_up", "S", "l2_state")
TABLE_HEADER = ("J", "Linf_diff", "L2_diff", "mu", "eta")
TABLE_J = (200, 400, 800, 1600)
TABLE_CFL = {"cfl075": 0.75, "cfl100": 1.0}
SV_SWEEP = (0.1, 0.3, 0.575)
NORM_NOTE = "# norms: max_n / sqrt(dt*sum)"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _open_out(path: Optional[str]):
    if path is None:
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


# --------------------------------------------------------------------------
# shared pieces

def conditions_for(setup: RunSetup, samples: int = 200) -> ConditionReport:
    cont = check_continuous(setup.speeds, setup.source, setup.weight_fn, setup.K, setup.coeffs.m,
                            setup.grid.l, setup.xi, samples=samples)
    return check_conditions(setup.coeffs, setup.grid, setup.K, setup.weights, setup.xi,
                            mu=setup.mu, continuous=cont)


def run_setup(setup: RunSetup, cfg: RunConfig, eta: Optional[float] = None) -> SimulationResult:
    return simulate(setup.coeffs, setup.grid, setup.K, setup.W0, setup.weights, setup.xi,
                    eta=eta, boundary_timing=cfg.boundary_timing)


def _recorded(N: int, stride: int) -> np.ndarray:
    idx = np.arange(0, N + 1, stride)
    if idx[-1] != N:
        idx = np.append(idx, N)
    return idx


def write_series(out: TextIO, result: SimulationResult, stride: int = 1,
                 meta: Sequence[str] = (), prefix: Sequence = (), header: bool = True) -> None:
    """Write ``n, t, L, L_up, S, l2_state`` rows with full precision."""
    s = result.series
    l2 = result.l2_state
    for line in meta:
        out.write(f"# {line}\n")
    if header:
        out.write(",".join(SERIES_HEADER) + "\n")
    for n in _recorded(len(s.L) - 1, stride):
        row = list(prefix) + [int(n), s.t[n], s.L[n], s.L_up[n], s.S[n], l2[n]]
        out.write(",".join(_fmt(v) for v in row) + "\n")


def _run_meta(cfg: RunConfig, setup: RunSetup, result: SimulationResult,
              report: ConditionReport) -> List[str]:
    g, s = setup.grid, result.series
    verdicts = " ".join(f"{k}={str(v).lower()}" for k, v in report.verdicts.items())
    return [f"model={setup.label}",
            f"J={g.J} cfl={_fmt(g.cfl)} dx={_fmt(g.dx)} dt={_fmt(g.dt)} N={g.N} t_N={_fmt(g.N * g.dt)}",
            f"mu={_fmt(setup.mu)} xi={_fmt(setup.xi)} eta={_fmt(s.eta)} zeta={_fmt(s.zeta)} "
            f"beta={_fmt(s.beta)} C={_fmt(s.C)}",
            f"boundary-timing={cfg.boundary_timing} record-stride={cfg.record_stride}",
            f"verdicts: {verdicts}"]


# --------------------------------------------------------------------------
# commands

def cmd_run(cfg: RunConfig, out_path: Optional[str] = None, strict: Optional[bool] = None) -> int:
    strict = cfg.strict if strict is None else strict
    out_path = out_path or cfg.out
    setup = build_run(cfg)
    report = conditions_for(setup)
    result = run_setup(setup, cfg)
    out, close = _open_out(out_path)
    try:
        write_series(out, result, cfg.record_stride, _run_meta(cfg, setup, result, report))
    finally:
        if close:
            out.close()
    if strict and not _discrete_ok(report):
        _report_failures(report, sys.stderr)
        return EXIT_CONDITIONS
    return EXIT_OK


def _discrete_ok(report: ConditionReport) -> bool:
    return report.theta.verdict and report.source.verdict and report.boundary.verdict


def _report_failures(report: ConditionReport, stream: TextIO) -> None:
    failed = [k for k, v in report.verdicts.items() if not v]
    stream.write(f"condition check failed: {', '.join(failed)}\n")


def report_dict(report: ConditionReport) -> dict:
    d = {
        "verdicts": report.verdicts,
        "margins": {"theta": report.theta_margin, "source": report.source_margin,
                    "boundary": report.boundary_margin},
        "eta_certified": report.eta_cert,
        "eta_closed_form": report.eta_closed,
        "zeta": report.zeta,
        "beta": report.beta,
        "C": report.C,
        "feedback_bounds": None if report.feedback is None else
        {"k12_max": report.feedback[0], "k21_max": report.feedback[1]},
    }
    if report.continuous is not None:
        c = report.continuous
        d["margins"]["continuous_interior"] = c.interior_margin
        d["margins"]["continuous_boundary"] = c.boundary_margin
        d["continuous_eta"] = c.interior_eta
    return d


def format_report(report: ConditionReport, setup: RunSetup) -> str:
    buf = io.StringIO()
    margins = report_dict(report)["margins"]
    buf.write(f"model: {setup.label}  J={setup.grid.J}  dt={setup.grid.dt:.6g}\n")
    buf.write(f"{'condition':<22}{'verdict':<9}margin\n")
    for name, ok in report.verdicts.items():
        buf.write(f"{name:<22}{'ok' if ok else 'FAIL':<9}{margins[name]: .6e}\n")
    closed = "n/a" if report.eta_closed is None else f"{report.eta_closed:.6g}"
    buf.write(f"eta (certified)   {report.eta_cert:.6g}\n")
    buf.write(f"eta (closed form) {closed}\n")
    buf.write(f"zeta {report.zeta:.6g}  beta {report.beta:.6g}  C {report.C:.6g}\n")
    if report.feedback is not None:
        k12, k21 = setup.K.k_minus[0, 0], setup.K.k_plus[0, 0]
        buf.write(f"feedback bounds: |k12| <= {report.feedback[0]:.6g} (k12 = {k12:g}), "
                  f"|k21| <= {report.feedback[1]:.6g} (k21 = {k21:g})\n")
    return buf.getvalue()


def cmd_check(cfg: RunConfig, out_path: Optional[str] = None, strict: Optional[bool] = None,
              stream: TextIO = None) -> int:
    stream = sys.stdout if stream is None else stream
    strict = cfg.strict if strict is None else strict
    setup = build_run(cfg)
    report = conditions_for(setup)
    stream.write(format_report(report, setup))
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(report_dict(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
    if strict and not _discrete_ok(report):
        return EXIT_CONDITIONS
    return EXIT_OK


@dataclass
class TableRow:
    J: int
    Linf_diff: float
    L2_diff: float
    mu: float
    eta: float


def difference_norms(L_up: np.ndarray, L: np.ndarray, dt: float):
    """``max_n |L_up - L|`` and ``sqrt(dt * sum_n (L_up - L)^2)``."""
    d = np.asarray(L_up) - np.asarray(L)
    return float(np.max(np.abs(d))), float(math.sqrt(dt * float(np.sum(d * d))))


def table_row(J: int, cfl: float, mu: float = 0.575, xi: float = 0.125, T: float = 10.0,
              k12: float = 0.5, k21: float = 0.5, amp: float = 0.01) -> TableRow:
    grid, coeffs, K, W0 = linear_example(J, cfl, T, k12, k21, amp)
    P = realize_weights(ExponentialWeights([1.0], [1.0], mu), grid, 2, 1)
    eta = decay_rate_exponential(mu, coeffs.speed_min, xi, grid.dt, grid.dx)
    res = simulate(coeffs, grid, K, W0, P, xi, eta=eta)
    linf, l2 = difference_norms(res.series.L_up, res.series.L, grid.dt)
    return TableRow(J=J, Linf_diff=linf, L2_diff=l2, mu=mu, eta=eta)


def table_rows(variant: str, Js: Iterable[int] = TABLE_J) -> List[TableRow]:
    if variant not in TABLE_CFL:
        raise ConfigError(f"unknown table variant '{variant}'; choose from {sorted(TABLE_CFL)}")
    return [table_row(J, TABLE_CFL[variant]) for J in Js]


def format_table(rows: Sequence[TableRow]) -> str:
    lines = ["| " + " | ".join(TABLE_HEADER) + " |", "|" + "---|" * len(TABLE_HEADER)]
    for r in rows:
        lines.append(f"| {r.J} | {r.Linf_diff:.5g} | {r.L2_diff:.5g} | {r.mu:.5g} | {r.eta:.5g} |")
    return "\n".join(lines) + "\n" + NORM_NOTE + "\n"


def cmd_table(variant: str, out_path: Optional[str] = None, stream: TextIO = None) -> int:
    stream = sys.stdout if stream is None else stream
    rows = table_rows(variant)
    stream.write(format_table(rows))
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# variant={variant} cfl={_fmt(TABLE_CFL[variant])} xi=0.125 T=10 k12=0.5 k21=0.5\n")
            fh.write(NORM_NOTE + "\n")
            fh.write(",".join(TABLE_HEADER) + "\n")
            for r in rows:
                fh.write(",".join(_fmt(v) for v in (r.J, r.Linf_diff, r.L2_diff, r.mu, r.eta)) + "\n")
    return EXIT_OK


def cmd_sv(cfg: RunConfig, out_path: Optional[str] = None, mus: Sequence[float] = SV_SWEEP,
           strict: Optional[bool] = None) -> int:
    """Saint-Venant runs for each ``mu``; long-format CSV with a leading ``mu`` column."""
    strict = cfg.strict if strict is None else strict
    out_path = out_path or cfg.out
    out, close = _open_out(out_path)
    failed = False
    try:
        out.write(",".join(("mu",) + SERIES_HEADER) + "\n")
        for mu in mus:
            run_cfg = replace(cfg, mu=mu, explicit=set(cfg.explicit) | {"mu"})
            setup = build_run(run_cfg)
            report = conditions_for(setup)
            failed |= not _discrete_ok(report)
            result = run_setup(setup, run_cfg)
            write_series(out, result, cfg.record_stride, _run_meta(run_cfg, setup, result, report),
                         prefix=(mu,), header=False)
    finally:
        if close:
            out.close()
    return EXIT_CONDITIONS if (strict and failed) else EXIT_OK


# --------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyplyap", description=(
        "Finite-volume simulation and Lyapunov/ISS certificates for 1-D linear "
        "hyperbolic balance laws with boundary feedback."))
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, preset_default=None):
        sp.add_argument("--config", metavar="PATH", help="flat 'key = value' configuration file")
        sp.add_argument("--preset", metavar="NAME", default=preset_default,
                        help="built-in configuration: linear-4.1 or sv-4.2")
        sp.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
        sp.add_argument("--strict", action="store_true", default=None,
                        help="exit with status 2 when a discrete condition fails")

    common(sub.add_parser("run", help="simulate and write the Lyapunov series as CSV"))
    common(sub.add_parser("check", help="print condition verdicts, margins and rates"))
    t = sub.add_parser("table", help="envelope-gap table over J = 200, 400, 800, 1600")
    t.add_argument("variant", choices=sorted(TABLE_CFL))
    t.add_argument("--out", metavar="PATH", help="also write the table as CSV")
    common(sub.add_parser("sv", help="Saint-Venant runs over mu in {0.1, 0.3, 0.575}"),
           preset_default="sv-4.2")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "table":
            return cmd_table(args.variant, args.out)
        preset = args.preset
        if preset is None and args.config is None:
            preset = "linear-4.1"
        cfg = load_config(args.config, preset)
        if args.command == "run":
            return cmd_run(cfg, args.out, args.strict)
        if args.command == "check":
            return cmd_check(cfg, args.out, args.strict)
        return cmd_sv(cfg, args.out, strict=args.strict)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalBlowupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except HyplyapError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
