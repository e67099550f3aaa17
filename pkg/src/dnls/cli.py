"""Command-line entry point.

Exit codes: 0 when every verdict passes, 1 when a verdict fails, 2 on usage,
configuration or input errors.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

from . import io, plotting
from .config import ExperimentSuite, parse_config
from .damping import DampingError, parse_profile
from .diagnostics import InsufficientDataError, identity_report
from .experiments import (
    IDENTITY_CHECKS,
    convergence_study,
    identity_sections,
    run_experiment,
    run_suite,
    scattering_from_run,
)
from .grid import ConfigurationError, Grid
from .inequalities import DomainError, EstimationError, bootstrap_verify, gn_estimate, gronwall_verify
from .solver import SimConfig

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
ORDER_WINDOW = (1.9, 2.1)

log = logging.getLogger("dnls")

class UsageError(Exception):
    pass

def _print_sections(sections: dict) -> None:
    for name, body in sections.items():
        print(f"[{name}]")
        for key, value in body.items():
            print(f"{key} = {io.format_value(value)}")
        print()

def _out_dir(args, default: Path) -> Path:
    out = Path(args.output_dir) if args.output_dir else default
    out.mkdir(parents=True, exist_ok=True)
    return out

def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc

def _exit(ok: bool) -> int:
    return EXIT_PASS if ok else EXIT_FAIL

# subcommands

def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if isinstance(cfg, ExperimentSuite):
        raise UsageError(f"{args.config} is a suite file; use 'sweep'")
    res = run_experiment(cfg, _out_dir(args, Path("runs")))
    s = res.summary
    sections = {
        "run": {
            "name": cfg.name,
            "directory": res.run_dir,
            "final_time": s.final_time,
            "steps": s.steps,
            "records": s.records,
            "blown_up": s.blown_up,
            "wall_time": s.wall_time,
        },
        "verdicts": res.verdicts,
    }
    if s.blown_up:
        sections["run"]["blowup_time"] = s.blowup_time
        sections["run"]["blowup_reason"] = s.blowup_reason
    if res.identities is not None:
        sections.update(identity_sections(res.identities))
        del sections["verdicts"]
        sections["verdicts"] = res.verdicts
    _print_sections(sections)
    return _exit(res.passed)

def cmd_sweep(args) -> int:
    suite = parse_config(args.suite)
    if isinstance(suite, SimConfig):
        suite = ExperimentSuite(name=suite.name, runs=[suite])
    out = _out_dir(args, Path(suite.output_dir))
    results = run_suite(suite, out, workers=args.workers)
    _print_sections({r["name"]: {"passed": r["passed"], **r["verdicts"]} for r in results})
    return _exit(all(r["passed"] for r in results))

def cmd_verify_identities(args) -> int:
    csv_path = Path(args.csv)
    series = io.read_diagnostics_csv(csv_path)
    manifest_path = csv_path.parent / "manifest.json"
    p, mu, damping, checks = args.p, args.mu, args.damping, None
    base = "."
    if manifest_path.exists():
        m = io.read_manifest(manifest_path)
        c = m["config"]
        p = c["p"] if p is None else p
        mu = c["mu"] if mu is None else mu
        damping = c["damping"] if damping is None else damping
        checks = [k for k in c["reports"]["checks"] if k in IDENTITY_CHECKS]
        base = m.get("base_dir", ".")
    if damping is None:
        raise UsageError("no manifest.json beside the CSV; pass --damping (and --p, --mu)")
    profile = parse_profile(damping, base)
    if args.checks:
        checks = [c for c in args.checks.split(",") if c]
        bad = sorted(set(checks) - set(IDENTITY_CHECKS))
        if bad:
            raise UsageError(f"unknown check(s) {bad}; known: {list(IDENTITY_CHECKS)}")
    if not checks:
        checks = ["mass", "hamiltonian"] if p is not None else ["mass"]
    rep = identity_report(series, profile, p=p, mu=-1 if mu is None else mu)
    sections = identity_sections(rep)
    sections["verdicts"] = {k: v for k, v in rep.verdicts.items() if k in checks}
    out = _out_dir(args, csv_path.parent)
    io.write_report(out / "identities.txt", sections)
    _print_sections(sections)
    return _exit(rep.passed(checks) and all(k in rep.verdicts for k in checks))

def cmd_scattering_report(args) -> int:
    run_dir = Path(args.run_dir)
    if not (run_dir / "manifest.json").exists():
        raise UsageError(f"{run_dir} is not a run directory (no manifest.json)")
    report = scattering_from_run(run_dir, _out_dir(args, run_dir), burn_in=args.burn_in, epsilon=args.epsilon)
    _print_sections(report.sections())
    return _exit(report.verdict)

def cmd_gn_constant(args) -> int:
    L = args.half_length if args.half_length else (20.0 if args.dim == 1 else 10.0)
    n = args.points if args.points else (512 if args.dim == 1 else 64)
    grid = Grid(args.dim, n, L)
    try:
        est = gn_estimate(args.dim, args.p, grid, method=args.method, max_iter=args.max_iter)
        ok = True
    except EstimationError as exc:
        log.error("%s", exc)
        est, ok = exc.best, False
    body = {
        "dim": args.dim,
        "p": args.p,
        "K": est.K,
        "sigma": est.sigma,
        "method": est.method,
        "iterations": est.iterations,
        "residual": est.residual,
        "converged": ok,
    }
    if args.dim == 1 and args.p == 3:
        body["reference"] = 1 / math.sqrt(3)
        body["relative_error"] = abs(est.K * math.sqrt(3) - 1)
    out = _out_dir(args, Path("."))
    io.write_report(out / "gn_constant.txt", {"gn_constant": body})
    if not args.no_figures:
        plotting.plot_profile(est.trial_profile, out / "figures" / "gn_profile.png", "optimizer")
    _print_sections({"gn_constant": body})
    return _exit(ok)

def cmd_check_gronwall(args) -> int:
    cols = io.read_columns(args.csv, ("t", "f", "g", "h"))
    res = gronwall_verify(cols["t"], cols["f"], cols["g"], cols["h"], args.C, args.beta)
    body = {
        "branch": res.branch,
        "hypotheses_ok": res.hypotheses_ok,
        "bound_satisfied": res.satisfied,
        "max_ratio": res.max_ratio,
        "t0": res.t0,
        "reasons": "; ".join(res.reasons) or "none",
    }
    out = _out_dir(args, Path(args.csv).parent)
    io.write_report(out / "gronwall.txt", {"gronwall": body})
    if res.bound is not None and not args.no_figures:
        plotting.plot_bound(cols["t"], cols["f"], res.bound, out / "figures" / "gronwall.png")
    _print_sections({"gronwall": body})
    return _exit(res.hypotheses_ok and res.satisfied)

def cmd_check_bootstrap(args) -> int:
    cols = io.read_columns(args.csv, ("t", "X"))
    res = bootstrap_verify(cols["X"], args.a, args.b, args.theta)
    body = {
        "hypothesis_ok": res.hypothesis_ok,
        "smallness_ok": res.smallness_ok,
        "conclusion_ok": res.conclusion_ok,
        "threshold": res.threshold,
        "smallness_value": res.smallness_value,
        "bound": res.bound,
        "passed": res.passed,
    }
    out = _out_dir(args, Path(args.csv).parent)
    io.write_report(out / "bootstrap.txt", {"bootstrap": body})
    if not args.no_figures:
        plotting.plot_bound(cols["t"], cols["X"], res.bound, out / "figures" / "bootstrap.png", ("X", "bound"))
    _print_sections({"bootstrap": body})
    return _exit(res.passed)

def cmd_convergence(args) -> int:
    cfg = parse_config(args.config)
    if isinstance(cfg, ExperimentSuite):
        raise UsageError(f"{args.config} is a suite file")
    res = convergence_study(cfg, args.dts)
    out = _out_dir(args, Path("runs") / cfg.name)
    with open(out / "convergence.csv", "w") as fh:
        fh.write("dt,l2_error\n")
        for dt, err in zip(res.dts, res.errors):
            fh.write(f"{dt!r},{float(err)!r}\n")
    lo, hi = ORDER_WINDOW
    ok = bool(lo <= res.order <= hi)
    body = {
        "reference": res.reference,
        "t_end": cfg.t_end,
        "order": res.order,
        "window": f"[{lo}, {hi}]",
        "passed": ok,
    }
    for dt, err in zip(res.dts, res.errors):
        body[f"error(dt={dt:g})"] = float(err)
    io.write_report(out / "convergence.txt", {"convergence": body})
    if not args.no_figures:
        plotting.plot_convergence(res.dts, res.errors, res.order, out / "figures" / "convergence.png")
    _print_sections({"convergence": body})
    return _exit(ok)

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dnls", description="Damped NLS split-step simulator and verification lab.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--output-dir", default=None, help="where to write artifacts")
        sp.set_defaults(func=fn)
        return sp

    sp = add("run", cmd_run, "simulate one configuration")
    sp.add_argument("config")

    sp = add("sweep", cmd_sweep, "run a suite in parallel")
    sp.add_argument("suite")
    sp.add_argument("--workers", type=int, default=None)

    sp = add("verify-identities", cmd_verify_identities, "check the dissipation identities on a diagnostics CSV")
    sp.add_argument("csv")
    sp.add_argument("--damping", default=None, help="profile, e.g. constant:a=0.3")
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--mu", type=int, choices=(-1, 1), default=None)
    sp.add_argument("--checks", default=None, help="comma-separated subset of " + ",".join(IDENTITY_CHECKS))

    sp = add("scattering-report", cmd_scattering_report, "Cauchy and decay report for a run directory")
    sp.add_argument("run_dir")
    sp.add_argument("--burn-in", type=float, default=None)
    sp.add_argument("--epsilon", type=float, default=None)

    sp = add("gn-constant", cmd_gn_constant, "estimate the sharp Gagliardo-Nirenberg constant")
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--points", type=int, default=None)
    sp.add_argument("--half-length", type=float, default=None)
    sp.add_argument("--method", choices=("weinstein_ascent", "profile_family"), default="weinstein_ascent")
    sp.add_argument("--max-iter", type=int, default=100_000)
    sp.add_argument("--no-figures", action="store_true")

    sp = add("check-gronwall", cmd_check_gronwall, "verify the Gronwall-type lemma on CSV columns t,f,g,h")
    sp.add_argument("csv")
    sp.add_argument("--C", type=float, required=True)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--no-figures", action="store_true")

    sp = add("check-bootstrap", cmd_check_bootstrap, "verify the bootstrap lemma on CSV columns t,X")
    sp.add_argument("csv")
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--b", type=float, required=True)
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--no-figures", action="store_true")

    sp = add("convergence", cmd_convergence, "time-step convergence study")
    sp.add_argument("config")
    sp.add_argument("--dts", type=_float_list, default=[4e-3, 2e-3, 1e-3, 5e-4])
    sp.add_argument("--no-figures", action="store_true")
    return ap

def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (
        UsageError,
        ConfigurationError,
        DampingError,
        DomainError,
        io.FormatError,
        InsufficientDataError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        print(f"dnls {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

def main() -> None:
    sys.exit(run_cli())
