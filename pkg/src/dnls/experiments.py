"""Experiment driver: single runs with persisted artifacts, parallel suites,
and time-step convergence studies."""
from __future__ import annotations

import csv
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io, plotting
from .config import ExperimentSuite, from_dict, to_dict
from .diagnostics import (
    DiagnosticsRecord,
    IdentityReport,
    InsufficientDataError,
    LiminfResult,
    identity_report,
    liminf_check,
)
from .grid import Field
from .scattering import ScatteringReport, scattering_report
from .solver import SimConfig, TrajectorySummary, evolve

log = logging.getLogger(__name__)

IDENTITY_CHECKS = ("mass", "energy", "virial_k", "virial_v", "hamiltonian", "hamiltonian_v")


@dataclass
class RunResult:
    name: str
    run_dir: Path | None
    summary: TrajectorySummary
    records: list[DiagnosticsRecord]
    identities: IdentityReport | None
    scattering: ScatteringReport | None
    liminf: LiminfResult | None
    verdicts: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())


def _sample_every(cfg: SimConfig) -> int:
    if cfg.reports.sample_every > 0:
        return cfg.reports.sample_every
    n_records = cfg.n_steps // cfg.steps_per_record + 1
    return max(1, n_records // 20)


def identity_sections(rep: IdentityReport) -> dict:
    return {
        "identities": {
            "cadence": rep.cadence,
            "mass_id": rep.mass_id,
            "energy_id": rep.energy_id,
            "k_id": rep.k_id,
            "v_id": rep.v_id,
            "hu_conservation": rep.hu_conservation,
            "hu_measure": "relative" if rep.hu_relative else "absolute",
            "hv_law": rep.hv_law,
        },
        "tolerances": dict(rep.tolerances),
        "verdicts": rep.verdicts,
    }


def write_scattering(run_dir: Path, report: ScatteringReport, figures: bool = True) -> None:
    io.write_report(run_dir / "scattering.txt", report.sections())
    io.write_matrix_csv(run_dir / "cauchy.csv", report.cauchy.times, report.cauchy.matrix)
    io.write_checkpoint(run_dir / "u_plus.dnls", report.u_plus)
    if figures:
        plotting.plot_scattering(report, run_dir / "figures" / "scattering.png")


def run_experiment(cfg: SimConfig, output_dir: str | Path | None = None) -> RunResult:
    """Simulate ``cfg`` and, when ``output_dir`` is given, persist the run in
    ``output_dir/<name>/``: diagnostics CSV, checkpoints, reports, figures
    and a manifest."""
    run_dir = None
    if output_dir is not None:
        run_dir = Path(output_dir) / cfg.name
        (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    records: list[DiagnosticsRecord] = []
    samples: list[tuple[float, Field]] = []
    every = _sample_every(cfg)
    keep_samples = cfg.reports.scattering or run_dir is not None

    def sink(rec: DiagnosticsRecord, u: Field) -> None:
        idx = len(records)
        records.append(rec)
        if keep_samples and idx % every == 0:
            samples.append((rec.t, u))
            if run_dir is not None:
                io.write_checkpoint(run_dir / "checkpoints" / f"u_{idx:06d}.dnls", u)

    summary = evolve(cfg, [sink])
    log.info("%s: %d steps, %d records, %.2fs", cfg.name, summary.steps, summary.records, summary.wall_time)
    checks = cfg.reports.checks
    verdicts: dict[str, bool] = {}
    if cfg.reports.expect_blowup:
        verdicts["blowup"] = summary.blown_up
    else:
        verdicts["no_blowup"] = not summary.blown_up

    identities = None
    try:
        identities = identity_report(records, cfg.damping, p=cfg.p, mu=cfg.mu)
    except InsufficientDataError as exc:
        log.warning("%s: identities skipped: %s", cfg.name, exc)
    for name in checks:
        if name in IDENTITY_CHECKS:
            verdicts[name] = bool(identities is not None and identities.verdicts.get(name, False))

    scat = None
    if cfg.reports.scattering and not summary.blown_up:
        if samples[-1][0] != records[-1].t:
            samples.append((records[-1].t, summary.final_field))
        epsilon = cfg.reports.epsilon or None
        try:
            scat = scattering_report(records, samples, cfg.damping, burn_in=cfg.reports.burn_in, epsilon=epsilon)
        except InsufficientDataError as exc:
            log.warning("%s: scattering skipped: %s", cfg.name, exc)
    if "scattering" in checks:
        verdicts["scattering"] = bool(scat is not None and scat.verdict)

    lim = None
    if records and cfg.damping.kind != "zero":
        try:
            lim = liminf_check(records)
        except InsufficientDataError:
            pass
    if "liminf" in checks:
        verdicts["liminf"] = bool(lim is not None and lim.verdict)

    result = RunResult(cfg.name, run_dir, summary, records, identities, scat, lim, verdicts)
    if run_dir is not None:
        _persist(cfg, result)
    return result


def _persist(cfg: SimConfig, result: RunResult) -> None:
    run_dir = result.run_dir
    io.write_diagnostics_csv(run_dir / "diagnostics.csv", result.records)
    s = result.summary
    if s.final_field is not None:
        io.write_checkpoint(run_dir / "checkpoints" / "final.dnls", s.final_field)
    if result.identities is not None:
        io.write_report(run_dir / "identities.txt", identity_sections(result.identities))
    if result.scattering is not None:
        write_scattering(run_dir, result.scattering, cfg.reports.figures)
    if result.liminf is not None:
        io.write_report(run_dir / "liminf.txt", {"liminf": vars(result.liminf)})
    if cfg.reports.figures and len(result.records) > 1:
        plotting.plot_diagnostics(result.records, run_dir / "figures" / "diagnostics.png")
    io.write_manifest(
        run_dir / "manifest.json",
        {
            "config": to_dict(cfg),
            "base_dir": str(Path(cfg.base_dir).resolve()),
            "versions": io.versions(),
            "wall_time": s.wall_time,
            "summary": {
                "final_time": s.final_time,
                "steps": s.steps,
                "records": s.records,
                "blown_up": s.blown_up,
                "blowup_time": s.blowup_time,
                "blowup_reason": s.blowup_reason,
                "final_mass": s.final_mass,
                "final_grad_norm": s.final_grad_norm,
                "final_h1_norm": s.final_h1_norm,
            },
            "verdicts": result.verdicts,
            "passed": result.passed,
        },
    )


def load_run(run_dir: str | Path) -> tuple[SimConfig, list[DiagnosticsRecord], list[tuple[float, Field]]]:
    """Configuration, diagnostics and stored field samples of a persisted run."""
    run_dir = Path(run_dir)
    manifest = io.read_manifest(run_dir / "manifest.json")
    cfg = from_dict(manifest["config"], manifest.get("base_dir", "."))
    records = io.read_diagnostics_csv(run_dir / "diagnostics.csv")
    fields = [io.read_checkpoint(p) for p in sorted((run_dir / "checkpoints").glob("u_*.dnls"))]
    final = run_dir / "checkpoints" / "final.dnls"
    if final.exists():
        last = io.read_checkpoint(final)
        if not fields or last.time > fields[-1].time:
            fields.append(last)
    return cfg, records, [(f.time, f) for f in fields]


def scattering_from_run(run_dir: str | Path, output_dir: str | Path | None = None,
                        burn_in: float | None = None, epsilon: float | None = None) -> ScatteringReport:
    cfg, records, samples = load_run(run_dir)
    out = Path(output_dir) if output_dir is not None else Path(run_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = scattering_report(
        records,
        samples,
        cfg.damping,
        burn_in=cfg.reports.burn_in if burn_in is None else burn_in,
        epsilon=epsilon or cfg.reports.epsilon or None,
    )
    write_scattering(out, report, cfg.reports.figures)
    return report


# suites

def worker_count(requested: int | None = None) -> int:
    env = os.environ.get("DNLS_WORKERS")
    if env:
        return max(1, int(env))
    if requested:
        return max(1, int(requested))
    return os.cpu_count() or 1


def _suite_worker(args) -> dict:
    cfg, out = args
    res = run_experiment(cfg, out)
    return {"name": cfg.name, "passed": res.passed, "verdicts": res.verdicts,
            "blown_up": res.summary.blown_up, "wall_time": res.summary.wall_time}


def run_suite(suite: ExperimentSuite, output_dir: str | Path | None = None,
              workers: int | None = None) -> list[dict]:
    out = Path(output_dir or suite.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = min(worker_count(workers or suite.workers), len(suite.runs))
    jobs = [(cfg, out) for cfg in suite.runs]
    if n <= 1:
        results = [_suite_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_suite_worker, jobs))
    with open(out / "suite_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "passed", "blown_up", "failed_checks"])
        for r in results:
            failed = ";".join(k for k, v in r["verdicts"].items() if not v)
            w.writerow([r["name"], r["passed"], r["blown_up"], failed])
    return results


# convergence

@dataclass
class ConvergenceResult:
    dts: np.ndarray
    errors: np.ndarray
    order: float
    reference: str


def exact_solution(cfg: SimConfig, t: float) -> Field | None:
    """Closed-form solution when the configuration has one (undamped cubic
    1D soliton)."""
    spec = cfg.initial
    if (
        spec.kind == "soliton"
        and cfg.mu == -1
        and cfg.nonlinear
        and cfg.damping.kind == "zero"
        and not spec.noise
    ):
        (x,) = cfg.grid.coords
        c = spec.center[0] if spec.center else 0.0
        eta = spec.eta
        vals = np.sqrt(2.0) * eta / np.cosh(eta * (x - c)) * np.exp(1j * eta**2 * t)
        return Field(cfg.grid, vals, t)
    return None


def fit_order(dts: Sequence[float], errors: Sequence[float]) -> float:
    return float(np.polyfit(np.log(dts), np.log(errors), 1)[0])


def _final_field(cfg: SimConfig) -> Field:
    s = evolve(cfg)
    if s.blown_up or s.final_field is None:
        raise RuntimeError(f"run blew up at t = {s.blowup_time} during convergence study")
    return s.final_field


def convergence_study(cfg: SimConfig, dts: Sequence[float]) -> ConvergenceResult:
    """L^2 error at ``t_end`` for each time step and the fitted order.

    Errors are measured against the closed-form solution when one exists,
    otherwise against a run at a quarter of the smallest step.
    """
    dts = sorted((float(d) for d in dts), reverse=True)
    exact = exact_solution(cfg, cfg.t_end)
    reference = "exact"
    if exact is None:
        dt_ref = min(dts) / 4
        exact = _final_field(cfg.with_(dt=dt_ref, cadence=cfg.t_end))
        reference = f"numerical(dt={dt_ref:g})"
    h = cfg.grid.cell_volume
    errors = []
    for dt in dts:
        steps = cfg.t_end / dt
        if abs(steps - round(steps)) > 1e-6 * steps:
            raise ValueError(f"t_end = {cfg.t_end} is not a multiple of dt = {dt}")
        u = _final_field(cfg.with_(dt=dt, cadence=cfg.t_end))
        errors.append(math.sqrt(float(np.sum(np.abs(u.values - exact.values) ** 2) * h)))
    errors = np.array(errors)
    return ConvergenceResult(np.array(dts), errors, fit_order(dts, errors), reference)


def time_it(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start
