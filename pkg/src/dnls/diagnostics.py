"""Trajectory diagnostics: mass, energy, virial functionals and the
Hamiltonians of the damped and gauged problems, plus residual checks of
the exact identities they satisfy.

For ``mu = -1`` the functionals are the usual focusing ones::

    E = |grad u|^2 - 2/(p+1) |u|_{p+1}^{p+1}
    I = |grad u|^2 - |u|_{p+1}^{p+1}
    P = |grad u|^2 - N(p-1)/(2(p+1)) |u|_{p+1}^{p+1}

For ``mu = +1`` the sign of every potential term flips, which keeps the
identities dE/dt = -2aI, dK/dt + 2aK = 4V and dV/dt + 2aV = 2P valid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from .damping import DampingProfile
from .grid import (
    Field,
    NumericError,
    _v_functional,
    _weighted_variance,
    boundary_mass_fraction,
    gradient,
    lp_power,
    mass,
    w1r_norm,
)

CSV_COLUMNS = (
    "t",
    "A_t",
    "mass",
    "energy",
    "I",
    "virial_K",
    "V",
    "P",
    "H_v",
    "H_u",
    "grad_norm",
    "h1_norm",
    "lp1_norm",
    "boundary_mass_fraction",
)


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    A_t: float
    mass: float
    energy: float
    I_functional: float
    virial_K: float
    V_functional: float
    P_functional: float
    H_v: float
    H_u_conserved: float
    grad_norm: float
    h1_norm: float
    lp1_norm: float
    boundary_mass_fraction: float
    # not part of the CSV schema
    w1_r0_norm: float = math.nan

    def csv_row(self) -> list[float]:
        return [getattr(self, f.name) for f in fields(self)][: len(CSV_COLUMNS)]

    @classmethod
    def from_row(cls, row: Sequence[float]) -> "DiagnosticsRecord":
        return cls(*[float(x) for x in row[: len(CSV_COLUMNS)]])


def _sign_terms(p: float, dim: int, mu: int) -> tuple[float, float, float]:
    return (
        mu * 2.0 / (p + 1.0),
        float(mu),
        mu * dim * (p - 1.0) / (2.0 * (p + 1.0)),
    )


def compute_record(f: Field, t: float, cfg, running_integral: float) -> DiagnosticsRecord:
    """Evaluate all functionals of ``u = f`` at time ``t``.

    ``running_integral`` is ``int_0^t a e^{2A} |u|_{p+1}^{p+1} ds`` as
    accumulated by the driver.
    """
    if not np.all(np.isfinite(f.values)) or not math.isfinite(running_integral):
        raise NumericError(f"non-finite input to compute_record at t = {t}")
    p, dim, mu = cfg.p, f.grid.dim, cfg.mu
    A = float(cfg.damping.A(t))
    M = mass(f)
    grad = gradient(f)
    grad_sq = float(sum(np.sum(np.abs(g) ** 2) for g in grad) * f.grid.cell_volume)
    lp = lp_power(f, p + 1.0)
    ce, ci, cp = _sign_terms(p, dim, mu)
    energy = grad_sq + ce * lp
    # gauged unknown v = e^A u
    grad_v_sq = math.exp(2 * A) * grad_sq
    lp_v = math.exp((p + 1) * A) * lp
    H_v = grad_v_sq + ce * math.exp((1 - p) * A) * lp_v
    H_u = math.exp(2 * A) * energy + mu * 2.0 * (p - 1.0) / (p + 1.0) * running_integral
    return DiagnosticsRecord(
        t=float(t),
        A_t=A,
        mass=M,
        energy=energy,
        I_functional=grad_sq + ci * lp,
        virial_K=_weighted_variance(f),
        V_functional=_v_functional(f, grad),
        P_functional=grad_sq + cp * lp,
        H_v=H_v,
        H_u_conserved=H_u,
        grad_norm=math.sqrt(grad_sq),
        h1_norm=math.sqrt(M + grad_sq),
        lp1_norm=lp ** (1.0 / (p + 1.0)),
        boundary_mass_fraction=boundary_mass_fraction(f),
        w1_r0_norm=w1r_norm(f, p + 1.0, grad),
    )


def series_array(series: Sequence[DiagnosticsRecord], name: str) -> np.ndarray:
    return np.array([getattr(r, name) for r in series], dtype=float)


DEFAULT_TOLERANCES = {
    "mass": 1e-9,
    "energy": 1e-4,
    "virial_k": 1e-4,
    "virial_v": 1e-4,
    "hamiltonian": 1e-6,
    "hamiltonian_v": 1e-6,
}


@dataclass
class IdentityReport:
    mass_id: float
    energy_id: float
    k_id: float
    v_id: float
    hu_conservation: float
    hv_law: float
    cadence: float
    tolerances: dict
    hu_relative: bool = True

    @property
    def verdicts(self) -> dict[str, bool]:
        tol = self.tolerances
        values = {
            "mass": self.mass_id,
            "energy": self.energy_id,
            "virial_k": self.k_id,
            "virial_v": self.v_id,
            "hamiltonian": self.hu_conservation,
            "hamiltonian_v": self.hv_law,
        }
        return {k: bool(v <= tol[k]) for k, v in values.items() if not math.isnan(v)}

    def passed(self, checks: Sequence[str] | None = None) -> bool:
        v = self.verdicts
        keys = v.keys() if checks is None else [k for k in checks if k in v]
        return all(v[k] for k in keys)


def _uniform_cadence(t: np.ndarray) -> float:
    d = np.diff(t)
    delta = float(d.mean())
    if np.max(np.abs(d - delta)) > 1e-8 * max(delta, 1e-300):
        raise InsufficientDataError("identity checks need a uniform output cadence")
    return delta


def identity_report(
    series: Sequence[DiagnosticsRecord],
    profile: DampingProfile,
    p: float | None = None,
    mu: int = -1,
    tolerances: dict | None = None,
) -> IdentityReport:
    """Residuals of the mass law, the three differential identities (by
    centered differences, endpoints excluded), conservation of the damped
    Hamiltonian and, when ``p`` is given, the integrated law for the gauged
    Hamiltonian (running integral by cumulative Simpson at cadence)."""
    if len(series) < 3:
        raise InsufficientDataError(f"need at least 3 records, got {len(series)}")
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    arr = {name: series_array(series, name) for name in (
        "t", "A_t", "mass", "energy", "I_functional", "virial_K",
        "V_functional", "P_functional", "H_v", "H_u_conserved", "lp1_norm",
    )}
    t = arr["t"]
    delta = _uniform_cadence(t)
    a = np.asarray(profile.a(t), dtype=float)

    M0 = arr["mass"][0]
    if M0 > 0:
        mass_id = float(np.max(np.abs(np.exp(2 * arr["A_t"]) * arr["mass"] / M0 - 1.0)))
    else:
        mass_id = float(np.max(np.abs(arr["mass"])))

    def centered(y):
        return (y[2:] - y[:-2]) / (2 * delta)

    inner = slice(1, -1)
    E, I, K, V, P = (arr[k] for k in ("energy", "I_functional", "virial_K", "V_functional", "P_functional"))
    energy_id = float(np.max(np.abs(centered(E) + 2 * a[inner] * I[inner])))
    k_id = float(np.max(np.abs(centered(K) + 2 * a[inner] * K[inner] - 4 * V[inner])))
    v_id = float(np.max(np.abs(centered(V) + 2 * a[inner] * V[inner] - 2 * P[inner])))

    H = arr["H_u_conserved"]
    relative = bool(abs(H[0]) > 1e-12)
    if relative:
        hu = float(np.max(np.abs(H / H[0] - 1.0)))
    else:
        hu = float(np.max(np.abs(H - H[0])))

    hv = math.nan
    if p is not None:
        integrand = a * np.exp(2 * arr["A_t"]) * arr["lp1_norm"] ** (p + 1)
        if len(t) >= 3:
            running = cumulative_simpson(integrand, x=t, initial=0.0)
        else:
            running = cumulative_trapezoid(integrand, x=t, initial=0.0)
        E0 = E[0]
        law = E0 - mu * 2 * (p - 1) / (p + 1) * running
        scale = abs(E0) if abs(E0) > 1e-12 else 1.0
        hv = float(np.max(np.abs(arr["H_v"] - law)) / scale)

    return IdentityReport(
        mass_id=mass_id,
        energy_id=energy_id,
        k_id=k_id,
        v_id=v_id,
        hu_conservation=hu,
        hv_law=hv,
        cadence=delta,
        tolerances=tol,
        hu_relative=relative,
    )


@dataclass
class SpacetimeNorm:
    times: np.ndarray
    cumulative: np.ndarray
    total: float
    tail_growth: float
    saturated: bool


def spacetime_norm(
    series: Sequence[DiagnosticsRecord],
    exponent: float,
    *,
    norm: str = "lp1",
    weight: str = "none",
    a_lower: float = 0.0,
    saturation_tol: float = 0.01,
) -> SpacetimeNorm:
    """Running ``int_0^T (w(t) ||u(t)||)^exponent dt`` by the trapezoidal rule.

    ``norm`` is ``"lp1"`` (``L^{p+1}``, i.e. ``L^{r0}``) or ``"w1r0"``
    (``W^{1,p+1}``); ``weight`` is ``"none"`` or ``"exp"`` for
    ``exp(a_lower t)``.  The saturation diagnostic is the relative growth of
    the integral over the last 20% of the time window.
    """
    t = series_array(series, "t")
    attr = {"lp1": "lp1_norm", "w1r0": "w1_r0_norm"}[norm]
    vals = series_array(series, attr)
    if weight == "exp":
        vals = np.exp(a_lower * t) * vals
    elif weight != "none":
        raise ValueError(f"weight must be 'none' or 'exp', got {weight!r}")
    return spacetime_norm_from_samples(t, vals, exponent, saturation_tol)


def spacetime_norm_from_samples(
    t: np.ndarray, vals: np.ndarray, exponent: float, saturation_tol: float = 0.01
) -> SpacetimeNorm:
    t = np.asarray(t, dtype=float)
    cum = cumulative_trapezoid(np.asarray(vals, dtype=float) ** exponent, x=t, initial=0.0)
    total = float(cum[-1])
    cut = t[0] + 0.8 * (t[-1] - t[0])
    at_cut = float(np.interp(cut, t, cum))
    growth = (total - at_cut) / total if total > 0 else 0.0
    return SpacetimeNorm(t, cum, total, growth, bool(growth < saturation_tol))


@dataclass
class LiminfResult:
    min_I_tail: float
    tolerance: float
    verdict: bool


def liminf_check(
    series: Sequence[DiagnosticsRecord],
    tol: float | None = None,
    min_total_damping: float = 3.0,
) -> LiminfResult:
    """Minimum of ``I(u(t))`` over the trailing half of the run.

    Passes when that minimum is at most ``tol``, by default ``1e-3`` times
    the squared initial H^1 norm.  Requires ``A(t_end) >= 3``.
    """
    if len(series) < 2:
        raise InsufficientDataError("liminf check needs at least 2 records")
    if series[-1].A_t < min_total_damping:
        raise InsufficientDataError(
            f"A(t_end) = {series[-1].A_t:.3g} < {min_total_damping}; run is too short"
        )
    t = series_array(series, "t")
    I = series_array(series, "I_functional")
    tail = t >= t[0] + 0.5 * (t[-1] - t[0])
    if tol is None:
        tol = 1e-3 * series[0].h1_norm ** 2
    m = float(I[tail].min())
    return LiminfResult(m, float(tol), bool(m <= tol))
