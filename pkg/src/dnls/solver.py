"""Strang split-step Fourier integration of the damped NLS

    i u_t + Laplacian u + i a(t) u = mu |u|^(p-1) u,

in the direct form (unknown ``u``) or the gauged form (unknown
``v = exp(A(t)) u``, which solves the undamped equation with nonlinearity
coefficient ``exp((1-p) A(t))``).
"""
from __future__ import annotations

import time as _time
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .damping import DampingProfile
from .grid import (
    ConfigurationError,
    Field,
    Grid,
    boundary_mass_fraction,
    gradient_norm_sq,
    mass,
)

FORMULATIONS = ("direct", "gauged")
INITIAL_KINDS = ("gaussian", "soliton", "scaled_profile")


class ConfigError(ConfigurationError):
    """A simulation configuration violates one of its invariants."""


class InstabilityError(ArithmeticError):
    def __init__(self, t: float, message: str = "non-finite values after step"):
        super().__init__(f"{message} at t = {t:.6g}")
        self.time = t


@dataclass(frozen=True)
class InitialDataSpec:
    kind: str = "gaussian"
    amplitude: float = 1.0
    width: float = 1.0
    center: tuple[float, ...] = ()
    wave_vector: tuple[float, ...] = ()
    eta: float = 1.0
    path: str = ""
    scale: float = 1.0
    noise: float = 0.0

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ConfigError(f"unknown initial data kind {self.kind!r}")
        if self.kind == "gaussian" and not self.width > 0:
            raise ConfigError("gaussian width must be positive")
        if self.kind == "soliton" and not self.eta > 0:
            raise ConfigError("soliton eta must be positive")
        if self.kind == "scaled_profile" and not self.path:
            raise ConfigError("scaled_profile needs a checkpoint path")


@dataclass(frozen=True)
class ReportOptions:
    """What the experiment driver produces beyond the diagnostics CSV."""

    checks: tuple[str, ...] = ("mass", "hamiltonian")
    scattering: bool = False
    sample_every: int = 0
    burn_in: float = 0.0
    epsilon: float = 0.0
    figures: bool = True
    expect_blowup: bool = False


@dataclass(frozen=True)
class SimConfig:
    dim: int
    p: float
    mu: int
    points: int
    half_length: float
    damping: DampingProfile
    t_end: float
    dt: float
    initial: InitialDataSpec = InitialDataSpec()
    formulation: str = "direct"
    cadence: float = 0.1
    blowup_threshold: float = 1e6
    resolution_tail: float = 1e-4
    nonlinear: bool = True
    seed: int = 0
    name: str = "run"
    base_dir: str = "."
    reports: ReportOptions = ReportOptions()

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not self.p > 1:
            raise ConfigError(f"p must exceed 1, got {self.p}")
        if self.dim >= 3 and self.p >= 1 + 4 / (self.dim - 2):
            raise ConfigError(
                f"energy-supercritical p: need p < {1 + 4 / (self.dim - 2):g} "
                f"for dim {self.dim}, got {self.p}"
            )
        if self.mu not in (-1, 1):
            raise ConfigError(f"mu must be +1 or -1, got {self.mu}")
        if self.formulation not in FORMULATIONS:
            raise ConfigError(f"formulation must be one of {FORMULATIONS}")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if not self.cadence > 0:
            raise ConfigError("cadence must be positive")
        steps = self.cadence / self.dt
        if abs(steps - round(steps)) > 1e-6 * steps or round(steps) < 1:
            raise ConfigError("cadence must be a positive integer multiple of dt")
        if self.initial.kind == "soliton" and (self.dim != 1 or self.p != 3):
            raise ConfigError("soliton initial data requires dim = 1 and p = 3")
        self.grid  # validates grid parameters

    @property
    def grid(self) -> Grid:
        return _grid(self.dim, self.points, self.half_length)

    @property
    def steps_per_record(self) -> int:
        return int(round(self.cadence / self.dt))

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@lru_cache(maxsize=16)
def _grid(dim: int, points: int, half_length: float) -> Grid:
    try:
        return Grid(dim, points, half_length)
    except ConfigurationError as exc:
        raise ConfigError(str(exc)) from exc


@lru_cache(maxsize=16)
def _half_propagator(grid: Grid, dt: float) -> np.ndarray:
    return np.exp(-0.5j * dt * grid.k_squared)


@lru_cache(maxsize=16)
def _high_band(grid: Grid) -> np.ndarray:
    """Modes with some |k_j| above two thirds of the Nyquist wavenumber."""
    cut = (2.0 / 3.0) * grid.k_max
    mask = np.zeros(grid.shape, dtype=bool)
    for k in grid.kvecs:
        mask |= np.abs(k) > cut
    return mask


def phase_integral(profile: DampingProfile, p: float, t0: float, t1: float) -> float:
    """``int_{t0}^{t1} exp((1-p) A(s)) ds``."""
    if profile.kind == "zero":
        return t1 - t0
    if profile.kind == "constant":
        c = (p - 1.0) * profile.param("a")
        if c == 0:
            return t1 - t0
        return float((np.exp(-c * t0) - np.exp(-c * t1)) / c)
    return _gauss_legendre(lambda s: np.exp((1.0 - p) * profile.A(s)), t0, t1)


def _gauss_legendre(fn, t0: float, t1: float, tol: float = 1e-12) -> float:
    mid, half = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
    prev = None
    for n in (4, 8, 16, 32, 64):
        x, w = np.polynomial.legendre.leggauss(n)
        val = half * float(np.dot(w, fn(mid + half * x)))
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        prev = val
    # subdivide if the panel is too rough for a single rule
    return _gauss_legendre(fn, t0, mid, tol) + _gauss_legendre(fn, mid, t1, tol)


def _strang(u: np.ndarray, t: float, dt: float, cfg: SimConfig):
    """One Strang step on raw values; returns (values, |grad|^2, high-band fraction)."""
    grid = cfg.grid
    prop = _half_propagator(grid, dt)
    A = cfg.damping.A
    if cfg.formulation == "direct":
        t_mid = t + 0.5 * dt
        d1 = np.exp(-(A(t_mid) - A(t)))
        d2 = np.exp(-(A(t + dt) - A(t_mid)))
        coeff = dt
    else:
        d1 = d2 = 1.0
        coeff = phase_integral(cfg.damping, cfg.p, t, t + dt)
    u = np.fft.ifftn(np.fft.fftn(u) * prop)
    if d1 != 1.0:
        u *= d1
    if cfg.nonlinear:
        u = u * np.exp((-1j * cfg.mu * coeff) * np.abs(u) ** (cfg.p - 1.0))
    uh = np.fft.fftn(u)
    power = np.abs(uh) ** 2
    total = power.sum()
    n_total = uh.size
    grad_sq = d2**2 * grid.box_volume * float(np.sum(grid.k_squared * power)) / n_total**2
    tail = float(power[_high_band(grid)].sum() / total) if total > 0 else 0.0
    u = np.fft.ifftn(uh * prop)
    if d2 != 1.0:
        u *= d2
    if not np.all(np.isfinite(u)):
        raise InstabilityError(t + dt)
    return u, grad_sq, tail


def step_strang(state: Field, t: float, dt: float, cfg: SimConfig) -> Field:
    """Advance ``state`` from ``t`` to ``t + dt``.

    Negative ``dt`` steps backward (used for reversibility checks); the
    damping profile must still be evaluated at nonnegative times.
    """
    if dt == 0:
        raise ValueError("dt must be nonzero")
    values, _, _ = _strang(state.values, t, dt, cfg)
    return Field(state.grid, values, t + dt)


def gauge_transfer(f: Field, t: float, profile: DampingProfile, direction: str) -> Field:
    """``v = exp(A(t)) u`` (``u_to_v``) or its inverse (``v_to_u``)."""
    if direction == "u_to_v":
        factor = np.exp(profile.A(t))
    elif direction == "v_to_u":
        factor = np.exp(-profile.A(t))
    else:
        raise ValueError(f"direction must be 'u_to_v' or 'v_to_u', got {direction!r}")
    return Field(f.grid, f.values * factor, f.time)


def initial_field(cfg: SimConfig, check_boundary: bool = True) -> Field:
    """Build ``u_0`` from the configuration's initial data spec."""
    from .io import read_checkpoint  # local: io imports this module

    spec = cfg.initial
    grid = cfg.grid
    if spec.kind == "gaussian":
        center = _vector(spec.center, grid.dim, "center")
        kvec = _vector(spec.wave_vector, grid.dim, "wave_vector")
        r2 = sum((x - c) ** 2 for x, c in zip(grid.coords, center))
        phase = sum(k * x for k, x in zip(kvec, grid.coords))
        values = spec.amplitude * np.exp(-r2 / (2 * spec.width**2)) * np.exp(1j * phase)
    elif spec.kind == "soliton":
        (c,) = _vector(spec.center, 1, "center")
        (x,) = grid.coords
        values = np.sqrt(2.0) * spec.eta / np.cosh(spec.eta * (x - c)) + 0j
    else:
        path = Path(spec.path)
        if not path.is_absolute():
            path = Path(cfg.base_dir) / path
        loaded = read_checkpoint(path)
        if loaded.grid != grid:
            raise ConfigError(
                f"checkpoint grid {loaded.grid} does not match configured grid {grid}"
            )
        values = spec.scale * loaded.values
    values = np.broadcast_to(values, grid.shape).astype(complex)
    if spec.noise:
        rng = np.random.default_rng(cfg.seed)
        noise = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        # smooth the perturbation to the lower third of the spectrum
        nh = np.fft.fftn(noise)
        nh[_high_band(grid)] = 0.0
        nh *= np.exp(-grid.k_squared)
        noise = np.fft.ifftn(nh)
        noise /= np.abs(noise).max()
        values = values * (1.0 + spec.noise * noise)
    f = Field(grid, values, 0.0)
    if check_boundary:
        frac = boundary_mass_fraction(f)
        if frac >= 1e-8:
            raise ConfigError(
                f"initial data not localized: boundary-shell mass fraction {frac:.2e} >= 1e-8"
            )
    return f


def _vector(values: Sequence[float], dim: int, name: str) -> tuple[float, ...]:
    if len(values) == 0:
        return (0.0,) * dim
    if len(values) != dim:
        raise ConfigError(f"{name} must have {dim} components")
    return tuple(float(v) for v in values)


@dataclass
class TrajectorySummary:
    final_time: float
    steps: int
    records: int
    blown_up: bool
    blowup_time: float | None
    blowup_reason: str
    final_mass: float
    final_grad_norm: float
    final_h1_norm: float
    wall_time: float
    final_field: Field | None = field(default=None, repr=False)


Sink = Callable[["object", Field], None]


def evolve(
    cfg: SimConfig, sinks: Iterable[Sink] = (), u0: Field | None = None
) -> TrajectorySummary:
    """Integrate from 0 to ``t_end``, emitting a DiagnosticsRecord every
    ``cadence`` to each sink as ``sink(record, u)``.

    The running integral ``int_0^t a e^{2A} ||u||_{p+1}^{p+1}`` entering the
    conserved Hamiltonian is accumulated by the trapezoidal rule at every
    solver step.  The run aborts with a blow-up verdict when
    ``||grad u||_2`` exceeds ``blowup_threshold`` or when the fraction of
    spectral power above two thirds of the Nyquist wavenumber exceeds
    ``resolution_tail`` (the blow-up has outrun the grid).
    """
    from .diagnostics import compute_record

    sinks = list(sinks)
    start = _time.perf_counter()
    grid = cfg.grid
    u = initial_field(cfg) if u0 is None else u0.copy()
    if cfg.formulation == "gauged":
        state = gauge_transfer(u, 0.0, cfg.damping, "u_to_v").values
    else:
        state = u.values.copy()
    p, dt = cfg.p, cfg.dt
    profile = cfg.damping

    def integrand(vals: np.ndarray, t: float) -> float:
        # integrand in terms of the direct unknown u
        A = profile.A(t)
        if cfg.formulation == "gauged":
            lp = np.sum(np.abs(vals) ** (p + 1)) * grid.cell_volume * np.exp(-(p + 1) * A)
        else:
            lp = np.sum(np.abs(vals) ** (p + 1)) * grid.cell_volume
        return float(profile.a(t) * np.exp(2 * A) * lp)

    def as_u(vals: np.ndarray, t: float) -> Field:
        f = Field(grid, vals, t)
        if cfg.formulation == "gauged":
            return gauge_transfer(f, t, profile, "v_to_u")
        return Field(grid, vals.copy(), t)

    running = 0.0
    prev_integrand = integrand(state, 0.0)
    n_records = 0
    blown, blow_t, reason = False, None, ""

    def emit(t: float) -> None:
        nonlocal n_records
        uf = as_u(state, t)
        rec = compute_record(uf, t, cfg, running)
        for sink in sinks:
            sink(rec, uf)
        n_records += 1

    emit(0.0)
    n = 0
    for n in range(1, cfg.n_steps + 1):
        t_prev = (n - 1) * dt
        t = n * dt
        try:
            state, grad_sq, tail = _strang(state, t_prev, dt, cfg)
        except InstabilityError as exc:
            blown, blow_t, reason = True, exc.time, "non-finite values"
            break
        cur = integrand(state, t)
        running += 0.5 * dt * (prev_integrand + cur)
        prev_integrand = cur
        grad_u = np.sqrt(grad_sq)
        if cfg.formulation == "gauged":
            grad_u *= np.exp(-profile.A(t))
        if grad_u > cfg.blowup_threshold:
            blown, blow_t, reason = True, t, "gradient norm above threshold"
        elif cfg.nonlinear and tail > cfg.resolution_tail:
            blown, blow_t, reason = True, t, "spectral power escaped the resolved band"
        if blown:
            break
        if n % cfg.steps_per_record == 0:
            emit(t)

    final_t = n * dt if not (blown and reason == "non-finite values") else (n - 1) * dt
    if blown and reason == "non-finite values":
        final = None
        fm = fg = fh = float("nan")
    else:
        final = as_u(state, final_t)
        fm = mass(final)
        g2 = gradient_norm_sq(final)
        fg = float(np.sqrt(g2))
        fh = float(np.sqrt(fm + g2))
    return TrajectorySummary(
        final_time=final_t,
        steps=n,
        records=n_records,
        blown_up=blown,
        blowup_time=blow_t,
        blowup_reason=reason,
        final_mass=fm,
        final_grad_norm=fg,
        final_h1_norm=fh,
        wall_time=_time.perf_counter() - start,
        final_field=final,
    )
