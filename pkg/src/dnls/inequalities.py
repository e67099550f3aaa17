"""Exponent bookkeeping, the sharp Gagliardo-Nirenberg constant, and
executable checks of the Gronwall-type and bootstrap lemmas."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad

from .damping import DampingProfile
from .diagnostics import DiagnosticsRecord, series_array
from .grid import Field, Grid


class DomainError(ValueError):
    pass


class EstimationError(RuntimeError):
    def __init__(self, message: str, best: "GNEstimate"):
        super().__init__(message)
        self.best = best


class Criticality(str, Enum):
    MASS_SUBCRITICAL = "mass_subcritical"
    MASS_CRITICAL = "mass_critical"
    INTERCRITICAL = "intercritical"
    ENERGY_CRITICAL_EXCLUDED = "energy_critical_excluded"


@dataclass(frozen=True)
class ExponentSet:
    dim: int
    p: Fraction
    sigma: Fraction
    theta: Fraction
    q0: Fraction
    r0: Fraction
    criticality: Criticality

    def admissibility_defect(self) -> Fraction:
        """``2/q0 + N/r0 - N/2``; exactly zero for an admissible pair."""
        return 2 / self.q0 + self.dim / self.r0 - Fraction(self.dim, 2)


def _rational(p) -> Fraction:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, str):
        return Fraction(p)
    return Fraction(p)  # exact for ints and binary floats


def exponents(dim: int, p) -> ExponentSet:
    """sigma = N(p-1)/2, theta = 2(p-1)(p+1)/(4-(N-2)(p-1)),
    q0 = 4(p+1)/(N(p-1)), r0 = p+1, in exact rational arithmetic."""
    if dim < 1:
        raise DomainError("dimension must be >= 1")
    P = _rational(p)
    if P <= 1:
        raise DomainError(f"p must exceed 1, got {p}")
    if dim >= 3 and P >= 1 + Fraction(4, dim - 2):
        raise DomainError(
            f"p = {p} is not energy-subcritical in dimension {dim} "
            f"(need p < {1 + Fraction(4, dim - 2)})"
        )
    sigma = Fraction(dim, 2) * (P - 1)
    theta = 2 * (P - 1) * (P + 1) / (4 - (dim - 2) * (P - 1))
    q0 = 4 * (P + 1) / (dim * (P - 1))
    r0 = P + 1
    critical = 1 + Fraction(4, dim)
    if P < critical:
        crit = Criticality.MASS_SUBCRITICAL
    elif P == critical:
        crit = Criticality.MASS_CRITICAL
    else:
        crit = Criticality.INTERCRITICAL
    return ExponentSet(dim, P, sigma, theta, q0, r0, crit)


# Gagliardo-Nirenberg

def weinstein_ratio(f: Field, p: float) -> float:
    """``|u|_{p+1}^{p+1} / (|u|_2^{p+1-sigma} |grad u|_2^sigma)``."""
    grid = f.grid
    sigma = grid.dim * (p - 1) / 2
    mod = np.abs(f.values)
    S = np.sum(mod ** (p + 1)) * grid.cell_volume
    M = np.sum(mod**2) * grid.cell_volume
    uh = np.fft.fftn(f.values)
    D = grid.box_volume * np.sum(grid.k_squared * np.abs(uh) ** 2) / uh.size**2
    return float(S / (M ** ((p + 1 - sigma) / 2) * D ** (sigma / 2)))


@dataclass
class GNEstimate:
    K: float
    sigma: float
    method: str
    trial_profile: Field
    residual: float
    iterations: int = 0


def _symmetrize(u: np.ndarray) -> np.ndarray:
    # x -> -x maps index j to (n - j) mod n on [-L, L)
    for axis in range(u.ndim):
        u = 0.5 * (u + np.roll(np.flip(u, axis=axis), 1, axis=axis))
    return u


def gn_estimate(
    dim: int,
    p: float,
    grid: Grid,
    *,
    method: str = "weinstein_ascent",
    seed_width: float = 1.0,
    max_iter: int = 100_000,
    window: int = 50,
    rtol: float = 1e-10,
) -> GNEstimate:
    """Estimate the sharp constant ``K`` by maximizing the Weinstein ratio.

    ``weinstein_ascent`` runs preconditioned gradient ascent on ``log J``
    from a Gaussian seed, projecting each iterate onto real, nonnegative,
    reflection-symmetric profiles of unit mass.  It stops when ``J`` improves
    by less than ``rtol`` (relative) over ``window`` iterates.
    ``profile_family`` (1D only) evaluates ``J`` on ``sech^{2/(p-1)}``,
    the known shape of the 1D maximizer.
    """
    if grid.dim != dim:
        raise ValueError("grid dimension does not match dim")
    exponents(dim, p)
    sigma = dim * (p - 1) / 2
    r2 = grid.r_squared
    if method == "profile_family":
        if dim != 1:
            raise ValueError("profile_family is available in 1D only")
        u = np.cosh(grid.axis) ** (-2.0 / (p - 1))
        f = Field(grid, u)
        return GNEstimate(weinstein_ratio(f, p), sigma, method, f, 0.0, 0)
    if method != "weinstein_ascent":
        raise ValueError(f"unknown method {method!r}")

    k2 = grid.k_squared
    precond = 1.0 / (1.0 + k2 * seed_width**2)
    h = grid.cell_volume
    u = np.exp(-r2 / (2 * seed_width**2))

    def normalize(v):
        return v / np.sqrt(np.sum(v**2) * h)

    def ratio_and_grad(v):
        vh = np.fft.fftn(v)
        S = np.sum(v ** (p + 1)) * h
        M = np.sum(v**2) * h
        lap = np.fft.ifftn(k2 * vh).real  # -Laplacian v
        D = np.sum(v * lap) * h
        J = S / (M ** ((p + 1 - sigma) / 2) * D ** (sigma / 2))
        G = (p + 1) * v**p / S - (p + 1 - sigma) * v / M - sigma * lap / D
        return J, G

    u = normalize(u)
    J, G = ratio_and_grad(u)
    step = 0.1
    history = [J]
    it = 0
    residual = math.inf
    for it in range(1, max_iter + 1):
        direction = np.fft.ifftn(precond * np.fft.fftn(G)).real
        while True:
            trial = normalize(_symmetrize(np.abs(u + step * direction)))
            J_new, G_new = ratio_and_grad(trial)
            if J_new >= J or step < 1e-14:
                break
            step *= 0.5
        if J_new >= J:
            u, J, G = trial, J_new, G_new
            step *= 1.2
        history.append(J)
        residual = float(np.sqrt(np.sum(G**2) * h) * J)
        if it >= window and (history[-1] - history[-1 - window]) <= rtol * history[-1]:
            break
    est = GNEstimate(float(J), sigma, method, Field(grid, u), residual, it)
    if it >= max_iter:
        raise EstimationError(f"no convergence after {max_iter} iterates", est)
    return est


# Gronwall-type lemma

@dataclass
class GronwallResult:
    hypotheses_ok: bool
    bound: np.ndarray | None
    satisfied: bool
    branch: str
    reasons: list[str]
    t0: float | None = None
    max_ratio: float = math.nan


def _young_constant(beta: float) -> float:
    return (1 - beta) * (2 * beta) ** (beta / (1 - beta))


def gronwall_verify(
    t: Sequence[float],
    f: Sequence[float],
    g: Sequence[float],
    h: Sequence[float],
    C: float,
    beta: float,
    rtol: float = 1e-9,
) -> GronwallResult:
    """Check ``f <= C + g f^beta + int_0^t h f^beta`` on the samples and, if
    it holds, the explicit bound the lemma derives from it.

    For ``beta < 1`` the bound is
    ``(2C + 2(1-beta)(2beta)^{beta/(1-beta)} |g|_inf^{1/(1-beta)}
    + 2(1-beta) int h) exp(2 beta int h)``, the power on ``|g|_inf`` being
    the one Young's inequality produces; for ``beta = 1`` it is
    ``(2C + sup_{[0,t0]} f) exp(2 int h)`` with ``t0`` the first sample after
    which ``g`` stays below 1/2.  Integrals are running trapezoidal sums.
    """
    t, f, g, h = (np.asarray(x, dtype=float) for x in (t, f, g, h))
    reasons = []
    if not (0 < beta <= 1):
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    if not (t.shape == f.shape == g.shape == h.shape) or t.size < 2:
        raise ValueError("t, f, g, h must be equal-length arrays of >= 2 samples")
    d = np.diff(t)
    if np.any(d <= 0) or np.max(np.abs(d - d.mean())) > 1e-8 * d.mean():
        raise ValueError("samples must be uniform in t")
    branch = "beta=1" if beta == 1 else "beta<1"
    if not C > 0:
        reasons.append("C must be positive")
    for name, arr in (("f", f), ("g", g), ("h", h)):
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            reasons.append(f"{name} must be finite and nonnegative")
    fb = np.clip(f, 0, None) ** beta
    int_hf = cumulative_trapezoid(h * fb, t, initial=0.0)
    rhs = C + g * fb + int_hf
    if np.any(f > rhs * (1 + rtol) + rtol * abs(C)):
        reasons.append("integral inequality violated")
    int_h = cumulative_trapezoid(h, t, initial=0.0)
    t0 = None
    if branch == "beta=1":
        above = np.nonzero(g > 0.5)[0]
        start = 0 if above.size == 0 else above[-1] + 1
        if start >= t.size:
            reasons.append("g never settles below 1/2 on the samples")
        else:
            t0 = float(t[start])
    if reasons:
        return GronwallResult(False, None, False, branch, reasons, t0)
    if branch == "beta=1":
        bound = (2 * C + f[: start + 1].max()) * np.exp(2 * int_h)
    else:
        bound = (
            2 * C + 2 * _young_constant(beta) * g.max() ** (1 / (1 - beta)) + 2 * (1 - beta) * int_h
        ) * np.exp(2 * beta * int_h)
    ratio = float(np.max(f / bound))
    return GronwallResult(True, bound, bool(ratio <= 1 + 1e-12), branch, [], t0, ratio)


# bootstrap lemma

@dataclass
class BootstrapResult:
    hypothesis_ok: bool
    smallness_ok: bool
    conclusion_ok: bool
    threshold: float
    smallness_value: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.hypothesis_ok and self.smallness_ok and self.conclusion_ok


def bootstrap_threshold(theta: float) -> float:
    """``(theta-1) theta^{theta/(1-theta)}``."""
    return (theta - 1) * theta ** (theta / (1 - theta))


def bootstrap_verify(X: Sequence[float], a: float, b: float, theta: float, rtol: float = 1e-12) -> BootstrapResult:
    """Continuity argument: from ``X <= a + b X^theta``, ``X(t0) <= a`` and
    ``a b^{1/(theta-1)} < (theta-1) theta^{theta/(1-theta)}`` conclude
    ``X < theta a / (theta-1)``."""
    if not theta > 1:
        raise ValueError(f"theta must exceed 1, got {theta}")
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    X = np.asarray(X, dtype=float)
    hyp = bool(np.all(X <= (a + b * X**theta) * (1 + rtol)))
    threshold = bootstrap_threshold(theta)
    value = a * b ** (1 / (theta - 1))
    small = bool(X[0] <= a and value < threshold)
    bound = theta * a / (theta - 1)
    return BootstrapResult(hyp, small, bool(np.all(X < bound)), threshold, value, bound)


# proof replays on simulated trajectories

def weight_integral(profile: DampingProfile, p: float, t: float) -> tuple[float, float]:
    """``(p-1) int_0^t a e^{(1-p)A}`` by quadrature, and its closed form
    ``1 - e^{(1-p)A(t)}``."""
    val, _ = quad(
        lambda s: (p - 1) * profile.a(s) * math.exp((1 - p) * profile.A(s)),
        0.0, t, epsabs=1e-13, epsrel=1e-13, limit=500,
    )
    return float(val), float(1 - math.exp((1 - p) * profile.A(t)))


def gronwall_replay(
    series: Sequence[DiagnosticsRecord], profile: DampingProfile, p: float, dim: int, K: float,
    slack: float = 1e-9,
) -> GronwallResult:
    """Feed a simulated focusing trajectory through the Gronwall lemma with
    ``f = e^{2A} |grad u|^2``, ``g = 2K/(p+1) |u0|^{p+1-sigma} e^{-(p-1)A}``,
    ``h = (p-1) a g``, ``C = E(u0)``, ``beta = sigma/2``."""
    sigma = dim * (p - 1) / 2
    t = series_array(series, "t")
    A = series_array(series, "A_t")
    grad = series_array(series, "grad_norm")
    m0 = math.sqrt(series[0].mass)
    K_eff = K * (1 + slack)
    f = np.exp(2 * A) * grad**2
    g = 2 * K_eff / (p + 1) * m0 ** (p + 1 - sigma) * np.exp(-(p - 1) * A)
    h = (p - 1) * np.asarray(profile.a(t), dtype=float) * g
    return gronwall_verify(t, f, g, h, series[0].energy, sigma / 2)


def bootstrap_replay(
    series: Sequence[DiagnosticsRecord], profile: DampingProfile, p: float, dim: int, K: float,
    slack: float = 1e-9,
) -> BootstrapResult:
    """Bootstrap step of the small-data argument: with
    ``Y = sup_{s<=t} e^{2A(s)} |grad u(s)|^2``, ``Y <= |grad u0|^2 + c Y^{sigma/2}``
    where ``c = 4K/(p+1) |u0|_2^{p+1-sigma}``."""
    sigma = dim * (p - 1) / 2
    if not sigma > 2:
        raise DomainError("bootstrap replay needs sigma = N(p-1)/2 > 2")
    X = np.exp(series_array(series, "A_t")) * series_array(series, "grad_norm")
    Y = np.maximum.accumulate(X**2)
    m0 = math.sqrt(series[0].mass)
    c = 4 * K * (1 + slack) / (p + 1) * m0 ** (p + 1 - sigma)
    return bootstrap_verify(Y, series[0].grad_norm ** 2, c, sigma / 2)
