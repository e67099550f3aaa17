"""Back-propagated profiles ``w(t) = e^{A(t)} e^{-it Laplacian} u(t)`` and
the finite-horizon evidence for their convergence in H^1."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .damping import DampingProfile, damping_scalars
from .diagnostics import DiagnosticsRecord, InsufficientDataError, series_array
from .grid import Field, forward_transform

MAX_EXPONENT = 700.0


class ScalingError(OverflowError):
    pass


def back_propagate(f: Field, t: float, profile: DampingProfile) -> Field:
    """Undo the linear damped flow: ``c_k -> e^{A(t)} e^{i|k|^2 t} c_k``."""
    A = float(profile.A(t))
    if A > MAX_EXPONENT:
        raise ScalingError(f"A({t}) = {A:.1f} exceeds the exponent range")
    grid = f.grid
    uh = np.fft.fftn(f.values)
    uh *= math.exp(A) * np.exp(1j * grid.k_squared * t)
    return Field(grid, np.fft.ifftn(uh), t)


def h1_distance(f: Field, g: Field) -> float:
    c = forward_transform(Field(f.grid, f.values - g.values)).coefficients
    return float(np.sqrt(f.grid.box_volume * np.sum((1.0 + f.grid.k_squared) * np.abs(c) ** 2)))


@dataclass
class CauchyResult:
    times: np.ndarray
    matrix: np.ndarray
    tail_times: np.ndarray
    tail_differences: np.ndarray
    reference_norm: float
    rate: float
    monotone: bool
    verdict: bool
    tolerance: float = 1e-3


def cauchy_test(
    samples: Sequence[tuple[float, Field]],
    burn_in: float = 0.0,
    rel_tol: float = 1e-3,
) -> CauchyResult:
    """Pairwise H^1 distances between back-propagated samples.

    The verdict uses the tail (second half of the post-burn-in window): every
    tail distance to the latest sample must be below ``rel_tol`` times its
    H^1 norm, and the distances must not increase along the tail.  ``rate``
    is the exponential decay rate fitted to the tail distances.
    """
    samples = [(float(t), w) for t, w in samples if t >= burn_in]
    if len(samples) < 4:
        raise InsufficientDataError(
            f"cauchy test needs >= 4 samples after burn-in, got {len(samples)}"
        )
    times = np.array([t for t, _ in samples])
    if np.any(np.diff(times) <= 0):
        raise ValueError("samples must be at increasing times")
    n = len(samples)
    spectra = [forward_transform(w).coefficients for _, w in samples]
    grid = samples[0][1].grid
    weight = grid.box_volume * (1.0 + grid.k_squared)
    matrix = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = float(np.sqrt(np.sum(weight * np.abs(spectra[i] - spectra[j]) ** 2)))
            matrix[i, j] = matrix[j, i] = d
    ref = float(np.sqrt(np.sum(weight * np.abs(spectra[-1]) ** 2)))
    mid = times[0] + 0.5 * (times[-1] - times[0])
    tail = (times >= mid) & (np.arange(n) < n - 1)
    if tail.sum() < 1:
        tail[-2] = True
    d_tail = matrix[-1, tail]
    floor = 1e-12 * max(ref, 1e-300)
    significant = d_tail > floor
    monotone = bool(np.all(np.diff(d_tail) <= 1e-9 * d_tail[:-1] + floor))
    rate = math.inf
    if significant.sum() >= 2:
        slope = np.polyfit(times[tail][significant], np.log(d_tail[significant]), 1)[0]
        rate = float(-slope)
    elif significant.any():
        rate = math.nan
    below = bool(np.all(d_tail < rel_tol * ref)) if ref > 0 else True
    return CauchyResult(
        times=times,
        matrix=matrix,
        tail_times=times[tail],
        tail_differences=d_tail,
        reference_norm=ref,
        rate=rate,
        monotone=monotone,
        verdict=below and monotone,
        tolerance=rel_tol,
    )


@dataclass
class DecayReport:
    times: np.ndarray
    weighted_grad: np.ndarray
    sup_weighted_grad: float
    decay_constant: float
    tail_variation: float
    decay_envelope_ok: bool
    a_lower: float
    exp_scat: np.ndarray
    exp_scat_value: float
    exp_scat_tail_min: float
    epsilon: float
    exp_scat_ok: bool
    bootstrap_ratio: float
    sup_lp1: float
    damping_bound_ok: bool


def decay_report(
    series: Sequence[DiagnosticsRecord],
    profile: DampingProfile,
    epsilon: float | None = None,
    tail_tol: float = 0.05,
    a_lower: float | None = None,
) -> DecayReport:
    """Decay diagnostics along a trajectory.

    * ``sup_weighted_grad`` is ``sup_t e^{A(t)} ||grad u(t)||`` over the
      samples; it is also the fitted constant of the decay envelope
      ``||grad u(t)|| <= C e^{-A(t)}``.  The envelope is accepted when the
      weighted gradient varies by at most ``tail_tol`` over the second half.
    * ``exp_scat`` is ``e^{-a_lower t} ||u(t)||_{H^1}``; the check asks its
      tail minimum to fall below ``epsilon`` (default 1e-2 ||u_0||_{H^1}).
    * ``damping_bound_ok`` asserts ``e^{A(t)} >= e^{a_lower t}`` on samples.
    """
    t = series_array(series, "t")
    A = series_array(series, "A_t")
    grad = series_array(series, "grad_norm")
    h1 = series_array(series, "h1_norm")
    if a_lower is None:
        a_lower = damping_scalars(profile).a_lower
    weighted = np.exp(A) * grad
    sup = float(weighted.max()) if weighted.size else 0.0
    tail = t >= t[0] + 0.5 * (t[-1] - t[0])
    tw = weighted[tail]
    variation = float((tw.max() - tw.min()) / tw.max()) if tw.size and tw.max() > 0 else 0.0
    exp_scat = np.exp(-a_lower * t) * h1
    if epsilon is None:
        epsilon = 1e-2 * h1[0]
    tail_min = float(exp_scat[tail].min())
    g0 = grad[0]
    return DecayReport(
        times=t,
        weighted_grad=weighted,
        sup_weighted_grad=sup,
        decay_constant=sup,
        tail_variation=variation,
        decay_envelope_ok=bool(np.isfinite(sup) and variation <= tail_tol),
        a_lower=float(a_lower),
        exp_scat=exp_scat,
        exp_scat_value=float(exp_scat[-1]),
        exp_scat_tail_min=tail_min,
        epsilon=float(epsilon),
        exp_scat_ok=bool(tail_min < epsilon) if epsilon > 0 else tail_min == 0,
        bootstrap_ratio=float(sup / g0) if g0 > 0 else 0.0,
        sup_lp1=float(series_array(series, "lp1_norm").max()),
        damping_bound_ok=bool(np.all(np.exp(A) >= np.exp(a_lower * t) * (1 - 1e-9))),
    )


@dataclass
class ScatteringReport:
    sample_times: np.ndarray
    cauchy: CauchyResult
    decay: DecayReport
    u_plus: Field = field(repr=False)

    @property
    def cauchy_matrix(self) -> np.ndarray:
        return self.cauchy.matrix

    @property
    def sup_weighted_grad(self) -> float:
        return self.decay.sup_weighted_grad

    @property
    def decay_envelope_ok(self) -> bool:
        return self.decay.decay_envelope_ok

    @property
    def exp_scat_value(self) -> float:
        return self.decay.exp_scat_value

    @property
    def residual_bound(self) -> float:
        """Largest tail distance to ``u_plus``: how far the finite run is from
        having converged."""
        d = self.cauchy.tail_differences
        return float(d.max()) if d.size else 0.0

    @property
    def verdict(self) -> bool:
        return self.cauchy.verdict and self.decay.decay_envelope_ok

    def sections(self) -> dict:
        c, d = self.cauchy, self.decay
        return {
            "verdict": {"scatters": self.verdict, "cauchy": c.verdict, "decay_envelope": d.decay_envelope_ok},
            "cauchy": {
                "samples": len(c.times),
                "first_sample": float(c.times[0]),
                "last_sample": float(c.times[-1]),
                "reference_h1_norm": c.reference_norm,
                "max_tail_difference": self.residual_bound,
                "relative_tail_difference": self.residual_bound / c.reference_norm if c.reference_norm else 0.0,
                "tolerance": c.tolerance,
                "monotone_tail": c.monotone,
                "fitted_rate": c.rate,
            },
            "decay": {
                "a_lower": d.a_lower,
                "sup_weighted_grad": d.sup_weighted_grad,
                "decay_constant": d.decay_constant,
                "tail_variation": d.tail_variation,
                "bootstrap_ratio": d.bootstrap_ratio,
                "exp_scat_value": d.exp_scat_value,
                "exp_scat_tail_min": d.exp_scat_tail_min,
                "epsilon": d.epsilon,
                "exp_scat_ok": d.exp_scat_ok,
                "sup_lp1_norm": d.sup_lp1,
                "damping_bound_ok": d.damping_bound_ok,
            },
            "u_plus": {"time": float(c.times[-1]), "h1_norm": c.reference_norm, "residual_bound": self.residual_bound},
        }


def scattering_report(
    series: Sequence[DiagnosticsRecord],
    fields: Sequence[tuple[float, Field]],
    profile: DampingProfile,
    burn_in: float = 0.0,
    epsilon: float | None = None,
    rel_tol: float = 1e-3,
) -> ScatteringReport:
    """Back-propagate stored fields ``u(t)`` and assemble the full report."""
    samples = [(t, back_propagate(u, t, profile)) for t, u in fields]
    cauchy = cauchy_test(samples, burn_in=burn_in, rel_tol=rel_tol)
    decay = decay_report(series, profile, epsilon=epsilon)
    return ScatteringReport(cauchy.times, cauchy, decay, samples[-1][1])
