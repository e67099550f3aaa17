"""Periodic-box discretization of R^N with spectral transforms.

Conventions used throughout the package:

* The box is ``[-L, L)^N`` sampled with ``n`` points per axis, spacing
  ``h = 2L/n``.
* Spectral coefficients are Fourier-series coefficients,
  ``c_k = fft(f) / n^N``, so that ``f(x) = sum_k c_k exp(i k.x)``.  With
  this normalization Parseval reads ``sum |f|^2 h^N = (2L)^N sum |c_k|^2``.
* The free Schrodinger flow ``exp(i t Laplacian)`` multiplies ``c_k`` by
  ``exp(-i |k|^2 t)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class ConfigurationError(ValueError):
    """Inconsistent grid or field configuration."""


class NumericError(ArithmeticError):
    """Non-finite values where finite ones are required."""


class DomainTruncationWarning(UserWarning):
    """Field carries non-negligible mass near the box boundary."""


BOUNDARY_SHELL = 0.05
TRUNCATION_TOL = 1e-8


@dataclass(frozen=True)
class Grid:
    dim: int
    points: int
    half_length: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.points < 16 or self.points & (self.points - 1):
            raise ConfigurationError(
                f"points per axis must be a power of two >= 16, got {self.points}"
            )
        if not self.half_length > 0:
            raise ConfigurationError("half_length must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / self.points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def box_volume(self) -> float:
        return (2.0 * self.half_length) ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.half_length + self.spacing * np.arange(self.points)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Per-axis wavenumbers ``pi j / L`` in standard FFT ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij", sparse=True))

    @cached_property
    def kvecs(self) -> tuple[np.ndarray, ...]:
        return tuple(
            np.meshgrid(*([self.wavenumbers] * self.dim), indexing="ij", sparse=True)
        )

    @cached_property
    def k_squared(self) -> np.ndarray:
        return sum(k**2 for k in self.kvecs) * np.ones(self.shape)

    @cached_property
    def r_squared(self) -> np.ndarray:
        return sum(x**2 for x in self.coords) * np.ones(self.shape)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        """Points in the outer 5% of the box along any axis."""
        inner = (1.0 - BOUNDARY_SHELL) * self.half_length
        mask = np.zeros(self.shape, dtype=bool)
        for x in self.coords:
            mask |= np.abs(x) >= inner
        return mask

    @property
    def k_max(self) -> float:
        return np.pi / self.spacing


@dataclass
class Field:
    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise ConfigurationError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.time)


@dataclass
class SpectralField:
    grid: Grid
    coefficients: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=complex)
        if self.coefficients.shape != self.grid.shape:
            raise ConfigurationError(
                f"coefficient shape {self.coefficients.shape} does not match grid "
                f"{self.grid.shape}"
            )


def forward_transform(f: Field) -> SpectralField:
    n_total = f.grid.points**f.grid.dim
    return SpectralField(f.grid, np.fft.fftn(f.values) / n_total, f.time)


def inverse_transform(F: SpectralField) -> Field:
    n_total = F.grid.points**F.grid.dim
    return Field(F.grid, np.fft.ifftn(F.coefficients * n_total), F.time)


def _check_finite(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericError("field contains non-finite values")


def norms(f: Field, p: float) -> float:
    """L^p norm of ``f`` by the rectangle rule (exact for periodic band-limited data)."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    _check_finite(f.values)
    mod = np.abs(f.values)
    if np.isinf(p):
        return float(mod.max())
    return float((np.sum(mod**p) * f.grid.cell_volume) ** (1.0 / p))


def lp_power(f: Field, p: float) -> float:
    """``int |f|^p`` without the final root."""
    _check_finite(f.values)
    return float(np.sum(np.abs(f.values) ** p) * f.grid.cell_volume)


def mass(f: Field) -> float:
    return lp_power(f, 2.0)


def gradient_norm_sq(f: Field) -> float:
    """``||grad f||_2^2`` computed as ``(2L)^N sum |k|^2 |c_k|^2``."""
    c = forward_transform(f).coefficients
    return float(f.grid.box_volume * np.sum(f.grid.k_squared * np.abs(c) ** 2))


def gradient(f: Field) -> list[np.ndarray]:
    """Spectral partial derivatives of ``f`` in physical space."""
    fh = np.fft.fftn(f.values)
    return [np.fft.ifftn(1j * k * fh) for k in f.grid.kvecs]


def boundary_mass_fraction(f: Field) -> float:
    total = np.sum(np.abs(f.values) ** 2)
    if total == 0:
        return 0.0
    return float(np.sum(np.abs(f.values[f.grid.boundary_mask]) ** 2) / total)


def _warn_if_truncated(f: Field) -> None:
    frac = boundary_mass_fraction(f)
    if frac >= TRUNCATION_TOL:
        warnings.warn(
            f"boundary-shell mass fraction {frac:.3e} exceeds {TRUNCATION_TOL:g}; "
            "moment is affected by the periodic box",
            DomainTruncationWarning,
            stacklevel=3,
        )


def weighted_variance(f: Field) -> float:
    """``int |x|^2 |f|^2``.  Warns with DomainTruncationWarning if the field
    has not decayed before the box boundary."""
    _check_finite(f.values)
    _warn_if_truncated(f)
    return _weighted_variance(f)


def _weighted_variance(f: Field) -> float:
    return float(np.sum(f.grid.r_squared * np.abs(f.values) ** 2) * f.grid.cell_volume)


def v_functional(f: Field, grad: list[np.ndarray] | None = None) -> float:
    """``Im int (x . grad f) conj(f)``."""
    _check_finite(f.values)
    _warn_if_truncated(f)
    return _v_functional(f, grad)


def _v_functional(f: Field, grad: list[np.ndarray] | None = None) -> float:
    if grad is None:
        grad = gradient(f)
    x_dot_grad = sum(x * g for x, g in zip(f.grid.coords, grad))
    return float(np.sum(x_dot_grad * np.conj(f.values)).imag * f.grid.cell_volume)


def h1_norm(f: Field) -> float:
    return float(np.sqrt(mass(f) + gradient_norm_sq(f)))


def w1r_norm(f: Field, r: float, grad: list[np.ndarray] | None = None) -> float:
    """``||f||_r + || |grad f| ||_r``."""
    if grad is None:
        grad = gradient(f)
    grad_mod = np.sqrt(sum(np.abs(g) ** 2 for g in grad))
    return norms(f, r) + float(
        (np.sum(grad_mod**r) * f.grid.cell_volume) ** (1.0 / r)
    )


def free_flow(F: SpectralField, t: float) -> SpectralField:
    """Apply ``exp(i t Laplacian)`` to spectral data."""
    return SpectralField(
        F.grid, F.coefficients * np.exp(-1j * F.grid.k_squared * t), F.time + t
    )
