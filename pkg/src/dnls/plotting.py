"""Figures written next to the CSV/report outputs."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 110,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "savefig.bbox": "tight",
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def _floor(y):
    y = np.abs(np.asarray(y, dtype=float))
    return np.where(y > 0, y, np.nan)


def plot_diagnostics(series, path):
    t = np.array([r.t for r in series])
    A = np.array([r.A_t for r in series])
    M = np.array([r.mass for r in series])
    H = np.array([r.H_u_conserved for r in series])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(2, 2, figsize=(9, 6.5))
        ax[0, 0].semilogy(t, _floor(np.exp(2 * A) * M / M[0] - 1) if M[0] else t * 0)
        ax[0, 0].set_title(r"$|e^{2A}M(t)/M(0) - 1|$")
        scale = abs(H[0]) if abs(H[0]) > 1e-12 else 1.0
        ax[0, 1].semilogy(t, _floor((H - H[0]) / scale))
        ax[0, 1].set_title("Hamiltonian drift")
        ax[1, 0].plot(t, [r.energy for r in series], label="E")
        ax[1, 0].plot(t, [r.I_functional for r in series], label="I")
        ax[1, 0].plot(t, [r.P_functional for r in series], label="P")
        ax[1, 0].legend()
        ax[1, 0].set_xlabel("t")
        ax[1, 1].plot(t, np.exp(A) * np.array([r.grad_norm for r in series]))
        ax[1, 1].set_title(r"$e^{A(t)}\|\nabla u(t)\|_2$")
        ax[1, 1].set_xlabel("t")
        return _save(fig, path)


def plot_scattering(report, path):
    c, d = report.cauchy, report.decay
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(1, 3, figsize=(12, 3.6))
        ax[0].semilogy(c.times[:-1], _floor(c.matrix[-1, :-1]), "o-", ms=3)
        ax[0].set_title(r"$\|w(t_{max}) - w(t)\|_{H^1}$")
        ax[0].set_xlabel("t")
        ax[1].plot(d.times, d.weighted_grad)
        ax[1].set_title(r"$e^{A(t)}\|\nabla u\|_2$")
        ax[1].set_xlabel("t")
        ax[2].semilogy(d.times, _floor(d.exp_scat))
        ax[2].axhline(d.epsilon, color="k", ls="--", lw=1, label=r"$\varepsilon$")
        ax[2].set_title(r"$e^{-a_{\min} t}\|u\|_{H^1}$")
        ax[2].legend()
        ax[2].set_xlabel("t")
        return _save(fig, path)


def plot_convergence(dts: Sequence[float], errors: Sequence[float], order: float, path):
    dts, errors = np.asarray(dts), np.asarray(errors)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.6))
        ax.loglog(dts, errors, "o-", label=f"fitted order {order:.3f}")
        ref = errors[0] * (dts / dts[0]) ** 2
        ax.loglog(dts, ref, "k--", lw=1, label=r"$\propto dt^2$")
        ax.set_xlabel("dt")
        ax.set_ylabel(r"$L^2$ error")
        ax.legend()
        return _save(fig, path)


def plot_profile(field, path, title=""):
    g = field.grid
    vals = np.abs(field.values)
    while vals.ndim > 1:
        vals = vals[g.points // 2]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.4))
        ax.plot(g.axis, vals)
        ax.set_xlabel("x")
        ax.set_title(title)
        return _save(fig, path)


def plot_bound(t, values, bound, path, labels=("f", "bound")):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.4))
        ax.plot(t, values, label=labels[0])
        if np.ndim(bound) == 0:
            ax.axhline(bound, color="k", ls="--", lw=1, label=labels[1])
        else:
            ax.plot(t, bound, "k--", lw=1, label=labels[1])
        ax.set_xlabel("t")
        ax.legend()
        return _save(fig, path)
