"""Time-dependent damping profiles a(t) and their antiderivatives A(t)."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KINDS = ("constant", "power_law", "oscillating", "tabulated", "zero")

_PARAMS = {
    "constant": ("a",),
    "power_law": ("a", "theta"),
    "oscillating": ("a0",),
    "tabulated": ("path",),
    "zero": (),
}


class DampingError(ValueError):
    pass


@dataclass(frozen=True)
class DampingProfile:
    """A nonnegative continuous damping coefficient.

    ``params`` holds the numeric parameters of ``kind``; tabulated profiles
    carry their samples in ``times``/``values`` and are interpolated
    linearly, held constant past the last sample.
    """

    kind: str
    params: tuple[tuple[str, float], ...] = ()
    times: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    source: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DampingError(f"unknown damping kind {self.kind!r}")
        p = self.param
        if self.kind == "constant" and p("a") < 0:
            raise DampingError("constant damping must be nonnegative")
        if self.kind == "power_law" and (p("a") < 0 or p("theta") < 0):
            raise DampingError("power_law requires a >= 0 and theta >= 0")
        if self.kind == "oscillating" and p("a0") < 0:
            raise DampingError("oscillating damping requires a0 >= 0")
        if self.kind == "tabulated":
            t = np.asarray(self.times)
            v = np.asarray(self.values)
            if t.size < 2 or t.size != v.size:
                raise DampingError("tabulated profile needs >= 2 (t, a) samples")
            if t[0] != 0.0 or np.any(np.diff(t) <= 0):
                raise DampingError("tabulated times must start at 0 and increase")
            if np.any(v < 0):
                raise DampingError("tabulated damping must be nonnegative")

    # construction helpers
    @classmethod
    def constant(cls, a: float) -> "DampingProfile":
        return cls("constant", (("a", float(a)),))

    @classmethod
    def power_law(cls, a: float, theta: float) -> "DampingProfile":
        return cls("power_law", (("a", float(a)), ("theta", float(theta))))

    @classmethod
    def oscillating(cls, a0: float) -> "DampingProfile":
        return cls("oscillating", (("a0", float(a0)),))

    @classmethod
    def zero(cls) -> "DampingProfile":
        return cls("zero")

    @classmethod
    def tabulated(cls, times, values, source: str = "") -> "DampingProfile":
        return cls(
            "tabulated",
            times=tuple(float(t) for t in times),
            values=tuple(float(v) for v in values),
            source=source,
        )

    def param(self, name: str) -> float:
        return dict(self.params)[name]

    def spec(self) -> str:
        """Inverse of :func:`parse_profile`."""
        if self.kind == "zero":
            return "zero"
        if self.kind == "tabulated":
            return f"tabulated:path={self.source}"
        body = ",".join(f"{k}={v!r}" for k, v in self.params)
        return f"{self.kind}:{body}"

    # evaluation
    def a(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DampingError("damping is defined for t >= 0 only")
        k = self.kind
        if k == "zero":
            out = np.zeros_like(t)
        elif k == "constant":
            out = np.full_like(t, self.param("a"))
        elif k == "power_law":
            out = self.param("a") / (1.0 + t) ** self.param("theta")
        elif k == "oscillating":
            out = self.param("a0") * (1.0 + np.sin(t))
        else:
            out = np.interp(t, self.times, self.values)
        return out if out.ndim else float(out)

    def A(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DampingError("damping is defined for t >= 0 only")
        k = self.kind
        if k == "zero":
            out = np.zeros_like(t)
        elif k == "constant":
            out = self.param("a") * t
        elif k == "power_law":
            a, th = self.param("a"), self.param("theta")
            if th == 1.0:
                out = a * np.log1p(t)
            else:
                out = a * ((1.0 + t) ** (1.0 - th) - 1.0) / (1.0 - th)
        elif k == "oscillating":
            out = self.param("a0") * (t + 1.0 - np.cos(t))
        else:
            out = self._tabulated_A(t)
        return out if out.ndim else float(out)

    def _tabulated_A(self, t: np.ndarray) -> np.ndarray:
        ts = np.asarray(self.times)
        vs = np.asarray(self.values)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (vs[1:] + vs[:-1]) * np.diff(ts))])
        t_flat = np.atleast_1d(t)
        idx = np.clip(np.searchsorted(ts, t_flat, side="right") - 1, 0, ts.size - 1)
        a_at = np.interp(t_flat, ts, vs)
        base = cum[idx]
        # exact integral of the linear interpolant from ts[idx] to t
        out = base + 0.5 * (vs[idx] + a_at) * (t_flat - ts[idx])
        return out.reshape(t.shape)

    def A_infinity(self) -> float:
        """Total damping ``int_0^inf a``; ``inf`` when divergent."""
        k = self.kind
        if k == "zero":
            return 0.0
        if k == "power_law":
            a, th = self.param("a"), self.param("theta")
            if a == 0.0:
                return 0.0
            return a / (th - 1.0) if th > 1.0 else np.inf
        if k == "tabulated":
            return np.inf if self.values[-1] > 0 else float(self._tabulated_A(np.array(self.times[-1])))
        scale = self.param("a") if k == "constant" else self.param("a0")
        return np.inf if scale > 0 else 0.0


def a_of_t(profile: DampingProfile, t: float) -> float:
    return profile.a(t)


def A_of_t(profile: DampingProfile, t: float) -> float:
    return profile.A(t)


def parse_profile(text: str, base_dir: str | Path | None = None) -> DampingProfile:
    """Parse ``kind:key=value,...`` (e.g. ``power_law:a=1,theta=2``)."""
    text = text.strip()
    kind, _, body = text.partition(":")
    kind = kind.strip()
    if kind not in KINDS:
        raise DampingError(f"unknown damping kind {kind!r} in {text!r}")
    pairs = {}
    if body.strip():
        for item in body.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise DampingError(f"malformed damping parameter {item!r} in {text!r}")
            pairs[key.strip()] = val.strip()
    expected = set(_PARAMS[kind])
    if set(pairs) != expected:
        raise DampingError(
            f"damping kind {kind!r} takes parameters {sorted(expected)}, got {sorted(pairs)}"
        )
    if kind == "tabulated":
        path = Path(pairs["path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        times, values = _read_table(path)
        return DampingProfile.tabulated(times, values, source=pairs["path"])
    try:
        numeric = tuple((k, float(pairs[k])) for k in _PARAMS[kind])
    except ValueError as exc:
        raise DampingError(f"non-numeric damping parameter in {text!r}") from exc
    return DampingProfile(kind, numeric)


def _read_table(path: Path) -> tuple[list[float], list[float]]:
    times, values = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                times.append(float(row[0]))
                values.append(float(row[1]))
            except ValueError:
                if times:
                    raise DampingError(f"bad row {row!r} in {path}")
                # header line
    return times, values


@dataclass(frozen=True)
class DampingScalars:
    a_lower: float
    divergent: bool
    horizon_used: float
    heuristic: bool = False
    grid_minimum: float = field(default=np.nan, compare=False)


def _limit_ratio(profile: DampingProfile) -> float | None:
    """``lim_{t->inf} A(t)/t`` where known in closed form."""
    k = profile.kind
    if k == "zero":
        return 0.0
    if k == "constant":
        return profile.param("a")
    if k == "oscillating":
        return profile.param("a0")
    if k == "power_law":
        return profile.param("a") if profile.param("theta") == 0 else 0.0
    return None


def _tabulated_divergent(profile: DampingProfile) -> bool:
    t = np.asarray(profile.times)
    v = np.asarray(profile.values)
    t_last = t[-1]
    tail = (t >= t_last / 10.0) & (t > 0)
    if v[-1] <= 0:
        return False
    if tail.sum() < 2 or np.any(v[tail] <= 0):
        return True
    slope = np.polyfit(np.log(t[tail]), np.log(v[tail]), 1)[0]
    # a ~ t^slope is integrable at infinity iff slope < -1
    return bool(slope >= -1.0)


def damping_scalars(
    profile: DampingProfile, horizon: float = 1e4, n_grid: int = 10_000
) -> DampingScalars:
    """Infimum of ``A(t)/t`` over ``t > 0`` and divergence of ``int_0^inf a``.

    The infimum combines a log-spaced grid on ``(1e-6, horizon]`` with the
    analytic ``t -> inf`` limit when the kind has one.  Tabulated profiles
    decide divergence from the power-law trend of their last decade of
    samples and are flagged ``heuristic``.
    """
    if not horizon > 0:
        raise DampingError("horizon must be positive")
    heuristic = profile.kind == "tabulated"
    if heuristic:
        # only the sampled range carries information; beyond it the trend decides
        horizon = min(horizon, profile.times[-1])
    t = np.logspace(-6, np.log10(horizon), n_grid)
    ratio = profile.A(t) / t
    grid_min = float(ratio.min())
    limit = _limit_ratio(profile)
    a_lower = grid_min if limit is None else min(grid_min, limit)
    a_lower = max(a_lower, 0.0)
    if heuristic:
        divergent = _tabulated_divergent(profile)
        if not divergent:
            a_lower = 0.0
    else:
        divergent = bool(np.isinf(profile.A_infinity()))
    if a_lower > 0:
        divergent = True
    return DampingScalars(a_lower, divergent, float(horizon), heuristic, grid_min)
