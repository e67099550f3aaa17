import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_config
from dnls.damping import DampingProfile
from dnls.grid import Field, Grid
from dnls.inequalities import (
    Criticality,
    DomainError,
    EstimationError,
    bootstrap_threshold,
    bootstrap_verify,
    exponents,
    gn_estimate,
    gronwall_replay,
    gronwall_verify,
    weight_integral,
    weinstein_ratio,
)
from dnls.solver import InitialDataSpec, evolve

K_1D_CUBIC = 1 / math.sqrt(3)


@pytest.mark.parametrize(
    "dim, p, sigma, crit",
    [
        (3, 3, 3, Criticality.INTERCRITICAL),
        (1, 5, 2, Criticality.MASS_CRITICAL),
        (2, 3, 2, Criticality.MASS_CRITICAL),
        (1, 3, 1, Criticality.MASS_SUBCRITICAL),
        (3, Fraction(7, 3), 2, Criticality.MASS_CRITICAL),
    ],
)
def test_exponents(dim, p, sigma, crit):
    e = exponents(dim, p)
    assert e.sigma == sigma and e.criticality is crit
    assert e.r0 == Fraction(p) + 1
    assert e.admissibility_defect() == 0


def test_exponents_3d_cubic_values():
    e = exponents(3, 3)
    assert (e.theta, e.q0, e.r0) == (8, Fraction(8, 3), 4)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3), st.fractions(min_value=Fraction(101, 100), max_value=Fraction(49, 10)))
def test_admissibility_exact(dim, p):
    assert exponents(dim, p).admissibility_defect() == 0


@pytest.mark.parametrize("dim, p", [(3, 5), (3, 6), (1, 1), (2, 0.5), (0, 3)])
def test_exponents_domain(dim, p):
    with pytest.raises(DomainError):
        exponents(dim, p)


@pytest.fixture(scope="module")
def gn_1d():
    return gn_estimate(1, 3.0, Grid(1, 512, 20.0))


def test_gn_constant_1d_cubic(gn_1d):
    assert gn_1d.K == pytest.approx(K_1D_CUBIC, rel=1e-2)
    assert gn_1d.K == pytest.approx(K_1D_CUBIC, rel=1e-8)
    assert gn_1d.sigma == 1.0


def test_gn_ground_state_ratio_analytic():
    # Q = sqrt(2) sech: 16/3 / (8 * 2/sqrt(3)) = 1/sqrt(3)
    g = Grid(1, 1024, 32.0)
    (x,) = g.coords
    assert weinstein_ratio(Field(g, np.sqrt(2) / np.cosh(x) + 0j), 3.0) == pytest.approx(K_1D_CUBIC, rel=1e-10)


def test_gn_methods_agree(gn_1d):
    fam = gn_estimate(1, 3.0, Grid(1, 512, 20.0), method="profile_family")
    assert fam.K == pytest.approx(gn_1d.K, rel=1e-9)


def test_gn_resolution_refinement(gn_1d):
    fine = gn_estimate(1, 3.0, Grid(1, 1024, 20.0))
    assert abs(fine.K / gn_1d.K - 1) < 1e-3


def test_gaussian_is_not_optimal(gn_1d):
    g = Grid(1, 512, 20.0)
    (x,) = g.coords
    J = weinstein_ratio(Field(g, np.exp(-x**2 / 2) + 0j), 3.0)
    # closed form: sqrt(pi/2) / (pi^{3/4} (sqrt(pi)/2)^{1/2})
    assert J == pytest.approx(math.sqrt(math.pi / 2) / (math.pi**0.75 * (math.sqrt(math.pi) / 2) ** 0.5), rel=1e-12)
    assert J < gn_1d.K


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(0.5, 3.0))
def test_weinstein_ratio_scale_invariant(alpha, width):
    g = Grid(1, 256, 20.0)
    (x,) = g.coords
    u = np.exp(-x**2 / width**2) * (1 + 0.3 * np.cos(x))
    J = weinstein_ratio(Field(g, u + 0j), 3.0)
    assert weinstein_ratio(Field(g, alpha * u + 0j), 3.0) == pytest.approx(J, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(-0.5, 0.5), st.floats(0.0, 2.0))
def test_gn_inequality_holds_for_trial_fields(width, shift, kick):
    K = K_1D_CUBIC
    g = Grid(1, 512, 20.0)
    (x,) = g.coords
    u = np.exp(-(x - shift) ** 2 / width**2) * np.exp(1j * kick * x) + 0.5 * np.exp(-x**2)
    assert weinstein_ratio(Field(g, u), 3.0) <= K * (1 + 1e-9)


def test_gn_3d_runs():
    est = gn_estimate(3, 3.0, Grid(3, 32, 8.0))
    assert 0.0 < est.K < 1.0 and est.sigma == 3.0


def test_gn_nonconvergence_reports_best():
    with pytest.raises(EstimationError) as info:
        gn_estimate(1, 3.0, Grid(1, 256, 20.0), max_iter=3)
    assert info.value.best.K > 0


def test_gn_bad_arguments():
    with pytest.raises(ValueError):
        gn_estimate(2, 3.0, Grid(1, 256, 20.0))
    with pytest.raises(ValueError):
        gn_estimate(1, 3.0, Grid(1, 256, 20.0), method="newton")
    with pytest.raises(ValueError):
        gn_estimate(3, 3.0, Grid(3, 16, 8.0), method="profile_family")


# Gronwall-type lemma

T = np.linspace(0.0, 5.0, 501)


def test_gronwall_trivial_case():
    z = np.zeros_like(T)
    res = gronwall_verify(T, np.ones_like(T), z, z, C=1.0, beta=0.5)
    assert res.hypotheses_ok and res.satisfied and res.branch == "beta<1"
    np.testing.assert_allclose(res.bound, 2.0)


def _equality_beta1(C, g, h, t):
    """Solve f = C + g f + int h f exactly in the trapezoidal discretization."""
    dt = t[1] - t[0]
    f = np.empty_like(t)
    f[0] = C / (1 - g[0])
    integral = 0.0
    for n in range(1, t.size):
        rhs = C + integral + 0.5 * dt * h[n - 1] * f[n - 1]
        f[n] = rhs / (1 - g[n] - 0.5 * dt * h[n])
        integral += 0.5 * dt * (h[n - 1] * f[n - 1] + h[n] * f[n])
    return f


def test_gronwall_beta_one_equality_case():
    g = 0.9 * np.exp(-T)
    h = np.full_like(T, 0.3 / T[-1])
    f = _equality_beta1(1.0, g, h, T)
    res = gronwall_verify(T, f, g, h, C=1.0, beta=1.0)
    assert res.hypotheses_ok and res.satisfied and res.branch == "beta=1"
    assert res.t0 == pytest.approx(math.log(1.8), abs=T[1])
    start = int(np.searchsorted(T, res.t0))
    assert res.bound[-1] == pytest.approx((2.0 + f[: start + 1].max()) * math.exp(0.6), rel=1e-12)


def test_gronwall_beta_below_one_equality_case():
    # f = C + g0 f^{1/2} solved exactly, h = 0
    C, g0 = 1.0, 1.0
    f = np.full_like(T, ((g0 + math.sqrt(g0**2 + 4 * C)) / 2) ** 2)
    z = np.zeros_like(T)
    res = gronwall_verify(T, f, np.full_like(T, g0), z, C=C, beta=0.5)
    assert res.hypotheses_ok and res.satisfied
    np.testing.assert_allclose(res.bound, 2 * C + 2 * 0.5 * 1.0 * g0)


def test_gronwall_bound_uses_young_power_of_g():
    # g0 = 4: the equality solution f = 17.94 exceeds 2C + g0 = 6 but not 2C + g0^2 = 18
    C, g0 = 1.0, 4.0
    f = np.full_like(T, ((g0 + math.sqrt(g0**2 + 4 * C)) / 2) ** 2)
    z = np.zeros_like(T)
    res = gronwall_verify(T, f, np.full_like(T, g0), z, C=C, beta=0.5)
    assert res.hypotheses_ok and res.satisfied
    np.testing.assert_allclose(res.bound, 2 * C + g0**2)
    assert f[0] > 2 * C + g0


@pytest.mark.parametrize("beta", [0.5, 1.0])
def test_gronwall_detects_violation(beta):
    z = np.zeros_like(T)
    f = np.ones_like(T)
    f[250] = 5.0
    res = gronwall_verify(T, f, z, z, C=1.0, beta=beta)
    assert not res.hypotheses_ok and not res.satisfied and res.bound is None
    assert "integral inequality violated" in res.reasons


def test_gronwall_beta_one_needs_small_g():
    f = np.ones_like(T)
    res = gronwall_verify(T, f, np.full_like(T, 0.8), np.zeros_like(T), C=1.0, beta=1.0)
    assert not res.hypotheses_ok


@pytest.mark.parametrize(
    "kwargs",
    [dict(beta=0.0), dict(beta=1.5), dict(t=np.r_[0.0, 1.0, 3.0])],
)
def test_gronwall_rejects_bad_input(kwargs):
    t = kwargs.pop("t", T)
    args = dict(t=t, f=np.ones_like(t), g=np.zeros_like(t), h=np.zeros_like(t), C=1.0, beta=0.5)
    args.update(kwargs)
    with pytest.raises(ValueError):
        gronwall_verify(**args)


def test_gronwall_nonpositive_C():
    z = np.zeros_like(T)
    res = gronwall_verify(T, np.zeros_like(T), z, z, C=0.0, beta=0.5)
    assert not res.hypotheses_ok and "C must be positive" in res.reasons


# bootstrap lemma

def test_bootstrap_threshold_values():
    assert bootstrap_threshold(2.0) == pytest.approx(0.25)
    assert bootstrap_threshold(1.5) == pytest.approx(0.5 * 1.5**-3)


@pytest.mark.parametrize(
    "b, small",
    [(0.2, True), (0.24999999, True), (0.25, False), (0.3, False)],
)
def test_bootstrap_threshold_boundary(b, small):
    X = np.ones(20)
    res = bootstrap_verify(X, a=1.0, b=b, theta=2.0)
    assert res.smallness_ok is small
    assert res.hypothesis_ok and res.conclusion_ok
    assert res.passed is small
    assert res.bound == pytest.approx(2.0)


def test_bootstrap_detects_growth():
    X = np.linspace(1.0, 2.5, 20)
    res = bootstrap_verify(X, a=1.0, b=0.2, theta=2.0)
    assert not res.hypothesis_ok and not res.conclusion_ok


def test_bootstrap_initial_value_above_a():
    res = bootstrap_verify(np.full(5, 1.1), a=1.0, b=0.2, theta=2.0)
    assert not res.smallness_ok


@pytest.mark.parametrize("a, b, theta", [(1.0, 0.2, 1.0), (0.0, 0.2, 2.0), (1.0, -1.0, 2.0)])
def test_bootstrap_rejects_bad_parameters(a, b, theta):
    with pytest.raises(ValueError):
        bootstrap_verify(np.ones(3), a, b, theta)


@pytest.mark.parametrize(
    "profile", [DampingProfile.constant(0.4), DampingProfile.power_law(1.0, 2.0), DampingProfile.oscillating(0.3)],
    ids=lambda p: p.kind,
)
@pytest.mark.parametrize("p", [3.0, 2.0])
def test_weight_integral_identity(profile, p):
    for t in (0.5, 3.0, 10.0):
        val, closed = weight_integral(profile, p, t)
        assert val == pytest.approx(closed, abs=1e-10)
        assert val <= 1.0


def test_gronwall_replay_on_subcritical_run(gn_1d):
    cfg = make_config(points=512, half_length=64.0, damping=DampingProfile.constant(0.5), t_end=6.0,
                      dt=2e-3, cadence=0.05, initial=InitialDataSpec(amplitude=0.7, width=1.5))
    records = []
    evolve(cfg, [lambda r, u: records.append(r)])
    res = gronwall_replay(records, cfg.damping, cfg.p, cfg.dim, gn_1d.K)
    assert res.hypotheses_ok and res.satisfied, res.reasons
