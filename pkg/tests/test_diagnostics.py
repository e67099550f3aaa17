import math

import numpy as np
import pytest

from conftest import make_config
from dnls.damping import DampingProfile
from dnls.diagnostics import (
    CSV_COLUMNS,
    DiagnosticsRecord,
    InsufficientDataError,
    compute_record,
    identity_report,
    liminf_check,
    series_array,
    spacetime_norm,
    spacetime_norm_from_samples,
)
from dnls.solver import InitialDataSpec, evolve


def synthetic(t, **cols):
    """Records with every column zero except the ones given."""
    t = np.asarray(t, dtype=float)
    base = {name: np.zeros_like(t) for name in (
        "A_t", "mass", "energy", "I_functional", "virial_K", "V_functional", "P_functional",
        "H_v", "H_u_conserved", "grad_norm", "h1_norm", "lp1_norm", "boundary_mass_fraction")}
    base["h1_norm"] = np.ones_like(t)
    base.update({k: np.broadcast_to(v, t.shape) for k, v in cols.items()})
    return [DiagnosticsRecord(t=float(ti), **{k: float(v[i]) for k, v in base.items()})
            for i, ti in enumerate(t)]


def test_soliton_functionals(soliton1d):
    cfg = make_config(points=1024, damping=DampingProfile.zero())
    r = compute_record(soliton1d, 0.0, cfg, 0.0)
    assert r.mass == pytest.approx(4.0, rel=1e-12)
    assert r.energy == pytest.approx(-4.0 / 3.0, rel=1e-10)
    assert r.I_functional == pytest.approx(-4.0, rel=1e-10)
    assert r.P_functional == pytest.approx(0.0, abs=1e-10)
    assert r.V_functional == pytest.approx(0.0, abs=1e-14)
    assert r.H_u_conserved == pytest.approx(r.energy)
    assert r.H_v == pytest.approx(r.energy)
    assert r.grad_norm == pytest.approx(math.sqrt(4.0 / 3.0), rel=1e-10)
    assert r.lp1_norm == pytest.approx((16.0 / 3.0) ** 0.25, rel=1e-12)


def test_defocusing_signs(gaussian1d):
    cfg = make_config(points=1024, mu=1, damping=DampingProfile.zero())
    r = compute_record(gaussian1d, 0.0, cfg, 0.0)
    g2, l4 = math.sqrt(math.pi) / 2, math.sqrt(math.pi / 2)
    assert r.energy == pytest.approx(g2 + 0.5 * l4, rel=1e-12)
    assert r.I_functional == pytest.approx(g2 + l4, rel=1e-12)
    assert r.P_functional == pytest.approx(g2 + 0.25 * l4, rel=1e-12)


def test_gauged_hamiltonian_scaling(gaussian1d):
    cfg = make_config(points=1024, damping=DampingProfile.constant(0.5))
    r = compute_record(gaussian1d, 2.0, cfg, 0.7)
    assert r.A_t == pytest.approx(1.0)
    assert r.H_v == pytest.approx(math.exp(2.0) * r.energy, rel=1e-13)
    assert r.H_u_conserved == pytest.approx(math.exp(2.0) * r.energy - 2 * 2 / 4 * 0.7, rel=1e-13)


def test_record_csv_row_matches_schema(soliton1d):
    r = compute_record(soliton1d, 0.0, make_config(points=1024), 0.0)
    row = r.csv_row()
    assert len(row) == len(CSV_COLUMNS)
    assert DiagnosticsRecord.from_row(row) == DiagnosticsRecord(*row)
    assert not math.isnan(r.w1_r0_norm)


def test_nonfinite_input_rejected(soliton1d):
    with pytest.raises(ArithmeticError):
        compute_record(soliton1d, 0.0, make_config(points=1024), float("nan"))


@pytest.fixture(scope="module")
def damped_run():
    cfg = make_config(points=512, half_length=64.0, t_end=2.0, cadence=1e-2,
                      initial=InitialDataSpec(amplitude=1.0, width=2.0))
    records = []
    evolve(cfg, [lambda r, u: records.append(r)])
    return cfg, records


def test_identities_on_damped_run(damped_run):
    cfg, records = damped_run
    rep = identity_report(records, cfg.damping, p=cfg.p, mu=cfg.mu)
    assert rep.cadence == pytest.approx(1e-2)
    assert rep.mass_id < 1e-9
    assert rep.energy_id < 1e-4 and rep.k_id < 1e-4 and rep.v_id < 1e-4
    assert rep.hu_conservation < 1e-6 and rep.hu_relative is True
    assert rep.hv_law < 1e-6
    assert rep.passed()


def test_identity_residuals_shrink_with_resolution(damped_run):
    cfg, records = damped_run
    fine = []
    evolve(cfg.with_(dt=5e-4, cadence=5e-3), [lambda r, u: fine.append(r)])
    coarse = identity_report(records, cfg.damping, p=cfg.p)
    refined = identity_report(fine, cfg.damping, p=cfg.p)
    for name in ("energy_id", "k_id", "v_id"):
        assert getattr(coarse, name) / getattr(refined, name) >= 3.0


def test_identity_report_needs_three_uniform_records():
    with pytest.raises(InsufficientDataError):
        identity_report(synthetic([0.0, 1.0], mass=[1.0, 1.0]), DampingProfile.zero())
    with pytest.raises(InsufficientDataError):
        identity_report(synthetic([0.0, 1.0, 3.0], mass=[1.0, 1.0, 1.0]), DampingProfile.zero())


def test_identity_report_on_exact_mass_decay():
    t = np.linspace(0, 5, 51)
    prof = DampingProfile.constant(0.4)
    rep = identity_report(synthetic(t, A_t=0.4 * t, mass=2.0 * np.exp(-0.8 * t), H_u_conserved=np.ones_like(t)), prof)
    assert rep.mass_id < 1e-14
    assert math.isnan(rep.hv_law) and "hamiltonian_v" not in rep.verdicts
    assert rep.verdicts["mass"] and rep.verdicts["hamiltonian"]


def test_identity_report_flags_broken_mass_law():
    t = np.linspace(0, 5, 51)
    rep = identity_report(synthetic(t, A_t=0.4 * t, mass=np.ones_like(t), H_u_conserved=np.ones_like(t)),
                          DampingProfile.constant(0.4))
    assert not rep.verdicts["mass"]
    assert not rep.passed(["mass"]) and rep.passed(["hamiltonian"])


def test_liminf_synthetic_positive_I_fails():
    t = np.linspace(0, 20, 201)
    res = liminf_check(synthetic(t, A_t=0.5 * t, I_functional=np.ones_like(t)))
    assert not res.verdict and res.min_I_tail == 1.0
    assert res.tolerance == pytest.approx(1e-3)


def test_liminf_decaying_I_passes():
    t = np.linspace(0, 20, 201)
    res = liminf_check(synthetic(t, A_t=0.5 * t, I_functional=np.exp(-t)))
    assert res.verdict


def test_liminf_refuses_short_runs():
    t = np.linspace(0, 2, 21)
    with pytest.raises(InsufficientDataError):
        liminf_check(synthetic(t, A_t=0.5 * t, I_functional=np.exp(-t)))


def test_spacetime_norm_constant_integrand():
    t = np.linspace(0, 4, 41)
    s = spacetime_norm(synthetic(t, lp1_norm=2.0 * np.ones_like(t)), 3.0)
    assert s.total == pytest.approx(4 * 8.0)
    assert not s.saturated
    w = spacetime_norm(synthetic(t, lp1_norm=np.ones_like(t)), 1.0, weight="exp", a_lower=0.5)
    assert w.total == pytest.approx(2 * (math.exp(2.0) - 1), rel=1e-3)


def test_spacetime_norm_saturates_for_decaying_data():
    t = np.linspace(0, 40, 4001)
    s = spacetime_norm_from_samples(t, np.exp(-t), 2.0)
    assert s.saturated and s.total == pytest.approx(0.5, rel=1e-4)


def test_spacetime_norm_bad_weight():
    t = np.linspace(0, 1, 5)
    with pytest.raises(ValueError):
        spacetime_norm(synthetic(t), 2.0, weight="gaussian")


def test_series_array():
    t = np.linspace(0, 1, 5)
    np.testing.assert_array_equal(series_array(synthetic(t), "t"), t)
