"""Energy audit, a-priori right-hand side, cumulative verdict, translates."""

import dataclasses

import numpy as np
import pytest
from conftest import run_scenario

from tecsim.coefficients import compute_L_sharp
from tecsim.config import parse_config
from tecsim.errors import BoundViolation
from tecsim.estimates import (
    EnergyAuditor,
    audit_trajectory,
    compute_R,
    translate_estimate,
    verify_cotaul,
)
from tecsim.fem_core import (
    assemble_mass,
    estimate_K2,
    estimate_P2,
    field_from_function,
    volume_load_vector,
)
from tecsim.stepper import RotheConfig


def scaled_coeffs(coeffs, lam):
    """Scale all boundary/initial data by lam, leaving coefficients alone."""

    def sc_t(f):
        return None if f is None else (lambda x, y, t, f=f: lam * f(x, y, t))

    def sc_s(f):
        if f is None:
            return None
        if callable(f):
            return lambda x, y, f=f: lam * f(x, y)
        return lam * f

    return dataclasses.replace(
        coeffs,
        h=tuple(sc_t(f) if callable(f) else (None if f is None else lam * f) for f in coeffs.h),
        g=sc_s(coeffs.g),
        u0=tuple(sc_s(f) for f in coeffs.u0),
    )


# ---------------------------------------------------------------------------
# the data side R
# ---------------------------------------------------------------------------


def test_R_reduces_to_initial_energies_without_fluxes(scen_decoupled):
    scn = scen_decoupled
    mesh = scn.build_mesh()
    bound = compute_R(scn.coeffs, scn.ledger, mesh, scn.rothe, K2=1.0, P2=1.0)
    vol = volume_load_vector(mesh)
    area = vol.sum()
    M = assemble_mass(mesh)
    u1 = field_from_function(mesh, scn.coeffs.u0[0]).values
    th = field_from_function(mesh, scn.coeffs.u0[1]).values
    u1s = u1 - (vol @ u1) / area
    expect_species = float(u1s @ (M @ u1s))
    expect_temp = 2.0 * scn.ledger.b_bounds[1] * float(th @ (M @ th))
    t = bound.terms
    np.testing.assert_allclose(t["initial species energy"], expect_species, rtol=1e-12)
    np.testing.assert_allclose(t["initial temperature energy"], expect_temp, rtol=1e-12)
    for name in (
        "surface current",
        "species boundary flux",
        "heat flux (electrodes)",
        "heat flux (wall)",
    ):
        assert t[name] == 0.0
    np.testing.assert_allclose(bound.R, expect_species + expect_temp, rtol=1e-12)


ROBIN_WITH_CURRENT = """
preset = "robin-heat"

[data]
h = ["0", "exp(-t)*cos(pi*x)"]
g = "%s"
u0 = ["cos(pi*y)", "cos(pi*x)"]
"""


def test_surface_current_term_value_and_quadratic_scaling():
    scn1 = parse_config(ROBIN_WITH_CURRENT % "1")
    scn2 = parse_config(ROBIN_WITH_CURRENT % "2")
    mesh = scn1.build_mesh()
    K2, P2 = 2.0, 0.3
    b1 = compute_R(scn1.coeffs, scn1.ledger, mesh, scn1.rothe, K2=K2, P2=P2)
    b2 = compute_R(scn2.coeffs, scn2.ledger, mesh, scn2.rothe, K2=K2, P2=P2)
    # T * K2^2 (P2+1)^2 / L_phi * |g|^2: horizon 0.5, L_phi = 1, |g|^2 = 2
    np.testing.assert_allclose(
        b1.terms["surface current"], 0.5 * K2**2 * (P2 + 1.0) ** 2 * 2.0, rtol=1e-12
    )
    np.testing.assert_allclose(
        b2.terms["surface current"] / b1.terms["surface current"], 4.0, rtol=1e-12
    )


def test_multiplier_closed_form(scen_decoupled):
    scn = scen_decoupled
    mesh = scn.build_mesh()
    cfg = RotheConfig(T=1.0, M=2)
    bound = compute_R(scn.coeffs, scn.ledger, mesh, cfg, K2=1.0, P2=1.0)
    np.testing.assert_allclose(bound.multiplier, 1.0 + 2.0 * np.e, rtol=1e-15)
    np.testing.assert_allclose(bound.rhs, bound.multiplier * bound.R, rtol=1e-15)


def test_R_data_scaling_homogeneity(scen_tec):
    scn = scen_tec
    mesh = scn.build_mesh()
    lam = 1.7
    base = compute_R(scn.coeffs, scn.ledger, mesh, scn.rothe, K2=1.3, P2=0.4)
    big = compute_R(
        scaled_coeffs(scn.coeffs, lam), scn.ledger, mesh, scn.rothe, K2=1.3, P2=0.4
    )
    for name in (
        "initial species energy",
        "initial temperature energy",
        "surface current",
        "species boundary flux",
        "heat flux (electrodes)",
    ):
        assert base.terms[name] > 0.0
        np.testing.assert_allclose(big.terms[name] / base.terms[name], lam**2, rtol=1e-10)
    # the radiating wall absorbs at its own power: ell' = 5/4
    np.testing.assert_allclose(
        big.terms["heat flux (wall)"] / base.terms["heat flux (wall)"],
        lam**1.25,
        rtol=1e-10,
    )


def test_R_refuses_stray_temperature_flux():
    scn = parse_config(
        """
preset = "decoupled-heat"

[data]
h = ["0", "1"]
u0 = ["cos(pi*y)", "cos(pi*x)"]
"""
    )
    mesh = scn.build_mesh()
    with pytest.raises(BoundViolation):
        compute_R(scn.coeffs, scn.ledger, mesh, scn.rothe, K2=1.0, P2=1.0)


def test_R_refuses_undeclared_wall_absorption(scen_robin):
    scn = scen_robin
    mesh = scn.build_mesh()
    stripped = dataclasses.replace(
        scn.ledger, gamma_bounds={"Gamma": scn.ledger.gamma_bounds["Gamma"]}
    )
    with pytest.raises(BoundViolation):
        compute_R(scn.coeffs, stripped, mesh, scn.rothe, K2=1.0, P2=1.0)


# ---------------------------------------------------------------------------
# audit stream and the cumulative verdict
# ---------------------------------------------------------------------------


def test_audit_sums_monotone_and_steps_pass(scen_robin, traj_robin):
    auditor = EnergyAuditor(
        traj_robin.mesh, scen_robin.coeffs, scen_robin.ledger, traj_robin.cfg,
        traj_robin.kirchhoff,
    )
    prev_sums = (0.0, 0.0, 0.0, 0.0)
    s1_seen = 0.0
    for prev, state in zip(traj_robin.states[:-1], traj_robin.states[1:]):
        audit = auditor.ingest(prev, state)
        sums = (auditor.S2, auditor.S3, auditor.S4, auditor.S5)
        assert all(b >= a for a, b in zip(prev_sums, sums))
        prev_sums = sums
        s1_seen = max(s1_seen, audit.S1_value)
        assert auditor.S1 == s1_seen
        assert audit.rel_margin >= -1e-8
    summary = auditor.summary()
    assert summary.all_steps_pass
    assert summary.lhs == pytest.approx(sum(summary.S))
    assert summary.S[1] > 0.0 and summary.S[2] > 0.0 and summary.S[4] > 0.0


def test_cumulative_verdict_on_robin(scen_robin, traj_robin):
    summary = audit_trajectory(traj_robin, scen_robin.ledger)
    mesh = traj_robin.mesh
    bound = compute_R(
        scen_robin.coeffs, scen_robin.ledger, mesh, traj_robin.cfg,
        K2=estimate_K2(mesh), P2=estimate_P2(mesh),
    )
    verdict = verify_cotaul(summary, bound)
    assert verdict.passed
    assert verdict.margin > 0.0
    assert verdict.lhs == pytest.approx(summary.lhs)
    assert verdict.rhs == pytest.approx(bound.rhs)
    assert tuple(bound.L_sharp) == tuple(compute_L_sharp(scen_robin.ledger))


def test_degenerate_zero_run_passes_with_zero_margin():
    scn = parse_config(
        """
preset = "decoupled-heat"

[data]
h = ["0", "0"]
u0 = ["0", "0"]
"""
    )
    traj = run_scenario(scn, M=2)
    summary = audit_trajectory(traj, scn.ledger)
    bound = compute_R(scn.coeffs, scn.ledger, traj.mesh, traj.cfg, K2=1.0, P2=1.0)
    verdict = verify_cotaul(summary, bound)
    assert verdict.passed
    assert verdict.lhs == 0.0 and verdict.rhs == 0.0 and verdict.margin == 0.0


def test_audit_tracks_mass_and_gauge_drift(traj_tec, scen_tec):
    summary = audit_trajectory(traj_tec, scen_tec.ledger)
    vol = volume_load_vector(traj_tec.mesh)
    m0 = max(
        abs(vol @ traj_tec.states[0].fields[i].values) for i in range(traj_tec.I)
    )
    for audit in summary.steps:
        assert audit.mass_drift <= 1e-10 * max(1.0, m0)
        assert audit.phi_boundary_mean <= 1e-8


# ---------------------------------------------------------------------------
# Kirchhoff time-translates
# ---------------------------------------------------------------------------


def test_translate_rejects_out_of_range(traj_decoupled):
    for z in (0.0, 0.5, -0.1, 1.0):
        with pytest.raises(ValueError):
            translate_estimate(traj_decoupled, z=z)


def test_translate_constant_history_vanishes():
    scn = parse_config(
        """
preset = "decoupled-heat"

[data]
h = ["0", "0"]
u0 = ["1", "2"]
"""
    )
    traj = run_scenario(scn, M=2)
    assert translate_estimate(traj, z=0.1) == pytest.approx(0.0, abs=1e-18)


def test_translate_single_pair_identity(scen_decoupled):
    traj = run_scenario(scen_decoupled, M=2)
    tau = traj.cfg.tau  # 0.25
    du = traj.states[2].fields[1].values - traj.states[1].fields[1].values
    M = assemble_mass(traj.mesh)
    # unit capacity: the transform is the identity, so the integrand is
    # constant on (0, T-z) and the value is (T - z) * (du, du)
    expect = (traj.cfg.T - tau) * float(du @ (M @ du))
    np.testing.assert_allclose(translate_estimate(traj, z=tau), expect, rtol=1e-12)


def test_translate_values_scale_roughly_linearly(traj_decoupled):
    tau = traj_decoupled.cfg.tau
    ratios = [translate_estimate(traj_decoupled, z=k * tau) / (k * tau) for k in (1, 2, 4, 8)]
    assert max(ratios) / min(ratios) < 3.0
