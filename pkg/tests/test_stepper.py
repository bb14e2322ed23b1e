"""Time marching: step oracle, conservation, convergence orders, failure paths.

Implicit-Euler oracle for the decoupled scenario: with unit coefficients the
species step is (M + tau K) u = M u_prev (consistent mass), the temperature
step the same with the centroid-rule mass that discretizes the nonlinear
time term.
"""

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from conftest import run_scenario

from tecsim.config import parse_config
from tecsim.errors import PicardDiverged, SmallnessViolated, StepCountTooSmall
from tecsim.fem_core import (
    Field,
    assemble_mass,
    assemble_mass_midpoint,
    assemble_stiffness,
    boundary_load_vector,
    field_from_function,
    norm_l2,
    volume_load_vector,
)
from tecsim.mesh import REGION_TAGS, build_rect_mesh
from tecsim.scalar_tools import KirchhoffEvaluator
from tecsim.stepper import (
    PicardConfig,
    RotheConfig,
    StepState,
    discrete_derivative,
    rothe_step,
    run,
    step_residual,
    time_average_data,
)


def final_errors(traj, scn, fields=(0, 1)):
    """L2 errors of the listed fields against [exact] at the final time."""
    mesh = traj.mesh
    T = traj.cfg.T
    names = ["u1", "u"] if traj.I == 1 else None
    out = []
    for i in fields:
        exact = scn.exact[names[i]]
        ref = field_from_function(mesh, lambda x, y: exact(x, y, T))
        out.append(norm_l2(Field(mesh, traj.states[-1].fields[i].values - ref.values)))
    return out


# ---------------------------------------------------------------------------
# step-average data
# ---------------------------------------------------------------------------


def test_time_average_linear_data():
    h = lambda x, y, t: t + 0.0 * x
    np.testing.assert_allclose(time_average_data(h, 1, 0.1)(0.0, 0.0), 0.05, rtol=1e-14)
    np.testing.assert_allclose(time_average_data(h, 2, 0.1)(0.0, 0.0), 0.15, rtol=1e-14)


def test_time_average_constant_and_degree7():
    assert time_average_data(2.5, 3, 0.1)(0.0, 0.0) == pytest.approx(2.5, rel=1e-15)
    h7 = lambda x, y, t: t**7 + 0.0 * x
    tau = 0.3
    np.testing.assert_allclose(
        time_average_data(h7, 1, tau)(0.0, 0.0), tau**7 / 8.0, rtol=1e-13
    )


# ---------------------------------------------------------------------------
# one implicit step against a direct sparse solve
# ---------------------------------------------------------------------------


def test_single_step_matches_direct_solve(scen_decoupled):
    traj = run_scenario(scen_decoupled, M=1)
    mesh = traj.mesh
    tau = traj.cfg.tau
    K = assemble_stiffness(mesh)
    u0 = traj.states[0].fields[0].values
    th0 = traj.states[0].fields[1].values

    M_plain = assemble_mass(mesh)
    ref_u = spla.spsolve((M_plain + tau * K).tocsc(), M_plain @ u0)
    np.testing.assert_allclose(traj.states[1].fields[0].values, ref_u, atol=1e-10)

    M_mid = assemble_mass_midpoint(mesh)
    ref_th = spla.spsolve((M_mid + tau * K).tocsc(), M_mid @ th0)
    np.testing.assert_allclose(traj.states[1].fields[1].values, ref_th, atol=1e-10)

    np.testing.assert_allclose(traj.states[1].fields[2].values, 0.0, atol=1e-12)


def test_run_single_step_equals_manual_step(scen_robin):
    traj = run_scenario(scen_robin, M=1)
    scn = scen_robin
    mesh = build_rect_mesh(scn.domain, scn.nx, scn.ny)
    cfg = RotheConfig(T=scn.rothe.T, M=1, picard=scn.rothe.picard)
    ev = KirchhoffEvaluator(
        b=scn.coeffs.b,
        b_lower=scn.ledger.b_bounds[0],
        b_upper=scn.ledger.b_bounds[1],
    )
    fields0 = [field_from_function(mesh, f) for f in scn.coeffs.u0]
    fields0.append(Field(mesh, np.zeros(mesh.num_vertices)))
    manual = rothe_step(
        StepState(index=0, time=0.0, fields=fields0), scn.coeffs, mesh, cfg, ev
    )
    for i in range(3):
        assert np.array_equal(
            manual.fields[i].values, traj.states[1].fields[i].values
        )
    assert manual.picard_iters == traj.states[1].picard_iters


def test_zero_data_stays_identically_zero():
    scn = parse_config(
        """
preset = "decoupled-heat"

[data]
h = ["0", "0"]
u0 = ["0", "0"]
"""
    )
    traj = run_scenario(scn, M=2)
    for state in traj.states:
        for f in state.fields:
            assert np.all(f.values == 0.0)
    assert [s.picard_iters for s in traj.states] == [0, 1, 1]


# ---------------------------------------------------------------------------
# accuracy against closed-form solutions
# ---------------------------------------------------------------------------


def test_robin_final_time_errors_small_and_shrinking(scen_robin):
    errs_c = final_errors(run_scenario(scen_robin), scen_robin)
    tau_c, h_c = 0.5 / 16, 1.0 / 8
    for e in errs_c:
        assert e <= 0.2 * (tau_c + h_c**2)
    errs_f = final_errors(run_scenario(scen_robin, M=64, nx=16), scen_robin)
    tau_f, h_f = 0.5 / 64, 1.0 / 16
    for e in errs_f:
        assert e <= 0.2 * (tau_f + h_f**2)
    assert errs_f[0] < errs_c[0] and errs_f[1] < errs_c[1]


def test_first_order_in_time(scen_robin):
    errs = [
        max(final_errors(run_scenario(scen_robin, M=M, nx=24), scen_robin))
        for M in (32, 64, 128)
    ]
    r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
    assert 1.7 <= r1 <= 2.3, (errs, r1)
    assert 1.7 <= r2 <= 2.3, (errs, r2)


def test_second_order_in_space(scen_decoupled):
    # compare against the exact solution OF THE TIME-DISCRETE scheme,
    # (1 + tau pi^2)^(-M) cos(pi y), so the measured residual is purely
    # spatial and the fixed time-step error cannot cancel against it
    M = 64
    tau = 0.5 / M
    amp = (1.0 + tau * np.pi**2) ** (-M)
    errs = []
    for nx in (8, 16, 32):
        traj = run_scenario(scen_decoupled, M=M, nx=nx)
        mesh = traj.mesh
        ref = field_from_function(mesh, lambda x, y: amp * np.cos(np.pi * y))
        errs.append(
            norm_l2(Field(mesh, traj.states[-1].fields[0].values - ref.values))
        )
    r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
    assert 3.4 <= r1 <= 4.6, (errs, r1)
    assert 3.4 <= r2 <= 4.6, (errs, r2)


# ---------------------------------------------------------------------------
# structure preserved along the march
# ---------------------------------------------------------------------------


def test_species_mass_and_potential_gauge_drift(traj_decoupled, traj_tec):
    for traj in (traj_decoupled, traj_tec):
        vol = volume_load_vector(traj.mesh)
        bnd = boundary_load_vector(traj.mesh, REGION_TAGS)
        for i in range(traj.I):
            m0 = vol @ traj.states[0].fields[i].values
            for state in traj.states[1:]:
                drift = abs(vol @ state.fields[i].values - m0)
                assert drift <= 1e-10 * max(1.0, abs(m0))
        for state in traj.states[1:]:
            phi = state.fields[traj.I + 1].values
            mean = abs(bnd @ phi)
            assert mean <= 1e-10 * max(1.0, float(np.linalg.norm(phi)))


def test_converged_step_has_small_dual_residual(traj_robin, scen_robin):
    mesh = traj_robin.mesh
    res = step_residual(
        traj_robin.states[3],
        traj_robin.states[4],
        scen_robin.coeffs,
        mesh,
        traj_robin.cfg,
        traj_robin.kirchhoff,
    )
    assert res < 1e-6


def test_discrete_derivative_identities(scen_decoupled, traj_decoupled):
    # constant data: every difference quotient vanishes
    scn0 = parse_config(
        """
preset = "decoupled-heat"

[data]
h = ["0", "0"]
u0 = ["1", "2"]
"""
    )
    traj0 = run_scenario(scn0, M=2)
    for rates in discrete_derivative(traj0):
        for r in rates:
            np.testing.assert_allclose(r.values, 0.0, atol=1e-10)

    # unit capacity: the temperature quotient is the plain difference
    rates = discrete_derivative(traj_decoupled)
    tau = traj_decoupled.cfg.tau
    for m, rr in enumerate(rates, start=1):
        manual = (
            traj_decoupled.states[m].fields[1].values
            - traj_decoupled.states[m - 1].fields[1].values
        ) / tau
        np.testing.assert_allclose(rr[1].values, manual, atol=1e-13)

    # telescoping: tau * sum of quotients = final - initial
    acc = sum(rr[0].values for rr in rates) * tau
    np.testing.assert_allclose(
        acc,
        traj_decoupled.states[-1].fields[0].values
        - traj_decoupled.states[0].fields[0].values,
        atol=1e-12,
    )


# ---------------------------------------------------------------------------
# gates and failure modes
# ---------------------------------------------------------------------------


def test_step_count_gate():
    with pytest.raises(StepCountTooSmall):
        RotheConfig(T=20.0, M=16)
    with pytest.raises(StepCountTooSmall):
        RotheConfig(T=-1.0, M=16)


def test_smallness_gate_refuses_then_forces(scen_bad):
    with pytest.raises(SmallnessViolated) as exc:
        run_scenario(scen_bad, M=2)
    assert "(L_1)_#" in str(exc.value)
    traj = run_scenario(scen_bad, M=2, force=True)
    assert len(traj.states) == 3


def test_picard_divergence_reports_attempts(scen_robin):
    scn = scen_robin
    mesh = build_rect_mesh(scn.domain, scn.nx, scn.ny)
    cfg = RotheConfig(T=0.5, M=16, picard=PicardConfig(max_iter=1))
    with pytest.raises(PicardDiverged) as exc:
        run(scn.coeffs, mesh, cfg, bounds=scn.ledger)
    err = exc.value
    assert err.step == 1
    assert err.time == pytest.approx(0.03125)
    assert len(err.attempts) == 5  # damping 1, 1/2, ..., 1/16
    assert [a[0] for a in err.attempts] == [1.0, 0.5, 0.25, 0.125, 0.0625]
