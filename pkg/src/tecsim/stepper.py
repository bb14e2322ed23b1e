"""Implicit time march: one coupled elliptic block solve per step.

Each step advances species concentrations u_1..u_I, temperature u, and
potential phi by solving, with step tau and time-averaged boundary data,

    (1/tau)(u_j - u_j^prev, v) + sum_l (a_jl grad u_l, grad v)
                               + (F_j grad phi, grad v) = (hbar_j, v)_bdry
    (1/tau)(B(u) - B(u^prev), v) + ...  + (gamma(u) u, v)_bdry  as above
    (sigma grad phi, grad w) + sum_l (G_l grad u_l, grad w) = (g, w)_electrodes

subject to gauge constraints (species keep their mass, phi keeps a zero
boundary mean).  Nonlinearity is handled by damped Picard: coefficients and
the radiation weight are frozen at the current iterate, the Kirchhoff term is
split as  b(u^k) u^{k+1} + (B(u^k) - b(u^k) u^k)  so the converged equation
is exactly the midpoint-quadrature step, independent of the split.

On divergence the damping is halved and the step restarted; below the
damping floor a :class:`~tecsim.errors.PicardDiverged` carries the full
attempt history out to the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from . import scalar_tools
from .coefficients import BoundsLedger, CoefficientSet, check_smallness
from .errors import PicardDiverged, SmallnessViolated, StepCountTooSmall
from .fem_core import (
    BlockSystem,
    Field,
    GaugeConstraint,
    assemble_boundary_form,
    assemble_boundary_load,
    assemble_mass,
    assemble_mass_midpoint,
    assemble_stiffness,
    boundary_load_vector,
    cell_means,
    field_from_function,
    solve_block,
    volume_load_vector,
    _geometry,
)
from .mesh import ELECTRODES, REGION_TAGS, Mesh
from .scalar_tools import KirchhoffEvaluator

# 4-point Gauss on [0, 1] for step averages of time-dependent data
_T4_X, _T4_W = np.polynomial.legendre.leggauss(4)
_T4_X = 0.5 * (_T4_X + 1.0)
_T4_W = 0.5 * _T4_W


@dataclass
class PicardConfig:
    """Inner fixed-point controls."""

    tol: float = 1e-9
    max_iter: int = 100
    damping: float = 1.0
    min_damping: float = 1.0 / 16.0


@dataclass
class RotheConfig:
    """Outer time-march controls; requires M > T for the bound machinery."""

    T: float
    M: int
    picard: PicardConfig = dc_field(default_factory=PicardConfig)

    def __post_init__(self):
        if self.T <= 0.0:
            raise StepCountTooSmall("horizon T must be positive")
        if self.M <= self.T:
            raise StepCountTooSmall(
                f"need more steps than time units (M={self.M} <= T={self.T:g}); "
                f"the a-priori bound factor M/(M-T) is otherwise empty"
            )

    @property
    def tau(self) -> float:
        return self.T / self.M


@dataclass
class StepState:
    """Solution snapshot after one step (index 0 = initial data)."""

    index: int
    time: float
    fields: list  # I+2 Field objects: species..., temperature, potential
    picard_iters: int = 0
    damping: float = 1.0
    multipliers: np.ndarray = dc_field(default_factory=lambda: np.zeros(0))


@dataclass
class Trajectory:
    """Full Rothe history plus everything needed to post-process it."""

    states: list
    mesh: Mesh
    cfg: RotheConfig
    coeffs: CoefficientSet
    kirchhoff: KirchhoffEvaluator

    @property
    def I(self) -> int:
        return self.coeffs.I


def time_average_data(h, m: int, tau: float) -> Callable:
    """Step average  (1/tau) * integral of h(x, y, .) over step m, 4-pt Gauss.

    Exact for data polynomial in time through degree 7; the average of
    h(t) = t over [0, tau] is tau/2 exactly.
    """
    t0 = (m - 1) * tau
    times = t0 + tau * _T4_X

    def hbar(x, y):
        acc = 0.0
        for tq, wq in zip(times, _T4_W):
            if callable(h):
                acc = acc + wq * np.asarray(h(x, y, tq), dtype=float)
            else:
                acc = acc + wq * float(h)
        return acc

    return hbar


def kirchhoff_load(mesh: Mesh, ev: KirchhoffEvaluator, nodal: np.ndarray) -> np.ndarray:
    """Load vector of B(u) against the P1 basis, centroid (midpoint) rule."""
    geo = _geometry(mesh)
    w_c = cell_means(mesh, nodal)
    B_c = scalar_tools.B(ev, geo.centroid[:, 0], geo.centroid[:, 1], w_c)
    out = np.zeros(mesh.num_vertices)
    np.add.at(out, mesh.triangles.ravel(), np.repeat(np.asarray(B_c) * geo.area / 3.0, 3))
    return out


def _wrap_temperature_coeff(fn):
    """Adapt a temperature-only coefficient to the (x, y, e-tuple) protocol."""
    return lambda x, y, e: fn(x, y, e[0]) if callable(fn) else fn


def _step_loads(coeffs: CoefficientSet, mesh: Mesh, m: int, tau: float):
    """Time-averaged boundary loads for step m (species+temperature rows)."""
    loads = []
    for i in range(coeffs.I + 1):
        h_i = coeffs.h[i]
        if h_i is None:
            loads.append(np.zeros(mesh.num_vertices))
        else:
            loads.append(
                assemble_boundary_load(mesh, REGION_TAGS, time_average_data(h_i, m, tau))
            )
    return loads


def _assemble_iterate(coeffs, mesh, tau, cur, prev_vals, loads, load_g, lb_prev, ev):
    """Build the linear block system frozen at the iterate ``cur``."""
    I = coeffs.I
    nf = I + 2
    n = mesh.num_vertices
    state_e = tuple(cur[: I + 1])
    theta = cur[I]

    M_plain = assemble_mass(mesh)
    # centroid-rule weighted mass = exact Jacobian of kirchhoff_load, so the
    # fixed-point update is Newton-consistent (and M_b cancels at convergence,
    # leaving the pure load-difference form of the time term either way)
    M_b = assemble_mass_midpoint(mesh, _wrap_temperature_coeff(coeffs.b), (theta,))

    blocks: dict = {}

    def add(i, j, mat):
        blocks[(i, j)] = blocks[(i, j)] + mat if (i, j) in blocks else mat

    for j in range(I + 1):
        for l in range(I + 1):
            if coeffs.a[j][l] is not None:
                add(j, l, assemble_stiffness(mesh, coeffs.a[j][l], state_e))
        if coeffs.F[j] is not None:
            add(j, I + 1, assemble_stiffness(mesh, coeffs.F[j], state_e))
    for l in range(I + 1):
        if coeffs.G[l] is not None:
            add(I + 1, l, assemble_stiffness(mesh, coeffs.G[l], state_e))
    add(I + 1, I + 1, assemble_stiffness(mesh, coeffs.sigma, state_e))

    for j in range(I):
        add(j, j, M_plain / tau)
    add(I, I, M_b / tau)
    for tag, gfn in coeffs.gamma.items():
        add(I, I, assemble_boundary_form(mesh, [tag], _wrap_temperature_coeff(gfn), (theta,)))

    rhs = []
    for j in range(I):
        rhs.append(M_plain @ prev_vals[j] / tau + loads[j])
    lb_cur = kirchhoff_load(mesh, ev, theta)
    rhs.append(M_b @ theta / tau + (lb_prev - lb_cur) / tau + loads[I])
    rhs.append(load_g)

    vol = volume_load_vector(mesh)
    bnd = boundary_load_vector(mesh, REGION_TAGS)
    constraints = [
        GaugeConstraint(j, vol, float(vol @ prev_vals[j])) for j in range(I)
    ]
    constraints.append(GaugeConstraint(I + 1, bnd, 0.0))
    return BlockSystem(n_fields=nf, n=n, blocks=blocks, rhs=rhs, constraints=constraints)


def rothe_step(
    prev: StepState,
    coeffs: CoefficientSet,
    mesh: Mesh,
    cfg: RotheConfig,
    kirchhoff: Optional[KirchhoffEvaluator] = None,
) -> StepState:
    """Advance one step with damped Picard, restarting on divergence."""
    ev = kirchhoff or KirchhoffEvaluator(b=coeffs.b)
    tau = cfg.tau
    m = prev.index + 1
    I = coeffs.I
    pic = cfg.picard

    prev_vals = [f.values for f in prev.fields]
    loads = _step_loads(coeffs, mesh, m, tau)
    load_g = (
        assemble_boundary_load(mesh, ELECTRODES, coeffs.g)
        if coeffs.g is not None
        else np.zeros(mesh.num_vertices)
    )
    lb_prev = kirchhoff_load(mesh, ev, prev_vals[I])

    attempts: list[tuple[float, int, float]] = []
    omega = pic.damping
    while omega >= pic.min_damping * (1.0 - 1e-12):
        cur = [v.copy() for v in prev_vals]
        inc = np.inf
        it = 0
        for it in range(1, pic.max_iter + 1):
            system = _assemble_iterate(
                coeffs, mesh, tau, cur, prev_vals, loads, load_g, lb_prev, ev
            )
            sol, mult = solve_block(system)
            new = [omega * s + (1.0 - omega) * c for s, c in zip(sol, cur)]
            # combined-norm relative increment: a field sitting at roundoff
            # (e.g. a potential that is exactly zero) must not stall the test
            # with noise-over-noise ratios
            num = math.sqrt(sum(float(np.sum((a - b) ** 2)) for a, b in zip(new, cur)))
            scale = max(
                math.sqrt(sum(float(np.sum(v**2)) for v in new)),
                math.sqrt(sum(float(np.sum(v**2)) for v in cur)),
                1e-300,
            )
            inc = num / scale
            cur = new
            if not np.isfinite(inc) or inc > 1e6:
                break  # runaway iterate: abandon this damping level
            if inc <= pic.tol:
                fields = [Field(mesh, v) for v in cur]
                return StepState(
                    index=m,
                    time=m * tau,
                    fields=fields,
                    picard_iters=it,
                    damping=omega,
                    multipliers=mult,
                )
        attempts.append((omega, it, inc))
        omega *= 0.5
    raise PicardDiverged(m, m * tau, attempts)


def run(
    coeffs: CoefficientSet,
    mesh: Mesh,
    cfg: RotheConfig,
    *,
    bounds: Optional[BoundsLedger] = None,
    force: bool = False,
    observer: Optional[Callable] = None,
) -> Trajectory:
    """March all M steps from the interpolated initial data.

    With a bounds ledger, the smallness gate runs first and refuses to step
    on failure unless ``force`` (the margins are what make the implicit
    steps well-posed, so forcing past them may legitimately diverge).
    The stored step-0 potential is a zero solver seed; estimate sums start
    at step 1 and never read it.
    """
    if bounds is not None:
        report = check_smallness(bounds)
        if not report.all_passed and not force:
            raise SmallnessViolated(report)
        ev = KirchhoffEvaluator(
            b=coeffs.b, b_lower=bounds.b_bounds[0], b_upper=bounds.b_bounds[1]
        )
    else:
        ev = KirchhoffEvaluator(b=coeffs.b)

    fields0 = [field_from_function(mesh, f) for f in coeffs.u0]
    fields0.append(Field(mesh, np.zeros(mesh.num_vertices)))
    state = StepState(index=0, time=0.0, fields=fields0)
    states = [state]
    if observer is not None:
        observer(state)
    for _ in range(cfg.M):
        state = rothe_step(state, coeffs, mesh, cfg, ev)
        states.append(state)
        if observer is not None:
            observer(state)
    return Trajectory(states=states, mesh=mesh, cfg=cfg, coeffs=coeffs, kirchhoff=ev)


def discrete_derivative(traj: Trajectory, kirchhoff: Optional[KirchhoffEvaluator] = None):
    """Backward difference quotients per step: species plainly, temperature
    through the Kirchhoff transform (nodal evaluation)."""
    ev = kirchhoff or traj.kirchhoff
    mesh = traj.mesh
    tau = traj.cfg.tau
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    I = traj.I
    out = []
    b_vals = [
        np.asarray(scalar_tools.B(ev, x, y, s.fields[I].values)) for s in traj.states
    ]
    for m in range(1, len(traj.states)):
        cur, prv = traj.states[m], traj.states[m - 1]
        rates = [
            Field(mesh, (cur.fields[i].values - prv.fields[i].values) / tau)
            for i in range(I)
        ]
        rates.append(Field(mesh, (b_vals[m] - b_vals[m - 1]) / tau))
        out.append(tuple(rates))
    return out


def step_residual(
    prev: StepState,
    state: StepState,
    coeffs: CoefficientSet,
    mesh: Mesh,
    cfg: RotheConfig,
    kirchhoff: Optional[KirchhoffEvaluator] = None,
) -> float:
    """Relative dual-norm residual of the converged nonlinear step.

    Reassembles the system at the converged state, applies the stored
    solution+multipliers, and measures each field residual in the
    (M + K)^{-1} Riesz norm against the same norm of its load.
    """
    import scipy.sparse.linalg as spla

    from .fem_core import assemble_mass as _am, assemble_stiffness as _as

    ev = kirchhoff or KirchhoffEvaluator(b=coeffs.b)
    tau = cfg.tau
    I = coeffs.I
    prev_vals = [f.values for f in prev.fields]
    cur = [f.values for f in state.fields]
    loads = _step_loads(coeffs, mesh, state.index, tau)
    load_g = (
        assemble_boundary_load(mesh, ELECTRODES, coeffs.g)
        if coeffs.g is not None
        else np.zeros(mesh.num_vertices)
    )
    lb_prev = kirchhoff_load(mesh, ev, prev_vals[I])
    system = _assemble_iterate(
        coeffs, mesh, tau, cur, prev_vals, loads, load_g, lb_prev, ev
    )

    n = mesh.num_vertices
    nf = I + 2
    resid = []
    for i in range(nf):
        r = -system.rhs[i].copy()
        for (bi, bj), mat in system.blocks.items():
            if bi == i:
                r += mat @ cur[bj]
        resid.append(r)
    for k, con in enumerate(system.constraints):
        if state.multipliers.size == len(system.constraints):
            resid[con.field] += state.multipliers[k] * con.weights

    riesz = spla.splu((_am(mesh) + _as(mesh)).tocsc())

    def dual(v):
        z = riesz.solve(v)
        return float(np.sqrt(max(v @ z, 0.0)))

    num = max(dual(r) for r in resid)
    den = max(max(dual(b) for b in system.rhs), 1e-300)
    return num / den
