"""Runtime audit of the scheme's energy bookkeeping.

Three layers, checked while (or after) the march runs:

1. **Per-step dissipation audit** -- testing each converged equation with its
   own solution yields, after Cauchy-Schwarz/Young on the couplings,

       (1/2 tau) sum_i (|u_i^m|^2 - |u_i^{m-1}|^2)
     + (1/tau) (Psi-integral telescope)
     + sum_j L_j |grad u_j^m|^2 + L_{I+2} |grad phi^m|^2
     + sum_regions gamma_lower * integral |u^m|^ell_region
    <=  sum_i |hbar_i| |u_i| + sum_r |hbar| |u| (dual exponents) + |g| |phi|

   All boundary quantities here use the scheme's own 2-point Gauss nodes so
   every discrete Hölder inequality is exact at the shared nodes; the margin
   should be nonnegative to a tight tolerance.  Species enter through their
   mass-free parts (their gauge component carries no energy and is conserved
   exactly by the constraint row).

2. **Cumulative bound** -- the summed quantities

       S1 = max_m [ sum_i |u_i^m|^2 + 2 * lumped-Psi(u^m) ]
       S2 = sum_i L_i |grad u_i|^2_{2,Q_T}     (time-scaled step sums)
       S3 = L_{I+1} |grad u|^2_{2,Q_T}
       S4 = L_{I+2} |grad phi|^2_{2,Q_T}
       S5 = sum_r (2 gamma_lower_r / ell_r') |u|^{ell_r}_{ell_r, r x (0,T)}

   must stay below  (1 + M/(M-T) e^T) * R  with R assembled from initial
   data and boundary-data norms in :func:`compute_R`.  All S2..S4 norms are
   squared L2 norms (the squared reading of the bound's display).

3. **Time-translate diagnostic** -- the Kirchhoff difference quotient

       value(z) = int_0^{T-z} (B(u(t+z)) - B(u(t)), u(t+z) - u(t)) dt

   evaluated exactly on the piecewise-constant-in-time trajectory; for an
   equicontinuity-consistent march, value(z)/z stays bounded as z runs over
   small multiples of tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Mapping, Optional

import numpy as np

from . import scalar_tools
from .coefficients import BoundsLedger, CoefficientSet, compute_L_sharp
from .errors import BoundViolation
from .fem_core import (
    Field,
    _geometry,
    assemble_mass,
    boundary_load_vector,
    boundary_quad,
    field_from_function,
    norm_h1_semi,
    norm_l2,
    norm_lp_boundary,
    norm_lp_boundary_data,
    trace_at_quad,
    volume_load_vector,
)
from .mesh import ELECTRODES, GAMMA_O, GAMMA_W, REGION_TAGS, Mesh
from .scalar_tools import KirchhoffEvaluator
from .stepper import RotheConfig, StepState, Trajectory, time_average_data

# 4-point Gauss on [0,1] for time integrals of boundary data
_T4_X, _T4_W = np.polynomial.legendre.leggauss(4)
_T4_X = 0.5 * (_T4_X + 1.0)
_T4_W = 0.5 * _T4_W


@dataclass
class StepAudit:
    """Per-step record: norms, dissipation inequality sides, gauge drift."""

    index: int
    time: float
    picard_iters: int
    l2_fields: tuple
    lhs: float
    rhs: float
    margin: float  # rhs - lhs, >= -tol * scale when the audit passes
    rel_margin: float
    S1_value: float
    mass_drift: float
    phi_boundary_mean: float


@dataclass
class EstimateSummary:
    """Accumulated S-quantities and the per-step audit trail."""

    S: tuple  # S1..S5
    lhs: float
    steps: list
    worst_rel_margin: float

    @property
    def all_steps_pass(self) -> bool:
        return self.worst_rel_margin >= -1e-8


@dataclass
class AprioriBound:
    """Right-hand side of the cumulative estimate, with its breakdown."""

    R: float
    multiplier: float
    rhs: float
    terms: Mapping[str, float]
    K2: float
    P2: float
    L_sharp: tuple


@dataclass
class CotaulVerdict:
    """Cumulative-estimate comparison."""

    lhs: float
    rhs: float
    margin: float
    passed: bool
    S: tuple


def _region_groups(coeffs: CoefficientSet):
    """(tags, exponent, gamma-ledger-key) for the two absorbing groups."""
    return (
        (ELECTRODES, 2.0, "Gamma"),
        ((GAMMA_W,), coeffs.ell, "GammaW"),
    )


class EnergyAuditor:
    """Streaming audit: feed consecutive states, read the summary at the end."""

    def __init__(
        self,
        mesh: Mesh,
        coeffs: CoefficientSet,
        ledger: BoundsLedger,
        cfg: RotheConfig,
        kirchhoff: Optional[KirchhoffEvaluator] = None,
    ):
        self.mesh = mesh
        self.coeffs = coeffs
        self.ledger = ledger
        self.cfg = cfg
        self.ev = kirchhoff or KirchhoffEvaluator(b=coeffs.b)
        self.L = compute_L_sharp(ledger)
        self.vol = volume_load_vector(mesh)
        self.area = float(self.vol.sum())
        self.bnd_all = boundary_load_vector(mesh, REGION_TAGS)
        geo = _geometry(mesh)
        self._cx, self._cy, self._carea = geo.centroid[:, 0], geo.centroid[:, 1], geo.area
        # scheme-matching 2-pt boundary quadrature, per region tag and grouped
        self.q_all = boundary_quad(mesh, REGION_TAGS, 2)
        self.q_gamma = boundary_quad(mesh, ELECTRODES, 2)
        self.q_region = {tag: boundary_quad(mesh, [tag], 2) for tag in REGION_TAGS}
        self.steps: list[StepAudit] = []
        self.S1 = 0.0
        self.S2 = 0.0
        self.S3 = 0.0
        self.S4 = 0.0
        self.S5 = 0.0
        self._init_masses: Optional[np.ndarray] = None

    # -- helpers ----------------------------------------------------------

    def _shifted(self, values: np.ndarray) -> np.ndarray:
        return values - (self.vol @ values) / self.area

    def _psi_mid(self, theta: np.ndarray) -> float:
        """Midpoint-rule integral of Psi(u) (matches the Kirchhoff load)."""
        mean = np.asarray(theta, dtype=float)[self.mesh.triangles].mean(axis=1)
        psi_c = scalar_tools.Psi(self.ev, self._cx, self._cy, mean)
        return float(np.sum(self._carea * np.asarray(psi_c)))

    def _psi_lumped(self, theta: np.ndarray) -> float:
        """Vertex-lumped integral of Psi(u) (the S1 convention)."""
        x, y = self.mesh.vertices[:, 0], self.mesh.vertices[:, 1]
        psi_v = scalar_tools.Psi(self.ev, x, y, theta)
        return float(self.vol @ np.asarray(psi_v))

    def _quad_lp(self, quad, values, p) -> float:
        """sum of w |trace|^p over a 2-pt quadrature set (no root taken)."""
        e, shape0, _, _, wq = quad
        if e.shape[0] == 0:
            return 0.0
        tq = trace_at_quad(values, e, shape0)
        return float(np.sum(wq * np.abs(tq) ** p))

    def _quad_data_lp(self, quad, fn, p) -> float:
        e, shape0, xq, yq, wq = quad
        if e.shape[0] == 0:
            return 0.0
        vals = fn(xq, yq) if callable(fn) else np.full(xq.shape, float(fn))
        return float(np.sum(wq * np.abs(np.asarray(vals, dtype=float)) ** p))

    # -- the audit --------------------------------------------------------

    def ingest(self, prev: StepState, state: StepState) -> StepAudit:
        """Audit one completed step and fold it into the running sums."""
        mesh, coeffs, ledger = self.mesh, self.coeffs, self.ledger
        I = coeffs.I
        tau = self.cfg.tau
        m = state.index
        if self._init_masses is None:
            base = prev if prev.index == 0 else state
            self._init_masses = np.array(
                [self.vol @ base.fields[i].values for i in range(I)]
            )

        u_cur = [f.values for f in state.fields]
        u_prv = [f.values for f in prev.fields]
        hat_cur = [self._shifted(u_cur[i]) for i in range(I)]
        hat_prv = [self._shifted(u_prv[i]) for i in range(I)]
        theta, theta_prv = u_cur[I], u_prv[I]
        phi = u_cur[I + 1]

        # --- left side: energy differences + coercive dissipation floor
        lhs = 0.0
        for i in range(I):
            n_new = norm_l2(Field(mesh, hat_cur[i])) ** 2
            n_old = norm_l2(Field(mesh, hat_prv[i])) ** 2
            lhs += 0.5 / tau * (n_new - n_old)
        lhs += (self._psi_mid(theta) - self._psi_mid(theta_prv)) / tau

        grads = [norm_h1_semi(Field(mesh, u_cur[j])) ** 2 for j in range(I + 1)]
        grad_phi = norm_h1_semi(Field(mesh, phi)) ** 2
        for j in range(I + 1):
            lhs += self.L[j] * grads[j]
        lhs += self.L[I + 1] * grad_phi

        gamma_pow = 0.0
        for tags, ell_r, key in _region_groups(coeffs):
            if key not in ledger.gamma_bounds:
                continue
            lo = ledger.gamma_bounds[key][0]
            for t in tags:
                if t in coeffs.gamma:  # only where the scheme dissipates
                    gamma_pow += lo * self._quad_lp(self.q_region[t], theta, ell_r)
        lhs += gamma_pow

        # --- right side: Hölder pairings at the same 2-pt nodes
        rhs = 0.0
        for i in range(I):
            h_i = coeffs.h[i]
            if h_i is None:
                continue
            hbar = time_average_data(h_i, m, tau)
            h_sq = self._quad_data_lp(self.q_all, lambda x, y: hbar(x, y), 2.0)
            u_sq = self._quad_lp(self.q_all, hat_cur[i], 2.0)
            rhs += math.sqrt(h_sq) * math.sqrt(u_sq)
        h_T = coeffs.h[I]
        if h_T is not None:
            hbar_T = time_average_data(h_T, m, tau)
            for tag in REGION_TAGS:
                ell_r = coeffs.region_ell(tag) if tag != GAMMA_O else 2.0
                ellp = ell_r / (ell_r - 1.0)
                h_pow = self._quad_data_lp(
                    self.q_region[tag], lambda x, y: hbar_T(x, y), ellp
                )
                u_pow = self._quad_lp(self.q_region[tag], theta, ell_r)
                rhs += h_pow ** (1.0 / ellp) * u_pow ** (1.0 / ell_r)
        if coeffs.g is not None:
            g_sq = self._quad_data_lp(self.q_gamma, coeffs.g, 2.0)
            p_sq = self._quad_lp(self.q_gamma, phi, 2.0)
            rhs += math.sqrt(g_sq) * math.sqrt(p_sq)

        scale = max(1.0, abs(lhs), abs(rhs))
        margin = rhs - lhs
        audit = StepAudit(
            index=m,
            time=state.time,
            picard_iters=state.picard_iters,
            l2_fields=tuple(norm_l2(f) for f in state.fields),
            lhs=lhs,
            rhs=rhs,
            margin=margin,
            rel_margin=margin / scale,
            S1_value=0.0,
            mass_drift=0.0,
            phi_boundary_mean=float(abs(self.bnd_all @ phi)),
        )

        # --- running S sums
        s1 = sum(norm_l2(Field(mesh, hat_cur[i])) ** 2 for i in range(I))
        s1 += 2.0 * self._psi_lumped(theta)
        audit.S1_value = s1
        self.S1 = max(self.S1, s1)
        for i in range(I):
            self.S2 += self.L[i] * tau * grads[i]
        self.S3 += self.L[I] * tau * grads[I]
        self.S4 += self.L[I + 1] * tau * grad_phi
        for tags, ell_r, key in _region_groups(coeffs):
            if key not in ledger.gamma_bounds:
                continue
            lo = ledger.gamma_bounds[key][0]
            ellp = ell_r / (ell_r - 1.0)
            for t in tags:
                if t not in coeffs.gamma:
                    continue
                fld = Field(mesh, theta)
                self.S5 += (
                    (2.0 * lo / ellp)
                    * tau
                    * norm_lp_boundary(fld, [t], ell_r) ** ell_r
                )

        audit.mass_drift = float(
            max(
                abs(self.vol @ u_cur[i] - self._init_masses[i]) for i in range(I)
            )
            if I
            else 0.0
        )
        self.steps.append(audit)
        return audit

    def summary(self) -> EstimateSummary:
        S = (self.S1, self.S2, self.S3, self.S4, self.S5)
        worst = min((a.rel_margin for a in self.steps), default=0.0)
        return EstimateSummary(S=S, lhs=float(sum(S)), steps=self.steps, worst_rel_margin=worst)


def audit_trajectory(
    traj: Trajectory, ledger: BoundsLedger, kirchhoff: Optional[KirchhoffEvaluator] = None
) -> EstimateSummary:
    """Run the streaming audit over an already-computed trajectory."""
    auditor = EnergyAuditor(traj.mesh, traj.coeffs, ledger, traj.cfg, kirchhoff or traj.kirchhoff)
    for prev, state in zip(traj.states[:-1], traj.states[1:]):
        auditor.ingest(prev, state)
    return auditor.summary()


# ---------------------------------------------------------------------------
# the a-priori right-hand side
# ---------------------------------------------------------------------------


def _boundary_time_norm(mesh, regions, h, cfg, p) -> float:
    """integral over (0,T) x regions of |h|^p, 4-pt Gauss in both variables."""
    e, shape0, xq, yq, wq = boundary_quad(mesh, regions, 4)
    if e.shape[0] == 0 or h is None:
        return 0.0
    tau = cfg.tau
    total = 0.0
    for m in range(1, cfg.M + 1):
        t0 = (m - 1) * tau
        for tx, tw in zip(_T4_X, _T4_W):
            tq = t0 + tau * tx
            vals = h(xq, yq, tq) if callable(h) else np.full(xq.shape, float(h))
            total += tau * tw * float(np.sum(wq * np.abs(np.asarray(vals)) ** p))
    return total


def compute_R(
    coeffs: CoefficientSet,
    ledger: BoundsLedger,
    mesh: Mesh,
    cfg: RotheConfig,
    *,
    K2: float,
    P2: float,
) -> AprioriBound:
    """Assemble the data side R and the full right-hand side of the bound.

    Refuses (raises :class:`BoundViolation`) when the temperature flux is
    supported on a boundary piece with no absorbing coefficient: the open
    region always, and an electrode/wall group whose gamma bounds are
    undeclared.
    """
    I = coeffs.I
    L = compute_L_sharp(ledger)
    terms: dict[str, float] = {}

    init = [field_from_function(mesh, f) for f in coeffs.u0]
    vol = volume_load_vector(mesh)
    area = float(vol.sum())
    s = 0.0
    for i in range(I):
        shifted = init[i].values - (vol @ init[i].values) / area
        s += norm_l2(Field(mesh, shifted)) ** 2
    terms["initial species energy"] = s
    terms["initial temperature energy"] = (
        2.0 * ledger.b_bounds[1] * norm_l2(init[I]) ** 2
    )

    if coeffs.g is not None:
        g_norm_sq = norm_lp_boundary_data(mesh, ELECTRODES, coeffs.g, 2.0) ** 2
    else:
        g_norm_sq = 0.0
    terms["surface current"] = (
        cfg.T * K2**2 * (P2 + 1.0) ** 2 / L[I + 1] * g_norm_sq if g_norm_sq else 0.0
    )

    flux = 0.0
    for i in range(I):
        if coeffs.h[i] is None:
            continue
        flux += (1.0 + 1.0 / L[i]) * _boundary_time_norm(
            mesh, REGION_TAGS, coeffs.h[i], cfg, 2.0
        )
    terms["species boundary flux"] = K2**2 * flux

    h_T = coeffs.h[I]
    stray = _boundary_time_norm(mesh, [GAMMA_O], h_T, cfg, 1.0)
    if stray > 1e-13 * max(1.0, cfg.T):
        raise BoundViolation(
            "temperature flux acts on the open boundary, where no boundary "
            "coefficient can absorb it; the bound does not apply"
        )
    for tags, ell_r, key in _region_groups(coeffs):
        name = f"heat flux ({'electrodes' if key == 'Gamma' else 'wall'})"
        terms[name] = 0.0
        ellp = ell_r / (ell_r - 1.0)
        for tag in tags:
            power = _boundary_time_norm(mesh, [tag], h_T, cfg, ellp)
            if power <= 0.0:
                continue
            if key not in ledger.gamma_bounds or tag not in coeffs.gamma:
                raise BoundViolation(
                    f"temperature flux on {tag} but no boundary coefficient "
                    f"(or no {key} bounds) absorbs it; the bound does not apply"
                )
            lo = ledger.gamma_bounds[key][0]
            terms[name] += power / (ellp * lo ** (1.0 / (ell_r - 1.0)))

    R = float(sum(terms.values()))
    multiplier = 1.0 + cfg.M / (cfg.M - cfg.T) * math.exp(cfg.T)
    return AprioriBound(
        R=R,
        multiplier=multiplier,
        rhs=multiplier * R,
        terms=terms,
        K2=K2,
        P2=P2,
        L_sharp=tuple(float(v) for v in L),
    )


def verify_cotaul(
    summary: EstimateSummary, bound: AprioriBound, tol: float = 1e-8
) -> CotaulVerdict:
    """Compare the accumulated S-quantities against the a-priori right side."""
    lhs = summary.lhs
    rhs = bound.rhs
    margin = rhs - lhs
    return CotaulVerdict(
        lhs=lhs,
        rhs=rhs,
        margin=margin,
        passed=lhs <= rhs * (1.0 + tol),
        S=summary.S,
    )


# ---------------------------------------------------------------------------
# time-translate diagnostic
# ---------------------------------------------------------------------------


def translate_estimate(
    traj: Trajectory, kirchhoff: Optional[KirchhoffEvaluator] = None, z: float = 0.0
) -> float:
    """Exact value of the Kirchhoff translate integral on the step functions.

    value(z) = int_0^{T-z} (B(u(t+z)) - B(u(t)), u(t+z) - u(t))_domain dt,
    with the piecewise-constant interpolants; z must lie in (0, T).
    """
    ev = kirchhoff or traj.kirchhoff
    cfg = traj.cfg
    tau, T, M = cfg.tau, cfg.T, cfg.M
    if not (0.0 < z < T):
        raise ValueError("translate offset z must lie strictly inside (0, T)")
    mesh = traj.mesh
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    I = traj.I

    thetas = [s.fields[I].values for s in traj.states]
    b_vals = [np.asarray(scalar_tools.B(ev, x, y, th)) for th in thetas]
    Mmat = assemble_mass(mesh)

    cache: dict[tuple[int, int], float] = {}

    def pair_value(j1: int, j2: int) -> float:
        key = (j1, j2)
        if key not in cache:
            du = thetas[j1] - thetas[j2]
            dB = b_vals[j1] - b_vals[j2]
            cache[key] = float(dB @ (Mmat @ du))
        return cache[key]

    upper = T - z
    pts = {0.0, upper}
    k = 1
    while k * tau < upper - 1e-12 * tau:
        pts.add(k * tau)
        k += 1
    k = 1
    while k * tau - z < upper - 1e-12 * tau:
        if k * tau - z > 1e-12 * tau:
            pts.add(k * tau - z)
        k += 1
    breaks = np.array(sorted(pts))
    # collapse breakpoints that coincide up to roundoff
    keep = np.concatenate([[True], np.diff(breaks) > 1e-12 * tau])
    breaks = breaks[keep]

    total = 0.0
    for alpha, beta in zip(breaks[:-1], breaks[1:]):
        mid = 0.5 * (alpha + beta)
        j2 = min(M, max(1, math.ceil(mid / tau - 1e-12)))
        j1 = min(M, max(1, math.ceil((mid + z) / tau - 1e-12)))
        total += (beta - alpha) * pair_value(j1, j2)
    return total
