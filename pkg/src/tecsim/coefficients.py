"""Coefficient families, declared bounds, and parabolicity margins.

The abstract system couples I species fields, one temperature field, and one
potential field.  Its data are

* a dense (I+1)x(I+1) grid ``a`` of diffusion/cross-transport coefficients,
* drift columns ``F`` (potential gradient acting on each species/temperature
  row) and ``G`` (state gradients acting on the potential row),
* conductivity ``sigma``, capacity ``b``, boundary coefficient ``gamma`` with
  a power exponent ``ell`` on the radiating wall,
* boundary data ``h`` (one per species + temperature), surface current ``g``,
  and initial data ``u0``.

All callables are vectorized with signature ``f(x, y, e)`` where ``e`` is the
tuple of state arrays ``(c_1, ..., c_I, theta)`` -- except ``b`` and the
``gamma`` entries, which receive the temperature array alone, the boundary
data ``h[i](x, y, t)``, the current ``g(x, y)``, and initials ``u0[i](x, y)``.
``None`` marks an identically-zero coefficient (skipped during assembly).

Declared envelopes live in :class:`BoundsLedger`.  From them the margins

    L_j      = a_lower_j - (1/2) [ sum_{l != j} (a#_{lj} + a#_{jl}) + F#_j + G#_j ]
    L_{I+2}  = sigma_lower - (1/2) sum_j (F#_j + G#_j)

must all be positive for the scheme's energy bookkeeping to close; that is
the "smallness" gate checked before stepping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import BoundViolation, MissingBound, SchemaError
from .mesh import ELECTRODES, GAMMA_W, DomainSpec

#: Faraday constant [C/mol]
FARADAY = 9.6485e4
#: molar gas constant [J/(mol K)]
GAS_CONSTANT = 8.314
#: Stefan-Boltzmann constant [W/(m^2 K^4)]
STEFAN_BOLTZMANN = 5.67e-8

#: ledger key covering both electrode contact strips
GAMMA_KEY = "Gamma"
#: ledger key for the radiating wall
GAMMA_W_KEY = "GammaW"


@dataclass(frozen=True)
class CoefficientSet:
    """Complete coefficient/data bundle for one scenario."""

    I: int
    a: tuple  # (I+1) x (I+1) of callables/constants/None
    F: tuple  # I+1
    G: tuple  # I+1
    sigma: object
    b: object
    gamma: Mapping[str, object]  # region tag -> coefficient of the temperature trace
    ell: float
    h: tuple  # I+1 boundary data f(x, y, t)
    g: object  # surface current f(x, y) on the electrodes (None = zero)
    u0: tuple  # I+1 initial data f(x, y)

    def __post_init__(self):
        n = self.I + 1
        if len(self.a) != n or any(len(row) != n for row in self.a):
            raise SchemaError(f"coefficient grid must be {n}x{n}")
        for name, seq in (("F", self.F), ("G", self.G), ("h", self.h), ("u0", self.u0)):
            if len(seq) != n:
                raise SchemaError(f"{name} must have {n} entries")
        if self.ell < 2.0:
            raise SchemaError("wall exponent ell must be >= 2")
        for tag in self.gamma:
            if tag not in (*ELECTRODES, GAMMA_W):
                raise SchemaError(f"gamma declared on unsupported region {tag!r}")

    def region_ell(self, tag: str) -> float:
        """Boundary-power exponent active on a region (2 on electrodes)."""
        return 2.0 if tag in ELECTRODES else self.ell


@dataclass(frozen=True)
class BoundsLedger:
    """Declared envelopes for every coefficient, the audit's ground truth.

    ``a_sharp[j][l]`` bounds |a_{jl}|, ``a_lower[j]`` is the diagonal
    ellipticity floor, ``gamma_bounds`` maps ``"Gamma"`` / ``"GammaW"`` to
    ``(lower, upper, additive)`` triples for the boundary coefficient
    relative to |trace|^(ell_region - 2).
    """

    I: int
    a_sharp: tuple
    a_lower: tuple
    F_sharp: tuple
    G_sharp: tuple
    sigma_bounds: tuple
    b_bounds: tuple
    gamma_bounds: Mapping[str, tuple] = field(default_factory=dict)
    ell: float = 2.0

    def __post_init__(self):
        n = self.I + 1
        if len(self.a_sharp) != n or any(len(r) != n for r in self.a_sharp):
            raise SchemaError(f"a_sharp must be {n}x{n}")
        for name, seq in (
            ("a_lower", self.a_lower),
            ("F_sharp", self.F_sharp),
            ("G_sharp", self.G_sharp),
        ):
            if len(seq) != n:
                raise SchemaError(f"{name} must have {n} entries")
        if any(v <= 0.0 for v in self.a_lower):
            raise SchemaError("diagonal lower bounds must be positive")
        for j in range(n):
            if self.a_sharp[j][j] < self.a_lower[j]:
                raise SchemaError("a_sharp diagonal below its lower bound")
        if not (0.0 < self.sigma_bounds[0] <= self.sigma_bounds[1]):
            raise SchemaError("sigma bounds must satisfy 0 < lower <= upper")
        if not (0.0 < self.b_bounds[0] <= self.b_bounds[1]):
            raise SchemaError("b bounds must satisfy 0 < lower <= upper")
        for key, triple in self.gamma_bounds.items():
            if key not in (GAMMA_KEY, GAMMA_W_KEY):
                raise SchemaError(f"gamma_bounds key must be Gamma/GammaW, got {key!r}")
            lo, hi, extra = triple
            if not (0.0 < lo <= hi) or extra < 0.0:
                raise SchemaError("gamma bounds need 0 < lower <= upper, additive >= 0")
        if self.ell < 2.0:
            raise SchemaError("ell must be >= 2")

    def gamma_lower(self, tag: str) -> float:
        key = GAMMA_KEY if tag in ELECTRODES else GAMMA_W_KEY
        return self.gamma_bounds[key][0]

    def region_ell(self, tag: str) -> float:
        return 2.0 if tag in ELECTRODES else self.ell


@dataclass(frozen=True)
class SmallnessReport:
    """Outcome of the parabolicity-margin check: (name, margin, passed)."""

    conditions: tuple

    @property
    def all_passed(self) -> bool:
        return all(ok for _, _, ok in self.conditions)

    def failed_names(self) -> tuple[str, ...]:
        return tuple(name for name, _, ok in self.conditions if not ok)


def compute_L_sharp(ledger: BoundsLedger) -> np.ndarray:
    """The I+2 coercivity margins L_1..L_{I+2} from the declared bounds."""
    n = ledger.I + 1
    a_sharp = np.asarray(ledger.a_sharp, dtype=float)
    F_sharp = np.asarray(ledger.F_sharp, dtype=float)
    G_sharp = np.asarray(ledger.G_sharp, dtype=float)
    out = np.empty(n + 1)
    for j in range(n):
        cross = sum(a_sharp[l, j] + a_sharp[j, l] for l in range(n) if l != j)
        out[j] = ledger.a_lower[j] - 0.5 * (cross + F_sharp[j] + G_sharp[j])
    out[n] = ledger.sigma_bounds[0] - 0.5 * float(np.sum(F_sharp + G_sharp))
    return out


def check_smallness(ledger: BoundsLedger) -> SmallnessReport:
    """Named verdicts: every margin L_j must be strictly positive."""
    L = compute_L_sharp(ledger)
    n = ledger.I + 1
    conds = []
    for j in range(n):
        role = f"species {j + 1}" if j < ledger.I else "temperature"
        conds.append((f"(L_{j + 1})_# [{role}]", float(L[j]), L[j] > 0.0))
    conds.append((f"(L_{n + 1})_# [potential]", float(L[n]), L[n] > 0.0))
    return SmallnessReport(conditions=tuple(conds))


@dataclass(frozen=True)
class ConstantsReport:
    """Everything ``check`` prints: margins, constants, bound ingredients."""

    L_sharp: tuple
    smallness: SmallnessReport
    K2: float
    K2_source: str
    P2: float
    P2_source: str
    apriori: object = None  # estimates.AprioriBound, attached by the caller
    notes: tuple = ()


# ---------------------------------------------------------------------------
# physical-cell parameters and their abstract image
# ---------------------------------------------------------------------------


def _const_or_call(f, *args):
    return f(*args) if callable(f) else f


@dataclass(frozen=True)
class TECParams:
    """Physical cell parameters (model units).

    Each transport function may be a constant or a vectorized callable with
    the physical arguments noted below; every ``*_bounds`` / ``*_sharp``
    entry is a declared envelope, required before mapping.

    Species are indexed 0..I-1.  ``z`` are charge numbers; note the mapped
    drift bound scales with FARADAY * |z|, so keeping the parabolicity
    margins positive requires |z| << 1 in these model units.
    """

    I: int
    z: tuple
    D: tuple  # D_i(theta)
    D_bounds: tuple  # per species (lower, upper)
    t: tuple  # t_i(c_i, theta), transference
    t_abs: tuple  # sup |t_i|
    S: tuple  # S_i(c_i, theta), Soret factor
    cS_sharp: tuple  # sup |c_i * S_i|
    Dprime: tuple  # D'_i(c_i, theta), Dufour factor
    RDp_sharp: tuple  # sup R * theta^2 * |D'_i|
    k: object  # k(theta), heat conductivity
    k_bounds: tuple
    sigma: object  # sigma(c, theta), electric conductivity
    sigma_bounds: tuple
    Pi: object  # Pi(theta), Peltier
    Pi_sharp: float
    alphaS: object  # alpha_S(theta), Seebeck
    alpha_sharp: float
    rho_cv: object  # rho*c_v(x, y, theta), volumetric capacity
    rhocv_bounds: tuple
    h_C: object  # contact heat-exchange coefficient h_C(x, y)
    hC_bounds: tuple
    theta_a: float  # anode contact temperature
    theta_c: float  # cathode contact temperature
    h_R: object  # wall radiation coefficient h_R(x, y)
    hR_bounds: tuple
    ell: float  # wall power exponent (4 + 1 for the radiative law)
    wall_flux: object  # absorbed irradiation on the wall, f(x, y, t)
    g_species: tuple  # per species: {"GammaA": f(x,y,t)|const, "GammaC": ...}
    g_current: Mapping[str, object]  # {"GammaA": f(x,y)|const, "GammaC": ...}
    theta0: object  # initial temperature f(x, y)
    c0: tuple  # initial concentrations f(x, y)

    def __post_init__(self):
        for name in (
            "D_bounds",
            "t_abs",
            "cS_sharp",
            "RDp_sharp",
            "k_bounds",
            "sigma_bounds",
            "Pi_sharp",
            "alpha_sharp",
            "rhocv_bounds",
            "hC_bounds",
            "hR_bounds",
        ):
            if getattr(self, name) is None:
                raise MissingBound(f"TECParams.{name} must be declared")
        if len(self.z) != self.I:
            raise SchemaError("need one charge number per species")
        if any(zi == 0.0 for zi in self.z):
            raise SchemaError("charge numbers must be nonzero")


def region_indicator(domain: DomainSpec, tag: str):
    """Vectorized indicator of one boundary region, resolved from coordinates.

    Points are classified by which rectangle side they (approximately) lie
    on and which layout interval of that side contains them.  Interior
    points return 0.
    """
    W, H = domain.width, domain.height
    tol = 1e-9 * max(W, H)
    pieces = []  # (axis, side_coord, lo, hi) selecting this tag
    for side, axis, side_coord in (
        ("bottom", 1, 0.0),
        ("top", 1, H),
        ("left", 0, 0.0),
        ("right", 0, W),
    ):
        for a, b, t in domain.side_intervals(side):
            if t == tag:
                pieces.append((axis, side_coord, a, b))

    def ind(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for axis, side_coord, a, b in pieces:
            on_side = np.abs((x if axis == 0 else y) - side_coord) <= tol
            along = y if axis == 0 else x
            out = np.where(on_side & (along >= a - tol) & (along <= b + tol), 1.0, out)
        return out

    return ind


def tec_to_abstract(
    params: TECParams, domain: DomainSpec
) -> tuple[CoefficientSet, BoundsLedger]:
    """Map physical cell parameters onto the abstract system + its ledger.

    The drift structure comes from rewriting migration fluxes through the
    electrochemical potential: species row j picks up
    F_j = t_j sigma / (FARADAY z_j) against grad(phi) and the potential row
    picks up G_j = FARADAY z_j D_j against grad(c_j); the temperature row
    carries the Peltier/Seebeck pair Pi*sigma and alpha_S*sigma.
    """
    I = params.I
    n = I + 1
    Fz = tuple(FARADAY * z for z in params.z)

    def species_diag(i):
        return lambda x, y, e, i=i: _const_or_call(params.D[i], e[I]) + 0.0 * x

    def soret(i):
        return lambda x, y, e, i=i: e[i] * _const_or_call(params.S[i], e[i], e[I])

    def dufour(j):
        return (
            lambda x, y, e, j=j: GAS_CONSTANT
            * e[I] ** 2
            * _const_or_call(params.Dprime[j], e[j], e[I])
        )

    a = [[None] * n for _ in range(n)]
    for i in range(I):
        a[i][i] = species_diag(i)
        a[i][I] = soret(i)
        a[I][i] = dufour(i)
    a[I][I] = lambda x, y, e: _const_or_call(params.k, e[I]) + 0.0 * x

    def sigma_fn(x, y, e):
        return _const_or_call(params.sigma, tuple(e[:I]), e[I]) + 0.0 * x

    def drift(j):
        return lambda x, y, e, j=j: (
            _const_or_call(params.t[j], e[j], e[I]) / Fz[j] * sigma_fn(x, y, e)
        )

    F = [drift(j) for j in range(I)]
    F.append(lambda x, y, e: _const_or_call(params.Pi, e[I]) * sigma_fn(x, y, e))

    def back_drift(j):
        return lambda x, y, e, j=j: Fz[j] * _const_or_call(params.D[j], e[I]) + 0.0 * x

    G = [back_drift(j) for j in range(I)]
    G.append(lambda x, y, e: _const_or_call(params.alphaS, e[I]) * sigma_fn(x, y, e))

    def b(x, y, e):
        return _const_or_call(params.rho_cv, x, y, e) + 0.0 * x

    pw = params.ell - 2.0
    gamma = {
        "GammaA": lambda x, y, e: _const_or_call(params.h_C, x, y) + 0.0 * x,
        "GammaC": lambda x, y, e: _const_or_call(params.h_C, x, y) + 0.0 * x,
        GAMMA_W: lambda x, y, e: _const_or_call(params.h_R, x, y) * np.abs(e) ** pw,
    }

    ind = {tag: region_indicator(domain, tag) for tag in ("GammaA", "GammaC", GAMMA_W)}

    def species_flux(i):
        ga = params.g_species[i].get("GammaA", 0.0)
        gc = params.g_species[i].get("GammaC", 0.0)

        def h_i(x, y, t, ga=ga, gc=gc):
            val_a = ga(x, y, t) if callable(ga) else ga
            val_c = gc(x, y, t) if callable(gc) else gc
            return val_a * ind["GammaA"](x, y) + val_c * ind["GammaC"](x, y)

        return h_i

    def heat_flux(x, y, t):
        hc = _const_or_call(params.h_C, x, y)
        wall = params.wall_flux(x, y, t) if callable(params.wall_flux) else params.wall_flux
        return (
            hc * params.theta_a * ind["GammaA"](x, y)
            + hc * params.theta_c * ind["GammaC"](x, y)
            + wall * ind[GAMMA_W](x, y)
        )

    h = tuple(species_flux(i) for i in range(I)) + (heat_flux,)

    def current(x, y):
        ga = params.g_current.get("GammaA", 0.0)
        gc = params.g_current.get("GammaC", 0.0)
        val_a = ga(x, y) if callable(ga) else ga
        val_c = gc(x, y) if callable(gc) else gc
        return val_a * ind["GammaA"](x, y) + val_c * ind["GammaC"](x, y)

    u0 = tuple(params.c0) + (params.theta0,)
    coeffs = CoefficientSet(
        I=I,
        a=tuple(tuple(row) for row in a),
        F=tuple(F),
        G=tuple(G),
        sigma=sigma_fn,
        b=b,
        gamma=gamma,
        ell=params.ell,
        h=h,
        g=current,
        u0=u0,
    )

    a_sharp = np.zeros((n, n))
    a_lower = np.empty(n)
    F_sharp = np.empty(n)
    G_sharp = np.empty(n)
    sig_hi = params.sigma_bounds[1]
    for i in range(I):
        a_sharp[i, i] = params.D_bounds[i][1]
        a_sharp[i, I] = params.cS_sharp[i]
        a_sharp[I, i] = params.RDp_sharp[i]
        a_lower[i] = params.D_bounds[i][0]
        F_sharp[i] = params.t_abs[i] / abs(Fz[i]) * sig_hi
        G_sharp[i] = abs(Fz[i]) * params.D_bounds[i][1]
    a_sharp[I, I] = params.k_bounds[1]
    a_lower[I] = params.k_bounds[0]
    F_sharp[I] = params.Pi_sharp * sig_hi
    G_sharp[I] = params.alpha_sharp * sig_hi

    ledger = BoundsLedger(
        I=I,
        a_sharp=tuple(map(tuple, a_sharp)),
        a_lower=tuple(a_lower),
        F_sharp=tuple(F_sharp),
        G_sharp=tuple(G_sharp),
        sigma_bounds=tuple(params.sigma_bounds),
        b_bounds=tuple(params.rhocv_bounds),
        gamma_bounds={
            GAMMA_KEY: (params.hC_bounds[0], params.hC_bounds[1], 0.0),
            GAMMA_W_KEY: (params.hR_bounds[0], params.hR_bounds[1], 0.0),
        },
        ell=params.ell,
    )
    return coeffs, ledger


# ---------------------------------------------------------------------------
# sampling audit of the declared envelopes
# ---------------------------------------------------------------------------


def validate_bounds(
    coeffs: CoefficientSet,
    ledger: BoundsLedger,
    samples: int = 256,
    *,
    domain: Optional[DomainSpec] = None,
    state_range: tuple = (-2.0, 2.0),
    seed: int = 0,
) -> list[str]:
    """Monte-Carlo check that every coefficient stays inside its envelope.

    Returns a list of human-readable violation records (empty = clean).
    Deterministic for a fixed seed.
    """
    if domain is None:
        domain = DomainSpec()
    rng = np.random.default_rng(seed)
    n = coeffs.I + 1
    x = rng.uniform(0.0, domain.width, samples)
    y = rng.uniform(0.0, domain.height, samples)
    e = tuple(rng.uniform(*state_range, samples) for _ in range(n))
    tol = 1e-9
    bad: list[str] = []

    def record(name, val, lo, hi):
        idx = None
        if lo is not None and np.any(val < lo - tol * max(1.0, abs(lo))):
            idx = int(np.argmin(val))
        elif hi is not None and np.any(val > hi + tol * max(1.0, abs(hi))):
            idx = int(np.argmax(val))
        if idx is not None:
            bad.append(
                f"{name} = {val[idx]:.6g} outside [{lo}, {hi}] at "
                f"(x={x[idx]:.4g}, y={y[idx]:.4g}, e={[f'{s[idx]:.3g}' for s in e]})"
            )

    def evaluate(fn, state):
        out = fn(x, y, state) if callable(fn) else np.full(samples, float(fn))
        out = np.asarray(out, dtype=float)
        return np.broadcast_to(out, (samples,))

    for j in range(n):
        for l in range(n):
            if coeffs.a[j][l] is None:
                if j == l:
                    bad.append(f"a[{j}][{j}] absent but must stay >= its floor")
                continue  # declared slack on an absent coupling is fine
            val = evaluate(coeffs.a[j][l], e)
            if j == l:
                record(f"a[{j}][{l}]", val, ledger.a_lower[j], ledger.a_sharp[j][l])
            else:
                record(f"|a[{j}][{l}]|", np.abs(val), None, ledger.a_sharp[j][l])
    for j in range(n):
        if coeffs.F[j] is not None:
            record(f"|F[{j}]|", np.abs(evaluate(coeffs.F[j], e)), None, ledger.F_sharp[j])
        if coeffs.G[j] is not None:
            record(f"|G[{j}]|", np.abs(evaluate(coeffs.G[j], e)), None, ledger.G_sharp[j])
    record("sigma", evaluate(coeffs.sigma, e), *ledger.sigma_bounds)
    record("b", evaluate(coeffs.b, e[coeffs.I]), *ledger.b_bounds)

    for tag, fn in coeffs.gamma.items():
        key = GAMMA_KEY if tag in ELECTRODES else GAMMA_W_KEY
        if key not in ledger.gamma_bounds:
            bad.append(f"gamma present on {tag} but no {key} bounds declared")
            continue
        lo, hi, extra = ledger.gamma_bounds[key]
        p = coeffs.region_ell(tag) - 2.0
        theta = e[coeffs.I]
        val = evaluate(fn, theta)
        envelope_lo = lo * np.abs(theta) ** p
        envelope_hi = hi * np.abs(theta) ** p + extra
        if np.any(val < envelope_lo - tol) or np.any(val > envelope_hi + tol):
            idx = int(np.argmax(np.maximum(envelope_lo - val, val - envelope_hi)))
            bad.append(
                f"gamma[{tag}] = {val[idx]:.6g} escapes its power envelope at "
                f"theta={theta[idx]:.4g}"
            )
    return bad
