"""Kirchhoff-transform utilities and the discrete Gronwall bound.

For a heat-capacity-like coefficient ``b(x, y, z) > 0`` define

    B(x, v)   = integral of b(x, .) over [0, v]
    Psi(x, s) = B(x, s) * s - integral of B(x, .) over [0, s]
              = integral of z * b(x, z) over [0, s]      (by Fubini)

Both are evaluated with a composite Gauss rule (fixed points per unit of
integration length, uniform subinterval count across a batch so everything
stays vectorized).  Two pointwise inequalities power the energy bookkeeping:

    (B(u) - B(v)) * u       >= Psi(u) - Psi(v)
    (B(u) - B(v)) * (u - v) >= b_lower * (u - v)^2

and their margins are exposed as checkable quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import MissingBound, NonFiniteValue, StepTooLarge


@dataclass(frozen=True)
class KirchhoffEvaluator:
    """Quadrature-backed evaluator for B and Psi.

    ``b`` is a vectorized callable ``b(x, y, z)``; ``points_per_unit`` sets
    the composite Gauss density (that many nodes on every unit of the
    integration interval).  ``b_lower``/``b_upper`` are the declared envelope
    (lower bound required by the quadratic-growth margin check).
    """

    b: Callable
    points_per_unit: int = 8
    b_lower: Optional[float] = None
    b_upper: Optional[float] = None

    def __post_init__(self):
        if self.points_per_unit < 1:
            raise ValueError("points_per_unit must be positive")
        if self.b_lower is not None and self.b_lower <= 0.0:
            raise ValueError("b_lower must be positive")
        if (
            self.b_lower is not None
            and self.b_upper is not None
            and self.b_upper < self.b_lower
        ):
            raise ValueError("b_upper must dominate b_lower")


def _weighted_b_integral(ev: KirchhoffEvaluator, x, y, v, moment: int):
    """integral of z^moment * b(x,y,z) over [0, v], vectorized over points.

    Parametrized as z = v*t, t in [0,1]; composite Gauss with a subinterval
    count uniform over the batch (ceil of the largest |v|).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    scalar = v.ndim == 0
    x, y, v = np.atleast_1d(x), np.atleast_1d(y), np.atleast_1d(v)
    x, y, v = np.broadcast_arrays(x, y, v)
    if not np.all(np.isfinite(v)):
        raise NonFiniteValue("non-finite argument to a Kirchhoff integral")

    n_sub = max(1, int(math.ceil(np.max(np.abs(v))))) if v.size else 1
    nodes, weights = np.polynomial.legendre.leggauss(ev.points_per_unit)
    t = ((np.arange(n_sub)[:, None] + 0.5 * (nodes[None, :] + 1.0)) / n_sub).ravel()
    w = np.tile(0.5 * weights / n_sub, n_sub)

    Z = v[..., None] * t  # (..., nq)
    bz = np.asarray(
        ev.b(x[..., None], y[..., None], Z), dtype=float
    )
    bz = np.broadcast_to(bz, Z.shape)
    if not np.all(np.isfinite(bz)):
        raise NonFiniteValue("b evaluated to a non-finite value")
    integrand = bz if moment == 0 else bz * Z
    out = v * np.sum(w * integrand, axis=-1)
    return float(out[0]) if scalar and out.size == 1 else out


def B(ev: KirchhoffEvaluator, x, y, v):
    """Kirchhoff transform  B(x, v) = integral of b over [0, v]."""
    return _weighted_b_integral(ev, x, y, v, moment=0)


def Psi(ev: KirchhoffEvaluator, x, y, s):
    """Convex potential  Psi(x, s) = integral of z*b(x, z) over [0, s]."""
    return _weighted_b_integral(ev, x, y, s, moment=1)


def check_bpsi(ev: KirchhoffEvaluator, x, y, u, v):
    """Margin of  (B(u) - B(v)) u - (Psi(u) - Psi(v))  (nonnegative for b>0)."""
    u = np.asarray(u, dtype=float)
    return (B(ev, x, y, u) - B(ev, x, y, v)) * u - (Psi(ev, x, y, u) - Psi(ev, x, y, v))


def check_bb(ev: KirchhoffEvaluator, x, y, u, v):
    """Margin of  (B(u) - B(v))(u - v) - b_lower (u - v)^2  (nonnegative)."""
    if ev.b_lower is None:
        raise MissingBound("check_bb needs the declared lower bound b_lower")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return (B(ev, x, y, u) - B(ev, x, y, v)) * (u - v) - ev.b_lower * (u - v) ** 2


def discrete_gronwall(A, L: float, tau: float, m: int) -> float:
    """Bound for a_m with  a_m <= A_m + tau*L*sum_{j<=m} a_j,  0 < tau*L < 1.

    ``A`` is a scalar or a nondecreasing sequence (1-based: ``A[m-1]`` is
    A_m).  Returns  A_m / (1 - tau*L) * exp((m - 1) * tau).
    """
    if m < 1:
        raise ValueError("step index m must be >= 1")
    if not (0.0 < tau * L < 1.0):
        raise StepTooLarge("discrete Gronwall needs 0 < tau*L < 1")
    A_m = float(A) if np.isscalar(A) else float(A[m - 1])
    return A_m / (1.0 - tau * L) * math.exp((m - 1) * tau)


def discrete_gronwall_tight(A, L: float, tau: float, m: int) -> float:
    """Variant with exponent (m-1)*tau*L/(1-tau*L).

    This one dominates the extremal recursion a_m = A/(1-tau*L)^m exactly
    (since 1/(1-x) <= exp(x/(1-x))), which the plain form does not.
    """
    if m < 1:
        raise ValueError("step index m must be >= 1")
    if not (0.0 < tau * L < 1.0):
        raise StepTooLarge("discrete Gronwall needs 0 < tau*L < 1")
    A_m = float(A) if np.isscalar(A) else float(A[m - 1])
    x = tau * L
    return A_m / (1.0 - x) * math.exp((m - 1) * x / (1.0 - x))
