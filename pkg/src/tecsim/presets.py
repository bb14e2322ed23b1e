"""Built-in scenarios.

* ``decoupled-heat`` -- two independent heat equations (one "species", one
  temperature) on a fully open boundary.  Linear, constant coefficients; the
  workhorse for conservation, determinism, and translate diagnostics.
* ``robin-heat`` -- same structure with unit boundary coefficient on every
  side and diffusion 1/pi^2, so  exp(-t)cos(pi y) / exp(-t)cos(pi x)  solve
  the two rows exactly (their normal derivatives vanish on all sides of the
  unit square).  Carries [exact] for convergence studies.
* ``tec-electrolysis-demo`` -- a two-species electrolysis cell built through
  the physical parameter mapping: anode/cathode strips left/right, radiating
  wall at the bottom (power exponent 5), open top.  Charge numbers are scaled
  (|z| = 1e-5, model units): the drift bound grows like FARADAY*|z|, so
  physical valences push the parabolicity margins negative.
* ``bad-coupling`` -- deliberately inflated drift bound so the smallness
  gate fails; exercises the refusing/forcing paths.
"""

from __future__ import annotations

import copy

import numpy as np

from .coefficients import STEFAN_BOLTZMANN, TECParams, tec_to_abstract
from .errors import SchemaError
from .mesh import DomainSpec

__all__ = ["PRESET_NAMES", "PASSING_PRESETS", "get_preset_raw", "build_tec_demo"]

PRESET_NAMES = (
    "decoupled-heat",
    "robin-heat",
    "tec-electrolysis-demo",
    "bad-coupling",
)
#: presets whose smallness gate passes (the shippable ones)
PASSING_PRESETS = ("decoupled-heat", "robin-heat", "tec-electrolysis-demo")

_DECOUPLED = {
    "domain": {
        "width": 1.0,
        "height": 1.0,
        "boundary": {
            "bottom": "GammaO",
            "top": "GammaO",
            "left": "GammaO",
            "right": "GammaO",
        },
    },
    "mesh": {"nx": 8, "ny": 8},
    "time": {"T": 0.5, "M": 16},
    "coefficients": {
        "I": 1,
        "a": [["1", "0"], ["0", "1"]],
        "F": ["0", "0"],
        "G": ["0", "0"],
        "sigma": "1",
        "b": "1",
        "ell": 2.0,
        "gamma": {},
    },
    "data": {
        "h": ["0", "0"],
        "g": "0",
        "u0": ["cos(pi*y)", "cos(pi*x)"],
    },
    "bounds": {
        "a_sharp": [[1.0, 0.0], [0.0, 1.0]],
        "a_lower": [1.0, 1.0],
        "F_sharp": [0.0, 0.0],
        "G_sharp": [0.0, 0.0],
        "sigma": [1.0, 1.0],
        "b": [1.0, 1.0],
        "gamma": {},
    },
    "exact": {
        "u1": "exp(-pi^2*t)*cos(pi*y)",
        "u": "exp(-pi^2*t)*cos(pi*x)",
        "phi": "0",
    },
}

_ROBIN = {
    "domain": {
        "width": 1.0,
        "height": 1.0,
        "boundary": {
            "bottom": "GammaW",
            "top": "GammaW",
            "left": "GammaA",
            "right": "GammaC",
        },
    },
    "mesh": {"nx": 8, "ny": 8},
    "time": {"T": 0.5, "M": 16},
    "coefficients": {
        "I": 1,
        "a": [["1/pi^2", "0"], ["0", "1/pi^2"]],
        "F": ["0", "0"],
        "G": ["0", "0"],
        "sigma": "1",
        "b": "1",
        "ell": 2.0,
        "gamma": {"GammaA": "1", "GammaC": "1", "GammaW": "1"},
    },
    "data": {
        "h": ["0", "exp(-t)*cos(pi*x)"],
        "g": "0",
        "u0": ["cos(pi*y)", "cos(pi*x)"],
    },
    "bounds": {
        "a_sharp": [[0.10132118364233778, 0.0], [0.0, 0.10132118364233778]],
        "a_lower": [0.10132118364233778, 0.10132118364233778],
        "F_sharp": [0.0, 0.0],
        "G_sharp": [0.0, 0.0],
        "sigma": [1.0, 1.0],
        "b": [1.0, 1.0],
        "gamma": {"Gamma": [1.0, 1.0, 0.0], "GammaW": [1.0, 1.0, 0.0]},
    },
    "exact": {
        "u1": "exp(-t)*cos(pi*y)",
        "u": "exp(-t)*cos(pi*x)",
        "phi": "0",
    },
}

_BAD = copy.deepcopy(_DECOUPLED)
_BAD["coefficients"]["F"] = ["3*cos(e)", "0"]
_BAD["bounds"]["F_sharp"] = [3.0, 0.0]
_BAD.pop("exact")

_TEC_RAW = {
    "domain": {
        "width": 1.0,
        "height": 1.0,
        "boundary": {
            "bottom": "GammaW",
            "top": "GammaO",
            "left": "GammaA",
            "right": "GammaC",
        },
    },
    "mesh": {"nx": 10, "ny": 10},
    "time": {"T": 0.5, "M": 16},
}


def build_tec_demo(domain: DomainSpec):
    """Physical parameters of the demo cell, mapped to the abstract system.

    All transport laws are smooth saturating functions with hand-checkable
    envelopes; emissivity/absorptivity 0.8 feed the radiative wall.
    """
    eps = 0.8
    h_rad = STEFAN_BOLTZMANN * eps  # wall radiation coefficient
    wall_in = STEFAN_BOLTZMANN * eps * 1.0**4  # absorbed ambient irradiation

    def D(theta):
        return 0.4 * (1.0 + 0.1 * theta / (1.0 + np.abs(theta)))

    def S(c, theta):
        return 0.1 / (1.0 + c**2)

    def Dprime(c, theta):
        from .coefficients import GAS_CONSTANT

        return 0.05 / (GAS_CONSTANT * (1.0 + theta**2))

    def k(theta):
        return 1.05 + 0.05 * theta / (1.0 + np.abs(theta))

    def sigma(c, theta):
        s = c[0] + c[1]
        return 1.0 + 0.1 * s / (1.0 + np.abs(s))

    def Pi(theta):
        return 0.15 * theta / (1.0 + np.abs(theta))

    def alphaS(theta):
        return 0.1 / (1.0 + theta**2)

    def rho_cv(x, y, theta):
        return 1.0 + 0.2 / (1.0 + theta**2)

    params = TECParams(
        I=2,
        z=(1e-5, -1e-5),
        D=(D, D),
        D_bounds=((0.36, 0.44), (0.36, 0.44)),
        t=(0.1, 0.1),
        t_abs=(0.1, 0.1),
        S=(S, S),
        cS_sharp=(0.05, 0.05),
        Dprime=(Dprime, Dprime),
        RDp_sharp=(0.05, 0.05),
        k=k,
        k_bounds=(1.0, 1.1),
        sigma=sigma,
        sigma_bounds=(0.9, 1.1),
        Pi=Pi,
        Pi_sharp=0.15,
        alphaS=alphaS,
        alpha_sharp=0.1,
        rho_cv=rho_cv,
        rhocv_bounds=(1.0, 1.2),
        h_C=1.0,
        hC_bounds=(1.0, 1.0),
        theta_a=0.3,
        theta_c=-0.2,
        h_R=h_rad,
        hR_bounds=(h_rad, h_rad),
        ell=5.0,
        wall_flux=wall_in,
        g_species=(
            {"GammaA": 0.05, "GammaC": -0.05},
            {"GammaA": -0.05, "GammaC": 0.05},
        ),
        g_current={"GammaA": 0.2, "GammaC": -0.2},
        theta0=lambda x, y: 0.1 + 0.2 * np.cos(np.pi * x),
        c0=(
            lambda x, y: 0.1 * np.cos(np.pi * y),
            lambda x, y: -0.1 * np.cos(np.pi * y),
        ),
    )
    return tec_to_abstract(params, domain)


def get_preset_raw(name: str) -> dict:
    """Deep copy of a preset's config sections (expression presets carry
    coefficients inline; the cell demo is built by :func:`build_tec_demo`,
    marked here with ``"_tec_builder": True``)."""
    if name == "decoupled-heat":
        return copy.deepcopy(_DECOUPLED)
    if name == "robin-heat":
        return copy.deepcopy(_ROBIN)
    if name == "bad-coupling":
        return copy.deepcopy(_BAD)
    if name == "tec-electrolysis-demo":
        raw = copy.deepcopy(_TEC_RAW)
        raw["_tec_builder"] = True
        return raw
    raise SchemaError(
        f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
    )
