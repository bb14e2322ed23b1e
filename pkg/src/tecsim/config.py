"""Scenario files: TOML schema, validation, and materialization.

A scenario is described by TOML tables ``[domain]``, ``[mesh]``, ``[time]``,
``[picard]``, ``[coefficients]``, ``[data]``, ``[bounds]``, ``[constants]``,
``[output]``, ``[exact]`` plus an optional top-level ``preset`` name.  With a
preset, scalar tables merge key-by-key (user keys win) while the coupled
tables ``coefficients`` / ``data`` / ``bounds`` / ``exact`` are replaced
wholesale when given -- partial edits of a coefficient family against foreign
bounds are a footgun, not a feature.

Unknown keys anywhere are hard errors naming the offending path; expression
strings are compiled (and therefore validated) here, not at solve time.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field as dc_field
from typing import Mapping, Optional

if sys.version_info >= (3, 11):  # pragma: no cover - exercised by the interpreter
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .coefficients import BoundsLedger, CoefficientSet
from .errors import SchemaError
from .expressions import (
    boundary_data_function,
    coefficient_function,
    scalar_state_function,
    spatial_function,
)
from .mesh import DomainSpec, Mesh, build_rect_mesh
from .presets import PRESET_NAMES, build_tec_demo, get_preset_raw
from .stepper import PicardConfig, RotheConfig


@dataclass
class OutputConfig:
    csv: str = "steps.csv"
    report: str = "report.txt"
    vtk_prefix: str = "fields"
    vtk_stride: int = 0  # 0 = no field snapshots


@dataclass
class Scenario:
    """Materialized scenario: everything the commands need."""

    domain: DomainSpec
    nx: int
    ny: int
    rothe: RotheConfig
    coeffs: CoefficientSet
    ledger: Optional[BoundsLedger]
    output: OutputConfig
    K2_override: Optional[float] = None
    P2_override: Optional[float] = None
    exact: Optional[Mapping] = None
    preset: Optional[str] = None

    def build_mesh(self) -> Mesh:
        return build_rect_mesh(self.domain, self.nx, self.ny)


_SCHEMA = {
    "preset": str,
    "domain": {"width": float, "height": float, "boundary": dict},
    "mesh": {"nx": int, "ny": int},
    "time": {"T": float, "M": int},
    "picard": {"tol": float, "max_iter": int, "damping": float, "min_damping": float},
    "coefficients": {
        "I": int,
        "a": list,
        "F": list,
        "G": list,
        "sigma": (str, float, int),
        "b": (str, float, int),
        "ell": float,
        "gamma": dict,
    },
    "data": {"h": list, "g": (str, float, int), "u0": list},
    "bounds": {
        "a_sharp": list,
        "a_lower": list,
        "F_sharp": list,
        "G_sharp": list,
        "sigma": list,
        "b": list,
        "gamma": dict,
    },
    "constants": {"K2": float, "P2": float},
    "output": {"csv": str, "report": str, "vtk_prefix": str, "vtk_stride": int},
    "exact": None,  # free keys u1..uI, u, phi
}

_REPLACED_WHOLE = ("coefficients", "data", "bounds", "exact")


def _check_keys(raw: dict):
    for key, val in raw.items():
        if key == "_tec_builder":
            continue
        if key not in _SCHEMA:
            raise SchemaError(f"unknown top-level key [{key}]")
        spec = _SCHEMA[key]
        if spec is None:
            continue
        if isinstance(spec, dict):
            if not isinstance(val, dict):
                raise SchemaError(f"[{key}] must be a table")
            for sub in val:
                if sub not in spec:
                    raise SchemaError(f"unknown key {sub!r} in [{key}]")
                want = spec[sub]
                got = val[sub]
                if want is float and isinstance(got, int):
                    continue  # TOML integers are fine where floats are expected
                if want is dict or want is list:
                    if not isinstance(got, want):
                        raise SchemaError(
                            f"[{key}].{sub} must be a {'table' if want is dict else 'array'}"
                        )
                elif isinstance(want, tuple):
                    if not isinstance(got, want):
                        raise SchemaError(f"[{key}].{sub} has the wrong type")
                elif not isinstance(got, want):
                    raise SchemaError(f"[{key}].{sub} must be {want.__name__}")
        elif not isinstance(val, spec):
            raise SchemaError(f"{key!r} must be {spec.__name__}")


def merge_with_preset(user: dict) -> dict:
    """Overlay user sections on the preset base (see module docstring)."""
    name = user.get("preset")
    if name is None:
        return dict(user)
    if name not in PRESET_NAMES:
        raise SchemaError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    base = get_preset_raw(name)
    if base.pop("_tec_builder", False):
        forbidden = [s for s in _REPLACED_WHOLE if s in user]
        if forbidden:
            raise SchemaError(
                f"preset {name!r} builds its coefficients internally; "
                f"[{forbidden[0]}] cannot be overridden"
            )
        base["_tec_builder"] = True
    out = dict(base)
    for key, val in user.items():
        if key == "preset":
            continue
        if key in _REPLACED_WHOLE or key not in out or not isinstance(val, dict):
            out[key] = val
        else:
            merged = dict(out[key])
            merged.update(val)
            out[key] = merged
    out["preset"] = name
    return out


def _is_zero(entry) -> bool:
    if isinstance(entry, str):
        return entry.strip() == "0"
    return float(entry) == 0.0


def _coeff_entry(entry, n_state: int):
    """None for structural zeros, float for constants, compiled otherwise."""
    if _is_zero(entry):
        return None
    if isinstance(entry, (int, float)):
        return float(entry)
    return coefficient_function(entry, n_state)


def _scalar_entry(entry):
    if isinstance(entry, (int, float)):
        return float(entry)
    return scalar_state_function(entry)


def _data_entry(entry):
    if _is_zero(entry):
        return None
    if isinstance(entry, (int, float)):
        return float(entry)
    return boundary_data_function(entry)


def _space_entry(entry):
    if isinstance(entry, (int, float)):
        return float(entry)
    return spatial_function(entry)


def _build_coefficients(raw: dict) -> tuple[CoefficientSet, Optional[BoundsLedger]]:
    try:
        c = raw["coefficients"]
        d = raw["data"]
    except KeyError as exc:
        raise SchemaError(f"missing required section [{exc.args[0]}]") from exc
    for need in ("I", "a", "F", "G", "sigma", "b"):
        if need not in c:
            raise SchemaError(f"[coefficients] is missing {need!r}")
    I = int(c["I"])
    if I < 1:
        raise SchemaError("need at least one species (I >= 1)")
    n = I + 1
    a = tuple(
        tuple(_coeff_entry(c["a"][j][l], n) for l in range(n)) for j in range(n)
    )
    F = tuple(_coeff_entry(v, n) for v in c["F"])
    G = tuple(_coeff_entry(v, n) for v in c["G"])
    gamma_raw = c.get("gamma", {})
    gamma = {}
    for tag, entry in gamma_raw.items():
        if not _is_zero(entry):
            gamma[tag] = _scalar_entry(entry)
    for need in ("h", "u0"):
        if need not in d:
            raise SchemaError(f"[data] is missing {need!r}")
    coeffs = CoefficientSet(
        I=I,
        a=a,
        F=F,
        G=G,
        sigma=_scalar_entry(c["sigma"]) if isinstance(c["sigma"], str) else float(c["sigma"]),
        b=_scalar_entry(c["b"]),
        gamma=gamma,
        ell=float(c.get("ell", 2.0)),
        h=tuple(_data_entry(v) for v in d["h"]),
        g=_space_entry(d["g"]) if ("g" in d and not _is_zero(d["g"])) else None,
        u0=tuple(_space_entry(v) for v in d["u0"]),
    )

    ledger = None
    if "bounds" in raw:
        b = raw["bounds"]
        for need in ("a_sharp", "a_lower", "F_sharp", "G_sharp", "sigma", "b"):
            if need not in b:
                raise SchemaError(f"[bounds] is missing {need!r}")
        gamma_bounds = {
            key: tuple(float(v) for v in trip) for key, trip in b.get("gamma", {}).items()
        }
        ledger = BoundsLedger(
            I=I,
            a_sharp=tuple(tuple(float(v) for v in row) for row in b["a_sharp"]),
            a_lower=tuple(float(v) for v in b["a_lower"]),
            F_sharp=tuple(float(v) for v in b["F_sharp"]),
            G_sharp=tuple(float(v) for v in b["G_sharp"]),
            sigma_bounds=tuple(float(v) for v in b["sigma"]),
            b_bounds=tuple(float(v) for v in b["b"]),
            gamma_bounds=gamma_bounds,
            ell=float(c.get("ell", 2.0)),
        )
    return coeffs, ledger


def _build_domain(raw: dict) -> DomainSpec:
    dom = raw.get("domain", {})
    boundary = dom.get("boundary", {})
    layout = {}
    for side, entry in boundary.items():
        if isinstance(entry, str):
            layout[side] = entry
        elif isinstance(entry, list):
            layout[side] = [(float(a), float(b), str(t)) for a, b, t in entry]
        else:
            raise SchemaError(f"[domain.boundary].{side} must be a tag or interval list")
    return DomainSpec(
        width=float(dom.get("width", 1.0)),
        height=float(dom.get("height", 1.0)),
        layout=layout or {s: "GammaO" for s in ("bottom", "top", "left", "right")},
    )


def materialize(raw: dict) -> Scenario:
    """Validated raw dict (already preset-merged) -> scenario objects."""
    _check_keys(raw)
    domain = _build_domain(raw)
    mesh_tab = raw.get("mesh", {})
    nx = int(mesh_tab.get("nx", 8))
    ny = int(mesh_tab.get("ny", 8))

    time_tab = raw.get("time", {})
    if "T" not in time_tab or "M" not in time_tab:
        raise SchemaError("[time] must provide both T and M")
    pic_tab = raw.get("picard", {})
    picard = PicardConfig(
        tol=float(pic_tab.get("tol", 1e-9)),
        max_iter=int(pic_tab.get("max_iter", 100)),
        damping=float(pic_tab.get("damping", 1.0)),
        min_damping=float(pic_tab.get("min_damping", 1.0 / 16.0)),
    )
    rothe = RotheConfig(T=float(time_tab["T"]), M=int(time_tab["M"]), picard=picard)

    if raw.get("_tec_builder"):
        coeffs, ledger = build_tec_demo(domain)
    else:
        coeffs, ledger = _build_coefficients(raw)

    const_tab = raw.get("constants", {})
    K2_o = float(const_tab["K2"]) if const_tab.get("K2") else None
    P2_o = float(const_tab["P2"]) if const_tab.get("P2") else None

    out_tab = raw.get("output", {})
    output = OutputConfig(
        csv=out_tab.get("csv", "steps.csv"),
        report=out_tab.get("report", "report.txt"),
        vtk_prefix=out_tab.get("vtk_prefix", "fields"),
        vtk_stride=int(out_tab.get("vtk_stride", 0)),
    )

    exact = None
    if "exact" in raw:
        exact = {}
        allowed = {f"u{i + 1}" for i in range(coeffs.I)} | {"u", "phi"}
        for key, expr in raw["exact"].items():
            if key not in allowed:
                raise SchemaError(
                    f"[exact] key {key!r} is not a field name "
                    f"(expected {', '.join(sorted(allowed))})"
                )
            exact[key] = boundary_data_function(expr)

    return Scenario(
        domain=domain,
        nx=nx,
        ny=ny,
        rothe=rothe,
        coeffs=coeffs,
        ledger=ledger,
        output=output,
        K2_override=K2_o,
        P2_override=P2_o,
        exact=exact,
        preset=raw.get("preset"),
    )


def parse_config(text: str) -> Scenario:
    """TOML text -> validated, materialized scenario."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError(f"TOML syntax error: {exc}") from exc
    merged = merge_with_preset(raw)
    return materialize(merged)


def load_config(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
