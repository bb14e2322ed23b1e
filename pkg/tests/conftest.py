"""Shared fixtures: preset scenarios, meshes, and cached trajectories.

Trajectories are session-scoped because the Rothe runs dominate the suite's
wall time; everything downstream (audits, derivatives, translates) reads
them without mutating.
"""

import pathlib

import pytest

from tecsim.config import parse_config
from tecsim.mesh import DomainSpec, build_rect_mesh
from tecsim.stepper import RotheConfig, run

CONFIG_DIR = pathlib.Path(__file__).resolve().parent.parent / "configs"


def run_scenario(scn, M=None, nx=None, force=False):
    """Mesh + Rothe run for a parsed scenario, with optional overrides."""
    n = nx if nx is not None else scn.nx
    mesh = build_rect_mesh(scn.domain, n, n)
    cfg = scn.rothe
    if M is not None:
        cfg = RotheConfig(T=cfg.T, M=M, picard=cfg.picard)
    traj = run(scn.coeffs, mesh, cfg, bounds=scn.ledger, force=force)
    return traj


@pytest.fixture(scope="session")
def mesh8():
    return build_rect_mesh(DomainSpec(), 8, 8)


@pytest.fixture(scope="session")
def scen_decoupled():
    return parse_config('preset = "decoupled-heat"')


@pytest.fixture(scope="session")
def scen_robin():
    return parse_config('preset = "robin-heat"')


@pytest.fixture(scope="session")
def scen_tec():
    return parse_config('preset = "tec-electrolysis-demo"')


@pytest.fixture(scope="session")
def scen_bad():
    return parse_config('preset = "bad-coupling"')


@pytest.fixture(scope="session")
def traj_decoupled(scen_decoupled):
    return run_scenario(scen_decoupled)


@pytest.fixture(scope="session")
def traj_robin(scen_robin):
    return run_scenario(scen_robin)


@pytest.fixture(scope="session")
def traj_tec(scen_tec):
    return run_scenario(scen_tec)
