"""Scenario parsing/merging and the command-line round trips."""

import pathlib
import re

import pytest
from conftest import CONFIG_DIR

from tecsim import cli
from tecsim.config import parse_config
from tecsim.errors import (
    ExpressionParseError,
    SchemaError,
    StepCountTooSmall,
)

DECOUPLED_CFG = str(CONFIG_DIR / "decoupled_heat.toml")
BAD_CFG = str(CONFIG_DIR / "bad_coupling.toml")
TEC_CFG = str(CONFIG_DIR / "tec_demo.toml")


def write_cfg(tmp_path, text, name="case.toml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


# ---------------------------------------------------------------------------
# parsing and preset merging
# ---------------------------------------------------------------------------


def test_parse_minimal_preset(scen_decoupled):
    scn = scen_decoupled
    assert (scn.nx, scn.ny) == (8, 8)
    assert scn.rothe.T == 0.5 and scn.rothe.M == 16
    assert scn.coeffs.I == 1
    assert scn.ledger is not None
    assert set(scn.exact) == {"u1", "u", "phi"}
    assert scn.preset == "decoupled-heat"


def test_partial_sections_merge_over_preset():
    scn = parse_config(
        """
preset = "decoupled-heat"

[time]
M = 4

[mesh]
nx = 4

[picard]
tol = 1e-10
max_iter = 7
"""
    )
    assert scn.rothe.M == 4 and scn.rothe.T == 0.5
    assert (scn.nx, scn.ny) == (4, 8)
    assert scn.rothe.picard.tol == 1e-10
    assert scn.rothe.picard.max_iter == 7


def test_step_count_must_exceed_horizon():
    with pytest.raises(StepCountTooSmall):
        parse_config('preset = "decoupled-heat"\n\n[time]\nT = 20.0\n')


def test_unknown_keys_are_rejected():
    with pytest.raises(SchemaError) as exc:
        parse_config('preset = "decoupled-heat"\nwibble = 1\n')
    assert "unknown top-level key [wibble]" in str(exc.value)
    with pytest.raises(SchemaError) as exc:
        parse_config('preset = "decoupled-heat"\n\n[mesh]\nnz = 2\n')
    assert "unknown key 'nz' in [mesh]" in str(exc.value)
    with pytest.raises(SchemaError):
        parse_config('preset = "no-such-preset"')


def test_bad_expression_reported_at_parse_time():
    with pytest.raises(ExpressionParseError):
        parse_config('preset = "decoupled-heat"\n\n[exact]\nu1 = "cos("\n')


def test_internally_built_coefficients_refuse_overrides():
    with pytest.raises(SchemaError) as exc:
        parse_config(
            'preset = "tec-electrolysis-demo"\n\n[coefficients]\nsigma = "2"\n'
        )
    assert "cannot be overridden" in str(exc.value)


def test_bad_preset_drops_exact_block(scen_bad):
    assert scen_bad.exact is None


# ---------------------------------------------------------------------------
# command round trips (exit codes + artifacts)
# ---------------------------------------------------------------------------


def test_check_passing_scenario(capsys):
    rc = cli.main(["check", DECOUPLED_CFG])
    out = capsys.readouterr().out
    assert rc == 0
    assert "(L_1)_#" in out and "(L_3)_#" in out
    assert "VIOLATED" not in out
    assert "cumulative-estimate rhs" in out


def test_check_failing_scenario(capsys):
    rc = cli.main(["check", BAD_CFG])
    out = capsys.readouterr().out
    assert rc == 2
    assert re.search(r"\(L_1\)_# \[species 1\]\s+margin = -5\.000000e-01\s+\[VIOLATED\]", out)


def test_run_writes_deterministic_csv(tmp_path, capsys):
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert cli.main(["run", DECOUPLED_CFG, "--outdir", out1]) == 0
    assert cli.main(["run", DECOUPLED_CFG, "--outdir", out2]) == 0
    capsys.readouterr()
    csv1 = pathlib.Path(out1, "steps.csv").read_bytes()
    csv2 = pathlib.Path(out2, "steps.csv").read_bytes()
    assert csv1 == csv2
    lines = csv1.decode().splitlines()
    assert len(lines) == 18  # tag + column names + 16 steps
    assert lines[0] == "# tecsim-steps-v1"
    assert lines[1] == "m,t,picard_iters,l2_u1,l2_u,l2_phi,S1,S2,S3,S4,S5,rhs,margin"
    assert (tmp_path / "a" / "report.txt").exists()


def test_run_field_snapshots(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        """
preset = "decoupled-heat"

[time]
M = 4

[output]
vtk_stride = 2
""",
    )
    outdir = tmp_path / "out"
    assert cli.main(["run", cfg, "--outdir", str(outdir)]) == 0
    capsys.readouterr()
    lines = (outdir / "steps.csv").read_text().splitlines()
    assert len(lines) == 6
    vtks = sorted(p.name for p in outdir.glob("*.vtk"))
    assert vtks == ["fields_0000.vtk", "fields_0002.vtk", "fields_0004.vtk"]
    for name in vtks:
        assert (outdir / name).read_text().startswith("# vtk DataFile Version 2.0")


def test_run_divergence_exit_code(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        """
preset = "tec-electrolysis-demo"

[picard]
max_iter = 1
""",
    )
    rc = cli.main(["run", cfg, "--outdir", str(tmp_path / "out")])
    err = capsys.readouterr().err
    assert rc == 3
    assert "solver divergence" in err
    assert "diverged at step 1" in err


def test_convergence_needs_exact_solution(capsys):
    rc = cli.main(["convergence", BAD_CFG])
    err = capsys.readouterr().err
    assert rc == 4
    assert "needs [exact] expressions" in err


def test_translate_table_matches_library(capsys, scen_decoupled):
    from conftest import run_scenario
    from tecsim.estimates import translate_estimate

    rc = cli.main(["translate", DECOUPLED_CFG])
    out = capsys.readouterr().out
    assert rc == 0
    rows = [
        line.split()
        for line in out.splitlines()
        if re.match(r"\s+\d+\.\d+\s+", line)
    ]
    assert len(rows) == 4
    traj = run_scenario(scen_decoupled)
    tau = traj.cfg.tau
    for row, k in zip(rows, (1, 2, 4, 8)):
        assert float(row[0]) == pytest.approx(k * tau)
        assert float(row[1]) == pytest.approx(
            translate_estimate(traj, z=k * tau), rel=1e-5
        )
    assert "ratio stability factor" in out


def test_check_tec_prints_physical_margins(capsys):
    rc = cli.main(["check", TEC_CFG])
    out = capsys.readouterr().out
    assert rc == 0
    for token in ("(L_1)_#", "(L_2)_#", "(L_3)_#", "(L_4)_#"):
        assert token in out
    # frozen margins of the built-in cell (hand arithmetic in the
    # coefficient tests); the report prints them at 6 digits
    for val in ("4.072932e-02", "7.625000e-01", "2.239586e-01"):
        assert val in out
