"""Command-line driver: ``check | run | convergence | translate``.

Exit codes: 0 success, 2 failed margins / envelope violations, 3 solver
divergence, 4 malformed scenario.  All numeric output is deterministic for a
given scenario file.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Optional, Sequence

from . import estimates, output, stepper
from .coefficients import ConstantsReport, check_smallness, validate_bounds
from .config import Scenario, load_config
from .errors import (
    ConfigError,
    MissingBound,
    NoExactSolution,
    PicardDiverged,
    SmallnessViolated,
    BoundViolation,
)
from .fem_core import estimate_K2, estimate_P2
from .mesh import build_rect_mesh
from .scalar_tools import KirchhoffEvaluator
from .stepper import RotheConfig


def _require_ledger(scn: Scenario):
    if scn.ledger is None:
        raise ConfigError(
            "this command needs the declared-bounds table [bounds] "
            "(margins and the energy audit are computed from it)"
        )
    return scn.ledger


def _constants(scn: Scenario, mesh) -> ConstantsReport:
    ledger = _require_ledger(scn)
    smallness = check_smallness(ledger)
    if scn.K2_override is not None:
        K2, K2_src = scn.K2_override, "user override"
    else:
        K2, K2_src = estimate_K2(mesh), "mesh-estimated, a lower bound of the continuum constant"
    if scn.P2_override is not None:
        P2, P2_src = scn.P2_override, "user override"
    else:
        P2, P2_src = estimate_P2(mesh), "mesh-estimated, a lower bound of the continuum constant"
    from .coefficients import compute_L_sharp

    return ConstantsReport(
        L_sharp=tuple(float(v) for v in compute_L_sharp(ledger)),
        smallness=smallness,
        K2=K2,
        K2_source=K2_src,
        P2=P2,
        P2_source=P2_src,
    )


def cmd_check(scn: Scenario, outdir: Optional[str]) -> int:
    mesh = scn.build_mesh()
    ledger = _require_ledger(scn)
    constants = _constants(scn, mesh)
    text = output.render_constants(constants)

    violations = validate_bounds(scn.coeffs, ledger, domain=scn.domain)
    if violations:
        text += "Declared-bounds sampling\n" + "-" * 72 + "\n"
        for v in violations:
            text += f"  VIOLATION: {v}\n"
    else:
        text += "  declared bounds hold on sampled states\n"

    code = 0
    if constants.smallness.all_passed:
        bound = estimates.compute_R(
            scn.coeffs, ledger, mesh, scn.rothe, K2=constants.K2, P2=constants.P2
        )
        text += "A-priori data bound\n" + "-" * 72 + "\n"
        for name, val in bound.terms.items():
            text += f"  R term, {name:<24s} = {val:.6e}\n"
        text += f"  R = {bound.R:.6e}\n"
        text += f"  multiplier = {bound.multiplier:.6e}\n"
        text += f"  cumulative-estimate rhs = {bound.rhs:.6e}\n"
    else:
        text += "  (data bound skipped: failed margins make it meaningless)\n"
        code = 2
    if violations:
        code = 2

    print(text, end="")
    if outdir is not None:
        output.ensure_outdir(outdir)
        path = os.path.join(outdir, scn.output.report)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"written: {path}")
    return code


def cmd_run(scn: Scenario, outdir: str, force: bool) -> int:
    mesh = scn.build_mesh()
    ledger = _require_ledger(scn)
    constants = _constants(scn, mesh)
    bound = estimates.compute_R(
        scn.coeffs, ledger, mesh, scn.rothe, K2=constants.K2, P2=constants.P2
    )
    ev = KirchhoffEvaluator(
        b=scn.coeffs.b, b_lower=ledger.b_bounds[0], b_upper=ledger.b_bounds[1]
    )
    auditor = estimates.EnergyAuditor(mesh, scn.coeffs, ledger, scn.rothe, ev)

    output.ensure_outdir(outdir)
    csv_path = os.path.join(outdir, scn.output.csv)
    stride = scn.output.vtk_stride
    state_box = {}

    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        writer = output.StepCsvWriter(fh, scn.coeffs.I)

        def observer(state):
            if state.index > 0:
                audit = auditor.ingest(state_box["prev"], state)
                writer.write(
                    audit,
                    (auditor.S1, auditor.S2, auditor.S3, auditor.S4, auditor.S5),
                )
            state_box["prev"] = state
            if stride > 0 and (state.index % stride == 0 or state.index == scn.rothe.M):
                output.write_vtk(
                    os.path.join(
                        outdir, f"{scn.output.vtk_prefix}_{state.index:04d}.vtk"
                    ),
                    mesh,
                    state,
                    scn.coeffs.I,
                )

        traj = stepper.run(
            scn.coeffs, mesh, scn.rothe, bounds=ledger, force=force, observer=observer
        )

    summary = auditor.summary()
    verdict = estimates.verify_cotaul(summary, bound)
    errors = None
    if scn.exact:
        errors = output.nodal_errors(mesh, traj.states[-1], scn.exact, scn.coeffs.I)
    report = output.render_report(
        mesh, scn.rothe, constants, summary, bound, verdict, errors
    )
    report_path = os.path.join(outdir, scn.output.report)
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(report)

    print(f"steps: {scn.rothe.M}; worst step margin {summary.worst_rel_margin:.3e}")
    print(
        f"cumulative estimate: lhs {verdict.lhs:.6e} <= rhs {verdict.rhs:.6e} "
        f"[{'HOLDS' if verdict.passed else 'FAILS'}]"
    )
    print(f"written: {csv_path}")
    print(f"written: {report_path}")
    return 0 if verdict.passed and summary.all_steps_pass else 2


def _total_error(mesh, state, exact, I) -> float:
    errs = output.nodal_errors(mesh, state, exact, I)
    return math.sqrt(sum(v * v for v in errs.values()))


def cmd_convergence(scn: Scenario, levels: int) -> int:
    if not scn.exact:
        raise NoExactSolution(
            "convergence study needs [exact] expressions in the scenario"
        )
    if levels < 2:
        raise ConfigError("need at least 2 levels to observe an order")
    T, M0 = scn.rothe.T, scn.rothe.M
    I = scn.coeffs.I

    def solve(nx, ny, M):
        mesh = build_rect_mesh(scn.domain, nx, ny)
        cfg = RotheConfig(T=T, M=M, picard=scn.rothe.picard)
        traj = stepper.run(scn.coeffs, mesh, cfg)
        return mesh, traj

    rows_s = []
    for lev in range(levels):
        nx, ny = scn.nx * 2**lev, scn.ny * 2**lev
        M = M0 * 4**lev  # tau ~ h^2 keeps the implicit-Euler error subordinate
        mesh, traj = solve(nx, ny, M)
        h = math.hypot(scn.domain.width / nx, scn.domain.height / ny)
        rows_s.append((lev, h, T / M, _total_error(mesh, traj.states[-1], scn.exact, I)))

    nx_f, ny_f = scn.nx * 2 ** (levels - 1), scn.ny * 2 ** (levels - 1)
    h_f = math.hypot(scn.domain.width / nx_f, scn.domain.height / ny_f)
    rows_t = []
    M_t0 = max(2, M0 // 2)
    for lev in range(levels):
        M = M_t0 * 2**lev
        mesh, traj = solve(nx_f, ny_f, M)
        rows_t.append((lev, h_f, T / M, _total_error(mesh, traj.states[-1], scn.exact, I)))

    def orders(rows, ratio):
        out = [float("nan")]
        for (_, _, _, e0), (_, _, _, e1) in zip(rows[:-1], rows[1:]):
            out.append(math.log(e0 / e1) / math.log(ratio))
        return out

    ord_s = orders(rows_s, 2.0)  # h halves per level
    ord_t = orders(rows_t, 2.0)  # tau halves per level

    def show(title, rows, ords):
        print(title)
        print(f"  {'level':>5s} {'h':>12s} {'tau':>12s} {'L2 error':>14s} {'order':>8s}")
        for (lev, h, tau, err), o in zip(rows, ords):
            otxt = "-" if math.isnan(o) else f"{o:8.3f}"
            print(f"  {lev:>5d} {h:>12.6f} {tau:>12.6f} {err:>14.6e} {otxt:>8s}")

    show("Spatial sweep (tau scaled with h^2):", rows_s, ord_s)
    show("Temporal sweep (mesh fixed at finest level):", rows_t, ord_t)
    print(f"observed spatial order:  {ord_s[-1]:.3f}")
    print(f"observed temporal order: {ord_t[-1]:.3f}")
    return 0


def cmd_translate(scn: Scenario, z_list: Optional[Sequence[float]], force: bool) -> int:
    mesh = scn.build_mesh()
    ledger = scn.ledger
    traj = stepper.run(scn.coeffs, mesh, scn.rothe, bounds=ledger, force=force)
    tau = scn.rothe.tau
    if z_list is None:
        z_list = [k * tau for k in (1, 2, 4, 8) if k * tau < scn.rothe.T]
    if not z_list:
        raise ConfigError("no admissible translate offsets in (0, T)")
    print(f"  {'z':>12s} {'value':>14s} {'value/z':>14s}")
    ratios = []
    for z in z_list:
        val = estimates.translate_estimate(traj, None, z)
        ratios.append(val / z)
        print(f"  {z:>12.6f} {val:>14.6e} {ratios[-1]:>14.6e}")
    if len(ratios) > 1:
        lo, hi = min(ratios), max(ratios)
        factor = hi / lo if lo > 0 else float("inf")
        print(f"ratio stability factor across offsets: {factor:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tecsim",
        description="coupled ion/heat/potential transport: solve and audit the "
        "energy estimates the scheme is built on",
    )
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="margins, constants, and the data bound")
    c.add_argument("config")
    c.add_argument("--outdir", default=None, help="also write the report here")

    r = sub.add_parser("run", help="march all steps, audit, write artifacts")
    r.add_argument("config")
    r.add_argument("--outdir", default="out")
    r.add_argument("--force", action="store_true", help="step despite failed margins")

    v = sub.add_parser("convergence", help="manufactured-solution order study")
    v.add_argument("config")
    v.add_argument("--levels", type=int, default=3)

    t = sub.add_parser("translate", help="time-translate compactness diagnostic")
    t.add_argument("config")
    t.add_argument(
        "--z",
        default=None,
        help="comma-separated offsets in (0, T); default tau,2tau,4tau,8tau",
    )
    t.add_argument("--force", action="store_true", help="step despite failed margins")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scn = load_config(args.config)
        if args.command == "check":
            return cmd_check(scn, args.outdir)
        if args.command == "run":
            return cmd_run(scn, args.outdir, args.force)
        if args.command == "convergence":
            return cmd_convergence(scn, args.levels)
        if args.command == "translate":
            z_list = None
            if args.z is not None:
                z_list = [float(tok) for tok in args.z.split(",") if tok.strip()]
            return cmd_translate(scn, z_list, args.force)
        raise AssertionError(args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 4
    except (SmallnessViolated, BoundViolation, MissingBound) as exc:
        print(f"estimate hypotheses violated: {exc}", file=sys.stderr)
        return 2
    except PicardDiverged as exc:
        print(f"solver divergence: {exc}", file=sys.stderr)
        return 3


def entry():  # console-script hook
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
