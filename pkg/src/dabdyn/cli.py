"""Command-line front end.

Exit codes: 0 success, 1 per-point failures (or validation budgets missed),
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DabError, DomainError
from .model import ConstantCurrent, ConstantPower, ControlVector, load_params
from .optsolve import max_transferable_power, solve_operating_point, sweep_power
from . import geometry, simulate, stability, tables, zvs

__all__ = ["RunConfig", "main", "build_parser"]

EXIT_OK, EXIT_POINT_FAILURES, EXIT_USAGE = 0, 1, 2

POWER_BUDGET = 0.15
PHASOR_BUDGET = 0.10

DEFAULT_STABILITY_POWERS = (300.0, 700.0, 1000.0)
DEFAULT_VALIDATE_POWERS = (-1000.0, -500.0, -250.0, 0.0, 250.0, 500.0, 1000.0)
DEFAULT_SQUARE_DELTAS = (-0.2, 0.2)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    params_path: Path | None
    out_dir: Path
    seed: int
    degrees: bool
    options: argparse.Namespace

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        params = Path(args.params) if args.params else None
        if params is not None and not params.is_file():
            raise UsageError(f"parameter file not found: {params}")
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"cannot create output directory {out}: {exc}") from exc
        return cls(params, out, args.seed, args.degrees, args)

    def params(self):
        try:
            p = load_params(self.params_path)
        except (DomainError, ValueError, KeyError) as exc:
            raise UsageError(f"invalid parameter file: {exc}") from exc
        opts = self.options
        changes = {}
        for name in ("i1min", "i2min"):
            value = getattr(opts, name, None)
            if value is not None:
                changes[name.replace("i", "I", 1)] = value
        return p.replace(**changes) if changes else p


def _powers(text: str):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad power list {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("power list is empty")
    return vals


def _grid(opts):
    if opts.steps < 2:
        raise UsageError("--steps must be >= 2 (empty power grid)")
    if not opts.pmax > opts.pmin:
        raise UsageError("--pmax must exceed --pmin")
    return opts.pmin, opts.pmax, opts.steps


def _angle(x: float, degrees: bool) -> float:
    return math.degrees(x) if degrees else x


# -- commands ----------------------------------------------------------------

def cmd_sweep(cfg: RunConfig) -> int:
    p = cfg.params()
    pmin, pmax, steps = _grid(cfg.options)
    table = sweep_power(pmin, pmax, steps, p, seed=cfg.seed)
    table.to_csv(cfg.out_dir / "sweep.csv", degrees=cfg.degrees)
    ok = [pt for pt in table if pt.converged]
    P = np.array([pt.P_target for pt in ok])
    delta = np.array([pt.delta for pt in ok])
    sign = np.sign(np.where(np.abs(delta) < 1e-12, 0.0, delta))
    changes = [float(0.5 * (P[k] + P[k + 1])) for k in range(len(sign) - 1)
               if sign[k] != sign[k + 1] and sign[k] != 0 and sign[k + 1] != 0]
    changes += [float(P[k]) for k in range(len(sign)) if sign[k] == 0]
    d1_sat = [float(pt.P_target) for pt in ok if abs(pt.control.d1 - math.pi) < 1e-3]
    d2_sat = [float(pt.P_target) for pt in ok if abs(pt.control.d2 - math.pi) < 1e-3]
    summary = {
        "points": len(table),
        "failed_powers": [pt.P_target for pt in table if not pt.converged],
        "delta_sign_change_W": sorted(changes),
        "d1_saturated_range_W": [min(d1_sat), max(d1_sat)] if d1_sat else None,
        "d2_saturated_range_W": [min(d2_sat), max(d2_sat)] if d2_sat else None,
        "P_max_W": max_transferable_power(p),
        "angle_unit": "deg" if cfg.degrees else "rad",
    }
    tables.write_json(cfg.out_dir / "sweep_summary.json", summary)
    return EXIT_OK if not summary["failed_powers"] else EXIT_POINT_FAILURES


def cmd_zvs(cfg: RunConfig) -> int:
    p = cfg.params()
    pmin, pmax, steps = _grid(cfg.options)
    table = sweep_power(pmin, pmax, steps, p, seed=cfg.seed)
    zmap = zvs.zvs_map(table, p)
    zmap.to_csv(cfg.out_dir / "zvs.csv")
    summary = zmap.summary()
    summary["thresholds_A"] = {"I1min": p.I1min, "I2min": p.I2min}
    tables.write_json(cfg.out_dir / "zvs_summary.json", summary)
    return EXIT_OK if not zmap.failed_powers else EXIT_POINT_FAILURES


def cmd_stability(cfg: RunConfig) -> int:
    p = cfg.params()
    opts = cfg.options
    powers = opts.powers or list(DEFAULT_STABILITY_POWERS)
    modes = [opts.mode] if opts.mode else list(stability.MODES)
    ops = []
    for P in powers:
        try:
            ops.append(solve_operating_point(P, p, seed=cfg.seed))
        except DabError:
            ops.append(None)
    failures = 0
    for mode in modes:
        reps = stability.eigen_table(powers, mode, p, seed=cfg.seed, operating_points=ops)
        failures += sum(1 for r in reps if r.error)
        stability.write_eigen_csv(cfg.out_dir / f"eig_{mode}.csv", reps)
    verdicts = stability.zero_dynamics_verdicts(p)
    payload = {
        "real": verdicts["real"].as_dict(),
        "complex": verdicts["complex"].as_dict(),
        "filter_pole_per_s": verdicts["filter_pole"],
        "filter_stable": verdicts["filter_stable"],
        "L1_sq_minus_Lm_sq_H2": verdicts["L1_sq_minus_Lm_sq"],
        "P_max_W": max_transferable_power(p),
        "cpl_crossing_W": stability.cpl_crossing_power(p),
    }
    tables.write_json(cfg.out_dir / "hurwitz.json", payload)
    return EXIT_OK if failures == 0 else EXIT_POINT_FAILURES


def cmd_geometry(cfg: RunConfig) -> int:
    p = cfg.params()
    opts = cfg.options
    op = solve_operating_point(opts.power, p, seed=cfg.seed)
    if not op.converged:
        tables.write_json(cfg.out_dir / "geometry.json", {"P_W": opts.power, "error": op.message})
        return EXIT_POINT_FAILURES
    report = geometry.geometry_report(op, p, angle=opts.angle)
    report["angle"] = _angle(opts.angle, cfg.degrees)
    report["angle_unit"] = "deg" if cfg.degrees else "rad"
    tables.write_json(cfg.out_dir / "geometry.json", report)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    p = cfg.params()
    opts = cfg.options
    if opts.delta is not None:
        ctrl = ControlVector.from_delta(opts.d1, opts.d2, opts.delta)
        P = opts.power
    else:
        op = solve_operating_point(opts.power, p, seed=cfg.seed)
        if not op.converged:
            tables.write_json(cfg.out_dir / "simulate_summary.json",
                              {"P_W": opts.power, "error": op.message})
            return EXIT_POINT_FAILURES
        ctrl, P = op.control, op.P_target
    load = ConstantPower(P) if opts.load == "cpl" else ConstantCurrent(P / p.Vc2_ref)
    x0 = None
    if opts.periodic:
        x0 = simulate.periodic_state(ctrl, load, p, opts.steps_per_cycle)
    try:
        w = simulate.run_switched(ctrl, load, p, opts.cycles, opts.steps_per_cycle, x0=x0,
                                  early_exit_tol=1e-9)
        blown = None
    except simulate.IntegrationBlowupError as exc:
        w, blown = exc.partial, str(exc)
    keep = min(opts.record_cycles, w.cycles) * w.steps_per_cycle + 1
    trimmed = simulate.Waveforms(w.t[-keep:], w.x[-keep:], w.s1[-keep:], w.s2[-keep:],
                                 w.sample_rate, w.duration, w.steps_per_cycle, ctrl, load)
    trimmed.to_csv(cfg.out_dir / "waveforms.csv")
    summary = {
        "P_W": P, "load": opts.load, "cycles_run": w.cycles,
        "d1": _angle(ctrl.d1, cfg.degrees), "d2": _angle(ctrl.d2, cfg.degrees),
        "delta": _angle(ctrl.delta, cfg.degrees),
        "angle_unit": "deg" if cfg.degrees else "rad", "error": blown,
    }
    if blown is None and w.cycles >= 1:
        m = simulate.steady_metrics(w, p)
        summary.update({
            "Vc2_avg_V": m.Vc2_avg, "Pout_avg_W": m.Pout_avg, "Pin_avg_W": m.Pin_avg,
            "losses_W": m.losses, "I_qd1_hat_A": m.I_qd1_hat, "I_qd2_hat_A": m.I_qd2_hat,
            "settled": m.settled, "periodicity_error": m.periodicity_error,
        })
    tables.write_json(cfg.out_dir / "simulate_summary.json", summary)
    return EXIT_OK if blown is None else EXIT_POINT_FAILURES


def cmd_validate(cfg: RunConfig) -> int:
    p = cfg.params()
    opts = cfg.options
    powers = opts.powers or list(DEFAULT_VALIDATE_POWERS)
    rows, passed = [], True
    for P in powers:
        op = solve_operating_point(P, p, seed=cfg.seed)
        if not op.converged:
            passed = False
            continue
        row = simulate.validate_operating_point(op, p, opts.steps_per_cycle)
        d = {"kind": "optimizer", **row.as_dict(),
             "within_budget": row.power_error <= POWER_BUDGET}
        passed &= d["within_budget"]
        rows.append(d)
    for dl in DEFAULT_SQUARE_DELTAS:
        row = simulate.validate_square_drive(dl, p, opts.steps_per_cycle)
        d = {"kind": f"square_delta_{dl:+g}", **row.as_dict(),
             "within_budget": max(row.I1_error, row.I2_error) <= PHASOR_BUDGET}
        passed &= d["within_budget"]
        rows.append(d)
    columns = ("kind",) + simulate.VALIDATION_COLUMNS + ("within_budget",)
    tables.write_csv(cfg.out_dir / "validate.csv", columns, rows)
    tables.write_json(cfg.out_dir / "validate_summary.json", {
        "power_budget": POWER_BUDGET, "phasor_budget": PHASOR_BUDGET,
        "passed": bool(passed), "rows": len(rows),
    })
    return EXIT_OK if passed else EXIT_POINT_FAILURES


COMMANDS = {
    "sweep": cmd_sweep,
    "zvs": cmd_zvs,
    "stability": cmd_stability,
    "geometry": cmd_geometry,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="parameter file (INI); defaults to the packaged values")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--seed", type=int, default=0, help="seed for multi-start solves")
    common.add_argument("--degrees", action="store_true",
                        help="report angles in degrees (presentation only)")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--pmin", type=float, default=-1000.0)
    grid.add_argument("--pmax", type=float, default=1000.0)
    grid.add_argument("--steps", type=int, default=41)

    parser = argparse.ArgumentParser(prog="dabdyn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sweep", parents=[common, grid], help="optimal controls over a power grid")
    z = sub.add_parser("zvs", parents=[common, grid], help="half-bridge ZVS map")
    z.add_argument("--i1min", type=float, help="override the primary threshold [A]")
    z.add_argument("--i2min", type=float, help="override the secondary threshold [A]")
    s = sub.add_parser("stability", parents=[common], help="eigenvalues and Hurwitz tests")
    s.add_argument("--powers", type=_powers, help="comma-separated powers [W]")
    s.add_argument("--mode", choices=stability.MODES, help="load mode (default: both)")
    g = sub.add_parser("geometry", parents=[common], help="controllability/observability")
    g.add_argument("--power", type=float, default=300.0)
    g.add_argument("--angle", type=float, default=math.pi / 4,
                   help="angle at which winding currents are sampled [rad]")
    m = sub.add_parser("simulate", parents=[common], help="switched-model waveforms")
    m.add_argument("--power", type=float, default=500.0,
                   help="target power; controls come from the optimizer unless --delta is given")
    m.add_argument("--d1", type=float, default=math.pi)
    m.add_argument("--d2", type=float, default=math.pi)
    m.add_argument("--delta", type=float, help="outer phase shift [rad] for open-loop drive")
    m.add_argument("--load", choices=("cc", "cpl"), default="cc")
    m.add_argument("--cycles", type=int, default=200)
    m.add_argument("--steps-per-cycle", type=int, default=1000)
    m.add_argument("--record-cycles", type=int, default=2,
                   help="number of final periods written to waveforms.csv")
    m.add_argument("--periodic", action="store_true",
                   help="start on the periodic orbit instead of the default state")
    v = sub.add_parser("validate", parents=[common], help="first-harmonic vs switched model")
    v.add_argument("--powers", type=_powers, help="comma-separated powers [W]")
    v.add_argument("--steps-per-cycle", type=int, default=1000)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = RunConfig.from_args(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_POINT_FAILURES


if __name__ == "__main__":
    sys.exit(main())
