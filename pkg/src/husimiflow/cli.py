"""Command-line interface.

Verbs:
    sweep     transmission/reflection rows over a p0 list
    snapshot  full field/zeros/topology export pipeline at given times
    zeros     Husimi zeros from a dumped wavefunction snapshot
    current   current field (and components) from a dumped snapshot
    topology  stagnation-point report from a dumped snapshot
    validate  cross-check the desk preset against the paper-fidelity one

Exit codes: 0 success, 2 usage or configuration error, 3 physics failure
(norm loss, boundary contamination, energy drift, unconverged sampling).
"""

from __future__ import annotations

import argparse
import os
import sys

from . import experiment
from .current import current_to_csv, quantum_current
from .errors import ConfigError, PhysicsError
from .hamiltonian import AveragedHamiltonian
from .husimi import field_to_csv, find_zeros, husimi_field, make_window, \
    zeros_to_csv
from .phase_space import PRESETS, PhaseSpaceConfig, get_preset
from .propagator import load_snapshot
from .topology import find_stagnation_points, report_to_csv

USAGE_EXIT = 2
PHYSICS_EXIT = 3


def _add_config_args(sub):
    sub.add_argument("--preset", default="desk", choices=sorted(PRESETS),
                     help="named parameter preset (default: desk)")
    sub.add_argument("--config", default=None,
                     help="configuration file overriding the preset")
    sub.add_argument("--trunc-order", type=int, default=None,
                     help="override the hbar truncation order")
    sub.add_argument("--out", default="out", help="output directory")


def _add_window_args(sub):
    sub.add_argument("--window", nargs=4, type=float, default=None,
                     metavar=("X_LO", "X_HI", "P_LO", "P_HI"))
    sub.add_argument("--window-size", nargs=2, type=int, default=None,
                     metavar=("NX", "NP"))


def _config_from(args) -> PhaseSpaceConfig:
    cfg = PhaseSpaceConfig.from_file(args.config) if args.config \
        else get_preset(args.preset)
    if getattr(args, "trunc_order", None) is not None:
        cfg = cfg.replace(trunc_order=args.trunc_order)
    return cfg


def _window_from(args, cfg) -> "experiment.PhaseSpaceWindow":
    if args.window is None and args.window_size is None:
        return experiment.default_window(cfg)
    x_lo, x_hi, p_lo, p_hi = args.window or (-1.875, 1.875, -3.0, 3.0)
    nx, np_ = args.window_size or ((500, 500) if cfg.dx <= 0.005 else (200, 200))
    return make_window(cfg, x_lo, x_hi, nx, p_lo, p_hi, np_)


def _load_psi(args, cfg):
    psi, cfg_hash = load_snapshot(args.psi)
    if cfg_hash and cfg_hash != cfg.config_hash():
        print(f"warning: snapshot config hash {cfg_hash} differs from"
              f" {cfg.config_hash()}", file=sys.stderr)
    return psi


def cmd_sweep(args) -> int:
    cfg = _config_from(args)
    p0_list = args.p0 or list(experiment.DEFAULT_SWEEP_P0)
    result = experiment.run_transmission_sweep(
        p0_list, cfg, x0=args.x0, n_per_axis=args.classical_samples,
        check_convergence=not args.no_convergence_check)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "sweep.csv")
    result.to_csv(path)
    failed = [r for r in result.rows if r.status != "ok"]
    for r in result.rows:
        print(f"p0={r.p0:<5g} T_Q={r.t_q:.6f} T_C={r.t_c:.6f} "
              f"D_T={r.d_t:+.4f} D_R={r.d_r:+.4f} [{r.status}]")
    print(f"wrote {path}")
    return PHYSICS_EXIT if failed else 0


def cmd_snapshot(args) -> int:
    cfg = _config_from(args)
    window = _window_from(args, cfg)
    results = experiment.run_snapshot_pipeline(
        args.p0, args.times, cfg, out_dir=args.out, x0=args.x0, window=window,
        export_psi=args.export_psi)
    for res in results:
        n_stable = len([w for w in res.zeros.zeros if w.stable])
        print(f"t={res.time:g}: {len(res.zeros.zeros)} zeros"
              f" ({n_stable} stable), {len(res.report.points)} stagnation"
              f" points, {len(res.dipoles)} dipoles")
    print(f"wrote outputs to {args.out}")
    return 0


def cmd_zeros(args) -> int:
    cfg = _config_from(args)
    psi = _load_psi(args, cfg)
    window = _window_from(args, cfg)
    fld = husimi_field(psi, window, cfg, max_order=1)
    result = find_zeros(fld)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "zeros.csv")
    zeros_to_csv(result, cfg, path, time=psi.time)
    field_to_csv(fld, os.path.join(args.out, "husimi.csv"))
    print(f"{len(result.zeros)} zeros ({len(result.stable_zeros())} stable),"
          f" {len(result.nonconverged)} unconverged candidates")
    print(f"wrote {path}")
    return 0


def cmd_current(args) -> int:
    cfg = _config_from(args)
    psi = _load_psi(args, cfg)
    window = _window_from(args, cfg)
    fld = husimi_field(psi, window, cfg)
    ham = AveragedHamiltonian(cfg)
    cur = quantum_current(fld, ham, cfg.trunc_order,
                          keep_components=args.components)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "current.csv")
    current_to_csv(cur, path)
    print(f"wrote {path}")
    return 0


def cmd_topology(args) -> int:
    cfg = _config_from(args)
    psi = _load_psi(args, cfg)
    window = _window_from(args, cfg)
    fld = husimi_field(psi, window, cfg)
    ham = AveragedHamiltonian(cfg)
    cur = quantum_current(fld, ham, cfg.trunc_order)
    report = find_stagnation_points(cur, fld)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "stagnation.csv")
    report_to_csv(report, cfg, path, time=psi.time)
    print(f"{len(report.points)} points, {len(report.anomalies)} anomalies,"
          f" {len(report.unstable_zeros)} unstable zeros")
    print(f"wrote {path}")
    return PHYSICS_EXIT if report.anomalies else 0


def cmd_validate(args) -> int:
    report = experiment.validate_presets(p0=args.p0)
    print(f"T_Q fine = {report['t_q_fine']:.6f}")
    print(f"T_Q desk = {report['t_q_desk']:.6f}")
    print(f"|delta|  = {report['delta']:.2e} (tolerance {report['tolerance']:g})")
    print("PASS" if report["ok"] else "FAIL")
    return 0 if report["ok"] else PHYSICS_EXIT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="husimiflow",
        description="Quantum phase-space currents and their topology")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="transmission/reflection sweep over p0")
    _add_config_args(p)
    p.add_argument("--p0", action="append", type=float, default=None)
    p.add_argument("--x0", type=float, default=experiment.DEFAULT_X0)
    p.add_argument("--classical-samples", type=int, default=301,
                   help="classical tensor-grid nodes per axis")
    p.add_argument("--no-convergence-check", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("snapshot", help="field/zeros/topology pipeline")
    _add_config_args(p)
    _add_window_args(p)
    p.add_argument("--p0", type=float, required=True)
    p.add_argument("--x0", type=float, default=experiment.DEFAULT_X0)
    p.add_argument("--times", type=float, nargs="+", required=True)
    p.add_argument("--export-psi", action="store_true")
    p.set_defaults(func=cmd_snapshot)

    for name, func in (("zeros", cmd_zeros), ("current", cmd_current),
                       ("topology", cmd_topology)):
        p = sub.add_parser(name, help=f"{name} from a dumped snapshot")
        _add_config_args(p)
        _add_window_args(p)
        p.add_argument("--psi", required=True, help="wavefunction dump file")
        if name == "current":
            p.add_argument("--components", action="store_true",
                           help="export per-order components")
        p.set_defaults(func=func)

    p = sub.add_parser("validate", help="desk vs paper preset cross-check")
    p.add_argument("--p0", type=float, default=1.8)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except PhysicsError as exc:
        print(f"physics failure: {exc}", file=sys.stderr)
        return PHYSICS_EXIT


if __name__ == "__main__":
    sys.exit(main())
