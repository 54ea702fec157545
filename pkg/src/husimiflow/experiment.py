"""Orchestration: transmission sweeps, snapshot pipelines, validation.

A sweep row compares, for one initial momentum p0, the quantum
transmission T_Q = integral_{x>0} |psi(x, t_final)|^2 dx against the
classical transmission T_C of the trajectory ensemble weighted by the
initial Husimi density, through the relative differences

    D_T = (T_C - T_Q) / T_C,      D_R = (R_C - R_Q) / R_C.

Runs start from a coherent state at (x0, p0) and integrate until the
probability mass inside |x| < 1/sqrt(k) falls below 1e-4 (capped at
t = 8), so both packets have fully cleared the interaction region.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .classical import classical_hamiltonian, classical_transmission, \
    potential_value, trajectories_to_csv, integrate
from .current import current_to_csv, quantum_current
from .errors import PhysicsError
from .hamiltonian import AveragedHamiltonian
from .husimi import PhaseSpaceWindow, field_to_csv, find_zeros, husimi_field, \
    make_window, zeros_to_csv
from .phase_space import PhaseSpaceConfig, get_preset
from .propagator import SplitOperator, WavefunctionGrid, dump_snapshot, \
    initial_coherent_state
from .topology import find_stagnation_points, pair_dipoles, report_to_csv

DEFAULT_X0 = -4.0
CENTRAL_MASS_FLOOR = 1e-4
T_CAP = 8.0
DEFAULT_SWEEP_P0 = tuple(round(1.6 + 0.1 * i, 1) for i in range(9))


# -- quantum transmission ------------------------------------------------------


@dataclass
class QuantumRun:
    psi: WavefunctionGrid
    t_final: float
    t_q: float
    norm_drift: float


def run_quantum_transmission(p0: float, cfg: PhaseSpaceConfig,
                             x0: float = DEFAULT_X0,
                             t_cap: float = T_CAP) -> QuantumRun:
    """Propagate a coherent state until it clears the barrier region."""
    psi = initial_coherent_state(x0, p0, cfg)
    prop = SplitOperator(cfg)
    x = psi.x
    central = np.abs(x) < 1.0 / math.sqrt(cfg.k) if cfg.k > 0 else np.abs(x) < 1.0
    norm0 = psi.norm()
    n_cap = int(round(t_cap / cfg.dt))
    check_every = 10
    steps = 0
    while steps < n_cap:
        for _ in range(min(check_every, n_cap - steps)):
            psi = prop.step(psi)
        steps = int(round(psi.time / cfg.dt))
        mass = float(np.sum(np.abs(psi.samples[central]) ** 2) * cfg.dx)
        if mass < CENTRAL_MASS_FLOOR:
            break
    weights = np.where(x > 0.0, 1.0, np.where(x == 0.0, 0.5, 0.0))
    t_q = float(np.sum(weights * np.abs(psi.samples) ** 2) * cfg.dx / psi.norm())
    return QuantumRun(psi, psi.time, t_q, abs(psi.norm() - norm0))


# -- sweep ----------------------------------------------------------------------


@dataclass
class SweepRow:
    p0: float
    t_q: float = math.nan
    t_c: float = math.nan
    r_q: float = math.nan
    r_c: float = math.nan
    d_t: float = math.nan
    d_r: float = math.nan
    t_c_energy: float = math.nan
    t_final_quantum: float = math.nan
    t_final_classical: float = math.nan
    status: str = "ok"


@dataclass
class SweepResult:
    rows: list
    cfg: PhaseSpaceConfig
    x0: float

    def row(self, p0: float) -> SweepRow:
        return next(r for r in self.rows if math.isclose(r.p0, p0))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# husimiflow sweep v1\n")
            fh.write(f"# config_hash = {self.cfg.config_hash()}\n")
            fh.write(f"# x0 = {self.x0!r}\n")
            fh.write("# columns: p0, t_q, t_c, r_q, r_c, d_t, d_r,"
                     " t_c_energy, t_final_quantum, t_final_classical, status\n")
            for r in self.rows:
                fh.write(f"{r.p0!r},{r.t_q!r},{r.t_c!r},{r.r_q!r},{r.r_c!r},"
                         f"{r.d_t!r},{r.d_r!r},{r.t_c_energy!r},"
                         f"{r.t_final_quantum!r},{r.t_final_classical!r},"
                         f"{r.status}\n")


def run_transmission_sweep(p0_list, cfg: PhaseSpaceConfig, x0: float = DEFAULT_X0,
                           n_per_axis: int = 301,
                           check_convergence: bool = True) -> SweepResult:
    """Quantum and classical transmission rows for each requested p0.

    A failing sub-run aborts only its own row; the failure reason is
    recorded in the row status.
    """
    rows = []
    for p0 in p0_list:
        row = SweepRow(p0=float(p0))
        try:
            quantum = run_quantum_transmission(p0, cfg, x0=x0)
            classical = classical_transmission(
                x0, p0, cfg, n_per_axis=n_per_axis,
                check_convergence=check_convergence)
            row.t_q = quantum.t_q
            row.t_c = classical.t_c
            row.r_q = 1.0 - quantum.t_q
            row.r_c = 1.0 - classical.t_c
            row.d_t = (row.t_c - row.t_q) / row.t_c if row.t_c != 0.0 else math.nan
            row.d_r = (row.r_c - row.r_q) / row.r_c if row.r_c != 0.0 else math.nan
            row.t_c_energy = classical.t_c_energy
            row.t_final_quantum = quantum.t_final
            row.t_final_classical = classical.t_reached
        except PhysicsError as exc:
            row.status = f"failed: {exc}"
        rows.append(row)
    return SweepResult(rows, cfg, x0)


# -- energy contours --------------------------------------------------------------


def energy_contours(cfg: PhaseSpaceConfig, window: PhaseSpaceWindow,
                    levels=None, n_points: int = 400):
    """Classical energy-level polylines p(x) = +-sqrt(2m(E - V)) on a window.

    Returns a list of (level, branch, x, p) arrays; the separatrix is the
    level E = V0.  Classically forbidden stretches are NaN; consumers
    treat NaN as a pen-up gap.
    """
    if levels is None:
        base = potential_value(0.0, cfg)
        levels = [0.25 * base, 0.5 * base, 0.75 * base, base, 1.25 * base,
                  1.5 * base, 2.0 * base]
    x = np.linspace(window.x_nodes[0], window.x_nodes[-1], n_points)
    out = []
    for level in levels:
        kinetic = 2.0 * cfg.mass * (level - potential_value(x, cfg))
        p = np.sqrt(np.where(kinetic >= 0.0, kinetic, np.nan))
        out.append((float(level), +1, x, p))
        out.append((float(level), -1, x, -p))
    return out


def separatrix_distance_cells(x: float, p: float, cfg: PhaseSpaceConfig,
                              window: PhaseSpaceWindow) -> float:
    """Signed distance from (x, p) to the H_cl = V0 contour, in grid cells.

    First-order estimate s / |grad s| with the gradient expressed in cell
    units; positive above the separatrix (transmitting side).
    """
    s = float(classical_hamiltonian(x, p, cfg) - cfg.v0)
    dhdx = -2.0 * cfg.k * cfg.v0 * x * math.exp(-cfg.k * x * x)
    dhdp = p / cfg.mass
    gx = dhdx * window.dx
    gp = dhdp * window.dp
    denom = math.hypot(gx, gp)
    if denom == 0.0:
        return math.inf if s > 0 else -math.inf
    return s / denom


def contours_to_csv(contours, cfg: PhaseSpaceConfig, path) -> None:
    with open(path, "w") as fh:
        fh.write("# husimiflow energy-contours v1\n")
        fh.write(f"# config_hash = {cfg.config_hash()}\n")
        fh.write(f"# separatrix_level = {cfg.v0!r}\n")
        fh.write("# columns: level, branch, x, p\n")
        for level, branch, xs, ps in contours:
            for x, p in zip(xs, ps):
                fh.write(f"{level!r},{branch},{x!r},{p!r}\n")


# -- snapshot pipeline --------------------------------------------------------------


def default_window(cfg: PhaseSpaceConfig) -> PhaseSpaceWindow:
    """Action-region window; 500x500 on the fine grid, 200x200 on desk."""
    n = 500 if cfg.dx <= 0.005 else 200
    return make_window(cfg, -1.875, 1.875, n, -3.0, 3.0, n)


@dataclass
class SnapshotResult:
    time: float
    field: object
    current: object
    zeros: object
    report: object
    dipoles: list
    unpaired: list


def run_snapshot_pipeline(p0: float, times, cfg: PhaseSpaceConfig,
                          out_dir=None, x0: float = DEFAULT_X0,
                          window: PhaseSpaceWindow | None = None,
                          trunc_order: int | None = None,
                          max_dipole_sep_cells: float = 12.0,
                          export_psi: bool = False):
    """Husimi/current/zeros/stagnation/dipole products at each snapshot time.

    With an empty time list only the configuration echo is written (when
    out_dir is given) and an empty list returned.
    """
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        cfg.to_file(os.path.join(out_dir, "run.cfg"))
    if not times:
        return []
    if window is None:
        window = default_window(cfg)
    if trunc_order is None:
        trunc_order = cfg.trunc_order
    ham = AveragedHamiltonian(cfg)
    psi0 = initial_coherent_state(x0, p0, cfg)
    prop = SplitOperator(cfg)
    snaps = prop.evolve(psi0, max(times), snapshot_times=sorted(times))
    by_time = {round(s.time, 9): s for s in snaps}
    du, dv = window.cell_z(cfg)
    results = []
    for t in sorted(times):
        psi = by_time[round(t, 9)]
        fld = husimi_field(psi, window, cfg, max_order=trunc_order)
        cur = quantum_current(fld, ham, trunc_order)
        zeros = find_zeros(fld)
        report = find_stagnation_points(cur, fld)
        dipoles, unpaired = pair_dipoles(
            report.points, max_dipole_sep_cells * math.hypot(du, dv))
        results.append(SnapshotResult(t, fld, cur, zeros, report, dipoles,
                                      unpaired))
        if out_dir is not None:
            tag = f"t{t:.4f}"
            if export_psi:
                dump_snapshot(psi, cfg, os.path.join(out_dir, f"psi_{tag}.txt"))
            field_to_csv(fld, os.path.join(out_dir, f"husimi_{tag}.csv"))
            current_to_csv(cur, os.path.join(out_dir, f"current_{tag}.csv"))
            zeros_to_csv(zeros, cfg, os.path.join(out_dir, f"zeros_{tag}.csv"),
                         time=t)
            report_to_csv(report, cfg,
                          os.path.join(out_dir, f"stagnation_{tag}.csv"), time=t)
            contours_to_csv(energy_contours(cfg, window),
                            os.path.join(out_dir, f"contours_{tag}.csv"))
            _dipoles_to_csv(dipoles, cfg,
                            os.path.join(out_dir, f"dipoles_{tag}.csv"), time=t)
    return results


def _dipoles_to_csv(dipoles, cfg: PhaseSpaceConfig, path, time=None) -> None:
    with open(path, "w") as fh:
        fh.write("# husimiflow dipoles v1\n")
        fh.write(f"# config_hash = {cfg.config_hash()}\n")
        if time is not None:
            fh.write(f"# time = {time!r}\n")
        fh.write("# columns: saddle_x, saddle_p, partner_x, partner_p,"
                 " partner_class, separation\n")
        for d in dipoles:
            fh.write(f"{d.saddle.x!r},{d.saddle.p!r},{d.partner.x!r},"
                     f"{d.partner.p!r},{d.partner.classification},"
                     f"{d.separation!r}\n")


# -- preset cross-validation -----------------------------------------------------


def validate_presets(p0: float = 1.8, x0: float = DEFAULT_X0,
                     tol: float = 5e-3) -> dict:
    """Desk-preset quantum transmission must match the fine preset."""
    fine = run_quantum_transmission(p0, get_preset("paper"), x0=x0)
    desk = run_quantum_transmission(p0, get_preset("desk"), x0=x0)
    delta = abs(fine.t_q - desk.t_q)
    return {
        "p0": p0,
        "t_q_fine": fine.t_q,
        "t_q_desk": desk.t_q,
        "delta": delta,
        "tolerance": tol,
        "ok": delta < tol,
    }
