"""Classical dynamics: trajectories, Liouville transport, transmission.

The classical Hamiltonian is H_cl = p^2/2m + V(x) with the bare (not
smoothed) potential; Hamilton's equations xdot = p/m, pdot = -V'(x) are
integrated with a fixed-step classic fourth-order Runge-Kutta scheme,
vectorized over trajectory ensembles.  The classical evolution of a
Husimi density is the pullback Q(x(t), p(t); t) = Q(x, p; 0) along these
trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import erf

from .errors import ConvergenceError, EnergyDriftError
from .husimi import HusimiField, PhaseSpaceWindow
from .phase_space import PhaseSpaceConfig

ENERGY_DRIFT_TOL = 1e-8
T_CAP = 8.0


def potential_value(x, cfg: PhaseSpaceConfig, potential: str = "gaussian_barrier"):
    x = np.asarray(x, dtype=float)
    if potential == "gaussian_barrier":
        return cfg.v0 * np.exp(-cfg.k * x * x)
    if potential == "harmonic":
        return 0.5 * cfg.mass * cfg.omega**2 * x * x
    if potential == "free":
        return np.zeros_like(x)
    raise ValueError(f"unknown potential {potential!r}")


def potential_force(x, cfg: PhaseSpaceConfig, potential: str = "gaussian_barrier"):
    """-V'(x); for the barrier this is +2 k V0 x exp(-k x^2) (repulsive)."""
    x = np.asarray(x, dtype=float)
    if potential == "gaussian_barrier":
        return 2.0 * cfg.k * cfg.v0 * x * np.exp(-cfg.k * x * x)
    if potential == "harmonic":
        return -cfg.mass * cfg.omega**2 * x
    if potential == "free":
        return np.zeros_like(x)
    raise ValueError(f"unknown potential {potential!r}")


def classical_hamiltonian(x, p, cfg: PhaseSpaceConfig,
                          potential: str = "gaussian_barrier"):
    return np.asarray(p, dtype=float) ** 2 / (2.0 * cfg.mass) \
        + potential_value(x, cfg, potential)


def hamilton_rhs(x, p, cfg: PhaseSpaceConfig, potential: str = "gaussian_barrier"):
    """(xdot, pdot) = (p / m, -V'(x))."""
    return np.asarray(p, dtype=float) / cfg.mass, potential_force(x, cfg, potential)


def _rk4_step(x, p, dt: float, cfg: PhaseSpaceConfig, potential: str):
    k1x, k1p = hamilton_rhs(x, p, cfg, potential)
    k2x, k2p = hamilton_rhs(x + 0.5 * dt * k1x, p + 0.5 * dt * k1p, cfg, potential)
    k3x, k3p = hamilton_rhs(x + 0.5 * dt * k2x, p + 0.5 * dt * k2p, cfg, potential)
    k4x, k4p = hamilton_rhs(x + dt * k3x, p + dt * k3p, cfg, potential)
    return (x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
            p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p))


@dataclass
class Trajectory:
    x0: float
    p0: float
    t: np.ndarray
    x: np.ndarray
    p: np.ndarray
    energy: float

    def final(self) -> tuple[float, float]:
        return float(self.x[-1]), float(self.p[-1])


def integrate(x0: float, p0: float, t_final: float, dt: float,
              cfg: PhaseSpaceConfig, potential: str = "gaussian_barrier",
              drift_tol: float = ENERGY_DRIFT_TOL) -> Trajectory:
    """Single RK4 trajectory with an energy-conservation contract."""
    n = max(1, int(round(t_final / dt)))
    t = dt * np.arange(n + 1)
    x = np.empty(n + 1)
    p = np.empty(n + 1)
    x[0], p[0] = x0, p0
    for i in range(n):
        x[i + 1], p[i + 1] = _rk4_step(x[i], p[i], dt, cfg, potential)
    e0 = float(classical_hamiltonian(x0, p0, cfg, potential))
    e1 = float(classical_hamiltonian(x[-1], p[-1], cfg, potential))
    drift = abs(e1 - e0) / max(abs(e0), 1e-300)
    if drift > drift_tol:
        raise EnergyDriftError(
            f"energy drifted by {drift:.3e} (tolerance {drift_tol:g})")
    return Trajectory(x0, p0, t, x, p, e0)


def integrate_ensemble(x: np.ndarray, p: np.ndarray, dt: float,
                       cfg: PhaseSpaceConfig, potential: str = "gaussian_barrier",
                       t_cap: float = T_CAP, stop_when=None, check_every: int = 25,
                       drift_tol: float = ENERGY_DRIFT_TOL):
    """Vectorized RK4 of many trajectories until stop_when(x, p) or t_cap.

    Returns (x, p, t_reached).  Energy conservation is enforced on the
    whole ensemble.
    """
    x = np.array(x, dtype=float)
    p = np.array(p, dtype=float)
    e0 = classical_hamiltonian(x, p, cfg, potential)
    n_cap = int(round(t_cap / dt))
    steps = 0
    while steps < n_cap:
        burst = min(check_every, n_cap - steps)
        for _ in range(burst):
            x, p = _rk4_step(x, p, dt, cfg, potential)
        steps += burst
        if stop_when is not None and stop_when(x, p):
            break
    e1 = classical_hamiltonian(x, p, cfg, potential)
    drift = np.max(np.abs(e1 - e0) / np.maximum(np.abs(e0), 1e-300))
    if drift > drift_tol:
        raise EnergyDriftError(
            f"ensemble energy drifted by {drift:.3e} (tolerance {drift_tol:g})")
    return x, p, steps * dt


# -- transmission -------------------------------------------------------------


@dataclass
class TransmissionResult:
    t_c: float                 # trajectory count, x > x_cut and p > 0
    t_c_energy: float          # diagnostic: initial energy above barrier top
    t_reached: float
    n_per_axis: int


def _husimi_cell_weights(center: float, width: float, nodes: np.ndarray,
                         half_step: float) -> np.ndarray:
    """Exact Gaussian mass of each quadrature cell (midpoint tensor grid)."""
    lo = (nodes - half_step - center) / (width * math.sqrt(2.0))
    hi = (nodes + half_step - center) / (width * math.sqrt(2.0))
    return 0.5 * (erf(hi) - erf(lo))


def _transmission_once(x0: float, p0: float, cfg: PhaseSpaceConfig,
                       n_per_axis: int, dt: float, t_final: float | None,
                       x_cut: float) -> TransmissionResult:
    # the initial Husimi density of a coherent state has widths sqrt(2) sigma
    wx = math.sqrt(2.0) * cfg.sigma_x
    wp = math.sqrt(2.0) * cfg.sigma_p
    xs = np.linspace(x0 - 5.0 * wx, x0 + 5.0 * wx, n_per_axis)
    ps = np.linspace(p0 - 5.0 * wp, p0 + 5.0 * wp, n_per_axis)
    hx = 0.5 * (xs[1] - xs[0])
    hp = 0.5 * (ps[1] - ps[0])
    weights = np.outer(_husimi_cell_weights(p0, wp, ps, hp),
                       _husimi_cell_weights(x0, wx, xs, hx))
    xg, pg = np.meshgrid(xs, ps)
    x_flat = xg.ravel()
    p_flat = pg.ravel()
    w_flat = weights.ravel()

    e_init = classical_hamiltonian(x_flat, p_flat, cfg)
    reach = 3.0 / math.sqrt(cfg.k) if cfg.k > 0 else abs(x0)

    def decided(x, p):
        return bool(np.all((np.abs(x) > reach) & (x * p > 0.0)))

    stop = None if t_final is not None else decided
    t_cap = t_final if t_final is not None else T_CAP
    xf, pf, t_reached = integrate_ensemble(x_flat, p_flat, dt, cfg,
                                           t_cap=t_cap, stop_when=stop)
    w_total = w_flat.sum()
    transmitted = (xf > x_cut) & (pf > 0.0)
    t_c = float(w_flat[transmitted].sum() / w_total)
    t_c_energy = float(w_flat[e_init > cfg.v0].sum() / w_total)
    return TransmissionResult(t_c, t_c_energy, t_reached, n_per_axis)


def classical_transmission(x0: float, p0: float, cfg: PhaseSpaceConfig,
                           t_final: float | None = None, n_per_axis: int = 301,
                           dt: float | None = None, x_cut: float = 0.0,
                           check_convergence: bool = True,
                           convergence_tol: float = 1e-3) -> TransmissionResult:
    """Husimi-weighted fraction of classical trajectories ending transmitted.

    Initial conditions sample the coherent-state Husimi Gaussian on a
    deterministic tensor grid over +-5 widths, weighted by the exact
    Gaussian mass of each cell.  A trajectory is transmitted when it ends
    at x > x_cut with p > 0; initial energy above the barrier top is
    recorded as an independent diagnostic.  With check_convergence the
    count is recomputed at twice the grid resolution and must agree to
    convergence_tol.
    """
    if dt is None:
        dt = cfg.dt / 5.0
    if dt > cfg.dt:
        raise ValueError("classical dt must not exceed the propagator dt")
    result = _transmission_once(x0, p0, cfg, n_per_axis, dt, t_final, x_cut)
    if check_convergence:
        refined = _transmission_once(x0, p0, cfg, 2 * n_per_axis, dt,
                                     t_final, x_cut)
        if abs(refined.t_c - result.t_c) > convergence_tol:
            raise ConvergenceError(
                f"classical transmission unconverged: {result.t_c:.5f} vs"
                f" {refined.t_c:.5f} on doubling the grid")
        result = refined
    return result


# -- Liouville pullback --------------------------------------------------------


@dataclass
class PullbackField:
    window: PhaseSpaceWindow
    q: np.ndarray
    time: float


def classical_pullback_field(fld0: HusimiField, t: float,
                             window: PhaseSpaceWindow,
                             cfg: PhaseSpaceConfig,
                             potential: str = "gaussian_barrier",
                             dt: float | None = None) -> PullbackField:
    """Initial Husimi density evaluated at backward-integrated preimages.

    Window nodes are integrated from time t back to 0 and the initial
    density is interpolated (cubic) at the preimages; preimages outside
    the sampled support evaluate to 0.
    """
    if dt is None:
        dt = cfg.dt / 5.0
    xg, pg = np.meshgrid(window.x_nodes, window.p_nodes)
    x = xg.ravel()
    p = pg.ravel()
    if t > 0.0:
        n = max(1, int(round(t / dt)))
        step = -t / n
        for _ in range(n):
            x, p = _rk4_step(x, p, step, cfg, potential)
    interp = RegularGridInterpolator(
        (fld0.window.p_nodes, fld0.window.x_nodes), fld0.q,
        method="cubic", bounds_error=False, fill_value=0.0)
    q = interp(np.column_stack([p, x])).reshape(window.np_, window.nx)
    return PullbackField(window, q, t)


# -- export --------------------------------------------------------------------


def trajectories_to_csv(trajectories, cfg: PhaseSpaceConfig, path) -> None:
    """Columnar bundle (id, t, x, p) for overlaying on Husimi snapshots."""
    with open(path, "w") as fh:
        fh.write("# husimiflow trajectory-bundle v1\n")
        fh.write(f"# config_hash = {cfg.config_hash()}\n")
        fh.write("# columns: id, t, x, p\n")
        for i, traj in enumerate(trajectories):
            for t, x, p in zip(traj.t, traj.x, traj.p):
                fh.write(f"{i},{t!r},{x!r},{p!r}\n")
