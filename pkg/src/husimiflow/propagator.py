"""Split-time-operator evolution of the wavefunction on the coordinate grid.

One step of dt applies the symmetric (second-order, reversible) splitting

    psi -> exp(-i V dt / 2 hbar) psi        half potential phase
    psi -> IFFT exp(-i hbar k^2 dt / 2 m) FFT psi
    psi -> exp(-i V dt / 2 hbar) psi        half potential phase

The FFT implies periodic boundaries; a boundary-amplitude monitor guards
against wraparound contamination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryContaminationError, NormLossError, PhysicsError
from .phase_space import PhaseSpaceConfig, coherent_kernel, z_from_xp

BOUNDARY_FLOOR = 1e-12  # fraction of the peak |psi| tolerated at the grid edge


@dataclass
class WavefunctionGrid:
    """Complex amplitudes psi(x_i) on the uniform grid of cfg, at one time."""

    samples: np.ndarray
    time: float
    x_min: float
    dx: float

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.samples.size)

    def norm(self) -> float:
        """Quadrature of |psi|^2 dx; 1 for a physical state."""
        return float(np.sum(np.abs(self.samples) ** 2) * self.dx)

    def boundary_amplitude(self) -> float:
        """Largest |psi| over the outer two cells of each edge, relative to the peak."""
        mags = np.abs(self.samples)
        peak = mags.max()
        if peak == 0.0:
            return 0.0
        edge = max(mags[:2].max(), mags[-2:].max())
        return float(edge / peak)

    def expectation_x(self) -> float:
        w = np.abs(self.samples) ** 2
        return float(np.sum(self.x * w) * self.dx / (np.sum(w) * self.dx))

    def expectation_p(self, cfg: PhaseSpaceConfig) -> float:
        n = self.samples.size
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=self.dx)
        psi_k = np.fft.fft(self.samples)
        w = np.abs(psi_k) ** 2
        return float(cfg.hbar * np.sum(k * w) / np.sum(w))

    def copy(self) -> "WavefunctionGrid":
        return WavefunctionGrid(self.samples.copy(), self.time, self.x_min, self.dx)


def gaussian_barrier(x: np.ndarray, cfg: PhaseSpaceConfig) -> np.ndarray:
    return cfg.v0 * np.exp(-cfg.k * x * x)


def harmonic_potential(x: np.ndarray, cfg: PhaseSpaceConfig) -> np.ndarray:
    return 0.5 * cfg.mass * cfg.omega**2 * x * x


def free_potential(x: np.ndarray, cfg: PhaseSpaceConfig) -> np.ndarray:
    return np.zeros_like(x)


POTENTIALS = {
    "gaussian_barrier": gaussian_barrier,
    "harmonic": harmonic_potential,
    "free": free_potential,
}


def initial_coherent_state(x0: float, p0: float, cfg: PhaseSpaceConfig,
                           boundary_floor: float = BOUNDARY_FLOOR) -> WavefunctionGrid:
    """Coherent state centered at (x0, p0), sampled on the cfg grid.

    Rejects centers closer than 5 sigma_x to either grid edge, or whose
    Gaussian tail at the boundary exceeds boundary_floor.  The sampled
    state is renormalized so the grid quadrature is exactly 1.
    """
    if x0 - cfg.x_min < 5.0 * cfg.sigma_x or cfg.x_max - x0 < 5.0 * cfg.sigma_x:
        raise PhysicsError(
            f"coherent state at x0={x0} is closer than 5 sigma_x to a grid edge")
    x = cfg.x_grid()
    z0 = z_from_xp(x0, p0, cfg)
    samples = coherent_kernel(z0, x, cfg).astype(complex)
    samples /= np.sqrt(np.sum(np.abs(samples) ** 2) * cfg.dx)
    psi = WavefunctionGrid(samples, 0.0, cfg.x_min, cfg.dx)
    if psi.boundary_amplitude() > boundary_floor:
        raise BoundaryContaminationError(
            f"initial state tail at the grid edge exceeds {boundary_floor:g}")
    return psi


class SplitOperator:
    """Propagator for a fixed cfg and potential; owns no state itself."""

    def __init__(self, cfg: PhaseSpaceConfig, potential: str = "gaussian_barrier",
                 boundary_floor: float = BOUNDARY_FLOOR):
        self.cfg = cfg
        self.potential = potential
        self.boundary_floor = boundary_floor
        x = cfg.x_grid()
        v = POTENTIALS[potential](x, cfg)
        k = 2.0 * np.pi * np.fft.fftfreq(x.size, d=cfg.dx)
        self._half_v = np.exp(-0.5j * v * cfg.dt / cfg.hbar)
        self._kin = np.exp(-0.5j * cfg.hbar * k * k * cfg.dt / cfg.mass)
        # conjugates propagate backwards (dt -> -dt)
        self._half_v_back = np.conj(self._half_v)
        self._kin_back = np.conj(self._kin)

    def step(self, psi: WavefunctionGrid, backward: bool = False) -> WavefunctionGrid:
        """One symmetric split step of +/- dt.  Norm is preserved to roundoff."""
        half_v = self._half_v_back if backward else self._half_v
        kin = self._kin_back if backward else self._kin
        s = half_v * psi.samples
        s = np.fft.ifft(kin * np.fft.fft(s))
        s = half_v * s
        out = WavefunctionGrid(s, psi.time + (-self.cfg.dt if backward else self.cfg.dt),
                               psi.x_min, psi.dx)
        if out.boundary_amplitude() > self.boundary_floor:
            raise BoundaryContaminationError(
                f"boundary amplitude exceeded {self.boundary_floor:g} of peak"
                f" at t={out.time:.4f}")
        return out

    def evolve(self, psi0: WavefunctionGrid, t_final: float,
               snapshot_times=(), check_norm: bool = True) -> list[WavefunctionGrid]:
        """Propagate to t_final; return snapshots at the requested times.

        Snapshot times must be multiples of dt (within 1e-9 dt) and lie in
        [t0, t_final].  The final state is appended if t_final is not
        already among the snapshot times; with an empty snapshot list only
        the final state is returned.
        """
        dt = self.cfg.dt
        n_steps = int(round((t_final - psi0.time) / dt))
        if n_steps < 0 or abs(psi0.time + n_steps * dt - t_final) > 1e-9 * max(dt, 1.0):
            raise ValueError("t_final must be psi0.time plus a multiple of dt")
        wanted = {}
        for t in snapshot_times:
            steps = int(round((t - psi0.time) / dt))
            if abs(psi0.time + steps * dt - t) > 1e-9 * max(dt, 1.0):
                raise ValueError(f"snapshot time {t} is not a multiple of dt")
            if steps < 0 or steps > n_steps:
                raise ValueError(f"snapshot time {t} outside [t0, t_final]")
            wanted[steps] = t
        norm0 = psi0.norm()
        out = []
        psi = psi0.copy()
        if 0 in wanted:
            out.append(psi.copy())
        for i in range(1, n_steps + 1):
            psi = self.step(psi)
            psi.time = psi0.time + i * dt  # exact stamps, no accumulation drift
            if i in wanted:
                out.append(psi.copy())
        if n_steps not in wanted:
            out.append(psi)
        if check_norm and abs(psi.norm() - norm0) > 1e-9:
            raise NormLossError(
                f"norm drifted by {abs(psi.norm() - norm0):.3e} over {n_steps} steps")
        return out


# -- snapshot dump / reload ----------------------------------------------


def dump_snapshot(psi: WavefunctionGrid, cfg: PhaseSpaceConfig, path) -> None:
    """Columnar dump (x, Re psi, Im psi); reload is bit-exact."""
    with open(path, "w") as fh:
        fh.write("# husimiflow wavefunction v1\n")
        fh.write(f"# config_hash = {cfg.config_hash()}\n")
        fh.write(f"# time = {psi.time!r}\n")
        fh.write(f"# x_min = {psi.x_min!r}\n")
        fh.write(f"# dx = {psi.dx!r}\n")
        fh.write(f"# n = {psi.samples.size}\n")
        fh.write("# columns: x, re_psi, im_psi\n")
        for x, s in zip(psi.x, psi.samples):
            fh.write(f"{x!r},{s.real!r},{s.imag!r}\n")


def load_snapshot(path) -> tuple[WavefunctionGrid, str]:
    """Inverse of dump_snapshot; returns (psi, config_hash)."""
    meta = {}
    re_parts, im_parts = [], []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    meta[key.strip()] = val.strip()
                continue
            cols = line.split(",")
            re_parts.append(float(cols[1]))
            im_parts.append(float(cols[2]))
    samples = np.asarray(re_parts) + 1j * np.asarray(im_parts)
    psi = WavefunctionGrid(samples, float(meta["time"]), float(meta["x_min"]),
                           float(meta["dx"]))
    return psi, meta.get("config_hash", "")
