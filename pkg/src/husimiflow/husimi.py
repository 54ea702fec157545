"""Husimi amplitude and density fields, exact z-derivative stacks, zeros.

The Husimi amplitude of a pure state is <z|psi> = exp(-zbar z / 2)
theta(zbar) with theta analytic, so Q = |<z|psi>|^2 factorizes as
exp(-zbar z) theta(zbar) thetabar(z).  The current expansion consumes the
z-derivative stack

    D_m = d^m/dz^m [ exp(-zbar z) thetabar(z) ]      (zbar held fixed).

At hbar = 0.01 the factors exp(-zbar z) and thetabar overflow/underflow
separately (|z|^2 ~ 10^3), so every stored quantity is exponentially
rescaled: this module computes and stores

    S_m = exp(+zbar z / 2) D_m,

whose magnitudes are bounded by sqrt(m!).  In particular S_0 = <psi|z> =
conj(amplitude), so Q = amplitude * S_0 exactly, and every identity of the
raw stack survives verbatim in rescaled form.  The quadrature kernel for
S_m is an explicit Hermite-Gaussian,

    S_m(z) = (lam^2/pi)^(1/4) e^{-i u v} Int psi*(x) 2^{-m/2}
             H_m(lam x - sqrt(2) u) e^{-(lam x - sqrt(2) u)^2 / 2}
             e^{i p_c x / hbar} dx,      z = u + i v,

which is evaluated either pointwise (arbitrary z) or over a whole window
at once via FFT cross-correlation along x.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy import ndimage
from scipy.fft import next_fast_len

from .errors import ConvergenceError
from .numerics import hermite_values
from .phase_space import PhaseSpaceConfig
from .propagator import WavefunctionGrid

KERNEL_REACH = 14.0  # kernel support cutoff in units of 1/lam (tails < 1e-17)


@dataclass(frozen=True)
class PhaseSpaceWindow:
    """Rectangular (x, p) evaluation window.

    x nodes coincide with wavefunction grid nodes (uniform step, an integer
    multiple of cfg.dx) so windowed fields can be built by FFT correlation;
    p nodes are free and uniform.
    """

    x_nodes: np.ndarray
    p_nodes: np.ndarray

    def __post_init__(self):
        if self.x_nodes.size < 2 or self.p_nodes.size < 2:
            raise ValueError("window needs at least 2 nodes per axis")

    @property
    def nx(self) -> int:
        return self.x_nodes.size

    @property
    def np_(self) -> int:
        return self.p_nodes.size

    @property
    def dx(self) -> float:
        return float(self.x_nodes[1] - self.x_nodes[0])

    @property
    def dp(self) -> float:
        return float(self.p_nodes[1] - self.p_nodes[0])

    def cell_z(self, cfg: PhaseSpaceConfig) -> tuple[float, float]:
        """Cell size (du, dv) in dimensionless z coordinates."""
        return self.dx / (2.0 * cfg.sigma_x), self.dp / (2.0 * cfg.sigma_p)

    def z_mesh(self, cfg: PhaseSpaceConfig) -> np.ndarray:
        u = self.x_nodes / (2.0 * cfg.sigma_x)
        v = self.p_nodes / (2.0 * cfg.sigma_p)
        return u[None, :] + 1j * v[:, None]

    def contains_z(self, z: complex, cfg: PhaseSpaceConfig, pad_cells: float = 0.0) -> bool:
        du, dv = self.cell_z(cfg)
        u0 = self.x_nodes[0] / (2.0 * cfg.sigma_x) - pad_cells * du
        u1 = self.x_nodes[-1] / (2.0 * cfg.sigma_x) + pad_cells * du
        v0 = self.p_nodes[0] / (2.0 * cfg.sigma_p) - pad_cells * dv
        v1 = self.p_nodes[-1] / (2.0 * cfg.sigma_p) + pad_cells * dv
        return u0 <= z.real <= u1 and v0 <= z.imag <= v1


def make_window(cfg: PhaseSpaceConfig, x_lo: float, x_hi: float, nx: int,
                p_lo: float, p_hi: float, np_: int) -> PhaseSpaceWindow:
    """Build a window with x nodes snapped onto the wavefunction grid."""
    step_cells = max(1, int(round((x_hi - x_lo) / (nx - 1) / cfg.dx)))
    step = step_cells * cfg.dx
    j0 = int(round((x_lo - cfg.x_min) / cfg.dx))
    j0 = max(0, j0)
    x_nodes = cfg.x_min + cfg.dx * (j0 + step_cells * np.arange(nx))
    if x_nodes[-1] > cfg.x_max - cfg.dx:
        raise ValueError("window x range does not fit inside the coordinate grid")
    p_nodes = np.linspace(p_lo, p_hi, np_)
    return PhaseSpaceWindow(x_nodes, p_nodes)


class StackEvaluator:
    """Pointwise evaluator of the rescaled derivative stack S_m for one psi."""

    def __init__(self, psi: WavefunctionGrid, cfg: PhaseSpaceConfig):
        self.cfg = cfg
        self.psi = psi
        self.x = psi.x
        self.psi_bar = np.conj(psi.samples)
        self.lam = cfg.lam
        self.prefactor = (self.lam**2 / np.pi) ** 0.25
        self._reach = KERNEL_REACH / self.lam

    def mass_outside(self, z: complex) -> float:
        """Coherent-kernel position mass lying outside the psi grid."""
        xc = 2.0 * self.cfg.sigma_x * z.real
        lo = self.lam * (xc - self.x[0])
        hi = self.lam * (self.x[-1] - xc)
        return 0.5 * (math.erfc(lo) + math.erfc(hi))

    def stack_at(self, z: complex, max_order: int) -> np.ndarray:
        """S_0..S_max_order at one point z (diagonal zbar = conj z)."""
        if self.mass_outside(z) > 1e-10:
            warnings.warn("coherent kernel mass outside the psi grid exceeds 1e-10",
                          stacklevel=2)
        cfg = self.cfg
        u, v = z.real, z.imag
        xc = 2.0 * cfg.sigma_x * u
        pc = 2.0 * cfg.sigma_p * v
        j0 = max(0, int(np.searchsorted(self.x, xc - self._reach)))
        j1 = min(self.x.size, int(np.searchsorted(self.x, xc + self._reach)) + 1)
        xs = self.x[j0:j1]
        t = self.lam * xs - math.sqrt(2.0) * u
        herm = hermite_values(max_order, t)
        weights = self.psi_bar[j0:j1] * np.exp(-0.5 * t * t + 1j * pc * xs / cfg.hbar)
        scale = self.prefactor * self.psi.dx * np.exp(-1j * u * v)
        out = np.empty(max_order + 1, dtype=complex)
        for m in range(max_order + 1):
            out[m] = scale * 2.0 ** (-0.5 * m) * np.dot(herm[m], weights)
        return out

    def amplitude_at(self, z: complex) -> complex:
        """<z|psi> = conj(S_0)."""
        return complex(np.conj(self.stack_at(z, 0)[0]))


@dataclass
class HusimiField:
    """Husimi data on a window: amplitude, density and rescaled stack.

    deriv_stack[m] holds S_m = exp(zbar z / 2) d^m/dz^m [exp(-zbar z)
    thetabar(z)]; deriv_stack[0] == conj(amplitude) and
    q == (amplitude * deriv_stack[0]).real exactly.
    """

    window: PhaseSpaceWindow
    amplitude: np.ndarray
    q: np.ndarray
    deriv_stack: np.ndarray
    time: float
    cfg: PhaseSpaceConfig
    source: WavefunctionGrid
    _evaluator: StackEvaluator = dataclass_field(default=None, repr=False)

    @property
    def max_order(self) -> int:
        return self.deriv_stack.shape[0] - 1

    @property
    def evaluator(self) -> StackEvaluator:
        if self._evaluator is None:
            self._evaluator = StackEvaluator(self.source, self.cfg)
        return self._evaluator

    def normalization(self) -> float:
        """Window quadrature of Q dx dp / (2 pi hbar); 1 for a captured state."""
        return float(np.sum(self.q) * self.window.dx * self.window.dp
                     / (2.0 * np.pi * self.cfg.hbar))


def husimi_amplitude(psi: WavefunctionGrid, z: complex, cfg: PhaseSpaceConfig) -> complex:
    """<z|psi> by quadrature of the coherent kernel against psi."""
    return StackEvaluator(psi, cfg).amplitude_at(z)


def amplitude_z_derivatives(psi: WavefunctionGrid, z: complex, max_order: int,
                            cfg: PhaseSpaceConfig) -> np.ndarray:
    """Rescaled stack S_0..S_max_order at z (see HusimiField docstring)."""
    return StackEvaluator(psi, cfg).stack_at(z, max_order)


def husimi_field(psi: WavefunctionGrid, window: PhaseSpaceWindow,
                 cfg: PhaseSpaceConfig, max_order: int | None = None) -> HusimiField:
    """Amplitude, Q and the derivative stack on a window via FFT correlation."""
    if max_order is None:
        max_order = cfg.trunc_order
    lam = cfg.lam
    x = psi.x
    n = x.size
    # x nodes must sit on the psi grid for the correlation to be exact
    j_idx = np.rint((window.x_nodes - psi.x_min) / psi.dx).astype(int)
    if not np.allclose(psi.x_min + j_idx * psi.dx, window.x_nodes,
                       rtol=0.0, atol=1e-9 * psi.dx):
        raise ValueError("window x nodes do not lie on the psi grid")

    evaluator = StackEvaluator(psi, cfg)
    for xc in (window.x_nodes[0], window.x_nodes[-1]):
        z_edge = complex(xc / (2.0 * cfg.sigma_x), 0.0)
        if evaluator.mass_outside(z_edge) > 1e-10:
            warnings.warn("window reaches closer than the kernel support to the"
                          " psi grid edge", stacklevel=2)

    reach_cells = int(math.ceil(KERNEL_REACH / lam / psi.dx))
    length = next_fast_len(n + 2 * reach_cells + 1)
    offsets = (np.arange(length) + length // 2) % length - length // 2
    t_kernel = lam * offsets * psi.dx
    herm = hermite_values(max_order, t_kernel)
    gauss = np.exp(-0.5 * t_kernel * t_kernel)

    u = window.x_nodes / (2.0 * cfg.sigma_x)
    v = window.p_nodes / (2.0 * cfg.sigma_p)
    phases = np.exp(1j * window.p_nodes[:, None] * x[None, :] / cfg.hbar)
    g_f = np.fft.fft(np.conj(psi.samples)[None, :] * phases, n=length, axis=1)

    scale = (lam**2 / np.pi) ** 0.25 * psi.dx
    cross_phase = np.exp(-1j * u[None, :] * v[:, None])
    stack = np.empty((max_order + 1, window.np_, window.nx), dtype=complex)
    for m in range(max_order + 1):
        kernel_f = np.fft.fft(2.0 ** (-0.5 * m) * herm[m] * gauss)
        corr = np.fft.ifft(g_f * np.conj(kernel_f), axis=1)[:, j_idx]
        stack[m] = scale * cross_phase * corr

    amplitude = np.conj(stack[0])
    q = (amplitude * stack[0]).real
    return HusimiField(window, amplitude, q, stack, psi.time, cfg, psi,
                       _evaluator=evaluator)


# -- zeros of the analytic part ------------------------------------------


@dataclass
class HusimiZero:
    """One refined zero of thetabar inside a window."""

    z: complex
    x: float
    p: float
    residual: float       # |S_0| / max window |S_0| after refinement
    converged: bool
    stable: bool = False
    iterations: int = 0


@dataclass
class ZeroSearchResult:
    zeros: list
    nonconverged: list

    def positions(self) -> np.ndarray:
        return np.array([w.z for w in self.zeros], dtype=complex)

    def stable_zeros(self) -> list:
        return [w for w in self.zeros if w.stable]


def _newton_refine(evaluator: StackEvaluator, z0: complex, tol_abs: float,
                   window: PhaseSpaceWindow, cfg: PhaseSpaceConfig,
                   max_iter: int = 50):
    """Newton iteration on the analytic factor: dz = -S_0 / (S_1 + zbar S_0)."""
    z = z0
    for it in range(1, max_iter + 1):
        s0, s1 = evaluator.stack_at(z, 1)
        if abs(s0) <= tol_abs:
            return z, abs(s0), it, True
        denom = s1 + np.conj(z) * s0
        if denom == 0.0 or not window.contains_z(z, cfg, pad_cells=3.0):
            return z, abs(s0), it, False
        z = z - s0 / denom
    s0 = evaluator.stack_at(z, 0)[0]
    return z, abs(s0), max_iter, abs(s0) <= tol_abs


def _coarse_evaluator(psi: WavefunctionGrid, cfg: PhaseSpaceConfig) -> StackEvaluator:
    """Evaluator on the stride-2 subsampled psi (quadrature step 2 dx)."""
    coarse = WavefunctionGrid(psi.samples[::2], psi.time, psi.x_min, 2.0 * psi.dx)
    return StackEvaluator(coarse, cfg)


def find_zeros(fld: HusimiField, ring_floor: float = 1e-13,
               newton_tol: float = 1e-10, stability_check: bool = True) -> ZeroSearchResult:
    """Locate and refine zeros of the analytic factor thetabar in the window.

    Candidate cells are local minima of Q embedded in non-negligible
    density (largest Q in the surrounding 5x5 block above ring_floor *
    max Q); each is refined by Newton iteration on thetabar using the
    exact first derivative from the stack.  Refinement accepts |S_0| below
    newton_tol * max window |S_0| (the rescaled form of a relative
    threshold on |thetabar|).  Zeros closer than half a grid cell are
    merged, keeping the deeper residual.  With stability_check, each zero
    is re-refined against the stride-2 subsampled psi and from a jittered
    start; zeros that move by more than half a cell are flagged unstable
    (grid-artifact "sea" zeros fail this).
    """
    q = fld.q
    qmax = q.max()
    s0max = math.sqrt(qmax)
    tol_abs = newton_tol * s0max
    cfg = fld.cfg
    window = fld.window
    du, dv = window.cell_z(cfg)
    half_cell = 0.5 * math.hypot(du, dv)

    is_min = (q <= ndimage.minimum_filter(q, size=3)) \
        & (ndimage.maximum_filter(q, size=5) > ring_floor * qmax)
    is_min[:1, :] = is_min[-1:, :] = False
    is_min[:, :1] = is_min[:, -1:] = False
    rows, cols = np.nonzero(is_min)

    zmesh = window.z_mesh(cfg)
    evaluator = fld.evaluator
    coarse = _coarse_evaluator(fld.source, cfg) if stability_check else None

    zeros: list[HusimiZero] = []
    nonconverged: list[HusimiZero] = []
    for r, c in zip(rows, cols):
        z_refined, resid, iters, ok = _newton_refine(
            evaluator, complex(zmesh[r, c]), tol_abs, window, cfg)
        x = 2.0 * cfg.sigma_x * z_refined.real
        p = 2.0 * cfg.sigma_p * z_refined.imag
        record = HusimiZero(z_refined, x, p, resid / s0max, ok, iterations=iters)
        if not ok:
            nonconverged.append(record)
            continue
        if not window.contains_z(z_refined, cfg, pad_cells=1.0):
            nonconverged.append(record)
            continue
        dup = next((w for w in zeros if abs(w.z - z_refined) < half_cell), None)
        if dup is not None:
            if record.residual < dup.residual:
                zeros.remove(dup)
            else:
                continue
        zeros.append(record)

    if stability_check:
        for w in zeros:
            zc, _, _, ok_c = _newton_refine(coarse, w.z, newton_tol * s0max * 10.0,
                                            window, cfg)
            jitter = w.z + 0.6 * complex(du, dv)
            zj, _, _, ok_j = _newton_refine(evaluator, jitter, tol_abs, window, cfg)
            w.stable = (ok_c and abs(zc - w.z) < half_cell
                        and ok_j and abs(zj - w.z) < half_cell)

    zeros.sort(key=lambda w: (w.x, w.p))
    nonconverged.sort(key=lambda w: (w.x, w.p))
    return ZeroSearchResult(zeros, nonconverged)


# -- exports ---------------------------------------------------------------


def field_to_csv(fld: HusimiField, path) -> None:
    """Self-describing columnar export (x, p, Q, Re/Im amplitude)."""
    with open(path, "w") as fh:
        fh.write("# husimiflow husimi-field v1\n")
        fh.write(f"# config_hash = {fld.cfg.config_hash()}\n")
        fh.write(f"# time = {fld.time!r}\n")
        fh.write(f"# nx = {fld.window.nx}, np = {fld.window.np_}\n")
        fh.write("# columns: x, p, q, re_amplitude, im_amplitude\n")
        for k, p in enumerate(fld.window.p_nodes):
            for i, x in enumerate(fld.window.x_nodes):
                a = fld.amplitude[k, i]
                fh.write(f"{x!r},{p!r},{fld.q[k, i]!r},{a.real!r},{a.imag!r}\n")


def zeros_to_csv(result: ZeroSearchResult, cfg: PhaseSpaceConfig, path,
                 time: float | None = None) -> None:
    with open(path, "w") as fh:
        fh.write("# husimiflow husimi-zeros v1\n")
        fh.write(f"# config_hash = {cfg.config_hash()}\n")
        if time is not None:
            fh.write(f"# time = {time!r}\n")
        fh.write("# columns: x, p, residual, stable, converged\n")
        for w in result.zeros + result.nonconverged:
            fh.write(f"{w.x!r},{w.p!r},{w.residual!r},{int(w.stable)},{int(w.converged)}\n")
