"""Classical and quantum phase-space probability currents.

The complex current J encodes the phase-space vector field via
(J_x, J_p) = (2 sigma_x Re J, 2 sigma_p Im J), so the continuity equation

    dQ/dt + dJ/dz + dJbar/dzbar = 0

reads, in (x, p) coordinates,

    dQ/dt + 2 sigma_x d(Re J)/dx + 2 sigma_p d(Im J)/dp = 0.

The classical current is J_cl = Q (dH/dzbar) / (i hbar).  The quantum
current truncated at order N in hbar sums, over pairs l >= 1, k >= 0 with
l + k <= N + 1,

    J = (1/i hbar) sum  [theta D_{l-1}] (-1)^k / (k+l)!
                        d^{2k+l} H / dzbar^{k+l} dz^k,

where theta D_{l-1} = d^{l-1} Q / dz^{l-1} = amplitude * S_{l-1} in the
rescaled stack stored on HusimiField.  The n-th order component collects
the pairs with l + k = n + 1; N = 0 reproduces the classical current
bitwise, and for a quadratic Hamiltonian every extra term vanishes
identically so J equals J_cl at any N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hamiltonian import AveragedHamiltonian
from .husimi import HusimiField, PhaseSpaceWindow, StackEvaluator
from .numerics import derivative_interior_8
from .phase_space import PhaseSpaceConfig


@dataclass
class CurrentField:
    """Complex current J on a window, with optional per-order components.

    flow_factor holds the secondary factor of the factorization
    J = amplitude * flow_factor; its zeros are the non-trivial stagnation
    points (the amplitude's zeros are the trivial ones).
    """

    window: PhaseSpaceWindow
    j: np.ndarray
    trunc_order: int
    time: float
    cfg: PhaseSpaceConfig
    components: np.ndarray | None = None   # (N+1, np, nx) when retained
    flow_factor: np.ndarray | None = None
    source: HusimiField | None = None
    hamiltonian: AveragedHamiltonian | None = None

    def sampler(self):
        """Pointwise J(z) closure matching this field's truncation."""
        if self.source is None or self.hamiltonian is None:
            raise ValueError("field was built without source references")
        return current_sampler(self.source.source, self.hamiltonian,
                               self.trunc_order, self.cfg)

    def flow_sampler(self):
        """Pointwise flow_factor(z) closure matching this field's truncation."""
        if self.source is None or self.hamiltonian is None:
            raise ValueError("field was built without source references")
        return flow_factor_sampler(self.source.source, self.hamiltonian,
                                   self.trunc_order, self.cfg)


def _expansion_pairs(n_max: int):
    """(l, k) pairs of the truncated expansion, grouped by order n = l+k-1."""
    return [[(n + 1 - k, k) for k in range(n + 1)] for n in range(n_max + 1)]


def classical_current(fld: HusimiField, ham: AveragedHamiltonian) -> CurrentField:
    """J_cl = Q (dH/dzbar) / (i hbar) on the field's window."""
    cfg = fld.cfg
    window = fld.window
    m10 = (ham.partial_profile(1, 0, window.x_nodes)[None, :]
           + ham.kinetic_partial(1, 0, window.p_nodes)[:, None])
    # grouping matches quantum_current's n = 0 term so N = 0 is bitwise equal
    inv_ihbar = 1.0 / (1j * cfg.hbar)
    j = fld.q.astype(complex) * (inv_ihbar * m10)
    flow = fld.deriv_stack[0] * (inv_ihbar * m10)
    return CurrentField(window, j, 0, fld.time, cfg, components=None,
                        flow_factor=flow, source=fld, hamiltonian=ham)


def quantum_current(fld: HusimiField, ham: AveragedHamiltonian, n_order: int,
                    keep_components: bool = False) -> CurrentField:
    """Truncated quantum current at hbar order n_order on the field's window."""
    if fld.max_order < n_order:
        raise ValueError(
            f"field stack depth {fld.max_order} is below trunc order {n_order}")
    if ham.max_order < 2 * n_order + 1:
        raise ValueError("Hamiltonian derivative table too shallow for this order")
    cfg = fld.cfg
    window = fld.window
    amp = fld.amplitude
    shape = (window.np_, window.nx)
    components = np.zeros((n_order + 1,) + shape, dtype=complex)
    flow = np.zeros(shape, dtype=complex)
    inv_ihbar = 1.0 / (1j * cfg.hbar)
    for n, pairs in enumerate(_expansion_pairs(n_order)):
        acc = np.zeros(shape, dtype=complex)
        for l, k in pairs:
            coef = (-1.0) ** k / math.factorial(k + l) * inv_ihbar
            m_ab = (ham.partial_profile(k + l, k, window.x_nodes)[None, :]
                    + ham.kinetic_partial(k + l, k, window.p_nodes)[:, None])
            # theta D_{l-1} = d^{l-1}Q/dz^{l-1}; for l = 1 that is Q itself,
            # real by construction (keeps N = 0 bitwise equal to J_cl)
            factor = fld.q.astype(complex) if l == 1 else amp * fld.deriv_stack[l - 1]
            acc = acc + factor * (coef * m_ab)
            flow = flow + fld.deriv_stack[l - 1] * (coef * m_ab)
        components[n] = acc
    j = components.sum(axis=0)
    return CurrentField(window, j, n_order, fld.time, cfg,
                        components=components if keep_components else None,
                        flow_factor=flow, source=fld, hamiltonian=ham)


def current_sampler(psi, ham: AveragedHamiltonian, n_order: int,
                    cfg: PhaseSpaceConfig):
    """Pointwise J(z) for arbitrary z, matching quantum_current's truncation."""
    evaluator = StackEvaluator(psi, cfg)
    pairs_by_order = _expansion_pairs(n_order)
    inv_ihbar = 1.0 / (1j * cfg.hbar)

    def sample(z: complex) -> complex:
        stack = evaluator.stack_at(z, n_order)
        amp = np.conj(stack[0])
        q = (amp * stack[0]).real
        total = 0.0 + 0.0j
        for pairs in pairs_by_order:
            for l, k in pairs:
                coef = (-1.0) ** k / math.factorial(k + l) * inv_ihbar
                m_ab = ham.mixed_partial(z, k + l, k)
                factor = q if l == 1 else amp * stack[l - 1]
                total += factor * (coef * m_ab)
        return total

    return sample


def flow_factor_sampler(psi, ham: AveragedHamiltonian, n_order: int,
                        cfg: PhaseSpaceConfig):
    """Pointwise secondary factor of J = amplitude * flow_factor."""
    evaluator = StackEvaluator(psi, cfg)
    pairs_by_order = _expansion_pairs(n_order)
    inv_ihbar = 1.0 / (1j * cfg.hbar)

    def sample(z: complex) -> complex:
        stack = evaluator.stack_at(z, n_order)
        total = 0.0 + 0.0j
        for pairs in pairs_by_order:
            for l, k in pairs:
                coef = (-1.0) ** k / math.factorial(k + l) * inv_ihbar
                m_ab = ham.mixed_partial(z, k + l, k)
                total += stack[l - 1] * (coef * m_ab)
        return total

    return sample


# -- continuity diagnostic -------------------------------------------------


@dataclass
class ContinuityResidual:
    """|dQ/dt + div J| over the window interior (stencil borders trimmed)."""

    window: PhaseSpaceWindow
    values: np.ndarray          # interior residual magnitudes
    norm: float                 # L2 norm of the residual over the interior
    dqdt_norm: float            # L2 norm of the dQ/dt term (same interior)
    div_norm: float             # L2 norm of the divergence term


def continuity_residual(fld_prev: HusimiField, fld_now: HusimiField,
                        fld_next: HusimiField, cur: CurrentField) -> ContinuityResidual:
    """Central-difference dQ/dt plus 8th-order divergence of the current."""
    w = cur.window
    for f in (fld_prev, fld_now, fld_next):
        if f.window.nx != w.nx or f.window.np_ != w.np_ \
                or not np.allclose(f.window.x_nodes, w.x_nodes) \
                or not np.allclose(f.window.p_nodes, w.p_nodes):
            raise ValueError("continuity snapshots must share one window")
    dt_plus = fld_next.time - fld_now.time
    dt_minus = fld_now.time - fld_prev.time
    if not math.isclose(dt_plus, dt_minus, rel_tol=1e-9):
        raise ValueError("snapshots must be equally spaced in time")
    cfg = cur.cfg
    dqdt = (fld_next.q - fld_prev.q) / (dt_plus + dt_minus)
    div = (2.0 * cfg.sigma_x * derivative_interior_8(cur.j.real, w.dx, axis=1)
           + 2.0 * cfg.sigma_p * derivative_interior_8(cur.j.imag, w.dp, axis=0))
    interior = (slice(4, w.np_ - 4), slice(4, w.nx - 4))
    r = dqdt[interior] + div[interior]
    return ContinuityResidual(
        w, np.abs(r),
        norm=float(np.linalg.norm(r)),
        dqdt_norm=float(np.linalg.norm(dqdt[interior])),
        div_norm=float(np.linalg.norm(div[interior])),
    )


# -- export ----------------------------------------------------------------


def current_to_csv(cur: CurrentField, path) -> None:
    """Columnar export (x, p, Re J, Im J, |J|, per-order components if kept)."""
    n_comp = 0 if cur.components is None else cur.components.shape[0]
    with open(path, "w") as fh:
        fh.write("# husimiflow current-field v1\n")
        fh.write(f"# config_hash = {cur.cfg.config_hash()}\n")
        fh.write(f"# time = {cur.time!r}\n")
        fh.write(f"# trunc_order = {cur.trunc_order}\n")
        cols = "x, p, re_j, im_j, abs_j"
        if n_comp:
            cols += ", " + ", ".join(
                f"re_j{n}, im_j{n}" for n in range(n_comp))
        fh.write(f"# columns: {cols}\n")
        for ki, p in enumerate(cur.window.p_nodes):
            for i, x in enumerate(cur.window.x_nodes):
                val = cur.j[ki, i]
                row = [repr(x), repr(p), repr(val.real), repr(val.imag),
                       repr(abs(val))]
                for n in range(n_comp):
                    c = cur.components[n, ki, i]
                    row += [repr(c.real), repr(c.imag)]
                fh.write(",".join(row) + "\n")
