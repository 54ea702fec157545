"""Coherent-state averaged Hamiltonian H(zbar, z) and its exact mixed partials.

For a kinetic term p^2/2m the average over |z> adds the zero-point energy
hbar omega / 4.  For the Gaussian barrier V0 exp(-k x^2) the average is a
Gaussian smoothing over the position density of |z> (mean x_c, variance
sigma_x^2):

    <z| V0 exp(-k x^2) |z> = alpha V0 exp(-alpha^2 k x_c^2),
    alpha = (1 + 2 k sigma_x^2)^(-1/2).

Mixed partials d^{a+b} H / dzbar^a dz^b are evaluated analytically: the
potential part depends on z only through x_c = sigma_x (z + zbar), so each
derivative pulls down a factor sigma_x and a Gaussian x-derivative
(Hermite recurrence); the kinetic part is quadratic and contributes only
to total order <= 2.  All values on the diagonal zbar = conj(z) satisfy
mixed_partial(z, a, b) = conj(mixed_partial(z, b, a)) because H is real.
"""

from __future__ import annotations

import math
import threading

import numpy as np

from .numerics import hermite_values
from .phase_space import PhaseSpaceConfig, xp_from_z

POTENTIAL_KINDS = ("gaussian_barrier", "harmonic", "free")


class AveragedHamiltonian:
    """H(zbar, z) for one of the supported potentials.

    Pure and reentrant after construction; the per-order derivative cache
    is guarded by a lock so concurrent readers are safe.
    """

    def __init__(self, cfg: PhaseSpaceConfig, potential: str = "gaussian_barrier"):
        if potential not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential {potential!r}")
        self.cfg = cfg
        self.potential = potential
        sx2 = cfg.sigma_x**2
        self.alpha = (1.0 + 2.0 * cfg.k * sx2) ** -0.5 if potential == "gaussian_barrier" else 1.0
        self._cache: dict = {}
        self._lock = threading.Lock()

    @property
    def max_order(self) -> int:
        """Highest supported total derivative order, 2 (trunc_order + 1)."""
        return 2 * (self.cfg.trunc_order + 1)

    # -- smoothed potential profile and its x-derivatives -----------------

    def _potential_profile(self, n: int, x) -> np.ndarray:
        """d^n/dx^n of the smoothed potential, evaluated at x."""
        cfg = self.cfg
        x = np.asarray(x, dtype=float)
        if self.potential == "free":
            return np.zeros_like(x)
        if self.potential == "harmonic":
            if n == 0:
                return 0.5 * cfg.mass * cfg.omega**2 * x * x + 0.25 * cfg.hbar * cfg.omega
            if n == 1:
                return cfg.mass * cfg.omega**2 * x
            if n == 2:
                return np.full_like(x, cfg.mass * cfg.omega**2)
            return np.zeros_like(x)
        beta = self.alpha**2 * cfg.k
        u = math.sqrt(beta) * x
        hn = hermite_values(n, u)[n]
        return self.alpha * cfg.v0 * (-1.0) ** n * beta ** (n / 2.0) * hn * np.exp(-u * u)

    # -- scalar/vector API -------------------------------------------------

    def value(self, z):
        """Real energy H(zbar, z) on the diagonal zbar = conj(z)."""
        cfg = self.cfg
        x, p = xp_from_z(z, cfg)
        kin = p * p / (2.0 * cfg.mass) + 0.25 * cfg.hbar * cfg.omega
        return kin + self._potential_profile(0, x)

    def mixed_partial(self, z, a: int, b: int):
        """d^{a+b} H / dzbar^a dz^b at z (diagonal), exact.

        Supports scalar or array z.  Raises ValueError above max_order.
        """
        if a < 0 or b < 0:
            raise ValueError("derivative orders must be non-negative")
        n = a + b
        if n > self.max_order:
            raise ValueError(
                f"order {n} exceeds supported table (max {self.max_order})")
        cfg = self.cfg
        z = np.asarray(z, dtype=complex)
        x, p = xp_from_z(z, cfg)
        if n == 0:
            return self.value(z)
        out = cfg.sigma_x**n * self._potential_profile(n, x).astype(complex)
        # kinetic term -sigma_p^2 (z - zbar)^2 / 2m contributes to n <= 2
        sp2_m = cfg.sigma_p**2 / cfg.mass
        if n == 1:
            sign = 1.0 if a == 1 else -1.0  # d/dzbar -> +, d/dz -> -
            out = out + sign * 1j * cfg.sigma_p * p / cfg.mass
        elif n == 2:
            out = out + (sp2_m if (a, b) == (1, 1) else -sp2_m)
        return out if out.shape else complex(out)

    # -- cached per-window tables -----------------------------------------

    def partial_profile(self, a: int, b: int, x_nodes: np.ndarray) -> np.ndarray:
        """Potential part of mixed_partial on a row of x nodes, cached by (a, b).

        The kinetic contribution (orders <= 2) is NOT included; callers add
        it via kinetic_partial, which is where the p dependence lives.
        """
        n = a + b
        key = (n, x_nodes.shape, float(x_nodes[0]), float(x_nodes[-1]))
        with self._lock:
            hit = self._cache.get(key)
        if hit is None:
            hit = self.cfg.sigma_x**n * self._potential_profile(n, x_nodes)
            with self._lock:
                self._cache[key] = hit
        return hit

    def kinetic_partial(self, a: int, b: int, p):
        """Kinetic contribution to mixed_partial; zero for a + b > 2."""
        cfg = self.cfg
        n = a + b
        p = np.asarray(p, dtype=float)
        sp2_m = cfg.sigma_p**2 / cfg.mass
        if n == 0:
            return p * p / (2.0 * cfg.mass) + 0.25 * cfg.hbar * cfg.omega
        if n == 1:
            sign = 1.0 if a == 1 else -1.0
            return sign * 1j * cfg.sigma_p * p / cfg.mass
        if n == 2:
            return np.full(p.shape, sp2_m if (a, b) == (1, 1) else -sp2_m)
        return np.zeros(p.shape)
