"""Coherent-state algebra, coordinate maps, and the shared configuration.

A point of the 1D phase space is labelled by the dimensionless complex
number

    z = x / (2 sigma_x) + i p / (2 sigma_p),

where sigma_x = sqrt(hbar / 2 m omega) and sigma_p = sqrt(hbar m omega / 2)
are the position and momentum widths of the reference Gaussian ground
state (sigma_x * sigma_p = hbar / 2).  With this scaling the coherent
states |z> are the eigenstates of the annihilation operator with unit
commutator, which gives the three identities the rest of the package
relies on:

    |<z|z0>|^2 = exp(-|z - z0|^2)
    <z|psi>    = exp(-zbar z / 2) theta(zbar),  theta analytic
    integral Q dx dp / (2 pi hbar) = 1

Phase convention: <x|z> carries the symmetric phase exp(i p x / hbar
- i x_c p_c / 2 hbar), which makes theta(zbar) identically 1 (real,
positive) for the ground state at z = 0.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_CONFIG_FIELDS = (
    "hbar", "mass", "omega", "v0", "k",
    "x_min", "x_max", "dx", "dt", "trunc_order",
)


@dataclass(frozen=True)
class PhaseSpaceConfig:
    """Physical constants and discretization shared by every module.

    sigma_x and sigma_p are always recomputed from (hbar, mass, omega);
    they cannot be set independently.
    """

    hbar: float = 0.01
    mass: float = 1.0
    omega: float = 1.0
    v0: float = 2.0
    k: float = 3.0
    x_min: float = -10.0
    x_max: float = 10.0
    dx: float = 0.0025
    dt: float = 0.01
    trunc_order: int = 10

    def __post_init__(self):
        if self.hbar <= 0 or self.mass <= 0 or self.omega <= 0:
            raise ConfigError("hbar, mass and omega must be positive")
        if self.v0 < 0 or self.k < 0:
            raise ConfigError("v0 and k must be non-negative")
        if self.dx <= 0 or self.dt <= 0:
            raise ConfigError("dx and dt must be positive")
        if self.x_min >= self.x_max:
            raise ConfigError("x_min must be below x_max")
        if self.trunc_order < 0 or int(self.trunc_order) != self.trunc_order:
            raise ConfigError("trunc_order must be a non-negative integer")

    # -- derived widths -------------------------------------------------

    @property
    def sigma_x(self) -> float:
        return math.sqrt(self.hbar / (2.0 * self.mass * self.omega))

    @property
    def sigma_p(self) -> float:
        return math.sqrt(self.hbar * self.mass * self.omega / 2.0)

    @property
    def lam(self) -> float:
        """Inverse length sqrt(m omega / hbar) = 1 / (sqrt(2) sigma_x)."""
        return math.sqrt(self.mass * self.omega / self.hbar)

    # -- coordinate grid -------------------------------------------------

    @property
    def n_points(self) -> int:
        return int(round((self.x_max - self.x_min) / self.dx))

    def x_grid(self) -> np.ndarray:
        """Uniform grid on [x_min, x_max), periodic under the FFT."""
        return self.x_min + self.dx * np.arange(self.n_points)

    # -- serialization ---------------------------------------------------

    def replace(self, **changes) -> "PhaseSpaceConfig":
        return dataclasses.replace(self, **changes)

    def canonical(self) -> str:
        parts = []
        for name in _CONFIG_FIELDS:
            value = getattr(self, name)
            if name == "trunc_order":
                parts.append(f"{name}={int(value)}")
            else:
                parts.append(f"{name}={value!r}")
        return "\n".join(parts)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]

    def to_file(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# husimiflow configuration (key = value)\n")
            for name in _CONFIG_FIELDS:
                fh.write(f"{name} = {getattr(self, name)!r}\n")

    @classmethod
    def from_file(cls, path) -> "PhaseSpaceConfig":
        values = {}
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, _, text = line.partition("=")
                key = key.strip()
                if key in ("sigma_x", "sigma_p"):
                    raise ConfigError(
                        f"{path}:{lineno}: {key} is derived from hbar, mass and"
                        " omega and cannot be set")
                if key not in _CONFIG_FIELDS:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                try:
                    values[key] = float(text.strip())
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}: bad value {text!r}") from exc
        if "trunc_order" in values:
            values["trunc_order"] = int(values["trunc_order"])
        return cls(**values)


def paper_preset() -> PhaseSpaceConfig:
    """Gaussian-barrier scattering parameters at full grid fidelity."""
    return PhaseSpaceConfig()


def desk_preset() -> PhaseSpaceConfig:
    """Coarser grid for quick runs; cross-validate against paper_preset."""
    return PhaseSpaceConfig(dx=0.01, trunc_order=6)


PRESETS = {"paper": paper_preset, "desk": desk_preset}


def get_preset(name: str) -> PhaseSpaceConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")


# -- coordinate maps ----------------------------------------------------


def z_from_xp(x, p, cfg: PhaseSpaceConfig):
    """Dimensionless phase-space label z = x/(2 sigma_x) + i p/(2 sigma_p)."""
    return np.asarray(x) / (2.0 * cfg.sigma_x) + 1j * np.asarray(p) / (2.0 * cfg.sigma_p)


def xp_from_z(z, cfg: PhaseSpaceConfig):
    """Inverse of z_from_xp: (x, p) = (2 sigma_x Re z, 2 sigma_p Im z)."""
    z = np.asarray(z)
    return 2.0 * cfg.sigma_x * z.real, 2.0 * cfg.sigma_p * z.imag


def coherent_kernel(z, x, cfg: PhaseSpaceConfig):
    """Coherent-state wavefunction <x|z>.

    Normalized Gaussian of position width sigma_x centered at
    (x_c, p_c) = xp_from_z(z), with the symmetric phase convention
    exp(i p_c x / hbar - i x_c p_c / 2 hbar).
    """
    lam = cfg.lam
    x = np.asarray(x, dtype=float)
    xc, pc = xp_from_z(z, cfg)
    amp = (lam * lam / np.pi) ** 0.25
    gauss = np.exp(-0.5 * (lam * (x - xc)) ** 2)
    phase = np.exp(1j * (pc * x / cfg.hbar - 0.5 * xc * pc / cfg.hbar))
    return amp * gauss * phase
