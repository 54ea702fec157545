"""Exception hierarchy.

ConfigError signals bad user input (CLI exit code 2); PhysicsError and its
subclasses signal a simulation that violated its own quality contracts
(CLI exit code 3).
"""


class ConfigError(ValueError):
    """Invalid configuration value, file, or preset name."""


class PhysicsError(RuntimeError):
    """A numerical run violated a physics contract (norm, energy, boundary)."""


class NormLossError(PhysicsError):
    """Wavefunction norm drifted beyond tolerance."""


class BoundaryContaminationError(PhysicsError):
    """Amplitude at the coordinate-grid edge exceeded the configured floor."""


class EnergyDriftError(PhysicsError):
    """Classical trajectory energy drifted beyond tolerance."""


class ConvergenceError(PhysicsError):
    """An iterative or sampled computation failed its convergence check."""
