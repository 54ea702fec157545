"""husimiflow: 1D quantum phase-space currents and their topology."""

from .phase_space import (PhaseSpaceConfig, PRESETS, coherent_kernel,
                          desk_preset, get_preset, paper_preset, xp_from_z,
                          z_from_xp)
from .propagator import (SplitOperator, WavefunctionGrid, dump_snapshot,
                         initial_coherent_state, load_snapshot)
from .hamiltonian import AveragedHamiltonian
from .husimi import (HusimiField, PhaseSpaceWindow, amplitude_z_derivatives,
                     find_zeros, husimi_amplitude, husimi_field, make_window)
from .current import (CurrentField, classical_current, continuity_residual,
                      current_sampler, quantum_current)
from .topology import (Dipole, StagnationPoint, classify, find_stagnation_points,
                       gradient_matrix, pair_dipoles, winding_index)
from .classical import (Trajectory, classical_hamiltonian, classical_pullback_field,
                        classical_transmission, hamilton_rhs, integrate)
from .experiment import (run_quantum_transmission, run_snapshot_pipeline,
                         run_transmission_sweep, validate_presets)

__version__ = "0.1.0"
