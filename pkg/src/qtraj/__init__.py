"""Quantum trajectory simulation and output spectra for diffusive
continuous measurement.

The package integrates the linear stochastic equations of a continuously
monitored open system under the reference Wiener measure, recovers physical
statistics by density weighting, computes output spectra by Monte Carlo,
finite-horizon quadrature and closed forms for the driven two-level atom,
and checks the Heisenberg-type bounds that constrain squeezing.
"""

from .lindblad import (BlochState, Propagator, bloch_equilibrium, bloch_matrix,
                       cf4_step_matrices, liouvillian_apply, liouvillian_matrix,
                       pauli_components, propagate, propagator_matrix,
                       rotating_frame_propagate, steady_state)
from .model import (Channel, ModelSpec, ParameterError, TwoLevelParams,
                    WaveSpec, build_two_level_model, drive_hamiltonian,
                    effective_drift)
from .numerics import (DimensionError, SingularMatrixError, mat_exp,
                       solve_linear)
from .spectrum import (BoundsReport, SpectrumResult, check_uncertainty_bounds,
                       fluorescence_spectrum, heterodyne_spectrum,
                       homodyne_spectrum, power_spectrum, spectrum_analytic,
                       spectrum_mc, sweep_two_level_params)
from .trajectory import (DegenerateWeightError, Ensemble, TimeGrid, Trajectory,
                         WienerPath, characteristic_functional,
                         innovation_process, integrate_linear_sme,
                         integrate_linear_sse, mean_quadrature,
                         output_autocorrelation, posterior_states,
                         run_sme_ensemble, run_sse_ensemble, sample_wiener)

__version__ = "0.1.0"
