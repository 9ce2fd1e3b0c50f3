"""dynkit: spectral-grid dynamics for quantum and classical systems.

Subpackages cover uniform grids with FFT bridges to the continuous Fourier
transform, dense matrix functions, stationary spectra and band structures,
split-operator wave-function propagation (real and imaginary time), symplectic
classical ensembles, open-system density-matrix and Monte-Carlo dynamics, and
the Wigner phase-space representation.  The ``dynkit`` command line runs
declarative JSON configs through these modules.
"""

__version__ = "0.1.0"

from .grids import (
    SpectralSignal,
    UniformGrid,
    cft_forward,
    cft_forward_custom,
    cft_inverse,
    frft,
    make_grid,
)
from .matfunc import ExpmReport, expm_pade, expm_taylor, func_of_hermitian
from .stationary import (
    HamiltonianSpec,
    SpectrumResult,
    band_structure,
    build_fd_hamiltonian,
    build_spectral_hamiltonian,
    eigensolve,
    find_spectral_peaks,
    spectrum_via_propagation,
)
from .tdse import (
    EvolutionTrace,
    PauliHamiltonianSpec,
    SpinorWaveFunction,
    WaveFunction,
    apply_absorbing_boundary,
    compute_uncertainty,
    gaussian_packet,
    imaginary_time_excited,
    imaginary_time_ground,
    pauli_split_op_step,
    propagate,
    spectral_gap_estimate,
    spectral_gap_estimate_discrete,
    split_op_step,
    split_op_step_o4,
)
from .classical import (
    ClassicalEnsemble,
    ClassicalSpec,
    ehrenfest_series,
    extend_time_dependent,
    multi_dim_verlet_step,
    propagate_ensemble,
    verlet_step,
)
from .open_systems import (
    DensityMatrix,
    JumpOperatorSpec,
    RateMatrix,
    dissipator_split,
    fermi_dirac_rates,
    gibbs_density,
    gibbs_rates,
    lindblad_propagate,
    lindblad_superoperator,
    lindblad_x_step,
    mcwf_ensemble,
    mcwf_trajectory,
    pauli_master_solve,
    pure_state_density,
    random_collision_step,
    vonneumann_step,
)
from .wigner import (
    MoleculeSpec,
    TwoStateWigner,
    WignerFunction,
    density_from_wigner,
    moyal_two_state_step,
    wigner_from_density,
    wigner_marginals,
)
