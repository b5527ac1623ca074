"""Scale-resolved information-lattice analysis of 1D quantum states.

The package decomposes the total information of a quantum chain into
contributions labeled by position and scale, extracts characteristic
length scales from the per-scale totals, and provides three exact entropy
backends (dense state vectors, free-fermion covariance matrices,
matrix-product states) plus the disordered Majorana-chain model and
ensemble tooling used to study it.
"""

__version__ = "0.1.0"

from .dense import (
    DenseState,
    dense_entropy_provider,
    entropy_bits,
    ghz_state,
    haar_random_state,
    product_state,
    reduced_density_matrix,
)
from .gaussian import (
    CovarianceMatrix,
    MajoranaCoupling,
    coupling_from_hoppings,
    gaussian_entropy_provider,
    gaussian_subsystem_entropy,
    ground_covariance,
)
from .kitaev import (
    KitaevRealization,
    MajoranaString,
    SectorEigenpair,
    build_hamiltonian,
    duality_map,
    global_ground_state,
    parity_sector_eigensystem,
    sample_disorder,
    sample_realization,
)
from .lattice import (
    InformationLattice,
    ScaleProfile,
    SSAViolationError,
    SubsystemId,
    average_lattices,
    info_per_scale,
    local_information,
    subsystem_decomposition_check,
)
from .mps import (
    EntropyStrategy,
    MatrixProductState,
    choose_strategy,
    complement_entropy,
    double_cut_entropy,
    mps_entropy_provider,
    mps_from_dense,
    single_cut_entropy,
)
from .scales import (
    LengthSummary,
    correlation_decay_length,
    critical_alpha_fit,
    expected_correlation_length,
    expected_edge_correlation_length,
    large_scale_information,
    summarize,
)

__all__ = [name for name in dir() if not name.startswith("_")]
