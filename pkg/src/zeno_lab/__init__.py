"""Numerical laboratory for quantum Zeno dynamics."""

from .classify import (
    ZenoClassification,
    classify_intervals,
    classify_rates,
    fit_effective_rate,
    golden_rule_rate,
    poincare_time,
)
from .core import (
    Trajectory,
    ZenoPartition,
    adiabatic_transport_defect,
    evolve,
    intertwining_defect,
    perturbative_spectrum,
    spectral_partition,
    zeno_hamiltonian,
    zeno_limit_evolution,
)
from .dfs import DfsReport, dfs_report, project_effective_hamiltonian, real_spectrum_subspace
from .linalg import EigenDecomposition, expm, gen_eig, herm_eig, null_space
from .models import (
    HamiltonianPair,
    ModelSpec,
    SectorDecomposition,
    build_model,
    dilate_flat_continuum,
    excitation_sectors,
)
from .pulsed import (
    PulsedResult,
    effective_rate_pulsed,
    pulsed_nonselective,
    pulsed_selective,
    zeno_time,
)

__version__ = "0.1.0"
