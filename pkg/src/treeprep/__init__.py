"""treeprep: divide-and-conquer ground-state preparation, simulated and bounded.

A classical toolkit around one protocol: split a Hamiltonian over a perfect
binary tree of contiguous subsystems, prepare leaf ground states exactly, and
merge children pairwise via idealized phase-estimation events until the root
ground state is reached.  The package simulates the repeat-until-success
process with exact bookkeeping, evaluates the analytic query bounds, and
ships the perturbation/entanglement bounds needed to reason about when the
overlaps involved stay large.
"""
from .pauli import (
    ConvergenceError,
    NormBounds,
    OperatorSum,
    PauliTerm,
    StateVector,
    load_operator,
    save_operator,
)
from .spectra import Spectrum, SpectralGap, lowest_eigenpairs, overlap_abs, spectral_gap
from .tree import (
    HamiltonianTree,
    ValidationReport,
    decompose,
    load_tree,
    node_term_operator,
    save_tree,
    subsystem_hamiltonian,
    validate,
)
from .engine import (
    DegenerateNodeError,
    MergeOutcome,
    PrepResult,
    PrepTrace,
    QpeModel,
    QueryBounds,
    TreeGround,
    analytic_bounds,
    compound_success_lower_bound,
    merge,
    prepare,
    repetitions,
)
from .tfim import build_tfim, tfim_tree
from .bounds import (
    BoundReport,
    EffectiveHamiltonianReport,
    PathDiagnostic,
    SufficiencyReport,
    davis_kahan,
    effective_error,
    gap_overlap_chain,
    matrix_log,
    path_overlap_diagnostic,
    perturbed_overlap_lb,
    qpe_fidelity_bound,
    run_sweeps,
    sufficient_conditions,
    weyl_max_shift,
)
from .entangle import (
    DensityMatrix,
    best_product_partner,
    entropy,
    entropy_bits,
    entropy_of_peak_mixture,
    loose_overlap_for_entropy,
    max_overlap_for_entropy,
    reduced_density,
    success_cap,
)
from .fermion import (
    BodyTensors,
    FermionProduct,
    build_molecular,
    hermitian_pair,
    jw_map,
    load_tensors,
    save_tensors,
    support_interval,
)
from .experiments import (
    EngineConfig,
    ExperimentConfig,
    GapRow,
    LayerRow,
    ModelConfig,
    OutputConfig,
    OverlapRow,
    PrepareStats,
    gap_interaction_curve,
    layer_overlap_curve,
    naive_overlap_curve,
    run,
    run_protocol,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
