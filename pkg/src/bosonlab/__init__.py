"""Desk-scale laboratory for bosonic mean-field limits in finite dimension:
symmetric-sector linear algebra, quantitative de Finetti constructions
(classical and quantum), Hartree minimization, Gibbs states at T = tN, and
Fock-space localization."""

from .symfock import (
    SectorOperator,
    annihilation_matrix,
    creation_matrix,
    enumerate_basis,
    partial_trace,
    product_state,
    pure_state_operator,
    random_density,
    sym_dimension,
    trace_norm_distance,
    wick_reduced_element,
)
from .manybody import (
    ModelSpec,
    assemble_hamiltonian,
    benchmark_model,
    gibbs_state,
    ground_state,
)
from .definetti_q import (
    SphereSampler,
    antiwick_reduced_element,
    chiribella_reduced,
    ckmr_reduced_mc,
    lower_symbol,
    verify_definetti_bound,
    wick_to_antiwick_coeffs,
)
from .definetti_c import (
    SymmetricClassicalState,
    classical_gibbs,
    df_marginals,
    df_state,
    mf_free_energy,
    verify_df_bound,
)
from .hartree import HartreeResult, convergence_report, hartree_energy, minimize_hartree
from .gibbs import (
    appendixB_experiment,
    berezin_lieb_check,
    classical_free_energy,
    gibbs_marginal_convergence,
)
from .locfock import (
    DiagonalFockState,
    fock_reduced_matrix,
    localize,
    mass_distribution,
    verify_duality,
)

__version__ = "0.1.0"
