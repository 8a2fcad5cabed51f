"""Quantum connection matrices of varieties from Gromov-Witten potentials."""

from .atoms import AtomCombination, AtomProxy, K0Expression, atom_of, atom_sum, atom_tensor, hom_check, phi
from .basechange import (
    BaseChange,
    apply_base_change,
    compose_base_changes,
    conjugate,
    invert_base_change,
    permutation_base_change,
)
from .catalog import Catalog
from .cohomology import CohomologyModel, kunneth_product, validate_model
from .quantum import (
    Potential,
    QuantumModel,
    associativity_check,
    connection_A,
    connection_K,
    dimension_validate,
    frobenius_check,
    grading_G,
    leading_K_decomposition,
    leading_purity_check,
    pure_part_match,
    quantum_product,
)
from .series import Series
from .spectral import (
    RaySpec,
    convergence_experiment,
    eigenvalues,
    generalized_decomposition,
    kronecker_sum,
    matching_distance,
    spectrum_multiset,
)

__version__ = "0.1.0"
