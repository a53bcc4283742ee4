"""Separability and entanglement classification for 2 x 2 x N tripartite states."""

from .linalg import (DEFAULT_TOL, Tolerance, is_psd, kernel_basis, local_project,
                     numerical_rank, partial_transpose, simultaneous_diagonalize)
from .states import (Decomposition, ProductVector, TripartiteState, from_ensemble,
                     load, random_canonical_state, save, shifts_upb_state,
                     werner_ancilla_state)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOL", "Tolerance", "TripartiteState", "ProductVector", "Decomposition",
    "partial_transpose", "kernel_basis", "is_psd", "local_project",
    "numerical_rank", "simultaneous_diagonalize",
    "from_ensemble", "random_canonical_state", "shifts_upb_state",
    "werner_ancilla_state", "save", "load",
]
