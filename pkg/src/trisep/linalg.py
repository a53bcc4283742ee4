"""Dense complex linear algebra primitives for 2 x 2 x N operators.

Partial transposes, numerical rank/kernel/range at a scale-invariant SVD
cutoff, positive-semidefiniteness tests, local projections, and simultaneous
diagonalization of commuting normal matrices.  All functions are pure and
never mutate their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CommutatorError, DimensionError, HermiticityError

PARTY_INDEX = {"A": 0, "B": 1}


@dataclass(frozen=True)
class Tolerance:
    """Numerical thresholds used throughout.

    rank_rel: relative singular-value cutoff, sigma <= rank_rel*sigma_max*dim.
    psd_abs:  eigenvalue floor, min eig >= -psd_abs*(1 + max |eig|).
    residual: bound on reconstruction / kernel residual norms.
    """

    rank_rel: float = 1e-10
    psd_abs: float = 1e-10
    residual: float = 1e-7

    def __post_init__(self):
        if min(self.rank_rel, self.psd_abs, self.residual) <= 0:
            raise ValueError("tolerances must be strictly positive")


DEFAULT_TOL = Tolerance()


def as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m.view(float))):
        raise ValueError("matrix has non-finite entries")
    return m


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def hermitize(m, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Symmetrize (m+m†)/2; reject asymmetry beyond the residual tolerance."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError("hermitize needs a square matrix")
    asym = np.linalg.norm(m - dagger(m))
    scale = max(1.0, np.linalg.norm(m))
    if asym > tol.residual * scale:
        raise HermiticityError(f"asymmetry {asym:.3e} exceeds tolerance")
    return (m + dagger(m)) / 2


def _check_dims(m, dims):
    da, db, dc = dims
    if da != 2 or db != 2 or dc < 1:
        raise DimensionError(f"dims must be (2, 2, N), got {dims}")
    d = da * db * dc
    if m.shape != (d, d):
        raise DimensionError(f"matrix shape {m.shape} does not match dims {dims}")
    return d


def partial_transpose(m, dims, parties) -> np.ndarray:
    """Transpose the indices of the named parties (subset of {'A','B'})."""
    m = as_matrix(m)
    _check_dims(m, dims)
    parties = set(parties)
    if not parties or not parties <= {"A", "B"}:
        raise DimensionError(f"parties must be a nonempty subset of {{'A','B'}}, got {parties}")
    t = m.reshape(2, 2, dims[2], 2, 2, dims[2])
    axes = [0, 1, 2, 3, 4, 5]
    for p in parties:
        i = PARTY_INDEX[p]
        axes[i], axes[i + 3] = axes[i + 3], axes[i]
    return t.transpose(axes).reshape(m.shape).copy()


def singular_values(m) -> np.ndarray:
    return np.linalg.svd(as_matrix(m), compute_uv=False)


def rank_cutoff(s, dim, tol: Tolerance) -> float:
    return tol.rank_rel * (s[0] if len(s) else 0.0) * dim


def numerical_rank(m, tol: Tolerance = DEFAULT_TOL) -> int:
    m = as_matrix(m)
    s = singular_values(m)
    return int(np.sum(s > rank_cutoff(s, max(m.shape), tol)))


def kernel_basis(m, tol: Tolerance = DEFAULT_TOL) -> list[np.ndarray]:
    """Orthonormal basis of the numerical kernel (right null space)."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError("kernel_basis expects a square matrix")
    _, s, vh = np.linalg.svd(m)
    cut = rank_cutoff(s, m.shape[0], tol)
    return [vh[i].conj() for i in range(m.shape[0]) if s[i] <= cut]


def range_basis(m, tol: Tolerance = DEFAULT_TOL) -> list[np.ndarray]:
    """Orthonormal basis of the numerical column space."""
    m = as_matrix(m)
    u, s, _ = np.linalg.svd(m)
    cut = rank_cutoff(s, max(m.shape), tol)
    return [u[:, i] for i in range(len(s)) if s[i] > cut]


def eigvalsh(m, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    return np.linalg.eigvalsh(hermitize(m, tol))


def min_eig(m, tol: Tolerance = DEFAULT_TOL) -> float:
    return float(eigvalsh(m, tol)[0])


def is_psd(m, tol: Tolerance = DEFAULT_TOL) -> bool:
    w = eigvalsh(m, tol)
    return bool(w[0] >= -tol.psd_abs * (1.0 + abs(w[-1])))


def pinv_psd(m, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a PSD matrix, restricted to its range."""
    m = hermitize(m, tol)
    w, v = np.linalg.eigh(m)
    cut = tol.rank_rel * max(abs(w[0]), abs(w[-1])) * m.shape[0]
    inv = np.where(w > cut, 1.0 / np.where(w > cut, w, 1.0), 0.0)
    return (v * inv) @ dagger(v)


def kernel_projection_norm(m, v, tol: Tolerance = DEFAULT_TOL) -> float:
    """Norm of the projection of v onto K(m); membership test for R(m)."""
    basis = kernel_basis(m, tol)
    if not basis:
        return 0.0
    k = np.array(basis)
    return float(np.linalg.norm(k.conj() @ v))


def local_project(rho, dims, party, vec) -> np.ndarray:
    """<vec| rho |vec> on the named party; acts on the remaining parties."""
    rho = as_matrix(rho)
    _check_dims(rho, dims)
    n = dims[2]
    t = rho.reshape(2, 2, n, 2, 2, n)
    vec = np.asarray(vec, dtype=complex).ravel()
    if party == "A":
        if vec.shape != (2,):
            raise DimensionError("party A vector must have dimension 2")
        out = np.einsum("a,abcdef,d->bcef", vec.conj(), t, vec)
        return out.reshape(2 * n, 2 * n)
    if party == "B":
        if vec.shape != (2,):
            raise DimensionError("party B vector must have dimension 2")
        out = np.einsum("b,abcdef,e->acdf", vec.conj(), t, vec)
        return out.reshape(2 * n, 2 * n)
    if party == "AB":
        if vec.shape != (4,):
            raise DimensionError("party AB vector must have dimension 4")
        w = vec.reshape(2, 2)
        return np.einsum("ab,abcdef,de->cf", w.conj(), t, w)
    raise DimensionError(f"unknown party {party!r}")


def haar_unitary(n, rng) -> np.ndarray:
    """Haar-distributed n x n unitary via QR of a Ginibre matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def commutator_norm(x, y) -> float:
    return float(np.linalg.norm(x @ y - y @ x))


def _off_diagonal_norm(t):
    return float(np.linalg.norm(t - np.diag(np.diagonal(t))))


def simultaneous_diagonalize(ops, tol: Tolerance = DEFAULT_TOL, seed: int = 0,
                             max_attempts: int = 8):
    """Common orthonormal eigenbasis of commuting normal matrices.

    Diagonalizes a random real combination of the Hermitian/anti-Hermitian
    parts, then verifies the off-diagonal leakage of every operator; fresh
    coefficients are drawn on failure (degenerate spectra split with
    probability 1).

    Returns (eigenbasis as list of column vectors, eigenvalue table of shape
    (len(ops), dim)).
    """
    ops = [as_matrix(m) for m in ops]
    if not ops:
        raise DimensionError("need at least one operator")
    d = ops[0].shape[0]
    for m in ops:
        if m.shape != (d, d):
            raise DimensionError("operators must share a square shape")
    scales = [max(1.0, np.linalg.norm(m)) for m in ops]
    for i, m in enumerate(ops):
        if commutator_norm(m, dagger(m)) > tol.residual * scales[i] ** 2:
            raise CommutatorError(f"operator {i} is not normal")
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            s = tol.residual * scales[i] * scales[j]
            if commutator_norm(ops[i], ops[j]) > s:
                raise CommutatorError(f"operators {i},{j} do not commute")
            if commutator_norm(ops[i], dagger(ops[j])) > s:
                raise CommutatorError(f"operators {i},{j}+ do not commute")

    herm = []
    for m in ops:
        herm.append((m + dagger(m)) / 2)
        herm.append((m - dagger(m)) / 2j)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max_attempts):
        c = rng.standard_normal(len(herm))
        k = sum(ci * hi for ci, hi in zip(c, herm))
        _, v = np.linalg.eigh(k)
        leak = max(_off_diagonal_norm(dagger(v) @ m @ v) / s
                   for m, s in zip(ops, scales))
        if best is None or leak < best[0]:
            best = (leak, v)
        if leak <= max(tol.residual, 1e-9):
            break
    leak, v = best
    if leak > max(tol.residual, 1e-9):
        raise CommutatorError(f"simultaneous diagonalization leakage {leak:.3e}")
    eigvals = np.array([np.diagonal(dagger(v) @ m @ v) for m in ops])
    return [v[:, i] for i in range(d)], eigvals
