"""Core linear algebra: partial transposes, kernels, PSD tests, simdiag."""
import numpy as np
import pytest

from trisep import linalg
from trisep.errors import CommutatorError, DimensionError, HermiticityError
from trisep.linalg import DEFAULT_TOL as TOL
from trisep.states import shifts_upb_state


def kron3(a, b, c):
    return np.kron(np.kron(a, b), c)


def proj(v):
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def phi_plus_ancilla():
    """|Phi+><Phi+| on AB tensored with |0><0| on C."""
    phi = np.zeros(4, dtype=complex)
    phi[0] = phi[3] = 1 / np.sqrt(2)
    anc = np.zeros((2, 2), dtype=complex)
    anc[0, 0] = 1
    return np.kron(proj(phi), anc)


def test_partial_transpose_real_product_state_unchanged():
    rng = np.random.default_rng(0)
    def real_psd(d):
        g = rng.standard_normal((d, d))
        m = g @ g.T
        return m / np.trace(m)
    rho = kron3(real_psd(2), real_psd(2), real_psd(3))
    for parties in ({"A"}, {"B"}, {"A", "B"}):
        out = linalg.partial_transpose(rho, (2, 2, 3), parties)
        assert np.allclose(out, rho)


def test_partial_transpose_involution_and_composition():
    rng = np.random.default_rng(1)
    d = 4 * 3
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ g.conj().T
    dims = (2, 2, 3)
    ta = linalg.partial_transpose(rho, dims, {"A"})
    assert np.array_equal(linalg.partial_transpose(ta, dims, {"A"}), rho)
    tb = linalg.partial_transpose(rho, dims, {"B"})
    tab = linalg.partial_transpose(rho, dims, {"A", "B"})
    assert np.allclose(linalg.partial_transpose(ta, dims, {"B"}), tab)
    assert np.allclose(linalg.partial_transpose(tb, dims, {"A"}), tab)


def test_partial_transpose_preserves_trace_hermiticity_frobenius():
    rng = np.random.default_rng(2)
    d = 8
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ g.conj().T
    ta = linalg.partial_transpose(rho, (2, 2, 2), {"A"})
    assert abs(np.trace(ta) - np.trace(rho)) < 1e-12
    assert np.allclose(ta, ta.conj().T)
    assert abs(np.linalg.norm(ta) - np.linalg.norm(rho)) < 1e-12


def test_partial_transpose_bell_min_eigenvalue():
    # oracle: explicit eigendecomposition of the 8x8 partial transpose
    rho = phi_plus_ancilla()
    ta = linalg.partial_transpose(rho, (2, 2, 2), {"A"})
    w = np.linalg.eigvalsh(ta)
    assert abs(w[0] - (-0.5)) < 1e-12


def test_partial_transpose_rejects_bad_input():
    with pytest.raises(DimensionError):
        linalg.partial_transpose(np.eye(8), (2, 2, 2), set())
    with pytest.raises(DimensionError):
        linalg.partial_transpose(np.eye(9), (2, 2, 2), {"A"})


def test_kernel_basis_identity_and_rank_one():
    assert linalg.kernel_basis(np.eye(4)) == []
    m = np.zeros((2, 2), dtype=complex)
    m[0, 0] = 1.0
    ker = linalg.kernel_basis(m)
    assert len(ker) == 1
    assert abs(abs(ker[0][1]) - 1.0) < 1e-12


def test_kernel_basis_shifts_state():
    rho = shifts_upb_state().rho
    ker = linalg.kernel_basis(rho)
    assert len(ker) == 4
    for v in ker:
        assert np.linalg.norm(rho @ v) <= 1e-10


def test_kernel_rank_matches_svd_rank_on_random_matrices():
    rng = np.random.default_rng(3)
    for dim in (3, 5, 8, 12, 16):
        r = rng.integers(1, dim + 1)
        g = rng.standard_normal((dim, r)) + 1j * rng.standard_normal((dim, r))
        m = g @ (rng.standard_normal((r, dim)) + 1j * rng.standard_normal((r, dim)))
        s = np.linalg.svd(m, compute_uv=False)
        brute = int(np.sum(s > TOL.rank_rel * s[0] * dim))
        assert linalg.numerical_rank(m) == brute
        assert linalg.numerical_rank(m) + len(linalg.kernel_basis(m)) == dim


def test_is_psd_examples():
    assert linalg.is_psd(np.zeros((3, 3)))
    assert not linalg.is_psd(np.diag([1.0, -1.0]))
    ta = linalg.partial_transpose(phi_plus_ancilla(), (2, 2, 2), {"A"})
    assert not linalg.is_psd(ta)


def test_is_psd_rejects_non_hermitian():
    m = np.array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(HermiticityError):
        linalg.is_psd(m)


def test_local_project_examples():
    e0 = np.array([1.0, 0.0])
    e1 = np.array([0.0, 1.0])
    rho = proj(kron3(e0, e0, e0))
    out = linalg.local_project(rho, (2, 2, 2), "A", e0)
    assert np.allclose(out, proj(np.kron(e0, e0)))
    assert np.allclose(linalg.local_project(rho, (2, 2, 2), "A", e1), 0.0)
    # separable two-term state: projecting onto |1>_A picks the second term
    g1 = np.array([1.0, 0.0])
    g2 = np.array([1.0, 1.0]) / np.sqrt(2)
    rho = 0.5 * proj(kron3(e0, e0, g1)) + 0.5 * proj(kron3(e1, e1, g2))
    out = linalg.local_project(rho, (2, 2, 2), "A", e1)
    assert np.allclose(out, 0.5 * proj(np.kron(e1, g2)))
    # PSD is preserved
    assert linalg.is_psd(out)


def test_local_project_ab_party():
    e0 = np.array([1.0, 0.0])
    g = np.array([0.3, 0.7, 0.1])
    g = g / np.linalg.norm(g)
    rho = proj(kron3(e0, e0, g))
    out = linalg.local_project(rho, (2, 2, 3), "AB", np.kron(e0, e0))
    assert np.allclose(out, proj(g))


def test_simultaneous_diagonalize_trivial_cases():
    basis, eigs = linalg.simultaneous_diagonalize([np.eye(3)])
    assert np.allclose(eigs, 1.0)
    ops = [np.diag([1.0, 2.0]), np.diag([3.0, 4.0])]
    basis, eigs = linalg.simultaneous_diagonalize(ops)
    pairs = sorted(zip(np.real(eigs[0]), np.real(eigs[1])))
    assert np.allclose(pairs, [(1.0, 3.0), (2.0, 4.0)])


def test_simultaneous_diagonalize_random_commuting_normals():
    rng = np.random.default_rng(7)
    u = linalg.haar_unitary(4, rng)
    d1 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    d2 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    m1 = (u * d1) @ u.conj().T
    m2 = (u * d2) @ u.conj().T
    basis, eigs = linalg.simultaneous_diagonalize([m1, m2])
    v = np.column_stack(basis)
    assert np.linalg.norm(v.conj().T @ v - np.eye(4)) <= 1e-10
    for m in (m1, m2):
        t = v.conj().T @ m @ v
        off = t - np.diag(np.diagonal(t))
        assert np.linalg.norm(off) <= 1e-8
    # reconstruction from the eigenvalue table
    for m, lam in zip((m1, m2), eigs):
        rec = (v * lam) @ v.conj().T
        assert np.linalg.norm(rec - m) <= 1e-8


def test_simultaneous_diagonalize_rejects_noncommuting():
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    sz = np.diag([1.0, -1.0])
    with pytest.raises(CommutatorError):
        linalg.simultaneous_diagonalize([sx, sz])


def test_simultaneous_diagonalize_rejects_nonnormal():
    m = np.array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(CommutatorError):
        linalg.simultaneous_diagonalize([m])


def test_tolerance_validation():
    with pytest.raises(ValueError):
        linalg.Tolerance(rank_rel=0.0)
