"""State type, generators, and file I/O."""
import json

import numpy as np
import pytest

from trisep import linalg, states
from trisep.errors import DimensionError, FormatError
from trisep.states import (Decomposition, ProductVector, TripartiteState,
                           canonical_state_from_ops, from_ensemble, load,
                           random_canonical_state, random_product_vector,
                           random_separable_state, save, shifts_upb_members,
                           shifts_upb_state, werner_ancilla_state, werner_state)


def kron3(a, b, c):
    return np.kron(np.kron(a, b), c)


E0 = np.array([1.0, 0.0])
E1 = np.array([0.0, 1.0])


def test_state_validation():
    with pytest.raises(ValueError):
        TripartiteState(np.eye(8) / 4.0, (2, 2, 2))  # trace 2
    m = np.eye(8) / 8.0
    m[0, 0] = -0.1
    m[1, 1] = 0.225 + 0.1
    with pytest.raises(ValueError):
        TripartiteState(m, (2, 2, 2))  # not PSD
    with pytest.raises(DimensionError):
        TripartiteState(np.eye(8) / 8.0, (2, 2, 3))


def test_cached_transposes_match_recomputation():
    st = random_canonical_state(3, seed=0)
    for key, parties in (("ta", {"A"}), ("tb", {"B"}), ("tab", {"A", "B"})):
        direct = linalg.partial_transpose(st.rho, st.dims, parties)
        assert np.array_equal(st.transpose(key), direct)


def test_from_ensemble_examples():
    pv = ProductVector.from_factors(E0, E0, E0)
    st = from_ensemble([1.0], [pv])
    assert st.rank == 1
    st2 = from_ensemble([0.5, 0.5], [pv, ProductVector.from_factors(E1, E1, E1)])
    assert st2.rank == 2
    assert np.allclose(st2.rho, np.diag(st2.rho.diagonal()))
    with pytest.raises(ValueError):
        from_ensemble([1.0, -0.5], [pv, pv])


def test_from_ensemble_random_products_ppt_all_cuts():
    rng = np.random.default_rng(5)
    vecs = [random_product_vector((2, 2, 2), rng) for _ in range(5)]
    st = from_ensemble(rng.uniform(0.5, 1.5, 5), vecs)
    assert st.is_ppt()
    assert linalg.is_psd(st.rho)


def test_canonical_state_trivial_b_c_zero():
    n = 3
    z = np.zeros((n, n))
    st = canonical_state_from_ops(z, z, np.eye(n))
    expect = kron3(np.outer(E1, E1), np.outer(E1, E1), np.eye(n)) / n
    assert np.allclose(st.rho, expect)
    assert st.rank == n


def test_canonical_state_b_c_identity_n1():
    st = canonical_state_from_ops(np.eye(1), np.eye(1), np.eye(1))
    plus = (E0 + E1) / np.sqrt(2)
    expect = np.outer(np.kron(np.kron(plus, plus), [1.0]),
                      np.kron(np.kron(plus, plus), [1.0]).conj())
    assert np.allclose(st.rho, expect)
    assert st.rank == 1


def test_random_canonical_state_rank_and_ppt():
    st = random_canonical_state(3, seed=11)
    assert st.rank == 3
    assert st.is_ppt()


def test_random_canonical_state_kernel_families():
    # the three N-parameter kernel families (with the minus sign convention)
    rng = np.random.default_rng(4)
    n = 3
    B, C = states.random_commuting_normals(n, rng)
    D = np.diag(rng.uniform(0.5, 1.5, n)).astype(complex)
    st = canonical_state_from_ops(B, C, D)
    assert st.kernel_dims[0] == 3 * n
    w, v = np.linalg.eigh(linalg.hermitize(D, st.tol))
    dinv_half = (v * (1 / np.sqrt(w))) @ v.conj().T
    eye = np.eye(n)
    CB = C @ B

    def lift(block_vectors):
        # block_vectors: dict ab -> N x N matrix of columns in Charlie space
        out = np.zeros((4 * n, n), dtype=complex)
        for (a, b), mat in block_vectors.items():
            out[(2 * a + b) * n:(2 * a + b + 1) * n, :] = mat
        return out

    fams = [
        lift({(0, 0): eye, (1, 1): -CB}),
        lift({(0, 1): eye, (1, 1): -C}),
        lift({(1, 0): eye, (1, 1): -B}),
    ]
    scale = np.linalg.norm(st.rho)
    for fam in fams:
        vecs = np.kron(np.eye(4), dinv_half) @ fam
        resid = np.linalg.norm(st.rho @ vecs) / max(1.0, np.linalg.norm(vecs))
        assert resid <= 1e-8 * max(1.0, scale)


def test_shifts_state_properties():
    st = shifts_upb_state()
    assert abs(st.trace - 1.0) < 1e-12
    assert st.ranks == (4, 4, 4, 4)
    assert st.is_ppt()
    for m in shifts_upb_members():
        assert np.linalg.norm(st.rho @ m.full()) <= 1e-12
    # the kernel equals the span of the four members
    ker = np.array(linalg.kernel_basis(st.rho))
    members = np.array([m.full() for m in shifts_upb_members()])
    overlap = ker.conj() @ members.T
    s = np.linalg.svd(overlap, compute_uv=False)
    assert np.all(s > 1.0 - 1e-10)


def test_werner_threshold_shape():
    assert np.linalg.eigvalsh(
        linalg.partial_transpose(np.kron(werner_state(0.4),
                                         np.diag([1.0, 0.0])), (2, 2, 2), {"A"}))[0] < -1e-3
    st = werner_ancilla_state(0.3)
    assert st.is_ppt()


def test_product_vector_chart_parameters():
    pv = ProductVector.from_factors([0.6, 0.8], [1.0, 0.0], [0.0, 1.0])
    assert abs(pv.alpha - 0.75) < 1e-12
    assert pv.beta is None  # f = |0>: base-chart parameter at infinity
    pv2 = ProductVector.from_chart((0, 0), 0.75, None, [0.0, 1.0])
    assert pv2.fidelity_to(pv) > 1 - 1e-12


def test_decomposition_invariants():
    st, dec = random_separable_state((2, 2, 3), 4, seed=9)
    assert abs(dec.weights.sum() - 1.0) <= 1e-8
    assert np.all(dec.weights > 0)
    for v in dec.vectors:
        assert abs(np.linalg.norm(v.e) - 1) < 1e-12
        assert abs(np.linalg.norm(v.f) - 1) < 1e-12
        assert abs(np.linalg.norm(v.g) - 1) < 1e-12
    assert dec.reconstruction_error(st.rho) <= 1e-12


def test_save_load_round_trip(tmp_path):
    st = random_canonical_state(3, seed=21)
    path = tmp_path / "state.json"
    save(st, path, meta={"note": "round trip"})
    back = load(path)
    assert back.dims == st.dims
    assert np.array_equal(back.rho, st.rho)  # bit-faithful at double precision


def test_load_accepts_223_and_rejects_bad_trace(tmp_path):
    st, _ = random_separable_state((2, 2, 3), 3, seed=2)
    path = tmp_path / "s.json"
    save(st, path)
    assert load(path).dims == (2, 2, 3)
    obj = states.state_to_json(st)
    obj["matrix"][0][0][0] -= 0.1  # trace now 0.9
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(obj))
    with pytest.raises(FormatError):
        load(bad)


def test_load_rejects_malformed_payloads(tmp_path):
    st = shifts_upb_state()
    obj = states.state_to_json(st)
    cases = []
    o = dict(obj)
    o["version"] = 2
    cases.append(o)
    o = json.loads(json.dumps(obj))
    o["dims"] = [2, 3, 2]
    cases.append(o)
    o = json.loads(json.dumps(obj))
    o["matrix"][0][1][0] += 0.2  # breaks hermiticity
    cases.append(o)
    o = json.loads(json.dumps(obj))
    o["matrix"] = o["matrix"][:-1]
    cases.append(o)
    for i, o in enumerate(cases):
        p = tmp_path / f"bad{i}.json"
        p.write_text(json.dumps(o))
        with pytest.raises(FormatError):
            load(p)


def test_permutations_are_consistent():
    st, _ = random_separable_state((2, 2, 2), 3, seed=13)
    ab = st.permute_ab()
    assert abs(ab.trace - 1.0) < 1e-12
    assert np.allclose(ab.permute_ab().rho, st.rho)
    bc = st.permute_bc()
    assert np.allclose(bc.permute_bc().rho, st.rho)


def test_upb_product_mixture_rank_signature():
    st, vecs = states.upb_product_mixture(3, seed=1)
    assert st.ranks == (7, 7, 7, 7)
    assert st.is_ppt()
    assert len(vecs) == 3


def test_random_state_with_kernels_signature():
    st = states.random_state_with_kernels({"rho": 1, "ta": 1, "tab": 1}, seed=3)
    assert st.ranks == (7, 7, 8, 7)
