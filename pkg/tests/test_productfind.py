"""Kernel constraints, the A matrix, minor systems, and the vector search."""
import numpy as np
import pytest

from trisep import linalg, productfind as pf, states
from trisep.errors import ThresholdNotMet
from trisep.productfind import (assemble_constraints, build_minor_system,
                                evaluate_A, find_product_vectors,
                                grid_min_singular)
from trisep.states import (ProductVector, TripartiteState, from_ensemble,
                           random_canonical_state, random_product_vector,
                           random_separable_state, shifts_upb_state)


def test_assemble_constraints_full_rank():
    st = states.random_density_state((2, 2, 2), seed=0)
    kd = assemble_constraints(st)
    assert kd.k_tot == 0
    assert all(c == 0 for c in kd.counts.values())


def test_assemble_constraints_shifts():
    kd = assemble_constraints(shifts_upb_state())
    assert kd.counts == {"rho": 4, "ta": 4, "tb": 4, "tab": 4}
    assert kd.k_tot == 16
    # the component split reassembles the kernel vectors exactly
    st = shifts_upb_state()
    ker = st.kernel("rho")
    comp = kd.components["rho"]
    for i, v in enumerate(ker):
        assert np.array_equal(comp[i].reshape(4 * st.n), v)


def test_assemble_constraints_canonical_counts():
    st = random_canonical_state(2, seed=1)
    kd = assemble_constraints(st)
    assert kd.counts["rho"] == 6  # rank 2 in dimension 8


def test_evaluate_a_shapes_and_limits():
    st = states.random_density_state((2, 2, 3), seed=1)
    kd = assemble_constraints(st)
    assert evaluate_A(kd, 0.3, -0.2).shape == (0, 3)

    st2, _ = random_separable_state((2, 2, 2), 5, seed=2)
    kd2 = assemble_constraints(st2)
    a = evaluate_A(kd2, 0.0, 0.0)
    rows = kd2.rows((0, 0))
    for i, (comp, _, _) in enumerate(rows):
        assert np.allclose(a[i], comp[3].conj())


def test_evaluate_a_annihilates_known_product_vector():
    st, dec = random_separable_state((2, 2, 2), 5, seed=4)
    kd = assemble_constraints(st)
    pv = dec.vectors[0]
    a = evaluate_A(kd, pv.alpha, pv.beta)
    assert np.linalg.norm(a @ pv.g) <= 1e-8


def test_build_minor_system_counts_and_threshold():
    st, vecs = states.upb_product_mixture(3, seed=11)
    kd = assemble_constraints(st)
    ms = build_minor_system(kd)
    assert ms.k_tot == 4
    assert len(ms.equations) == ms.k_tot - ms.n + 1 == 3
    kinds = sorted(e.kind for e in ms.equations + ms.auxiliary)
    assert "P" in kinds and "R" in kinds and "Q" in kinds

    marg = states.random_state_with_kernels({"rho": 1, "ta": 1, "tab": 1}, seed=0)
    kdm = assemble_constraints(marg)
    msm = build_minor_system(kdm)
    assert len(msm.equations) == 2  # equations match the parameter count

    full = states.random_density_state((2, 2, 2), seed=3)
    with pytest.raises(ThresholdNotMet):
        build_minor_system(assemble_constraints(full))


def test_threshold_boundary_k_tot_equal_n():
    st = states.random_state_with_kernels({"rho": 1, "ta": 1}, seed=1)
    kd = assemble_constraints(st)
    assert kd.k_tot == 2
    with pytest.raises(ThresholdNotMet):
        build_minor_system(kd)


def test_minor_equations_vanish_on_generators():
    st, gens = states.upb_product_mixture(3, seed=11)
    kd = assemble_constraints(st)
    ms = build_minor_system(kd)
    for g in gens:
        for eq in ms.all_equations():
            assert eq.rel_residual(g.alpha, g.beta) <= 1e-10


def test_solver_empty_for_shifts_with_grid_oracle():
    sh = shifts_upb_state()
    res = find_product_vectors(sh)
    assert len(res) == 0
    assert not res.continuum
    # independent oracle: sigma_min(A) bounded below over the dense grid
    val, info = grid_min_singular(assemble_constraints(sh), step=0.1)
    assert val >= 1e-3


def test_solver_recovers_six_generators():
    st, dec = random_separable_state((2, 2, 2), 6, seed=6)
    res = find_product_vectors(st, use_scan=False)
    for g in dec.vectors:
        best = max(res.vectors, key=g.fidelity_to)
        assert g.fidelity_to(best) >= 1 - 1e-8
        # chart parameters recovered within 1e-6 after canonical mapping
        if g.alpha is not None and best.chart == (0, 0):
            assert abs(best.alpha - g.alpha) <= 1e-6 * (1 + abs(g.alpha))


def test_candidate_count_bound_7777():
    st, _ = states.upb_product_mixture(3, seed=5)
    assert st.ranks == (7, 7, 7, 7)
    res = find_product_vectors(st, use_scan=False)
    assert all(c <= 160 for c in res.candidate_counts.values())


def test_find_vectors_ranks_55_case():
    # separable state with r(rho) = r(rho^tA) = 5: at least 5 members
    st, dec = random_separable_state((2, 2, 2), 5, seed=12)
    assert st.ranks[0] == 5 and st.ranks[1] == 5
    res = find_product_vectors(st)
    assert len(res) >= 5


def test_membership_invariants_on_returned_vectors():
    st, _ = random_separable_state((2, 2, 2), 5, seed=9)
    res = find_product_vectors(st)
    for pv in res.vectors:
        for fam, parties in (("rho", ()), ("ta", ("A",)), ("tb", ("B",)),
                             ("tab", ("A", "B"))):
            v = pv.conjugated(parties)
            assert linalg.kernel_projection_norm(
                st.transpose(fam), v, st.tol) <= 1e-7


def test_conjugation_symmetry():
    st, _ = random_separable_state((2, 2, 2), 5, seed=14)
    conj_st = TripartiteState(st.rho.conj(), st.dims, st.tol)
    res = find_product_vectors(st)
    res_c = find_product_vectors(conj_st)
    assert len(res) == len(res_c)
    for pv in res.vectors:
        mirrored = ProductVector.from_factors(pv.e.conj(), pv.f.conj(),
                                              pv.g.conj())
        best = max(res_c.vectors, key=mirrored.fidelity_to)
        assert mirrored.fidelity_to(best) >= 1 - 1e-8


def test_chart_completeness_parameter_at_infinity():
    # a generator with e = |0> exactly: base-chart alpha at infinity
    rng = np.random.default_rng(3)
    vecs = [ProductVector.from_factors([1.0, 0.0],
                                       rng.standard_normal(2) + 1j * rng.standard_normal(2),
                                       rng.standard_normal(2) + 1j * rng.standard_normal(2))]
    vecs += [random_product_vector((2, 2, 2), rng) for _ in range(4)]
    st = from_ensemble(rng.uniform(0.5, 1.5, 5), vecs)
    res = find_product_vectors(st)
    best = max(res.vectors, key=vecs[0].fidelity_to)
    assert vecs[0].fidelity_to(best) >= 1 - 1e-8


def test_freedom_regime_returns_continuum_representatives():
    st = states.random_density_state((2, 2, 2), seed=8)
    res = find_product_vectors(st)
    assert res.continuum
    assert len(res) >= 1
    for pv in res.vectors:
        assert not pv.isolated


def test_marginal_case_count_bound():
    st = states.random_state_with_kernels({"rho": 1, "ta": 1, "tab": 1}, seed=2)
    kd = assemble_constraints(st)
    assert kd.k_tot == 3
    res = find_product_vectors(st, use_scan=False)
    assert all(c <= 4608 for c in res.candidate_counts.values())


def test_scan_lane_matches_elimination_on_n2():
    st, dec = random_separable_state((2, 2, 2), 5, seed=21)
    relim = find_product_vectors(st, use_scan=False)
    rscan = find_product_vectors(st, charts=pf.CHARTS)
    assert len(relim) == len(rscan)
    for pv in relim.vectors:
        assert max(pv.fidelity_to(q) for q in rscan.vectors) >= 1 - 1e-8
