"""Constructive separability for low-rank PPT states.

Canonical-form extraction (commuting normal operators B, C on Charlie's
space behind invertible local filters), the rank-N decomposition built from
their joint eigenbasis, the bipartite 2 x M rank-M decomposition with its
descending-subtraction extension, the three-qubit rank-2/3 procedures, and
positivity-preserving projector subtraction.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import linalg
from .bipoly import BiPolynomial, Poly4, det_poly4, newton_polish_conjugate, solve_self_conjugate
from .errors import (BasisSearchExhausted, CommutatorError, DegenerateSystem,
                     DimensionError, FactorNotProduct, NotPPT, RangeMembershipError,
                     RankMismatch, SubtractionError)
from .linalg import DEFAULT_TOL, Tolerance, dagger
from .states import Decomposition, ProductVector, TripartiteState

PRODUCT_SV_REL = 1e-8  # Schmidt-rank-1 test: second singular value vs first


def schmidt_split(v, dims, rel=PRODUCT_SV_REL):
    """Factor v across the bipartition dims=(d1,d2); None if not product."""
    d1, d2 = dims
    m = np.asarray(v, dtype=complex).reshape(d1, d2)
    u, s, vh = np.linalg.svd(m)
    if len(s) > 1 and s[1] > rel * s[0]:
        return None
    return u[:, 0], s[0] * vh[0]


def factor_product3(v, dims, rel=PRODUCT_SV_REL):
    """Factor v in (2,2,N) into (e, f, g); None if any split fails."""
    first = schmidt_split(v, (2, dims[1] * dims[2]), rel)
    if first is None:
        return None
    e, rest = first
    second = schmidt_split(rest, (dims[1], dims[2]), rel)
    if second is None:
        return None
    f, g = second
    return e, f, g


def orth2(e):
    """The vector orthogonal to a 2-vector (unique up to phase)."""
    e = np.asarray(e, dtype=complex).ravel()
    return np.array([-np.conj(e[1]), np.conj(e[0])])


def _sqrt_psd(m, tol: Tolerance, inverse=False):
    w, v = np.linalg.eigh(linalg.hermitize(m, tol))
    cut = tol.rank_rel * max(abs(w[-1]), 1e-300) * m.shape[0]
    if inverse:
        s = np.where(w > cut, 1.0 / np.sqrt(np.clip(w, cut, None)), 0.0)
    else:
        s = np.sqrt(np.clip(w, 0.0, None))
    return (v * s) @ dagger(v)


# ---------------------------------------------------------------------------
# canonical form of rank-N PPT states
# ---------------------------------------------------------------------------

@dataclass
class CanonicalForm:
    """Operators (B, C, D) of the normal form plus the local filters.

    The originating state is u_a (x) u_b (x) sqrt(D) applied to the pure
    outer-product form (B+C+; C+; B+; 1)(CB, C, B, 1).
    """

    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    u_a: np.ndarray
    u_b: np.ndarray
    delta_residual: float

    @property
    def n(self):
        return self.B.shape[0]

    def stack(self):
        n = self.n
        return np.vstack([dagger(self.B) @ dagger(self.C), dagger(self.C),
                          dagger(self.B), np.eye(n)])

    def reconstruct(self, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
        x = self.stack()
        sq = _sqrt_psd(self.D, tol)
        rot = np.kron(np.kron(self.u_a, self.u_b), np.eye(self.n))
        l = rot @ np.kron(np.eye(4), sq)
        return l @ (x @ dagger(x)) @ dagger(l)


def _block(m, n, r, c):
    """N x N block of a 4N x 4N matrix at (row, col) block indices in 0..3."""
    return m[r * n:(r + 1) * n, c * n:(c + 1) * n]


def extract_canonical(state: TripartiteState, seed: int = 0,
                      max_attempts: int = 64) -> CanonicalForm:
    """Extract (B, C, D) and the local filters from a rank-N PPT state.

    Searches seeded random local bases for a full-rank corner block
    <1_A,1_B| rho |1_A,1_B>, filters Charlie's side by its inverse square
    root, and reads B, C off the filtered blocks.
    """
    tol = state.tol
    n = state.n
    if not state.is_ppt():
        raise NotPPT("canonical extraction requires PPT for A, B and AB")
    if state.rank != n:
        raise RankMismatch(f"rank {state.rank} != N = {n}")
    rng = np.random.default_rng(seed)
    eye2 = np.eye(2, dtype=complex)
    found = None
    for attempt in range(max_attempts):
        if attempt == 0:
            u_a, u_b = eye2, eye2
        else:
            u_a, u_b = linalg.haar_unitary(2, rng), linalg.haar_unitary(2, rng)
        rot = np.kron(np.kron(u_a, u_b), np.eye(n))
        rho_rot = dagger(rot) @ state.rho @ rot
        e4 = _block(rho_rot, n, 3, 3)
        if linalg.numerical_rank(e4, tol) == n:
            found = (u_a, u_b, rho_rot, e4)
            break
    if found is None:
        raise BasisSearchExhausted(
            f"no full-rank corner block after {max_attempts} sampled local bases")
    u_a, u_b, rho_rot, e4 = found
    f = _sqrt_psd(e4, tol, inverse=True)
    kf = np.kron(np.eye(4), f)
    can = kf @ rho_rot @ kf
    b_op = _block(can, n, 3, 2)
    c_op = _block(can, n, 3, 1)
    scale = max(1.0, np.linalg.norm(can))
    sb, sc = max(1.0, np.linalg.norm(b_op)), max(1.0, np.linalg.norm(c_op))
    comms = {
        "[B,B+]": linalg.commutator_norm(b_op, dagger(b_op)) / sb**2,
        "[C,C+]": linalg.commutator_norm(c_op, dagger(c_op)) / sc**2,
        "[B,C]": linalg.commutator_norm(b_op, c_op) / (sb * sc),
        "[B,C+]": linalg.commutator_norm(b_op, dagger(c_op)) / (sb * sc),
    }
    worst = max(comms.values())
    if worst > tol.residual * 10:
        raise CommutatorError(
            f"extracted operators fail normality/commutation ({comms}); "
            "the state is not PPT rank-N of the assumed form")
    delta = _block(can, n, 2, 2) - dagger(b_op) @ b_op
    delta_t = _block(can, n, 0, 0) - dagger(b_op) @ dagger(c_op) @ c_op @ b_op
    delta_residual = max(np.linalg.norm(delta), np.linalg.norm(delta_t))
    if delta_residual > tol.residual * 10 * scale:
        raise CommutatorError(
            f"canonical block identities fail (residual {delta_residual:.3e}); "
            "the state is not PPT rank-N of the assumed form")
    return CanonicalForm(b_op, c_op, e4, u_a, u_b, float(delta_residual))


def decompose_rank_n(state: TripartiteState, seed: int = 0) -> Decomposition:
    """Rank-N separable decomposition from the joint eigenbasis of B and C."""
    tol = state.tol
    cf = extract_canonical(state, seed=seed)
    vecs, eigs = linalg.simultaneous_diagonalize([cf.B, cf.C], tol, seed=seed)
    sq = _sqrt_psd(cf.D, tol)
    weights, pvs = [], []
    for k in range(cf.n):
        b_k, c_k = eigs[0][k], eigs[1][k]
        e = cf.u_a @ np.array([np.conj(c_k), 1.0])
        f = cf.u_b @ np.array([np.conj(b_k), 1.0])
        g = sq @ vecs[k]
        w = (np.linalg.norm(e) * np.linalg.norm(f) * np.linalg.norm(g)) ** 2
        weights.append(w)
        pvs.append(ProductVector.from_factors(e, f, g))
    total = float(np.sum(weights))
    if abs(total - state.trace) > max(1e-8, 10 * tol.residual):
        raise CommutatorError(f"decomposition weights sum to {total}, trace {state.trace}")
    dec = Decomposition(weights, pvs)
    err = dec.reconstruction_error(state.rho / state.trace)
    if err > tol.residual * 10:
        raise CommutatorError(f"rank-N reconstruction residual {err:.3e}")
    return dec


# ---------------------------------------------------------------------------
# bipartite 2 x M machinery (Theorem-1 route plus descending subtraction)
# ---------------------------------------------------------------------------

def _bip_pt(rho, m):
    return rho.reshape(2, m, 2, m).transpose(2, 1, 0, 3).reshape(2 * m, 2 * m)


def _bip_kron(e, b):
    return np.kron(np.asarray(e, dtype=complex), np.asarray(b, dtype=complex))


def _bip_supported(rho, m, tol: Tolerance, seed=0, max_attempts=64):
    """Unique decomposition of a PPT 2 x m state of rank m with full supports."""
    rng = np.random.default_rng(seed)
    eye2 = np.eye(2, dtype=complex)
    found = None
    for attempt in range(max_attempts):
        u = eye2 if attempt == 0 else linalg.haar_unitary(2, rng)
        rot = np.kron(u, np.eye(m))
        rr = dagger(rot) @ rho @ rot
        e4 = rr[m:, m:]
        if linalg.numerical_rank(e4, tol) == m:
            found = (u, rr, e4)
            break
    if found is None:
        raise BasisSearchExhausted("no full-rank corner block on the 2 x M split")
    u, rr, e4 = found
    f = _sqrt_psd(e4, tol, inverse=True)
    kf = np.kron(np.eye(2), f)
    can = kf @ rr @ kf
    b_op = can[m:, :m]
    scale = max(1.0, np.linalg.norm(can))
    if linalg.commutator_norm(b_op, dagger(b_op)) > 10 * tol.residual * max(1.0, np.linalg.norm(b_op))**2:
        raise CommutatorError("extracted bipartite operator is not normal; state not PPT rank-M")
    delta = can[:m, :m] - dagger(b_op) @ b_op
    if np.linalg.norm(delta) > 10 * tol.residual * scale:
        raise CommutatorError("bipartite canonical identity fails; state not supported rank-M PPT")
    vecs, eigs = linalg.simultaneous_diagonalize([b_op], tol, seed=seed)
    sq = _sqrt_psd(e4, tol)
    out = []
    for k in range(m):
        e = u @ np.array([np.conj(eigs[0][k]), 1.0])
        b = sq @ vecs[k]
        w = (np.linalg.norm(e) * np.linalg.norm(b)) ** 2
        out.append((float(w), e / np.linalg.norm(e), b / np.linalg.norm(b)))
    return out


def _bip_kernel_components(vs, m):
    """Split bipartite kernel vectors into qubit components (k0, k1)."""
    arr = np.array(vs).reshape(len(vs), 2, m)
    return arr[:, 0, :], arr[:, 1, :]


def _bip_admissible_candidates(rho, rho_ta, m, tol: Tolerance, rng, n_samples=160):
    """Product vectors e (x) f with e,f in R(rho) and e*,f in R(rho^tA).

    Returns (candidates, resolver): candidates are (e, f, alpha, chart)
    tuples; when the admissible set is a family, resolver(alpha, chart)
    reconstructs a member for path bisection (None for isolated solutions).
    """
    ker_r = linalg.kernel_basis(rho, tol)
    ker_a = linalg.kernel_basis(rho_ta, tol)
    rows = len(ker_r) + len(ker_a)
    cands = []

    def f_from_alpha(alpha, chart):
        e = np.array([alpha, 1.0]) if chart == 0 else np.array([1.0, alpha])
        mats = []
        if ker_r:
            k0, k1 = _bip_kernel_components(ker_r, m)
            if chart:
                k0, k1 = k1, k0
            mats.append(alpha * k0.conj() + k1.conj())
        if ker_a:
            a0, a1 = _bip_kernel_components(ker_a, m)
            if chart:
                a0, a1 = a1, a0
            mats.append(np.conj(alpha) * a0.conj() + a1.conj())
        c = np.vstack(mats) if mats else np.zeros((0, m), dtype=complex)
        if c.shape[0] == 0:
            f = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            return e, f / np.linalg.norm(f)
        _, s, vh = np.linalg.svd(c)
        f = vh[-1].conj()
        resid = s[-1] if len(s) >= m else 0.0
        if resid > 1e-7 * max(1.0, s[0] if len(s) else 1.0):
            return None
        return e, f

    if rows < m:
        # free parameters remain: sample alpha over both charts
        for chart in (0, 1):
            for _ in range(n_samples // 2):
                alpha = rng.standard_normal() + 1j * rng.standard_normal()
                got = f_from_alpha(alpha, chart)
                if got is not None:
                    cands.append((got[0], got[1], alpha, chart))
        mode = "free" if rows == 0 else "family"
        return cands, f_from_alpha, mode

    # constrained: vanishing m x m minors give polynomial conditions on alpha
    for chart in (0, 1):
        row_polys = []
        if ker_r:
            k0, k1 = _bip_kernel_components(ker_r, m)
            if chart:
                k0, k1 = k1, k0
            for i in range(len(ker_r)):
                row_polys.append([(k0[i].conj()[j], k1[i].conj()[j], False) for j in range(m)])
        if ker_a:
            a0, a1 = _bip_kernel_components(ker_a, m)
            if chart:
                a0, a1 = a1, a0
            for i in range(len(ker_a)):
                row_polys.append([(a0[i].conj()[j], a1[i].conj()[j], True) for j in range(m)])

        def entry(i, j):
            c1, c0, is_conj = row_polys[i][j]
            key = (0, 1, 0, 0) if is_conj else (1, 0, 0, 0)
            return Poly4({key: c1, (0, 0, 0, 0): c0}).trim()

        alphas = []
        for sel in itertools.combinations(range(rows), m):
            mat = [[entry(i, j) for j in range(m)] for i in sel]
            det = det_poly4(mat)
            c = np.zeros((rows + 1, rows + 1), dtype=complex)
            for (i, j, _, _), v in det.terms.items():
                c[i, j] = v
            d = BiPolynomial(c)
            if d.norm == 0.0:
                continue
            sols, _ = solve_self_conjugate(d)
            alphas.extend(sols)
            for _ in range(4):  # a few extra polished random starts
                a0 = rng.standard_normal() + 1j * rng.standard_normal()
                alphas.append(newton_polish_conjugate(d, a0))
            break  # one minor suffices: the f-residual check covers remaining rows
        for alpha in alphas:
            got = f_from_alpha(alpha, chart)
            if got is not None:
                cands.append((got[0], got[1], alpha, chart))
    return cands, f_from_alpha, "isolated"


def _bip_descending(rho, m, tol: Tolerance, seed=0):
    """Reduce r(rho) to the m-side support by PPT-preserving subtractions.

    Prefers subtraction points where the two critical values coincide
    (lambda_rho = lambda_tA), so both ranks drop at once; when the
    admissible set is a parametrized family, an equality point is located
    by sign bisection along the parameter.
    """
    rng = np.random.default_rng(seed)
    cur = rho.copy()
    terms = []
    guard = 0
    while True:
        guard += 1
        if guard > 4 * m + 4:
            raise SubtractionError("descending subtraction did not terminate")
        r = linalg.numerical_rank(cur, tol)
        red = linalg.hermitize(np.einsum("aman->mn", cur.reshape(2, m, 2, m)), tol)
        ms = linalg.numerical_rank(red, tol)
        if r <= ms:
            break
        rho_ta = _bip_pt(cur, m)
        pinv_r = linalg.pinv_psd(cur, tol)
        pinv_a = linalg.pinv_psd(rho_ta, tol)

        def lam_pair(e, f):
            e = e / np.linalg.norm(e)
            f = f / np.linalg.norm(f)
            v = _bip_kron(e, f)
            va = _bip_kron(e.conj(), f)
            if (linalg.kernel_projection_norm(cur, v, tol) > 1e-7
                    or linalg.kernel_projection_norm(rho_ta, va, tol) > 1e-7):
                return None
            qr = np.real(np.vdot(v, pinv_r @ v))
            qa = np.real(np.vdot(va, pinv_a @ va))
            if qr <= 0:
                return None
            return 1.0 / qr, (1.0 / qa if qa > 0 else np.inf), e, f

        cands, resolver, mode = _bip_admissible_candidates(cur, rho_ta, m, tol, rng)
        scored = []
        for e, f, alpha, chart in cands:
            got = lam_pair(e, f)
            if got is not None:
                scored.append(got + (alpha, chart))
        if not scored:
            raise SubtractionError("no admissible product vector for the descent")
        equal = [s for s in scored if abs(s[0] - s[1]) <= 1e-11 * s[0]]
        choice = None
        if equal:
            choice = max(equal, key=lambda s: s[0])[:4]
        else:
            neg = [s for s in scored if s[0] < s[1]]
            pos = [s for s in scored if s[0] >= s[1]]
            if neg and pos and mode == "free":
                lo = max(neg, key=lambda s: s[0])
                hi = max(pos, key=lambda s: min(s[0], s[1]))

                def on_path(t):
                    e = (1 - t) * lo[2] + t * hi[2]
                    f = (1 - t) * lo[3] + t * hi[3]
                    if np.linalg.norm(e) < 1e-8 or np.linalg.norm(f) < 1e-8:
                        return None
                    return lam_pair(e, f)

                t0, t1 = 0.0, 1.0
                for _ in range(60):
                    sc = on_path((t0 + t1) / 2)
                    if sc is None:
                        break
                    if sc[0] < sc[1]:
                        t0 = (t0 + t1) / 2
                    else:
                        t1 = (t0 + t1) / 2
                sc = on_path(t0)
                if sc is not None and abs(sc[0] - sc[1]) <= 1e-9 * sc[0]:
                    choice = sc[:4]
            elif neg and pos and mode == "family":
                lo = max(neg, key=lambda s: s[0])
                hi = max(pos, key=lambda s: min(s[0], s[1]))
                if lo[5] == hi[5]:  # same chart: bisect along the parameter
                    a0, a1, chart = lo[4], hi[4], lo[5]
                    for _ in range(60):
                        amid = (a0 + a1) / 2
                        got = resolver(amid, chart)
                        sc = lam_pair(*got) if got is not None else None
                        if sc is None:
                            break
                        if sc[0] < sc[1]:
                            a0 = amid
                        else:
                            a1 = amid
                    got = resolver(a0, chart)
                    sc = lam_pair(*got) if got is not None else None
                    if sc is not None and abs(sc[0] - sc[1]) <= 1e-9 * sc[0]:
                        choice = sc[:4]
            if choice is None:
                if neg:
                    choice = max(neg, key=lambda s: s[0])[:4]
                else:
                    choice = max(pos, key=lambda s: min(s[0], s[1]))[:4]
        lam_r, lam_a, e, f = choice
        lam = min(lam_r, lam_a)
        v = _bip_kron(e, f)
        cur = cur - lam * np.outer(v, v.conj())
        cur = (cur + dagger(cur)) / 2
        if np.linalg.eigvalsh(cur)[0] < -tol.psd_abs * max(1.0, np.linalg.norm(cur)):
            raise SubtractionError("descent lost positivity")
        if np.linalg.eigvalsh(_bip_pt(cur, m))[0] < -tol.psd_abs * max(1.0, np.linalg.norm(cur)):
            raise SubtractionError("descent lost the PPT property")
        terms.append((float(lam), e, f))
    return cur, terms


def bipartite_rank_n_decompose(rho, split_dims, tol: Tolerance = DEFAULT_TOL,
                               seed: int = 0):
    """Product decomposition of a PPT 2 x M state of rank M.

    Supported states take the unique Theorem-1 route (filter, extract the
    normal operator, eigendecompose); states whose M-side support is smaller
    than their rank are compressed and descended by subtraction first.
    Returns a list of (weight, e, b) with unit-norm factors.
    """
    rho = linalg.hermitize(np.asarray(rho, dtype=complex), tol)
    two, m = split_dims
    if two != 2 or rho.shape != (2 * m, 2 * m):
        raise DimensionError(f"split_dims {split_dims} does not match shape {rho.shape}")
    if np.linalg.eigvalsh(rho)[0] < -tol.psd_abs * max(1.0, np.linalg.norm(rho)):
        raise NotPPT("input is not PSD")
    if np.linalg.eigvalsh(_bip_pt(rho, m))[0] < -tol.psd_abs * max(1.0, np.linalg.norm(rho)):
        raise NotPPT("partial transpose on the qubit side is not PSD")
    r = linalg.numerical_rank(rho, tol)

    # compress the M-side support
    red_m = linalg.hermitize(np.einsum("aman->mn", rho.reshape(2, m, 2, m)), tol)
    w, vv = np.linalg.eigh(red_m)
    cut = tol.rank_rel * max(abs(w[-1]), 1e-300) * m
    sm = vv[:, w > cut]
    mp = sm.shape[1]
    iso = np.kron(np.eye(2), sm)
    rho_c = dagger(iso) @ rho @ iso

    # qubit-side support of dimension 1: rho = P_e (x) sigma
    red_q = linalg.hermitize(np.einsum("ambm->ab", rho.reshape(2, m, 2, m)), tol)
    wq, vq = np.linalg.eigh(red_q)
    if wq[0] <= tol.rank_rel * abs(wq[-1]) * 2:
        e = vq[:, 1]
        sigma = np.einsum("a,ambn,b->mn", e.conj(), rho.reshape(2, m, 2, m), e)
        ws, vs = np.linalg.eigh(linalg.hermitize(sigma, tol))
        out = []
        for i in range(m):
            if ws[i] > tol.rank_rel * max(abs(ws[-1]), 1e-300) * m:
                out.append((float(ws[i]), e, vs[:, i]))
        return out

    if r < mp or r > 2 * mp:
        raise RankMismatch(f"rank {r} incompatible with m-side support {mp}")
    terms = []  # (weight, e, b) with b already embedded in the original M dims
    if r > mp:
        rho_c, sub_terms = _bip_descending(rho_c, mp, tol, seed=seed)
        terms.extend((wgt, e, sm @ b) for wgt, e, b in sub_terms)
        red2 = linalg.hermitize(np.einsum("aman->mn", rho_c.reshape(2, mp, 2, mp)), tol)
        w2, v2 = np.linalg.eigh(red2)
        cut2 = tol.rank_rel * max(abs(w2[-1]), 1e-300) * mp
        s2 = v2[:, w2 > cut2]
        if s2.shape[1] < mp:
            sm = sm @ s2
            mp = s2.shape[1]
            iso2 = np.kron(np.eye(2), s2)
            rho_c = dagger(iso2) @ rho_c @ iso2
    if linalg.numerical_rank(rho_c, tol) > 0:
        terms.extend((wgt, e, sm @ b)
                     for wgt, e, b in _bip_supported(rho_c, mp, tol, seed=seed))
    out = []
    for wgt, e, b in terms:
        out.append((float(wgt), e / np.linalg.norm(e), b / np.linalg.norm(b)))
    # verify the reconstruction
    rec = sum(wgt * np.outer(_bip_kron(e, b), _bip_kron(e, b).conj()) for wgt, e, b in out)
    if np.linalg.norm(rec - rho) > 10 * tol.residual * max(1.0, np.linalg.norm(rho)):
        raise SubtractionError("bipartite decomposition failed to reconstruct the input")
    return out


# ---------------------------------------------------------------------------
# three-qubit kernel product vectors (quadratic route)
# ---------------------------------------------------------------------------

def _quadratic_det(m1, m0):
    """Coefficients (c2, c1, c0) of det(alpha*m1 + m0) for 2 x 2 blocks."""
    c2 = m1[0, 0] * m1[1, 1] - m1[0, 1] * m1[1, 0]
    c1 = (m1[0, 0] * m0[1, 1] + m0[0, 0] * m1[1, 1]
          - m1[0, 1] * m0[1, 0] - m0[0, 1] * m1[1, 0])
    c0 = m0[0, 0] * m0[1, 1] - m0[0, 1] * m0[1, 0]
    return c2, c1, c0


def _solve_fg_pair(w0, w1, scale):
    """Solve (f (x) g) against two row tensors W_i[b, c]: f, g candidates.

    w0, w1 have shape (2, 2): W_i[b, c];  the condition is
    sum_b f_b W_i[b, :] g = 0 for i = 0, 1.  Returns a list of (f, g)
    together with a degeneracy flag per chart.
    """
    out = []
    degenerate = True
    for chart in (0, 1):
        m1 = np.array([w0[chart], w1[chart]])          # coefficient of alpha
        m0 = np.array([w0[1 - chart], w1[1 - chart]])  # constant part
        c2, c1, c0 = _quadratic_det(m1, m0)
        mag = max(abs(c2), abs(c1), abs(c0))
        if mag <= 1e-14 * max(scale, 1.0):
            continue  # identically zero in this chart
        degenerate = False
        roots = np.roots([c2, c1, c0]) if abs(c2) > 1e-13 * mag else (
            np.roots([c1, c0]) if abs(c1) > 1e-13 * mag else [])
        for alpha in roots:
            if not np.isfinite(alpha):
                continue
            f = np.zeros(2, dtype=complex)
            f[chart], f[1 - chart] = alpha, 1.0
            mm = alpha * m1 + m0
            _, s, vh = np.linalg.svd(mm)
            g = vh[-1].conj()
            out.append((f / np.linalg.norm(f), g))
    return out, degenerate


def kernel_product_vector(state: TripartiteState, seed: int = 0) -> ProductVector:
    """Product vector in the kernel of a rank-2 or rank-3 (2,2,2) PPT state.

    Rank 2: fix a random |e>, demand orthogonality to the two range spanners;
    the vanishing 2 x 2 determinant is a quadratic in the chart parameter.
    Rank 3: fix |e> orthogonal to one Alice factor of the A-(BC) rank-3
    decomposition and solve against the other two BC factors.
    """
    tol = state.tol
    if state.dims != (2, 2, 2):
        raise DimensionError("kernel_product_vector requires dims (2,2,2)")
    r = state.rank
    if r not in (2, 3):
        raise RankMismatch(f"rank must be 2 or 3, got {r}")
    rng = np.random.default_rng(seed)
    rho = state.rho

    def residual(e, f, g):
        return float(np.linalg.norm(rho @ np.kron(np.kron(e, f), g)))

    best = None
    if r == 2:
        psis = linalg.range_basis(rho, tol)
        tens = [p.reshape(2, 2, 2) for p in psis]
        for attempt in range(16):
            e = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            e = e / np.linalg.norm(e)
            # rows: <psi_i|e,f,g> = sum_{b,c} f_b W_i[b,c] g_c
            ws = [np.einsum("abc,a->bc", p.conj(), e) for p in tens]
            pairs, degenerate = _solve_fg_pair(ws[0], ws[1], np.linalg.norm(rho))
            for f, g in pairs:
                res = residual(e, f, g)
                if best is None or res < best[0]:
                    best = (res, e, f, g, True)
            if best is not None and best[0] <= 1e-8:
                return ProductVector.from_factors(best[1], best[2], best[3])
            if degenerate:
                # solution continuum: report a sampled member if one checks out
                f = rng.standard_normal(2) + 1j * rng.standard_normal(2)
                f = f / np.linalg.norm(f)
                mm = np.array([np.einsum("b,bc->c", f, w) for w in ws])
                _, s, vh = np.linalg.svd(mm)
                g = vh[-1].conj()
                res = residual(e, f, g)
                if res <= 1e-8:
                    return ProductVector.from_factors(e, f, g, isolated=False)
        if best is not None and best[0] <= 1e-7:
            res, e, f, g, _ = best
            return ProductVector.from_factors(e, f, g)
        raise DegenerateSystem("no kernel product vector found at rank 2",
                               representative=None)

    # rank 3: A-(BC) decomposition, then the Corollary-2 construction
    terms = bipartite_rank_n_decompose(rho, (2, 4), tol, seed=seed)
    if len(terms) != 3:
        raise RankMismatch(f"A-(BC) decomposition returned {len(terms)} terms")
    for k in range(3):
        e = orth2(terms[k][1])
        others = [terms[j][2].reshape(2, 2) for j in range(3) if j != k]
        ws = [o.conj() for o in others]  # <psi_i|f,g> = sum f_b W_i[b,c] g_c
        pairs, degenerate = _solve_fg_pair(ws[0], ws[1], np.linalg.norm(rho))
        for f, g in pairs:
            res = residual(e, f, g)
            if best is None or res < best[0]:
                best = (res, e, f, g)
        if best is not None and best[0] <= 1e-8:
            break
    if best is not None and best[0] <= 1e-7:
        res, e, f, g = best
        return ProductVector.from_factors(e, f, g)
    raise DegenerateSystem("no kernel product vector found at rank 3",
                           representative=None)


# ---------------------------------------------------------------------------
# projector subtraction
# ---------------------------------------------------------------------------

_PARTITION_KEY = {"A": "ta", "B": "tb", "AB": "tab"}


def subtract_product(state: TripartiteState, vector: ProductVector,
                     partitions=("A", "B", "AB"), report=None) -> TripartiteState:
    """Subtract lambda |v><v| with lambda = 1/<v|rho^-1|v> (pseudo-inverse).

    The vector must lie in R(rho) and its partial conjugates in the ranges of
    the partial transposes named by ``partitions``; the result is PSD with
    rank reduced by one and keeps PPT for those partitions.  PPT losses on
    other partitions are recorded in ``report`` when a dict is passed.
    """
    tol = state.tol
    v = vector.full()
    if linalg.kernel_projection_norm(state.rho, v, tol) > 10 * tol.residual:
        raise RangeMembershipError("vector has kernel overlap above tolerance")
    for p in partitions:
        key = _PARTITION_KEY[p]
        vc = vector.conjugated(set(p))
        if linalg.kernel_projection_norm(state.transpose(key), vc, tol) > 10 * tol.residual:
            raise RangeMembershipError(f"partial conjugate not in R(rho^t{p})")
    q = float(np.real(np.vdot(v, linalg.pinv_psd(state.rho, tol) @ v)))
    if q <= 0:
        raise SubtractionError("nonpositive curvature <v|rho^+|v>")
    lam = 1.0 / q
    out = state.rho - lam * np.outer(v, v.conj())
    new = TripartiteState(out, state.dims, tol, unit_trace=False, trace_atol=np.inf)
    # rank of the remainder at the scale of the input (the remainder may vanish)
    s = np.linalg.svd(out, compute_uv=False)
    scale = np.linalg.svd(state.rho, compute_uv=False)[0]
    new_rank = int(np.sum(s > tol.rank_rel * scale * state.dim))
    if new_rank != state.rank - 1:
        raise SubtractionError(f"rank did not drop by one ({state.rank} -> {new_rank})")
    rep = new.ppt_report()
    for p in partitions:
        if not rep[_PARTITION_KEY[p]]["psd"]:
            raise SubtractionError(f"PPT lost for required partition {p}")
    if report is not None:
        report["lambda"] = lam
        report["ppt"] = rep
    return new


# ---------------------------------------------------------------------------
# three-qubit rank-2 and rank-3 separable decompositions
# ---------------------------------------------------------------------------

def _role_views(state: TripartiteState, pv: ProductVector):
    """Permute which party carries the hatted factor of the subtraction.

    Yields (permuted state, permuted kernel vector, factor un-permutation);
    running the A-role logic on each view realizes the B- and C-role
    subtractions of the proofs.
    """
    yield state, pv, lambda e, f, g: (e, f, g)
    yield (state.permute_ab(),
           ProductVector.from_factors(pv.f, pv.e, pv.g),
           lambda e, f, g: (f, e, g))
    if state.n == 2:
        yield (state.permute_ab().permute_bc().permute_ab(),
               ProductVector.from_factors(pv.g, pv.f, pv.e),
               lambda e, f, g: (g, f, e))


def _rank2_once(sigma: TripartiteState, pv: ProductVector):
    tol = sigma.tol
    rho = sigma.rho
    ehat = orth2(pv.e)
    w = rho @ np.kron(np.kron(ehat, pv.f), pv.g)
    nw = np.linalg.norm(w)
    if nw <= 1e-10:
        return None
    psi = np.einsum("a,abc->bc", ehat.conj(), w.reshape(2, 2, 2)).ravel()
    if np.linalg.norm(w - np.kron(ehat, psi)) > 1e-7 * nw:
        return None
    v1 = np.kron(ehat, psi / np.linalg.norm(psi))
    q = float(np.real(np.vdot(v1, linalg.pinv_psd(rho, tol) @ v1)))
    if q <= 0:
        return None
    lam = 1.0 / q
    rem = rho - lam * np.outer(v1, v1.conj())
    rem = (rem + dagger(rem)) / 2
    wr, vr = np.linalg.eigh(rem)
    if wr[-1] <= 0 or np.linalg.norm(rem - wr[-1] * np.outer(vr[:, -1], vr[:, -1].conj())) \
            > 1e-7 * max(1.0, np.linalg.norm(rem)):
        return None
    chi = vr[:, -1]
    mu = float(wr[-1])
    fg = schmidt_split(psi, (2, 2))
    efg = factor_product3(chi, (2, 2, 2))
    if fg is None or efg is None:
        return None
    terms = [(lam, (ehat, fg[0], fg[1])), (mu, efg)]
    return terms


def decompose_rank2_3qubit(state: TripartiteState, seed: int = 0) -> Decomposition:
    """Two-term product decomposition of a rank-2 PPT three-qubit state."""
    tol = state.tol
    if state.dims != (2, 2, 2):
        raise DimensionError("requires dims (2,2,2)")
    if state.rank != 2:
        raise RankMismatch(f"rank must be 2, got {state.rank}")
    if not state.is_ppt():
        raise NotPPT("requires PPT with respect to all partitions")
    for attempt in range(3):
        pv0 = kernel_product_vector(state, seed=seed + 17 * attempt)
        for view, pv, undo in _role_views(state, pv0):
            got = _rank2_once(view, pv)
            if got is None:
                continue
            weights = [t[0] for t in got]
            pvs = [ProductVector.from_factors(*undo(*t[1])) for t in got]
            dec = Decomposition(weights, pvs)
            if dec.reconstruction_error(state.rho / state.trace) <= 10 * tol.residual:
                return dec
    raise FactorNotProduct("rank-2 procedure failed: state is not PPT-separable "
                           "of the assumed form")


def _rank3_direct(sigma: TripartiteState, pv: ProductVector, seed):
    """Hatted-A subtraction, then the rank-2 remainder split over two slots."""
    tol = sigma.tol
    rho = sigma.rho
    e, f, g = pv.e, pv.f, pv.g
    ehat, fhat, ghat = orth2(e), orth2(f), orth2(g)

    w = rho @ np.kron(np.kron(ehat, f), g)
    if np.linalg.norm(w) <= 1e-10:
        return None
    psi_bc = np.einsum("a,abc->bc", ehat.conj(), w.reshape(2, 2, 2)).ravel()
    if np.linalg.norm(w - np.kron(ehat, psi_bc)) > 1e-7 * np.linalg.norm(w):
        return None
    v0 = np.kron(ehat, psi_bc / np.linalg.norm(psi_bc))
    q = float(np.real(np.vdot(v0, linalg.pinv_psd(rho, tol) @ v0)))
    if q <= 0:
        return None
    lam0 = 1.0 / q
    rem = rho - lam0 * np.outer(v0, v0.conj())
    rem = (rem + dagger(rem)) / 2
    if np.linalg.eigvalsh(rem)[0] < -tol.psd_abs * max(1.0, np.linalg.norm(rem)):
        return None
    if linalg.numerical_rank(rem, tol) != 2:
        return None

    ub = rho @ np.kron(np.kron(e, fhat), g)
    uc = rho @ np.kron(np.kron(e, f), ghat)
    tb = ub.reshape(2, 2, 2)
    psi_ac = np.einsum("b,abc->ac", fhat.conj(), tb).ravel()
    tc = uc.reshape(2, 2, 2)
    psi_ab = np.einsum("c,abc->ab", ghat.conj(), tc).ravel()
    if (np.linalg.norm(ub - np.einsum("ac,b->abc", psi_ac.reshape(2, 2), fhat).ravel())
            > 1e-6 * max(np.linalg.norm(ub), 1e-30)):
        return None
    if (np.linalg.norm(uc - np.einsum("ab,c->abc", psi_ab.reshape(2, 2), ghat).ravel())
            > 1e-6 * max(np.linalg.norm(uc), 1e-30)):
        return None
    v1 = np.einsum("ac,b->abc", psi_ac.reshape(2, 2), fhat).ravel()
    v2 = np.einsum("ab,c->abc", psi_ab.reshape(2, 2), ghat).ravel()
    v1 = v1 / np.linalg.norm(v1)
    v2 = v2 / np.linalg.norm(v2)
    vv = np.column_stack([v1, v2])
    gram = dagger(vv) @ vv
    if abs(np.linalg.det(gram)) < 1e-8:
        return None
    pinv = np.linalg.inv(gram) @ dagger(vv)
    c = pinv @ rem @ dagger(pinv)
    if np.linalg.norm(rem - vv @ c @ dagger(vv)) > 1e-6 * max(1.0, np.linalg.norm(rem)):
        return None
    if abs(c[0, 1]) > 1e-6 * max(1.0, abs(c[0, 0]), abs(c[1, 1])):
        return None
    lam1, lam2 = float(np.real(c[0, 0])), float(np.real(c[1, 1]))
    if lam1 <= 0 or lam2 <= 0:
        return None
    fg = schmidt_split(psi_bc, (2, 2))
    ac = schmidt_split(psi_ac, (2, 2))
    ab = schmidt_split(psi_ab, (2, 2))
    if fg is None or ac is None or ab is None:
        return None
    terms = [(lam0, (ehat, fg[0], fg[1])),
             (lam1, (ac[0], fhat, ac[1])),
             (lam2, (ab[0], ab[1], ghat))]
    return terms


def _rank3_sigma_route(sigma: TripartiteState, pv: ProductVector, seed):
    """Fallback: remainder collapses onto a fixed Bob factor times a 2 x 2 state."""
    tol = sigma.tol
    rho = sigma.rho
    e, f, g = pv.e, pv.f, pv.g
    ehat, fhat = orth2(e), orth2(f)
    w = rho @ np.kron(np.kron(ehat, f), g)
    if np.linalg.norm(w) <= 1e-10:
        return None
    psi_bc = np.einsum("a,abc->bc", ehat.conj(), w.reshape(2, 2, 2)).ravel()
    if np.linalg.norm(w - np.kron(ehat, psi_bc)) > 1e-7 * np.linalg.norm(w):
        return None
    v0 = np.kron(ehat, psi_bc / np.linalg.norm(psi_bc))
    q = float(np.real(np.vdot(v0, linalg.pinv_psd(rho, tol) @ v0)))
    if q <= 0:
        return None
    lam0 = 1.0 / q
    rem = rho - lam0 * np.outer(v0, v0.conj())
    rem = (rem + dagger(rem)) / 2
    # remainder should factor as |fhat><fhat|_B (x) sigma_AC
    t = rem.reshape(2, 2, 2, 2, 2, 2)
    sig_ac = np.einsum("b,abcdef,e->acdf", fhat.conj(), t, fhat).reshape(4, 4)
    rebuilt = np.einsum("acdf,b,e->abcdef", sig_ac.reshape(2, 2, 2, 2),
                        fhat, fhat.conj()).reshape(8, 8)
    if np.linalg.norm(rem - rebuilt) > 1e-6 * max(1.0, np.linalg.norm(rem)):
        return None
    try:
        pairs = bipartite_rank_n_decompose(sig_ac, (2, 2), tol, seed=seed)
    except (NotPPT, RankMismatch, CommutatorError, BasisSearchExhausted, SubtractionError):
        return None
    fg = schmidt_split(psi_bc, (2, 2))
    if fg is None:
        return None
    terms = [(lam0, (ehat, fg[0], fg[1]))]
    terms.extend((wgt, (a, fhat, cvec)) for wgt, a, cvec in pairs)
    return terms


def decompose_rank3_3qubit(state: TripartiteState, seed: int = 0) -> Decomposition:
    """Three-term product decomposition of a rank-3 PPT three-qubit state."""
    tol = state.tol
    if state.dims != (2, 2, 2):
        raise DimensionError("requires dims (2,2,2)")
    if state.rank != 3:
        raise RankMismatch(f"rank must be 3, got {state.rank}")
    if not state.is_ppt():
        raise NotPPT("requires PPT with respect to all partitions")
    for attempt in range(3):
        sd = seed + 23 * attempt
        pv0 = kernel_product_vector(state, seed=sd)
        for view, pv, undo in _role_views(state, pv0):
            for routine in (_rank3_direct, _rank3_sigma_route):
                got = routine(view, pv, sd)
                if got is None:
                    continue
                weights = [t[0] for t in got]
                pvs = [ProductVector.from_factors(*undo(*t[1])) for t in got]
                dec = Decomposition(weights, pvs)
                if dec.reconstruction_error(state.rho / state.trace) <= 10 * tol.residual:
                    return dec
    raise FactorNotProduct("rank-3 procedure failed: state is not PPT-separable "
                           "of the assumed form")
