"""Search for product vectors compatible with a state and its partial transposes.

A product vector (alpha|0>+|1>) (x) (beta|0>+|1>) (x) |g> lies in V[rho] iff
it is orthogonal to K(rho) and its partial conjugates to the kernels of the
partial transposes; stacking those conditions gives the constraint matrix
A(alpha, beta; alpha*, beta*) acting on |g>.  Rank deficiency of A is
expressed through vanishing N x N minors, bivariate polynomials in
(beta, beta*) with the alpha dependence organized in three shapes (a
quadratic in alpha, a quadratic in alpha*, and bilinear forms).  The solver
eliminates alpha by cross-multiplication, treats beta* as an independent
variable, eliminates it by a Sylvester resultant, polishes the surviving
roots by damped Gauss-Newton on the full system, and keeps only candidates
that satisfy every minor.

A seeded grid scan over both affine charts with Gauss-Newton refinement
serves as the solver for N >= 3 and as an independent cross-check lane.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import linalg, scan
from .bipoly import BiPolynomial, Poly4, det_poly4, solve_pair
from .errors import ContinuumFamily, NumericalBreakdown, ThresholdNotMet
from .linalg import Tolerance
from .states import ProductVector, TripartiteState

FAMILIES = ("rho", "ta", "tb", "tab")
CONJ_FLAGS = {"rho": (False, False), "ta": (True, False),
              "tb": (False, True), "tab": (True, True)}


# ---------------------------------------------------------------------------
# kernel data
# ---------------------------------------------------------------------------

@dataclass
class KernelData:
    """Kernels of rho and its partial transposes, split into Charlie components.

    components[fam] has shape (k_fam, 4, N): index p = 2a + b selects the
    |ab> component of each kernel vector.
    """

    n: int
    components: dict
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def counts(self):
        return {fam: self.components[fam].shape[0] for fam in FAMILIES}

    @property
    def k_tot(self):
        return sum(self.counts.values())

    def rows(self, chart=(0, 0)):
        """Per-row (components (4,N), conj_a, conj_b), chart-swapped, unit norm."""
        out = []
        for fam in FAMILIES:
            ca, cb = CONJ_FLAGS[fam]
            for comp in self.components[fam]:
                c = _chart_swap(comp, chart)
                nrm = np.linalg.norm(c)
                out.append((c / nrm if nrm > 0 else c, ca, cb))
        return out

    def chart_arrays(self, chart=(0, 0)):
        """(C, ca, cb): C[k, p] the conjugated unit-norm components per row."""
        key = tuple(chart)
        if key not in self._cache:
            comps, cas, cbs = [], [], []
            for comp, ca, cb in self.rows(chart):
                comps.append(comp.conj())
                cas.append(ca)
                cbs.append(cb)
            if comps:
                c = np.array(comps)
            else:
                c = np.zeros((0, 4, self.n), dtype=complex)
            self._cache[key] = (c, np.array(cas, dtype=bool),
                                np.array(cbs, dtype=bool))
        return self._cache[key]

    def gram_tensors(self, chart=(0, 0)):
        """(T, flags) for the scan lanes: T[f,p,q,a,b] from kernel components."""
        ts, flags = [], []
        for fam in FAMILIES:
            comps = self.components[fam]
            if comps.shape[0] == 0:
                continue
            swapped = np.array([_chart_swap(c, chart) for c in comps])
            nrm = np.linalg.norm(swapped, axis=(1, 2), keepdims=True)
            swapped = swapped / np.where(nrm > 0, nrm, 1.0)
            ts.append(np.einsum("ipa,iqb->pqab", swapped, swapped.conj()))
            flags.append(CONJ_FLAGS[fam])
        if not ts:
            return np.zeros((0, 4, 4, self.n, self.n), dtype=complex), \
                np.zeros((0, 2), dtype=np.uint8)
        return np.array(ts), np.array(flags, dtype=np.uint8)


def _chart_swap(comp, chart):
    """Swap the |0>/|1> roles on A and/or B in the (4, N) component stack."""
    c = comp
    if chart[0]:
        c = c[[2, 3, 0, 1], :]
    if chart[1]:
        c = c[[1, 0, 3, 2], :]
    return c


def assemble_constraints(state: TripartiteState, tol: Tolerance = None) -> KernelData:
    """Kernels of all four operators with the |ab> component split."""
    n = state.n
    comps = {}
    for fam in FAMILIES:
        ker = state.kernel(fam)
        if ker:
            comps[fam] = np.array(ker).reshape(len(ker), 2, 2, n).reshape(len(ker), 4, n)
        else:
            comps[fam] = np.zeros((0, 4, n), dtype=complex)
    return KernelData(n=n, components=comps)


def evaluate_A(kd: KernelData, alpha, beta, chart=(0, 0)) -> np.ndarray:
    """The (k_tot x N) constraint matrix at finite chart parameters."""
    c, ca, cb = kd.chart_arrays(chart)
    if c.shape[0] == 0:
        return np.zeros((0, kd.n), dtype=complex)
    x = np.where(ca, np.conj(alpha), alpha)
    y = np.where(cb, np.conj(beta), beta)
    return ((x * y)[:, None] * c[:, 0] + x[:, None] * c[:, 1]
            + y[:, None] * c[:, 2] + c[:, 3])


# ---------------------------------------------------------------------------
# minor systems
# ---------------------------------------------------------------------------

def _row_poly4(comp, ca, cb):
    """Symbolic row: entries Poly4 in (alpha, alpha*, beta, beta*)."""
    ia = (0, 1) if ca else (1, 0)
    ib = (0, 1) if cb else (1, 0)
    keys = [(ia[0], ia[1], ib[0], ib[1]),  # x*y
            (ia[0], ia[1], 0, 0),          # x
            (0, 0, ib[0], ib[1]),          # y
            (0, 0, 0, 0)]                  # 1
    out = []
    for j in range(comp.shape[1]):
        terms = {}
        for p, key in enumerate(keys):
            v = comp[p, j].conjugate()
            if v != 0:
                terms[key] = terms.get(key, 0.0) + v
        out.append(Poly4(terms))
    return out


@dataclass
class MinorEquation:
    """One vanishing N x N minor: alpha-structured bivariate coefficients.

    coeffs maps (i, j) = powers of (alpha, alpha*) to a BiPolynomial in
    (beta, beta*).  kind: 'P' quadratic in alpha, 'R' quadratic in alpha*,
    'Q' bilinear, 'L' lower order.
    """

    coeffs: dict
    rows: tuple
    conjugate_of: int | None = None

    @property
    def kind(self):
        keys = set(self.coeffs)
        if (2, 0) in keys:
            return "P"
        if (0, 2) in keys:
            return "R"
        if (1, 1) in keys:
            return "Q"
        return "L"

    def conj(self):
        return MinorEquation(
            coeffs={(j, i): p.conj_swap() for (i, j), p in self.coeffs.items()},
            rows=self.rows, conjugate_of=-1)

    def eval(self, alpha, beta):
        ac, bc = np.conj(alpha), np.conj(beta)
        return sum(alpha**i * ac**j * p.eval(beta, bc)
                   for (i, j), p in self.coeffs.items())

    def eval_scale(self, alpha, beta):
        a, b = abs(alpha), abs(beta)
        return sum(a**(i + j) * p.eval_scale(b, b)
                   for (i, j), p in self.coeffs.items()) + 1e-30

    def rel_residual(self, alpha, beta):
        return abs(self.eval(alpha, beta)) / self.eval_scale(alpha, beta)

    def norm(self):
        return max(p.norm for p in self.coeffs.values())

    def partials(self, alpha, beta):
        """(d/dalpha, d/dalpha*, d/dbeta, d/dbeta*) at the point."""
        ac, bc = np.conj(alpha), np.conj(beta)
        da = db = dac = dbc = 0.0 + 0.0j
        for (i, j), p in self.coeffs.items():
            base = p.eval(beta, bc)
            if i:
                da += i * alpha**(i - 1) * ac**j * base
            if j:
                dac += j * alpha**i * ac**(j - 1) * base
            db += alpha**i * ac**j * p.dz().eval(beta, bc)
            dbc += alpha**i * ac**j * p.dw().eval(beta, bc)
        return da, dac, db, dbc


@dataclass
class MinorSystem:
    """Minor equations of one chart: pivot scheme plus auxiliary pairs."""

    n: int
    chart: tuple
    k_tot: int
    equations: list
    auxiliary: list = field(default_factory=list)

    def all_equations(self):
        return self.equations + self.auxiliary


def _minor_from_rows(sym_rows, sel):
    mat = [sym_rows[i] for i in sel]
    det = det_poly4(mat)
    coeffs = det.alpha_structure()
    return MinorEquation(coeffs=coeffs, rows=tuple(sel)) if coeffs else None


def build_minor_system(kd: KernelData, chart=(0, 0), pivot=None) -> MinorSystem:
    """Vanishing-minor equations for rank(A) < N on the given chart.

    The scheme combines the N-1 most independent rows (greedy QR pivoting)
    with each remaining row: k_tot - N + 1 equations.  For N = 2 every
    remaining row pair is kept as an auxiliary equation (the six-minor
    picture of the maximal-edge case).
    """
    import scipy.linalg as sla

    n = kd.n
    rows = kd.rows(chart)
    k_tot = len(rows)
    if k_tot <= n:
        raise ThresholdNotMet(
            f"k_tot = {k_tot} <= N = {n}: no minor constraints "
            "(use the subtraction route)")
    sym_rows = [_row_poly4(comp, ca, cb) for comp, ca, cb in rows]
    if pivot is None:
        proxy = np.array([comp.ravel() for comp, _, _ in rows])
        _, _, piv = sla.qr(proxy.T, pivoting=True)
        pivot = tuple(sorted(piv[: n - 1]))
    pivot = tuple(pivot)
    equations = []
    for r in range(k_tot):
        if r in pivot:
            continue
        eq = _minor_from_rows(sym_rows, pivot + (r,))
        if eq is not None:
            equations.append(eq)
    auxiliary = []
    if n == 2 and k_tot <= 26:
        scheme = {tuple(sorted(p + (r,))) for p in [pivot]
                  for r in range(k_tot) if r not in pivot}
        for sel in itertools.combinations(range(k_tot), n):
            if tuple(sorted(sel)) in scheme:
                continue
            eq = _minor_from_rows(sym_rows, sel)
            if eq is not None and eq.norm() > 1e-13:
                auxiliary.append(eq)
    return MinorSystem(n=n, chart=chart, k_tot=k_tot,
                       equations=equations, auxiliary=auxiliary)


# ---------------------------------------------------------------------------
# elimination solver (3-qubit structures)
# ---------------------------------------------------------------------------

@dataclass
class SolveResult:
    solutions: list            # (alpha, beta) pairs
    candidate_count: int       # pairs surviving the two-eliminant residual test
    continuum: bool = False
    representatives: list = field(default_factory=list)
    method: str = "elimination"


def _independent(a: BiPolynomial, b: BiPolynomial, rel=1e-8):
    if a.norm == 0 or b.norm == 0:
        return False
    an, bn = a.c / a.norm, b.c / b.norm
    m = max(an.shape[0], bn.shape[0]), max(an.shape[1], bn.shape[1])
    pa = np.zeros(m, dtype=complex)
    pb = np.zeros(m, dtype=complex)
    pa[:an.shape[0], :an.shape[1]] = an
    pb[:bn.shape[0], :bn.shape[1]] = bn
    # proportional iff the 2 x M stack has rank 1
    stack = np.vstack([pa.ravel(), pb.ravel()])
    s = np.linalg.svd(stack, compute_uv=False)
    return s[1] > rel * s[0]


def _pcoef(eq: MinorEquation, i, j):
    return eq.coeffs.get((i, j), BiPolynomial.zero())


def _alpha_ratio_from_ps(ps):
    """alpha = T1/T2 from two independent alpha-quadratic equations."""
    for ea, eb in itertools.combinations(ps, 2):
        p1, p2, p3 = _pcoef(ea, 2, 0), _pcoef(ea, 1, 0), _pcoef(ea, 0, 0)
        q1, q2, q3 = _pcoef(eb, 2, 0), _pcoef(eb, 1, 0), _pcoef(eb, 0, 0)
        t2 = p2 * q1 - q2 * p1
        t1 = (p3 * q1 - q3 * p1).scale(-1.0)
        if t2.norm > 1e-12 * max(ea.norm(), eb.norm()):
            return t1, t2, (ea, eb)
    return None


def _alpha_ratio_from_qs(qs):
    """alpha = U1/Delta, alpha* = U2/Delta from two bilinear equations."""
    for ea, eb in itertools.combinations(qs, 2):
        q1, q2, q3, q4 = (_pcoef(ea, 1, 1), _pcoef(ea, 1, 0),
                          _pcoef(ea, 0, 1), _pcoef(ea, 0, 0))
        r1, r2, r3, r4 = (_pcoef(eb, 1, 1), _pcoef(eb, 1, 0),
                          _pcoef(eb, 0, 1), _pcoef(eb, 0, 0))
        s1 = r1 * q2 - q1 * r2
        s2 = r1 * q3 - q1 * r3
        s3 = r1 * q4 - q1 * r4
        delta = s1 * s1.conj_swap() - s2 * s2.conj_swap()
        if delta.norm <= 1e-12 * max(ea.norm(), eb.norm()) ** 2:
            continue
        u1 = s2 * s3.conj_swap() - s3 * s1.conj_swap()
        return u1, delta, (ea, eb)
    return None


def _substitute_alpha(eq: MinorEquation, t1, t2):
    """Substitute alpha = t1/t2 (and alpha* = cs(t1)/cs(t2)), clearing the
    per-equation minimal denominator t2^di cs(t2)^dj."""
    di = max(i for i, _ in eq.coeffs)
    dj = max(j for _, j in eq.coeffs)
    t1c, t2c = t1.conj_swap(), t2.conj_swap()

    def powers(p, k):
        out = {0: BiPolynomial.const(1.0)}
        for i in range(1, k + 1):
            out[i] = out[i - 1] * p
        return out

    p1, p2 = powers(t1, di), powers(t2, di)
    q1, q2 = powers(t1c, dj), powers(t2c, dj)
    out = BiPolynomial.zero()
    for (i, j), p in eq.coeffs.items():
        out = out + p * p1[i] * p2[di - i] * q1[j] * q2[dj - j]
    return out


def _solve_elimination(ms: MinorSystem, rng):
    """The alpha-elimination + resultant route; returns SolveResult or None."""
    eqs = list(ms.all_equations())
    conjs = [e.conj() for e in eqs]
    pool = eqs + conjs
    ps = [e for e in pool if e.kind == "P"]
    qs = [e for e in pool if e.kind == "Q"]
    got = _alpha_ratio_from_ps(ps) if len(ps) >= 2 else None
    if got is None:
        got = _alpha_ratio_from_qs(qs) if len(qs) >= 2 else None
    if got is None:
        return None
    t1, t2, used = got
    # substitution targets: the equations used for the ratio (and their
    # conjugates) would share a resultant factor with each other, so they
    # are deferred behind the independent ones
    skip = {id(e) for e in used}
    primary = [e for e in pool if id(e) not in skip and e.norm() > 0]
    backup = [e for e in pool if id(e) in skip]
    elims = []
    for tgt in primary + backup:
        el = _substitute_alpha(tgt, t1, t2)
        if el.norm > 1e-13:
            elims.append(el)
        if len(elims) >= 8:
            break
    pairs = count = None
    degenerate_seen = False
    for a, b in itertools.combinations(elims, 2):
        if not _independent(a, b):
            continue
        got_pairs, got_count, cont = solve_pair(a, b, cand_rel=1e-6)
        if cont:
            degenerate_seen = True
            continue  # singular pencil: try another eliminant pair
        pairs, count = got_pairs, got_count
        break
    if pairs is None:
        if degenerate_seen:
            raise ContinuumFamily("every eliminant pair is degenerate "
                                  "(non-isolated product-vector family)")
        return None
    sols = []
    for z, w in pairs:
        if abs(w - np.conj(z)) > 1e-6 * (1.0 + abs(z)):
            continue
        dv = t2.eval(z, w)
        if abs(dv) < 1e-12 * max(t2.eval_scale(z, w), 1e-30):
            continue
        alpha = t1.eval(z, w) / dv
        sols.append((alpha, z))
    polished = _polish_and_verify(ms, sols)
    if sols and not polished:
        raise NumericalBreakdown("all candidates diverged under refinement")
    return SolveResult(solutions=polished, candidate_count=count)


def _polish_and_verify(ms: MinorSystem, sols, accept=1e-7, dedupe=1e-7):
    eqs = ms.all_equations()
    out = []
    for alpha, beta in sols:
        a, b = _newton_full(eqs, alpha, beta)
        if a is None:
            continue
        worst = max(eq.rel_residual(a, b) for eq in eqs)
        if worst > accept:
            continue
        if all(abs(a - a2) + abs(b - b2) > dedupe * (1 + abs(a2) + abs(b2))
               for a2, b2 in out):
            out.append((a, b))
    return out


def _newton_full(eqs, alpha, beta, iters=50, tol=1e-13):
    """Damped Gauss-Newton on the full minor system over 4 real variables."""
    x = np.array([alpha.real, alpha.imag, beta.real, beta.imag], dtype=float)
    best = (np.inf, None)

    def residuals(a, b):
        vals = np.array([eq.eval(a, b) for eq in eqs])
        scales = np.array([eq.eval_scale(a, b) for eq in eqs])
        return vals, scales

    for _ in range(iters):
        a, b = complex(x[0], x[1]), complex(x[2], x[3])
        if not (np.isfinite(a) and np.isfinite(b)) or abs(a) > 1e8 or abs(b) > 1e8:
            break
        vals, scales = residuals(a, b)
        rel = float(np.max(np.abs(vals) / scales))
        if rel < best[0]:
            best = (rel, (a, b))
        if rel <= tol:
            break
        jac = np.zeros((2 * len(eqs), 4))
        rv = np.zeros(2 * len(eqs))
        for k, eq in enumerate(eqs):
            da, dac, db, dbc = eq.partials(a, b)
            gx = np.array([da + dac, 1j * (da - dac), db + dbc, 1j * (db - dbc)])
            gx = gx / scales[k]
            jac[2 * k] = gx.real
            jac[2 * k + 1] = gx.imag
            rv[2 * k] = (vals[k] / scales[k]).real
            rv[2 * k + 1] = (vals[k] / scales[k]).imag
        try:
            step = np.linalg.lstsq(jac, -rv, rcond=1e-10)[0]
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) < 1e-15:
            break
        x = x + np.clip(step, -0.5, 0.5)
    if best[1] is None or best[0] > 1e-6:
        return None, None
    return best[1]


# ---------------------------------------------------------------------------
# grid scan + Gauss-Newton lane
# ---------------------------------------------------------------------------

def _scan_candidates(kd: KernelData, chart, box=1.26, step=0.18, max_seeds=110,
                     accept=1e-9):
    """Seeded minimization of sigma_min(A) over the chart square.

    Seeds are the 4-D grid local minima of the squared smallest singular
    value (one per basin), refined by Gauss-Newton.
    """
    t, flags = kd.gram_tensors(chart)
    if t.shape[0] == 0:
        return []
    ax = scan.chart_axis(box, step)
    n1 = len(ax)
    grid = (ax[:, None] + 1j * ax[None, :]).ravel()
    vals = scan.min_gram_grid(t, flags, grid, grid)
    v4 = vals.reshape(n1, n1, n1, n1)
    padded = np.pad(v4, 1, constant_values=np.inf)
    core = padded[1:-1, 1:-1, 1:-1, 1:-1]
    is_min = np.ones(v4.shape, dtype=bool)
    for axis in range(4):
        hi = [slice(1, -1)] * 4
        lo = [slice(1, -1)] * 4
        hi[axis] = slice(2, None)
        lo[axis] = slice(0, -2)
        is_min &= core <= padded[tuple(hi)]
        is_min &= core <= padded[tuple(lo)]
    cand_idx = np.flatnonzero(is_min.reshape(len(grid), len(grid)))
    order = np.argsort(vals.reshape(-1)[cand_idx])
    seeds, taken = [], []
    for idx in cand_idx[order]:
        ia, ib = divmod(int(idx), len(grid))
        a, b = grid[ia], grid[ib]
        if any(abs(a - a2) + abs(b - b2) < 0.3 for a2, b2 in taken):
            continue
        taken.append((a, b))
        seeds.append((a, b))
        if len(seeds) >= max_seeds:
            break
    sols = []
    for a0, b0 in seeds:
        got = _gn_refine(kd, chart, a0, b0, accept=accept)
        if got is None:
            continue
        a, b = got
        if all(abs(a - a2) + abs(b - b2) > 1e-7 * (1 + abs(a2) + abs(b2))
               for a2, b2 in sols):
            sols.append((a, b))
    return sols


def _gn_refine(kd: KernelData, chart, alpha, beta, iters=220, accept=1e-9):
    """Gauss-Newton on A(alpha, beta) v with v the smallest singular vector.

    Backtracking on the smallest singular value keeps the iteration a
    descent method, which widens the convergence basins well beyond the
    quadratic region.
    """
    c, ca, cb = kd.chart_arrays(chart)
    kt = c.shape[0]
    x = np.array([alpha.real, alpha.imag, beta.real, beta.imag], dtype=float)
    jac = np.empty((2 * kt, 4))
    rv = np.empty(2 * kt)
    sa = np.where(ca, -1j, 1j)
    sb = np.where(cb, -1j, 1j)

    def smin_rel(y):
        a, b = complex(y[0], y[1]), complex(y[2], y[3])
        xx = np.where(ca, np.conj(a), a)
        yy = np.where(cb, np.conj(b), b)
        amat = ((xx * yy)[:, None] * c[:, 0] + xx[:, None] * c[:, 1]
                + yy[:, None] * c[:, 2] + c[:, 3])
        _, s, vh = np.linalg.svd(amat)
        rel = (s[-1] if len(s) >= kd.n else 0.0) / max(1.0, s[0] if len(s) else 1.0)
        return rel, amat, vh[-1].conj(), (xx, yy)

    rel, amat, v, (xx, yy) = smin_rel(x)
    best = (rel, (complex(x[0], x[1]), complex(x[2], x[3])))
    for _ in range(iters):
        if abs(x[0]) > 50 or abs(x[2]) > 50:
            break
        if rel <= max(accept, 1e-13):
            break
        r = amat @ v
        d_da = (yy[:, None] * c[:, 0] + c[:, 1]) @ v
        d_db = (xx[:, None] * c[:, 0] + c[:, 2]) @ v
        cols = np.stack([d_da, sa * d_da, d_db, sb * d_db], axis=1)
        jac[0::2] = cols.real
        jac[1::2] = cols.imag
        rv[0::2] = r.real
        rv[1::2] = r.imag
        try:
            step = np.linalg.lstsq(jac, -rv, rcond=1e-10)[0]
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) < 1e-15:
            break
        step = np.clip(step, -0.5, 0.5)
        scale = 1.0
        moved = False
        for _ in range(7):
            trial = x + scale * step
            t_rel, t_amat, t_v, t_xy = smin_rel(trial)
            if t_rel < rel:
                x, rel, amat, v, (xx, yy) = trial, t_rel, t_amat, t_v, t_xy
                moved = True
                break
            scale *= 0.5
        if not moved:
            break
        if rel < best[0]:
            best = (rel, (complex(x[0], x[1]), complex(x[2], x[3])))
    if best[1] is None or best[0] > accept:
        return None
    return best[1]


def grid_min_singular(kd: KernelData, box=1.05, step=0.05, force_numpy=False):
    """Dense-grid lower bound oracle: min over charts of sigma_min(A).

    The two affine charts per party cover the whole parameter manifold, so a
    strictly positive minimum certifies that V[rho] is empty at grid
    resolution.  Returns (min sigma, argmin info).
    """
    ax = scan.chart_axis(box, step)
    grid = (ax[:, None] + 1j * ax[None, :]).ravel()
    best = (np.inf, None)
    for chart in ((0, 0), (0, 1), (1, 0), (1, 1)):
        t, flags = kd.gram_tensors(chart)
        if t.shape[0] == 0:
            return 0.0, {"chart": chart, "reason": "no constraints"}
        vals = scan.min_gram_grid(t, flags, grid, grid, force_numpy=force_numpy)
        idx = int(np.argmin(vals))
        ia, ib = divmod(idx, len(grid))
        val = float(np.sqrt(max(vals[ia, ib], 0.0)))
        if val < best[0]:
            best = (val, {"chart": chart, "alpha": grid[ia], "beta": grid[ib]})
    return best


# ---------------------------------------------------------------------------
# the full search
# ---------------------------------------------------------------------------

CHARTS = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass
class VectorSearch:
    """Result of the product-vector search over all charts."""

    vectors: list
    continuum: bool = False
    candidate_counts: dict = field(default_factory=dict)
    method: str = "elimination"

    def __iter__(self):
        return iter(self.vectors)

    def __len__(self):
        return len(self.vectors)


def _extract_g(kd, chart, alpha, beta, accept=1e-7):
    amat = evaluate_A(kd, alpha, beta, chart)
    _, s, vh = np.linalg.svd(amat)
    smax = s[0] if len(s) else 1.0
    gs = []
    for i in range(kd.n):
        sv = s[i] if i < len(s) else 0.0
        if sv <= accept * max(1.0, smax):
            gs.append(vh[i].conj())
    return gs


def _verify_member(state, pv: ProductVector, accept=1e-7):
    for fam, parties in (("rho", ()), ("ta", ("A",)), ("tb", ("B",)),
                         ("tab", ("A", "B"))):
        v = pv.conjugated(parties)
        if linalg.kernel_projection_norm(state.transpose(fam), v, state.tol) > accept:
            return False
    return True


def find_product_vectors(state: TripartiteState, seed: int = 0,
                         scan_step: float = 0.18, use_scan: bool = True,
                         charts=CHARTS) -> VectorSearch:
    """The set V[rho]: product vectors compatible with all four ranges.

    Runs assemble -> build -> solve over the four affine charts; for each
    solution |g> spans the numerical kernel of A.  Below the constraint
    threshold (k_tot <= N) the parameter freedom leaves a continuum and
    sampled representatives are returned instead.
    """
    tol = state.tol
    rng = np.random.default_rng(seed)
    kd = assemble_constraints(state)
    n = kd.n
    found = []
    counts = {}
    continuum = False
    method = "elimination" if n == 2 else "scan"

    if kd.k_tot <= n:
        reps = _freedom_representatives(state, kd, rng)
        return VectorSearch(vectors=reps, continuum=True, method="freedom")

    for chart in charts:
        cands = []
        if n == 2:
            try:
                ms = build_minor_system(kd, chart)
                res = _solve_elimination(ms, rng)
                if res is not None:
                    cands.extend(res.solutions)
                    counts[chart] = res.candidate_count
                else:
                    method = "scan"
            except ContinuumFamily:
                continuum = True
            except NumericalBreakdown:
                method = "scan"
        if use_scan:
            cands.extend(_scan_candidates(kd, chart, step=scan_step))
        for alpha, beta in cands:
            for g in _extract_g(kd, chart, alpha, beta):
                pv = ProductVector.from_chart(chart, alpha, beta, g)
                if _verify_member(state, pv):
                    found.append(pv)
    # dedupe across charts by factor-wise fidelity
    unique = []
    for pv in found:
        if all(pv.fidelity_to(u) < 1.0 - 1e-8 for u in unique):
            unique.append(pv)
    unique.sort(key=_sort_key)
    if continuum:
        reps = unique or _freedom_representatives(state, kd, rng)
        return VectorSearch(vectors=reps, continuum=True,
                            candidate_counts=counts, method=method)
    return VectorSearch(vectors=unique, continuum=False,
                        candidate_counts=counts, method=method)


def _solve_one_coordinate(kd, chart, fixed, which, accept_rel=1e-9,
                          sigma_accept=1e-6):
    """Parameters making A rank deficient with the other coordinate frozen.

    which='alpha': beta is fixed; which='beta': alpha is fixed.  The rows
    become affine in the free parameter or its conjugate, so the vanishing
    minors are bivariate polynomials in (p, p*) solvable by conjugate-pair
    elimination; the search is global in that coordinate (no basins).
    """
    from .bipoly import solve_self_conjugate

    c, ca, cb = kd.chart_arrays(chart)
    if c.shape[0] == 0:
        return []
    n = kd.n
    if which == "alpha":
        conj_flags = ca
        ff = np.where(cb, np.conj(fixed), fixed)
        u = ff[:, None] * c[:, 0] + c[:, 1]
        v = ff[:, None] * c[:, 2] + c[:, 3]
    else:
        conj_flags = cb
        ff = np.where(ca, np.conj(fixed), fixed)
        u = ff[:, None] * c[:, 0] + c[:, 2]
        v = ff[:, None] * c[:, 1] + c[:, 3]
    rows = []
    for i in range(c.shape[0]):
        key = (0, 1, 0, 0) if conj_flags[i] else (1, 0, 0, 0)
        rows.append([Poly4({key: u[i, j], (0, 0, 0, 0): v[i, j]}).trim()
                     for j in range(n)])
    import scipy.linalg as sla
    proxy = np.concatenate([u, v], axis=1)
    _, _, piv = sla.qr(proxy.T, pivoting=True)
    pivot = tuple(sorted(piv[: n - 1]))
    sols = []
    tried = 0
    for r in range(c.shape[0]):
        if r in pivot:
            continue
        tried += 1
        det = det_poly4([rows[i] for i in pivot + (r,)])
        cc = np.zeros((n + 1, n + 1), dtype=complex)
        for (i, j, _, _), val in det.terms.items():
            cc[i, j] = val
        d = BiPolynomial(cc)
        if d.norm == 0.0:
            continue
        got, _ = solve_self_conjugate(d, accept_rel=accept_rel)
        for a in got:
            if all(abs(a - s) > 1e-8 * (1 + abs(s)) for s in sols):
                sols.append(a)
        if len(sols) >= 2 * n + 4 or tried >= 4:
            break
    out = []
    for p in sols:
        a, b = (p, fixed) if which == "alpha" else (fixed, p)
        amat = evaluate_A(kd, a, b, chart)
        s = np.linalg.svd(amat, compute_uv=False)
        if s[-1] <= sigma_accept * max(1.0, s[0]):
            out.append(p)
    return out


def solve_alpha_at_beta(kd: KernelData, chart, beta, **kw):
    return _solve_one_coordinate(kd, chart, beta, "alpha", **kw)


def solve_beta_at_alpha(kd: KernelData, chart, alpha, **kw):
    return _solve_one_coordinate(kd, chart, alpha, "beta", **kw)


def coordinate_refine(kd: KernelData, chart, alpha, beta, accept=1e-9):
    """Alternating global coordinate solves followed by the joint refinement.

    Recovers isolated solutions whose basin the joint descent misses: each
    stage solves one chart coordinate exactly (polynomially) with the other
    frozen, tolerating error in the frozen one, then Gauss-Newton finishes.
    """
    seen = []
    cands = [(alpha, beta)]
    for _ in range(2):
        nxt = []
        for a0, b0 in cands:
            for a in solve_alpha_at_beta(kd, chart, b0, accept_rel=1e-5,
                                         sigma_accept=5e-2):
                nxt.append((a, b0))
            for b in solve_beta_at_alpha(kd, chart, a0, accept_rel=1e-5,
                                        sigma_accept=5e-2):
                nxt.append((a0, b))
        cands = [p for p in nxt
                 if all(abs(p[0] - q[0]) + abs(p[1] - q[1]) > 1e-6 for q in seen)]
        seen.extend(cands)
        out = []
        for a0, b0 in cands:
            got = _gn_refine(kd, chart, a0, b0, accept=accept)
            if got is not None:
                out.append(got)
        if out:
            return out
    return []


def chart_parameters(pv: ProductVector, chart, tol=1e-12):
    """(alpha, beta) of a product vector in the given chart; None at infinity."""
    def param(v, swap):
        num, den = (v[1], v[0]) if swap else (v[0], v[1])
        if abs(den) <= tol * max(abs(num), 1.0):
            return None
        return complex(num / den)

    a = param(pv.e, chart[0])
    b = param(pv.f, chart[1])
    if a is None or b is None:
        return None
    return a, b


def _sort_key(pv: ProductVector):
    def c(z):
        if z is None:
            return (1, 0.0, 0.0)
        return (0, round(z.real, 9), round(z.imag, 9))
    return (pv.chart, c(pv.alpha), c(pv.beta))


def _freedom_representatives(state, kd, rng, count=6):
    """Sampled members of the continuum when k_tot <= N (parameter freedom)."""
    n = kd.n
    reps = []
    attempts = 0
    while len(reps) < count and attempts < 60:
        attempts += 1
        chart = CHARTS[attempts % 4]
        alpha = rng.standard_normal() + 1j * rng.standard_normal()
        beta = rng.standard_normal() + 1j * rng.standard_normal()
        if kd.k_tot == n:
            # marginal: solve det A = 0 for alpha at fixed beta
            got = _gn_refine(kd, chart, alpha, beta, accept=1e-9)
            if got is None:
                continue
            alpha, beta = got
        gs = _extract_g(kd, chart, alpha, beta,
                        accept=1e-7 if kd.k_tot else np.inf)
        if kd.k_tot == 0:
            g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            gs = [g / np.linalg.norm(g)]
        for g in gs:
            pv = ProductVector.from_chart(chart, alpha, beta, g, isolated=False)
            if _verify_member(state, pv):
                reps.append(pv)
                break
    return reps
