"""Bivariate and four-variable polynomial arithmetic for the minor systems.

BiPolynomial holds a polynomial in (z, w); in the product-vector search z
stands for beta and w for beta*, treated as an independent variable until the
conjugate-consistency filter.  Poly4 adds the (alpha, alpha*) pair and is
used only transiently while expanding symbolic determinants.

The elimination toolchain: Sylvester resultants evaluated on a circle and
interpolated by FFT, companion-matrix roots (numpy.roots), and back
substitution of the second variable.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as npoly


def _trim2(c, rel=1e-14):
    c = np.atleast_2d(np.asarray(c, dtype=complex))
    top = np.abs(c).max() if c.size else 0.0
    if top == 0.0:
        return np.zeros((1, 1), dtype=complex)
    mask = np.abs(c) > rel * top
    rows = np.nonzero(mask.any(axis=1))[0]
    cols = np.nonzero(mask.any(axis=0))[0]
    out = c[: rows.max() + 1, : cols.max() + 1].copy()
    out[np.abs(out) <= rel * top] = 0.0
    return out


class BiPolynomial:
    """Polynomial in (z, w) with a dense coefficient table c[i, j] z^i w^j."""

    __slots__ = ("c",)

    def __init__(self, c):
        self.c = _trim2(c)

    @classmethod
    def zero(cls):
        return cls(np.zeros((1, 1), dtype=complex))

    @classmethod
    def const(cls, v):
        return cls(np.array([[v]], dtype=complex))

    @property
    def degrees(self):
        """(X, Y) = degrees in z and w (zero polynomial reports (0, 0))."""
        return (self.c.shape[0] - 1, self.c.shape[1] - 1)

    @property
    def norm(self):
        return float(np.abs(self.c).max())

    def is_zero(self, rel=1e-12, scale=None):
        return self.norm <= rel * max(scale if scale is not None else 0.0, 1e-300)

    def __add__(self, other):
        a, b = self.c, other.c
        m = max(a.shape[0], b.shape[0]), max(a.shape[1], b.shape[1])
        out = np.zeros(m, dtype=complex)
        out[: a.shape[0], : a.shape[1]] += a
        out[: b.shape[0], : b.shape[1]] += b
        return BiPolynomial(out)

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def __mul__(self, other):
        if self.norm == 0.0 or other.norm == 0.0:
            return BiPolynomial.zero()
        a, b = self.c, other.c
        out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1),
                       dtype=complex)
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                if a[i, j] != 0:
                    out[i:i + b.shape[0], j:j + b.shape[1]] += a[i, j] * b
        return BiPolynomial(out)

    def scale(self, s):
        return BiPolynomial(self.c * s)

    def conj_swap(self):
        """Image under complex conjugation on the locus w = conj(z)."""
        return BiPolynomial(self.c.conj().T)

    def dz(self):
        if self.c.shape[0] == 1:
            return BiPolynomial.zero()
        return BiPolynomial(self.c[1:] * np.arange(1, self.c.shape[0])[:, None])

    def dw(self):
        if self.c.shape[1] == 1:
            return BiPolynomial.zero()
        return BiPolynomial(self.c[:, 1:] * np.arange(1, self.c.shape[1])[None, :])

    def eval(self, z, w):
        return npoly.polyval2d(z, w, self.c)

    def eval_scale(self, z, w):
        """Triangle bound sum |c_ij| |z|^i |w|^j, for relative residuals."""
        return float(npoly.polyval2d(abs(z), abs(w), np.abs(self.c)).real)

    def wpoly_at(self, z):
        """Coefficients (ascending) of the univariate w-polynomial at fixed z."""
        return npoly.polyval(z, self.c)  # contracts axis 0 (z powers)

    def __repr__(self):
        return f"BiPolynomial(degrees={self.degrees})"


class Poly4:
    """Sparse polynomial in (alpha, alpha*, beta, beta*) for determinant expansion."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = dict(terms or {})

    @classmethod
    def const(cls, v):
        return cls({(0, 0, 0, 0): complex(v)}) if v != 0 else cls()

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0.0) + v
        return Poly4(out)

    def __sub__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0.0) - v
        return Poly4(out)

    def __mul__(self, other):
        out = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = (k1[0] + k2[0], k1[1] + k2[1], k1[2] + k2[2], k1[3] + k2[3])
                out[k] = out.get(k, 0.0) + v1 * v2
        return Poly4(out)

    def scale(self, s):
        return Poly4({k: v * s for k, v in self.terms.items()})

    @property
    def norm(self):
        return max((abs(v) for v in self.terms.values()), default=0.0)

    def trim(self, rel=1e-14):
        top = self.norm
        if top == 0.0:
            return Poly4()
        return Poly4({k: v for k, v in self.terms.items() if abs(v) > rel * top})

    def conj_swap(self):
        """Conjugate the relation: swap alpha<->alpha*, beta<->beta*, conj coeffs."""
        return Poly4({(j, i, l, k): v.conjugate() for (i, j, k, l), v in self.terms.items()})

    def eval(self, alpha, beta):
        ac, bc = np.conj(alpha), np.conj(beta)
        return sum(v * alpha**i * ac**j * beta**k * bc**l
                   for (i, j, k, l), v in self.terms.items())

    def eval_scale(self, alpha, beta):
        a, b = abs(alpha), abs(beta)
        return sum(abs(v) * a**(i + j) * b**(k + l)
                   for (i, j, k, l), v in self.terms.items())

    def alpha_structure(self):
        """Map (i, j) powers of (alpha, alpha*) -> BiPolynomial in (beta, beta*)."""
        groups = {}
        for (i, j, k, l), v in self.trim().terms.items():
            groups.setdefault((i, j), {})[(k, l)] = v
        out = {}
        for ij, mono in groups.items():
            kx = max(k for k, _ in mono) + 1
            ky = max(l for _, l in mono) + 1
            c = np.zeros((kx, ky), dtype=complex)
            for (k, l), v in mono.items():
                c[k, l] = v
            out[ij] = BiPolynomial(c)
        return out


def det_poly4(rows):
    """Determinant of a small square matrix with Poly4 entries (Laplace)."""
    n = len(rows)
    cols = tuple(range(n))
    memo = {}

    def det(r, cset):
        if len(cset) == 1:
            return rows[r][cset[0]]
        key = (r, cset)
        if key in memo:
            return memo[key]
        acc = Poly4()
        for pos, c in enumerate(cset):
            entry = rows[r][c]
            if not entry.terms:
                continue
            sub = det(r + 1, cset[:pos] + cset[pos + 1:])
            term = entry * sub
            acc = acc + (term if pos % 2 == 0 else term.scale(-1.0))
        memo[key] = acc
        return acc

    return det(0, cols).trim()


def roots1d(coeffs, rel_trim=1e-10):
    """Roots of an ascending-coefficient polynomial with relative trimming."""
    c = np.asarray(coeffs, dtype=complex)
    top = np.abs(c).max() if c.size else 0.0
    if top == 0.0:
        return None  # identically zero
    c = c.copy()
    c[np.abs(c) <= rel_trim * top] = 0.0
    nz = np.nonzero(c)[0]
    c = c[: nz.max() + 1]
    if len(c) == 1:
        return np.array([], dtype=complex)
    return np.roots(c[::-1])


def sylvester_det_samples(ecw, fcw):
    """det of the Sylvester matrix of two ascending w-coefficient vectors."""
    p, q = len(ecw) - 1, len(fcw) - 1
    ns = p + q
    if ns == 0:
        return np.array(1.0 + 0j)
    m = np.zeros((ns, ns), dtype=complex)
    for r in range(q):
        m[r, r:r + p + 1] = ecw[::-1]
    for r in range(p):
        m[q + r, r:r + q + 1] = fcw[::-1]
    return np.linalg.det(m)


def resultant_w(E: BiPolynomial, F: BiPolynomial, radius=1.0):
    """Eliminant in z of E(z,w), F(z,w): det Sylvester_w, FFT-interpolated."""
    p, q = E.degrees[1], F.degrees[1]
    if p == 0 and q == 0:
        return None  # nothing to eliminate
    deg_bound = E.degrees[0] * q + F.degrees[0] * p
    k = 1
    while k < deg_bound + 1:
        k *= 2
    zs = radius * np.exp(2j * np.pi * np.arange(k) / k)
    vals = np.empty(k, dtype=complex)
    ewc = E.c / max(E.norm, 1e-300)
    fwc = F.c / max(F.norm, 1e-300)
    for s in range(k):
        ec = npoly.polyval(zs[s], ewc)
        fc = npoly.polyval(zs[s], fwc)
        vals[s] = sylvester_det_samples(ec, fc)
    # vals[s] = sum_m c_m (r w^s)^m with w = e^{2 pi i/k}: forward FFT inverts
    coeffs = np.fft.fft(vals) / k / radius ** np.arange(k)
    return coeffs[: deg_bound + 1]


def sylvester_matrix_poly(E: BiPolynomial, F: BiPolynomial):
    """Sylvester-in-w matrix as a matrix polynomial in z: list of S_k."""
    p, q = E.degrees[1], F.degrees[1]
    de, df = E.degrees[0], F.degrees[0]
    d = max(de, df)
    ns = p + q
    sk = [np.zeros((ns, ns), dtype=complex) for _ in range(d + 1)]
    ec = E.c / max(E.norm, 1e-300)
    fc = F.c / max(F.norm, 1e-300)
    for k in range(de + 1):
        row = ec[k, ::-1]  # descending w-coefficients
        for r in range(q):
            sk[k][r, r:r + p + 1] += row
    for k in range(df + 1):
        row = fc[k, ::-1]
        for r in range(p):
            sk[k][q + r, r:r + q + 1] += row
    return sk


def resultant_roots(E: BiPolynomial, F: BiPolynomial, max_abs=1e6):
    """Roots of det Sylvester_w(z) via block-companion QZ (backward stable).

    Returns the finite generalized eigenvalues of the companion
    linearization of the Sylvester matrix polynomial, or None when the
    eliminant is identically singular.
    """
    import scipy.linalg as sla

    sk = sylvester_matrix_poly(E, F)
    # drop trailing zero matrix coefficients
    while len(sk) > 1 and np.abs(sk[-1]).max() < 1e-14:
        sk.pop()
    d = len(sk) - 1
    ns = sk[0].shape[0]
    if d == 0:
        return np.array([], dtype=complex)
    # a singular pencil (E, F sharing a factor) has sigma_min(Syl) ~ 0 at
    # every z: detect by sampling before trusting the eigenvalues
    for z in (0.37 + 0.41j, -1.21 + 0.33j, 0.87 - 1.13j):
        s = np.linalg.svd(sum(z**k * c for k, c in enumerate(sk)),
                          compute_uv=False)
        if s[-1] > 1e-10 * max(s[0], 1e-300):
            break
    else:
        return None
    m = ns * d
    a = np.zeros((m, m), dtype=complex)
    b = np.eye(m, dtype=complex)
    for i in range(d - 1):
        a[i * ns:(i + 1) * ns, (i + 1) * ns:(i + 2) * ns] = np.eye(ns)
    for k in range(d):
        a[(d - 1) * ns:, k * ns:(k + 1) * ns] = -sk[k]
    b[(d - 1) * ns:, (d - 1) * ns:] = sk[d]
    try:
        w = sla.eigvals(a, b)
    except (np.linalg.LinAlgError, ValueError):
        return None
    w = w[np.isfinite(w)]
    return w[np.abs(w) < max_abs]


def solve_pair(E: BiPolynomial, F: BiPolynomial, cand_rel=1e-6, root_rel=1e-8):
    """Common zeros of two bivariate polynomials with w independent of z.

    Returns (pairs, candidate_count, continuum).  candidate_count is the
    number of (z, w) pairs passing the residual test on both polynomials,
    before any conjugate filtering; continuum means the eliminant vanished
    identically (non-isolated solutions).
    """
    if E.norm == 0.0 or F.norm == 0.0:
        return [], 0, True
    if E.degrees[1] == 0 and F.degrees[1] == 0:
        rz = roots1d(E.c[:, 0])
        if rz is None:
            return [], 0, True
        pairs = []
        for z0 in rz:
            if abs(F.eval(z0, 0.0)) <= cand_rel * max(F.eval_scale(z0, 0.0), 1e-30):
                pairs.append((complex(z0), 0.0j))
        return pairs, len(pairs), False
    if E.degrees[1] == 0:
        E, F = F, E
    zroots = resultant_roots(E, F)
    if zroots is None:
        return [], 0, True
    pairs = []
    for z0 in zroots:
        if not np.isfinite(z0) or abs(z0) > 1e8:
            continue
        wc = E.wpoly_at(z0)
        wroots = roots1d(wc, rel_trim=root_rel)
        if wroots is None:
            wroots = roots1d(F.wpoly_at(z0), rel_trim=root_rel)
            if wroots is None:
                continue
        for w0 in wroots:
            if not np.isfinite(w0) or abs(w0) > 1e8:
                continue
            se = max(E.eval_scale(z0, w0), 1e-30)
            sf = max(F.eval_scale(z0, w0), 1e-30)
            if (abs(E.eval(z0, w0)) <= cand_rel * se
                    and abs(F.eval(z0, w0)) <= cand_rel * sf):
                pairs.append((complex(z0), complex(w0)))
    return pairs, len(pairs), False


def conjugate_pairs(pairs, tol=1e-6):
    """Keep pairs where w is consistent with conj(z)."""
    return [(z, w) for z, w in pairs if abs(w - np.conj(z)) <= tol * (1.0 + abs(z))]


def solve_self_conjugate(D: BiPolynomial, accept_rel=1e-9, grid=1.25, grid_n=13):
    """Solutions alpha of D(alpha, conj(alpha)) = 0 for a bivariate D.

    Starts come from the resultant of (D, conjugate image) with the
    conjugate treated as independent, plus coarse grid minima of |D| on the
    conjugate locus; every start is Gauss-Newton polished and accepted by
    relative residual.  (On symmetric states the restriction of D to the
    conjugate locus can be a real equation whose zero set is a curve; the
    polish then lands on curve representatives.)
    """
    Dc = D.conj_swap()
    starts = []
    pairs, _, cont = solve_pair(D, Dc)
    starts.extend((z + np.conj(w)) / 2 for z, w in pairs)
    ax = np.linspace(-grid, grid, grid_n)
    zz = ax[:, None] + 1j * ax[None, :]
    vals = np.abs(D.eval(zz, np.conj(zz)))
    scales = npoly.polyval2d(np.abs(zz), np.abs(zz), np.abs(D.c)) + 1e-30
    rel = vals / scales
    flat = np.argsort(rel, axis=None)[:8]
    starts.extend(zz.ravel()[flat])
    sols = []
    for a0 in starts:
        a = newton_polish_conjugate(D, complex(a0))
        r = abs(D.eval(a, np.conj(a))) / max(D.eval_scale(a, np.conj(a)), 1e-30)
        if r <= accept_rel and all(abs(a - s) > 1e-7 * (1 + abs(s)) for s in sols):
            sols.append(a)
    return sols, cont


def newton_polish_conjugate(D: BiPolynomial, alpha0, iters=60, tol=1e-12):
    """Gauss-Newton refinement of D(alpha, conj(alpha)) = 0 over (Re, Im) alpha.

    The Jacobian may be rank deficient (the restriction of D to the conjugate
    locus can be a real equation with a solution curve); a regularized
    least-squares step then moves onto the curve and stays.  Returns the
    best iterate seen.
    """
    x = np.array([alpha0.real, alpha0.imag], dtype=float)
    dz, dw = D.dz(), D.dw()
    best = (np.inf, complex(x[0], x[1]))
    for _ in range(iters):
        a = complex(x[0], x[1])
        val = D.eval(a, np.conj(a))
        rel = abs(val) / max(D.eval_scale(a, np.conj(a)), 1e-30)
        if rel < best[0]:
            best = (rel, a)
        if rel <= tol:
            break
        gz = dz.eval(a, np.conj(a))
        gw = dw.eval(a, np.conj(a))
        # d/dx = dz + dw ; d/dy = i(dz - dw)
        J = np.array([[np.real(gz + gw), np.real(1j * (gz - gw))],
                      [np.imag(gz + gw), np.imag(1j * (gz - gw))]])
        r = np.array([val.real, val.imag])
        try:
            step = np.linalg.lstsq(J, -r, rcond=1e-8)[0]
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) < 1e-15:
            break
        x = x + np.clip(step, -0.5, 0.5)
    return best[1]
