"""Pure-numpy lane for the hot grid kernels.

Evaluates, over a grid of chart parameters (alpha, beta), the minimum
eigenvalue of the Gram form

    G(alpha, beta) = sum_f sum_{p,q} conj(c^f_p) c^f_q T[f, p, q]

where c^f = (x*y, x, y, 1), x = alpha or conj(alpha) and y = beta or
conj(beta) according to conj_flags[f].  With T built from kernel components
this is the squared smallest singular value of the constraint matrix A; with
T built from a single operator it is the product-state expectation minimized
exactly over the third factor.
"""
from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def _coeffs(alphas, betas, conj_a, conj_b):
    a = np.conj(alphas) if conj_a else alphas
    b = np.conj(betas) if conj_b else betas
    na, nb = len(alphas), len(betas)
    c = np.empty((na, nb, 4), dtype=complex)
    c[:, :, 0] = a[:, None] * b[None, :]
    c[:, :, 1] = np.broadcast_to(a[:, None], (na, nb))
    c[:, :, 2] = np.broadcast_to(b[None, :], (na, nb))
    c[:, :, 3] = 1.0
    return c


def _min_eig_batch(g):
    n = g.shape[-1]
    if n == 2:
        a = g[..., 0, 0].real
        d = g[..., 1, 1].real
        off = np.abs(g[..., 0, 1])
        h = 0.5 * (a + d)
        return h - np.sqrt(0.25 * (a - d) ** 2 + off ** 2)
    return np.linalg.eigvalsh(g)[..., 0]


def min_gram_grid(T, conj_flags, alphas, betas, normalize=False, chunk=96):
    """Grid of lambda_min(G(alpha, beta)); shape (len(alphas), len(betas))."""
    T = np.asarray(T, dtype=complex)
    alphas = np.asarray(alphas, dtype=complex)
    betas = np.asarray(betas, dtype=complex)
    nf = T.shape[0]
    n = T.shape[-1]
    out = np.empty((len(alphas), len(betas)), dtype=float)
    for lo in range(0, len(alphas), chunk):
        hi = min(lo + chunk, len(alphas))
        asl = alphas[lo:hi]
        g = np.zeros((hi - lo, len(betas), n, n), dtype=complex)
        for f in range(nf):
            c = _coeffs(asl, betas, conj_flags[f][0], conj_flags[f][1])
            g += np.einsum("xyp,xyq,pqab->xyab", c.conj(), c, T[f], optimize=True)
        vals = _min_eig_batch(g)
        if normalize:
            na2 = 1.0 + np.abs(asl) ** 2
            nb2 = 1.0 + np.abs(betas) ** 2
            vals = vals / (na2[:, None] * nb2[None, :])
        out[lo:hi] = vals
    return out
