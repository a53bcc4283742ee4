"""Grid-scan kernels with an import-time backend selection.

The compiled extension (trisep._scan, Cython) is used when available and the
Gram dimension is 2 or 3; otherwise the pure-numpy lane serves.  Both lanes
implement the same contract, see _scan_py.min_gram_grid.
"""
from __future__ import annotations

import numpy as np

from . import _scan_py

try:  # compiled lane is optional
    from . import _scan as _ext
    HAVE_EXT = True
except ImportError:
    _ext = None
    HAVE_EXT = False


def backend(n=2):
    if HAVE_EXT and n in (2, 3):
        return "cython"
    return "numpy"


def min_gram_grid(T, conj_flags, alphas, betas, normalize=False, force_numpy=False):
    T = np.ascontiguousarray(T, dtype=complex)
    flags = np.ascontiguousarray(conj_flags, dtype=np.uint8)
    alphas = np.ascontiguousarray(alphas, dtype=complex)
    betas = np.ascontiguousarray(betas, dtype=complex)
    n = T.shape[-1]
    if not force_numpy and HAVE_EXT and n in (2, 3):
        out = np.empty((len(alphas), len(betas)), dtype=float)
        _ext.min_gram_grid(T, flags, alphas, betas, out, bool(normalize))
        return out
    return _scan_py.min_gram_grid(T, flags, alphas, betas, normalize=normalize)


def chart_axis(box=1.05, step=0.05):
    """Symmetric real axis grid covering [-box, box] with the given step."""
    k = int(np.floor(box / step))
    return np.arange(-k, k + 1) * step


def chart_grid(box=1.05, step=0.05):
    """Complex grid over the chart square [-box, box]^2."""
    ax = chart_axis(box, step)
    return (ax[:, None] + 1j * ax[None, :]).ravel()
