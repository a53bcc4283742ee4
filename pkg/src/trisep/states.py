"""Tripartite 2 x 2 x N states, product-vector containers, generators, file I/O.

Basis convention: |a>|b>|c> with a,b in {0,1}, c in {0..N-1}, flattened as
index = a*2N + b*N + c (row-major over the parties A, B, C).
"""
from __future__ import annotations

import json

import numpy as np

from . import linalg
from .errors import DimensionError, FormatError
from .linalg import DEFAULT_TOL, Tolerance, dagger

TRANSPOSE_KEYS = ("rho", "ta", "tb", "tab")


def _product_state_index(dims):
    return dims[0] * dims[1] * dims[2]


class TripartiteState:
    """Immutable density matrix on C^2 x C^2 x C^N with cached transposes.

    Partial transposes and the rank signature (r(rho), r(rho^tA), r(rho^tB),
    r(rho^tAB)) are computed at construction; kernels are cached on demand.
    """

    def __init__(self, rho, dims=None, tol: Tolerance = DEFAULT_TOL,
                 unit_trace=True, trace_atol=1e-10):
        rho = linalg.as_matrix(rho)
        if dims is None:
            if rho.shape[0] % 4:
                raise DimensionError(f"matrix dimension {rho.shape[0]} is not 4N")
            dims = (2, 2, rho.shape[0] // 4)
        dims = tuple(int(d) for d in dims)
        d = dims[0] * dims[1] * dims[2]
        if dims[:2] != (2, 2) or rho.shape != (d, d):
            raise DimensionError(f"shape {rho.shape} does not match dims {dims}")
        rho = linalg.hermitize(rho, tol)
        tr = float(np.real(np.trace(rho)))
        if unit_trace and abs(tr - 1.0) > trace_atol:
            raise ValueError(f"trace {tr} deviates from 1 beyond {trace_atol}")
        w = np.linalg.eigvalsh(rho)
        if w[0] < -tol.psd_abs * (1.0 + abs(w[-1])):
            raise ValueError(f"matrix is not PSD (min eigenvalue {w[0]:.3e})")
        self.dims = dims
        self.tol = tol
        self.trace = tr
        self.rho = rho
        self._transposes = {
            "rho": rho,
            "ta": linalg.partial_transpose(rho, dims, {"A"}),
            "tb": linalg.partial_transpose(rho, dims, {"B"}),
            "tab": linalg.partial_transpose(rho, dims, {"A", "B"}),
        }
        for m in self._transposes.values():
            m.setflags(write=False)
        self.ranks = tuple(linalg.numerical_rank(self._transposes[k], tol)
                           for k in TRANSPOSE_KEYS)
        self._kernels = {}

    @property
    def n(self):
        return self.dims[2]

    @property
    def dim(self):
        return self.rho.shape[0]

    @property
    def rank(self):
        return self.ranks[0]

    @property
    def rank_sum(self):
        return sum(self.ranks)

    @property
    def kernel_dims(self):
        return tuple(self.dim - r for r in self.ranks)

    def transpose(self, which) -> np.ndarray:
        """Partial transpose by key: 'rho', 'ta', 'tb' or 'tab'."""
        return self._transposes[which]

    def kernel(self, which) -> list[np.ndarray]:
        if which not in self._kernels:
            self._kernels[which] = linalg.kernel_basis(self.transpose(which), self.tol)
        return self._kernels[which]

    def ppt_report(self) -> dict:
        """Minimum eigenvalue and PSD flag per partial transpose."""
        out = {}
        for key in ("ta", "tb", "tab"):
            w = np.linalg.eigvalsh(self.transpose(key))
            out[key] = {"min_eig": float(w[0]),
                        "psd": bool(w[0] >= -self.tol.psd_abs * (1 + abs(w[-1])))}
        return out

    def is_ppt(self) -> bool:
        return all(v["psd"] for v in self.ppt_report().values())

    def normalized(self) -> "TripartiteState":
        if abs(self.trace - 1.0) < 1e-14:
            return self
        return TripartiteState(self.rho / self.trace, self.dims, self.tol)

    def permute_ab(self) -> "TripartiteState":
        """Swap the roles of parties A and B."""
        n = self.n
        t = self.rho.reshape(2, 2, n, 2, 2, n).transpose(1, 0, 2, 4, 3, 5)
        return TripartiteState(t.reshape(self.dim, self.dim), self.dims, self.tol,
                               unit_trace=False, trace_atol=1.0)

    def permute_bc(self) -> "TripartiteState":
        """Swap parties B and C (requires N = 2)."""
        if self.n != 2:
            raise DimensionError("B<->C swap needs N = 2")
        t = self.rho.reshape(2, 2, 2, 2, 2, 2).transpose(0, 2, 1, 3, 5, 4)
        return TripartiteState(t.reshape(8, 8), self.dims, self.tol,
                               unit_trace=False, trace_atol=1.0)


def reduced_charlie(state: TripartiteState) -> np.ndarray:
    n = state.n
    t = state.rho.reshape(2, 2, n, 2, 2, n)
    return np.einsum("abcabf->cf", t)


def charlie_support(state: TripartiteState):
    """Orthonormal basis (N x N') of the support of Charlie's reduced state."""
    red = linalg.hermitize(reduced_charlie(state), state.tol)
    w, v = np.linalg.eigh(red)
    cut = state.tol.rank_rel * max(abs(w).max(), 1e-300) * state.n
    cols = [i for i in range(state.n) if w[i] > cut]
    return v[:, cols]


def compress_charlie(state: TripartiteState):
    """Restrict Charlie's space to its support; returns (state', basis)."""
    basis = charlie_support(state)
    np_ = basis.shape[1]
    if np_ == state.n:
        return state, np.eye(state.n, dtype=complex)
    iso = np.kron(np.eye(4, dtype=complex), basis)  # (4N x 4N')
    rho = dagger(iso) @ state.rho @ iso
    return TripartiteState(rho, (2, 2, np_), state.tol), basis


class ProductVector:
    """Normalized product vector e (x) f (x) g with its chart parameters.

    chart = (swap_a, swap_b); in the base chart (0, 0) finite parameters mean
    e ~ alpha|0> + |1> and f ~ beta|0> + |1>; a swapped chart exchanges the
    roles of |0> and |1> on that party, and alpha/beta of None marks the
    parameter at infinity of the base chart.
    """

    __slots__ = ("e", "f", "g", "chart", "alpha", "beta", "isolated")

    def __init__(self, e, f, g, chart=(0, 0), alpha=None, beta=None, isolated=True):
        self.e = _unit(np.asarray(e, dtype=complex).ravel(), 2)
        self.f = _unit(np.asarray(f, dtype=complex).ravel(), 2)
        self.g = _unit(np.asarray(g, dtype=complex).ravel(), None)
        self.chart = tuple(chart)
        self.alpha = alpha
        self.beta = beta
        self.isolated = bool(isolated)

    @classmethod
    def from_factors(cls, e, f, g, isolated=True):
        e = np.asarray(e, dtype=complex).ravel()
        f = np.asarray(f, dtype=complex).ravel()
        pv = cls(e, f, g, isolated=isolated)
        pv.alpha = _chart_parameter(pv.e)
        pv.beta = _chart_parameter(pv.f)
        return pv

    @classmethod
    def from_chart(cls, chart, alpha, beta, g, isolated=True):
        e = _factor_from_parameter(alpha, chart[0])
        f = _factor_from_parameter(beta, chart[1])
        return cls(e, f, g, chart=chart, alpha=alpha, beta=beta, isolated=isolated)

    @property
    def dims(self):
        return (2, 2, len(self.g))

    def full(self) -> np.ndarray:
        return np.kron(np.kron(self.e, self.f), self.g)

    def projector(self) -> np.ndarray:
        v = self.full()
        return np.outer(v, v.conj())

    def conjugated(self, parties) -> np.ndarray:
        """Full vector with the named parties' factors complex conjugated."""
        e = self.e.conj() if "A" in parties else self.e
        f = self.f.conj() if "B" in parties else self.f
        return np.kron(np.kron(e, f), self.g)

    def fidelity_to(self, other: "ProductVector") -> float:
        return float(abs(np.vdot(self.e, other.e)) ** 2
                     * abs(np.vdot(self.f, other.f)) ** 2
                     * abs(np.vdot(self.g, other.g)) ** 2)

    def to_json(self) -> dict:
        return {"e": _vec_json(self.e), "f": _vec_json(self.f),
                "g": _vec_json(self.g), "isolated": self.isolated}

    @classmethod
    def from_json(cls, obj) -> "ProductVector":
        return cls.from_factors(_vec_from_json(obj["e"]), _vec_from_json(obj["f"]),
                                _vec_from_json(obj["g"]),
                                isolated=obj.get("isolated", True))

    def __repr__(self):
        return f"ProductVector(chart={self.chart}, alpha={self.alpha}, beta={self.beta})"


def _unit(v, expect):
    if expect is not None and v.shape != (expect,):
        raise DimensionError(f"factor must have dimension {expect}, got {v.shape}")
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("zero factor in a product vector")
    v = v / nrm
    # fix the global phase deterministically: largest component real positive
    k = int(np.argmax(np.abs(v)))
    ph = v[k] / abs(v[k])
    return v / ph


def _chart_parameter(e):
    """Base-chart parameter of a 2-vector: e ~ alpha|0> + |1>, None at infinity."""
    if abs(e[1]) <= 1e-14 * abs(e[0]):
        return None
    return complex(e[0] / e[1])


def _factor_from_parameter(p, swapped):
    if p is None:
        v = np.array([1.0, 0.0], dtype=complex)
    else:
        v = np.array([p, 1.0], dtype=complex)
    if swapped:
        v = v[::-1]
    return v


def _vec_json(v):
    return [[float(x.real), float(x.imag)] for x in v]


def _vec_from_json(rows):
    return np.array([complex(r, i) for r, i in rows])


class Decomposition:
    """Convex combination of product projectors: weights plus vectors."""

    def __init__(self, weights, vectors, normalize=True):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or len(w) != len(vectors):
            raise DimensionError("weights and vectors must have matching lengths")
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        if normalize:
            w = w / w.sum()
        self.weights = w
        self.vectors = list(vectors)

    def __len__(self):
        return len(self.vectors)

    def matrix(self) -> np.ndarray:
        return sum(w * v.projector() for w, v in zip(self.weights, self.vectors))

    def state(self, tol: Tolerance = DEFAULT_TOL) -> TripartiteState:
        return TripartiteState(self.matrix(), self.vectors[0].dims, tol)

    def reconstruction_error(self, state) -> float:
        rho = state.rho if isinstance(state, TripartiteState) else state
        return float(np.linalg.norm(self.matrix() - rho))

    def to_json(self) -> dict:
        return {"type": "decomposition",
                "weights": [float(w) for w in self.weights],
                "vectors": [v.to_json() for v in self.vectors]}

    @classmethod
    def from_json(cls, obj) -> "Decomposition":
        return cls(obj["weights"], [ProductVector.from_json(v) for v in obj["vectors"]],
                   normalize=False)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def random_product_vector(dims, rng) -> ProductVector:
    """Factors drawn uniformly on the complex unit spheres."""
    def sphere(d):
        v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        return v / np.linalg.norm(v)
    return ProductVector.from_factors(sphere(2), sphere(2), sphere(dims[2]))


def from_ensemble(weights, vectors, dims=None, tol: Tolerance = DEFAULT_TOL) -> TripartiteState:
    """Normalized convex combination of product projectors."""
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("ensemble weights must be positive")
    if dims is None:
        dims = vectors[0].dims
    for v in vectors:
        if v.dims != tuple(dims):
            raise DimensionError("product vector does not match dims")
    w = w / w.sum()
    rho = sum(wi * v.projector() for wi, v in zip(w, vectors))
    return TripartiteState(rho, dims, tol)


def random_separable_state(dims, n_terms, seed, weight_floor=0.04,
                           tol: Tolerance = DEFAULT_TOL):
    """Random mixture of product projectors; returns (state, decomposition)."""
    rng = np.random.default_rng(seed)
    vecs = [random_product_vector(dims, rng) for _ in range(n_terms)]
    w = weight_floor + rng.random(n_terms)
    w = w / w.sum()
    return from_ensemble(w, vecs, dims, tol), Decomposition(w, vecs, normalize=False)


def canonical_state_from_ops(B, C, D, tol: Tolerance = DEFAULT_TOL) -> TripartiteState:
    """State sqrt(D) (B+C+; C+; B+; 1)(CB, C, B, 1) sqrt(D), trace-normalized.

    B, C must be commuting normal operators on Charlie's space and D PSD;
    the result has rank N and all partial transposes PSD.
    """
    B, C, D = (linalg.as_matrix(m) for m in (B, C, D))
    n = B.shape[0]
    X = np.vstack([dagger(B) @ dagger(C), dagger(C), dagger(B), np.eye(n)])
    D = linalg.hermitize(D, tol)
    w, v = np.linalg.eigh(D)
    if w[0] < -tol.psd_abs * (1 + abs(w[-1])):
        raise ValueError("D must be PSD")
    sq = (v * np.sqrt(np.clip(w, 0, None))) @ dagger(v)
    L = np.kron(np.eye(4), sq)
    rho = L @ (X @ dagger(X)) @ dagger(L)
    return TripartiteState(rho / np.trace(rho).real, (2, 2, n), tol)


def random_commuting_normals(n, rng):
    """Two normal matrices with a shared Haar-random eigenbasis."""
    u = linalg.haar_unitary(n, rng)
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return (u * b) @ dagger(u), (u * c) @ dagger(u)


def random_canonical_state(n, seed, tol: Tolerance = DEFAULT_TOL) -> TripartiteState:
    """Random rank-N PPT state in the commuting-operator normal form."""
    if n < 1:
        raise DimensionError("N must be >= 1")
    rng = np.random.default_rng(seed)
    B, C = random_commuting_normals(n, rng)
    D = np.diag(rng.uniform(0.5, 1.5, size=n)).astype(complex)
    return canonical_state_from_ops(B, C, D, tol)


def shifts_upb_members():
    """The four Shifts unextendible-product-basis vectors in (2,2,2)."""
    z = np.array([1.0, 0.0], dtype=complex)
    o = np.array([0.0, 1.0], dtype=complex)
    p = (z + o) / np.sqrt(2)
    m = (z - o) / np.sqrt(2)
    return [
        ProductVector.from_factors(z, o, p),
        ProductVector.from_factors(o, p, z),
        ProductVector.from_factors(p, z, o),
        ProductVector.from_factors(m, m, m),
    ]


def shifts_upb_state(tol: Tolerance = DEFAULT_TOL) -> TripartiteState:
    """rho = (1 - sum of the four Shifts projectors)/4: rank-4 PPT, empty V[rho]."""
    rho = np.eye(8, dtype=complex)
    for v in shifts_upb_members():
        rho -= v.projector()
    return TripartiteState(rho / 4.0, (2, 2, 2), tol)


def werner_state(p) -> np.ndarray:
    """Two-qubit Werner state p|Psi-><Psi-| + (1-p) I/4 (NPT iff p > 1/3)."""
    psi = np.zeros(4, dtype=complex)
    psi[1], psi[2] = 1 / np.sqrt(2), -1 / np.sqrt(2)
    return p * np.outer(psi, psi.conj()) + (1 - p) * np.eye(4) / 4


def werner_ancilla_state(p, tol: Tolerance = DEFAULT_TOL) -> TripartiteState:
    """Werner state on A,B tensored with the ancilla |0><0| on C (N = 2)."""
    anc = np.zeros((2, 2), dtype=complex)
    anc[0, 0] = 1.0
    return TripartiteState(np.kron(werner_state(p), anc), (2, 2, 2), tol)


def random_density_state(dims, seed, tol: Tolerance = DEFAULT_TOL) -> TripartiteState:
    """Ginibre-random full-rank density matrix (generically NPT)."""
    rng = np.random.default_rng(seed)
    d = _product_state_index(dims)
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ dagger(g)
    return TripartiteState(rho / np.trace(rho).real, dims, tol)


def upb_product_mixture(n_products, seed, upb_weight=0.5,
                        tol: Tolerance = DEFAULT_TOL):
    """Shifts state mixed with random product projectors.

    With 3 products this generically realizes the maximal-edge rank signature
    (7,7,7,7); the product vectors all belong to V[rho].  Returns
    (state, product vectors).
    """
    rng = np.random.default_rng(seed)
    vecs = [random_product_vector((2, 2, 2), rng) for _ in range(n_products)]
    w = rng.uniform(0.5, 1.5, size=n_products)
    w = (1 - upb_weight) * w / w.sum()
    rho = upb_weight * shifts_upb_state(tol).rho
    for wi, v in zip(w, vecs):
        rho = rho + wi * v.projector()
    return TripartiteState(rho, (2, 2, 2), tol), vecs


def random_state_with_kernels(kernel_spec, seed, dims=(2, 2, 2),
                              tol: Tolerance = DEFAULT_TOL, iters=400,
                              anchor=None):
    """Random PSD unit-trace state whose chosen transposes are rank deficient.

    kernel_spec maps transpose keys ('rho','ta','tb','tab') to the number of
    prescribed kernel vectors; the vectors are taken from an anchor state
    that realizes them simultaneously (default: the shifts-plus-products
    mixture), which keeps the constraint set nonempty.  Built by alternating
    projections onto the PSD cone and the affine set fixing those kernel
    vectors; e.g. {'rho':1,'ta':1,'tab':1} generically yields the marginal
    rank signature (7,7,8,7).
    """
    rng = np.random.default_rng(seed)
    d = _product_state_index(dims)
    if anchor is None:
        if dims != (2, 2, 2):
            raise DimensionError("default anchor needs dims (2,2,2)")
        anchor, _ = upb_product_mixture(3, seed=seed, tol=tol)
    targets = {}
    for key, count in kernel_spec.items():
        if count:
            ker = anchor.kernel(key)
            if len(ker) < count:
                raise ValueError(f"anchor kernel {key} has only {len(ker)} vectors")
            targets[key] = np.array(ker[:count])

    def transpose_of(m, key):
        if key == "rho":
            return m
        parties = {"ta": {"A"}, "tb": {"B"}, "tab": {"A", "B"}}[key]
        return linalg.partial_transpose(m, dims, parties)

    # real orthonormal basis of the Hermitian matrices
    basis = []
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = e[j, i] = 1 / np.sqrt(2)
            basis.append(e)
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = -1j / np.sqrt(2)
            e[j, i] = 1j / np.sqrt(2)
            basis.append(e)

    barr = np.array(basis)  # (d^2, d, d)

    def to_coords(m):
        return np.einsum("nij,ij->n", barr.conj(), m).real

    def from_coords(x):
        return np.einsum("n,nij->ij", x, barr)

    rows, rhs = [], []
    for key, vs in targets.items():
        tb = np.array([transpose_of(b, key) for b in basis])
        for v in vs:
            cols = tb @ v  # (d^2, d) complex
            for i in range(d):
                rows.append(cols[:, i].real)
                rhs.append(0.0)
                rows.append(cols[:, i].imag)
                rhs.append(0.0)
    rows.append(np.array([np.trace(b).real for b in basis]))
    rhs.append(1.0)
    A = np.array(rows)
    b = np.array(rhs)
    Ap = np.linalg.pinv(A, rcond=1e-12)

    def project_affine(x):
        return x - Ap @ (A @ x - b)

    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = g @ dagger(g)
    x = to_coords(m / np.trace(m).real)
    for _ in range(iters):
        x = project_affine(x)
        m = from_coords(x)
        w, v = np.linalg.eigh(m)
        m = (v * np.clip(w, 0, None)) @ dagger(v)
        x = to_coords(m)
    m = from_coords(project_affine(x))
    w, v = np.linalg.eigh(m)
    m = (v * np.clip(w, 0, None)) @ dagger(v)
    # blend with the anchor: both satisfy the constraints and are PSD, and
    # the mixture generically has no kernel beyond the prescribed one
    m = 0.6 * m / np.trace(m).real + 0.4 * anchor.rho
    return TripartiteState(m / np.trace(m).real, dims, tol, trace_atol=1e-8)


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

def state_to_json(state: TripartiteState, meta=None) -> dict:
    return {"version": 1,
            "dims": list(state.dims),
            "matrix": [_vec_json(row) for row in state.rho],
            "meta": dict(meta or {})}


def state_from_json(obj, tol: Tolerance = DEFAULT_TOL) -> TripartiteState:
    if not isinstance(obj, dict) or obj.get("version") != 1:
        raise FormatError("unsupported or missing version field")
    dims = obj.get("dims")
    if (not isinstance(dims, list) or len(dims) != 3
            or dims[0] != 2 or dims[1] != 2 or int(dims[2]) < 1):
        raise FormatError(f"bad dims field {dims!r}")
    dims = tuple(int(x) for x in dims)
    d = dims[0] * dims[1] * dims[2]
    rows = obj.get("matrix")
    if not isinstance(rows, list) or len(rows) != d:
        raise FormatError("matrix row count does not match dims")
    try:
        m = np.array([[complex(c[0], c[1]) for c in row] for row in rows])
    except (TypeError, IndexError, ValueError) as exc:
        raise FormatError(f"malformed matrix entries: {exc}") from None
    if m.shape != (d, d):
        raise FormatError("matrix is not square of dimension 4N")
    if not np.all(np.isfinite(m.view(float))):
        raise FormatError("matrix has non-finite entries")
    if np.linalg.norm(m - dagger(m)) > 1e-8 * max(1.0, np.linalg.norm(m)):
        raise FormatError("matrix payload is not Hermitian")
    if abs(np.trace(m).real - 1.0) > 1e-6:
        raise FormatError(f"trace {np.trace(m).real} deviates from 1 beyond 1e-6")
    try:
        return TripartiteState(m, dims, tol, trace_atol=1e-6)
    except (ValueError, DimensionError) as exc:
        raise FormatError(str(exc)) from None


def save(state: TripartiteState, path, meta=None) -> None:
    with open(path, "w") as fh:
        json.dump(state_to_json(state, meta), fh)


def load(path, tol: Tolerance = DEFAULT_TOL) -> TripartiteState:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from None
    return state_from_json(obj, tol)
