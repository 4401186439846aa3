"""Cone layouts, symmetric vectorization, and Euclidean cone projections.

Matrices enter the conic machinery in scaled symmetric vectorization: a
symmetric n x n matrix maps to a vector of length n(n+1)/2 with off-diagonal
entries multiplied by sqrt(2), so dot products of vectorized matrices equal
trace inner products.  Complex Hermitian matrices are carried through the
real embedding [[Re, -Im], [Im, Re]] of doubled side, which has the same
eigenvalues (each twice), so semidefiniteness is preserved and trace inner
products double.

Cone blocks are laid out in the fixed order: zero, nonnegative, second-order,
positive semidefinite, exponential.  The exponential cone is

    K_exp = closure{ (x, y, z) : y > 0, y * exp(x/y) <= z },

projected by reducing the KKT conditions to a one-dimensional root-finding
problem in rho = x/y, solved with a bracketed, damped Newton iteration.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..errors import AsymmetricInput, DimensionMismatch

SQRT2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# symmetric / Hermitian vectorization


def svec_dim(n):
    return n * (n + 1) // 2


@lru_cache(maxsize=None)
def _svec_indices(n):
    """(rows, cols, scale) for upper-triangular column-major svec order."""
    rows, cols, scale = [], [], []
    for j in range(n):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
            scale.append(1.0 if i == j else SQRT2)
    return np.array(rows), np.array(cols), np.array(scale)


def svec(mat, check=True, tol=1e-12):
    """Scaled vectorization of a symmetric matrix.

    Raises AsymmetricInput when the relative asymmetry exceeds ``tol``.
    """
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if mat.shape != (n, n):
        raise DimensionMismatch(f"expected square matrix, got {mat.shape}")
    if check:
        scale = max(np.abs(mat).max(), 1e-300)
        if np.abs(mat - mat.T).max() > tol * max(scale, 1.0):
            raise AsymmetricInput("matrix is not symmetric within tolerance")
    rows, cols, sc = _svec_indices(n)
    sym = 0.5 * (mat + mat.T)
    return sym[rows, cols] * sc


def smat(vec):
    """Inverse of :func:`svec`."""
    vec = np.asarray(vec, dtype=float)
    n = int(round((np.sqrt(8 * vec.size + 1) - 1) / 2))
    if svec_dim(n) != vec.size:
        raise DimensionMismatch(f"length {vec.size} is not a triangular number")
    rows, cols, sc = _svec_indices(n)
    out = np.zeros((n, n))
    vals = vec / sc
    out[rows, cols] = vals
    out[cols, rows] = vals
    return out


def herm_dim(n):
    """Real parameter count of a complex Hermitian n x n matrix."""
    return n * n


@lru_cache(maxsize=None)
def _hvec_indices(n):
    """Index arrays for [diag, sqrt2*Re(upper), sqrt2*Im(upper)] ordering."""
    up_r, up_c = [], []
    for j in range(n):
        for i in range(j):
            up_r.append(i)
            up_c.append(j)
    return np.arange(n), np.array(up_r, dtype=int), np.array(up_c, dtype=int)


def hvec(mat, check=True, tol=1e-12):
    """Real vectorization of a complex Hermitian matrix (length n*n).

    Ordering is [diagonal, sqrt(2)*Re(upper), sqrt(2)*Im(upper)];
    dot products of hvec'd matrices equal (real) trace inner products.
    """
    mat = np.asarray(mat, dtype=complex)
    n = mat.shape[0]
    if mat.shape != (n, n):
        raise DimensionMismatch(f"expected square matrix, got {mat.shape}")
    if check:
        scale = max(np.abs(mat).max(), 1e-300)
        if np.abs(mat - mat.conj().T).max() > tol * max(scale, 1.0):
            raise AsymmetricInput("matrix is not Hermitian within tolerance")
    herm = 0.5 * (mat + mat.conj().T)
    diag, up_r, up_c = _hvec_indices(n)
    out = np.empty(n * n)
    out[:n] = herm[diag, diag].real
    upper = herm[up_r, up_c] if up_r.size else np.empty(0, dtype=complex)
    half = n * (n - 1) // 2
    out[n:n + half] = SQRT2 * upper.real
    out[n + half:] = SQRT2 * upper.imag
    return out


def hmat(vec):
    """Inverse of :func:`hvec`."""
    vec = np.asarray(vec, dtype=float)
    n = int(round(np.sqrt(vec.size)))
    if n * n != vec.size:
        raise DimensionMismatch(f"length {vec.size} is not a perfect square")
    diag, up_r, up_c = _hvec_indices(n)
    half = n * (n - 1) // 2
    out = np.zeros((n, n), dtype=complex)
    out[diag, diag] = vec[:n]
    if half:
        upper = (vec[n:n + half] + 1j * vec[n + half:]) / SQRT2
        out[up_r, up_c] = upper
        out[up_c, up_r] = upper.conj()
    return out


def embed_hermitian(mat):
    """Real symmetric embedding [[Re, -Im], [Im, Re]] of a Hermitian matrix."""
    mat = np.asarray(mat, dtype=complex)
    re, im = mat.real, mat.imag
    return np.block([[re, -im], [im, re]])


def embed_svec(mat, check=False):
    """svec of the real embedding of a Hermitian matrix."""
    return svec(embed_hermitian(mat), check=check)


@lru_cache(maxsize=None)
def _hvec_basis(n):
    """Hermitian basis tensor (n*n, n, n) dual to the hvec coordinates."""
    dim = herm_dim(n)
    basis = np.zeros((dim, n, n), dtype=complex)
    for b in range(dim):
        e = np.zeros(dim)
        e[b] = 1.0
        basis[b] = hmat(e)
    return basis


def congruence_map(p):
    """Dense map from hvec(X) to embed_svec(P^H X P) for fixed complex P.

    P has shape (n, q); the result maps the n*n real Hermitian parameters of
    X to the svec coordinates of the embedded (2q x 2q) image.
    """
    p = np.asarray(p, dtype=complex)
    n, q = p.shape
    basis = _hvec_basis(n)
    imgs = np.einsum("ri,bij,jc->brc", p.conj().T, basis, p, optimize=True)
    rows, cols, sc = _svec_indices(2 * q)
    out = np.empty((svec_dim(2 * q), herm_dim(n)))
    for b in range(herm_dim(n)):
        emb = embed_hermitian(imgs[b])
        out[:, b] = 0.5 * (emb + emb.T)[rows, cols] * sc
    return out


@lru_cache(maxsize=None)
def identity_embed_map(n):
    """congruence_map with P = I, mapping hvec(X) to embed_svec(X)."""
    return congruence_map_cached(np.eye(n, dtype=complex))


_CONG_CACHE = {}


def congruence_map_cached(p):
    key = (p.shape, p.tobytes())
    hit = _CONG_CACHE.get(key)
    if hit is None:
        hit = congruence_map(p)
        if len(_CONG_CACHE) > 256:
            _CONG_CACHE.clear()
        _CONG_CACHE[key] = hit
    return hit


# ---------------------------------------------------------------------------
# cone specification


@dataclass(frozen=True)
class ConeSpec:
    """Dimensions of the cone product, in fixed layout order."""

    zero_dim: int = 0
    nonneg_dim: int = 0
    soc_dims: tuple = ()
    psd_side_lengths: tuple = ()
    exp_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "soc_dims", tuple(int(d) for d in self.soc_dims))
        object.__setattr__(
            self, "psd_side_lengths", tuple(int(s) for s in self.psd_side_lengths)
        )
        if self.zero_dim < 0 or self.nonneg_dim < 0 or self.exp_count < 0:
            raise DimensionMismatch("cone dimensions must be nonnegative")
        if any(d < 1 for d in self.soc_dims):
            raise DimensionMismatch("second-order cone dimensions must be >= 1")
        if any(s < 1 for s in self.psd_side_lengths):
            raise DimensionMismatch("PSD side lengths must be >= 1")

    @property
    def total_dim(self):
        return (
            self.zero_dim
            + self.nonneg_dim
            + sum(self.soc_dims)
            + sum(svec_dim(s) for s in self.psd_side_lengths)
            + 3 * self.exp_count
        )

    def blocks(self):
        """Yield (kind, start, size, side) over the layout."""
        off = 0
        if self.zero_dim:
            yield ("zero", off, self.zero_dim, None)
            off += self.zero_dim
        if self.nonneg_dim:
            yield ("nonneg", off, self.nonneg_dim, None)
            off += self.nonneg_dim
        for d in self.soc_dims:
            yield ("soc", off, d, None)
            off += d
        for s in self.psd_side_lengths:
            yield ("psd", off, svec_dim(s), s)
            off += svec_dim(s)
        for _ in range(self.exp_count):
            yield ("exp", off, 3, None)
            off += 3

    def row_groups(self):
        """Group lengths for block-uniform row scaling (one per cone block,
        one per zero/nonneg row)."""
        sizes = [1] * (self.zero_dim + self.nonneg_dim)
        sizes += list(self.soc_dims)
        sizes += [svec_dim(s) for s in self.psd_side_lengths]
        sizes += [3] * self.exp_count
        return sizes


# ---------------------------------------------------------------------------
# projections


def _proj_soc(block):
    t, z = block[0], block[1:]
    nz = np.linalg.norm(z)
    if nz <= t:
        return block
    if nz <= -t:
        return np.zeros_like(block)
    coef = 0.5 * (1.0 + t / nz)
    out = np.empty_like(block)
    out[0] = coef * nz
    out[1:] = coef * z
    return out


def _in_exp(r, s, t, tol):
    if s > 0.0:
        return t > 0.0 and r <= s * np.log(t / s) + tol
    if s >= -tol:
        return r <= tol and t >= -tol
    return False


def _in_exp_dual(u, v, w, tol):
    # K* = closure{ (u,v,w): u < 0, -u*exp(v/u) <= e*w }
    if u < 0.0:
        return w > 0.0 and np.log(-u) + v / u <= 1.0 + np.log(w) + tol
    if u <= tol:
        return v >= -tol and w >= -tol
    return False


def _exp_h(rho, r0, s0, t0):
    """Boundary-optimality residual; a root with (rho-1)*r0 + s0 > 0 gives
    the projection ((rho*y, y, y*exp(rho)) with y = linrho / (rho^2-rho+1)."""
    ex = np.exp(rho)
    lin = (rho - 1.0) * r0 + s0
    return lin * ex - (r0 - rho * s0) / ex - (rho * (rho - 1.0) + 1.0) * t0


def _exp_h_grad(rho, r0, s0, t0):
    ex = np.exp(rho)
    return (rho * r0 + s0) * ex + (r0 + (1.0 - rho) * s0) / ex - (2.0 * rho - 1.0) * t0


def _exp_point_from_rho(rho, r0, s0):
    lin = (rho - 1.0) * r0 + s0
    quad = rho * (rho - 1.0) + 1.0
    y = lin / quad
    return np.array([rho * y, y, y * np.exp(rho)])


def _exp_refine_root(lo, hi, r0, s0, t0):
    """Damped Newton with a maintained bracket; h(lo) and h(hi) differ in sign."""
    flo = _exp_h(lo, r0, s0, t0)
    rho = 0.5 * (lo + hi)
    for _ in range(120):
        f = _exp_h(rho, r0, s0, t0)
        if f == 0.0:
            break
        if (f > 0.0) == (flo > 0.0):
            lo = rho
        else:
            hi = rho
        g = _exp_h_grad(rho, r0, s0, t0)
        step = f / g if g != 0.0 else np.inf
        cand = rho - step
        if not (lo < cand < hi) or not np.isfinite(cand):
            cand = 0.5 * (lo + hi)
        if abs(cand - rho) <= 1e-14 * max(1.0, abs(rho)):
            rho = cand
            break
        rho = cand
    return rho


_EXP_RHO_MAX = 250.0


def _proj_exp_triple(v):
    r0, s0, t0 = float(v[0]), float(v[1]), float(v[2])
    scale = max(1.0, abs(r0), abs(s0), abs(t0))
    tol = 1e-14 * scale
    if _in_exp(r0, s0, t0, tol):
        return np.array([r0, s0, t0])
    if _in_exp_dual(-r0, -s0, -t0, tol):
        return np.zeros(3)
    if r0 <= 0.0 and s0 <= 0.0:
        return np.array([r0, max(s0, 0.0), max(t0, 0.0)])

    # scan the region where y > 0, i.e. (rho-1)*r0 + s0 > 0
    if r0 > 0.0:
        lo_edge, hi_edge = 1.0 - s0 / r0, _EXP_RHO_MAX
    elif r0 < 0.0:
        lo_edge, hi_edge = -_EXP_RHO_MAX, 1.0 - s0 / r0
    else:
        lo_edge, hi_edge = -_EXP_RHO_MAX, _EXP_RHO_MAX
    lo_edge = max(lo_edge, -_EXP_RHO_MAX)
    hi_edge = min(hi_edge, _EXP_RHO_MAX)

    width = hi_edge - lo_edge
    offsets = np.concatenate([[1e-9, 1e-6, 1e-3], np.geomspace(1e-2, 1.0, 40)])
    grid = np.unique(np.concatenate([lo_edge + offsets * width, [hi_edge]]))
    grid = grid[(grid > lo_edge) & (grid <= hi_edge)]

    best = np.array([min(r0, 0.0), 0.0, max(t0, 0.0)])  # boundary-ray candidate
    best_d = np.linalg.norm(best - [r0, s0, t0])
    hv = np.array([_exp_h(g, r0, s0, t0) for g in grid])
    for i in range(len(grid) - 1):
        if hv[i] == 0.0 or (hv[i] > 0) != (hv[i + 1] > 0):
            root = (
                grid[i]
                if hv[i] == 0.0
                else _exp_refine_root(grid[i], grid[i + 1], r0, s0, t0)
            )
            cand = _exp_point_from_rho(root, r0, s0)
            if not np.all(np.isfinite(cand)):
                continue
            d = np.linalg.norm(cand - [r0, s0, t0])
            if d < best_d:
                best, best_d = cand, d
    return best


class ConeProjector:
    """Precomputed block layout for repeated projections onto one cone product.

    PSD blocks of equal side are batched through a single eigh call.
    """

    def __init__(self, cones):
        self.cones = cones
        self.dim = cones.total_dim
        self._zero = None
        self._nonneg = None
        self._socs = []
        self._exp_starts = []
        psd = {}
        for kind, start, size, side in cones.blocks():
            if kind == "zero":
                self._zero = slice(start, start + size)
            elif kind == "nonneg":
                self._nonneg = slice(start, start + size)
            elif kind == "soc":
                self._socs.append(slice(start, start + size))
            elif kind == "psd":
                psd.setdefault(side, []).append(start)
            else:
                self._exp_starts.append(start)
        self._psd_groups = []
        for side, starts in psd.items():
            rows, cols, sc = _svec_indices(side)
            idx = np.array(starts)[:, None] + np.arange(svec_dim(side))[None, :]
            self._psd_groups.append((side, idx, rows, cols, sc))

    def _project(self, v, dual):
        v = np.asarray(v, dtype=float)
        if v.size != self.dim:
            raise DimensionMismatch(
                f"vector length {v.size} != cone dimension {self.dim}"
            )
        out = v.copy()
        if self._zero is not None and not dual:
            out[self._zero] = 0.0
        if self._nonneg is not None:
            np.maximum(out[self._nonneg], 0.0, out=out[self._nonneg])
        for sl in self._socs:
            out[sl] = _proj_soc(out[sl])
        for side, idx, rows, cols, sc in self._psd_groups:
            blocks = out[idx] / sc
            mats = np.zeros((idx.shape[0], side, side))
            mats[:, rows, cols] = blocks
            mats[:, cols, rows] = blocks
            w, u = np.linalg.eigh(mats)
            np.maximum(w, 0.0, out=w)
            proj = u @ (w[:, :, None] * np.swapaxes(u, 1, 2))
            out[idx] = proj[:, rows, cols] * sc
        for st in self._exp_starts:
            sl = slice(st, st + 3)
            if dual:
                # Moreau: proj onto K* equals v + proj_K(-v)
                out[sl] = out[sl] + _proj_exp_triple(-out[sl])
            else:
                out[sl] = _proj_exp_triple(out[sl])
        return out

    def project(self, v):
        return self._project(v, dual=False)

    def project_dual(self, v):
        return self._project(v, dual=True)


def project_onto_cone(v, cones):
    """Euclidean projection of ``v`` onto the cone product."""
    return ConeProjector(cones).project(v)


def project_onto_dual_cone(v, cones):
    """Euclidean projection onto the dual cone product."""
    return ConeProjector(cones).project_dual(v)


def dist_to_cone(v, cones):
    return float(np.linalg.norm(np.asarray(v, dtype=float) - project_onto_cone(v, cones)))


def dist_to_dual_cone(v, cones):
    return float(
        np.linalg.norm(np.asarray(v, dtype=float) - project_onto_dual_cone(v, cones))
    )
