"""Standard-form conic programs and an incremental builder.

A problem is

    minimize    c'x
    subject to  b - A x  in  K,

with K the cone product described by a :class:`ConeSpec`.  The builder
collects rows per cone family in any order and emits them in the canonical
layout (zero, nonneg, soc, psd, exp) at :meth:`ProblemBuilder.build` time.
Hermitian matrix variables are parameterized by their n*n real hvec
coordinates; LMI blocks are emitted as svec'd real embeddings.
"""

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import DimensionMismatch, NumericalBreakdown
from . import cones as cn

_DROP_TOL = 0.0  # keep exact zeros only out of the triplets


@dataclass(frozen=True)
class ConicProblem:
    """Immutable standard-form conic program."""

    objective_coeffs: np.ndarray
    constraint_matrix: sp.csr_matrix
    constraint_offset: np.ndarray
    cones: cn.ConeSpec
    variable_names: list = None
    row_labels: list = None  # (label, kind, start, size) for diagnostics

    def __post_init__(self):
        c = np.asarray(self.objective_coeffs, dtype=float)
        b = np.asarray(self.constraint_offset, dtype=float)
        object.__setattr__(self, "objective_coeffs", c)
        object.__setattr__(self, "constraint_offset", b)
        a = self.constraint_matrix
        if not sp.issparse(a):
            a = sp.csr_matrix(np.atleast_2d(a))
            object.__setattr__(self, "constraint_matrix", a)
        m, n = a.shape
        if n != c.size:
            raise DimensionMismatch(f"matrix has {n} columns, objective {c.size}")
        if m != b.size:
            raise DimensionMismatch(f"matrix has {m} rows, offset {b.size}")
        if m != self.cones.total_dim:
            raise DimensionMismatch(
                f"matrix has {m} rows, cone product dimension {self.cones.total_dim}"
            )
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(b))
                and np.all(np.isfinite(a.data))):
            raise NumericalBreakdown("problem data contains non-finite entries")

    @property
    def num_vars(self):
        return self.objective_coeffs.size

    @property
    def num_rows(self):
        return self.constraint_offset.size

    def slack_at(self, x):
        return self.constraint_offset - self.constraint_matrix @ np.asarray(x, float)

    def to_debug_json(self, path):
        """Self-describing dump (triplet matrix) for cross-solver validation."""
        coo = self.constraint_matrix.tocoo()
        doc = {
            "format": "conic-debug-v1",
            "sense": "minimize",
            "objective": self.objective_coeffs.tolist(),
            "offset": self.constraint_offset.tolist(),
            "matrix": {
                "shape": list(self.constraint_matrix.shape),
                "rows": coo.row.tolist(),
                "cols": coo.col.tolist(),
                "vals": coo.data.tolist(),
            },
            "cones": {
                "zero": self.cones.zero_dim,
                "nonneg": self.cones.nonneg_dim,
                "soc": list(self.cones.soc_dims),
                "psd_sides": list(self.cones.psd_side_lengths),
                "exp": self.cones.exp_count,
            },
            "variable_names": self.variable_names,
            "row_labels": self.row_labels,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)


@dataclass
class SolverSettings:
    eps_abs: float = 1e-7
    eps_rel: float = 1e-7
    eps_infeas: float = 1e-8
    max_iters: int = 200_000
    scaling_enabled: bool = True
    relaxation: float = 1.5      # over-relaxation step parameter
    ruiz_iters: int = 15
    check_interval: int = 25
    dense_threshold: int = 4000  # above this many columns, use CG instead of Cholesky

    def __post_init__(self):
        if self.eps_abs <= 0 or self.eps_rel <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0.0 < self.relaxation < 2.0:
            raise ValueError("relaxation must lie in (0, 2)")


OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
MAX_ITERS = "MaxIters"


@dataclass(frozen=True)
class SolveResult:
    status: str
    primal: np.ndarray
    dual: np.ndarray
    slack: np.ndarray
    objective_value: float
    residuals: tuple
    iterations: int

    @property
    def optimal(self):
        return self.status == OPTIMAL


def residuals(problem, primal, dual, slack=None):
    """KKT residual norms (primal_res, dual_res, gap) for a candidate triple.

    With ``slack=None`` the implied slack proj_K(b - Ax) is used, so the
    primal residual reduces to the distance of b - Ax from the cone.
    Cone violations of the supplied slack/dual are folded into the norms.
    """
    a = problem.constraint_matrix
    b = problem.constraint_offset
    c = problem.objective_coeffs
    x = np.asarray(primal, dtype=float)
    y = np.asarray(dual, dtype=float)
    if x.size != problem.num_vars or y.size != problem.num_rows:
        raise DimensionMismatch("primal/dual lengths do not match problem")
    proj = cn.ConeProjector(problem.cones)
    implied = b - a @ x
    if slack is None:
        s = proj.project(implied)
    else:
        s = np.asarray(slack, dtype=float)
        if s.size != problem.num_rows:
            raise DimensionMismatch("slack length does not match problem")
    pres = np.hypot(np.linalg.norm(a @ x + s - b), np.linalg.norm(s - proj.project(s)))
    dres = np.hypot(np.linalg.norm(a.T @ y + c), np.linalg.norm(y - proj.project_dual(y)))
    gap = abs(float(c @ x) + float(b @ y))
    return (float(pres), float(dres), float(gap))


def constraint_violations(problem, primal):
    """Per-row-label worst violation of b - Ax against its cone block.

    Returns a dict label -> violation (0 when satisfied).  Rows without
    labels are aggregated under their cone kind.
    """
    s = problem.slack_at(primal)
    proj = cn.ConeProjector(problem.cones)
    resid = np.abs(s - proj.project(s))
    out = {}
    labels = problem.row_labels or []
    covered = np.zeros(problem.num_rows, dtype=bool)
    for label, kind, start, size in labels:
        sl = slice(start, start + size)
        out[label] = max(out.get(label, 0.0), float(resid[sl].max(initial=0.0)))
        covered[sl] = True
    if not covered.all():
        for kind, start, size, _ in problem.cones.blocks():
            sl = slice(start, start + size)
            if not covered[sl].all():
                key = f"unlabelled:{kind}"
                out[key] = max(out.get(key, 0.0), float(resid[sl].max(initial=0.0)))
    return out


class _Rows:
    """Triplet accumulator for scalar rows within one cone family."""

    def __init__(self):
        self.coeffs = []   # list of dict col -> val
        self.offsets = []
        self.labels = []

    def add(self, coeffs, offset, label):
        self.coeffs.append(coeffs)
        self.offsets.append(float(offset))
        self.labels.append(label)

    def __len__(self):
        return len(self.offsets)


@dataclass
class HermVar:
    """Handle to a complex Hermitian matrix variable (hvec parameterization)."""

    name: str
    side: int
    cols: np.ndarray  # hvec parameter columns, length side*side

    def value(self, x):
        return cn.hmat(np.asarray(x)[self.cols])


class ProblemBuilder:
    """Incremental assembly of a ConicProblem.

    Rows may be added in any order; the build step lays cone blocks out in
    canonical order.  Assembly is sequential and deterministic for a fixed
    call sequence.
    """

    def __init__(self):
        self._nvars = 0
        self._var_names = []
        self._obj = {}
        self._zero = _Rows()
        self._nonneg = _Rows()
        self._soc = []      # (rows: list[(coeffs, offset)], label)
        self._psd = []      # (side, offset_vec, [(cols, dense_block)], label)
        self._exp = []      # ([(coeffs, offset)]*3, label)

    # -- variables ---------------------------------------------------------

    def scalar_vars(self, name, count):
        cols = np.arange(self._nvars, self._nvars + count)
        self._nvars += count
        if count == 1:
            self._var_names.append(name)
        else:
            self._var_names.extend(f"{name}[{i}]" for i in range(count))
        return cols

    def hermitian_var(self, name, side):
        dim = cn.herm_dim(side)
        cols = np.arange(self._nvars, self._nvars + dim)
        self._nvars += dim
        self._var_names.extend(f"{name}.p{i}" for i in range(dim))
        return HermVar(name, side, cols)

    # -- objective ---------------------------------------------------------

    def add_objective(self, cols, vals):
        for c, v in zip(np.atleast_1d(cols), np.atleast_1d(vals)):
            self._obj[int(c)] = self._obj.get(int(c), 0.0) + float(v)

    # -- scalar rows ---------------------------------------------------------

    def add_zero_row(self, coeffs, rhs, label="eq"):
        """sum coeffs[col]*x[col] == rhs."""
        self._zero.add(dict(coeffs), rhs, label)

    def add_nonneg_row(self, coeffs, rhs, label="ineq"):
        """sum coeffs[col]*x[col] <= rhs."""
        self._nonneg.add(dict(coeffs), rhs, label)

    def require_nonneg(self, cols, label="bound"):
        for c in np.atleast_1d(cols):
            self._nonneg.add({int(c): -1.0}, 0.0, label)

    def add_soc_block(self, rows, label="soc"):
        """rows = [(coeffs, offset), ...]; (offset_i - a_i'x)_i must lie in the
        second-order cone, first row the radius."""
        self._soc.append(([(dict(c), float(o)) for c, o in rows], label))

    def add_exp_block(self, rows, label="exp"):
        if len(rows) != 3:
            raise DimensionMismatch("exponential cone block needs exactly 3 rows")
        self._exp.append(([(dict(c), float(o)) for c, o in rows], label))

    # -- PSD blocks ----------------------------------------------------------

    def add_herm_psd_block(self, side, const=None, scalar_terms=(),
                           congruence_terms=(), label="lmi"):
        """Affine Hermitian LMI  H0 + sum x_c Hc + sum coef * P^H X P >= 0.

        scalar_terms: (col, H) pairs with H Hermitian of the given side.
        congruence_terms: (herm_var, P, coef) with P of shape (var.side, side).
        Emitted as a real PSD block of side 2*side.
        """
        dim = cn.svec_dim(2 * side)
        offset = (np.zeros(dim) if const is None
                  else cn.embed_svec(np.asarray(const, dtype=complex)))
        pieces = []
        for col, h in scalar_terms:
            colvec = cn.embed_svec(np.asarray(h, dtype=complex))
            pieces.append((np.array([int(col)]), colvec[:, None]))
        for var, p, coef in congruence_terms:
            p = np.asarray(p, dtype=complex)
            if p.shape != (var.side, side):
                raise DimensionMismatch(
                    f"congruence shape {p.shape} incompatible with "
                    f"({var.side}, {side})"
                )
            block = float(coef) * cn.congruence_map_cached(p)
            pieces.append((var.cols, block))
        self._psd.append((2 * side, offset, pieces, label))

    def add_real_psd_block(self, side, const=None, scalar_terms=(), label="lmi"):
        """Affine real symmetric LMI  S0 + sum x_c Sc >= 0."""
        dim = cn.svec_dim(side)
        offset = (np.zeros(dim) if const is None
                  else cn.svec(np.asarray(const, dtype=float), check=False))
        pieces = [
            (np.array([int(col)]), cn.svec(np.asarray(s, float), check=False)[:, None])
            for col, s in scalar_terms
        ]
        self._psd.append((side, offset, pieces, label))

    def add_herm_psd_var(self, var, label=None):
        """Constrain a Hermitian matrix variable to be PSD."""
        block = cn.identity_embed_map(var.side)
        self._psd.append(
            (2 * var.side, np.zeros(block.shape[0]),
             [(var.cols, block)], label or f"{var.name}>=0")
        )

    # -- build ---------------------------------------------------------------

    def build(self):
        chunks_r, chunks_c, chunks_v = [], [], []
        offsets = []
        labels = []
        row = 0

        def push(rr, cc, vv):
            chunks_r.append(np.asarray(rr, dtype=np.int64))
            chunks_c.append(np.asarray(cc, dtype=np.int64))
            chunks_v.append(np.asarray(vv, dtype=float))

        def emit_scalar(bucket, kind):
            nonlocal row
            for coeffs, off, label in zip(bucket.coeffs, bucket.offsets, bucket.labels):
                items = [(c, v) for c, v in coeffs.items() if v != 0.0]
                if items:
                    push([row] * len(items), [c for c, _ in items],
                         [v for _, v in items])
                offsets.append(off)
                labels.append((label, kind, row, 1))
                row += 1

        def emit_rowlist(rows, kind, label):
            nonlocal row
            start = row
            for coeffs, off in rows:
                items = [(c, v) for c, v in coeffs.items() if v != 0.0]
                if items:
                    push([row] * len(items), [c for c, _ in items],
                         [v for _, v in items])
                offsets.append(off)
                row += 1
            labels.append((label, kind, start, row - start))

        emit_scalar(self._zero, "zero")
        emit_scalar(self._nonneg, "nonneg")
        soc_dims = []
        for rows, label in self._soc:
            soc_dims.append(len(rows))
            emit_rowlist(rows, "soc", label)
        psd_sides = []
        for side, offset, pieces, label in self._psd:
            psd_sides.append(side)
            start = row
            dim = offset.size
            offsets.extend(offset.tolist())
            for cols, block in pieces:
                rr, cc = np.nonzero(block)
                # A carries the negated coefficients: slack = offset - A x
                push(start + rr, np.asarray(cols)[cc], -block[rr, cc])
            labels.append((label, "psd", start, dim))
            row += dim
        for rows, label in self._exp:
            emit_rowlist(rows, "exp", label)

        spec = cn.ConeSpec(
            zero_dim=len(self._zero),
            nonneg_dim=len(self._nonneg),
            soc_dims=tuple(soc_dims),
            psd_side_lengths=tuple(psd_sides),
            exp_count=len(self._exp),
        )
        if chunks_r:
            rows_i = np.concatenate(chunks_r)
            cols_i = np.concatenate(chunks_c)
            vals_i = np.concatenate(chunks_v)
        else:
            rows_i = cols_i = vals_i = np.empty(0)
        mat = sp.coo_matrix(
            (vals_i, (rows_i, cols_i)), shape=(row, self._nvars)
        ).tocsr()
        mat.sum_duplicates()
        c = np.zeros(self._nvars)
        for col, v in self._obj.items():
            c[col] = v
        return ConicProblem(
            objective_coeffs=c,
            constraint_matrix=mat,
            constraint_offset=np.array(offsets),
            cones=spec,
            variable_names=self._var_names,
            row_labels=labels,
        )
