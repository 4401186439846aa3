"""First-order conic solver on a homogeneous self-dual embedding.

Douglas-Rachford / operator splitting applied to the embedding of the pair

    minimize   c'x                     maximize  -b'y
    s.t.       Ax + s = b, s in K      s.t.      A'y + c = 0, y in K*,

with iterate u = (x, y, tau), v = (0, s, kappa).  Each iteration solves one
fixed linear system (prefactorized), projects onto R^n x K* x R_+, and
updates the reflection variable.  Feasible problems converge to a KKT point;
infeasible or unbounded ones produce improving-ray certificates, read off
the iterates when tau -> 0.

Problem data is optionally equilibrated (Ruiz row/column scaling, uniform
within each cone block) before the splitting; convergence is always checked
against residuals of the original, unscaled data.
"""

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import NumericalBreakdown
from . import cones as cn
from .problem import (INFEASIBLE, MAX_ITERS, OPTIMAL, UNBOUNDED, ConicProblem,
                      SolveResult, SolverSettings)


def _group_bounds(cones):
    sizes = np.array(cones.row_groups(), dtype=int)
    ends = np.cumsum(sizes)
    starts = ends - sizes
    return starts, ends


def _row_abs_max(a_csr, weights):
    """Per-row max of |A_ij| * weights[j]."""
    m = a_csr.shape[0]
    data = np.abs(a_csr.data) * weights[a_csr.indices]
    out = np.zeros(m)
    ptr = a_csr.indptr
    nonempty = np.flatnonzero(np.diff(ptr) > 0)
    if nonempty.size:
        out[nonempty] = np.maximum.reduceat(data, ptr[nonempty])
    return out


def _ruiz_equilibrate(a_csr, cones, iters):
    """Block-uniform Ruiz scaling; returns (d, e) with scaled matrix D A E."""
    m, n = a_csr.shape
    d = np.ones(m)
    e = np.ones(n)
    a_csc = a_csr.tocsc()
    starts, ends = _group_bounds(cones)
    for _ in range(iters):
        row = _row_abs_max(a_csr, e) * d
        gmax = np.maximum.reduceat(row, starts) if starts.size else row
        grow = np.repeat(gmax, ends - starts)
        grow[grow <= 1e-12] = 1.0
        d /= np.sqrt(grow)
        col = _row_abs_max(sp.csr_matrix(a_csc.T), d) * e
        col[col <= 1e-12] = 1.0
        e /= np.sqrt(col)
    np.clip(d, 1e-6, 1e6, out=d)
    np.clip(e, 1e-6, 1e6, out=e)
    return d, e


class _LinearCore:
    """Solves (I + Q)u = w through the reduced system (I + A'A)."""

    def __init__(self, a_csr, dense):
        self.a = a_csr
        self.at = a_csr.T.tocsr()
        self.n = a_csr.shape[1]
        self.dense = dense
        if dense:
            gram = np.eye(self.n) + (self.at @ self.a).toarray()
            try:
                self.chol = scipy.linalg.cho_factor(gram, lower=True,
                                                    check_finite=False)
            except scipy.linalg.LinAlgError as exc:  # pragma: no cover
                raise NumericalBreakdown(f"Cholesky failed: {exc}") from exc
            self.op = None
        else:
            def matvec(x):
                return x + self.at @ (self.a @ x)

            self.op = spla.LinearOperator((self.n, self.n), matvec=matvec)
            self.chol = None

    def solve_gram(self, rhs):
        if self.dense:
            return scipy.linalg.cho_solve(self.chol, rhs, check_finite=False)
        sol, info = spla.cg(self.op, rhs, rtol=1e-12, atol=0.0, maxiter=10 * self.n)
        if info != 0:
            raise NumericalBreakdown(f"CG failed to converge (info={info})")
        return sol

    def solve_m(self, zx, zy):
        """[[I, A'], [-A, I]] (px, py) = (zx, zy)."""
        px = self.solve_gram(zx - self.at @ zy)
        py = zy + self.a @ px
        return px, py


def solve(problem, settings=None, initial=None):
    """Solve a ConicProblem; deterministic for fixed settings and data.

    ``initial`` is an optional (x0, y0, s0) warm-start hint.
    """
    if settings is None:
        settings = SolverSettings()
    if not isinstance(problem, ConicProblem):
        raise TypeError("expected a ConicProblem")

    a0 = problem.constraint_matrix
    b0 = problem.constraint_offset
    c0 = problem.objective_coeffs
    m, n = a0.shape
    cones = problem.cones
    proj = cn.ConeProjector(cones)

    if settings.scaling_enabled:
        d, e = _ruiz_equilibrate(a0, cones, settings.ruiz_iters)
    else:
        d, e = np.ones(m), np.ones(n)
    a = sp.csr_matrix(a0, copy=True)
    row_of_nnz = np.repeat(np.arange(m), np.diff(a0.indptr))
    a.data = a0.data * d[row_of_nnz] * e[a0.indices]
    bs = d * b0
    cs = e * c0
    scale_b = 1.0 / max(np.linalg.norm(bs), 1e-6)
    scale_c = 1.0 / max(np.linalg.norm(cs), 1e-6)
    bs = bs * scale_b
    cs = cs * scale_c

    core = _LinearCore(a, dense=(n <= settings.dense_threshold))
    q = np.concatenate([cs, bs])
    hq_x, hq_y = core.solve_m(q[:n], q[n:])
    hq = np.concatenate([hq_x, hq_y])
    denom = 1.0 + q @ hq

    # iterate storage: u = (x, y, tau), v = (0, s, kappa)
    u = np.zeros(n + m + 1)
    v = np.zeros(n + m + 1)
    u[-1] = 1.0
    v[-1] = 1.0
    if initial is not None:
        x0, y0, s0 = initial
        if x0 is not None and len(x0) == n and np.all(np.isfinite(x0)):
            u[:n] = (x0 / e) / scale_b
        if y0 is not None and len(y0) == m and np.all(np.isfinite(y0)):
            u[n:n + m] = (y0 / d) * scale_c
        if s0 is not None and len(s0) == m and np.all(np.isfinite(s0)):
            v[n:n + m] = (s0 * d) / scale_b
        v[-1] = 0.0

    norm_b = np.linalg.norm(b0)
    norm_c = np.linalg.norm(c0)
    alpha = settings.relaxation
    best = None

    def unscale(u_vec, v_vec, tau):
        x = e * u_vec[:n] / (scale_b * tau)
        y = d * u_vec[n:n + m] / (scale_c * tau)
        s = (v_vec[n:n + m] / d) / (scale_b * tau)
        return x, y, s

    def check_convergence(u_vec, v_vec):
        tau = u_vec[-1]
        if tau <= 1e-12:
            return None
        x, y, s = unscale(u_vec, v_vec, tau)
        ax = a0 @ x
        aty = a0.T @ y
        ctx = float(c0 @ x)
        bty = float(b0 @ y)
        pres = np.linalg.norm(ax + s - b0)
        dres = np.linalg.norm(aty + c0)
        gap = abs(ctx + bty)
        p_ok = pres <= settings.eps_abs + settings.eps_rel * max(
            np.linalg.norm(ax), np.linalg.norm(s), norm_b)
        d_ok = dres <= settings.eps_abs + settings.eps_rel * max(
            np.linalg.norm(aty), norm_c)
        g_ok = gap <= settings.eps_abs + settings.eps_rel * max(
            abs(ctx), abs(bty))
        return (x, y, s, ctx, (pres, dres, gap), p_ok and d_ok and g_ok)

    def check_certificates(u_vec, v_vec):
        # primal infeasibility: A'y ~ 0 with b'y < 0
        y_raw = d * u_vec[n:n + m] / scale_c
        bty = float(b0 @ y_raw)
        if bty < -1e-12:
            y_cert = y_raw / (-bty)
            y_cert = proj.project_dual(y_cert)
            resid = np.linalg.norm(a0.T @ y_cert)
            if (resid * max(norm_b, 1.0) <= settings.eps_infeas
                    and float(b0 @ y_cert) < -0.5):
                return INFEASIBLE, y_cert
        # unboundedness: Ax + s ~ 0 with c'x < 0
        x_raw = e * u_vec[:n] / scale_b
        s_raw = (v_vec[n:n + m] / d) / scale_b
        ctx = float(c0 @ x_raw)
        if ctx < -1e-12:
            x_cert = x_raw / (-ctx)
            s_cert = s_raw / (-ctx)
            resid = np.linalg.norm(a0 @ x_cert + s_cert)
            if resid * max(norm_c, 1.0) <= settings.eps_infeas:
                return UNBOUNDED, (x_cert, s_cert)
        return None

    iters_done = 0
    status = MAX_ITERS
    certificate = None
    for it in range(1, settings.max_iters + 1):
        iters_done = it
        w = u + v
        zx, zy = core.solve_m(w[:n], w[n:n + m])
        z = np.concatenate([zx, zy])
        tau_t = (w[-1] + q @ z) / denom
        z -= tau_t * hq
        # over-relaxed reflection
        tx = alpha * z + (1.0 - alpha) * u[:-1]
        ttau = alpha * tau_t + (1.0 - alpha) * u[-1]
        arg = np.empty_like(u)
        arg[:-1] = tx - v[:-1]
        arg[-1] = ttau - v[-1]
        u_next = arg.copy()
        u_next[n:n + m] = proj.project_dual(arg[n:n + m])
        u_next[-1] = max(arg[-1], 0.0)
        v[:-1] += u_next[:-1] - tx
        v[-1] += u_next[-1] - ttau
        u = u_next

        if it % settings.check_interval == 0 or it == settings.max_iters:
            if not np.all(np.isfinite(u)):
                raise NumericalBreakdown("iterates diverged to non-finite values")
            res = check_convergence(u, v)
            if res is not None:
                x, y, s, ctx, rtrip, ok = res
                best = (x, y, s, ctx, rtrip)
                if ok:
                    status = OPTIMAL
                    break
            cert = check_certificates(u, v)
            if cert is not None:
                status, certificate = cert
                break

    if status == OPTIMAL:
        x, y, s, ctx, rtrip = best
        return SolveResult(OPTIMAL, x, y, s, ctx, rtrip, iters_done)
    if status == INFEASIBLE:
        return SolveResult(
            INFEASIBLE, np.full(n, np.nan), certificate, np.full(m, np.nan),
            np.inf, (np.inf, np.inf, np.inf), iters_done)
    if status == UNBOUNDED:
        x_cert, s_cert = certificate
        return SolveResult(
            UNBOUNDED, x_cert, np.full(m, np.nan), s_cert,
            -np.inf, (np.inf, np.inf, np.inf), iters_done)
    if best is not None:
        x, y, s, ctx, rtrip = best
        return SolveResult(MAX_ITERS, x, y, s, ctx, rtrip, iters_done)
    return SolveResult(
        MAX_ITERS, np.full(n, np.nan), np.full(m, np.nan), np.full(m, np.nan),
        np.nan, (np.inf, np.inf, np.inf), iters_done)
