"""Compilation of the robust allocation problem into conic programs.

The worst-case rate and leakage requirements over norm-ball uncertainty are
turned into linear matrix inequalities by the S-procedure (one multiplier
per uncertainty set); hypograph slack variables carry the per-snapshot rate
floors and leakage caps.  Two alternating blocks emerge:

* duration/beamforming block: snapshot durations, beamforming matrices, and
  the artificial-noise covariance, with the rate/leakage slacks held fixed
  (rank constraint dropped; tight by the dual argument, checked numerically
  downstream);
* slack block: rate floors, SINR floors, leakage caps and leakage-SINR caps
  with the physical variables held fixed, the concave log leakage constraint
  replaced by its tangent underestimator at the previous iterate.

Everything is compiled in normalized units: user channels are scaled to unit
norm (noise scaled along), eavesdropper distance errors are relative to the
distance estimate, durations are in milliseconds, and the objective is
pre-scaled by (scan period / max duration) so solver tolerances are
meaningful across rows.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .conic import ProblemBuilder, hvec
from .conic.problem import HermVar
from .errors import ConfigError, DimensionMismatch

log = logging.getLogger(__name__)

LN2 = np.log(2.0)


# ---------------------------------------------------------------------------
# decision-variable handles for the LMI emitters


@dataclass(frozen=True)
class Scalar:
    """Reference to one scalar decision column."""

    col: int


@dataclass(frozen=True)
class ScaledMatrix:
    """Matrix p * base with a scalar decision column p (fixed-direction beams)."""

    col: int
    base: np.ndarray


def _matrix_terms(handle, sandwich, coef, const_acc, scalar_acc, cong_acc):
    """Accumulate contribution coef * P' M P with M given by ``handle``.

    coef is a plain float; handle is an ndarray (constant), HermVar, or
    ScaledMatrix.  Results land in the constant matrix, per-column scalar
    coefficient matrices, or congruence term list respectively.
    """
    if coef == 0.0:
        return
    if isinstance(handle, HermVar):
        cong_acc.append((handle, sandwich, coef))
    elif isinstance(handle, ScaledMatrix):
        mat = coef * (sandwich.conj().T @ handle.base @ sandwich)
        scalar_acc[handle.col] = scalar_acc.get(handle.col, 0.0) + mat
    else:
        const_acc += coef * (sandwich.conj().T @ np.asarray(handle) @ sandwich)


def _corner(n, value):
    out = np.zeros((n + 1, n + 1), dtype=complex)
    out[n, n] = value
    return out


def user_sinr_lmi(builder, h_est, err_radius, noise_power, sinr, mult_col,
                  beams, an_cov, own, label="user-sinr"):
    """Robust user-SINR constraint as one LMI of side N_T + 1.

    Enforces, for every channel error within the ball of ``err_radius``,

        h' W_own h >= sinr * ( sum_{r != own} h' W_r h + h' V h + noise ),

    through the S-procedure with multiplier column ``mult_col``.  ``sinr``
    is a float or Scalar; beam/noise-covariance handles may be constant
    matrices, HermVar, or ScaledMatrix, but products of two decision
    variables are rejected.
    """
    h = np.asarray(h_est, dtype=complex).reshape(-1)
    n = h.size
    if err_radius == 0.0:
        log.warning("%s: zero CSI error radius; the S-procedure multiplier "
                    "loses strict interior", label)
    sandwich = np.hstack([np.eye(n, dtype=complex), h[:, None]])  # maps to side n+1
    const = np.zeros((n + 1, n + 1), dtype=complex)
    scalars = {}
    congs = []

    lam_is_var = isinstance(sinr, Scalar)
    # hat{W} = sinr * (sum_other + V) - W_own; the LMI subtracts C' hat{W} C
    if lam_is_var:
        total = np.zeros((n, n), dtype=complex)
        for r, w in enumerate(beams):
            if r == own:
                continue
            if isinstance(w, (HermVar, ScaledMatrix)):
                raise ConfigError("SINR floor and beams cannot both be variables")
            total = total + np.asarray(w)
        if isinstance(an_cov, (HermVar, ScaledMatrix)):
            raise ConfigError("SINR floor and AN covariance cannot both be variables")
        total = total + np.asarray(an_cov)
        mat = -(sandwich.conj().T @ total @ sandwich) + _corner(n, -noise_power)
        scalars[sinr.col] = scalars.get(sinr.col, 0.0) + mat
        _matrix_terms(beams[own], sandwich, 1.0, const, scalars, congs)
    else:
        lam = float(sinr)
        for r, w in enumerate(beams):
            coef = 1.0 if r == own else -lam
            _matrix_terms(w, sandwich, coef, const, scalars, congs)
        _matrix_terms(an_cov, sandwich, -lam, const, scalars, congs)
        const += _corner(n, -lam * noise_power)

    mult_mat = np.eye(n + 1, dtype=complex)
    mult_mat[n, n] = -float(err_radius) ** 2
    scalars[int(mult_col)] = scalars.get(int(mult_col), 0.0) + mult_mat

    builder.add_herm_psd_block(
        n + 1,
        const=const,
        scalar_terms=list(scalars.items()),
        congruence_terms=congs,
        label=label,
    )


def eve_leak_lmi(builder, g_est, ball_radius, leak_sinr, mult_col, margin_col,
                 beam, an_cov, label="eve-leak"):
    """Robust leakage-margin constraint as one LMI of side N_T + 1.

    Enforces, for every deviation within the ball of ``ball_radius`` around
    the LoS estimate,

        leak_sinr * g' V g - g' W g >= margin,

    with multiplier column ``mult_col`` and margin column ``margin_col``.
    """
    g = np.asarray(g_est, dtype=complex).reshape(-1)
    n = g.size
    if ball_radius == 0.0:
        log.warning("%s: zero uncertainty ball; the S-procedure multiplier "
                    "loses strict interior", label)
    sandwich = np.hstack([np.eye(n, dtype=complex), g[:, None]])
    const = np.zeros((n + 1, n + 1), dtype=complex)
    scalars = {}
    congs = []

    kap_is_var = isinstance(leak_sinr, Scalar)
    # tilde{W} = W - leak_sinr * V; the LMI subtracts E' tilde{W} E
    _matrix_terms(beam, sandwich, -1.0, const, scalars, congs)
    if kap_is_var:
        if isinstance(an_cov, (HermVar, ScaledMatrix)):
            raise ConfigError("leakage SINR cap and AN covariance cannot both "
                              "be variables")
        mat = sandwich.conj().T @ np.asarray(an_cov) @ sandwich
        scalars[leak_sinr.col] = scalars.get(leak_sinr.col, 0.0) + mat
    else:
        _matrix_terms(an_cov, sandwich, float(leak_sinr), const, scalars, congs)

    mult_mat = np.eye(n + 1, dtype=complex)
    mult_mat[n, n] = -float(ball_radius) ** 2
    scalars[int(mult_col)] = scalars.get(int(mult_col), 0.0) + mult_mat
    scalars[int(margin_col)] = scalars.get(int(margin_col), 0.0) + _corner(n, -1.0)

    builder.add_herm_psd_block(
        n + 1,
        const=const,
        scalar_terms=list(scalars.items()),
        congruence_terms=congs,
        label=label,
    )


def eve_distance_lmi(builder, noise_scale, dist_rel, leak_sinr, margin_col,
                     mult_col, label="eve-dist"):
    """Distance-uncertainty side of the leakage margin, as a 2x2 LMI.

    In distance-normalized units (errors relative to the estimate) the
    constraint  margin >= -leak_sinr * noise_scale * (1 + delta)^2  for all
    |delta| <= dist_rel  becomes

        [[mult + k*c, k*c], [k*c, margin + k*c - mult*dist_rel^2]] >= 0,

    with c = ``noise_scale`` (receiver noise times (1+rho) d^2 / path gain)
    and k the leakage-SINR cap (float or Scalar).
    """
    c = float(noise_scale)
    d2 = float(dist_rel) ** 2
    mult_term = np.array([[1.0, 0.0], [0.0, -d2]])
    margin_term = np.array([[0.0, 0.0], [0.0, 1.0]])
    kappa_term = c * np.ones((2, 2))
    scalar_terms = [(int(mult_col), mult_term), (int(margin_col), margin_term)]
    const = None
    if isinstance(leak_sinr, Scalar):
        scalar_terms.append((leak_sinr.col, kappa_term))
    else:
        const = float(leak_sinr) * kappa_term
    builder.add_real_psd_block(2, const=const, scalar_terms=scalar_terms,
                               label=label)


# ---------------------------------------------------------------------------
# slack and allocation containers


@dataclass
class SlackState:
    """Per-(user, snapshot) hypograph slacks and S-procedure multipliers.

    rate/sinr are the worst-case achievable-rate floor and its SINR twin;
    leak_rate/leak_sinr cap the per-eavesdropper information leakage;
    eve_margin splits the leakage constraint between the fading ball and the
    distance interval; the mult arrays are the S-procedure multipliers.
    """

    rate: np.ndarray        # (K, M) bits/s/Hz
    sinr: np.ndarray        # (K, M)
    leak_rate: np.ndarray   # (K, M) bits/s/Hz
    leak_sinr: np.ndarray   # (K, M)
    eve_margin: np.ndarray  # (K, J, M)
    user_mult: np.ndarray   # (K, M)    >= 0
    eve_mult: np.ndarray    # (K, J, M) >= 0
    dist_mult: np.ndarray   # (K, J, M) >= 0

    def copy(self):
        return SlackState(*(np.array(getattr(self, f)) for f in (
            "rate", "sinr", "leak_rate", "leak_sinr", "eve_margin",
            "user_mult", "eve_mult", "dist_mult")))

    def consistency_gaps(self):
        """(max 2^rate-1-sinr, max log2(1+leak_sinr)-leak_rate); both should
        be <= 0 after any block solve."""
        g1 = float(np.max(2.0 ** self.rate - 1.0 - self.sinr))
        g2 = float(np.max(np.log2(1.0 + np.maximum(self.leak_sinr, 0.0))
                          - self.leak_rate))
        return g1, g2


@dataclass
class Allocation:
    """One scan's physical resources.

    durations in seconds; beam_matrices indexed [user, snapshot];
    beamformers filled in after rank-one extraction.
    """

    durations: np.ndarray          # (M,) s
    beam_matrices: np.ndarray      # (K, M, N, N) complex PSD
    an_covariances: np.ndarray     # (M, N, N) complex PSD
    beamformers: np.ndarray = None  # (K, M, N) complex or None

    @property
    def n_snapshots(self):
        return self.durations.size

    def snapshot_beams(self, m):
        return [self.beam_matrices[k, m] for k in range(self.beam_matrices.shape[0])]

    def info_power(self, m):
        return float(sum(np.trace(w).real for w in self.snapshot_beams(m)))

    def an_power(self, m):
        return float(np.trace(self.an_covariances[m]).real)


def evaluate_raw_objective(alloc, slacks, scan_period):
    """Duration-weighted sum of (rate floor - leakage cap), bits/s/Hz."""
    per_snapshot = np.sum(slacks.rate - slacks.leak_rate, axis=0)  # (M,)
    if per_snapshot.size != alloc.durations.size:
        raise DimensionMismatch("slack/duration snapshot counts differ")
    return float(np.dot(alloc.durations, per_snapshot) / scan_period)


def linearize_leakage(kap_prev):
    """Tangent coefficients (a, b) with a + b*k <= log2(1+k), equal at kap_prev."""
    kp = np.maximum(np.asarray(kap_prev, dtype=float), 0.0)
    b = 1.0 / (LN2 * (1.0 + kp))
    a = np.log2(1.0 + kp) - kp * b
    return a, b


# ---------------------------------------------------------------------------
# compile context


@dataclass
class CompileContext:
    """Scenario data in compile units (unit user channels, ms durations)."""

    n_antennas: int
    n_users: int
    n_eves: int
    n_snapshots: int
    p_max: float                 # W
    t_total: float               # ms
    t_min: float                 # ms
    t_max: float                 # ms
    r_req: np.ndarray            # (K,)
    r_tol: np.ndarray            # (K,)
    h_unit: np.ndarray           # (K, N) unit-norm channel estimates
    user_err: np.ndarray         # (K, M) error radii, unit-channel scale
    user_noise: np.ndarray       # (K,) noise over squared channel norm
    g_bar: np.ndarray            # (J, N) sqrt(rho) * steering
    eve_ball: np.ndarray         # (J, M) aggregate deviation radii
    eve_noise_scale: np.ndarray  # (J,) sigma_E^2 (1+rho) d^2 / path gain
    eve_dist_rel: np.ndarray     # (J, M) distance bound over estimate
    r_d: np.ndarray              # (M, N, N) desired covariances
    delta_d: np.ndarray          # (M,) mismatch budgets

    def __post_init__(self):
        if self.n_users < 1 or self.n_eves < 1:
            raise ConfigError("need at least one user and one eavesdropper")
        if self.t_min * self.n_snapshots > self.t_total + 1e-12:
            raise ConfigError("minimum durations alone exceed the scan period")
        if not (0 < self.t_min <= self.t_max):
            raise ConfigError("need 0 < t_min <= t_max")
        if np.any(self.user_err == 0.0) or np.any(self.eve_ball == 0.0):
            log.warning("zero uncertainty radius: S-procedure loses strict "
                        "interior (non-robust compile)")

    @property
    def objective_to_rate(self):
        """Multiply a compiled objective value by this to recover -F."""
        return self.t_max / self.t_total


@dataclass
class BlockLayout:
    """Column bookkeeping for one compiled block."""

    t_cols: np.ndarray = None
    beam_vars: list = None        # [k][m] HermVar or ScaledMatrix
    an_vars: list = None          # [m] HermVar
    rate_cols: np.ndarray = None
    sinr_cols: np.ndarray = None
    leak_rate_cols: np.ndarray = None
    leak_sinr_cols: np.ndarray = None
    margin_cols: np.ndarray = None   # (K, J, M)
    user_mult_cols: np.ndarray = None
    eve_mult_cols: np.ndarray = None
    dist_mult_cols: np.ndarray = None
    beam_basis: np.ndarray = None    # (K, N) fixed directions, if any


def _slack_cols(builder, ctx):
    k, j, m = ctx.n_users, ctx.n_eves, ctx.n_snapshots
    margin = builder.scalar_vars("margin", k * j * m).reshape(k, j, m)
    user_mult = builder.scalar_vars("userMult", k * m).reshape(k, m)
    eve_mult = builder.scalar_vars("eveMult", k * j * m).reshape(k, j, m)
    dist_mult = builder.scalar_vars("distMult", k * j * m).reshape(k, j, m)
    builder.require_nonneg(user_mult.ravel(), "userMult>=0")
    builder.require_nonneg(eve_mult.ravel(), "eveMult>=0")
    builder.require_nonneg(dist_mult.ravel(), "distMult>=0")
    return margin, user_mult, eve_mult, dist_mult


def build_block1(ctx, slacks, beam_basis=None, pin_durations=None,
                 power_objective=False):
    """Duration/beamforming block: rate and leakage slacks held fixed.

    With ``beam_basis`` (K unit directions) the beam matrices are scalar
    powers along fixed rank-one directions instead of full matrix variables.
    ``pin_durations`` (ms) freezes the durations with equality rows, and
    ``power_objective`` swaps the duration objective for total transmit
    power; together they form the refinement pass that picks the
    power-minimal point of the optimal face, where the beamforming matrices
    are rank one (the duration objective alone leaves the power multiplier
    inactive, so first-order iterates settle mid-face at higher rank).
    Returns (problem, layout).
    """
    k_n, j_n, m_n, nt = ctx.n_users, ctx.n_eves, ctx.n_snapshots, ctx.n_antennas
    b = ProblemBuilder()
    t_cols = b.scalar_vars("t", m_n)
    beams = []
    for k in range(k_n):
        row = []
        for m in range(m_n):
            if beam_basis is None:
                row.append(b.hermitian_var(f"W[{k},{m}]", nt))
            else:
                p = b.scalar_vars(f"p[{k},{m}]", 1)
                u = beam_basis[k]
                row.append(ScaledMatrix(int(p[0]), np.outer(u, u.conj())))
        beams.append(row)
    an = [b.hermitian_var(f"V[{m}]", nt) for m in range(m_n)]
    margin, user_mult, eve_mult, dist_mult = _slack_cols(b, ctx)

    hvec_eye = hvec(np.eye(nt))
    if power_objective:
        for m in range(m_n):
            for k in range(k_n):
                w = beams[k][m]
                if isinstance(w, HermVar):
                    b.add_objective(w.cols, hvec_eye)
                else:
                    b.add_objective([w.col], [float(np.trace(w.base).real)])
            b.add_objective(an[m].cols, hvec_eye)
    else:
        # maximize duration-weighted fixed slack margins
        net = np.sum(slacks.rate - slacks.leak_rate, axis=0)  # (M,)
        b.add_objective(t_cols, -net / ctx.t_max)
    for m in range(m_n):
        coeffs = {}
        for k in range(k_n):
            w = beams[k][m]
            if isinstance(w, HermVar):
                for i, c in enumerate(w.cols):
                    if hvec_eye[i] != 0.0:
                        coeffs[int(c)] = hvec_eye[i]
            else:
                coeffs[w.col] = float(np.trace(w.base).real)
        for i, c in enumerate(an[m].cols):
            if hvec_eye[i] != 0.0:
                coeffs[int(c)] = hvec_eye[i]
        b.add_nonneg_row(coeffs, ctx.p_max, f"power[{m}]")

        # beam mismatch ball around the desired covariance
        target = hvec(ctx.r_d[m], check=False)
        rows = [({}, float(np.sqrt(ctx.delta_d[m])))]
        for i in range(target.size):
            coeffs = {}
            for k in range(k_n):
                w = beams[k][m]
                if isinstance(w, HermVar):
                    coeffs[int(w.cols[i])] = 1.0
                else:
                    base_vec = hvec(w.base, check=False)
                    if base_vec[i] != 0.0:
                        coeffs[w.col] = base_vec[i]
            coeffs[int(an[m].cols[i])] = 1.0
            rows.append((coeffs, float(target[i])))
        b.add_soc_block(rows, f"mismatch[{m}]")

    b.add_nonneg_row({int(c): 1.0 for c in t_cols}, ctx.t_total, "scan-budget")
    for k in range(k_n):
        b.add_nonneg_row(
            {int(t_cols[m]): -float(slacks.rate[k, m]) for m in range(m_n)},
            -float(ctx.r_req[k]) * ctx.t_total, f"avg-rate[{k}]")
        b.add_nonneg_row(
            {int(t_cols[m]): float(slacks.leak_rate[k, m]) for m in range(m_n)},
            float(ctx.r_tol[k]) * ctx.t_total, f"avg-leak[{k}]")
    # duration box; the refinement pass pins the box to the incumbent values
    # so the problem shape (and warm starts) carry over between the passes
    hi = ctx.t_max * np.ones(m_n) if pin_durations is None else pin_durations
    lo = ctx.t_min * np.ones(m_n) if pin_durations is None else pin_durations
    for m in range(m_n):
        b.add_nonneg_row({int(t_cols[m]): 1.0}, float(hi[m]), f"t-max[{m}]")
        b.add_nonneg_row({int(t_cols[m]): -1.0}, -float(lo[m]), f"t-min[{m}]")

    for m in range(m_n):
        b.add_herm_psd_var(an[m])
        for k in range(k_n):
            w = beams[k][m]
            if isinstance(w, HermVar):
                b.add_herm_psd_var(w)
            else:
                b.require_nonneg([w.col], f"p[{k},{m}]>=0")

    for k in range(k_n):
        for m in range(m_n):
            user_sinr_lmi(
                b, ctx.h_unit[k], float(ctx.user_err[k, m]),
                float(ctx.user_noise[k]), float(slacks.sinr[k, m]),
                int(user_mult[k, m]), [beams[r][m] for r in range(k_n)],
                an[m], k, label=f"user-sinr[{k},{m}]")
            for j in range(j_n):
                eve_leak_lmi(
                    b, ctx.g_bar[j], float(ctx.eve_ball[j, m]),
                    float(slacks.leak_sinr[k, m]), int(eve_mult[k, j, m]),
                    int(margin[k, j, m]), beams[k][m], an[m],
                    label=f"eve-leak[{k},{j},{m}]")
                eve_distance_lmi(
                    b, float(ctx.eve_noise_scale[j]),
                    float(ctx.eve_dist_rel[j, m]),
                    float(slacks.leak_sinr[k, m]), int(margin[k, j, m]),
                    int(dist_mult[k, j, m]), label=f"eve-dist[{k},{j},{m}]")

    layout = BlockLayout(
        t_cols=t_cols, beam_vars=beams, an_vars=an, margin_cols=margin,
        user_mult_cols=user_mult, eve_mult_cols=eve_mult,
        dist_mult_cols=dist_mult,
        beam_basis=None if beam_basis is None else np.asarray(beam_basis))
    return b.build(), layout


def extract_block1(layout, result, ctx):
    """Allocation (durations in seconds) and multiplier values from a solve."""
    x = result.primal
    k_n, m_n, nt = ctx.n_users, ctx.n_snapshots, ctx.n_antennas
    w = np.empty((k_n, m_n, nt, nt), dtype=complex)
    for k in range(k_n):
        for m in range(m_n):
            hv = layout.beam_vars[k][m]
            if isinstance(hv, HermVar):
                w[k, m] = hv.value(x)
            else:
                w[k, m] = max(x[hv.col], 0.0) * hv.base
    v = np.stack([layout.an_vars[m].value(x) for m in range(m_n)])
    alloc = Allocation(
        durations=x[layout.t_cols] * 1e-3,
        beam_matrices=w,
        an_covariances=v,
    )
    extras = {
        "eve_margin": x[layout.margin_cols.ravel()].reshape(layout.margin_cols.shape),
        "user_mult": x[layout.user_mult_cols.ravel()].reshape(layout.user_mult_cols.shape),
        "eve_mult": x[layout.eve_mult_cols.ravel()].reshape(layout.eve_mult_cols.shape),
        "dist_mult": x[layout.dist_mult_cols.ravel()].reshape(layout.dist_mult_cols.shape),
    }
    return alloc, extras


def build_block2(ctx, alloc, linearization, slacks_prev=None):
    """Slack block: physical variables fixed, leakage log linearized.

    ``alloc`` carries the fixed durations/matrices; ``linearization`` is the
    (a, b) pair of tangent coefficients per (user, snapshot).
    Returns (problem, layout).
    """
    k_n, j_n, m_n = ctx.n_users, ctx.n_eves, ctx.n_snapshots
    a_lin, b_lin = linearization
    t_ms = alloc.durations * 1e3
    b = ProblemBuilder()
    rate = b.scalar_vars("rate", k_n * m_n).reshape(k_n, m_n)
    sinr = b.scalar_vars("sinr", k_n * m_n).reshape(k_n, m_n)
    leak_rate = b.scalar_vars("leakRate", k_n * m_n).reshape(k_n, m_n)
    leak_sinr = b.scalar_vars("leakSinr", k_n * m_n).reshape(k_n, m_n)
    margin, user_mult, eve_mult, dist_mult = _slack_cols(b, ctx)
    b.require_nonneg(sinr.ravel(), "sinr>=0")
    b.require_nonneg(leak_sinr.ravel(), "leakSinr>=0")

    for k in range(k_n):
        for m in range(m_n):
            wt = float(t_ms[m] / ctx.t_max)
            b.add_objective([rate[k, m]], [-wt])
            b.add_objective([leak_rate[k, m]], [wt])

    for k in range(k_n):
        b.add_nonneg_row(
            {int(rate[k, m]): -float(t_ms[m]) for m in range(m_n)},
            -float(ctx.r_req[k]) * ctx.t_total, f"avg-rate[{k}]")
        b.add_nonneg_row(
            {int(leak_rate[k, m]): float(t_ms[m]) for m in range(m_n)},
            float(ctx.r_tol[k]) * ctx.t_total, f"avg-leak[{k}]")

    for k in range(k_n):
        for m in range(m_n):
            # rate floor vs SINR floor: 2^rate <= 1 + sinr, one exp cone
            b.add_exp_block(
                [({int(rate[k, m]): -LN2}, 0.0), ({}, 1.0),
                 ({int(sinr[k, m]): -1.0}, 1.0)],
                f"rate-cone[{k},{m}]")
            # leakage cap vs leakage SINR: tangent underestimator
            b.add_nonneg_row(
                {int(leak_rate[k, m]): -1.0,
                 int(leak_sinr[k, m]): float(b_lin[k, m])},
                -float(a_lin[k, m]), f"leak-line[{k},{m}]")
            user_sinr_lmi(
                b, ctx.h_unit[k], float(ctx.user_err[k, m]),
                float(ctx.user_noise[k]), Scalar(int(sinr[k, m])),
                int(user_mult[k, m]),
                [alloc.beam_matrices[r, m] for r in range(k_n)],
                alloc.an_covariances[m], k, label=f"user-sinr[{k},{m}]")
            for j in range(j_n):
                eve_leak_lmi(
                    b, ctx.g_bar[j], float(ctx.eve_ball[j, m]),
                    Scalar(int(leak_sinr[k, m])), int(eve_mult[k, j, m]),
                    int(margin[k, j, m]), alloc.beam_matrices[k, m],
                    alloc.an_covariances[m], label=f"eve-leak[{k},{j},{m}]")
                eve_distance_lmi(
                    b, float(ctx.eve_noise_scale[j]),
                    float(ctx.eve_dist_rel[j, m]),
                    Scalar(int(leak_sinr[k, m])), int(margin[k, j, m]),
                    int(dist_mult[k, j, m]), label=f"eve-dist[{k},{j},{m}]")

    layout = BlockLayout(
        rate_cols=rate, sinr_cols=sinr, leak_rate_cols=leak_rate,
        leak_sinr_cols=leak_sinr, margin_cols=margin,
        user_mult_cols=user_mult, eve_mult_cols=eve_mult,
        dist_mult_cols=dist_mult)
    return b.build(), layout


def extract_block2(layout, result):
    """SlackState from a slack-block solution, with hypograph consistency
    clamps (rate floor limited by its SINR twin, caps nonnegative)."""
    x = result.primal

    def grab(cols):
        return x[cols.ravel()].reshape(cols.shape).copy()

    sinr = np.maximum(grab(layout.sinr_cols), 0.0)
    rate = np.minimum(grab(layout.rate_cols), np.log2(1.0 + sinr))
    leak_sinr = np.maximum(grab(layout.leak_sinr_cols), 0.0)
    return SlackState(
        rate=rate,
        sinr=sinr,
        leak_rate=grab(layout.leak_rate_cols),
        leak_sinr=leak_sinr,
        eve_margin=grab(layout.margin_cols),
        user_mult=np.maximum(grab(layout.user_mult_cols), 0.0),
        eve_mult=np.maximum(grab(layout.eve_mult_cols), 0.0),
        dist_mult=np.maximum(grab(layout.dist_mult_cols), 0.0),
    )
