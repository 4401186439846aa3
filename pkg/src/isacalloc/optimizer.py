"""Alternating optimization of the compiled allocation problem.

One run seeds the rate/leakage slacks so the average-rate and leakage
budgets hold with equality, validates feasibility with a single
duration/beamforming solve (an infeasible seed is an outage, a reportable
outcome rather than an error), then alternates:

* duration/beamforming block (slacks fixed), and
* slack block, itself an inner loop that re-linearizes the concave leakage
  log around the previous leakage-SINR cap until its objective settles.

Both blocks keep the previous iterate feasible, so the duration-weighted
net-rate objective is nondecreasing along the whole solve.  Beamforming
matrices of the relaxed block are rank one at optimality (strong-duality
argument); extraction checks this numerically and fails loudly otherwise.
"""

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .conic import MAX_ITERS, OPTIMAL, SolverSettings, solve
from .errors import ConfigError, MaxInnerIterations, RankViolation
from .reformulation import (Allocation, SlackState, build_block1,
                            build_block2, evaluate_raw_objective,
                            extract_block1, extract_block2, linearize_leakage)


@dataclass
class BcdSettings:
    eps_ia: float = 1e-2          # inner relative-objective tolerance
    eps_bcd: float = 1e-3         # outer relative-objective tolerance
    max_outer: int = 40
    max_inner: int = 25
    rank_tol: float = 1e-5        # second/first eigenvalue ratio threshold
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if not (0 < self.eps_ia < 1 and 0 < self.eps_bcd < 1):
            raise ConfigError("tolerances must lie in (0, 1)")
        if self.rank_tol <= 0:
            raise ConfigError("rank tolerance must be positive")


CONVERGED = "Converged"
OUTAGE = "Outage"
MAXITERS = "MaxIters"


@dataclass
class BcdTrace:
    """Objective history and solver statistics of one run."""

    objectives: list = field(default_factory=list)        # F per outer cycle
    fine_objectives: list = field(default_factory=list)   # (phase, F) per solve
    inner_counts: list = field(default_factory=list)
    solver_stats: list = field(default_factory=list)
    status: str = MAXITERS
    wall_time_s: float = 0.0

    def record_solve(self, phase, result):
        self.solver_stats.append({
            "phase": phase,
            "status": result.status,
            "iterations": result.iterations,
            "residuals": [float(r) for r in result.residuals],
        })

    def to_jsonl(self):
        lines = []
        for i, f_val in enumerate(self.objectives):
            rec = {"iteration": i + 1, "objective": f_val}
            if i < len(self.inner_counts):
                rec["inner_iterations"] = self.inner_counts[i]
            lines.append(json.dumps(rec))
        lines.append(json.dumps({"status": self.status,
                                 "wall_time_s": round(self.wall_time_s, 3)}))
        return "\n".join(lines) + "\n"


@dataclass
class BcdResult:
    status: str
    allocation: Allocation = None
    slacks: SlackState = None
    trace: BcdTrace = None

    @property
    def outage(self):
        return self.status == OUTAGE


@dataclass
class InitResult:
    outage: bool
    allocation: Allocation = None
    slacks: SlackState = None
    solve_result: object = None
    warm: tuple = None


def _objective(ctx, alloc, slacks):
    return evaluate_raw_objective(alloc, slacks, ctx.t_total * 1e-3)


def seed_slacks(ctx):
    """Slack seed holding the rate and leakage budget rows with equality."""
    k_n, j_n, m_n = ctx.n_users, ctx.n_eves, ctx.n_snapshots
    t_seed = min(max(ctx.t_total / m_n, ctx.t_min), ctx.t_max)
    sum_t = m_n * t_seed
    rate0 = np.repeat((ctx.r_req * ctx.t_total / sum_t)[:, None], m_n, axis=1)
    leak0 = np.repeat(np.asarray(ctx.r_tol, float)[:, None], m_n, axis=1)
    kap0 = 2.0 ** leak0 - 1.0
    margin0 = np.empty((k_n, j_n, m_n))
    for j in range(j_n):
        margin0[:, j, :] = (-kap0 * ctx.eve_noise_scale[j]
                            * (1.0 + ctx.eve_dist_rel[j]) ** 2)
    return SlackState(
        rate=rate0,
        sinr=2.0 ** rate0 - 1.0,
        leak_rate=leak0,
        leak_sinr=kap0,
        eve_margin=margin0,
        user_mult=np.zeros((k_n, m_n)),
        eve_mult=np.zeros((k_n, j_n, m_n)),
        dist_mult=np.zeros((k_n, j_n, m_n)),
    )


def solve_duration_block(ctx, slacks, settings, beam_basis=None, warm=None,
                         trace=None, phase="block1"):
    """Two-pass duration/beamforming solve.

    Pass one maximizes the duration-weighted objective; pass two pins the
    durations and minimizes total transmit power over the unchanged feasible
    set.  The refinement leaves the objective value intact but selects the
    power-minimal point of the optimal face, which is where the beamforming
    matrices are rank one (the duration objective alone does not activate
    the power multiplier that forces rank one, and operator-splitting
    iterates settle in the face interior).

    Returns (alloc, extras, warm, result); alloc is None when pass one does
    not come back optimal.
    """
    problem, layout = build_block1(ctx, slacks, beam_basis)
    result = solve(problem, settings.solver, initial=warm)
    if trace is not None:
        trace.record_solve(phase, result)
    if result.status != OPTIMAL:
        return None, None, warm, result
    t_ms = result.primal[layout.t_cols]
    refine_prob, refine_layout = build_block1(
        ctx, slacks, beam_basis, pin_durations=t_ms, power_objective=True)
    refine = solve(refine_prob, settings.solver,
                   initial=(result.primal, result.dual, result.slack))
    if trace is not None:
        trace.record_solve(phase + "-refine", refine)
    if refine.status == OPTIMAL:
        alloc, extras = extract_block1(refine_layout, refine, ctx)
        warm = (refine.primal, refine.dual, refine.slack)
    else:
        # fall back on the unrefined optimum; rank extraction may reject it
        alloc, extras = extract_block1(layout, result, ctx)
        warm = (result.primal, result.dual, result.slack)
    return alloc, extras, warm, result


def initialize(ctx, settings=None, beam_basis=None, trace=None):
    """Seed the slacks and validate feasibility with one block solve.

    Returns an InitResult; an infeasible (or undecidable) seed problem is an
    outage, not an exception.
    """
    if settings is None:
        settings = BcdSettings()
    slacks = seed_slacks(ctx)
    alloc, extras, warm, result = solve_duration_block(
        ctx, slacks, settings, beam_basis, trace=trace, phase="block1-init")
    if alloc is None:
        return InitResult(outage=True, solve_result=result)
    slacks.eve_margin = extras["eve_margin"]
    slacks.user_mult = extras["user_mult"]
    slacks.eve_mult = extras["eve_mult"]
    slacks.dist_mult = extras["dist_mult"]
    return InitResult(outage=False, allocation=alloc, slacks=slacks,
                      solve_result=result, warm=warm)


def inner_approximation(ctx, alloc, slacks_in, settings=None, warm=None,
                        trace=None):
    """Slack block with tangent re-linearization of the leakage log.

    Iterates until the relative objective change drops below the inner
    tolerance and the leakage cap is consistent with its SINR cap
    (leak_rate >= log2(1 + leak_sinr)); the objective is nondecreasing
    because each tangent is exact at the expansion point.

    Returns (slacks, inner_iterations, warm_start).
    """
    if settings is None:
        settings = BcdSettings()
    slacks = slacks_in
    f_prev = _objective(ctx, alloc, slacks)
    gap = np.inf
    for it in range(1, settings.max_inner + 1):
        lin = linearize_leakage(slacks.leak_sinr)
        problem, layout = build_block2(ctx, alloc, lin)
        result = solve(problem, settings.solver, initial=warm)
        if trace is not None:
            trace.record_solve("block2", result)
        if result.status != OPTIMAL:
            raise MaxInnerIterations(
                f"slack block returned {result.status} at inner pass {it}")
        warm = (result.primal, result.dual, result.slack)
        slacks = extract_block2(layout, result)
        f_val = _objective(ctx, alloc, slacks)
        if trace is not None:
            trace.fine_objectives.append(("inner", f_val))
        _, gap = slacks.consistency_gaps()
        settled = abs(f_val - f_prev) <= settings.eps_ia * max(abs(f_prev), 1.0)
        f_prev = f_val
        if settled and gap <= 1e-9:
            return slacks, it, warm
    if gap <= 1e-6:
        # residual tangent error below the certification budget: close it
        slacks.leak_rate = np.maximum(
            slacks.leak_rate, np.log2(1.0 + np.maximum(slacks.leak_sinr, 0.0)))
        return slacks, settings.max_inner, warm
    raise MaxInnerIterations(
        f"leakage cap inconsistent by {gap:.2e} after "
        f"{settings.max_inner} passes")


def bcd_solve(ctx, settings=None, beam_basis=None):
    """Alternate the two blocks until the objective stabilizes.

    Returns a BcdResult whose status is Converged, Outage (seed infeasible),
    or MaxIters (iteration cap, trace still populated).
    """
    if settings is None:
        settings = BcdSettings()
    trace = BcdTrace()
    t0 = time.perf_counter()
    init = initialize(ctx, settings, beam_basis, trace)
    if init.outage:
        trace.status = OUTAGE
        trace.wall_time_s = time.perf_counter() - t0
        return BcdResult(OUTAGE, trace=trace)
    alloc, slacks = init.allocation, init.slacks
    warm1 = init.warm
    trace.fine_objectives.append(("block1", _objective(ctx, alloc, slacks)))
    warm2 = None
    status = MAXITERS
    f_prev = None
    for outer in range(1, settings.max_outer + 1):
        if outer > 1:
            new_alloc, extras, warm1, result = solve_duration_block(
                ctx, slacks, settings, beam_basis, warm1, trace)
            if new_alloc is None:
                status = MAXITERS
                break
            alloc = new_alloc
            slacks.eve_margin = extras["eve_margin"]
            trace.fine_objectives.append(("block1", _objective(ctx, alloc, slacks)))
        try:
            slacks, inner_iters, warm2 = inner_approximation(
                ctx, alloc, slacks, settings, warm2, trace)
        except MaxInnerIterations:
            status = MAXITERS
            break
        f_val = _objective(ctx, alloc, slacks)
        trace.objectives.append(f_val)
        trace.inner_counts.append(inner_iters)
        if f_prev is not None and abs(f_val - f_prev) <= settings.eps_bcd * max(
                abs(f_prev), 1.0):
            status = CONVERGED
            break
        f_prev = f_val
    alloc.beamformers = extract_beamformers(alloc.beam_matrices,
                                            settings.rank_tol)
    trace.status = status
    trace.wall_time_s = time.perf_counter() - t0
    return BcdResult(status, allocation=alloc, slacks=slacks, trace=trace)


def extract_beamformers(beam_matrices, rank_tol=1e-5, power_floor=1e-9):
    """Rank-one recovery with a fixed phase convention.

    Eigen-decomposes each beam matrix, requires the second/first eigenvalue
    ratio to stay within ``rank_tol`` (raises RankViolation otherwise), and
    returns sqrt(lead eigenvalue) times the lead eigenvector rotated so its
    largest-magnitude entry is real positive.  Matrices with lead eigenvalue
    at or below ``power_floor`` watts carry no information beam and map to
    the zero vector.
    """
    beam_matrices = np.asarray(beam_matrices)
    k_n, m_n, nt, _ = beam_matrices.shape
    out = np.zeros((k_n, m_n, nt), dtype=complex)
    for k in range(k_n):
        for m in range(m_n):
            eigvals, eigvecs = np.linalg.eigh(beam_matrices[k, m])
            lead = float(eigvals[-1])
            if lead <= power_floor:
                continue
            second = float(max(eigvals[-2], 0.0)) if nt > 1 else 0.0
            if second / lead > rank_tol:
                raise RankViolation(second / lead, k, m)
            vec = np.sqrt(lead) * eigvecs[:, -1]
            pivot = int(np.argmax(np.abs(vec)))
            vec = vec * np.exp(-1j * np.angle(vec[pivot]))
            out[k, m] = vec
    return out
