"""Offline design of per-snapshot sensing covariances and beam-gain tools.

Each scanning snapshot transmits one highly-directional beam whose covariance
is fitted offline: a weighted least-squares match of the array gain
a(theta)' R a(theta) to a flat-top target over a dense grid, subject to a
trace (power) budget and positive semidefiniteness.  The fit runs in
sin-space on a grid shifted to the beam center, so designs at different
centers are exact phase-rotations of each other (ULA patterns depend on the
sine of the angle only).  Designed covariances are cached on disk keyed by
the scan geometry.
"""

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import ArrayGeometry, steering_vector
from .conic import ProblemBuilder, SolverSettings, hvec, solve
from .errors import ConfigError, DimensionMismatch, SolverFailure

SECTOR_HALFWIDTH = np.deg2rad(60.0)


@dataclass(frozen=True)
class BeamSpec:
    """Target for one snapshot beam."""

    center_angle: float          # rad
    mainlobe_width: float        # rad, sector width / M
    power_budget: float          # W
    angle_grid: np.ndarray       # rad, sector-wide evaluation grid
    sidelobe_weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "angle_grid",
                           np.asarray(self.angle_grid, dtype=float))
        if self.mainlobe_width <= 0:
            raise ConfigError("mainlobe width must be positive")
        if self.power_budget <= 0:
            raise ConfigError("power budget must be positive")
        grid = self.angle_grid
        if grid.size < 8 or grid.min() > -SECTOR_HALFWIDTH + 1e-9 \
                or grid.max() < SECTOR_HALFWIDTH - 1e-9:
            raise ConfigError("angle grid must cover the sector")


@dataclass(frozen=True)
class DesiredCovariance:
    """PSD covariance realizing one sensing beam, trace pinned to the budget."""

    matrix: np.ndarray
    trace: float

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", mat)
        eigs = np.linalg.eigvalsh(mat)
        if eigs.min() < -1e-9 * max(eigs.max(), 1.0):
            raise ConfigError("desired covariance must be PSD")
        if abs(eigs.sum() - self.trace) > 1e-6 * max(self.trace, 1.0):
            raise ConfigError("trace does not match the declared budget")


def default_angle_grid(step_deg=1.0):
    return np.deg2rad(np.arange(-60.0, 60.0 + 1e-9, step_deg))


def sector_beam_specs(n_snapshots, power_budget, grid_step_deg=1.0,
                      sidelobe_weight=1.0):
    """Beam specs tiling the 120-degree sector with M equal slices."""
    width = 2 * SECTOR_HALFWIDTH / n_snapshots
    grid = default_angle_grid(grid_step_deg)
    centers = -SECTOR_HALFWIDTH + (np.arange(n_snapshots) + 0.5) * width
    return [
        BeamSpec(center_angle=float(c), mainlobe_width=float(width),
                 power_budget=float(power_budget), angle_grid=grid,
                 sidelobe_weight=sidelobe_weight)
        for c in centers
    ]


def _sin_space_gain_rows(geom, sin_grid):
    """hvec(a a') rows so that row @ hvec(R) = a' R a on the sin grid."""
    n = np.arange(geom.n_antennas)
    phases = 2.0 * np.pi * geom.normalized_spacing * sin_grid[:, None] * n[None, :]
    steer = np.exp(1j * phases)
    rows = np.empty((sin_grid.size, geom.n_antennas ** 2))
    for g in range(sin_grid.size):
        rows[g] = hvec(np.outer(steer[g], steer[g].conj()), check=False)
    return rows


def _design_grid(spec, geom):
    """Sin-space fit grid: one full pattern period, centered on the beam.

    ULA gains repeat in sin-space with period 1/spacing, so covering one
    period makes sidelobe control complete regardless of wrapping, and the
    center-shifted grid makes designs at different centers exact phase
    rotations of each other.
    """
    period = 1.0 / geom.normalized_spacing
    step = spec.angle_grid[1] - spec.angle_grid[0]
    count = int(np.ceil(period / step))
    base = (np.arange(count) - count // 2) * (period / count)
    s0 = np.sin(spec.center_angle)
    half_s = np.sin(spec.mainlobe_width / 2.0)
    target_mask = np.abs(base) <= half_s
    return base, s0, target_mask


def _target_level(spec, geom):
    """Flat-top level that spends the whole trace budget in the mainlobe.

    Mean gain over one sin-space period equals Tr(R), so the level
    P * period / (2 sin(width/2)) is the unique power-consistent choice;
    it degenerates to P when the mainlobe spans the whole period.
    """
    period = 1.0 / geom.normalized_spacing
    return spec.power_budget * period / (2.0 * np.sin(spec.mainlobe_width / 2.0))


def design_desired_covariance(spec, geom, settings=None):
    """Weighted least-squares covariance fit of a flat-top beam.

    The fit grid is a full sin-space period shifted to the beam center so
    the design is center-covariant.
    """
    if settings is None:
        settings = SolverSettings()
    nt = geom.n_antennas
    level = _target_level(spec, geom)
    base, s0, mask = _design_grid(spec, geom)
    sin_grid = s0 + base
    target = np.where(mask, level, 0.0)
    weights = np.where(mask, 1.0, spec.sidelobe_weight)

    rows = _sin_space_gain_rows(geom, sin_grid)
    builder = ProblemBuilder()
    rvar = builder.hermitian_var("R", nt)
    epi = builder.scalar_vars("resid", 1)
    builder.add_objective(epi, [1.0])
    builder.add_zero_row(
        dict(zip(rvar.cols.tolist(), hvec(np.eye(nt)).tolist())),
        spec.power_budget, "trace",
    )
    soc_rows = [({int(epi[0]): -1.0}, 0.0)]
    sqw = np.sqrt(weights)
    for g in range(sin_grid.size):
        coeffs = {
            int(c): float(sqw[g] * rows[g, i])
            for i, c in enumerate(rvar.cols) if rows[g, i] != 0.0
        }
        soc_rows.append((coeffs, float(sqw[g] * target[g])))
    builder.add_soc_block(soc_rows, "fit")
    builder.add_herm_psd_var(rvar)
    problem = builder.build()
    result = solve(problem, settings)
    if not result.optimal:
        raise SolverFailure(f"beam design failed with status {result.status}")

    mat = rvar.value(result.primal)
    eigs, vecs = np.linalg.eigh(mat)
    eigs = np.clip(eigs, 0.0, None)
    mat = (vecs * eigs) @ vecs.conj().T
    mat *= spec.power_budget / np.trace(mat).real
    return DesiredCovariance(matrix=mat, trace=spec.power_budget)


def fit_residual(cov, spec, geom):
    """Weighted squared gain error of a covariance against its beam target."""
    level = _target_level(spec, geom)
    base, s0, mask = _design_grid(spec, geom)
    target = np.where(mask, level, 0.0)
    weights = np.where(mask, 1.0, spec.sidelobe_weight)
    rows = _sin_space_gain_rows(geom, s0 + base)
    gains = rows @ hvec(np.asarray(cov), check=False)
    return float(np.sum(weights * (gains - target) ** 2))


def beam_gain(cov, geom, angle):
    """Array gain a(theta)' R a(theta); real and nonnegative for PSD R."""
    a = steering_vector(geom, angle)
    return float(np.real(a.conj() @ np.asarray(cov) @ a))


def pattern_mismatch(w_list, v_cov, desired):
    """Squared Frobenius distance of the transmit covariance to the target."""
    desired = np.asarray(desired)
    total = np.asarray(v_cov, dtype=complex).copy()
    for w in w_list:
        w = np.asarray(w)
        if w.shape != desired.shape:
            raise DimensionMismatch("beam matrix shape mismatch")
        total += w
    if total.shape != desired.shape:
        raise DimensionMismatch("covariance shape mismatch")
    return float(np.linalg.norm(total - desired, "fro") ** 2)


def mismatch_tolerance(desired, factor):
    """Beam mismatch budget: factor times the squared target norm."""
    return float(factor) * float(np.linalg.norm(np.asarray(desired), "fro") ** 2)


# ---------------------------------------------------------------------------
# disk cache


def _cache_dir():
    root = os.environ.get("ISACALLOC_CACHE")
    path = Path(root) if root else Path.home() / ".cache" / "isacalloc"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cache_key(n_snapshots, geom, power_budget, grid_step_deg, sidelobe_weight):
    return (
        f"beams_M{n_snapshots}_N{geom.n_antennas}"
        f"_w{geom.normalized_spacing:g}_P{power_budget:.6g}"
        f"_g{grid_step_deg:g}_s{sidelobe_weight:g}.json"
    )


def design_scan_set(n_snapshots, geom, power_budget, grid_step_deg=1.0,
                    sidelobe_weight=1.0, settings=None, cache=True):
    """Design (or load from cache) the M sensing covariances of one scan."""
    path = _cache_dir() / _cache_key(
        n_snapshots, geom, power_budget, grid_step_deg, sidelobe_weight
    )
    if cache and path.exists():
        with open(path) as fh:
            doc = json.load(fh)
        mats = [
            np.array(entry["re"]) + 1j * np.array(entry["im"])
            for entry in doc["covariances"]
        ]
        return [DesiredCovariance(m, doc["power_budget"]) for m in mats]

    specs = sector_beam_specs(n_snapshots, power_budget, grid_step_deg,
                              sidelobe_weight)
    designs = [design_desired_covariance(s, geom, settings) for s in specs]
    if cache:
        doc = {
            "n_snapshots": n_snapshots,
            "n_antennas": geom.n_antennas,
            "spacing": geom.normalized_spacing,
            "power_budget": power_budget,
            "grid_step_deg": grid_step_deg,
            "sidelobe_weight": sidelobe_weight,
            "covariances": [
                {
                    "re": d.matrix.real.tolist(),
                    "im": d.matrix.imag.tolist(),
                    "residual": fit_residual(d.matrix, s, geom),
                }
                for d, s in zip(designs, specs)
            ],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)
    return designs
