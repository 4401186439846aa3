"""Channel models, bounded uncertainty sets, and the circle-bound geometry.

Users have a norm-ball CSI error around the estimated channel.  Potential
eavesdroppers (previously sensed targets) have a Ricean channel whose LoS
angle, per-element multi-path fading, and distance are each only known
within bounds.  The joint angle/fading uncertainty of one channel element is
a crescent-shaped region; it is covered by a circle whose radius combines
the fading bound with the chord subtended by the worst phase excursion
(law of cosines).  Stacking the per-element circle radii gives a norm ball
for the whole uncertainty vector, which downstream S-procedure machinery
can digest.  Because the per-element covering must hold for angle errors on
both sides of the estimate, the phase excursion used here is the larger of
the two one-sided excursions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateRegion, IndexOutOfRange

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array with normalized element spacing (in wavelengths)."""

    n_antennas: int
    normalized_spacing: float = 0.5

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ConfigError("array needs at least one antenna")
        if self.normalized_spacing <= 0:
            raise ConfigError("antenna spacing must be positive")


@dataclass
class UserChannelModel:
    """Estimated user channel with per-snapshot norm-ball CSI error."""

    estimate: np.ndarray          # complex (N_T,)
    error_radius: np.ndarray      # (M,) ball radii, one per snapshot
    noise_power: float            # receiver noise, W

    def __post_init__(self):
        self.estimate = np.asarray(self.estimate, dtype=complex)
        self.error_radius = np.atleast_1d(np.asarray(self.error_radius, float))
        if np.any(self.error_radius < 0):
            raise ConfigError("CSI error radius must be nonnegative")
        if self.noise_power <= 0:
            raise ConfigError("noise power must be positive")


@dataclass
class EveChannelModel:
    """Sensed eavesdropper: Ricean channel with bounded parameter uncertainty."""

    angle_estimate: float         # rad
    distance_estimate: float      # m
    ricean_factor: float
    angle_bound: np.ndarray       # (M,) rad
    fading_bounds: np.ndarray     # (M, N_T) per-element magnitude bounds
    distance_bound: np.ndarray    # (M,) m
    noise_power: float            # W
    path_gain_ref: float          # linear power gain at 1 m

    def __post_init__(self):
        self.angle_bound = np.atleast_1d(np.asarray(self.angle_bound, float))
        self.fading_bounds = np.atleast_2d(np.asarray(self.fading_bounds, float))
        self.distance_bound = np.atleast_1d(np.asarray(self.distance_bound, float))
        if self.ricean_factor < 0:
            raise ConfigError("Ricean factor must be nonnegative")
        if np.any(self.angle_bound < 0) or np.any(self.fading_bounds < 0) \
                or np.any(self.distance_bound < 0):
            raise ConfigError("uncertainty bounds must be nonnegative")
        if np.any(self.distance_estimate <= self.distance_bound):
            raise ConfigError(
                "distance estimate must exceed the distance bound"
            )
        if self.noise_power <= 0 or self.path_gain_ref <= 0:
            raise ConfigError("noise power and path gain must be positive")


@dataclass(frozen=True)
class EveBound:
    """Covering-circle data for one eavesdropper in one snapshot."""

    phase_arcs: np.ndarray       # (N_T,) worst phase excursion per element
    element_radii: np.ndarray    # (N_T,) covering circle radii
    aggregate_radius: float      # norm-ball radius for the stacked deviation
    los_estimate: np.ndarray     # sqrt(rho) * steering vector at the estimate


def steering_vector(geom, angle):
    """ULA response; element n carries phase 2*pi*spacing*n*sin(angle)."""
    n = np.arange(geom.n_antennas)
    return np.exp(1j * TWO_PI * geom.normalized_spacing * n * np.sin(angle))


def phase_arc(geom, angle_estimate, angle_bound, n):
    """Worst per-element phase excursion over angle errors within the bound.

    ``n`` is the 1-based antenna index; element 1 carries no phase.  sin is
    not symmetric around the estimate, so both edges of the angle interval
    are checked and the larger excursion returned.
    """
    if not 1 <= n <= geom.n_antennas:
        raise IndexOutOfRange(f"antenna index {n} outside 1..{geom.n_antennas}")
    base = TWO_PI * geom.normalized_spacing * (n - 1)
    s0 = np.sin(angle_estimate)
    plus = abs(base * (s0 - np.sin(angle_estimate + angle_bound)))
    minus = abs(base * (s0 - np.sin(angle_estimate - angle_bound)))
    return max(plus, minus)


def _phase_arcs(geom, angle_estimate, angle_bound):
    idx = np.arange(geom.n_antennas)
    base = TWO_PI * geom.normalized_spacing * idx
    s0 = np.sin(angle_estimate)
    plus = np.abs(base * (s0 - np.sin(angle_estimate + angle_bound)))
    minus = np.abs(base * (s0 - np.sin(angle_estimate - angle_bound)))
    return np.maximum(plus, minus)


def element_bound(ricean_factor, fading_bound_n, phase_arc_n):
    """Covering circle radius for one element: fading bound plus the chord
    of the LoS arc (law of cosines)."""
    if fading_bound_n < 0 or phase_arc_n < 0 or ricean_factor < 0:
        raise ConfigError("element bound inputs must be nonnegative")
    return fading_bound_n + np.sqrt(2.0 * ricean_factor) * np.sqrt(
        max(1.0 - np.cos(phase_arc_n), 0.0)
    )


def bound_accuracy_ratio(ricean_factor, fading_bound_n, phase_arc_n):
    """Area of the true (crescent) uncertainty region over the covering circle.

    The true region around an arc of radius R = sqrt(ricean_factor) swept by
    phase +-phase_arc_n, thickened by the fading radius r, has area
    pi r^2 + 4 R r phi (two half-disk caps plus a ring sector).  Always in
    (0, 1] for r > 0; equals 1 when the arc degenerates to a point.
    """
    big_r = np.sqrt(ricean_factor)
    r = float(fading_bound_n)
    phi = float(phase_arc_n)
    if r == 0.0 and phi == 0.0:
        raise DegenerateRegion("both fading bound and phase arc are zero")
    actual = np.pi * r * r + 4.0 * big_r * r * phi
    cover = np.pi * element_bound(ricean_factor, r, phi) ** 2
    if cover == 0.0:
        raise DegenerateRegion("covering circle has zero radius")
    return actual / cover


def eve_bound(model, geom, snapshot=0):
    """Per-element covering radii and the stacked norm-ball radius."""
    arcs = _phase_arcs(geom, model.angle_estimate, model.angle_bound[snapshot])
    betas = model.fading_bounds[snapshot]
    radii = betas + np.sqrt(2.0 * model.ricean_factor) * np.sqrt(
        np.maximum(1.0 - np.cos(arcs), 0.0)
    )
    los = np.sqrt(model.ricean_factor) * steering_vector(geom, model.angle_estimate)
    return EveBound(
        phase_arcs=arcs,
        element_radii=radii,
        aggregate_radius=float(np.sqrt(np.sum(radii ** 2))),
        los_estimate=los,
    )


# ---------------------------------------------------------------------------
# samplers (validation only; the worst-case design needs just the bounds)


def _complex_ball(rng, dim, radius, size, on_boundary=False):
    """Uniform draws from the complex dim-ball (or its sphere)."""
    g = rng.normal(size=(size, dim)) + 1j * rng.normal(size=(size, dim))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    dirs = g / norms
    if on_boundary:
        scale = np.full((size, 1), radius)
    else:
        scale = radius * rng.uniform(size=(size, 1)) ** (1.0 / (2 * dim))
    return dirs * scale


def sample_user_channel(model, rng, snapshot=0, size=None, boundary=False):
    """Estimate plus a CSI error drawn uniformly from the error ball."""
    mu = model.error_radius[snapshot]
    squeeze = size is None
    count = 1 if squeeze else size
    delta = _complex_ball(rng, model.estimate.size, mu, count, boundary)
    out = model.estimate[None, :] + delta
    return out[0] if squeeze else out


def sample_eve_deviations(model, geom, rng, snapshot=0, size=1, boundary=False):
    """Draw (angle error, fading vector, distance error) tuples.

    With ``boundary=True`` every component sits on its bound (angle at
    +-phi, fading magnitudes at beta with random phases, distance at +-D),
    which is where worst cases of the robust constraints live.
    """
    phi = model.angle_bound[snapshot]
    betas = model.fading_bounds[snapshot]
    dbound = model.distance_bound[snapshot]
    n = geom.n_antennas
    if boundary:
        dtheta = phi * rng.choice([-1.0, 1.0], size=size)
        mags = np.broadcast_to(betas, (size, n))
        dd = dbound * rng.choice([-1.0, 1.0], size=size)
    else:
        dtheta = rng.uniform(-phi, phi, size=size)
        mags = betas[None, :] * np.sqrt(rng.uniform(size=(size, n)))
        dd = rng.uniform(-dbound, dbound, size=size)
    phases = rng.uniform(0.0, TWO_PI, size=(size, n))
    fading = mags * np.exp(1j * phases)
    return dtheta, fading, dd


def eve_channel_from_deviations(model, geom, dtheta, fading, dd):
    """Assemble Ricean channels from sampled deviations (vectorized)."""
    angles = model.angle_estimate + np.atleast_1d(dtheta)
    n = np.arange(geom.n_antennas)
    phases = TWO_PI * geom.normalized_spacing * np.sin(angles)[:, None] * n[None, :]
    los = np.sqrt(model.ricean_factor) * np.exp(1j * phases)
    dist = model.distance_estimate + np.atleast_1d(dd)
    pre = np.sqrt(
        model.path_gain_ref / ((1.0 + model.ricean_factor) * dist ** 2)
    )
    return pre[:, None] * (los + np.atleast_2d(fading))


def sample_eve_channel(model, geom, rng, snapshot=0, size=None, boundary=False):
    """Draw channels with all three uncertainties sampled inside their bounds."""
    squeeze = size is None
    count = 1 if squeeze else size
    dtheta, fading, dd = sample_eve_deviations(
        model, geom, rng, snapshot, count, boundary
    )
    out = eve_channel_from_deviations(model, geom, dtheta, fading, dd)
    return out[0] if squeeze else out
