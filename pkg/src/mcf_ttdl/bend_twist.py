"""Bending and twisting: equivalent indices, threshold radius, crosstalk shape.

A bent fiber is treated as a straight one whose core indices are scaled by
``1 + r cos(theta) / R_b``. Radii of curvature are in mm, core positions in um.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegeneratePairError, DomainError, ShapeError
from .fiber_model import FiberCore, McfLink, group_delay

UM_PER_MM = 1e3
SWEEP_SAMPLES_PER_TURN = 720
QUAD_POINTS_PER_TURN = 1024
DEFAULT_FLOOR_DB = -90.0


@dataclass(frozen=True)
class BendState:
    bend_radius: float  # mm
    orientation: float = 0.0  # rad, azimuth of the bend's radial direction
    twist_rate: float = 0.0  # rad/m

    def __post_init__(self):
        if not self.bend_radius > 0:
            raise DomainError(f"bend radius must be > 0 (got {self.bend_radius})")
        if self.twist_rate < 0:
            raise DomainError("twist rate must be >= 0")

    def twist_turns(self, length_m: float) -> float:
        return self.twist_rate * length_m / (2 * math.pi)


def _bend_factor(r_um, theta, bend_radius_mm):
    if not np.all(np.asarray(bend_radius_mm) > 0):
        raise DomainError(f"bend radius must be > 0 (got {bend_radius_mm})")
    return 1.0 + (r_um / UM_PER_MM) * np.cos(theta) / bend_radius_mm


def equivalent_index(n_straight, r, theta, bend_radius):
    """Index seen by a core at (``r`` um, ``theta`` rad) in a fiber bent to ``bend_radius`` mm."""
    return n_straight * _bend_factor(r, theta, bend_radius)


def pair_threshold(n_a: float, n_b: float, pitch_um: float) -> float:
    """Largest bend radius (mm) at which two cores ``pitch_um`` apart can phase-match.

    The larger of the two indices sets the scale. Infinite for equal indices.
    """
    dn = abs(n_a - n_b)
    if dn == 0:
        return math.inf
    return (pitch_um / UM_PER_MM) * max(n_a, n_b) / dn


class Threshold(NamedTuple):
    radius: float  # mm
    pair: tuple


def threshold_bend_radius(link: McfLink) -> Threshold:
    if not link.adjacency:
        raise ShapeError("link has no adjacent pairs")
    best = None
    for a, b in link.adjacency:
        ra = pair_threshold(link.core(a).n_eff, link.core(b).n_eff, link.core_pitch)
        if math.isinf(ra):
            raise DegeneratePairError(
                f"cores {a} and {b} are adjacent with equal n_eff; no finite threshold radius"
            )
        if best is None or ra > best.radius:
            best = Threshold(ra, (a, b))
    return best


def optimize_arrangement(cores, slot_adjacency, n_slots: int | None = None, pitch: float = 35.0):
    """Assign cores to layout slots so that the threshold bend radius is smallest.

    ``slot_adjacency`` lists slot-index pairs of the template. Every permutation
    is scored; among equal optima the lexicographically smallest assignment
    (tuple of core ids by slot) wins. Returns ``(assignment, R_pk_mm)``.
    """
    cores = sorted(cores, key=lambda c: c.id)
    if n_slots is None:
        n_slots = 1 + max(max(p) for p in slot_adjacency) if slot_adjacency else len(cores)
    if len(cores) != n_slots:
        raise ShapeError(f"{len(cores)} cores for {n_slots} slots")
    if len(cores) > 9:
        raise ShapeError("exhaustive arrangement search is limited to 9 cores")
    ids = [c.id for c in cores]
    if len(cores) <= 2:
        assignment = tuple(ids)
        if not slot_adjacency:
            return assignment, math.nan
        r = max(pair_threshold(cores[a].n_eff, cores[b].n_eff, pitch) for a, b in slot_adjacency)
        return assignment, r

    n = np.array([c.n_eff for c in cores])
    table = np.array([[pair_threshold(x, y, pitch) if i != j else math.inf
                       for j, y in enumerate(n)] for i, x in enumerate(n)])
    perms = np.array(list(itertools.permutations(range(len(cores)))))
    edges = np.array(slot_adjacency)
    scores = table[perms[:, edges[:, 0]], perms[:, edges[:, 1]]].max(axis=1)
    k = int(np.argmin(scores))
    if math.isinf(scores[k]):
        raise DegeneratePairError("every arrangement places equal-index cores side by side")
    return tuple(ids[i] for i in perms[k]), float(scores[k])


def bent_group_delay(core: FiberCore, wavelength, bend: BendState):
    """Group delay (ps/km) of ``core`` in a fiber bent as ``bend``."""
    theta = core.theta - bend.orientation
    return group_delay(core, wavelength) * _bend_factor(core.r, theta, bend.bend_radius)


def bend_delay_variation(core: FiberCore, wavelength, bend: BendState):
    return bent_group_delay(core, wavelength, bend) - group_delay(core, wavelength)


def bent_dispersion(core: FiberCore, wavelength: float, bend: BendState, step: float = 0.5) -> float:
    """Dispersion (ps/(km nm)) of the bent core, by central difference of the bent delay."""
    hi = bent_group_delay(core, wavelength + step, bend)
    lo = bent_group_delay(core, wavelength - step, bend)
    return (hi - lo) / (2 * step)


def twist_averaged_delay(core: FiberCore, wavelength: float, bend_radius: float, twist_turns: float = 1):
    """Bent group delay averaged while the cross-section rotates ``twist_turns`` times.

    Composite trapezoid with 1024 points per turn, starting from the core's
    own azimuth. Integer turns give back the straight delay.
    """
    if not twist_turns > 0:
        raise DomainError(f"twist_turns must be > 0 (got {twist_turns})")
    if not bend_radius > 0:
        raise DomainError(f"bend radius must be > 0 (got {bend_radius})")
    n = max(2, math.ceil(QUAD_POINTS_PER_TURN * twist_turns))
    span = 2 * math.pi * twist_turns
    phi = np.linspace(0.0, span, n + 1)
    vals = group_delay(core, wavelength) * _bend_factor(core.r, core.theta + phi, bend_radius)
    return float(np.trapezoid(vals, phi) / span)


def twist_averaged_delay_exact(core: FiberCore, wavelength: float, bend_radius: float, twist_turns: float = 1):
    """Closed form of :func:`twist_averaged_delay`."""
    span = 2 * math.pi * twist_turns
    mean_cos = (math.sin(core.theta + span) - math.sin(core.theta)) / span
    return group_delay(core, wavelength) * (1.0 + (core.r / UM_PER_MM) * mean_cos / bend_radius)


@dataclass(frozen=True)
class CrosstalkCurve:
    radii: np.ndarray  # mm
    xtalk_db: np.ndarray  # worst adjacent pair per radius
    peak_radius: float  # mm
    critical_pair: tuple
    coupling: float  # 1/m


def calibrate_coupling(link: McfLink, wavelength: float = 1550.0, floor_db: float = DEFAULT_FLOOR_DB) -> float:
    """Coupling coefficient (1/m) that puts the straight-fiber worst pair at ``floor_db``."""
    gaps = [abs(link.core(a).n_eff - link.core(b).n_eff) for a, b in link.adjacency]
    gaps = [g for g in gaps if g > 0]
    if not gaps:
        return 1.0
    half_mismatch = math.pi / (wavelength * 1e-9) * min(gaps)
    p = 10 ** (floor_db / 10)
    return half_mismatch * math.sqrt(p / (1 - p))


def crosstalk_curve(
    link: McfLink,
    radii,
    wavelength: float = 1550.0,
    coupling: float | None = None,
    floor_db: float = DEFAULT_FLOOR_DB,
    samples_per_turn: int = SWEEP_SAMPLES_PER_TURN,
) -> CrosstalkCurve:
    """Worst-case adjacent-pair crosstalk versus bend radius.

    Each adjacent pair is a two-core coupler whose cores sit one pitch apart
    along a direction swept through a full turn relative to the bend. The
    pair phase-matches whenever the radius is at or below its threshold;
    otherwise the smallest equivalent-index mismatch over the sweep sets the
    coupled power ``k^2 / (k^2 + (delta_beta/2)^2)``. Only the shape of the
    curve and the peak location carry meaning; the floor is calibrated.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0:
        raise ShapeError("radii must be a non-empty 1-D sequence")
    if np.any(radii <= 0):
        raise DomainError("bend radii must be > 0")
    if np.any(np.diff(radii) < 0):
        raise DomainError("bend radii must be sorted ascending")
    if not link.adjacency:
        raise ShapeError("link has no adjacent pairs")
    if coupling is None:
        coupling = calibrate_coupling(link, wavelength, floor_db)
    k0 = 2 * math.pi / (wavelength * 1e-9)
    phi = np.linspace(0.0, 2 * math.pi, samples_per_turn, endpoint=False)
    cos_phi = np.cos(phi)
    pitch_mm = link.core_pitch / UM_PER_MM

    worst = np.full(radii.shape, -np.inf)
    peak, critical = -math.inf, None
    for a, b in link.adjacency:
        na, nb = link.core(a).n_eff, link.core(b).n_eff
        thr = pair_threshold(na, nb, link.core_pitch)
        if thr > peak:
            peak, critical = thr, (a, b)
        shift = max(na, nb) * pitch_mm / radii
        delta = (nb - na) + shift[:, None] * cos_phi[None, :]
        mismatch = np.abs(delta).min(axis=1)
        mismatch[radii <= thr] = 0.0
        half_db = k0 * mismatch / 2
        xt = coupling**2 / (coupling**2 + half_db**2)
        worst = np.maximum(worst, 10 * np.log10(xt))
    return CrosstalkCurve(radii, worst, peak, critical, coupling)
