"""Fiber data model and the Taylor-series group-delay model.

Units throughout: wavelengths in nm, group delays in ps/km, dispersion in
ps/(km nm), slope in ps/(km nm^2), geometry in um, link length in km.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    CoreIndexError,
    DomainError,
    ModelConsistencyError,
    WavelengthRangeError,
)

WAVELENGTH_WINDOW = (1500.0, 1600.0)
ANCHOR_WAVELENGTH = 1550.0
# Shared anchor group delay, ps/km (4900 ns/km, silica group index ~1.47).
DEFAULT_TAU_G0 = 4.9e6


@dataclass(frozen=True)
class CoreProfile:
    """Trench-assisted index profile of one core."""

    a1: float  # core radius, um
    a2: float  # core-to-trench distance, um
    w: float  # trench width, um
    delta1: float  # core-to-cladding relative index difference, %
    delta2: float = 1.0  # cladding-to-trench relative index difference, %

    def __post_init__(self):
        problems = profile_violations(self)
        if problems:
            raise DomainError("; ".join(problems))


def profile_violations(p) -> list[str]:
    out = []
    if not p.a1 > 0:
        out.append(f"a1 must be > 0 (got {p.a1})")
    if not p.a2 >= 0:
        out.append(f"a2 must be >= 0 (got {p.a2})")
    if not p.w >= 0:
        out.append(f"w must be >= 0 (got {p.w})")
    if not p.delta1 > 0:
        out.append(f"delta1 must be > 0 (got {p.delta1})")
    if not p.delta2 > 0:
        out.append(f"delta2 must be > 0 (got {p.delta2})")
    return out


@dataclass(frozen=True)
class DispersionModel:
    anchor_wavelength: float = ANCHOR_WAVELENGTH
    tau_g0: float = DEFAULT_TAU_G0
    dispersion: float = 0.0
    slope: float = 0.0

    def __post_init__(self):
        if not self.anchor_wavelength > 0:
            raise DomainError("anchor_wavelength must be > 0")
        for name in ("tau_g0", "dispersion", "slope"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")


@dataclass(frozen=True)
class FiberCore:
    id: int
    profile: CoreProfile
    model: DispersionModel
    n_eff: float
    r: float = 0.0  # radial position, um
    theta: float = 0.0  # azimuth, rad

    def __post_init__(self):
        if self.r < 0:
            raise DomainError(f"core {self.id}: r must be >= 0")
        if not 1.0 < self.n_eff < 2.0:
            raise DomainError(f"core {self.id}: n_eff must lie in (1, 2)")

    def moved(self, r: float, theta: float) -> "FiberCore":
        return replace(self, r=r, theta=theta)


@dataclass(frozen=True)
class McfLink:
    cores: tuple
    length: float = 10.0  # km
    core_pitch: float = 35.0  # um
    cladding_diameter: float = 125.0  # um
    adjacency: tuple = field(default=())

    def __post_init__(self):
        cores = tuple(sorted(self.cores, key=lambda c: c.id))
        object.__setattr__(self, "cores", cores)
        ids = [c.id for c in cores]
        if len(set(ids)) != len(ids):
            raise DomainError("core ids must be unique")
        if not self.length > 0:
            raise DomainError("length must be > 0")
        if not self.core_pitch > 0:
            raise DomainError("core_pitch must be > 0")
        pairs = set()
        for a, b in self.adjacency:
            if a == b:
                raise DomainError(f"self-adjacency for core {a}")
            if a not in ids or b not in ids:
                raise DomainError(f"adjacency ({a}, {b}) names an unknown core")
            pairs.add((min(a, b), max(a, b)))
        object.__setattr__(self, "adjacency", tuple(sorted(pairs)))

    @property
    def n_cores(self) -> int:
        return len(self.cores)

    def core(self, core_id: int) -> FiberCore:
        for c in self.cores:
            if c.id == core_id:
                return c
        raise CoreIndexError(f"no core with id {core_id}")

    def neighbours(self, core_id: int) -> list[int]:
        return sorted(
            b if a == core_id else a for a, b in self.adjacency if core_id in (a, b)
        )

    def with_cores(self, cores) -> "McfLink":
        return replace(self, cores=tuple(cores))


def _check_window(wavelength, window):
    lo, hi = window
    lam = np.asarray(wavelength, dtype=float)
    if np.any(lam < lo) or np.any(lam > hi):
        raise WavelengthRangeError(
            f"wavelength {wavelength} nm outside the validity window {lo:g}-{hi:g} nm"
        )


def group_delay(core, wavelength, window=WAVELENGTH_WINDOW):
    """Group delay of ``core`` at ``wavelength`` (nm), in ps/km.

    Second-order Taylor expansion around the model's anchor wavelength.
    Accepts scalars or arrays.
    """
    _check_window(wavelength, window)
    m = core.model if isinstance(core, FiberCore) else core
    d = np.asarray(wavelength, dtype=float) - m.anchor_wavelength
    out = m.tau_g0 + m.dispersion * d + 0.5 * m.slope * d**2
    return float(out) if np.ndim(out) == 0 else out


def spatial_differential_delay(link: McfLink, n: int, wavelength, window=WAVELENGTH_WINDOW):
    """Delay between core ``n+1`` and core ``n`` (1-based ids), ps/km."""
    ids = [c.id for c in link.cores]
    if n not in ids or ids.index(n) == len(ids) - 1:
        raise CoreIndexError(f"n must be in 1..{len(ids) - 1} (got {n})")
    lo = link.cores[ids.index(n)].model
    hi = link.cores[ids.index(n) + 1].model
    if lo.anchor_wavelength != hi.anchor_wavelength:
        raise ModelConsistencyError(
            f"cores {n} and {n + 1} have different anchor wavelengths"
        )
    if lo.tau_g0 != hi.tau_g0:
        raise ModelConsistencyError(f"cores {n} and {n + 1} have different tau_g0")
    _check_window(wavelength, window)
    d = np.asarray(wavelength, dtype=float) - lo.anchor_wavelength
    out = (hi.dispersion - lo.dispersion) * d + 0.5 * (hi.slope - lo.slope) * d**2
    return float(out) if np.ndim(out) == 0 else out


def wavelength_differential_delay(core, lambda1, delta_lambda, m, n_sources=None):
    """Delay between sources ``m+1`` and ``m`` travelling in one core, ps/km.

    Sources sit at ``lambda1 + (m-1)*delta_lambda``. ``n_sources`` (M) bounds
    ``m`` when given.
    """
    if m < 1 or (n_sources is not None and m > n_sources - 1):
        hi = "M-1" if n_sources is None else str(n_sources - 1)
        raise CoreIndexError(f"source index m must be in 1..{hi} (got {m})")
    if not delta_lambda > 0:
        raise DomainError("delta_lambda must be > 0")
    mdl = core.model if isinstance(core, FiberCore) else core
    d1 = lambda1 - mdl.anchor_wavelength
    return (
        mdl.dispersion * delta_lambda
        + mdl.slope * d1 * delta_lambda
        + 0.5 * mdl.slope * (2 * m - 1) * delta_lambda**2
    )


def delay_vector(link: McfLink, wavelength: float, window=WAVELENGTH_WINDOW) -> np.ndarray:
    if not link.cores:
        raise DomainError("link has no cores")
    return np.array([group_delay(c, wavelength, window) for c in link.cores])


def mean_increment(link: McfLink, wavelength: float, window=WAVELENGTH_WINDOW) -> float:
    """Average core-to-core delay step (ps/km) across the whole link."""
    tau = delay_vector(link, wavelength, window)
    if len(tau) < 2:
        raise CoreIndexError("need at least two cores")
    return float((tau[-1] - tau[0]) / (len(tau) - 1))


def increment_errors(link: McfLink, wavelength, delta_d: float | None = None) -> np.ndarray:
    """Deviation of each consecutive delay step from ``delta_d*(lambda-lambda0)``.

    ``delta_d`` defaults to the link's mean dispersion increment.
    """
    lam0 = link.cores[0].model.anchor_wavelength
    if delta_d is None:
        ds = [c.model.dispersion for c in link.cores]
        delta_d = (ds[-1] - ds[0]) / (len(ds) - 1)
    tau = delay_vector(link, wavelength)
    return np.diff(tau) - delta_d * (wavelength - lam0)


HEX7_SLOTS = 7


def hex7_layout(pitch: float):
    """Slot positions and slot adjacency of the 7-core hexagonal template.

    Slot 0 is the center; slots 1-6 sit on the ring at 60 degree steps.
    """
    positions = [(0.0, 0.0)] + [(pitch, k * math.pi / 3) for k in range(6)]
    adjacency = [(0, k) for k in range(1, 7)]
    adjacency += [(k, k % 6 + 1) for k in range(1, 7)]
    return positions, sorted((min(a, b), max(a, b)) for a, b in adjacency)


def place_cores(cores, assignment, positions, slot_adjacency, **link_kwargs) -> McfLink:
    """Build a link with ``assignment[slot] = core id`` on the given template."""
    by_id = {c.id: c for c in cores}
    placed = [by_id[cid].moved(*positions[slot]) for slot, cid in enumerate(assignment)]
    adjacency = [(assignment[a], assignment[b]) for a, b in slot_adjacency]
    return McfLink(cores=tuple(placed), adjacency=tuple(adjacency), **link_kwargs)


def load_table1_link(tau_g0: float = DEFAULT_TAU_G0, length: float = 10.0) -> McfLink:
    """The bundled 7-core design, cores placed by the arrangement optimizer."""
    from .config import bundled_design_path, load_design

    link = load_design(bundled_design_path())
    cores = [
        replace(c, model=replace(c.model, tau_g0=tau_g0)) for c in link.cores
    ]
    return replace(link, cores=tuple(cores), length=length)
