"""Scalar LP01 solver for trench-assisted step-index cores, plus inverse design.

The radial field is built layer by layer from Bessel-type solutions
(J0/Y0 where the layer index exceeds n_eff, I0/K0 where it does not),
matching the field and its radial derivative at every interface. A guided
mode requires the outer-cladding field to be a pure K0; the residual of that
condition is the characteristic function whose largest root in
(n_cladding, n_core) is the fundamental mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import CutoffError, DomainError, InfeasibleDesignError, SolverError
from .fiber_model import CoreProfile

C_LIGHT = 299792458.0  # m/s

# Fused silica, three-term Sellmeier (B_i, C_i in um^2).
SILICA_B = (0.6961663, 0.4079426, 0.8974794)
SILICA_C = (0.0684043**2, 0.1162414**2, 9.896161**2)
MATERIAL_WINDOW = (1200.0, 1700.0)

SCAN_POINTS = 200
RESIDUAL_TOL = 1e-10


def silica_index(wavelength: float) -> float:
    lam2 = (wavelength * 1e-3) ** 2
    return math.sqrt(1.0 + sum(b * lam2 / (lam2 - c) for b, c in zip(SILICA_B, SILICA_C)))


def material_index(delta_pct: float, wavelength: float) -> float:
    """Index of a layer offset by ``delta_pct`` percent from pure silica.

    Positive offsets raise the index (core), negative ones depress it (trench).
    """
    lo, hi = MATERIAL_WINDOW
    if not lo <= wavelength <= hi:
        raise DomainError(f"wavelength {wavelength} nm outside material window {lo:g}-{hi:g} nm")
    return silica_index(wavelength) * (1.0 + delta_pct / 100.0)


@dataclass(frozen=True)
class LayeredProfile:
    """Piecewise-constant radial profile.

    ``radii`` are the outer boundaries of every layer but the last (which
    extends to infinity); ``deltas`` are percent offsets from the cladding
    material, one per layer. Zero-thickness layers are allowed and skipped.
    """

    radii: tuple
    deltas: tuple

    def __post_init__(self):
        if len(self.deltas) != len(self.radii) + 1:
            raise DomainError("need one more delta than radii")
        if any(r1 < r0 for r0, r1 in zip(self.radii, self.radii[1:])) or self.radii[0] <= 0:
            raise DomainError("layer radii must be positive and non-decreasing")
        if not self.deltas[0] > 0:
            raise DomainError("core must be raised above the cladding")
        if self.deltas[-1] != 0 or any(d > 0 for d in self.deltas[1:]):
            raise DomainError("layers outside the core may not exceed the cladding index")

    @classmethod
    def from_core(cls, p: CoreProfile) -> "LayeredProfile":
        return cls(
            radii=(p.a1, p.a1 + p.a2, p.a1 + p.a2 + p.w),
            deltas=(p.delta1, 0.0, -p.delta2, 0.0),
        )

    @classmethod
    def step_index(cls, a1: float, delta1: float) -> "LayeredProfile":
        return cls(radii=(a1,), deltas=(delta1, 0.0))

    def indices(self, wavelength: float) -> np.ndarray:
        return np.array([material_index(d, wavelength) for d in self.deltas])

    def layers(self, wavelength: float):
        """(inner radius, outer radius, index) for non-empty layers."""
        n = self.indices(wavelength)
        bounds = (0.0,) + tuple(self.radii) + (math.inf,)
        out = []
        for i in range(len(n)):
            if bounds[i + 1] > bounds[i]:
                if out and out[-1][2] == n[i]:
                    out[-1] = (out[-1][0], bounds[i + 1], n[i])
                else:
                    out.append((bounds[i], bounds[i + 1], n[i]))
        return out


@dataclass(frozen=True)
class ModeSolution:
    n_eff: float
    wavelength: float
    residual: float  # estimated distance to the exact root, in n_eff units


def _basis(n_layer, neff, k0, r):
    """Two radial solutions and their derivatives at radius ``r``.

    Vectorized over ``neff``. Returns (f1, f2, df1, df2).
    """
    gap = n_layer**2 - neff**2
    osc = gap > 0
    q = k0 * np.sqrt(np.abs(gap))
    x = q * r
    f1 = np.where(osc, special.j0(x), special.i0(x))
    f2 = np.where(osc, special.y0(x), special.k0(x))
    df1 = np.where(osc, -q * special.j1(x), q * special.i1(x))
    df2 = np.where(osc, -q * special.y1(x), -q * special.k1(x))
    return f1, f2, df1, df2


def characteristic(profile: LayeredProfile, neff, wavelength: float):
    """Guidance residual, zero at an LP01 eigenvalue. Vectorized over ``neff``.

    The field state is renormalized at every interface, so only the sign and
    zeros are meaningful, not the magnitude away from a root.
    """
    neff = np.asarray(neff, dtype=float)
    k0 = 2 * math.pi / (wavelength * 1e-3)  # 1/um
    layers = profile.layers(wavelength)
    r0, r1, n_core = layers[0]
    q = k0 * np.sqrt(n_core**2 - neff**2)
    psi = special.j0(q * r1)
    dpsi = -q * special.j1(q * r1)
    for r_in, r_out, n_layer in layers[1:-1]:
        f1, f2, df1, df2 = _basis(n_layer, neff, k0, r_in)
        det = f1 * df2 - f2 * df1
        a = (psi * df2 - dpsi * f2) / det
        b = (f1 * dpsi - df1 * psi) / det
        g1, g2, dg1, dg2 = _basis(n_layer, neff, k0, r_out)
        psi, dpsi = a * g1 + b * g2, a * dg1 + b * dg2
        norm = np.hypot(psi, dpsi / k0)
        psi, dpsi = psi / norm, dpsi / norm
    rb, _, n_clad = layers[-1]
    w = k0 * np.sqrt(neff**2 - n_clad**2)
    k0w, k1w = special.k0e(w * rb), special.k1e(w * rb)
    norm = np.hypot(psi, dpsi / k0) * np.hypot(k0w, k1w)
    return (dpsi / k0 * k0w + (w / k0) * k1w * psi) / norm


def solve_lp01(profile, wavelength: float, tol: float = RESIDUAL_TOL) -> ModeSolution:
    """Fundamental-mode effective index of ``profile`` at ``wavelength`` (nm)."""
    if isinstance(profile, CoreProfile):
        profile = LayeredProfile.from_core(profile)
    n = profile.indices(wavelength)
    n_core, n_clad = n[0], n[-1]
    span = n_core - n_clad
    lo, hi = n_clad + span * 1e-9, n_core - span * 1e-12
    grid = np.linspace(lo, hi, SCAN_POINTS)
    f = characteristic(profile, grid, wavelength)
    sign = np.sign(f)
    crossings = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    if len(crossings) == 0:
        raise CutoffError(
            f"no guided LP01 mode at {wavelength} nm for {profile} "
            f"(n_eff bracket {lo:.6f}-{hi:.6f} has no sign change)"
        )
    i = crossings[-1]
    fn = lambda x: float(characteristic(profile, x, wavelength))
    try:
        root, info = optimize.brentq(
            fn, grid[i], grid[i + 1], xtol=1e-16, rtol=4 * np.finfo(float).eps,
            maxiter=200, full_output=True,
        )
    except (RuntimeError, ValueError) as exc:
        raise SolverError(f"root search failed in [{grid[i]}, {grid[i + 1]}]: {exc}") from exc
    # Residual in n_eff units: |f / f'| from a secant across a tiny bracket.
    h = max(abs(root) * 1e-12, 1e-15)
    f0, f1 = fn(root), fn(root + h)
    slope = (f1 - f0) / h
    residual = abs(f0 / slope) if slope != 0 else math.inf
    if not info.converged or residual > tol:
        raise SolverError(
            f"LP01 solve did not converge: residual {residual:.3e} in bracket "
            f"[{grid[i]:.12f}, {grid[i + 1]:.12f}]"
        )
    return ModeSolution(n_eff=root, wavelength=wavelength, residual=residual)


# Five-point central stencil.
def stencil_derivatives(fn, center: float, step: float):
    """First, second and third derivatives of ``fn`` at ``center``."""
    fm2, fm1, f0, fp1, fp2 = (fn(center + k * step) for k in (-2, -1, 0, 1, 2))
    d1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * step)
    d2 = (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * step**2)
    d3 = (fp2 - 2 * fp1 + 2 * fm1 - fm2) / (2 * step**3)
    return f0, d1, d2, d3


@dataclass(frozen=True)
class DispersionResult:
    tau_g: float  # ps/km
    dispersion: float  # ps/(km nm)
    slope: float  # ps/(km nm^2)
    n_eff: float
    n_group: float


def dispersion_from_neff(profile, center: float = 1550.0, step: float = 2.0) -> DispersionResult:
    """Group delay, dispersion and slope from n_eff(lambda) by finite differences.

    ``profile`` is a CoreProfile, a LayeredProfile, or any callable mapping
    wavelength in nm to an effective index.
    """
    if callable(profile) and not isinstance(profile, (CoreProfile, LayeredProfile)):
        neff = profile
    else:
        neff = lambda lam: solve_lp01(profile, lam).n_eff
    n0, d1, d2, d3 = stencil_derivatives(neff, center, step)
    # derivatives are per nm; work in SI
    lam = center * 1e-9
    d1, d2, d3 = d1 * 1e9, d2 * 1e18, d3 * 1e27
    n_group = n0 - lam * d1
    d_si = -(lam / C_LIGHT) * d2  # s/m^2
    s_si = -(d2 + lam * d3) / C_LIGHT  # s/m^3
    return DispersionResult(
        tau_g=n_group / C_LIGHT * 1e3 * 1e12,
        dispersion=d_si * 1e6,
        slope=s_si * 1e-3,
        n_eff=n0,
        n_group=n_group,
    )


@dataclass(frozen=True)
class DesignBounds:
    a1: tuple = (1.5, 6.5)
    a2: tuple = (2.0, 6.0)
    w: tuple = (2.0, 6.0)
    delta1: tuple = (0.30, 1.00)


@dataclass(frozen=True)
class CoreDesign:
    profile: CoreProfile
    dispersion: float
    tau_g0: float
    slope: float
    n_eff: float


def _design_a1(target_d, a2, w, delta1, delta2, bounds, center, step, grid_points=11):
    """Root-find a1 so that D(a1) = target_d at fixed (a2, w, delta1)."""

    def d_of(a1):
        prof = CoreProfile(a1, a2, w, delta1, delta2)
        return dispersion_from_neff(prof, center, step).dispersion

    a_grid = np.linspace(*bounds.a1, grid_points)
    d_vals = []
    for a in a_grid:
        try:
            d_vals.append(d_of(a))
        except CutoffError:
            d_vals.append(math.nan)
    d_vals = np.array(d_vals)
    resid = d_vals - target_d
    ok = np.isfinite(resid)
    # D(a1) folds over near cutoff; keep to the rising branch.
    for i in range(grid_points - 1):
        if ok[i] and ok[i + 1] and resid[i] <= 0 <= resid[i + 1]:
            a1 = optimize.brentq(lambda a: d_of(a) - target_d, a_grid[i], a_grid[i + 1], xtol=1e-7)
            return a1
    finite = d_vals[ok]
    rng = (float(finite.min()), float(finite.max())) if finite.size else (math.nan, math.nan)
    raise InfeasibleDesignError(
        f"D = {target_d} ps/(km nm) unreachable for a1 in {bounds.a1} "
        f"(a2={a2}, w={w}, delta1={delta1}); achievable D range {rng[0]:.3f}..{rng[1]:.3f}"
    )


def design_core(
    target_d: float,
    target_tau_g0: float | None = None,
    bounds: DesignBounds = DesignBounds(),
    a2: float = 4.0,
    w: float = 4.0,
    delta1: float = 0.8,
    delta2: float = 1.0,
    center: float = 1550.0,
    step: float = 2.0,
    d_tol: float = 0.05,
    tau_tol: float = 0.5,
) -> CoreDesign:
    """Find a core profile with dispersion ``target_d`` and group delay ``target_tau_g0``.

    Inner search: a1 for the dispersion target. Outer search: delta1 for the
    group-delay target; when delta1 alone cannot reach it inside its bounds,
    a2 and then w are stepped across their bounds and delta1 is retried.
    With ``target_tau_g0=None`` only the dispersion target is enforced.
    """

    def evaluate(a2_, w_, d1_):
        a1 = _design_a1(target_d, a2_, w_, d1_, delta2, bounds, center, step)
        prof = CoreProfile(a1, a2_, w_, d1_, delta2)
        res = dispersion_from_neff(prof, center, step)
        return prof, res

    def finish(prof, res):
        if abs(res.dispersion - target_d) >= d_tol:
            raise InfeasibleDesignError(f"dispersion residual {res.dispersion - target_d:.3g} too large")
        if target_tau_g0 is not None and abs(res.tau_g - target_tau_g0) >= tau_tol:
            raise InfeasibleDesignError(f"group delay residual {res.tau_g - target_tau_g0:.3g} ps/km too large")
        return CoreDesign(prof, res.dispersion, res.tau_g, res.slope, res.n_eff)

    if target_tau_g0 is None:
        return finish(*evaluate(a2, w, delta1))

    def outer(a2_, w_):
        cache = {}

        def g(d1_):
            try:
                prof, res = evaluate(a2_, w_, d1_)
            except InfeasibleDesignError:
                return math.nan
            cache[d1_] = (prof, res)
            return res.tau_g - target_tau_g0

        lo, hi = bounds.delta1
        grid = np.linspace(lo, hi, 5)
        vals = [g(x) for x in grid]
        for i in range(len(grid) - 1):
            if np.isfinite(vals[i]) and np.isfinite(vals[i + 1]) and vals[i] * vals[i + 1] <= 0:
                x = optimize.brentq(g, grid[i], grid[i + 1], xtol=1e-9, rtol=1e-12)
                if x not in cache:
                    g(x)
                return finish(*cache[x])
        finite = [v for v in vals if np.isfinite(v)]
        return (min(finite), max(finite)) if finite else None

    tried = []
    candidates = [(a2, w)]
    candidates += [(x, w) for x in np.linspace(*bounds.a2, 5) if x != a2]
    candidates += [(a2, x) for x in np.linspace(*bounds.w, 5) if x != w]
    for a2_, w_ in candidates:
        out = outer(float(a2_), float(w_))
        if isinstance(out, CoreDesign):
            return out
        tried.append(out)
    ranges = [r for r in tried if r is not None]
    if ranges:
        lo = min(r[0] for r in ranges) + target_tau_g0
        hi = max(r[1] for r in ranges) + target_tau_g0
        msg = f"achieved tau_g0 range {lo:.2f}..{hi:.2f} ps/km"
    else:
        msg = "dispersion target unreachable for every trial geometry"
    raise InfeasibleDesignError(
        f"cannot reach D = {target_d}, tau_g0 = {target_tau_g0} inside bounds; {msg}"
    )


def design_link(
    targets,
    target_tau_g0: float | None = None,
    bounds: DesignBounds = DesignBounds(),
    a2: float = 4.0,
    w: float = 4.0,
    delta1: float = 0.8,
    delta2: float = 1.0,
    center: float = 1550.0,
    length: float = 10.0,
    pitch: float = 35.0,
    cladding_diameter: float = 125.0,
    progress=None,
):
    """Design one core per dispersion target and assemble them into a link.

    Without ``target_tau_g0`` the common delay is taken from the middle target
    designed at the starting geometry. Seven cores go on the hexagonal
    template in the optimized arrangement; other counts sit on a line.
    Returns ``(link, designs)``.
    """
    from .bend_twist import optimize_arrangement
    from .fiber_model import DispersionModel, FiberCore, McfLink, hex7_layout, place_cores

    targets = list(targets)
    kw = dict(bounds=bounds, a2=a2, w=w, delta1=delta1, delta2=delta2, center=center)
    if target_tau_g0 is None:
        target_tau_g0 = design_core(sorted(targets)[len(targets) // 2], None, **kw).tau_g0
    designs = []
    for i, d in enumerate(targets):
        designs.append(design_core(d, target_tau_g0, **kw))
        if progress:
            progress(i + 1, len(targets), designs[-1])
    cores = [
        FiberCore(
            id=i + 1,
            profile=des.profile,
            model=DispersionModel(center, des.tau_g0, des.dispersion, des.slope),
            n_eff=des.n_eff,
        )
        for i, des in enumerate(designs)
    ]
    kwargs = dict(length=length, core_pitch=pitch, cladding_diameter=cladding_diameter)
    if len(cores) == 7:
        positions, slot_adj = hex7_layout(pitch)
        assignment, _ = optimize_arrangement(cores, slot_adj, pitch=pitch)
        return place_cores(cores, assignment, positions, slot_adj, **kwargs), designs
    placed = [c.moved(abs(i - (len(cores) - 1) / 2) * pitch, 0.0 if i >= (len(cores) - 1) / 2 else math.pi)
              for i, c in enumerate(cores)]
    adjacency = [(i + 1, i + 2) for i in range(len(cores) - 1)]
    return McfLink(cores=tuple(placed), adjacency=tuple(adjacency), **kwargs), designs
