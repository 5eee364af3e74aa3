"""Fabrication-tolerance Monte Carlo on core radii, with external delay trimming."""

from __future__ import annotations

import functools
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError
from .fiber_model import McfLink, delay_vector
from .mode_solver import dispersion_from_neff

FD_STEP_UM = 0.05
MAX_RESAMPLES = 1000


@dataclass(frozen=True)
class PerturbationSpec:
    radius_halfwidth: float = 0.1  # um
    seed: int = 0
    trials: int = 1
    distribution: str = "uniform"

    def __post_init__(self):
        if self.radius_halfwidth < 0:
            raise DomainError("radius_halfwidth must be >= 0")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if self.distribution != "uniform":
            raise DomainError(f"unsupported distribution {self.distribution!r}")


@dataclass(frozen=True)
class Sensitivity:
    """Per-um change of (tau_g0, D, S, n_eff) with core radius a1."""

    tau_g0: float
    dispersion: float
    slope: float
    n_eff: float


@functools.lru_cache(maxsize=None)
def radius_sensitivity(profile, step: float = FD_STEP_UM) -> Sensitivity:
    hi = dispersion_from_neff(replace(profile, a1=profile.a1 + step))
    lo = dispersion_from_neff(replace(profile, a1=profile.a1 - step))
    d = lambda name: (getattr(hi, name) - getattr(lo, name)) / (2 * step)
    return Sensitivity(d("tau_g"), d("dispersion"), d("slope"), d("n_eff"))


@functools.lru_cache(maxsize=None)
def _solved(profile):
    return dispersion_from_neff(profile)


def radius_shift(profile, delta_a1: float, mode: str = "linear") -> Sensitivity:
    """Change of (tau_g0, D, S, n_eff) for a radius change ``delta_a1`` um.

    ``linear`` uses cached finite-difference sensitivities; ``resolve``
    re-solves the perturbed profile.
    """
    if delta_a1 == 0:
        return Sensitivity(0.0, 0.0, 0.0, 0.0)
    if mode == "linear":
        s = radius_sensitivity(profile)
        return Sensitivity(s.tau_g0 * delta_a1, s.dispersion * delta_a1,
                           s.slope * delta_a1, s.n_eff * delta_a1)
    if mode == "resolve":
        new = dispersion_from_neff(replace(profile, a1=profile.a1 + delta_a1))
        old = _solved(profile)
        return Sensitivity(new.tau_g - old.tau_g, new.dispersion - old.dispersion,
                           new.slope - old.slope, new.n_eff - old.n_eff)
    raise DomainError(f"unknown sensitivity mode {mode!r}")


def _draw_radii(link, spec, rng):
    """One uniform radius offset per core; draws leaving a1 <= 0 are redrawn."""
    offsets, redraws = [], 0
    for core in link.cores:
        for _ in range(MAX_RESAMPLES):
            d = spec.radius_halfwidth * rng.uniform(-1.0, 1.0)
            if core.profile.a1 + d > 0:
                break
            redraws += 1
        else:
            raise DomainError(f"core {core.id}: could not draw a positive radius")
        offsets.append(d)
    return offsets, redraws


def perturb_link(link: McfLink, spec: PerturbationSpec, sensitivity: str = "linear",
                 trial: int = 0, return_redraws: bool = False):
    """Apply one random draw of core-radius errors to ``link``.

    The draw depends only on ``(spec.seed, trial)``.
    """
    if spec.radius_halfwidth == 0:
        return (link, 0) if return_redraws else link
    rng = np.random.default_rng([spec.seed, trial])
    offsets, redraws = _draw_radii(link, spec, rng)
    cores = []
    for core, d in zip(link.cores, offsets):
        shift = radius_shift(core.profile, d, sensitivity)
        m = core.model
        cores.append(replace(
            core,
            profile=replace(core.profile, a1=core.profile.a1 + d),
            model=replace(m, tau_g0=m.tau_g0 + shift.tau_g0,
                          dispersion=m.dispersion + shift.dispersion,
                          slope=m.slope + shift.slope),
            n_eff=core.n_eff + shift.n_eff,
        ))
    out = link.with_cores(cores)
    return (out, redraws) if return_redraws else out


def compensate_delays(link: McfLink, target: float | None = None) -> McfLink:
    """Trim every core to a common anchor delay ``target`` (ps/km).

    Defaults to the slowest core, since external lines can only add delay.
    Dispersion and slope are left alone.
    """
    if target is None:
        target = max(c.model.tau_g0 for c in link.cores)
    if all(c.model.tau_g0 == target for c in link.cores):
        return link
    return link.with_cores(
        replace(c, model=replace(c.model, tau_g0=target)) for c in link.cores
    )


@dataclass(frozen=True)
class ToleranceReport:
    wavelengths: np.ndarray  # nm
    core_ids: tuple
    delay_err: np.ndarray  # (trial, core, wavelength), ps/km, before compensation
    delay_err_comp: np.ndarray  # same, after compensation
    incr_err: np.ndarray  # (trial, pair, wavelength), ps/km
    incr_err_comp: np.ndarray
    redraws: int

    @property
    def trials(self) -> int:
        return self.delay_err.shape[0]

    @staticmethod
    def _rms(x):
        return np.sqrt(np.mean(x**2, axis=(1, 2)))

    @property
    def rms(self) -> np.ndarray:
        return self._rms(self.incr_err)

    @property
    def rms_comp(self) -> np.ndarray:
        return self._rms(self.incr_err_comp)

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.incr_err).max())

    @property
    def max_abs_comp(self) -> float:
        return float(np.abs(self.incr_err_comp).max())

    def rows(self):
        """``(trial, core_id, wavelength, error, compensated)`` in trial order."""
        for t in range(self.trials):
            for flag, arr in ((0, self.delay_err), (1, self.delay_err_comp)):
                for i, cid in enumerate(self.core_ids):
                    for j, lam in enumerate(self.wavelengths):
                        yield t, cid, float(lam), float(arr[t, i, j]), flag


def run_tolerance_study(link: McfLink, spec: PerturbationSpec, wavelengths,
                        sensitivity: str = "linear") -> ToleranceReport:
    """Monte Carlo over ``spec.trials`` radius draws.

    Increment error is the deviation of each consecutive core delay step from
    the nominal ``Delta D * (lambda - lambda0)``.
    """
    wavelengths = np.asarray(wavelengths, dtype=float)
    lam0 = link.cores[0].model.anchor_wavelength
    ds = [c.model.dispersion for c in link.cores]
    delta_d = (ds[-1] - ds[0]) / (len(ds) - 1)
    nominal_tau = link.cores[0].model.tau_g0
    nominal = np.stack([delay_vector(link, lam) for lam in wavelengths], axis=1)
    ideal = delta_d * (wavelengths - lam0)

    n_t, n_c, n_w = spec.trials, link.n_cores, len(wavelengths)
    tau = np.empty((n_t, n_c, n_w))
    tau_c = np.empty_like(tau)
    redraws = 0
    for t in range(n_t):
        pert, r = perturb_link(link, spec, sensitivity, trial=t, return_redraws=True)
        redraws += r
        comp = compensate_delays(pert, nominal_tau)
        tau[t] = np.stack([delay_vector(pert, lam) for lam in wavelengths], axis=1)
        tau_c[t] = np.stack([delay_vector(comp, lam) for lam in wavelengths], axis=1)
    return ToleranceReport(
        wavelengths=wavelengths,
        core_ids=tuple(c.id for c in link.cores),
        delay_err=tau - nominal,
        delay_err_comp=tau_c - nominal,
        incr_err=np.diff(tau, axis=1) - ideal,
        incr_err_comp=np.diff(tau_c, axis=1) - ideal,
        redraws=redraws,
    )


def summarize(report: ToleranceReport) -> dict:
    rms, rms_c = report.rms, report.rms_comp
    return {
        "trials": report.trials,
        "rms_mean": float(rms.mean()),
        "rms_comp_mean": float(rms_c.mean()),
        "max_abs": report.max_abs,
        "max_abs_comp": report.max_abs_comp,
        "fraction_improved": float(np.mean(rms > rms_c)),
        "redraws": report.redraws,
    }
