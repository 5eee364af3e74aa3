"""Microwave-photonic application kernels fed by a tapped delay line.

* incoherent FIR filter: ``H(f) = sum_n a_n exp(-j 2 pi n f dtau)``
* 1-D phased-array factor: ``AF(theta) = sum_n a_n exp(-j 2 pi n nu (dtau - d_x sin(theta)/c))``

Delays here are total per-tap delays in seconds (per-km delay times length).
Angles use the broadside convention, theta in [-90, 90] degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NoVisibleLobeError, ShapeError
from .fiber_model import McfLink, delay_vector

C_LIGHT = 299792458.0
PS = 1e-12


@dataclass(frozen=True)
class TapConfig:
    weights: tuple
    regime: str = "spatial"
    lambda1: float | None = None  # nm, wavelength regime
    delta_lambda: float | None = None  # nm
    n_sources: int | None = None
    element_spacing: float | None = None  # m
    carrier: float | None = None  # Hz

    def __post_init__(self):
        w = tuple(complex(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if len(w) < 2:
            raise ShapeError("need at least two taps")
        if self.regime not in ("spatial", "wavelength"):
            raise DomainError(f"unknown regime {self.regime!r}")
        if self.element_spacing is not None and not self.element_spacing > 0:
            raise DomainError("element spacing must be > 0")
        if self.carrier is not None and not self.carrier > 0:
            raise DomainError("carrier frequency must be > 0")

    @classmethod
    def uniform(cls, n: int, **kwargs) -> "TapConfig":
        return cls(weights=(1.0,) * n, **kwargs)

    @property
    def count(self) -> int:
        return len(self.weights)

    def array(self, normalized: bool = False) -> np.ndarray:
        """Weights as an array; ``normalized`` divides by the largest magnitude.

        Normalizing first makes the dB curves insensitive to an overall gain.
        """
        a = np.array(self.weights, dtype=complex)
        if normalized:
            peak = np.abs(a).max()
            if not peak > 0:
                raise DomainError("all tap weights are zero")
            # componentwise: complex division is not correctly rounded
            a = a.real / peak + 1j * (a.imag / peak)
        return a


@dataclass(frozen=True)
class FrequencyResponse:
    frequencies: np.ndarray  # Hz
    magnitude_db: np.ndarray  # normalized to the grid peak
    fsr: float | None  # Hz
    degradation_db: float | None = None


@dataclass(frozen=True)
class RadiationPattern:
    angles: np.ndarray  # deg
    af_db: np.ndarray
    main_lobe_angle: float  # deg


def default_frequency_grid(f_max: float = 20e9, step: float = 10e6) -> np.ndarray:
    return np.arange(0.0, f_max + step / 2, step)


def default_angle_grid(step: float = 0.1) -> np.ndarray:
    n = int(round(180.0 / step))
    return np.round(np.linspace(-90.0, 90.0, n + 1), 9)


def _to_db(mag: np.ndarray) -> np.ndarray:
    peak = mag.max()
    if not peak > 0:
        raise DomainError("response vanishes on the whole grid")
    with np.errstate(divide="ignore"):
        return 20 * np.log10(mag / peak)


def _accumulate(weights, phase, per_tap):
    # Plain per-tap loop rather than a BLAS product: the result must not
    # depend on memory alignment, so identical inputs give identical bits.
    out = 0j
    for n, (a, t) in enumerate(zip(np.asarray(weights, dtype=complex), per_tap)):
        out = out + a * np.exp(1j * phase(n, t))
    return out


def fir_sum(weights, delays, f):
    """Unnormalized ``sum_n a_n exp(-j 2 pi f tau_n)`` over ``f`` (Hz)."""
    f = np.asarray(f, dtype=float)
    return _accumulate(weights, lambda n, t: -2 * np.pi * f * t, delays)


def filter_response(delay_increment: float, taps: TapConfig, f_grid=None) -> FrequencyResponse:
    """Uniformly tapped filter; ``delay_increment`` in seconds."""
    if not delay_increment > 0:
        raise DomainError(f"delay increment must be > 0 (got {delay_increment})")
    f = default_frequency_grid() if f_grid is None else np.asarray(f_grid, dtype=float)
    delays = np.arange(taps.count) * delay_increment
    mag = np.abs(fir_sum(taps.array(True), delays, f))
    return FrequencyResponse(f, _to_db(mag), 1.0 / delay_increment)


def filter_response_nonuniform(delays, taps: TapConfig, f_grid=None) -> FrequencyResponse:
    """Filter with an arbitrary per-tap delay list (seconds); no FSR reported."""
    delays = np.asarray(delays, dtype=float)
    if delays.shape != (taps.count,):
        raise ShapeError(f"{delays.size} delays for {taps.count} taps")
    f = default_frequency_grid() if f_grid is None else np.asarray(f_grid, dtype=float)
    mag = np.abs(fir_sum(taps.array(True), delays, f))
    return FrequencyResponse(f, _to_db(mag), None)


def link_tap_delays(link: McfLink, wavelength: float) -> np.ndarray:
    """Per-core delay (s) relative to the first core, over the whole link."""
    tau = delay_vector(link, wavelength)
    return (tau - tau[0]) * link.length * PS


def _lobe_peaks(mag, f, fsr, n_taps):
    half = fsr / n_taps
    peaks = []
    for k in range(int(math.floor(f[-1] / fsr)) + 1):
        sel = np.abs(f - k * fsr) <= half
        if sel.any():
            peaks.append(mag[sel].max())
    return np.array(peaks)


def filter_response_exact(link: McfLink, wavelength: float, taps: TapConfig, f_grid=None) -> FrequencyResponse:
    """Filter driven by the full per-core delays, slope terms included.

    ``degradation_db`` is the worst passband-peak loss against the ideal
    filter built on the mean increment. With exactly uniform increments this
    is the uniform filter itself.
    """
    if taps.regime != "spatial":
        raise DomainError("the exact link filter uses the spatial regime")
    if taps.count != link.n_cores:
        raise ShapeError(f"{taps.count} weights for {link.n_cores} cores")
    f = default_frequency_grid() if f_grid is None else np.asarray(f_grid, dtype=float)
    delays = link_tap_delays(link, wavelength)
    steps = np.diff(delays)
    if np.all(steps == steps[0]):
        if steps[0] == 0:
            mag = np.abs(fir_sum(taps.array(True), delays, f))
            return FrequencyResponse(f, _to_db(mag), None, 0.0)
        if steps[0] > 0:
            resp = filter_response(steps[0], taps, f)
            return FrequencyResponse(resp.frequencies, resp.magnitude_db, resp.fsr, 0.0)
    mean_step = (delays[-1] - delays[0]) / (len(delays) - 1)
    exact = np.abs(fir_sum(taps.array(True), delays, f))
    if mean_step <= 0:
        return FrequencyResponse(f, _to_db(exact), None, None)
    ideal = np.abs(fir_sum(taps.array(True), np.arange(taps.count) * mean_step, f))
    loss = 20 * np.log10(_lobe_peaks(ideal, f, 1 / mean_step, taps.count)
                         / _lobe_peaks(exact, f, 1 / mean_step, taps.count))
    return FrequencyResponse(f, _to_db(exact), 1.0 / mean_step, float(loss.max()))


def array_sum(weights, delay_increment, spacing, carrier, theta_deg):
    """Unnormalized array factor over ``theta_deg``."""
    theta = np.radians(np.asarray(theta_deg, dtype=float))
    arg = delay_increment - spacing * np.sin(theta) / C_LIGHT
    return _accumulate(weights, lambda n, _: -2 * np.pi * carrier * n * arg, range(len(weights)))


def array_factor(delay_increment: float, taps: TapConfig, theta_grid=None) -> RadiationPattern:
    if taps.carrier is None or taps.element_spacing is None:
        raise DomainError("beamforming needs carrier and element_spacing")
    theta = default_angle_grid() if theta_grid is None else np.asarray(theta_grid, dtype=float)
    mag = np.abs(array_sum(taps.array(True), delay_increment, taps.element_spacing, taps.carrier, theta))
    best = np.flatnonzero(mag >= mag.max() * (1 - 1e-9))
    # ties go to the smallest |theta|, then to the positive side
    k = min(best, key=lambda i: (abs(theta[i]), -theta[i]))
    return RadiationPattern(theta, _to_db(mag), float(theta[k]))


@dataclass(frozen=True)
class Steering:
    angle: float  # deg
    aliased: bool
    order: int = 0


def steering_angle(delay_increment: float, spacing: float, carrier: float | None = None) -> Steering:
    """Beam direction for a progressive delay ``delay_increment`` (s).

    When the nominal direction is outside the visible region the grating
    lobe with the smallest order |k| is returned (needs ``carrier``).
    """
    if not spacing > 0:
        raise DomainError("element spacing must be > 0")
    s = C_LIGHT * delay_increment / spacing
    if abs(s) <= 1:
        return Steering(math.degrees(math.asin(s)), False, 0)
    if carrier is None:
        raise NoVisibleLobeError(f"sin(theta0) = {s:.4g} is not visible and no carrier was given")
    period = C_LIGHT / (carrier * spacing)
    ks = range(math.ceil((s - 1) / period), math.floor((s + 1) / period) + 1)
    if not ks:
        raise NoVisibleLobeError(f"no grating lobe of sin(theta0) = {s:.4g} is visible")
    k = min(ks, key=lambda k: (abs(k), k))
    return Steering(math.degrees(math.asin(max(-1.0, min(1.0, s - k * period)))), True, k)


def to_polar_convention(angle_deg):
    """Map broadside angles [-90, 90] onto the [0, 180] polar-plot axis."""
    return np.asarray(angle_deg) + 90.0
