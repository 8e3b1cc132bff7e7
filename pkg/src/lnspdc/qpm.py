"""Quasi-phase-matching design for type-0 SPDC.

Sign convention: ``dk = k_p - k_s - k_i - 2 pi m / period``. A positive period
exists when the pump wavevector exceeds the sum of signal and idler
wavevectors, which is the normally dispersive case.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .dispersion import DispersionCurve, omega_of, wavelength_of
from .errors import ConfigError, NumericalError, QpmError


@dataclass(frozen=True)
class QpmDesign:
    """Poling period in um, device length in mm, pump wavelength in nm."""

    period_um: float
    order: int = 1
    length_mm: float = 5.7
    duty: float = 0.5
    pump_nm: float = 810.0

    def __post_init__(self):
        if not self.period_um > 0:
            raise ConfigError("poling period must be > 0")
        if int(self.order) != self.order or self.order < 1:
            raise ConfigError("QPM order must be an integer >= 1")
        if not self.length_mm > 0:
            raise ConfigError("device length must be > 0")
        if not 0 < self.duty < 1:
            raise ConfigError("duty cycle must lie in (0, 1)")

    @property
    def grating_k(self) -> float:
        """``2 pi m / period`` in rad/m."""
        return 2 * math.pi * self.order / (self.period_um * 1e-6)

    @property
    def length_m(self) -> float:
        return self.length_mm * 1e-3

    @property
    def omega_p(self) -> float:
        return float(omega_of(self.pump_nm / 1e3))


@dataclass(frozen=True)
class QpmCurves:
    pump: DispersionCurve
    signal: DispersionCurve
    idler: DispersionCurve | None = None

    @property
    def idler_curve(self) -> DispersionCurve:
        return self.signal if self.idler is None else self.idler


def idler_wavelength(pump_nm: float, signal_nm: float) -> float:
    """Energy conservation ``1/l_i = 1/l_p - 1/l_s`` (nm)."""
    if not signal_nm > pump_nm:
        raise ValueError("signal wavelength must exceed pump wavelength")
    return 1.0 / (1.0 / pump_nm - 1.0 / signal_nm)


def _k_pair(curves: QpmCurves, omega_s, omega_i):
    # Same curve for both photons: sum in sorted order so swapping the
    # arguments gives a bit-identical result.
    if curves.idler is None or curves.idler is curves.signal:
        lo = np.minimum(omega_s, omega_i)
        hi = np.maximum(omega_s, omega_i)
        return curves.signal.k(lo) + curves.signal.k(hi)
    return curves.signal.k(omega_s) + curves.idler.k(omega_i)


def solve_poling_period(pump: DispersionCurve, signal: DispersionCurve, idler: DispersionCurve | None,
                        pump_nm: float, signal_nm: float, order: int = 1) -> float:
    """Poling period (um) that zeroes ``dk`` at the given pump and signal wavelengths."""
    curves = QpmCurves(pump, signal, idler)
    om_p = float(omega_of(pump_nm / 1e3))
    om_s = float(omega_of(signal_nm / 1e3))
    om_i = om_p - om_s
    if om_i <= 0:
        raise ValueError("signal wavelength must exceed pump wavelength")
    denom = float(pump.k(om_p) - _k_pair(curves, om_s, om_i))
    if not denom > 0:
        sign = "zero" if denom == 0 else "negative"
        raise QpmError(f"k_p - k_s - k_i is {sign} ({denom:.6g} rad/m); "
                       "no positive poling period phase-matches this process")
    return 2 * math.pi * order / denom * 1e6


def phase_mismatch_omega(design: QpmDesign, curves: QpmCurves, omega_s, omega_i=None):
    """``dk`` (rad/m) for signal/idler angular frequencies; idler from energy conservation if omitted.

    The pump frequency is ``omega_s + omega_i``, so off-diagonal points of a
    joint spectrum see the pump wavevector at their own sum frequency.
    """
    omega_s = np.asarray(omega_s, dtype=float)
    if omega_i is None:
        omega_i = design.omega_p - omega_s
    omega_i = np.asarray(omega_i, dtype=float)
    k_p = curves.pump.k(omega_s + omega_i)
    return k_p - _k_pair(curves, omega_s, omega_i) - design.grating_k


def phase_mismatch(design: QpmDesign, curves: QpmCurves, signal_nm):
    """``(dk in rad/m, dk L / 2 pi)`` at signal wavelength(s) in nm, pump fixed."""
    om_s = omega_of(np.asarray(signal_nm, dtype=float) / 1e3)
    dk = phase_mismatch_omega(design, curves, om_s)
    norm = dk * design.length_m / (2 * math.pi)
    if np.ndim(dk) == 0:
        return float(dk), float(norm)
    return dk, norm


@dataclass(frozen=True)
class PhaseMatchingBand:
    """First sinc nulls (``|dk L / 2 pi| = 1``) on either side of degeneracy."""

    omega_low: float
    omega_high: float

    @property
    def bandwidth_thz(self) -> float:
        return (self.omega_high - self.omega_low) / (2 * math.pi) / 1e12

    @property
    def null_wavelengths_nm(self) -> tuple[float, float]:
        return (float(wavelength_of(self.omega_high)) * 1e3, float(wavelength_of(self.omega_low)) * 1e3)

    @property
    def null_frequencies_thz(self) -> tuple[float, float]:
        return (self.omega_low / (2 * math.pi) / 1e12, self.omega_high / (2 * math.pi) / 1e12)


def phase_matching_band(design: QpmDesign, curves: QpmCurves, n_scan: int = 2000) -> PhaseMatchingBand:
    """Locate the first nulls of ``sinc(dk L / 2)`` around the degenerate point.

    Scans outward from ``omega_p / 2`` until ``|dk L / 2 pi|`` reaches 1 and
    refines each crossing with Brent's method.
    """
    om0 = design.omega_p / 2
    lo_s, hi_s = curves.signal.omega_range
    lo_i, hi_i = curves.idler_curve.omega_range
    # offsets keeping both photons inside their curves
    reach = min(hi_s - om0, om0 - lo_i, om0 - lo_s, hi_i - om0)
    if reach <= 0:
        raise NumericalError("degenerate point lies outside the signal/idler curves")
    L = design.length_m

    def f(off):
        return abs(float(phase_mismatch_omega(design, curves, om0 + off))) * L / (2 * math.pi) - 1.0

    if f(0.0) >= 0:
        raise NumericalError("|dk L/2pi| >= 1 already at degeneracy; design is not phase matched")
    nulls = []
    for sgn in (+1, -1):
        offs = sgn * np.linspace(0, reach, n_scan)[1:]
        prev = 0.0
        for off in offs:
            if f(off) >= 0:
                nulls.append(om0 + brentq(f, min(prev, off), max(prev, off), xtol=1e-3))
                break
            prev = off
        else:
            raise NumericalError("no sinc null inside the sampled curves; widen the signal curve")
    return PhaseMatchingBand(omega_low=min(nulls), omega_high=max(nulls))


def qpm_efficiency_factor(duty: float, order: int = 1) -> float:
    """Fourier weight ``|sin(m pi D)|`` of an m-th order grating with duty D."""
    if not 0 < duty < 1:
        raise ValueError("duty cycle must lie in (0, 1)")
    return abs(math.sin(order * math.pi * duty))
