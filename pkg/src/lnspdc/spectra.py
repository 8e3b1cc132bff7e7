"""Two-photon spectra and SHG efficiency.

Spectral arithmetic runs in angular frequency; wavelengths appear only when
reading inputs and writing outputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C0, epsilon_0

from .dispersion import omega_of, wavelength_of
from .errors import ConfigError, WavelengthRangeError
from .qpm import QpmCurves, QpmDesign, phase_mismatch_omega

TWO_PI = 2 * math.pi
_ENVELOPE_CUTOFF = 1e-6


@dataclass(frozen=True)
class PumpEnvelope:
    """Pump spectral amplitude, unit peak.

    ``fwhm_nm`` is the full width at half maximum of the pump power spectrum
    ``|amplitude|^2``.
    """

    center_nm: float = 810.6
    fwhm_nm: float = 1.1
    shape: str = "gaussian"

    def __post_init__(self):
        if not self.fwhm_nm > 0:
            raise ConfigError("pump bandwidth must be > 0")
        if self.shape not in ("gaussian", "lorentzian"):
            raise ConfigError(f"unknown pump shape {self.shape!r}")

    @property
    def omega(self) -> float:
        return float(omega_of(self.center_nm / 1e3))

    @property
    def fwhm_omega(self) -> float:
        lam = self.center_nm * 1e-9
        return TWO_PI * C0 * self.fwhm_nm * 1e-9 / lam**2

    def power(self, omega):
        """``|amplitude|^2`` at angular frequency ``omega``."""
        x = (np.asarray(omega, dtype=float) - self.omega) / self.fwhm_omega
        if self.shape == "gaussian":
            return np.exp(-4 * math.log(2) * x * x)
        return 1.0 / (1.0 + 4 * x * x)

    def amplitude(self, omega):
        return np.sqrt(self.power(omega))


@dataclass
class JsiGrid:
    """Joint spectral intensity on signal x idler angular-frequency axes."""

    omega_s: np.ndarray
    omega_i: np.ndarray
    intensity: np.ndarray  # [signal, idler], unit peak
    design: QpmDesign
    pump: PumpEnvelope

    @property
    def signal_thz(self) -> np.ndarray:
        return self.omega_s / TWO_PI / 1e12

    @property
    def idler_thz(self) -> np.ndarray:
        return self.omega_i / TWO_PI / 1e12

    def antidiagonal(self) -> np.ndarray:
        """Intensity along ``omega_s + omega_i = omega_p`` (requires mirrored axes)."""
        n = len(self.omega_s)
        return self.intensity[np.arange(n), np.arange(n)[::-1]]

    def bandwidth_thz(self) -> float:
        """-3 dB extent of the antidiagonal, in signal frequency."""
        return width_at(self.signal_thz, self.antidiagonal(), 0.5)

    def thickness_thz(self) -> float:
        """-3 dB extent across the ridge at degeneracy, in pump (sum) frequency."""
        diag = np.diagonal(self.intensity)
        return width_at(self.signal_thz + self.idler_thz, diag, 0.5)


def crossings_at(x, y, level):
    """Outermost points where ``y`` (unit-normalised) falls to ``level``, linearly interpolated."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    peak = y.max()
    if peak <= 0:
        raise ValueError("profile has no positive values")
    y = y / peak
    above = np.nonzero(y >= level)[0]
    i0, i1 = above[0], above[-1]
    if i0 == 0:
        left = x[0]
    else:
        left = x[i0 - 1] + (x[i0] - x[i0 - 1]) * (level - y[i0 - 1]) / (y[i0] - y[i0 - 1])
    if i1 == len(x) - 1:
        right = x[-1]
    else:
        right = x[i1] + (x[i1 + 1] - x[i1]) * (y[i1] - level) / (y[i1] - y[i1 + 1])
    if i0 == 0 or i1 == len(x) - 1:
        raise ValueError("profile does not fall below the level inside the grid; widen the span")
    return left, right


def width_at(x, y, level=0.5) -> float:
    left, right = crossings_at(x, y, level)
    return float(abs(right - left))


def jsi(design: QpmDesign, curves: QpmCurves, pump: PumpEnvelope, half_span_thz: float = 25.0,
        n_points: int = 401) -> JsiGrid:
    """``|alpha(w_s + w_i)|^2 sinc^2(dk L / 2)`` on a square grid centred at half the pump frequency.

    Each axis covers ``+-half_span_thz`` around degeneracy. Signal and idler
    share one axis, mirrored about degeneracy, so the grid contains the exact
    antidiagonal and the exact degenerate cell (``n_points`` is forced odd).
    Cells whose pump power is below 1e-6 of peak and whose sum frequency lies
    outside the pump curve are set to zero; any other cell outside a curve
    raises.
    """
    if n_points % 2 == 0:
        n_points += 1
    om0 = pump.omega / 2
    offs = np.linspace(-1.0, 1.0, n_points) * half_span_thz * 1e12 * TWO_PI
    axis = om0 + offs
    S, I = np.meshgrid(axis, axis, indexing="ij")
    for curve in (curves.signal, curves.idler_curve):
        lo, hi = curve.omega_range
        if axis[0] < lo * (1 - 1e-12) or axis[-1] > hi * (1 + 1e-12):
            raise WavelengthRangeError(
                f"JSI axis {wavelength_of(axis[-1]) * 1e3:.1f}-{wavelength_of(axis[0]) * 1e3:.1f} nm "
                f"exceeds the {curve.label or 'signal'} curve"
            )
    total = S + I
    env = pump.power(total)
    plo, phi = curves.pump.omega_range
    inside = (total >= plo) & (total <= phi)
    if np.any(~inside & (env > _ENVELOPE_CUTOFF)):
        raise WavelengthRangeError("pump curve does not cover the pump envelope on this grid")
    out = np.zeros_like(S)
    dk = phase_mismatch_omega(design, curves, S[inside], I[inside])
    x = dk * design.length_m / 2
    out[inside] = env[inside] * np.sinc(x / math.pi) ** 2
    out /= out.max()
    return JsiGrid(axis, axis.copy(), out, design, pump)


@dataclass
class MarginalSpectrum:
    omega: np.ndarray
    intensity: np.ndarray
    degenerate_omega: float
    half_bandwidth_thz: float
    half_bandwidth_nm: float
    full_bandwidth_thz: float

    @property
    def frequency_thz(self) -> np.ndarray:
        return self.omega / TWO_PI / 1e12

    @property
    def wavelength_nm(self) -> np.ndarray:
        return wavelength_of(self.omega) * 1e3


def marginal_signal_spectrum(grid: JsiGrid) -> MarginalSpectrum:
    """Signal spectrum summed over the idler axis, unit peak.

    The half-bandwidth runs from degeneracy (half the pump frequency) to the
    outer -3 dB point on the high-frequency, short-wavelength side, matching a
    measurement that only sees photons bluer than degeneracy.
    """
    prof = grid.intensity.sum(axis=1)
    prof = prof / prof.max()
    f = grid.signal_thz
    left, right = crossings_at(f, prof, 0.5)
    f0 = grid.pump.omega / 2 / TWO_PI / 1e12
    half = right - f0
    lam0 = C0 / (f0 * 1e12) * 1e9
    lam_edge = C0 / (right * 1e12) * 1e9
    return MarginalSpectrum(grid.omega_s, prof, grid.pump.omega / 2, float(half),
                            float(lam0 - lam_edge), float(right - left))


def spdc_total_bandwidth(signal_half_bandwidth_thz: float) -> float:
    """Two-photon bandwidth from the one-sided signal width (energy conservation)."""
    if signal_half_bandwidth_thz < 0:
        raise ValueError("bandwidth must be non-negative")
    return 2.0 * signal_half_bandwidth_thz


@dataclass(frozen=True)
class ShgModelInput:
    """Inputs of the normalised SHG efficiency model (units in field names)."""

    d33_pm_per_V: float = 27.0
    n_omega: float = 1.92
    n_2omega: float = 2.099
    lambda_2omega_nm: float = 810.0
    a_eff_um2: float = 1.106
    zeta: float = 0.93
    delta_k: float = 0.0
    length_cm: float = 0.57

    def __post_init__(self):
        for name in ("d33_pm_per_V", "n_omega", "n_2omega", "lambda_2omega_nm", "a_eff_um2",
                     "length_cm"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if not 0 < self.zeta <= 1:
            raise ConfigError("zeta must lie in (0, 1]")


def composite_area(a_omega_um2: float, a_2omega_um2: float) -> float:
    """``(A_w^2 A_2w)^(1/3)``, the area entering the SHG efficiency."""
    if not (a_omega_um2 > 0 and a_2omega_um2 > 0):
        raise ValueError("areas must be positive")
    return (a_omega_um2**2 * a_2omega_um2) ** (1.0 / 3.0)


def shg_prefactor(inp: ShgModelInput) -> float:
    """Phase-matched efficiency in 1/(W m^2)."""
    d = inp.d33_pm_per_V * 1e-12
    lam = inp.lambda_2omega_nm * 1e-9
    a = inp.a_eff_um2 * 1e-12
    return (8 * d * d / (epsilon_0 * C0 * inp.n_omega**2 * inp.n_2omega * lam * lam)
            * inp.zeta**2 / a)


def shg_efficiency(inp: ShgModelInput) -> float:
    """Normalised SHG efficiency in %/W/cm^2, including the ``sinc^2(dk L / 2)`` factor."""
    x = inp.delta_k * inp.length_cm * 1e-2 / 2
    sinc2 = float(np.sinc(x / math.pi)) ** 2
    # 1/(W m^2) -> %/(W cm^2): x 100 % x 1e-4 m^2/cm^2
    return shg_prefactor(inp) * sinc2 * 1e-2


def shg_efficiency_from_power(p_omega_W: float, p_2omega_W: float, length_cm: float) -> float:
    """Measured efficiency ``P_2w / (L^2 P_w^2)`` in %/W/cm^2."""
    if not (p_omega_W > 0 and length_cm > 0) or p_2omega_W < 0:
        raise ValueError("powers and length must be positive")
    return 100.0 * p_2omega_W / (length_cm**2 * p_omega_W**2)


def shg_mismatch(design: QpmDesign, curves: QpmCurves, fundamental_nm):
    """``k(2w) - 2 k(w) - 2 pi m / period`` in rad/m; the pump curve supplies 2w."""
    om = omega_of(np.asarray(fundamental_nm, dtype=float) / 1e3)
    return curves.pump.k(2 * om) - 2 * curves.signal.k(om) - design.grating_k
