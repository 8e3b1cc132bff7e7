"""Dispersion curves and group-velocity dispersion maps.

A ``DispersionCurve`` holds sampled effective indices and interpolates
``n_eff(omega)`` with a not-a-knot cubic spline; all derivatives of the
wavevector ``k = omega n / c`` come from that spline:

    k'  = (n + omega n') / c
    k'' = (2 n' + omega n'') / c

GVD values are reported in fs^2/mm.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as C0
from scipy.interpolate import CubicSpline

from .errors import ConfigError, NumericalError, WavelengthRangeError
from .modesolver import WaveguideGeometry, fundamental_te, make_mesh

log = logging.getLogger(__name__)

S2_PER_M_TO_FS2_PER_MM = 1e27
MIN_SAMPLES = 7


def omega_of(wavelength_um):
    """Angular frequency in rad/s of a vacuum wavelength in um."""
    return 2 * np.pi * C0 / (np.asarray(wavelength_um, dtype=float) * 1e-6)


def wavelength_of(omega):
    """Vacuum wavelength in um of an angular frequency in rad/s."""
    return 2 * np.pi * C0 / np.asarray(omega, dtype=float) * 1e6


@dataclass(frozen=True)
class DispersionCurve:
    wavelengths: np.ndarray
    n_eff: np.ndarray
    label: str = ""
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lam = np.asarray(self.wavelengths, dtype=float)
        n = np.asarray(self.n_eff, dtype=float)
        if lam.shape != n.shape or lam.ndim != 1:
            raise ConfigError("wavelengths and n_eff must be 1-D arrays of equal length")
        if lam.size < MIN_SAMPLES:
            raise ConfigError(f"a dispersion curve needs at least {MIN_SAMPLES} samples")
        order = np.argsort(lam)
        lam, n = lam[order], n[order]
        if np.any(np.diff(lam) <= 0):
            raise ConfigError("duplicate wavelength samples")
        object.__setattr__(self, "wavelengths", lam)
        object.__setattr__(self, "n_eff", n)
        om = omega_of(lam)[::-1]
        object.__setattr__(self, "_spline", CubicSpline(om, n[::-1], bc_type="not-a-knot"))

    @property
    def omega_range(self) -> tuple[float, float]:
        x = self._spline.x
        return float(x[0]), float(x[-1])

    def _check(self, omega, margin: int = 0):
        x = self._spline.x
        lo, hi = x[margin], x[-1 - margin]
        om = np.asarray(omega, dtype=float)
        # relative slack so endpoints computed from wavelengths still pass
        tol = 1e-12 * hi
        if np.any(om < lo - tol) or np.any(om > hi + tol):
            what = f"with a {margin}-sample margin " if margin else ""
            raise WavelengthRangeError(
                f"{self.label or 'curve'}: query outside sampled range {what}"
                f"[{wavelength_of(hi):.4f}, {wavelength_of(lo):.4f}] um"
            )
        return om

    def n(self, omega, nu: int = 0):
        """``d^nu n_eff / d omega^nu`` at angular frequency ``omega``."""
        return self._spline(self._check(omega), nu)

    def n_at(self, wavelength_um):
        return self.n(omega_of(wavelength_um))

    def k(self, omega):
        """Wavevector in rad/m."""
        om = self._check(omega)
        return om * self._spline(om) / C0

    def k1(self, omega):
        """Inverse group velocity dk/domega in s/m."""
        om = self._check(omega)
        return (self._spline(om) + om * self._spline(om, 1)) / C0

    def k2(self, omega, margin: int = 0):
        """d^2k/domega^2 in s^2/m."""
        om = self._check(omega, margin)
        return (2 * self._spline(om, 1) + om * self._spline(om, 2)) / C0

    def group_index(self, wavelength_um):
        return C0 * self.k1(omega_of(wavelength_um))


def gvd(curve: DispersionCurve, wavelength_um) -> float | np.ndarray:
    """GVD k'' in fs^2/mm at ``wavelength_um``.

    The wavelength must lie at least two samples inside the curve; derivatives
    are never extrapolated toward the ends.
    """
    val = curve.k2(omega_of(wavelength_um), margin=2) * S2_PER_M_TO_FS2_PER_MM
    return float(val) if np.ndim(val) == 0 else val


def sample_wavelengths(start_um: float = 0.7, stop_um: float = 2.0, step_nm: float = 10.0) -> np.ndarray:
    n = int(round((stop_um - start_um) / (step_nm / 1e3)))
    return np.round(start_um + np.arange(n + 1) * step_nm / 1e3, 9)


def local_wavelengths(center_um: float, step_nm: float = 10.0, n_samples: int = MIN_SAMPLES) -> np.ndarray:
    """``n_samples`` wavelengths centred on ``center_um`` (odd count)."""
    if n_samples < MIN_SAMPLES or n_samples % 2 == 0:
        raise ConfigError(f"n_samples must be odd and >= {MIN_SAMPLES}")
    half = n_samples // 2
    return center_um + (np.arange(n_samples) - half) * step_nm / 1e3


def build_curve(g: WaveguideGeometry, wavelengths_um, grid_nm: float = 20.0,
                label: str = "") -> DispersionCurve:
    """Fundamental TE effective index at each wavelength, on one shared mesh.

    The mesh is sized for the longest wavelength so that every sample sees the
    same discretisation; the discretisation error is then a smooth function of
    wavelength and does not pollute the derivatives.
    """
    lam = np.sort(np.asarray(wavelengths_um, dtype=float))
    mesh = make_mesh(g, float(lam[-1]), grid_nm)
    n = np.array([fundamental_te(g, float(l), mesh=mesh).n_eff for l in lam])
    return DispersionCurve(lam, n, label=label)


@dataclass
class GvdMap:
    """k'' (fs^2/mm) over a width x etch-depth sweep; NaN marks failed cells."""

    widths_nm: np.ndarray
    etch_depths_nm: np.ndarray
    wavelength_um: float
    k2: np.ndarray  # shape (n_depths, n_widths)

    @property
    def contour(self) -> np.ndarray:
        return zero_contour(self.widths_nm, self.etch_depths_nm, self.k2)

    def row_crossings(self, etch_depth_nm: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.etch_depths_nm - etch_depth_nm)))
        if not np.isclose(self.etch_depths_nm[i], etch_depth_nm):
            raise ValueError(f"etch depth {etch_depth_nm} nm not in the sweep")
        return sign_crossings(self.widths_nm, self.k2[i])


def sign_crossings(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Linearly interpolated zeros of ``y(x)`` between adjacent finite samples."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = []
    for i in range(len(x) - 1):
        a, b = y[i], y[i + 1]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if a == 0:
            out.append(x[i])
        elif a * b < 0:
            out.append(x[i] + (x[i + 1] - x[i]) * a / (a - b))
    if len(y) and np.isfinite(y[-1]) and y[-1] == 0:
        out.append(x[-1])
    return np.array(sorted(set(out)))


def zero_contour(widths_nm, depths_nm, k2) -> np.ndarray:
    """Points ``(width, depth)`` where k'' changes sign between neighbouring cells.

    Crossings are found along every row and every column and returned sorted by
    depth then width.
    """
    pts = set()
    for i, h in enumerate(depths_nm):
        for w in sign_crossings(widths_nm, k2[i]):
            pts.add((float(w), float(h)))
    for j, w in enumerate(widths_nm):
        for h in sign_crossings(depths_nm, k2[:, j]):
            pts.add((float(w), float(h)))
    if not pts:
        return np.empty((0, 2))
    return np.array(sorted(pts, key=lambda p: (p[1], p[0])))


def _cell(args):
    g, wavelength_um, grid_nm, step_nm, n_samples = args
    try:
        curve = build_curve(g, local_wavelengths(wavelength_um, step_nm, n_samples), grid_nm)
        return gvd(curve, wavelength_um)
    except (NumericalError, ConfigError) as exc:
        log.warning("GVD cell w=%s h1=%s failed: %s", g.top_width, g.etch_depth, exc)
        return float("nan")


def gvd_map(template: WaveguideGeometry, widths_nm, etch_depths_nm, wavelength_um: float = 1.62,
            grid_nm: float = 20.0, step_nm: float = 10.0, n_samples: int = MIN_SAMPLES,
            workers: int = 1) -> GvdMap:
    """Sweep ridge width and etch depth at a fixed wavelength.

    Each cell builds its own local curve of ``n_samples`` wavelengths spaced
    ``step_nm`` apart and evaluates k'' at the centre. Cells are independent;
    with ``workers > 1`` they fan out to a process pool and are merged by cell
    index, so the result does not depend on scheduling.
    """
    widths = np.asarray(widths_nm, dtype=float)
    depths = np.asarray(etch_depths_nm, dtype=float)
    jobs = []
    for h in depths:
        for w in widths:
            try:
                g = template.with_(top_width=float(w), etch_depth=float(h))
            except ConfigError:
                g = None
            jobs.append((g, wavelength_um, grid_nm, step_nm, n_samples))
    runnable = [(i, j) for i, j in enumerate(jobs) if j[0] is not None]
    values = np.full(len(jobs), np.nan)
    if workers > 1 and len(runnable) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            res = list(pool.map(_cell, [j for _, j in runnable], chunksize=1))
    else:
        res = [_cell(j) for _, j in runnable]
    for (i, _), v in zip(runnable, res):
        values[i] = v
    return GvdMap(widths, depths, wavelength_um, values.reshape(len(depths), len(widths)))
