import math

import numpy as np
import pytest
from scipy.constants import c as C0

from lnspdc.dispersion import (DispersionCurve, GvdMap, gvd, gvd_map, local_wavelengths, omega_of,
                               sample_wavelengths, sign_crossings, wavelength_of, zero_contour)
from lnspdc.errors import ConfigError, WavelengthRangeError
from lnspdc.materials import get_material, index
from lnspdc.modesolver import WaveguideGeometry


def test_omega_wavelength_roundtrip():
    lam = np.array([0.5, 0.81, 1.62, 2.0])
    assert np.allclose(wavelength_of(omega_of(lam)), lam, rtol=1e-15)
    assert omega_of(1.0) == pytest.approx(2 * math.pi * C0 / 1e-6)


def test_quadratic_index_gives_closed_form_gvd():
    # n(w) = a + b w + c w^2  =>  k'' = (2 b + 6 c w) / c0
    a, b, c = 2.0, 1e-17, 1e-33
    lam = sample_wavelengths(1.4, 1.9, 20)
    om = omega_of(lam)
    curve = DispersionCurve(lam, a + b * om + c * om * om)
    for l in (1.5, 1.62, 1.8):
        w = omega_of(l)
        want = (2 * b + 6 * c * w) / C0 * 1e27
        assert gvd(curve, l) == pytest.approx(want, rel=1e-9)


def test_bulk_ln_gvd_matches_finite_difference_of_group_delay():
    model = get_material("LN_extraordinary")
    lam = sample_wavelengths(1.3, 1.9, 10)
    curve = DispersionCurve(lam, index(model, lam))

    def k(w):
        return w * index(model, 2 * math.pi * C0 / w * 1e6) / C0

    for l in (1.45, 1.62, 1.75):
        w = float(omega_of(l))
        h = w * 1e-3
        k1p = (k(w + 2 * h) - k(w)) / (2 * h)  # k' at w + h
        k1m = (k(w) - k(w - 2 * h)) / (2 * h)  # k' at w - h
        fd = (k1p - k1m) / (2 * h) * 1e27
        assert gvd(curve, l) == pytest.approx(fd, rel=0.01)


def test_group_index_of_flat_curve():
    lam = sample_wavelengths(1.0, 2.0, 50)
    curve = DispersionCurve(lam, np.full(lam.shape, 1.7))
    assert curve.group_index(1.5) == pytest.approx(1.7, rel=1e-12)
    assert gvd(curve, 1.5) == pytest.approx(0.0, abs=1e-9)


def test_curve_validation():
    with pytest.raises(ConfigError):
        DispersionCurve(np.linspace(1, 2, 6), np.ones(6))
    with pytest.raises(ConfigError):
        DispersionCurve(np.array([1, 1, 2, 3, 4, 5, 6.0]), np.ones(7))
    with pytest.raises(ConfigError):
        DispersionCurve(np.linspace(1, 2, 8), np.ones(7))


def test_curve_sorts_input():
    lam = sample_wavelengths(1.0, 2.0, 100)
    n = 2.0 - 0.1 * lam
    a = DispersionCurve(lam, n)
    b = DispersionCurve(lam[::-1], n[::-1])
    assert a.n_at(1.55) == b.n_at(1.55)


def test_range_checks():
    lam = sample_wavelengths(1.0, 2.0, 100)
    curve = DispersionCurve(lam, 2.0 - 0.1 * lam)
    with pytest.raises(WavelengthRangeError):
        curve.n_at(0.9)
    with pytest.raises(WavelengthRangeError):
        gvd(curve, 1.1)  # inside the curve but within the two-sample margin
    gvd(curve, 1.2)
    gvd(curve, 1.8)


def test_sample_helpers():
    lam = sample_wavelengths(1.16, 1.90, 20)
    assert lam[0] == 1.16 and lam[-1] == 1.9 and len(lam) == 38
    loc = local_wavelengths(1.62, 10, 7)
    assert loc[3] == pytest.approx(1.62) and np.allclose(np.diff(loc), 0.01)
    with pytest.raises(ConfigError):
        local_wavelengths(1.62, 10, 6)


def test_sign_crossings_linear():
    x = np.array([1600, 1700, 1800, 1900, 2000.0])
    assert sign_crossings(x, x - 1750) == pytest.approx([1750])
    assert sign_crossings(x, x - 1800) == pytest.approx([1800])
    assert len(sign_crossings(x, x + 1)) == 0
    y = np.array([1.0, np.nan, -1.0, -2.0, 3.0])
    assert sign_crossings(x, y) == pytest.approx([1900 + 100 * 2 / 5])


def test_zero_contour_plane():
    widths = np.array([1600, 1800, 2000, 2200.0])
    depths = np.array([100, 200, 300.0])
    W, H = np.meshgrid(widths, depths)
    k2 = (W - 1900) + (H - 200)  # zero line w + h = 2100
    pts = zero_contour(widths, depths, k2)
    assert len(pts) > 0
    assert np.allclose(pts.sum(axis=1), 2100)
    gm = GvdMap(widths, depths, 1.62, k2)
    assert gm.row_crossings(200.0) == pytest.approx([1900])
    with pytest.raises(ValueError):
        gm.row_crossings(165.0)


def test_gvd_map_invalid_cells_are_nan():
    gm = gvd_map(WaveguideGeometry(), [1800.0], [700.0])  # etch deeper than the film
    assert gm.k2.shape == (1, 1) and np.isnan(gm.k2[0, 0])


@pytest.mark.slow
def test_gvd_map_parallel_matches_serial():
    g = WaveguideGeometry()
    a = gvd_map(g, [1700.0, 1900.0], [165.0], workers=1)
    b = gvd_map(g, [1700.0, 1900.0], [165.0], workers=2)
    assert np.array_equal(a.k2, b.k2)
    assert np.all(np.isfinite(a.k2))


def test_waveguide_curve_is_smooth(reference_curves):
    """Shared-mesh sampling keeps the third difference of n_eff tiny."""
    n = reference_curves.signal.n_eff
    d3 = np.diff(n, 3)
    assert np.max(np.abs(d3)) < 1e-5
