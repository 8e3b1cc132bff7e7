import math

import numpy as np
import pytest
from scipy.constants import c as C0

from lnspdc.dispersion import DispersionCurve, build_curve, sample_wavelengths
from lnspdc.modesolver import WaveguideGeometry, fundamental_te, make_mesh
from lnspdc.qpm import QpmCurves


@pytest.fixture(scope="session")
def reference_geometry():
    return WaveguideGeometry()


@pytest.fixture(scope="session")
def reference_modes(reference_geometry):
    """Fundamental TE modes at 810 and 1620 nm on one shared mesh."""
    g = reference_geometry
    mesh = make_mesh(g, 1.62)
    return {lam: fundamental_te(g, lam, mesh=mesh) for lam in (0.81, 1.62)}


@pytest.fixture(scope="session")
def reference_curves(reference_geometry):
    g = reference_geometry
    pump = build_curve(g, sample_wavelengths(0.78, 0.84, 10), label="pump")
    sig = build_curve(g, sample_wavelengths(1.16, 1.90, 20), label="signal")
    return QpmCurves(pump, sig)


def curve_from_k(k_of_omega, omega_lo, omega_hi, n=401, label=""):
    """A DispersionCurve sampling ``n = c k / omega`` for a prescribed ``k(omega)``."""
    om = np.linspace(omega_lo, omega_hi, n)
    lam_um = 2 * math.pi * C0 / om * 1e6
    return DispersionCurve(lam_um, C0 * k_of_omega(om) / om, label=label)


@pytest.fixture
def quadratic_k_curves():
    """Pump and signal curves with exactly quadratic k(omega) about known centres.

    Returns ``(curves, params)`` with the pump at 810 nm and a degenerate
    signal at 1620 nm; ``params`` holds the Taylor coefficients.
    """
    om_p = 2 * math.pi * C0 / 810e-9
    om0 = om_p / 2
    p = {
        "om_p": om_p, "om0": om0,
        "kp0": 2.10 * om_p / C0, "kp1": 2.30 / C0, "kp2": 2.0e-25,
        "ks0": 1.92 * om0 / C0, "ks1": 2.25 / C0, "ks2": 1.0e-25,
    }

    def kp(om):
        d = om - om_p
        return p["kp0"] + p["kp1"] * d + 0.5 * p["kp2"] * d * d

    def ks(om):
        d = om - om0
        return p["ks0"] + p["ks1"] * d + 0.5 * p["ks2"] * d * d

    pump = curve_from_k(kp, om_p * 0.95, om_p * 1.05, label="pump")
    sig = curve_from_k(ks, om0 * 0.6, om0 * 1.4, label="signal")
    return QpmCurves(pump, sig), p


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
