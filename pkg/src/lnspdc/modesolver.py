"""Semi-vectorial finite-difference eigenmodes of a trapezoidal ridge.

The cross-section is a thin film of thickness ``h2`` on a buried oxide, etched
by ``h1`` to leave a ridge with top width ``w`` and sidewalls at ``theta``
degrees from horizontal. The remaining slab (thickness ``h2 - h1``) extends
laterally to the window edge.

Discretisation
--------------
Uniform rectangular cells, index averaged by covered area (the trapezoid is
integrated exactly along x and by sub-rows along y). TE modes solve for the
horizontal field component Ex with the extraordinary index of x-cut LN; TM
modes solve for Ey with the ordinary index. The semi-vectorial operator
weights the derivative across the polarisation direction by the permittivity
ratio at the cell interfaces, which enforces continuity of the normal D.
The field is zero on the window edges.

The eigenproblem ``A E = beta^2 E`` is solved by shift-invert Arnoldi around
``(k0 n_core)^2`` from a fixed start vector, so results are deterministic for
a given mesh.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq
from scipy.sparse import coo_matrix, identity
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigs, splu

from .errors import ConfigError, ConvergenceError
from .materials import SellmeierModel, get_material

log = logging.getLogger(__name__)

#: Relative field amplitude the auto-sized window aims for at its edges.
EDGE_TOLERANCE = 1e-4
_SUBROWS = 16
_MAX_LATERAL_PAD_UM = 12.0


@dataclass(frozen=True)
class WaveguideGeometry:
    """Ridge cross-section; lengths in nm, angle in degrees from horizontal."""

    top_width: float = 1800.0
    etch_depth: float = 165.0
    film_thickness: float = 600.0
    sidewall_angle: float = 60.0
    oxide_thickness: float = 2000.0
    core_te: str = "LN_extraordinary"
    core_tm: str = "LN_ordinary"
    substrate: str = "SiO2"
    cladding: str = "air"

    def __post_init__(self):
        if not self.top_width > 0:
            raise ConfigError("top_width must be > 0")
        if not 0 < self.etch_depth <= self.film_thickness:
            raise ConfigError("need 0 < etch_depth <= film_thickness")
        if not 0 < self.sidewall_angle <= 90:
            raise ConfigError("need 0 < sidewall_angle <= 90")
        if not self.oxide_thickness > 0:
            raise ConfigError("oxide_thickness must be > 0")

    @property
    def slab_thickness(self) -> float:
        return self.film_thickness - self.etch_depth

    @property
    def bottom_width(self) -> float:
        if self.sidewall_angle >= 90:
            return self.top_width
        return self.top_width + 2 * self.etch_depth / math.tan(math.radians(self.sidewall_angle))

    def with_(self, **changes) -> "WaveguideGeometry":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return WaveguideGeometry(**fields)

    def core_material(self, polarization: str) -> SellmeierModel:
        return get_material(self.core_te if polarization == "TE" else self.core_tm)


@dataclass(frozen=True)
class Mesh:
    """Cell edges in um and the film (core) area fraction of every cell."""

    x_edges: np.ndarray
    y_edges: np.ndarray
    core_fraction: np.ndarray
    substrate_rows: np.ndarray  # bool per row, True below the film

    @property
    def dx(self) -> float:
        return float(self.x_edges[1] - self.x_edges[0])

    @property
    def dy(self) -> float:
        return float(self.y_edges[1] - self.y_edges[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.core_fraction.shape

    @cached_property
    def x(self) -> np.ndarray:
        return 0.5 * (self.x_edges[1:] + self.x_edges[:-1])

    @cached_property
    def y(self) -> np.ndarray:
        return 0.5 * (self.y_edges[1:] + self.y_edges[:-1])

    def same_grid(self, other: "Mesh") -> bool:
        return (self is other or (self.shape == other.shape
                and np.array_equal(self.x_edges, other.x_edges)
                and np.array_equal(self.y_edges, other.y_edges)))


@dataclass
class ModeSolution:
    """One eigenmode. ``field`` is indexed ``[ix, iy]`` and normalised to unit power."""

    n_eff: float
    wavelength: float
    field: np.ndarray = dc_field(repr=False)
    mesh: Mesh = dc_field(repr=False)
    polarization: str
    te_fraction: float
    guided: bool
    n_core: float
    n_slab_max: float
    boundary_ratio: float

    @property
    def dx(self) -> float:
        return self.mesh.dx

    @property
    def dy(self) -> float:
        return self.mesh.dy

    @cached_property
    def a_eff(self) -> float:
        return effective_area(self)


def slab_mode_index(thickness_um: float, n_film: float, n_sub: float, n_clad: float,
                    wavelength_um: float, polarization: str = "TE", order: int = 0) -> float | None:
    """Effective index of an asymmetric three-layer slab mode, or None below cutoff.

    Solves ``k0 t kappa = m pi + atan(r_s gamma_s / kappa) + atan(r_c gamma_c / kappa)``
    with ``r = 1`` for TE and ``r = (n_film / n_outer)^2`` for TM.
    """
    if thickness_um <= 0:
        return None
    k0 = 2 * math.pi / wavelength_um
    n_lo = max(n_sub, n_clad)
    tm = polarization == "TM"

    def phase(n):
        kap = math.sqrt(max(n_film**2 - n * n, 0.0))
        gs = math.sqrt(max(n * n - n_sub**2, 0.0))
        gc = math.sqrt(max(n * n - n_clad**2, 0.0))
        if tm:
            gs *= (n_film / n_sub) ** 2
            gc *= (n_film / n_clad) ** 2
        return k0 * thickness_um * kap - order * math.pi - math.atan2(gs, kap) - math.atan2(gc, kap)

    eps = 1e-13
    lo, hi = n_lo + eps, n_film - eps
    if phase(lo) <= 0:
        return None
    return brentq(phase, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _indices(g: WaveguideGeometry, wavelength: float, polarization: str):
    n_core = get_material(g.core_te if polarization == "TE" else g.core_tm)(wavelength)
    n_sub = get_material(g.substrate)(wavelength)
    n_clad = get_material(g.cladding)(wavelength)
    return n_core, n_sub, n_clad


def slab_indices(g: WaveguideGeometry, wavelength: float) -> dict[str, float | None]:
    """TE and TM fundamental slab indices of the etched slab and of the full film."""
    out = {}
    for pol in ("TE", "TM"):
        n_core, n_sub, n_clad = _indices(g, wavelength, pol)
        out[f"{pol}_etched"] = slab_mode_index(g.slab_thickness / 1e3, n_core, n_sub, n_clad,
                                               wavelength, pol)
        out[f"{pol}_film"] = slab_mode_index(g.film_thickness / 1e3, n_core, n_sub, n_clad,
                                             wavelength, pol)
    return out


def _estimate_neff(g: WaveguideGeometry, wavelength: float) -> tuple[float, float]:
    """Effective-index-method guess of the TE ridge index and its lateral cladding index."""
    n_core, n_sub, n_clad = _indices(g, wavelength, "TE")
    n_film = slab_mode_index(g.film_thickness / 1e3, n_core, n_sub, n_clad, wavelength, "TE")
    n_floor = max(n_sub, n_clad)
    if n_film is None:
        return n_floor, n_floor
    n_side = slab_mode_index(g.slab_thickness / 1e3, n_core, n_sub, n_clad, wavelength, "TE")
    n_side = n_floor if n_side is None else n_side
    width = 0.5 * (g.top_width + g.bottom_width) / 1e3
    # lateral guide is TM-like in the effective index picture
    n_est = slab_mode_index(width, n_film, n_side, n_side, wavelength, "TM")
    return (n_side if n_est is None else n_est), n_side


def make_mesh(g: WaveguideGeometry, wavelength_um: float, grid_nm: float = 20.0,
              window_um: tuple[float, float, float] | None = None) -> Mesh:
    """Build the cell grid for ``g``.

    Parameters
    ----------
    wavelength_um : float
        Longest wavelength the mesh will be used for; sets the auto window.
    grid_nm : float
        Cell size in both directions.
    window_um : (half_width, depth_below_film, height_above_film), optional
        Explicit window. By default each side is padded until the evanescent
        tail estimated from the slab and effective-index guesses falls below
        ``EDGE_TOLERANCE``; the depth is capped at the oxide thickness.
    """
    d = grid_nm / 1e3
    h2 = g.film_thickness / 1e3
    hs = g.slab_thickness / 1e3
    wt = g.top_width / 1e3
    wb = g.bottom_width / 1e3
    if wt / d < 10:
        raise ConfigError(f"grid {grid_nm} nm gives fewer than 10 cells across the ridge")
    if window_um is None:
        n_est, n_side = _estimate_neff(g, wavelength_um)
        _, n_sub, n_clad = _indices(g, wavelength_um, "TE")
        k0 = 2 * math.pi / wavelength_um
        decay = math.log(1 / EDGE_TOLERANCE) * 1.1
        lat = decay / (k0 * math.sqrt(max(n_est**2 - n_side**2, 1e-6)))
        top = decay / (k0 * math.sqrt(max(n_est**2 - n_clad**2, 1e-6)))
        bot = decay / (k0 * math.sqrt(max(n_est**2 - n_sub**2, 1e-6)))
        half = wb / 2 + min(lat, _MAX_LATERAL_PAD_UM)
        below = min(bot, g.oxide_thickness / 1e3)
        above = top
    else:
        half, below, above = window_um
    nx = int(math.ceil(half / d))
    x_edges = np.arange(-nx, nx + 1) * d
    nb = int(math.ceil(below / d))
    nt = int(math.ceil((h2 + above) / d))
    y_edges = np.arange(-nb, nt + 1) * d

    frac = np.zeros((2 * nx, nb + nt))
    t = 0.0 if g.sidewall_angle >= 90 else 1 / math.tan(math.radians(g.sidewall_angle))
    sub = (np.arange(_SUBROWS) + 0.5) / _SUBROWS
    xl, xr = x_edges[:-1], x_edges[1:]
    for j in range(nb + nt):
        y0, y1 = y_edges[j], y_edges[j + 1]
        if y1 <= 0 or y0 >= h2:
            continue
        acc = np.zeros(2 * nx)
        for y in y0 + sub * (y1 - y0):
            if y < 0 or y > h2:
                continue
            if y <= hs:
                acc += 1.0
                continue
            half_w = wt / 2 + (h2 - y) * t
            acc += (np.clip(xr, -half_w, half_w) - np.clip(xl, -half_w, half_w)) / d
        frac[:, j] = np.minimum(acc / _SUBROWS, 1.0)  # round-off
    substrate_rows = (y_edges[1:] <= 0)
    return Mesh(x_edges, y_edges, frac, substrate_rows)


def permittivity(mesh: Mesh, n_core: float, n_sub: float, n_clad: float) -> np.ndarray:
    n_bg = np.where(mesh.substrate_rows, n_sub, n_clad)[None, :]
    return mesh.core_fraction * n_core**2 + (1 - mesh.core_fraction) * n_bg**2


def build_operator(eps: np.ndarray, dx: float, dy: float, k0: float, polarization: str):
    """Sparse semi-vectorial operator; eigenvalues are ``beta^2`` in um^-2."""
    nx, ny = eps.shape
    ii = np.arange(nx * ny).reshape(nx, ny)
    if polarization == "TE":
        ee = np.vstack([eps[1:], eps[-1:]])
        ew = np.vstack([eps[:1], eps[:-1]])
        ae = 2 * ee / (ee + eps) / dx**2
        aw = 2 * ew / (ew + eps) / dx**2
        ap = -(2 * eps / (ee + eps) + 2 * eps / (ew + eps)) / dx**2 - 2 / dy**2
        an = np.full_like(eps, 1 / dy**2)
        a_s = an
    elif polarization == "TM":
        en = np.hstack([eps[:, 1:], eps[:, -1:]])
        es = np.hstack([eps[:, :1], eps[:, :-1]])
        an = 2 * en / (en + eps) / dy**2
        a_s = 2 * es / (es + eps) / dy**2
        ap = -(2 * eps / (en + eps) + 2 * eps / (es + eps)) / dy**2 - 2 / dx**2
        ae = np.full_like(eps, 1 / dx**2)
        aw = ae
    else:
        raise ConfigError(f"unknown polarization {polarization!r}")
    ap = ap + k0**2 * eps
    rows = np.concatenate([ii.ravel(), ii[:-1].ravel(), ii[1:].ravel(),
                           ii[:, :-1].ravel(), ii[:, 1:].ravel()])
    cols = np.concatenate([ii.ravel(), ii[1:].ravel(), ii[:-1].ravel(),
                           ii[:, 1:].ravel(), ii[:, :-1].ravel()])
    vals = np.concatenate([ap.ravel(), ae[:-1].ravel(), aw[1:].ravel(),
                           an[:, :-1].ravel(), a_s[:, 1:].ravel()])
    return coo_matrix((vals, (rows, cols)), shape=(nx * ny, nx * ny)).tocsc()


def _boundary_ratio(f: np.ndarray) -> float:
    peak = np.abs(f).max()
    edge = max(np.abs(f[0]).max(), np.abs(f[-1]).max(),
               np.abs(f[:, 0]).max(), np.abs(f[:, -1]).max())
    return float(edge / peak)


def _solve_pol(g, wavelength, n_modes, mesh, polarization, tol):
    n_core, n_sub, n_clad = _indices(g, wavelength, polarization)
    eps = permittivity(mesh, n_core, n_sub, n_clad)
    k0 = 2 * math.pi / wavelength
    A = build_operator(eps, mesh.dx, mesh.dy, k0, polarization)
    n = A.shape[0]
    k = min(n_modes, n - 2)
    v0 = np.full(n, 1.0 / math.sqrt(n))
    # the unetched film's slab index bounds every ridge mode from above; shifting
    # just past it keeps the fundamental nearest while cutting Arnoldi steps
    n_film = slab_mode_index(g.film_thickness / 1e3, n_core, n_sub, n_clad, wavelength, polarization)
    n_shift = n_core if n_film is None else min(n_film + 0.01, n_core)
    sigma = (k0 * n_shift) ** 2
    try:
        # minimum-degree ordering on A + A^T halves the LU fill of this 5-point stencil
        lu = splu((A - sigma * identity(n, format="csc")).tocsc(), permc_spec="MMD_AT_PLUS_A")
        op = LinearOperator((n, n), matvec=lu.solve, dtype=float)
        vals, vecs = eigs(A, k=k, sigma=sigma, which="LM", v0=v0, tol=tol, OPinv=op,
                          ncv=max(2 * k + 1, 8), maxiter=max(1000, 50 * k))
    except (ArpackNoConvergence, ArpackError, RuntimeError) as exc:
        raise ConvergenceError(
            f"eigensolver did not converge at {wavelength} um ({polarization}): {exc}"
        ) from exc
    n_floor = max(n_sub, n_clad)
    etched = [v for key, v in slab_indices(g, wavelength).items()
              if key.endswith("etched") and v is not None]
    n_slab = max(etched) if etched else n_floor
    out = []
    for val, vec in zip(vals, vecs.T):
        beta2 = float(val.real)
        if beta2 <= 0:
            continue
        neff = math.sqrt(beta2) / k0
        if not n_floor < neff < n_core:
            continue
        f = vec.real.reshape(mesh.shape)
        if np.abs(vec.imag).max() > 1e-6 * np.abs(vec.real).max():
            # complex eigvector of a real eigenvalue: rotate to make it real
            ph = vec[np.argmax(np.abs(vec))]
            f = (vec / ph).real.reshape(mesh.shape)
        f = f / math.sqrt(np.sum(f * f) * mesh.dx * mesh.dy)
        if f.flat[np.argmax(np.abs(f))] < 0:
            f = -f
        out.append(ModeSolution(
            n_eff=neff, wavelength=wavelength, field=f, mesh=mesh,
            polarization=polarization, te_fraction=1.0 if polarization == "TE" else 0.0,
            guided=bool(n_slab < neff < n_core), n_core=n_core, n_slab_max=n_slab,
            boundary_ratio=_boundary_ratio(f),
        ))
    return out


def solve_modes(g: WaveguideGeometry, wavelength_um: float, n_modes: int = 1,
                grid_nm: float = 20.0, polarizations=("TE", "TM"),
                mesh: Mesh | None = None, tol: float = 1e-12) -> list[ModeSolution]:
    """Eigenmodes of the ridge, sorted by descending effective index.

    ``n_modes`` modes are requested per polarisation. Modes at or below the
    substrate/cladding light line are discarded; if none remain, an empty list
    is returned and a warning logged. ``guided`` on each solution marks
    ``n_slab_max < n_eff < n_core`` with ``n_slab_max`` the larger of the TE
    and TM indices of the etched slab.
    """
    if mesh is None:
        mesh = make_mesh(g, wavelength_um, grid_nm)
    sols = []
    for pol in polarizations:
        sols.extend(_solve_pol(g, wavelength_um, n_modes, mesh, pol, tol))
    sols.sort(key=lambda m: (-m.n_eff, m.polarization))
    if not sols:
        log.warning("no bound mode found for %s at %.4f um", g, wavelength_um)
    return sols


def fundamental_te(g: WaveguideGeometry, wavelength_um: float, grid_nm: float = 20.0,
                   mesh: Mesh | None = None) -> ModeSolution:
    """Highest-index mode with TE fraction above one half.

    Exact ties at 0.5 are classified TE.
    """
    sols = solve_modes(g, wavelength_um, 1, grid_nm, ("TE",), mesh)
    te = [m for m in sols if m.te_fraction >= 0.5]
    if not te:
        raise ConvergenceError(f"no bound TE mode at {wavelength_um} um for {g}")
    return te[0]


def effective_area(m: ModeSolution) -> float:
    """``(sum |E|^2 dA)^2 / sum |E|^4 dA`` in um^2."""
    i = m.field * m.field
    da = m.dx * m.dy
    s4 = float(np.sum(i * i))
    if s4 == 0:
        raise ValueError("effective area undefined for an all-zero field")
    return float(np.sum(i) * da) ** 2 / (s4 * da)


def mode_overlap(a: ModeSolution, b: ModeSolution) -> float:
    """Normalised overlap of the field amplitude profiles, in [0, 1].

    ``(sum |Ea| |Eb|)^2 / (sum |Ea|^2 * sum |Eb|^2)``; symmetric in its
    arguments, 1 for identical profiles and 0 for disjoint supports.
    """
    if not a.mesh.same_grid(b.mesh):
        raise ValueError("mode_overlap needs both modes on the same mesh")
    fa, fb = np.abs(a.field), np.abs(b.field)
    num = float(np.sum(fa * fb))
    den = float(np.sum(fa * fa)) * float(np.sum(fb * fb))
    if den == 0:
        raise ValueError("mode_overlap undefined for an all-zero field")
    return min(num * num / den, 1.0)


@dataclass(frozen=True)
class LeakageResult:
    """Lateral-leakage check: TE ridge mode against the TM mode of the etched slab.

    ``margin > 0`` means no coupling to the slab TM continuum. When the etched
    slab supports no TM mode (or does not exist), the comparison falls back to
    the slab cutoff index ``max(n_sub, n_clad)`` and ``slab_cutoff`` is set.
    """

    margin: float
    n_ridge_te: float
    n_slab_tm: float
    n_slab_tm_film: float | None
    slab_cutoff: bool


def leakage_margin(g: WaveguideGeometry, wavelength_um: float, grid_nm: float = 20.0,
                   mesh: Mesh | None = None, ridge: ModeSolution | None = None) -> LeakageResult:
    if ridge is None:
        ridge = fundamental_te(g, wavelength_um, grid_nm, mesh)
    slabs = slab_indices(g, wavelength_um)
    _, n_sub, n_clad = _indices(g, wavelength_um, "TM")
    n_tm = slabs["TM_etched"]
    cutoff = n_tm is None
    if cutoff:
        n_tm = max(n_sub, n_clad)
    return LeakageResult(ridge.n_eff - n_tm, ridge.n_eff, n_tm, slabs["TM_film"], cutoff)
