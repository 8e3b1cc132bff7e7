"""Bulk refractive-index models for the layer materials.

Each material is a Sellmeier sum

    n^2(L) = 1 + sum_i B_i L^2 / (L^2 - C_i),      L in um,

with coefficients read from a data file (``data/materials.cfg`` by default).
Evaluation outside a model's validity range raises instead of extrapolating.
The models are fixed at their reference temperature; there is no thermo-optic
correction.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from . import config as cfg
from .errors import ConfigError, WavelengthRangeError

#: Environment override for the materials file, used when no path is passed.
MATERIALS_ENV = "LNSPDC_MATERIALS"

_SCHEMA_KEYS = {
    "coefficients": cfg.float_list,
    "valid_range": cfg.float_pair,
    "temperature": float,
}


@dataclass(frozen=True)
class SellmeierModel:
    """Sellmeier dispersion model.

    Attributes
    ----------
    name : str
        Catalog label, e.g. ``"LN_extraordinary"``.
    coefficients : tuple of float
        Flat ``(B1, C1, B2, C2, ...)``; B dimensionless, C in um^2.
    valid_range : tuple of float
        ``(lambda_min, lambda_max)`` in um.
    temperature_deg_C : float
        Reference temperature the coefficients were measured at.
    """

    name: str
    coefficients: tuple[float, ...]
    valid_range: tuple[float, float]
    temperature_deg_C: float = 23.0
    _b: np.ndarray = field(init=False, repr=False, compare=False)
    _c: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.coefficients) % 2:
            raise ConfigError(f"{self.name}: coefficient list must hold (B, C) pairs")
        lo, hi = self.valid_range
        if not 0 < lo < hi:
            raise ConfigError(f"{self.name}: invalid range {self.valid_range}")
        coeffs = np.asarray(self.coefficients, dtype=float)
        object.__setattr__(self, "_b", coeffs[0::2].copy())
        object.__setattr__(self, "_c", coeffs[1::2].copy())
        # Poles inside the range would make n complex or infinite there.
        if np.any((self._c > lo * lo) & (self._c < hi * hi)):
            raise ConfigError(f"{self.name}: Sellmeier pole inside valid range")

    def __call__(self, wavelength_um):
        return index(self, wavelength_um)


def index(model: SellmeierModel, wavelength_um):
    """Refractive index of ``model`` at ``wavelength_um`` (scalar or array)."""
    lam = np.asarray(wavelength_um, dtype=float)
    lo, hi = model.valid_range
    if np.any(~np.isfinite(lam)) or np.any(lam < lo) or np.any(lam > hi):
        raise WavelengthRangeError(
            f"{model.name}: wavelength {wavelength_um} um outside valid range "
            f"[{lo}, {hi}] um"
        )
    l2 = lam * lam
    n2 = 1.0 + np.sum(model._b[:, None] * l2.reshape(1, -1) / (l2.reshape(1, -1) - model._c[:, None]),
                      axis=0)
    n = np.sqrt(n2).reshape(lam.shape)
    return float(n) if n.ndim == 0 else n


def _default_path() -> Path:
    env = os.environ.get(MATERIALS_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("lnspdc") / "data" / "materials.cfg"))


def load_materials(path: str | Path | None = None) -> dict[str, SellmeierModel]:
    """Read a materials file into a ``{name: SellmeierModel}`` catalog."""
    path = Path(path) if path is not None else _default_path()
    raw = cfg.read_file(path)
    schema = {name: _SCHEMA_KEYS for name in raw}
    typed = cfg.validate(raw, schema, required={n: {"coefficients", "valid_range"} for n in raw})
    catalog = {}
    for name, items in typed.items():
        catalog[name] = SellmeierModel(
            name=name,
            coefficients=tuple(items["coefficients"]),
            valid_range=items["valid_range"],
            temperature_deg_C=items.get("temperature", 23.0),
        )
    return catalog


@lru_cache(maxsize=8)
def _cached_catalog(path: str) -> dict[str, SellmeierModel]:
    return load_materials(path)


def list_materials(path: str | Path | None = None) -> dict[str, SellmeierModel]:
    """Catalog of available models; cached per file path."""
    p = str(Path(path) if path is not None else _default_path())
    return dict(_cached_catalog(p))


def get_material(name: str, path: str | Path | None = None) -> SellmeierModel:
    catalog = list_materials(path)
    try:
        return catalog[name]
    except KeyError:
        raise ConfigError(f"unknown material {name!r}; available: {sorted(catalog)}") from None
