"""Command-line entry point.

Every command reads one sectioned config file (the bundled reference config
when ``--config`` is omitted), stages its outputs in a temporary directory
inside ``--out-dir`` and moves them into place only after the whole command
succeeded, followed by ``manifest_<command>.json`` with content hashes.

Exit status: 0 success, 1 unexpected failure, 2 invalid configuration or
input file, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import math
import os
import shutil
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field, is_dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from . import config as cfgmod
from .errors import ConfigError, LnspdcError, NumericalError, StreamError

log = logging.getLogger("lnspdc")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def _str(v: str) -> str:
    return v.strip()


def _str_list(v: str) -> list[str]:
    return [s.strip() for s in v.split(",") if s.strip()]


def _int(v: str) -> int:
    f = float(v)
    if f != int(f):
        raise ConfigError(f"expected an integer, got {v!r}")
    return int(f)


F = float
SCHEMA: cfgmod.Schema = {
    "geometry": {"top_width_nm": F, "etch_depth_nm": F, "film_thickness_nm": F,
                 "sidewall_angle_deg": F, "oxide_thickness_nm": F, "core_te": _str,
                 "core_tm": _str, "substrate": _str, "cladding": _str},
    "materials": {"file": _str},
    "solver": {"grid_nm": F, "n_modes": _int},
    "modes": {"wavelengths_um": cfgmod.float_list, "polarizations": _str_list,
              "write_fields": cfgmod.boolean},
    "dispersion": {"pump_um": cfgmod.float_pair, "pump_step_nm": F,
                   "signal_um": cfgmod.float_pair, "signal_step_nm": F,
                   "gvd_wavelengths_um": cfgmod.float_list},
    "qpm": {"pump_nm": F, "signal_nm": F, "order": _int, "length_mm": F, "duty": F,
            "period_um": F},
    "jsi": {"pump_center_nm": F, "pump_fwhm_nm": F, "pump_shape": _str, "half_span_thz": F,
            "n_points": _int, "period_um": F},
    "shg": {"d33_pm_per_V": F, "n_omega": F, "n_2omega": F, "lambda_2omega_nm": F,
            "a_eff_um2": F, "zeta": F, "delta_k_per_m": F, "length_cm": F,
            "scan_nm": cfgmod.float_range, "from_modes": cfgmod.boolean},
    "sweep": {"widths_nm": cfgmod.float_list, "etch_depths_nm": cfgmod.float_list,
              "wavelength_um": F, "step_nm": F, "n_samples": _int},
    "source": {"pair_rate": F, "duration_s": F, "eta_s": F, "eta_i": F, "dark_s": F,
               "dark_i": F, "jitter_sigma_ps": F, "splitter": _str, "emission": _str,
               "isolation_ps": F, "seed": _int},
    "analysis": {"window_ps": _int, "bin_ps": _int, "span_ps": _int, "floor_min_ps": _int,
                 "splitter_factor": _int, "g2_factor": _int, "n_resample": _int},
    "reproduce": {"sweep_etch_depths_nm": cfgmod.float_list},
}


@dataclass
class Config:
    sections: dict[str, dict[str, Any]]
    raw: dict[str, dict[str, str]]
    path: str

    @property
    def hash(self) -> str:
        return cfgmod.config_hash(self.raw)

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)


def bundled_config_path() -> Path:
    return Path(str(resources.files("lnspdc") / "data" / "paper.cfg"))


def load_config(path: str | Path | None) -> Config:
    p = Path(path) if path else bundled_config_path()
    raw = cfgmod.read_file(p)
    sections = cfgmod.validate(raw, SCHEMA)
    mat = sections["materials"].get("file")
    if mat:
        mp = Path(mat)
        if not mp.is_absolute():
            mp = p.parent / mp
        if not mp.is_file():
            raise ConfigError(f"materials file {mp} not found")
        sections["materials"]["file"] = str(mp)
    return Config(sections, raw, str(p))


# ---------------------------------------------------------------- outputs

def _jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Stage:
    """Temporary output area; ``commit`` moves files into their destinations.

    Files land in ``out_dir`` unless registered with an explicit destination.
    On any exception the staging directory is removed and nothing is moved.
    """

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        self.dir = Path(tempfile.mkdtemp(prefix=".stage-", dir=out_dir))
        self.files: dict[str, Path] = {}  # staged name -> destination

    def path(self, name: str, dest: Path | None = None) -> Path:
        if name in self.files:
            raise ValueError(f"output {name} written twice")
        self.files[name] = dest if dest is not None else self.out_dir / name
        return self.dir / name

    def write_text(self, name: str, text: str, dest: Path | None = None) -> None:
        with open(self.path(name, dest), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)

    def write_json(self, name: str, obj) -> None:
        self.write_text(name, dumps(obj))

    def write_csv(self, name: str, header: list[str], rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        self.write_text(name, buf.getvalue())

    def write_matrix(self, name: str, matrix: np.ndarray, fmt: str = "%.9e") -> None:
        buf = io.StringIO()
        np.savetxt(buf, matrix, fmt=fmt, delimiter=",")
        self.write_text(name, buf.getvalue())

    def commit(self) -> list[tuple[Path, str, int]]:
        done = []
        for name in sorted(self.files):
            src, dest = self.dir / name, self.files[name]
            dest.parent.mkdir(parents=True, exist_ok=True)
            digest, size = sha256_file(src), src.stat().st_size
            try:
                os.replace(src, dest)
            except OSError:  # other filesystem: copy next to dest, then rename
                tmp = dest.with_name(f".{dest.name}.tmp")
                shutil.copyfile(src, tmp)
                os.replace(tmp, dest)
            done.append((dest, digest, size))
        self.discard()
        return done

    def discard(self) -> None:
        shutil.rmtree(self.dir, ignore_errors=True)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(v) else repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _utc() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="milliseconds")


# ---------------------------------------------------------------- builders

@dataclass
class Context:
    cfg: Config
    threads: int = 1
    seed: int | None = None
    memo: dict = field(default_factory=dict)


def geometry(cfg: Config):
    from .modesolver import WaveguideGeometry

    s = cfg.sections["geometry"]
    names = {"top_width_nm": "top_width", "etch_depth_nm": "etch_depth",
             "film_thickness_nm": "film_thickness", "sidewall_angle_deg": "sidewall_angle",
             "oxide_thickness_nm": "oxide_thickness", "core_te": "core_te", "core_tm": "core_tm",
             "substrate": "substrate", "cladding": "cladding"}
    g = WaveguideGeometry(**{names[k]: v for k, v in s.items()})
    from .materials import get_material

    for name in (g.core_te, g.core_tm, g.substrate, g.cladding):
        get_material(name)  # unknown names fail here, before any solve
    return g


def grid_nm(cfg: Config) -> float:
    return float(cfg.get("solver", "grid_nm", 20.0))


def curves(ctx: Context):
    """Pump and signal dispersion curves at the configured geometry (memoised)."""
    if "curves" in ctx.memo:
        return ctx.memo["curves"]
    from .dispersion import build_curve, sample_wavelengths
    from .qpm import QpmCurves

    cfg = ctx.cfg
    g = geometry(cfg)
    p0, p1 = cfg.get("dispersion", "pump_um", (0.78, 0.84))
    s0, s1 = cfg.get("dispersion", "signal_um", (1.16, 1.90))
    t = time.perf_counter()
    pump = build_curve(g, sample_wavelengths(p0, p1, cfg.get("dispersion", "pump_step_nm", 10.0)),
                       grid_nm(cfg), label="pump")
    sig = build_curve(g, sample_wavelengths(s0, s1, cfg.get("dispersion", "signal_step_nm", 20.0)),
                      grid_nm(cfg), label="signal")
    log.info("dispersion curves built in %.1f s", time.perf_counter() - t)
    ctx.memo["curves"] = QpmCurves(pump, sig)
    return ctx.memo["curves"]


def qpm_design(ctx: Context, pump_nm: float | None = None, period_um: float | None = None):
    from .qpm import QpmDesign, solve_poling_period

    cfg = ctx.cfg
    q = cfg.sections["qpm"]
    pump_nm = float(q.get("pump_nm", 810.0)) if pump_nm is None else pump_nm
    period = q.get("period_um") if period_um is None else period_um
    signal_nm = q.get("signal_nm")
    if signal_nm is None or pump_nm != q.get("pump_nm", 810.0):
        signal_nm = 2 * pump_nm  # degenerate
    if period is None:
        cv = curves(ctx)
        period = solve_poling_period(cv.pump, cv.signal, None, pump_nm, signal_nm,
                                     q.get("order", 1))
    return QpmDesign(float(period), q.get("order", 1), q.get("length_mm", 5.7),
                     q.get("duty", 0.5), pump_nm), float(signal_nm)


def source_config(cfg: Config, seed: int | None):
    from .tags import SourceConfig

    s = dict(cfg.sections["source"])
    if "pair_rate" not in s or "duration_s" not in s:
        raise ConfigError("[source] needs pair_rate and duration_s")
    s["duration"] = s.pop("duration_s")
    if seed is not None:
        s["seed"] = seed
    return SourceConfig(**s)


# ---------------------------------------------------------------- commands

def run_modes(ctx: Context, stage: Stage) -> dict:
    from .modesolver import fundamental_te, leakage_margin, make_mesh, mode_overlap, solve_modes

    cfg = ctx.cfg
    g = geometry(cfg)
    lams = cfg.get("modes", "wavelengths_um", [0.81, 1.62])
    pols = tuple(p.upper() for p in cfg.get("modes", "polarizations", ["TE", "TM"]))
    if not lams or any(p not in ("TE", "TM") for p in pols):
        raise ConfigError("[modes] needs wavelengths and polarizations from TE, TM")
    mesh = make_mesh(g, max(lams), grid_nm(cfg))
    modes, fundamentals = [], {}
    for lam in lams:
        for i, m in enumerate(solve_modes(g, lam, cfg.get("solver", "n_modes", 2), grid_nm(cfg),
                                          pols, mesh)):
            modes.append({"wavelength_um": lam, "rank": i, "polarization": m.polarization,
                          "n_eff": m.n_eff, "te_fraction": m.te_fraction, "guided": m.guided,
                          "a_eff_um2": m.a_eff, "boundary_ratio": m.boundary_ratio})
        fundamentals[lam] = fundamental_te(g, lam, mesh=mesh)
    summary: dict[str, Any] = {
        "geometry": asdict(g),
        "mesh": {"shape": list(mesh.shape), "dx_um": mesh.dx, "dy_um": mesh.dy,
                 "x_range_um": [float(mesh.x_edges[0]), float(mesh.x_edges[-1])],
                 "y_range_um": [float(mesh.y_edges[0]), float(mesh.y_edges[-1])]},
        "modes": modes,
        "fundamental_te": {f"{lam:g}": {"n_eff": m.n_eff, "a_eff_um2": m.a_eff,
                                        "guided": m.guided} for lam, m in fundamentals.items()},
    }
    ls = sorted(fundamentals)
    if len(ls) >= 2:
        summary["overlap"] = mode_overlap(fundamentals[ls[0]], fundamentals[ls[-1]])
    lk = leakage_margin(g, ls[0], ridge=fundamentals[ls[0]])
    summary["leakage"] = asdict(lk)
    summary["leakage"]["wavelength_um"] = ls[0]
    if cfg.get("modes", "write_fields", True):
        X, Y = np.meshgrid(mesh.x, mesh.y, indexing="ij")
        for lam, m in fundamentals.items():
            name = f"field_TE0_{lam * 1e3:.0f}nm"
            stage.write_matrix(name + ".csv", np.column_stack([X.ravel(), Y.ravel(),
                                                               m.field.ravel()]), "%.6e")
            stage.write_json(name + ".json", {
                "columns": ["x_um", "y_um", "field"], "order": "x-major",
                "shape": list(mesh.shape), "wavelength_um": lam, "polarization": "TE",
                "n_eff": m.n_eff, "normalisation": "sum(field^2) dx dy = 1 (um^2)"})
    stage.write_json("modes.json", summary)
    return {"n_eff_te": {k: v["n_eff"] for k, v in summary["fundamental_te"].items()},
            "a_eff_um2": {k: v["a_eff_um2"] for k, v in summary["fundamental_te"].items()},
            "overlap": summary.get("overlap"), "leakage_margin": lk.margin}


def _curve_rows(curve, gvd_fn):
    rows = []
    lo, hi = curve.wavelengths[2], curve.wavelengths[-3]
    for lam, n in zip(curve.wavelengths, curve.n_eff):
        k2 = gvd_fn(curve, lam) if lo <= lam <= hi else float("nan")
        rows.append([curve.label, float(lam), float(n), float(curve.group_index(lam)), k2])
    return rows


def run_qpm(ctx: Context, stage: Stage) -> dict:
    from .dispersion import gvd
    from .qpm import idler_wavelength, phase_matching_band, phase_mismatch, qpm_efficiency_factor

    cv = curves(ctx)
    design, signal_nm = qpm_design(ctx)
    band = phase_matching_band(design, cv)
    dk, norm = phase_mismatch(design, cv, signal_nm)
    out = {
        "period_um": design.period_um, "order": design.order, "length_mm": design.length_mm,
        "duty": design.duty, "qpm_weight": qpm_efficiency_factor(design.duty, design.order),
        "pump_nm": design.pump_nm, "signal_nm": signal_nm,
        "idler_nm": idler_wavelength(design.pump_nm, signal_nm),
        "n_eff_pump": float(cv.pump.n_at(design.pump_nm / 1e3)),
        "n_eff_signal": float(cv.signal.n_at(signal_nm / 1e3)),
        "delta_k_per_m": dk, "delta_k_L_over_2pi": norm,
        "bandwidth_thz": band.bandwidth_thz,
        "null_wavelengths_nm": list(band.null_wavelengths_nm),
        "null_frequencies_thz": list(band.null_frequencies_thz),
    }
    rows = _curve_rows(cv.pump, gvd) + _curve_rows(cv.signal, gvd)
    stage.write_csv("dispersion.csv", ["curve", "wavelength_um", "n_eff", "group_index",
                                       "gvd_fs2_per_mm"], rows)
    lams = ctx.cfg.get("dispersion", "gvd_wavelengths_um", [])
    if lams:
        k2 = [gvd(cv.signal, lam) for lam in lams]
        stage.write_csv("gvd_vs_wavelength.csv", ["wavelength_um", "gvd_fs2_per_mm"],
                        zip(lams, k2))
        out["gvd_fs2_per_mm"] = dict(zip([f"{v:g}" for v in lams], k2))
        out["max_abs_gvd_fs2_per_mm"] = float(np.max(np.abs(k2)))
    stage.write_json("qpm.json", out)
    return {k: out[k] for k in ("period_um", "bandwidth_thz", "null_wavelengths_nm")} | (
        {"max_abs_gvd_fs2_per_mm": out["max_abs_gvd_fs2_per_mm"]} if lams else {})


def run_sweep(ctx: Context, stage: Stage, depths_override=None) -> dict:
    from .dispersion import gvd_map

    cfg = ctx.cfg
    s = cfg.sections["sweep"]
    widths = s.get("widths_nm")
    depths = depths_override if depths_override is not None else s.get("etch_depths_nm")
    if not widths or not depths:
        raise ConfigError("[sweep] needs widths_nm and etch_depths_nm")
    t = time.perf_counter()
    gm = gvd_map(geometry(cfg), widths, depths, s.get("wavelength_um", 1.62), grid_nm(cfg),
                 s.get("step_nm", 10.0), s.get("n_samples", 7), workers=ctx.threads)
    elapsed = time.perf_counter() - t
    rows = [[h, w, gm.k2[i, j]] for i, h in enumerate(gm.etch_depths_nm)
            for j, w in enumerate(gm.widths_nm)]
    stage.write_csv("gvd_map.csv", ["etch_depth_nm", "top_width_nm", "gvd_fs2_per_mm"], rows)
    crossings = {f"{h:g}": gm.row_crossings(h).tolist() for h in gm.etch_depths_nm}
    out = {"wavelength_um": gm.wavelength_um, "widths_nm": gm.widths_nm,
           "etch_depths_nm": gm.etch_depths_nm, "gvd_fs2_per_mm": gm.k2,
           "zero_contour": gm.contour, "row_crossings_nm": crossings,
           "failed_cells": int(np.isnan(gm.k2).sum())}
    stage.write_json("gvd_map.json", out)
    log.info("GVD sweep of %d cells took %.1f s", gm.k2.size, elapsed)
    return {"row_crossings_nm": crossings, "failed_cells": out["failed_cells"]}


def run_jsi(ctx: Context, stage: Stage) -> dict:
    from .spectra import PumpEnvelope, jsi, marginal_signal_spectrum, spdc_total_bandwidth

    j = ctx.cfg.sections["jsi"]
    pump = PumpEnvelope(j.get("pump_center_nm", 810.6), j.get("pump_fwhm_nm", 1.1),
                        j.get("pump_shape", "gaussian"))
    # the device is phase matched at degeneracy for the pump actually used
    design, _ = qpm_design(ctx, pump_nm=pump.center_nm, period_um=j.get("period_um"))
    grid = jsi(design, curves(ctx), pump, j.get("half_span_thz", 25.0), j.get("n_points", 401))
    marg = marginal_signal_spectrum(grid)
    stage.write_matrix("jsi.csv", grid.intensity)
    stage.write_csv("jsi_axes.csv", ["index", "signal_thz", "idler_thz"],
                    zip(range(len(grid.omega_s)), grid.signal_thz, grid.idler_thz))
    stage.write_csv("marginal.csv", ["frequency_thz", "wavelength_nm", "intensity"],
                    zip(marg.frequency_thz, marg.wavelength_nm, marg.intensity))
    out = {"period_um": design.period_um, "pump": asdict(pump),
           "antidiagonal_bandwidth_thz": grid.bandwidth_thz(),
           "ridge_thickness_thz": grid.thickness_thz(),
           "marginal_half_bandwidth_thz": marg.half_bandwidth_thz,
           "marginal_half_bandwidth_nm": marg.half_bandwidth_nm,
           "marginal_full_bandwidth_thz": marg.full_bandwidth_thz,
           "total_bandwidth_from_half_thz": spdc_total_bandwidth(marg.half_bandwidth_thz),
           "peak": float(grid.intensity.max()),
           "grid_points": len(grid.omega_s)}
    stage.write_json("jsi.json", out)
    return {k: out[k] for k in ("antidiagonal_bandwidth_thz", "marginal_half_bandwidth_thz",
                                "total_bandwidth_from_half_thz")}


def shg_input(ctx: Context):
    from .spectra import ShgModelInput, composite_area

    s = dict(ctx.cfg.sections["shg"])
    s.pop("scan_nm", None)
    from_modes = s.pop("from_modes", False)
    s["delta_k"] = s.pop("delta_k_per_m", 0.0)
    if from_modes:
        from .modesolver import fundamental_te, make_mesh, mode_overlap

        g = geometry(ctx.cfg)
        lam2 = s.get("lambda_2omega_nm", 810.0) / 1e3
        mesh = make_mesh(g, 2 * lam2, grid_nm(ctx.cfg))
        m2 = fundamental_te(g, lam2, mesh=mesh)
        m1 = fundamental_te(g, 2 * lam2, mesh=mesh)
        s.update(n_omega=m1.n_eff, n_2omega=m2.n_eff, a_eff_um2=composite_area(m1.a_eff, m2.a_eff),
                 zeta=mode_overlap(m1, m2))
    return ShgModelInput(**s), from_modes


def run_shg(ctx: Context, stage: Stage) -> dict:
    from dataclasses import replace

    from .spectra import shg_efficiency, shg_mismatch, shg_prefactor

    inp, from_modes = shg_input(ctx)
    eta = shg_efficiency(inp)
    peak = shg_efficiency(replace(inp, delta_k=0.0))
    null = shg_efficiency(replace(inp, delta_k=2 * math.pi / (inp.length_cm * 1e-2)))
    out = {"inputs": asdict(inp), "inputs_from_modes": from_modes, "eta_pct_per_W_cm2": eta,
           "eta_phase_matched_pct_per_W_cm2": peak,
           "prefactor_per_W_m2": shg_prefactor(inp), "eta_at_first_null_ratio": null / peak}
    scan = ctx.cfg.get("shg", "scan_nm")
    if scan:
        design, _ = qpm_design(ctx)
        lam = np.round(np.arange(scan[0], scan[1] + scan[2] / 2, scan[2]), 6)
        dk = shg_mismatch(design, curves(ctx), lam)
        eta_scan = [shg_efficiency(replace(inp, delta_k=float(d))) for d in dk]
        stage.write_csv("shg_scan.csv", ["fundamental_nm", "delta_k_per_m", "eta_pct_per_W_cm2"],
                        zip(lam, dk, eta_scan))
        i = int(np.argmax(eta_scan))
        out["scan_peak_nm"] = float(lam[i])
        out["scan_period_um"] = design.period_um
    stage.write_json("shg.json", out)
    return {"eta_pct_per_W_cm2": eta}


def _analysis_kwargs(ctx: Context, args) -> dict:
    a = dict(ctx.cfg.sections["analysis"])
    for key in ("window_ps", "bin_ps", "span_ps", "floor_min_ps", "splitter_factor",
                "g2_factor", "n_resample"):
        v = getattr(args, key, None)
        if v is not None:
            a[key] = v
    a["seed"] = ctx.seed if ctx.seed is not None else 0
    a["threads"] = ctx.threads
    return a


def run_tags_simulate(ctx: Context, stage: Stage, dest: Path | None = None,
                      name: str = "tags.ttag") -> dict:
    from .tags import simulate_tags, write_tags

    sc = source_config(ctx.cfg, ctx.seed)
    stream = simulate_tags(sc)
    write_tags(stage.path(name, dest), stream)
    meta = {"source": asdict(sc), "records": len(stream), "n_channels": stream.n_channels,
            "duration_ps": stream.duration_ps, "counts_per_channel": stream.counts()}
    stage.write_json(name + ".json", meta)
    ctx.memo["stream"] = stream
    return {"records": len(stream), "duration_ps": stream.duration_ps}


def run_tags_analyze(ctx: Context, stage: Stage, stream, report_name="report.json",
                     dest: Path | None = None, args=None) -> dict:
    from .coincidence import analyze

    kw = _analysis_kwargs(ctx, args)
    if args is not None and getattr(args, "duration_s", None) is not None:
        kw["duration_s"] = args.duration_s
    rep = analyze(stream, **kw)
    stage.write_text(report_name, dumps(rep.to_dict()), dest)
    out = {"pcr_hz": rep.pcr, "car": rep.car.car, "car_sigma": rep.car.sigma}
    if rep.g2 is not None:
        out.update(g2=rep.g2.g2, g2_sigma=rep.g2.sigma)
    return out


def run_reproduce(ctx: Context, stage: Stage) -> dict:
    summary = {"modes": run_modes(ctx, stage), "qpm": run_qpm(ctx, stage)}
    depths = ctx.cfg.get("reproduce", "sweep_etch_depths_nm")
    summary["sweep"] = run_sweep(ctx, stage, depths)
    summary["jsi"] = run_jsi(ctx, stage)
    summary["shg"] = run_shg(ctx, stage)
    if ctx.cfg.sections["source"]:
        summary["tags"] = run_tags_simulate(ctx, stage)
        summary["analysis"] = run_tags_analyze(ctx, stage, ctx.memo["stream"], "tags_report.json")
    stage.write_json("summary.json", summary)
    return summary


# ---------------------------------------------------------------- driver

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config file (default: bundled reference config)")
    p.add_argument("--out-dir", default=".", help="output directory (default: .)")
    p.add_argument("--threads", type=int, default=1, help="worker processes/threads")
    p.add_argument("--seed", type=int, help="override the random seed")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lnspdc",
                                 description="Thin-film LN photon-pair source design and analysis")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("modes", "solve waveguide eigenmodes"),
                           ("sweep-gvd", "GVD map over width and etch depth"),
                           ("qpm", "poling period and phase-matching bandwidth"),
                           ("jsi", "joint spectral intensity and marginal spectrum"),
                           ("shg", "normalised SHG efficiency"),
                           ("reproduce-paper", "run the full reference pipeline")):
        _common(sub.add_parser(name, help=helptext))
    tags = sub.add_parser("tags", help="time-tag simulation and analysis")
    tsub = tags.add_subparsers(dest="tags_command", required=True)
    sim = tsub.add_parser("simulate", help="write a synthetic tag file")
    _common(sim)
    sim.add_argument("--out", help="tag file path (default: <out-dir>/tags.ttag)")
    an = tsub.add_parser("analyze", help="coincidence report for a tag file")
    _common(an)
    an.add_argument("path", help="tag file")
    an.add_argument("--report", help="report path (default: <out-dir>/report.json)")
    an.add_argument("--window-ps", dest="window_ps", type=int)
    an.add_argument("--bin-ps", dest="bin_ps", type=int)
    an.add_argument("--span-ps", dest="span_ps", type=int)
    an.add_argument("--floor-ps", dest="floor_min_ps", type=int)
    an.add_argument("--splitter-factor", dest="splitter_factor", type=int, choices=(1, 2))
    an.add_argument("--g2-factor", dest="g2_factor", type=int, choices=(1, 2))
    an.add_argument("--resamples", dest="n_resample", type=int)
    an.add_argument("--duration-s", dest="duration_s", type=float,
                    help="acquisition time (default: last timestamp + 1 ps)")
    return ap


def _dispatch(args, ctx: Context, stage: Stage) -> dict:
    cmd = args.command
    if cmd == "modes":
        return run_modes(ctx, stage)
    if cmd == "sweep-gvd":
        return run_sweep(ctx, stage)
    if cmd == "qpm":
        return run_qpm(ctx, stage)
    if cmd == "jsi":
        return run_jsi(ctx, stage)
    if cmd == "shg":
        return run_shg(ctx, stage)
    if cmd == "reproduce-paper":
        return run_reproduce(ctx, stage)
    if args.tags_command == "simulate":
        dest = Path(args.out).resolve() if args.out else None
        return run_tags_simulate(ctx, stage, dest, Path(args.out).name if args.out else "tags.ttag")
    from .tags import read_tags

    stream = read_tags(args.path)
    dest = Path(args.report).resolve() if args.report else None
    name = Path(args.report).name if args.report else "report.json"
    return run_tags_analyze(ctx, stage, stream, name, dest, args)


def manifest_name(args) -> str:
    """``manifest_<command>.json`` so commands sharing an output directory keep their own."""
    cmd = args.command if args.command != "tags" else f"tags-{args.tags_command}"
    return f"manifest_{cmd}.json"


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads < 1:
        print("lnspdc: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    started = _utc()
    stage = None
    try:
        cfg = load_config(args.config)
        if cfg.sections["materials"].get("file"):
            os.environ["LNSPDC_MATERIALS"] = cfg.sections["materials"]["file"]
        ctx = Context(cfg, args.threads, args.seed)
        out_dir = Path(args.out_dir).resolve()
        stage = Stage(out_dir)
        summary = _dispatch(args, ctx, stage)
        outputs = stage.commit()
        stage = None
        manifest = {
            "tool": "lnspdc", "version": __version__, "command": ["lnspdc"] + argv,
            "config": cfg.path, "config_hash": cfg.hash, "seed": args.seed,
            "threads": args.threads, "started_utc": started, "finished_utc": _utc(),
            "outputs": [{"path": os.path.relpath(p, out_dir), "sha256": h, "bytes": n}
                        for p, h, n in outputs],
            "summary": summary,
        }
        name = manifest_name(args)
        tmp = out_dir / f".{name}.tmp"
        tmp.write_text(dumps(manifest), encoding="utf-8")
        os.replace(tmp, out_dir / name)
        print(dumps(summary), end="")
        return EXIT_OK
    except (ConfigError, StreamError) as exc:
        print(f"lnspdc: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"lnspdc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (LnspdcError, OSError) as exc:
        print(f"lnspdc: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.debug("unexpected failure", exc_info=True)
        print(f"lnspdc: unexpected {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    finally:
        if stage is not None:
            stage.discard()


if __name__ == "__main__":
    sys.exit(main())
