"""Coincidence statistics on time-tag streams.

Estimators: singles and coincidence rates, delay histograms, the
coincidence-to-accidental ratio (CAR), the pair coincidence rate (PCR) and the
heralded second-order autocorrelation g_H(0).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, NumericalError, StreamError
from .tags import TagStream

DEFAULT_WINDOW_PS = 1000
DEFAULT_FLOOR_PS = 10_000
DEFAULT_RESAMPLES = 1000


@dataclass
class Histogram:
    """Counts of ``t_b - t_a`` in bins of width ``bin_ps`` centred on ``delays_ps``."""

    delays_ps: np.ndarray
    counts: np.ndarray
    bin_ps: int
    channels: tuple[int, int]

    @property
    def half_bins(self) -> int:
        return (len(self.counts) - 1) // 2


def _require_sorted(t: np.ndarray, label: str) -> None:
    if t.size > 1 and np.any(t[1:] < t[:-1]):
        raise StreamError(f"{label} timestamps are not sorted")


def histogram_times(ta: np.ndarray, tb: np.ndarray, bin_ps: int, span_ps: int,
                    threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Delay histogram of two sorted timestamp arrays.

    Bins are centred on ``k * bin_ps`` for ``|k| <= span_ps // (2 * bin_ps)``;
    ``span_ps`` must be a positive multiple of ``2 * bin_ps``. With
    ``threads > 1`` the ``ta`` array is cut into time blocks, each paired with
    the ``tb`` tags that can reach it, and the partial histograms are summed.
    """
    bin_ps, span_ps = int(bin_ps), int(span_ps)
    if bin_ps <= 0 or span_ps <= 0 or span_ps % (2 * bin_ps):
        raise ConfigError("span must be a positive multiple of twice the bin width")
    _require_sorted(ta, "first channel")
    _require_sorted(tb, "second channel")
    K = span_ps // (2 * bin_ps)
    delays = np.arange(-K, K + 1, dtype=np.int64) * bin_ps
    H = (2 * K + 1) * bin_ps
    ta = np.ascontiguousarray(ta, dtype=np.int64)
    tb = np.ascontiguousarray(tb, dtype=np.int64)
    if threads <= 1 or ta.size < 100_000:
        return delays, kernels.pair_histogram(ta, tb, bin_ps, K)

    def block(bounds):
        i0, i1 = bounds
        a = ta[i0:i1]
        j0 = np.searchsorted(tb, a[0] - H, side="left")
        j1 = np.searchsorted(tb, a[-1] + H, side="right")
        return kernels.pair_histogram(a, tb[j0:j1], bin_ps, K)

    edges = np.linspace(0, ta.size, threads + 1).astype(int)
    parts = [(edges[i], edges[i + 1]) for i in range(threads) if edges[i + 1] > edges[i]]
    with ThreadPoolExecutor(threads) as pool:
        counts = sum(pool.map(block, parts))
    return delays, counts


def coincidence_histogram(stream: TagStream, ch_a: int, ch_b: int, bin_ps: int, span_ps: int,
                          threads: int = 1) -> Histogram:
    """Exact pairwise ``t_b - t_a`` histogram over ``+-span_ps / 2`` (bins centred on zero)."""
    stream.require_sorted()
    delays, counts = histogram_times(stream.times(ch_a), stream.times(ch_b), bin_ps, span_ps,
                                     threads)
    return Histogram(delays, counts, int(bin_ps), (ch_a, ch_b))


@dataclass
class CarResult:
    car: float  # clipped at 0
    sigma: float
    car_raw: float
    peak_counts: int
    floor_counts: int
    floor_per_window: float  # accidental estimate in the peak window
    peak_bins: int
    floor_bins: int
    window_ps: int  # effective peak window, a whole number of bins
    lower_bound: bool


def peak_half_bins(bin_ps: int, window_ps: int) -> int:
    """Largest ``m`` such that ``2m + 1`` bins fit inside ``window_ps``; at least the centre bin."""
    return max(0, int((window_ps / bin_ps - 1) // 2))


def car(hist: Histogram, window_ps: int = DEFAULT_WINDOW_PS,
        floor_min_ps: int = DEFAULT_FLOOR_PS) -> CarResult:
    """``CAR = peak / floor - 1`` with Poisson error propagation.

    The peak is the sum of the central bins inside ``window_ps``; the floor is
    the mean of bins with ``|delay| > floor_min_ps`` scaled to the same number
    of bins. With no floor counts the floor is replaced by one count and the
    result is flagged as a lower bound.
    """
    m = peak_half_bins(hist.bin_ps, window_ps)
    K = hist.half_bins
    if m > K:
        raise ConfigError("peak window is wider than the histogram")
    k = np.arange(-K, K + 1)
    peak_mask = np.abs(k) <= m
    floor_mask = np.abs(hist.delays_ps) - hist.bin_ps / 2 >= floor_min_ps
    if floor_mask.sum() == 0:
        raise ConfigError("no histogram bins beyond the floor delay; widen the span")
    if floor_min_ps < (m + 0.5) * hist.bin_ps:
        raise ConfigError("floor region overlaps the peak window")
    P = int(hist.counts[peak_mask].sum())
    F = int(hist.counts[floor_mask].sum())
    n_p, n_f = int(peak_mask.sum()), int(floor_mask.sum())
    lower = F == 0
    F_eff = max(F, 1)
    floor_w = F_eff * n_p / n_f
    raw = P / floor_w - 1.0
    rel = math.sqrt((1.0 / P if P else 0.0) + (0.0 if lower else 1.0 / F))
    sigma = (raw + 1.0) * rel
    return CarResult(max(raw, 0.0), sigma, raw, P, F, F * n_p / n_f, n_p, n_f,
                     n_p * hist.bin_ps, lower)


def pcr(c_s: float, c_i: float, c_si: float, splitter_factor: int = 2) -> float:
    """Source pair rate ``C_s C_i / (factor C_si)``."""
    if splitter_factor not in (1, 2):
        raise ConfigError("splitter_factor must be 1 or 2")
    if not c_si > 0:
        raise NumericalError("PCR is undefined without coincidences")
    return c_s * c_i / (splitter_factor * c_si)


def pcr_sigma(value: float, n_s: int, n_i: int, n_si: int) -> float:
    """Poisson error of a PCR built from raw counts, treated as independent."""
    return value * math.sqrt(1.0 / n_s + 1.0 / n_i + 1.0 / n_si)


@dataclass
class PcrFit:
    slope_hz_per_mw: float
    intercept_hz: float
    r2: float


def fit_pcr_slope(power_mw, pcr_hz) -> PcrFit:
    """Least-squares line through PCR against pump power."""
    x = np.asarray(power_mw, dtype=float)
    y = np.asarray(pcr_hz, dtype=float)
    if x.size < 2 or x.shape != y.shape:
        raise ValueError("need at least two (power, PCR) points")
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return PcrFit(float(slope), float(icpt), r2)


def brightness(slope_hz_per_mw: float, fiber_chip_fiber_loss_db: float) -> dict:
    """Pair-rate slope per mW referenced to in-fibre and to on-chip pump power.

    The on-chip pump is the in-fibre pump times the input-facet transmission,
    taken as half the total fibre-chip-fibre loss.
    """
    if fiber_chip_fiber_loss_db < 0:
        raise ValueError("loss must be >= 0 dB")
    t_in = 10.0 ** (-fiber_chip_fiber_loss_db / 20.0)
    return {"in_fiber_hz_per_mw": slope_hz_per_mw, "on_chip_hz_per_mw": slope_hz_per_mw / t_in,
            "input_transmission": t_in}


@dataclass
class G2Result:
    g2: float
    sigma: float
    n_signal: int
    n_si1: int
    n_si2: int
    n_si1i2: int
    window_ps: int
    factor: int


def g2_counts(ts: np.ndarray, t1: np.ndarray, t2: np.ndarray, window_ps: int) -> tuple[int, int, int, int]:
    """Heralded window counts ``(C_s, C_si1, C_si2, C_si1i2)``.

    A signal tag contributes to ``C_si1`` when any channel-1 tag lies within
    ``+-window_ps`` of it; the three-fold needs hits on both idler channels.
    """
    for t, lab in ((ts, "signal"), (t1, "idler 1"), (t2, "idler 2")):
        _require_sorted(t, lab)
    h1 = kernels.window_hits(ts, t1, int(window_ps))
    h2 = kernels.window_hits(ts, t2, int(window_ps))
    return int(ts.size), int(h1.sum()), int(h2.sum()), int(np.count_nonzero(h1 & h2))


def g2_value(n_s, n1, n2, n12, factor: int = 2):
    return n12 * n_s / (factor * n1 * n2)


def heralded_g2(stream: TagStream, window_ps: int = DEFAULT_WINDOW_PS, channels=(0, 1, 2),
                factor: int = 2, n_resample: int = DEFAULT_RESAMPLES,
                seed: int = 0) -> G2Result:
    """``g_H(0) = C_si1i2 C_s / (factor C_si1 C_si2)``.

    ``factor = 2`` puts uncorrelated (Poissonian) streams at 0.5; ``factor = 1``
    is the common convention with an uncorrelated baseline of 1. The
    uncertainty is the standard deviation over ``n_resample`` Poisson redraws
    of the four counts.
    """
    if factor not in (1, 2):
        raise ConfigError("g2 factor must be 1 or 2")
    if stream.n_channels < 3:
        raise StreamError("heralded g2 needs a signal and two idler channels")
    stream.require_sorted()
    s, i1, i2 = channels
    n_s, n1, n2, n12 = g2_counts(stream.times(s), stream.times(i1), stream.times(i2), window_ps)
    if n1 == 0 or n2 == 0:
        raise NumericalError("no two-fold coincidences; g2 is undefined")
    value = g2_value(n_s, n1, n2, n12, factor)
    sigma = float("nan")
    if n_resample > 1:
        rng = np.random.default_rng(seed)
        draws = rng.poisson([n_s, n1, n2, n12], size=(n_resample, 4)).astype(float)
        ok = (draws[:, 1] > 0) & (draws[:, 2] > 0)
        samples = g2_value(draws[ok, 0], draws[ok, 1], draws[ok, 2], draws[ok, 3], factor)
        sigma = float(np.std(samples, ddof=1))
    return G2Result(value, sigma, n_s, n1, n2, n12, int(window_ps), factor)


@dataclass
class CoincidenceReport:
    duration_s: float
    singles_hz: list[float]
    c_s: float
    c_i: float
    c_si: float
    c_si_accidental: float
    pcr: float
    pcr_sigma: float
    splitter_factor: int
    car: CarResult
    window_ps: int
    bin_ps: int
    delays_ps: list[int]
    histogram: list[int]
    g2: G2Result | None = None
    idler_channels: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def analyze(stream: TagStream, window_ps: int = DEFAULT_WINDOW_PS, bin_ps: int | None = None,
            span_ps: int = 200_000, floor_min_ps: int = DEFAULT_FLOOR_PS, splitter_factor: int = 1,
            duration_s: float | None = None, g2_factor: int = 2,
            n_resample: int = DEFAULT_RESAMPLES, seed: int = 0, threads: int = 1) -> CoincidenceReport:
    """Full report for a stream with signal on channel 0 and idlers on channels 1 (and 2).

    With three channels the idler singles and signal-idler coincidences are
    summed over both idler detectors. ``splitter_factor = 2`` is the layout in
    which a single 50:50 splitter sends both photons of each pair to the two
    detectors at random (only half the pairs are split).
    """
    stream.require_sorted()
    bin_ps = int(window_ps if bin_ps is None else bin_ps)
    T = stream.duration_s if duration_s is None else float(duration_s)
    if not T > 0:
        raise ConfigError("duration must be > 0")
    counts = stream.counts()
    idlers = list(range(1, stream.n_channels))
    ts = stream.times(0)
    total = None
    for ch in idlers:
        delays, c = histogram_times(ts, stream.times(ch), bin_ps, span_ps, threads)
        total = c if total is None else total + c
    hist = Histogram(delays, total, bin_ps, (0, idlers[0]))
    cr = car(hist, window_ps, floor_min_ps)
    n_s = int(counts[0])
    n_i = int(sum(counts[ch] for ch in idlers))
    if cr.peak_counts == 0:
        raise NumericalError("no coincidences in the peak window")
    rate = pcr(n_s / T, n_i / T, cr.peak_counts / T, splitter_factor)
    g2 = None
    if stream.n_channels >= 3:
        g2 = heralded_g2(stream, window_ps, (0, 1, 2), g2_factor, n_resample, seed)
    return CoincidenceReport(
        duration_s=T,
        singles_hz=[float(c) / T for c in counts],
        c_s=n_s / T,
        c_i=n_i / T,
        c_si=cr.peak_counts / T,
        c_si_accidental=cr.floor_per_window / T,
        pcr=rate,
        pcr_sigma=pcr_sigma(rate, n_s, n_i, cr.peak_counts),
        splitter_factor=splitter_factor,
        car=cr,
        window_ps=cr.window_ps,
        bin_ps=bin_ps,
        delays_ps=[int(d) for d in hist.delays_ps],
        histogram=[int(c) for c in hist.counts],
        g2=g2,
        idler_channels=idlers,
    )
