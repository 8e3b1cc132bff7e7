import math

import numpy as np
import pytest

from lnspdc.coincidence import (Histogram, analyze, brightness, car, coincidence_histogram,
                                fit_pcr_slope, g2_counts, g2_value, heralded_g2, histogram_times,
                                pcr, pcr_sigma, peak_half_bins)
from lnspdc.errors import ConfigError, NumericalError, StreamError
from lnspdc.tags import SourceConfig, TagStream, simulate_tags


def brute_delays(ta, tb, bin_ps, span_ps):
    K = span_ps // (2 * bin_ps)
    d = np.subtract.outer(tb, ta).ravel()
    k = np.floor(d / bin_ps + 0.5).astype(np.int64)
    k = k[np.abs(k) <= K]
    return np.bincount(k + K, minlength=2 * K + 1)


def brute_g2(ts, t1, t2, w):
    """Quadratic scan: every signal tag against every idler tag."""
    h1 = np.array([np.any(np.abs(t1 - t) <= w) for t in ts])
    h2 = np.array([np.any(np.abs(t2 - t) <= w) for t in ts])
    return len(ts), int(h1.sum()), int(h2.sum()), int((h1 & h2).sum())


def poisson_stream(rates, T_ps, seed):
    rng = np.random.default_rng(seed)
    ts, cs = [], []
    for ch, r in enumerate(rates):
        n = rng.poisson(r * T_ps * 1e-12)
        ts.append(rng.integers(0, T_ps, n))
        cs.append(np.full(n, ch))
    t = np.concatenate(ts)
    c = np.concatenate(cs)
    o = np.lexsort((c, t))
    return TagStream(c[o], t[o], len(rates), T_ps)


# histograms

def test_histogram_matches_brute_force():
    s = simulate_tags(SourceConfig(2e4, 0.05, 0.7, 0.6, 2e3, 2e3, 300, seed=9))
    h = coincidence_histogram(s, 0, 1, 500, 20_000)
    ref = brute_delays(s.times(0), s.times(1), 500, 20_000)
    assert np.array_equal(h.counts, ref)
    assert h.delays_ps[h.half_bins] == 0
    assert np.array_equal(h.delays_ps, -h.delays_ps[::-1])


def test_lossless_pairs_land_in_zero_bin():
    s = simulate_tags(SourceConfig(1e3, 1.0, seed=1))
    h = coincidence_histogram(s, 0, 1, 100, 20_000)
    n = len(s.times(0))
    assert h.counts[h.half_bins] == n
    assert h.counts.sum() - n <= 2  # rare neighbours within 10 ns at 1 kHz


def test_independent_poisson_bins():
    ra, rb, T, b = 2e5, 3e5, 10**12, 1000
    s = poisson_stream([ra, rb], T, seed=2)
    h = coincidence_histogram(s, 0, 1, b, 400_000)
    mu = ra * rb * (T * 1e-12) * (b * 1e-12)  # 60 per bin
    n = h.counts.size
    assert abs(h.counts.mean() - mu) < 3 * math.sqrt(mu / n)
    # Poisson dispersion: variance equals mean
    assert h.counts.var(ddof=1) / h.counts.mean() == pytest.approx(1.0, abs=4 * math.sqrt(2 / (n - 1)))


def test_translation_invariance():
    s = simulate_tags(SourceConfig(5e4, 0.05, 0.5, 0.5, 1e3, 1e3, 80, seed=3))
    a = coincidence_histogram(s, 0, 1, 200, 40_000)
    b = coincidence_histogram(s.shifted(123_456_789), 0, 1, 200, 40_000)
    assert np.array_equal(a.counts, b.counts)


def test_relabel_mirrors_histogram():
    s = simulate_tags(SourceConfig(5e4, 0.05, 0.5, 0.5, 1e3, 1e3, 80, seed=3))
    # odd bin width: no integer delay sits on a bin edge, so bins mirror exactly
    a = coincidence_histogram(s, 0, 1, 201, 40_200)
    b = coincidence_histogram(s.relabeled({0: 1, 1: 0}), 0, 1, 201, 40_200)
    assert np.array_equal(a.counts, b.counts[::-1])


def test_threaded_blocks_match_single_pass():
    s = simulate_tags(SourceConfig(2e6, 0.1, 0.8, 0.8, 1e4, 1e4, 50, seed=4))
    ta, tb = s.times(0), s.times(1)
    assert ta.size > 100_000
    _, one = histogram_times(ta, tb, 100, 20_000, threads=1)
    _, four = histogram_times(ta, tb, 100, 20_000, threads=4)
    assert np.array_equal(one, four)


def test_unsorted_stream_raises():
    s = TagStream(np.array([0, 1, 0]), np.array([10, 5, 20]), 2)
    with pytest.raises(StreamError):
        coincidence_histogram(s, 0, 1, 10, 100)
    with pytest.raises(StreamError):
        histogram_times(np.array([3, 1]), np.array([1, 2]), 1, 10)


def test_span_must_hold_whole_bins():
    with pytest.raises(ConfigError):
        histogram_times(np.array([1]), np.array([1]), 3, 10)


# CAR

def flat(k_half=50, bin_ps=1000, value=7):
    k = np.arange(-k_half, k_half + 1)
    return Histogram(k * bin_ps, np.full(k.size, value, np.int64), bin_ps, (0, 1))


def test_flat_histogram_has_zero_car():
    r = car(flat(), 1000, 10_000)
    assert r.car == 0.0 and r.car_raw == pytest.approx(0.0, abs=1e-12)
    assert not r.lower_bound


def test_car_negative_raw_is_clipped():
    h = flat()
    h.counts[h.half_bins] = 0
    r = car(h, 1000, 10_000)
    assert r.car == 0.0 and r.car_raw == -1.0


def test_car_lower_bound_without_floor():
    h = flat(value=0)
    h.counts[h.half_bins] = 500
    r = car(h, 1000, 10_000)
    assert r.lower_bound and math.isfinite(r.car)
    n_f = r.floor_bins
    assert r.car == pytest.approx(500 * n_f - 1)


def test_car_peak_window_widths():
    assert peak_half_bins(1000, 1000) == 0
    assert peak_half_bins(100, 1000) == 4  # 9 bins = 900 ps inside 1 ns
    assert peak_half_bins(100, 1100) == 5
    with pytest.raises(ConfigError):
        car(flat(bin_ps=100), 1000, 300)  # floor overlaps the peak
    with pytest.raises(ConfigError):
        car(flat(), 1000, 10**6)  # no floor bins


def test_car_arithmetic():
    h = flat(value=4)
    h.counts[h.half_bins - 1: h.half_bins + 2] = [40, 100, 40]
    r = car(h, 3000, 10_000)
    assert r.peak_counts == 180 and r.peak_bins == 3
    assert r.floor_per_window == pytest.approx(12.0)
    assert r.car == pytest.approx(14.0)
    assert r.sigma == pytest.approx(15 * math.sqrt(1 / 180 + 1 / r.floor_counts))


def test_darks_only_car_near_zero():
    s = simulate_tags(SourceConfig(0.0, 10.0, dark_s=2e4, dark_i=2e4, seed=5))
    rep = analyze(s, window_ps=1000, span_ps=200_000)
    assert abs(rep.car.car_raw) < 3 * rep.car.sigma + 1e-12


def test_car_matches_accidental_closed_form():
    R, es, ei, ds, di, T = 1e6, 0.02, 0.03, 50.0, 80.0, 5.0
    s = simulate_tags(SourceConfig(R, T, es, ei, ds, di, 0.0, seed=6))
    rep = analyze(s, window_ps=1000, span_ps=1_000_000)
    cs, ci, tau = es * R + ds, ei * R + di, 1e-9
    want = es * ei * R / (cs * ci * tau)
    assert 500 < want < 2000
    assert abs(rep.car.car - want) < 3 * rep.car.sigma


# PCR

def test_pcr_arithmetic():
    # 1e6 * 1e6 / (2 * 1e5)
    assert pcr(1e6, 1e6, 1e5, 2) == pytest.approx(5e6)
    assert pcr(1e6, 1e6, 1e5, 1) == pytest.approx(1e7)
    with pytest.raises(NumericalError):
        pcr(1.0, 1.0, 0.0)
    with pytest.raises(ConfigError):
        pcr(1.0, 1.0, 1.0, 3)
    assert pcr_sigma(100.0, 100, 100, 100) == pytest.approx(100 * math.sqrt(0.03))


def test_lossless_pcr_equals_coincidence_rate():
    s = simulate_tags(SourceConfig(1e4, 5.0, seed=7))
    rep = analyze(s, window_ps=1000, span_ps=200_000, splitter_factor=1)
    n = len(s.times(0))
    assert rep.c_si == pytest.approx(n / 5.0, rel=1e-12)
    assert rep.pcr == pytest.approx(rep.c_si, rel=1e-12)
    assert rep.pcr == pytest.approx(1e4, rel=3 / math.sqrt(5e4))


def test_pcr_exceeds_coincidence_rate():
    s = simulate_tags(SourceConfig(1e5, 1.0, 0.1, 0.2, 100, 100, 50, seed=8))
    rep = analyze(s)
    assert rep.pcr >= rep.c_si


def test_dark_counts_bias_pcr_upward():
    """E[PCR] = R (1 + d_s / eta_s R)(1 + d_i / eta_i R) when accidentals are negligible."""
    R, es, ei, d, T = 2e4, 0.1, 0.1, 2e3, 20.0
    s = simulate_tags(SourceConfig(R, T, es, ei, d, d, 0.0, seed=10))
    rep = analyze(s, span_ps=20_000, floor_min_ps=5000)
    want = R * (1 + d / (es * R)) ** 2
    assert abs(rep.pcr - want) < 3 * rep.pcr_sigma
    assert abs(rep.pcr - R) > 3 * rep.pcr_sigma


def test_pair_splitter_factor_two():
    """Both photons on one 50:50 splitter: half the pairs split, so factor 2 recovers R."""
    R, T = 5e4, 10.0
    s = simulate_tags(SourceConfig(R, T, 0.3, 0.3, 0, 0, 0, splitter="pair", seed=11))
    rep = analyze(s, splitter_factor=2)
    assert abs(rep.pcr - R) < 3 * rep.pcr_sigma


def test_relabel_leaves_pcr_and_car():
    s = simulate_tags(SourceConfig(1e5, 2.0, 0.1, 0.3, 200, 400, 60, seed=12))
    a = analyze(s)
    b = analyze(s.relabeled({0: 1, 1: 0}))
    assert a.pcr == pytest.approx(b.pcr, rel=1e-12)
    assert a.car.car == pytest.approx(b.car.car, rel=1e-12)


def test_pcr_linear_in_pair_rate():
    powers = np.array([1.0, 2.0, 4.0, 8.0])
    rates = []
    for p in powers:
        s = simulate_tags(SourceConfig(2e4 * p, 5.0, 0.1, 0.1, 5, 5, 50, seed=int(p)))
        rates.append(analyze(s).pcr)
    fit = fit_pcr_slope(powers, rates)
    assert fit.r2 > 0.999
    assert fit.slope_hz_per_mw == pytest.approx(2e4, rel=0.03)


def test_fit_and_brightness_arithmetic():
    fit = fit_pcr_slope([0, 1, 2], [1.0, 3.0, 5.0])
    assert fit.slope_hz_per_mw == pytest.approx(2.0) and fit.intercept_hz == pytest.approx(1.0)
    assert fit.r2 == pytest.approx(1.0)
    b = brightness(10.0, 20.0)
    assert b["input_transmission"] == pytest.approx(0.1)
    assert b["on_chip_hz_per_mw"] == pytest.approx(100.0)
    assert brightness(10.0, 0.0)["on_chip_hz_per_mw"] == 10.0
    with pytest.raises(ValueError):
        fit_pcr_slope([1.0], [1.0])


# heralded g2

def test_g2_counts_match_quadratic_scan():
    s = simulate_tags(SourceConfig(1e6, 0.005, 0.6, 0.8, 2e4, 2e4, 200, splitter="idler", seed=13))
    assert 5000 < len(s) < 20000
    ts, t1, t2 = (s.times(c) for c in (0, 1, 2))
    for w in (0, 300, 1000, 5000):
        assert g2_counts(ts, t1, t2, w) == brute_g2(ts, t1, t2, w)


def test_single_pair_source_has_no_multiphotons():
    cfg = SourceConfig(1e5, 2.0, 0.5, 0.5, 0, 0, 50, splitter="idler", emission="single",
                       isolation_ps=100_000, seed=14)
    g = heralded_g2(simulate_tags(cfg), 1000)
    assert g.n_si1i2 == 0 and g.g2 == 0.0
    assert g.g2 < 0.01


def test_independent_poisson_streams_give_half():
    s = poisson_stream([2e5, 1e7, 1e7], 10**12, seed=15)
    g = heralded_g2(s, 1000, factor=2, n_resample=400)
    assert abs(g.g2 - 0.5) < 3 * g.sigma
    g1 = heralded_g2(s, 1000, factor=1, n_resample=0)
    assert g1.g2 == pytest.approx(2 * g.g2)


def test_g2_rises_with_pair_rate():
    vals = []
    for R in (2e6, 8e6, 3.2e7):
        s = simulate_tags(SourceConfig(R, 0.05, 0.5, 0.5, 0, 0, 50, splitter="idler", seed=16))
        vals.append(heralded_g2(s, 1000, n_resample=0).g2)
    assert vals[0] < vals[1] < vals[2]


def test_g2_requires_two_folds_and_channels():
    s = TagStream(np.array([0, 1]), np.array([5, 6]), 3)
    with pytest.raises(NumericalError):
        heralded_g2(s)
    with pytest.raises(StreamError):
        heralded_g2(TagStream(np.array([0, 1]), np.array([5, 6]), 2))
    with pytest.raises(ConfigError):
        heralded_g2(s, factor=3)


def test_g2_value_formula():
    assert g2_value(1000, 100, 50, 2, factor=2) == pytest.approx(2 * 1000 / (2 * 100 * 50))


def test_g2_resampling_deterministic():
    s = simulate_tags(SourceConfig(1e7, 0.02, 0.5, 0.5, 0, 0, 50, splitter="idler", seed=17))
    a = heralded_g2(s, seed=3)
    b = heralded_g2(s, seed=3)
    assert a == b and a.sigma > 0


# report

def test_report_fields_and_sums():
    s = simulate_tags(SourceConfig(1e5, 1.0, 0.2, 0.2, 100, 100, 50, splitter="idler", seed=18))
    rep = analyze(s)
    d = rep.to_dict()
    assert rep.idler_channels == [1, 2]
    n = s.counts()
    assert rep.c_i == pytest.approx((n[1] + n[2]) / 1.0)
    assert sum(d["histogram"]) > 0 and d["g2"] is not None
    assert rep.car.car >= 0


def test_analyze_without_coincidences_raises():
    s = TagStream(np.array([0, 1]), np.array([0, 10**9]), 2, 2 * 10**9)
    with pytest.raises(NumericalError):
        analyze(s)
