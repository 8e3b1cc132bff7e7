"""Time-tag streams: container, binary file format and a synthetic pair source.

Channels: 0 is the signal detector, 1 and 2 are the idler detectors behind an
optional 50:50 splitter. Timestamps are integer picoseconds since stream start.

Tag file layout (little-endian)::

    header  16 B   magic b"TTAG", u16 version (1), u16 channel count, u64 record count
    record  16 B   u16 channel, u16 reserved (0), u32 reserved (0), u64 timestamp [ps]
"""
from __future__ import annotations

import math
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, StreamError

MAGIC = b"TTAG"
VERSION = 1
HEADER = struct.Struct("<4sHHQ")
RECORD_DTYPE = np.dtype([("channel", "<u2"), ("reserved0", "<u2"), ("reserved1", "<u4"),
                         ("timestamp", "<u8")])
assert HEADER.size == 16 and RECORD_DTYPE.itemsize == 16

PS = 1e-12
SPLITTERS = ("none", "idler", "pair")
EMISSIONS = ("poisson", "single")


@dataclass(frozen=True, eq=False)
class TagStream:
    """Immutable, time-ordered detection record.

    Parameters
    ----------
    channels : array of uint16
    timestamps : array of int64, picoseconds, non-decreasing
    n_channels : int
        Size of the declared channel set ``0 .. n_channels-1``.
    duration_ps : int, optional
        Acquisition length. When unknown, rates use ``timestamps[-1] + 1``.
    """

    channels: np.ndarray
    timestamps: np.ndarray
    n_channels: int
    duration_ps: int | None = None

    def __post_init__(self):
        ch = np.ascontiguousarray(self.channels, dtype=np.uint16)
        ts = np.ascontiguousarray(self.timestamps, dtype=np.int64)
        if ch.shape != ts.shape or ch.ndim != 1:
            raise StreamError("channels and timestamps must be 1-D arrays of equal length")
        if not 1 <= self.n_channels <= 0xFFFF:
            raise StreamError(f"invalid channel count {self.n_channels}")
        if ch.size and int(ch.max()) >= self.n_channels:
            raise StreamError(f"channel {int(ch.max())} outside declared set of {self.n_channels}")
        if ts.size and int(ts[0]) < 0:
            raise StreamError("negative timestamp")
        ch.flags.writeable = False
        ts.flags.writeable = False
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "timestamps", ts)

    def __len__(self) -> int:
        return int(self.timestamps.size)

    @property
    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.timestamps) >= 0))

    def require_sorted(self) -> None:
        if not self.is_sorted:
            raise StreamError("timestamps are not non-decreasing")

    @property
    def duration_s(self) -> float:
        if self.duration_ps is not None:
            return self.duration_ps * PS
        if not len(self):
            raise StreamError("empty stream has no duration")
        return (int(self.timestamps[-1]) + 1) * PS

    def times(self, channel: int) -> np.ndarray:
        """Timestamps of one channel (a read-only view if already contiguous)."""
        return self.timestamps[self.channels == channel]

    def counts(self) -> np.ndarray:
        return np.bincount(self.channels, minlength=self.n_channels)

    def shifted(self, offset_ps: int) -> "TagStream":
        d = None if self.duration_ps is None else self.duration_ps + int(offset_ps)
        return TagStream(self.channels, self.timestamps + int(offset_ps), self.n_channels, d)

    def relabeled(self, mapping: dict[int, int]) -> "TagStream":
        """Swap channel labels; the time order of coincident tags is re-sorted by channel."""
        lut = np.arange(self.n_channels, dtype=np.uint16)
        for a, b in mapping.items():
            lut[a] = b
        ch = lut[self.channels]
        order = np.lexsort((ch, self.timestamps))
        return TagStream(ch[order], self.timestamps[order], self.n_channels, self.duration_ps)

    def equals(self, other: "TagStream") -> bool:
        return (self.n_channels == other.n_channels
                and np.array_equal(self.channels, other.channels)
                and np.array_equal(self.timestamps, other.timestamps))


def write_tags(path: str | Path, stream: TagStream) -> None:
    """Write ``stream`` atomically (temporary file in the same directory, then rename)."""
    path = Path(path)
    rec = np.zeros(len(stream), dtype=RECORD_DTYPE)
    rec["channel"] = stream.channels
    rec["timestamp"] = stream.timestamps.astype(np.uint64)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        with os.fdopen(fd, "wb") as fh:
            fh.write(HEADER.pack(MAGIC, VERSION, stream.n_channels, len(stream)))
            fh.write(rec.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_tags(path: str | Path, duration_ps: int | None = None) -> TagStream:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) != HEADER.size:
            raise StreamError(f"{path}: truncated header")
        magic, version, n_ch, n_rec = HEADER.unpack(head)
        if magic != MAGIC:
            raise StreamError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise StreamError(f"{path}: unsupported version {version}")
        body = fh.read()
    if len(body) != n_rec * RECORD_DTYPE.itemsize:
        raise StreamError(f"{path}: header declares {n_rec} records, file holds "
                          f"{len(body) / RECORD_DTYPE.itemsize:g}")
    rec = np.frombuffer(body, dtype=RECORD_DTYPE)
    if np.any(rec["reserved0"]) or np.any(rec["reserved1"]):
        raise StreamError(f"{path}: non-zero reserved fields")
    ts = rec["timestamp"]
    if ts.size and int(ts.max()) > np.iinfo(np.int64).max:
        raise StreamError(f"{path}: timestamp overflows int64")
    return TagStream(rec["channel"], ts.astype(np.int64), n_ch, duration_ps)


@dataclass(frozen=True)
class SourceConfig:
    """Synthetic photon-pair source and detection chain.

    Rates in 1/s, times in s except ``jitter_sigma_ps`` and ``isolation_ps``.
    ``dark_i`` applies to each idler detector.

    ``splitter``: ``"none"`` (idler on channel 1), ``"idler"`` (idler split by a
    fair coin onto channels 1 and 2) or ``"pair"`` (both photons share one
    fibre and a 50:50 splitter routes each onto channel 0 or 1).

    ``emission``: ``"poisson"`` pair times, or ``"single"``: exponential gaps
    shifted by ``isolation_ps`` so that no two pairs fall closer than that.
    """

    pair_rate: float
    duration: float
    eta_s: float = 1.0
    eta_i: float = 1.0
    dark_s: float = 0.0
    dark_i: float = 0.0
    jitter_sigma_ps: float = 0.0
    splitter: str = "none"
    emission: str = "poisson"
    isolation_ps: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("pair_rate", "dark_s", "dark_i", "jitter_sigma_ps", "isolation_ps"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be finite and >= 0, got {v}")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ConfigError("duration must be > 0")
        for name in ("eta_s", "eta_i"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ConfigError(f"{name} must lie in (0, 1], got {v}")
        if self.splitter not in SPLITTERS:
            raise ConfigError(f"splitter must be one of {SPLITTERS}")
        if self.emission not in EMISSIONS:
            raise ConfigError(f"emission must be one of {EMISSIONS}")
        if self.emission == "single" and self.pair_rate * self.isolation_ps * PS >= 1:
            raise ConfigError("pair_rate * isolation must be < 1 for isolated emission")
        if self.duration / PS > 2.0**62:
            raise ConfigError("duration overflows the picosecond timestamp range")

    @property
    def n_channels(self) -> int:
        return 3 if self.splitter == "idler" else 2

    @property
    def duration_ps(self) -> int:
        return int(round(self.duration / PS))


def _emission_times(cfg: SourceConfig, rng: np.random.Generator, T: float) -> np.ndarray:
    if cfg.pair_rate == 0:
        return np.empty(0)
    if cfg.emission == "poisson":
        n = rng.poisson(cfg.pair_rate * T * PS)
        return np.sort(rng.uniform(0.0, T, n))
    mean_gap = 1.0 / (cfg.pair_rate * PS)
    free = mean_gap - cfg.isolation_ps
    n_draw = int(T / mean_gap * 1.1 + 10 * math.sqrt(T / mean_gap) + 10)
    t = rng.uniform(0.0, mean_gap) + np.cumsum(cfg.isolation_ps + rng.exponential(free, n_draw))
    while t[-1] < T:  # rare top-up
        more = t[-1] + np.cumsum(cfg.isolation_ps + rng.exponential(free, n_draw))
        t = np.concatenate([t, more])
    return t[t < T]


def simulate_tags(cfg: SourceConfig) -> TagStream:
    """Draw a detection record for ``cfg``; fully determined by ``cfg.seed``.

    Each photon of a pair survives independently with its arm efficiency and
    receives independent Gaussian timing jitter. Dark counts are independent
    Poisson processes on every detector. Events falling outside ``[0, T)``
    after jitter are dropped; several photons on one detector at the same
    picosecond are kept as separate tags.
    """
    rng = np.random.default_rng(cfg.seed)
    T = float(cfg.duration_ps)
    t0 = _emission_times(cfg, rng, T)
    n = t0.size
    # fixed draw order keeps streams reproducible across configurations
    keep_s = rng.random(n) < cfg.eta_s
    keep_i = rng.random(n) < cfg.eta_i
    jit_s = rng.normal(0.0, cfg.jitter_sigma_ps, n) if cfg.jitter_sigma_ps > 0 else np.zeros(n)
    jit_i = rng.normal(0.0, cfg.jitter_sigma_ps, n) if cfg.jitter_sigma_ps > 0 else np.zeros(n)
    coin_s = rng.random(n) < 0.5
    coin_i = rng.random(n) < 0.5

    ch_s = np.zeros(n, dtype=np.uint16)
    ch_i = np.ones(n, dtype=np.uint16)
    if cfg.splitter == "idler":
        ch_i = np.where(coin_i, 2, 1).astype(np.uint16)
    elif cfg.splitter == "pair":
        ch_s = np.where(coin_s, 1, 0).astype(np.uint16)
        ch_i = np.where(coin_i, 1, 0).astype(np.uint16)

    times = [(t0 + jit_s)[keep_s], (t0 + jit_i)[keep_i]]
    chans = [ch_s[keep_s], ch_i[keep_i]]

    dark_rates = [cfg.dark_s, cfg.dark_i] + ([cfg.dark_i] if cfg.n_channels == 3 else [])
    for ch, rate in enumerate(dark_rates):
        nd = rng.poisson(rate * T * PS) if rate > 0 else 0
        times.append(rng.uniform(0.0, T, nd))
        chans.append(np.full(nd, ch, dtype=np.uint16))

    t = np.rint(np.concatenate(times))
    c = np.concatenate(chans)
    ok = (t >= 0) & (t < T)
    t = t[ok].astype(np.int64)
    c = c[ok]
    order = np.lexsort((c, t))
    return TagStream(c[order], t[order], cfg.n_channels, cfg.duration_ps)
