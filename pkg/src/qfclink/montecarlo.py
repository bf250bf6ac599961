"""
Synthetic time-tag streams and the gated SNR estimator.

Signal photons arrive only inside the rectangular pump-carved pulse of each
repetition period; noise and dark counts arrive uniformly in time. Folding
the stream modulo the repetition period gives the per-bin histogram, and
comparing an on-pulse gate with an equal-width off-pulse gate gives

    SNR = (k_S - k_N) / k_N.

A continuous background of rate R contributes only ``R * w * f`` counts per
second to a gate of width ``w`` at repetition rate ``f``. The helpers
:func:`in_gate_to_cw` and :func:`cw_to_in_gate` convert between the two
conventions.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .model import SNR_INFINITE, DomainError, SourceModel
from .output import atomic_write_text

TIMETAG_HEADER = "# timetag v1 rep_period_ns="


class Origin(IntEnum):
    SIGNAL = 0
    NOISE = 1
    DARK = 2


@dataclass(frozen=True)
class TimeTagStream:
    """Sorted detection timestamps (integer ns) with simulation-truth origins."""

    timestamps_ns: np.ndarray
    origins: np.ndarray
    duration_ns: int
    rep_period_ns: int

    def __len__(self):
        return len(self.timestamps_ns)

    def count(self, origin: Origin) -> int:
        return int(np.count_nonzero(self.origins == origin))


@dataclass(frozen=True)
class GateConfig:
    rep_period_ns: int = 1000
    signal_offset_ns: int = 0
    signal_width_ns: int = 300
    noise_offset_ns: int = 500
    noise_width_ns: int = 300
    bin_ns: int = 10

    def __post_init__(self):
        if self.rep_period_ns <= 0 or self.bin_ns <= 0:
            raise DomainError("repetition period and bin width must be positive")
        if self.signal_width_ns <= 0 or self.noise_width_ns <= 0:
            raise DomainError("gate widths must be positive")
        if self.signal_width_ns != self.noise_width_ns:
            raise DomainError("signal and noise gates must have equal widths")
        for name, off, width in (("signal", self.signal_offset_ns, self.signal_width_ns),
                                 ("noise", self.noise_offset_ns, self.noise_width_ns)):
            if off < 0 or off + width > self.rep_period_ns:
                raise DomainError(f"{name} gate does not fit in one repetition period")
        if (self.signal_offset_ns < self.noise_offset_ns + self.noise_width_ns
                and self.noise_offset_ns < self.signal_offset_ns + self.signal_width_ns):
            raise DomainError("signal and noise gates overlap")

    @property
    def gate_fraction(self) -> float:
        """Fraction of time covered by one gate, ``w * f``."""
        return self.signal_width_ns / self.rep_period_ns

    @classmethod
    def for_source(cls, source: SourceModel, noise_offset_ns: int | None = None,
                   bin_ns: int = 10) -> "GateConfig":
        """Signal gate on the pulse; noise gate at half period by default."""
        period = int(round(1e9 / source.rep_rate_hz))
        width = int(round(source.pulse_width_s * 1e9))
        if noise_offset_ns is None:
            noise_offset_ns = period // 2
        return cls(period, 0, width, noise_offset_ns, width, bin_ns)


@dataclass(frozen=True)
class Histogram:
    bin_ns: int
    counts: np.ndarray

    @property
    def bin_starts_ns(self) -> np.ndarray:
        return np.arange(len(self.counts)) * self.bin_ns


@dataclass(frozen=True)
class GatedSNR:
    snr: float
    k_s: int
    k_n: int
    std_error: float
    infinite: bool = False


def in_gate_to_cw(rate_hz: float, gate: GateConfig) -> float:
    return rate_hz / gate.gate_fraction


def cw_to_in_gate(rate_hz: float, gate: GateConfig) -> float:
    return rate_hz * gate.gate_fraction


def expected_gated_snr(signal_rate_hz: float, background_cw_hz: float, gate: GateConfig) -> float:
    """Large-duration limit of :func:`gated_snr` for a CW background."""
    in_gate = cw_to_in_gate(background_cw_hz, gate)
    if in_gate == 0:
        return SNR_INFINITE
    return signal_rate_hz / in_gate


def _pulse_on_time_ns(duration_ns: float, period_ns: float, offset_ns: float, width_ns: float) -> float:
    full, rem = divmod(duration_ns, period_ns)
    return full * width_ns + min(max(rem - offset_ns, 0.0), width_ns)


def generate_stream(
    source: SourceModel,
    detected_signal_rate_hz: float,
    noise_rate_hz: float,
    dark_rate_hz: float,
    duration_s: float,
    rng_seed,
    pulse_offset_ns: float = 0.0,
) -> TimeTagStream:
    """Draw one seeded stream.

    ``noise_rate_hz`` and ``dark_rate_hz`` are continuous-wave rates. The
    signal count over the run is Poisson with mean
    ``detected_signal_rate_hz * duration_s``, spread uniformly over the
    pulse windows.
    """
    if min(detected_signal_rate_hz, noise_rate_hz, dark_rate_hz) < 0:
        raise DomainError("rates must be >= 0")
    if not duration_s > 0:
        raise DomainError("duration must be > 0 s")
    rng = np.random.default_rng(rng_seed)
    duration_ns = duration_s * 1e9
    period_ns = 1e9 / source.rep_rate_hz
    width_ns = source.pulse_width_s * 1e9
    if pulse_offset_ns < 0 or pulse_offset_ns + width_ns > period_ns + 1e-9:
        raise DomainError("pulse window does not fit in one repetition period")

    parts_t, parts_o = [], []

    n_sig = rng.poisson(detected_signal_rate_hz * duration_s)
    if n_sig > 0:
        on_time = _pulse_on_time_ns(duration_ns, period_ns, pulse_offset_ns, width_ns)
        if on_time <= 0:
            raise DomainError("no pulse time inside the run but signal rate is positive")
        u = rng.uniform(0.0, on_time, size=n_sig)
        k, phase = np.divmod(u, width_ns)
        parts_t.append(k * period_ns + pulse_offset_ns + phase)
        parts_o.append(np.full(n_sig, Origin.SIGNAL, dtype=np.int8))

    for rate, origin in ((noise_rate_hz, Origin.NOISE), (dark_rate_hz, Origin.DARK)):
        n = rng.poisson(rate * duration_s)
        if n > 0:
            parts_t.append(rng.uniform(0.0, duration_ns, size=n))
            parts_o.append(np.full(n, origin, dtype=np.int8))

    if parts_t:
        t = np.floor(np.concatenate(parts_t)).astype(np.int64)
        o = np.concatenate(parts_o)
        order = np.argsort(t, kind="stable")
        t, o = t[order], o[order]
    else:
        t = np.empty(0, dtype=np.int64)
        o = np.empty(0, dtype=np.int8)
    return TimeTagStream(t, o, int(round(duration_ns)), int(round(period_ns)))


def _phases(timestamps_ns, rep_period_ns: int) -> np.ndarray:
    return np.asarray(timestamps_ns, dtype=np.int64) % rep_period_ns


def fold_histogram(stream, gate: GateConfig) -> Histogram:
    """Fold tags modulo the repetition period into ``bin_ns`` bins.

    ``stream`` is a :class:`TimeTagStream` or a bare array of timestamps.
    """
    if gate.rep_period_ns % gate.bin_ns:
        raise DomainError(f"bin width {gate.bin_ns} ns does not divide period {gate.rep_period_ns} ns")
    ts = getattr(stream, "timestamps_ns", stream)
    nbins = gate.rep_period_ns // gate.bin_ns
    counts = np.bincount(_phases(ts, gate.rep_period_ns) // gate.bin_ns, minlength=nbins)
    return Histogram(gate.bin_ns, counts.astype(np.int64))


def gate_counts(stream, gate: GateConfig) -> tuple[int, int]:
    ts = getattr(stream, "timestamps_ns", stream)
    ph = _phases(ts, gate.rep_period_ns)
    so, no, w = gate.signal_offset_ns, gate.noise_offset_ns, gate.signal_width_ns
    k_s = int(np.count_nonzero((ph >= so) & (ph < so + w)))
    k_n = int(np.count_nonzero((ph >= no) & (ph < no + w)))
    return k_s, k_n


def gated_snr(stream, gate: GateConfig) -> GatedSNR:
    """``(k_S - k_N) / k_N`` with a delta-method standard error.

    With no counts in the noise gate the result carries the infinite
    sentinel and a :class:`RuntimeWarning` is issued.
    """
    k_s, k_n = gate_counts(stream, gate)
    if k_n == 0:
        warnings.warn("no counts in noise gate; SNR reported as infinite", RuntimeWarning,
                      stacklevel=2)
        return GatedSNR(SNR_INFINITE, k_s, k_n, math.nan, infinite=True)
    snr = (k_s - k_n) / k_n
    # Var(k_S / k_N) for independent Poisson counts
    se = math.sqrt(k_s / k_n**2 + k_s**2 / k_n**3)
    return GatedSNR(snr, k_s, k_n, se)


def write_timetags(path, stream: TimeTagStream) -> None:
    """Export timestamps on channel 0; origin labels are not written."""
    lines = [f"{TIMETAG_HEADER}{stream.rep_period_ns}\n"]
    lines.extend(f"{t}\t0\n" for t in stream.timestamps_ns.tolist())
    atomic_write_text(path, "".join(lines))


def read_timetags(path) -> tuple[np.ndarray, int]:
    """Return ``(timestamps_ns, rep_period_ns)`` from a time-tag file."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith(TIMETAG_HEADER):
            raise ValueError(f"{path}: not a timetag v1 file")
        try:
            period = int(header[len(TIMETAG_HEADER):])
        except ValueError:
            raise ValueError(f"{path}: bad rep_period_ns in header") from None
        stamps = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ValueError(f"{path}:{lineno}: expected '<timestamp_ns>\\t<channel>'")
            stamps.append(int(fields[0]))
    ts = np.asarray(stamps, dtype=np.int64)
    if ts.size and (ts[0] < 0 or np.any(np.diff(ts) < 0)):
        raise ValueError(f"{path}: timestamps must be non-negative and sorted")
    return ts, period
