"""Raw signal ingestion: CSV loading, anti-alias filtering, decimation, labeled
segment cutting and fixed-length windowing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .errors import DomainError, ParseError, ValidationError


class Label(Enum):
    STABLE = "stable"
    MILD = "mild"
    CHATTER = "chatter"
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, text):
        key = text.strip().lower()
        aliases = {
            "stable": cls.STABLE,
            "no chatter": cls.STABLE,
            "mild": cls.MILD,
            "intermediate": cls.MILD,
            "mild chatter": cls.MILD,
            "chatter": cls.CHATTER,
            "unknown": cls.UNKNOWN,
        }
        if key not in aliases:
            raise ValidationError(f"unknown label {text!r}")
        return aliases[key]


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled acceleration trace."""

    samples: np.ndarray
    sample_rate_hz: float
    start_time_s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if self.sample_rate_hz <= 0:
            raise ValidationError("sample_rate_hz must be positive")
        if self.samples.size == 0:
            raise ValidationError("time series must be nonempty")

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz

    @property
    def end_time_s(self):
        return self.start_time_s + self.duration_s


@dataclass(frozen=True)
class LabelInterval:
    start_s: float
    end_s: float
    label: Label

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise ValidationError(
                f"interval start {self.start_s} must precede end {self.end_s}"
            )


@dataclass(frozen=True)
class CuttingConfig:
    """One stickout case: an identifier plus its chatter frequency band."""

    stickout_id: str
    chatter_band_hz: tuple[float, float]

    def __post_init__(self):
        low, high = self.chatter_band_hz
        if not 0 < low < high:
            raise ValidationError("chatter band must satisfy 0 < low < high")


# Chatter bands per stickout length (inches), as identified from the cutting
# test spectra.  Keys accept both the inch label and the cm value.
STICKOUT_BANDS = {
    "2": (900.0, 1000.0),
    "2.5": (1200.0, 1300.0),
    "3.5": (1600.0, 1700.0),
    "4.5": (2900.0, 3000.0),
    "5.08": (900.0, 1000.0),
    "6.35": (1200.0, 1300.0),
    "8.89": (1600.0, 1700.0),
    "11.43": (2900.0, 3000.0),
}


def config_for_stickout(stickout_id, chatter_band_hz=None):
    """Build a CuttingConfig, defaulting the band from the stickout table."""
    if chatter_band_hz is None:
        if stickout_id not in STICKOUT_BANDS:
            raise ValidationError(
                f"no built-in chatter band for stickout {stickout_id!r}; "
                "supply chatter_band_hz"
            )
        chatter_band_hz = STICKOUT_BANDS[stickout_id]
    return CuttingConfig(stickout_id, tuple(chatter_band_hz))


@dataclass(frozen=True)
class Segment:
    """A labeled slice of a recording.  label: 0 = chatter-free, 1 = chatter."""

    series: TimeSeries
    label: int
    source: tuple[str, int]


@dataclass(frozen=True)
class FilterCascade:
    """Chain of second-order recursive sections; empty cascade is the identity."""

    sos: np.ndarray  # shape (n_sections, 6)

    @property
    def n_sections(self):
        return self.sos.shape[0]

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if self.n_sections == 0:
            return x.copy()
        return sps.sosfilt(self.sos, x)

    def response(self, freqs_hz, sample_rate_hz):
        """Complex frequency response at the given frequencies."""
        freqs_hz = np.atleast_1d(freqs_hz)
        if self.n_sections == 0:
            return np.ones_like(freqs_hz, dtype=complex)
        _, h = sps.sosfreqz(self.sos, worN=freqs_hz, fs=sample_rate_hz)
        return h


def _parse_float(token, line_number, what):
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"bad {what} value {token!r}", line_number) from None


def load_timeseries(path, sample_rate_hz):
    """Read a one- or two-column CSV (time_s, acceleration) into a TimeSeries.

    Two-column files are checked for uniform sampling at the stated rate
    (1e-6 relative tolerance on successive deltas).
    """
    if sample_rate_hz <= 0:
        raise DomainError("sample_rate_hz must be positive")
    times = []
    values = []
    n_cols = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            tokens = [t.strip() for t in line.split(",") if t.strip() != ""]
            if line_number == 1 and tokens:
                try:
                    float(tokens[0])
                except ValueError:
                    continue  # header row
            if len(tokens) not in (1, 2):
                raise ParseError(
                    f"expected 1 or 2 columns, got {len(tokens)}", line_number
                )
            if n_cols is None:
                n_cols = len(tokens)
            elif len(tokens) != n_cols:
                raise ParseError(
                    f"inconsistent column count ({len(tokens)} vs {n_cols})",
                    line_number,
                )
            if n_cols == 2:
                times.append(_parse_float(tokens[0], line_number, "time"))
                values.append(_parse_float(tokens[1], line_number, "acceleration"))
            else:
                values.append(_parse_float(tokens[0], line_number, "acceleration"))
    if not values:
        raise ValidationError(f"{path}: empty time-series file")
    start = 0.0
    if n_cols == 2:
        t = np.asarray(times)
        deltas = np.diff(t)
        if np.any(deltas <= 0):
            raise ValidationError(f"{path}: time column is not strictly increasing")
        dt = 1.0 / sample_rate_hz
        if deltas.size and np.max(np.abs(deltas - dt)) > 1e-6 * dt:
            bad = int(np.argmax(np.abs(deltas - dt)))
            raise ValidationError(
                f"{path}: sample spacing {deltas[bad]:.6g}s at row {bad + 1} "
                f"does not match 1/{sample_rate_hz:g}Hz"
            )
        start = float(t[0])
    return TimeSeries(np.asarray(values), sample_rate_hz, start)


def load_labels(path):
    """Read a label CSV of `start_s,end_s,label` rows."""
    intervals = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            tokens = [t.strip() for t in line.split(",")]
            if line_number == 1:
                try:
                    float(tokens[0])
                except ValueError:
                    continue  # header row
            if len(tokens) != 3:
                raise ParseError(f"expected 3 columns, got {len(tokens)}", line_number)
            start = _parse_float(tokens[0], line_number, "start_s")
            end = _parse_float(tokens[1], line_number, "end_s")
            intervals.append(LabelInterval(start, end, Label.parse(tokens[2])))
    return intervals


@dataclass(frozen=True)
class ManifestRecord:
    signal_path: str
    label_path: str
    stickout_id: str
    rpm: float | None = None
    doc: float | None = None
    sample_rate_hz: float = 10000.0
    file_id: str = ""


@dataclass(frozen=True)
class Manifest:
    records: list[ManifestRecord]
    configs: dict[str, CuttingConfig] = field(default_factory=dict)

    def config(self, stickout_id):
        if stickout_id in self.configs:
            return self.configs[stickout_id]
        return config_for_stickout(stickout_id)


def load_manifest(path):
    """Read a dataset manifest (JSON).

    Accepts either a bare list of records or an object with `records` and an
    optional `configs` map of stickout_id -> {chatter_band_hz: [lo, hi]}.
    Relative signal/label paths are resolved against the manifest location.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, list):
        raw_records, raw_configs = doc, {}
    else:
        raw_records = doc.get("records", [])
        raw_configs = doc.get("configs", {})
    records = []
    for i, rec in enumerate(raw_records):
        try:
            signal_path = str((path.parent / rec["signal_path"]).resolve())
            label_path = str((path.parent / rec["label_path"]).resolve())
            records.append(
                ManifestRecord(
                    signal_path=signal_path,
                    label_path=label_path,
                    stickout_id=str(rec["stickout_id"]),
                    rpm=rec.get("rpm"),
                    doc=rec.get("doc"),
                    sample_rate_hz=float(rec.get("sample_rate_hz", 10000.0)),
                    file_id=str(rec.get("file_id", f"rec{i:04d}")),
                )
            )
        except KeyError as exc:
            raise ValidationError(f"manifest record {i} missing field {exc}") from None
    configs = {
        sid: CuttingConfig(sid, tuple(spec["chatter_band_hz"]))
        for sid, spec in raw_configs.items()
    }
    return Manifest(records, configs)


def design_lowpass(order, cutoff_hz, sample_rate_hz):
    """Digital Butterworth low-pass as a cascade of second-order sections.

    Order 0 is accepted and yields the identity cascade.  A direct-form
    realization of high orders is numerically unusable, hence the cascade.
    """
    if order < 0 or order % 2 != 0:
        raise DomainError(f"filter order must be a nonnegative even integer, got {order}")
    if order == 0:
        return FilterCascade(np.empty((0, 6)))
    if not 0 < cutoff_hz < sample_rate_hz / 2:
        raise DomainError(
            f"cutoff {cutoff_hz} Hz must lie in (0, {sample_rate_hz / 2}) Hz"
        )
    sos = sps.butter(order, cutoff_hz, btype="low", fs=sample_rate_hz, output="sos")
    return FilterCascade(sos)


def filter_and_downsample(ts, filt, target_rate_hz):
    """Causal low-pass filtering followed by integer-factor decimation."""
    if target_rate_hz <= 0:
        raise DomainError("target_rate_hz must be positive")
    ratio = ts.sample_rate_hz / target_rate_hz
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9 * max(1.0, ratio):
        raise DomainError(
            f"sample rate ratio {ratio:g} is not a positive integer"
        )
    filtered = filt.apply(ts.samples)
    n_keep = (filtered.size // factor) * factor
    decimated = filtered[:n_keep:factor]
    return TimeSeries(decimated, target_rate_hz, ts.start_time_s)


def cut_segments(ts, labels, mild_as_chatter=True, file_id=""):
    """Cut one Segment per non-Unknown interval.

    Stable maps to label 0; Chatter (and Mild, unless mild_as_chatter is
    False, in which case Mild intervals are dropped) maps to label 1.
    """
    ordered = sorted(enumerate(labels), key=lambda item: item[1].start_s)
    eps = 0.5 / ts.sample_rate_hz
    prev_end = None
    for _, iv in ordered:
        if iv.start_s < ts.start_time_s - eps or iv.end_s > ts.end_time_s + eps:
            raise ValidationError(
                f"interval [{iv.start_s}, {iv.end_s}]s outside series span "
                f"[{ts.start_time_s}, {ts.end_time_s}]s"
            )
        if prev_end is not None and iv.start_s < prev_end - eps:
            raise ValidationError(
                f"interval starting at {iv.start_s}s overlaps the previous one"
            )
        prev_end = iv.end_s
    segments = []
    for index, iv in sorted(enumerate(labels), key=lambda item: item[0]):
        if iv.label is Label.UNKNOWN:
            continue
        if iv.label is Label.MILD and not mild_as_chatter:
            continue
        binary = 0 if iv.label is Label.STABLE else 1
        i0 = int(round((iv.start_s - ts.start_time_s) * ts.sample_rate_hz))
        i1 = int(round((iv.end_s - ts.start_time_s) * ts.sample_rate_hz))
        i0 = max(i0, 0)
        i1 = min(i1, ts.samples.size)
        if i1 <= i0:
            continue
        segments.append(
            Segment(
                TimeSeries(ts.samples[i0:i1], ts.sample_rate_hz, iv.start_s),
                binary,
                (file_id, index),
            )
        )
    return segments


def window_segments(segments, window_len):
    """Split segments into consecutive non-overlapping fixed-length windows.

    Trailing remainders shorter than window_len are discarded; windows
    inherit their parent's label.
    """
    if window_len < 2:
        raise DomainError("window_len must be at least 2")
    windows = []
    for seg in segments:
        n = seg.series.samples.size
        fs = seg.series.sample_rate_hz
        for w in range(n // window_len):
            i0 = w * window_len
            sub = TimeSeries(
                seg.series.samples[i0 : i0 + window_len],
                fs,
                seg.series.start_time_s + i0 / fs,
            )
            windows.append(Segment(sub, seg.label, seg.source))
    return windows
