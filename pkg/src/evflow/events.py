"""Event stream representation, file IO, and the refractory filter.

Events are address-event records (t, x, y, p): a microsecond timestamp,
integer pixel coordinates, and a polarity in {-1, +1}.  Streams are numpy
structured arrays with fields ``t, x, y, p`` sorted by non-decreasing
timestamp.  Two file formats are supported:

* CSV with header ``t_us,x,y,p``, one event per line.
* Packed binary ``.evb``: little-endian records (uint64 t, uint16 x,
  uint16 y, int8 p), 13 bytes per event, no header.
"""

from __future__ import annotations

import io
import os
from typing import NamedTuple, Optional

import numpy as np

# Canonical in-memory stream dtype. Timestamps are signed so that relative
# arithmetic (dt = t_i - t_n <= 0) never wraps.
EVENT_DTYPE = np.dtype([("t", "<i8"), ("x", "<u2"), ("y", "<u2"), ("p", "<i1")])

# On-disk packed record for .evb files (13 bytes, no padding).
EVB_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "<i1")])

CSV_HEADER = "t_us,x,y,p"


class Event(NamedTuple):
    """A single address-event record."""

    t: int
    x: int
    y: int
    p: int


class EventFormatError(ValueError):
    """Malformed event record (bad field count, value, or range)."""


class TimestampOrderError(EventFormatError):
    """Timestamps regressed within a stream."""


def make_stream(t, x, y, p) -> np.ndarray:
    """Pack columns into an EVENT_DTYPE structured array."""
    t = np.asarray(t, dtype=np.int64)
    out = np.empty(t.shape[0], dtype=EVENT_DTYPE)
    out["t"] = t
    out["x"] = x
    out["y"] = y
    out["p"] = p
    return out


def _validate_stream(ev: np.ndarray, width: Optional[int], height: Optional[int],
                     where: str) -> np.ndarray:
    if ev.shape[0] == 0:
        return ev
    dt = np.diff(ev["t"].astype(np.int64))
    if dt.size and dt.min() < 0:
        i = int(np.argmax(dt < 0)) + 1
        raise TimestampOrderError(
            f"{where}: timestamp regression at record {i + 1} "
            f"(t={int(ev['t'][i])} after t={int(ev['t'][i - 1])})")
    bad_p = (ev["p"] != 1) & (ev["p"] != -1)
    if bad_p.any():
        i = int(np.argmax(bad_p))
        raise EventFormatError(f"{where}: record {i + 1}: polarity must be -1 or +1, "
                               f"got {int(ev['p'][i])}")
    if width is not None and ev["x"].size and int(ev["x"].max()) >= width:
        i = int(np.argmax(ev["x"] >= width))
        raise EventFormatError(f"{where}: record {i + 1}: x={int(ev['x'][i])} outside "
                               f"sensor width {width}")
    if height is not None and ev["y"].size and int(ev["y"].max()) >= height:
        i = int(np.argmax(ev["y"] >= height))
        raise EventFormatError(f"{where}: record {i + 1}: y={int(ev['y'][i])} outside "
                               f"sensor height {height}")
    return ev


def read_events_csv(path, width: Optional[int] = None,
                    height: Optional[int] = None) -> np.ndarray:
    """Read an event stream from CSV (header ``t_us,x,y,p``).

    Raises EventFormatError with the offending line number on malformed
    records, TimestampOrderError on timestamp regression.  An empty file or
    a header-only file yields an empty stream.
    """
    name = os.fspath(path)
    with open(name, "r", encoding="ascii", newline="") as fh:
        first = fh.readline()
        if first == "":
            return np.empty(0, dtype=EVENT_DTYPE)
        if first.strip() != CSV_HEADER:
            raise EventFormatError(f"{name}: line 1: expected header '{CSV_HEADER}', "
                                   f"got {first.strip()!r}")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise EventFormatError(f"{name}: line {lineno}: expected 4 fields, "
                                       f"got {len(parts)}")
            try:
                rows.append((int(parts[0]), int(parts[1]), int(parts[2]), int(parts[3])))
            except ValueError as exc:
                raise EventFormatError(f"{name}: line {lineno}: {exc}") from None
    if not rows:
        return np.empty(0, dtype=EVENT_DTYPE)
    arr = np.array(rows, dtype=np.int64)
    if arr[:, 0].min() < 0:
        i = int(np.argmax(arr[:, 0] < 0))
        raise EventFormatError(f"{name}: line {i + 2}: negative timestamp")
    if arr[:, 1].min() < 0 or arr[:, 2].min() < 0:
        raise EventFormatError(f"{name}: negative pixel coordinate")
    ev = make_stream(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])
    return _validate_stream(ev, width, height, name)


def write_events_csv(path, events: np.ndarray) -> None:
    ev = np.asarray(events, dtype=EVENT_DTYPE)
    with open(os.fspath(path), "w", encoding="ascii", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        buf = io.StringIO()
        for t, x, y, p in zip(ev["t"], ev["x"], ev["y"], ev["p"]):
            buf.write(f"{int(t)},{int(x)},{int(y)},{int(p)}\n")
        fh.write(buf.getvalue())


def read_events_evb(path, width: Optional[int] = None,
                    height: Optional[int] = None) -> np.ndarray:
    """Read a packed binary event stream (13-byte little-endian records)."""
    name = os.fspath(path)
    raw = np.fromfile(name, dtype=np.uint8)
    if raw.size % EVB_DTYPE.itemsize != 0:
        raise EventFormatError(
            f"{name}: file size {raw.size} is not a multiple of the "
            f"{EVB_DTYPE.itemsize}-byte record (truncated at byte "
            f"{raw.size - raw.size % EVB_DTYPE.itemsize})")
    rec = raw.view(EVB_DTYPE)
    if rec.size and int(rec["t"].max()) > np.iinfo(np.int64).max:
        raise EventFormatError(f"{name}: timestamp overflows signed 64-bit range")
    ev = make_stream(rec["t"].astype(np.int64), rec["x"], rec["y"], rec["p"])
    return _validate_stream(ev, width, height, name)


def write_events_evb(path, events: np.ndarray) -> None:
    ev = np.asarray(events, dtype=EVENT_DTYPE)
    rec = np.empty(ev.shape[0], dtype=EVB_DTYPE)
    rec["t"] = ev["t"].astype(np.uint64)
    rec["x"] = ev["x"]
    rec["y"] = ev["y"]
    rec["p"] = ev["p"]
    rec.tofile(os.fspath(path))


def read_events(path, width: Optional[int] = None,
                height: Optional[int] = None) -> np.ndarray:
    """Dispatch on extension: ``.evb`` binary, anything else CSV."""
    if os.fspath(path).endswith(".evb"):
        return read_events_evb(path, width, height)
    return read_events_csv(path, width, height)


class RefractoryFilter:
    """Per-pixel dead-time filter.

    An event is accepted iff its pixel has not fired an accepted event
    within the preceding ``dt_r`` microseconds.  Suppressed events are
    dropped entirely: they do not update the pixel's last-emission time,
    so a pixel recovers exactly ``dt_r`` after its last *accepted* event.
    """

    def __init__(self, width: int = 128, height: int = 128, dt_r_us: int = 100_000):
        self.dt_r_us = int(dt_r_us)
        self.last_emit = np.full((height, width), np.iinfo(np.int64).min // 4,
                                 dtype=np.int64)

    def accept(self, t: int, x: int, y: int) -> bool:
        if t - self.last_emit[y, x] > self.dt_r_us:
            self.last_emit[y, x] = t
            return True
        return False

    def filter_stream(self, events: np.ndarray) -> np.ndarray:
        """Return the accepted subset of a stream (order preserved)."""
        ev = np.asarray(events, dtype=EVENT_DTYPE)
        keep = np.zeros(ev.shape[0], dtype=bool)
        last = self.last_emit
        dt_r = self.dt_r_us
        ts = ev["t"]
        xs = ev["x"]
        ys = ev["y"]
        for i in range(ev.shape[0]):
            t = ts[i]
            x = xs[i]
            y = ys[i]
            if t - last[y, x] > dt_r:
                last[y, x] = t
                keep[i] = True
        return ev[keep]
