"""Domain types plus the pure windowing and rasterization math.

Events live in structured numpy arrays (``EVENT_DTYPE``); trigger markers
share the array with CD events and are told apart by the ``is_trigger``
field. All timestamps are integer microseconds.
"""

from dataclasses import dataclass, field

import numpy as np

from ._kernels import rasterize_counts
from .errors import (
    EmptyFrameList,
    EventOutOfBounds,
    NonDivisibleFactor,
    NonMonotonicFrames,
)

EVENT_DTYPE = np.dtype(
    [
        ("t", "<u8"),
        ("x", "<u2"),
        ("y", "<u2"),
        ("polarity", "u1"),
        ("is_trigger", "u1"),
        ("trigger_rising", "u1"),
    ]
)

ON = 1
OFF = 0


def make_events(t, x=0, y=0, polarity=0, is_trigger=0, trigger_rising=0):
    """Build a structured event array from per-field values or arrays."""
    t = np.atleast_1d(np.asarray(t, np.uint64))
    out = np.zeros(t.shape, EVENT_DTYPE)
    out["t"] = t
    out["x"] = x
    out["y"] = y
    out["polarity"] = polarity
    out["is_trigger"] = is_trigger
    out["trigger_rising"] = trigger_rising
    return out


def concat_time_sorted(*parts):
    """Concatenate event arrays and stable-sort by timestamp."""
    merged = np.concatenate([p for p in parts if p.size] or [np.empty(0, EVENT_DTYPE)])
    order = np.argsort(merged["t"], kind="stable")
    return merged[order]


@dataclass
class EventStream:
    """Time-ordered event sequence with the sensor geometry it came from."""

    sensor_width: int
    sensor_height: int
    events: np.ndarray  # EVENT_DTYPE, non-decreasing in t

    def cd_events(self):
        return self.events[self.events["is_trigger"] == 0]

    def triggers(self):
        return self.events[self.events["is_trigger"] == 1]

    def __len__(self):
        return int(self.events.size)

    def __eq__(self, other):
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.sensor_width == other.sensor_width
            and self.sensor_height == other.sensor_height
            and np.array_equal(self.events, other.events)
        )


@dataclass(frozen=True)
class FrameRecord:
    index: int
    t: int  # microseconds on whichever clock the sequence is expressed in
    image_ref: str


@dataclass
class EventWindow:
    """CD events falling in the half-open-below interval (t_start, t_end]."""

    frame_index: int
    t_start: int
    t_end: int
    events: np.ndarray

    @property
    def duration(self):
        return self.t_end - self.t_start


@dataclass
class EventHistogram:
    """Dense per-polarity count grid, channel 0 = ON, channel 1 = OFF."""

    width: int
    height: int
    counts: np.ndarray  # uint16, shape (2, height, width)
    saturated: bool = False

    def total(self):
        return int(self.counts.sum(dtype=np.int64))

    def __eq__(self, other):
        if not isinstance(other, EventHistogram):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.saturated == other.saturated
            and np.array_equal(self.counts, other.counts)
        )


@dataclass
class DropReport:
    """Events excluded by partitioning, by reason."""

    dropped_before: int = 0
    dropped_after: int = 0
    triggers_excluded: int = 0

    @property
    def dropped(self):
        return self.dropped_before + self.dropped_after


def frame_times(frames):
    return np.asarray([f.t for f in frames], np.int64)


def median_frame_interval(frames):
    """Median inter-frame interval in microseconds (rounded to int)."""
    ts = frame_times(frames)
    if ts.size < 2:
        raise EmptyFrameList("need at least two frames to estimate an interval")
    return int(round(float(np.median(np.diff(ts)))))


def default_t0(frames):
    """Default recording start: first frame minus the median frame interval."""
    return int(frames[0].t) - median_frame_interval(frames)


def check_frames_monotonic(frames):
    ts = frame_times(frames)
    if ts.size == 0:
        raise EmptyFrameList("frame list is empty")
    if ts.size > 1 and not (np.diff(ts) > 0).all():
        raise NonMonotonicFrames("frame timestamps must be strictly increasing")
    return ts


def partition_windows(stream, frames, t0):
    """Slice the CD events of `stream` into one window per frame.

    Window i covers (t_{i-1}, t_i] with t_0 = `t0`. Returns the windows plus
    a DropReport counting events outside (t0, t_N] and excluded triggers.
    """
    ts_frames = check_frames_monotonic(frames)
    if t0 > ts_frames[0]:
        raise NonMonotonicFrames("t0 exceeds the first frame timestamp")
    cd = stream.cd_events()
    ev_t = cd["t"].astype(np.int64)
    boundaries = np.concatenate(([t0], ts_frames))
    # positions[i] = number of events with t <= boundaries[i]
    positions = np.searchsorted(ev_t, boundaries, side="right")
    windows = []
    for i, frame in enumerate(frames):
        lo, hi = positions[i], positions[i + 1]
        windows.append(
            EventWindow(
                frame_index=frame.index,
                t_start=int(boundaries[i]),
                t_end=int(boundaries[i + 1]),
                events=cd[lo:hi],
            )
        )
    report = DropReport(
        dropped_before=int(positions[0]),
        dropped_after=int(cd.size - positions[-1]),
        triggers_excluded=int(stream.events.size - cd.size),
    )
    return windows, report


def rasterize_histogram(window, width, height, saturate=False):
    """Count events per pixel and polarity into an EventHistogram.

    With saturate=False a cell crossing 65535 raises CountOverflow instead of
    wrapping, so the count-conservation contract can never silently break.
    """
    ev = window.events
    if ev.size:
        if int(ev["x"].max()) >= width or int(ev["y"].max()) >= height:
            raise EventOutOfBounds(
                f"event coordinates exceed {width}x{height} raster"
            )
        counts, saturated = rasterize_counts(
            ev["x"], ev["y"], ev["polarity"], height, width, saturate
        )
    else:
        counts = np.zeros((2, height, width), np.uint16)
        saturated = False
    return EventHistogram(width=width, height=height, counts=counts, saturated=saturated)


def downsample_histogram(hist, factor):
    """Block-sum each factor x factor tile per channel (count-preserving)."""
    if factor < 1:
        raise NonDivisibleFactor("factor must be a positive integer")
    if factor == 1:
        return EventHistogram(
            width=hist.width,
            height=hist.height,
            counts=hist.counts.copy(),
            saturated=hist.saturated,
        )
    if hist.width % factor or hist.height % factor:
        raise NonDivisibleFactor(
            f"factor {factor} does not divide {hist.width}x{hist.height}"
        )
    h_out, w_out = hist.height // factor, hist.width // factor
    blocks = hist.counts.astype(np.int64).reshape(2, h_out, factor, w_out, factor)
    sums = blocks.sum(axis=(2, 4))
    saturated = hist.saturated or bool((sums > 0xFFFF).any())
    return EventHistogram(
        width=w_out,
        height=h_out,
        counts=np.minimum(sums, 0xFFFF).astype(np.uint16),
        saturated=saturated,
    )
