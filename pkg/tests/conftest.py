import numpy as np
import pytest

from evpipe.core import EVENT_DTYPE, EventStream, FrameRecord, make_events


def random_cd_events(rng, n, width=1280, height=720, t_lo=0, t_hi=1_000_000):
    """Time-sorted random CD events for oracle comparisons."""
    t = np.sort(rng.integers(t_lo, t_hi, n).astype(np.uint64))
    return make_events(
        t,
        x=rng.integers(0, width, n).astype(np.uint16),
        y=rng.integers(0, height, n).astype(np.uint16),
        polarity=rng.integers(0, 2, n).astype(np.uint8),
    )


def stream_of(events, width=1280, height=720):
    return EventStream(sensor_width=width, sensor_height=height, events=events)


def frames_at(times, start_index=1):
    return [
        FrameRecord(index=start_index + i, t=int(t), image_ref=f"f{start_index + i}.ppm")
        for i, t in enumerate(times)
    ]


def brute_force_histogram(events, width, height):
    """Per-event python accumulation; the independent rasterization oracle."""
    counts = np.zeros((2, height, width), np.int64)
    for ev in events:
        ch = 0 if ev["polarity"] == 1 else 1
        counts[ch, ev["y"], ev["x"]] += 1
    return counts


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
