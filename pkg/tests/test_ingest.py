import io

import numpy as np
import pytest

from evpipe import ingest
from evpipe.core import make_events
from evpipe.errors import (
    BadMagic,
    BoundsViolation,
    CoordinateOutOfBounds,
    MalformedRow,
    NonMonotonicFrames,
    ReorderViolation,
    TruncatedRecord,
    UnsupportedVersion,
)

from conftest import random_cd_events, stream_of


def roundtrip(stream):
    buf = io.BytesIO()
    ingest.write_events(stream, buf)
    parsed, report = ingest.parse_events(buf.getvalue())
    return parsed, report


# --- ENVT binary -----------------------------------------------------------

def test_empty_stream_is_header_only():
    buf = io.BytesIO()
    n = ingest.write_events(stream_of(make_events(np.empty(0, np.uint64))), buf)
    assert n == 12
    parsed, report = ingest.parse_events(buf.getvalue())
    assert len(parsed) == 0
    assert parsed.sensor_width == 1280 and parsed.sensor_height == 720
    assert report.records == 0


def test_single_event_roundtrip():
    stream = stream_of(make_events([1000], x=3, y=4, polarity=1))
    parsed, _ = roundtrip(stream)
    assert parsed == stream


def test_trigger_roundtrip_preserves_flags():
    events = np.concatenate(
        [
            make_events([10], x=1, y=2, polarity=0),
            make_events([20], is_trigger=1, trigger_rising=1),
            make_events([30], is_trigger=1, trigger_rising=0),
        ]
    )
    stream = stream_of(events)
    parsed, report = roundtrip(stream)
    assert parsed == stream
    assert report.cd_events == 1 and report.trigger_events == 2


def test_byte_length_formula(rng):
    n = 100_000
    stream = stream_of(random_cd_events(rng, n))
    buf = io.BytesIO()
    written = ingest.write_events(stream, buf)
    assert written == 12 + 16 * n


def test_large_generated_stream_parses_exactly(rng):
    n = 1_000_000
    stream = stream_of(random_cd_events(rng, n))
    parsed, report = roundtrip(stream)
    assert parsed == stream
    assert report.records == n and report.reordered == 0


def test_bad_magic_and_version():
    with pytest.raises(BadMagic):
        ingest.parse_events(b"NOPE" + bytes(8))
    good = io.BytesIO()
    ingest.write_events(stream_of(make_events([1])), good)
    raw = bytearray(good.getvalue())
    raw[4] = 9  # version field
    with pytest.raises(UnsupportedVersion):
        ingest.parse_events(bytes(raw))


def test_truncated_record():
    buf = io.BytesIO()
    ingest.write_events(stream_of(make_events([1, 2])), buf)
    with pytest.raises(TruncatedRecord):
        ingest.parse_events(buf.getvalue()[:-5])
    with pytest.raises(TruncatedRecord):
        ingest.parse_events(b"ENVT")


def test_reorder_buffer_sorts_small_violations():
    events = make_events([1000, 1500, 1200, 2000], x=1, y=1)  # 300 us late
    buf = io.BytesIO()
    ingest.write_events(stream_of(events), buf)
    parsed, report = ingest.parse_events(buf.getvalue())
    assert list(parsed.events["t"]) == [1000, 1200, 1500, 2000]
    assert report.reordered == 1


def test_reorder_violation_beyond_tolerance():
    events = make_events([10_000, 5_000], x=1, y=1)  # 5 ms out of order
    buf = io.BytesIO()
    ingest.write_events(stream_of(events), buf)
    with pytest.raises(ReorderViolation):
        ingest.parse_events(buf.getvalue())


def test_coordinate_out_of_bounds():
    stream = stream_of(make_events([1], x=2000, y=1))
    buf = io.BytesIO()
    ingest.write_events(stream, buf)
    with pytest.raises(CoordinateOutOfBounds):
        ingest.parse_events(buf.getvalue())


def test_trigger_coordinates_not_bounds_checked():
    # trigger markers carry no pixel location; x/y are free-form
    stream = stream_of(make_events([1], x=5000, is_trigger=1, trigger_rising=1))
    parsed, _ = roundtrip(stream)
    assert parsed == stream


# --- frames.csv ----------------------------------------------------------------

def test_parse_frames_basic():
    frames = ingest.parse_frames(io.StringIO("index,t_us,image_ref\n1,100,a.png\n2,200,b.png\n"))
    assert [(f.index, f.t, f.image_ref) for f in frames] == [
        (1, 100, "a.png"),
        (2, 200, "b.png"),
    ]


def test_parse_frames_non_monotonic():
    with pytest.raises(NonMonotonicFrames):
        ingest.parse_frames(io.StringIO("index,t_us,image_ref\n1,200,a\n2,100,b\n"))


def test_parse_frames_malformed():
    with pytest.raises(MalformedRow):
        ingest.parse_frames(io.StringIO("index,t_us,image_ref\n1,abc,x\n"))
    with pytest.raises(MalformedRow):
        ingest.parse_frames(io.StringIO("wrong,header,here\n"))


def test_frames_median_interval_at_30hz():
    from evpipe.core import median_frame_interval

    rows = ["index,t_us,image_ref"]
    rows += [f"{i},{i * 33_333},f{i}" for i in range(1, 901)]
    frames = ingest.parse_frames(io.StringIO("\n".join(rows) + "\n"))
    assert len(frames) == 900
    assert median_frame_interval(frames) == 33_333


def test_frames_roundtrip(tmp_path):
    frames = ingest.parse_frames(io.StringIO("index,t_us,image_ref\n1,100,a.png\n2,200,b.png\n"))
    path = tmp_path / "frames.csv"
    ingest.write_frames(frames, path)
    assert ingest.parse_frames(path) == frames


# --- twists ---------------------------------------------------------------------

def test_parse_twists_single_row():
    twists = ingest.parse_twists(io.StringIO("t_us,v_mps,w_radps\n1000,0.3,-0.1\n"), ingest.COMMAND)
    assert twists == [ingest.TwistSample(t=1000, v=0.3, w=-0.1, source="COMMAND")]


def test_parse_twists_bounds():
    with pytest.raises(BoundsViolation):
        ingest.parse_twists(io.StringIO("t_us,v_mps,w_radps\n1000,5.0,0.0\n"), ingest.ODOMETRY)
    with pytest.raises(BoundsViolation):
        ingest.parse_twists(io.StringIO("t_us,v_mps,w_radps\n1000,0.0,-7.5\n"), ingest.ODOMETRY)


def test_parse_twists_rejects_time_regression():
    with pytest.raises(MalformedRow):
        ingest.parse_twists(
            io.StringIO("t_us,v_mps,w_radps\n2000,0.1,0.0\n1000,0.1,0.0\n"),
            ingest.ODOMETRY,
        )


def test_parse_twists_full_precision_roundtrip(rng, tmp_path):
    vals = [
        ingest.TwistSample(
            t=int(i * 1000),
            v=float(rng.uniform(-2, 2)),
            w=float(rng.uniform(-6, 6)),
            source=ingest.ODOMETRY,
        )
        for i in range(1000)
    ]
    path = tmp_path / "tw.csv"
    ingest.write_twists(vals, path)
    parsed = ingest.parse_twists(path, ingest.ODOMETRY)
    assert parsed == vals  # exact float equality via repr roundtrip


def test_episode_meta_validation(tmp_path):
    p = tmp_path / "episode.json"
    ingest.write_episode_meta(
        {"map_id": "m", "path": "P2", "lighting": "low", "subject_id": "s"}, p
    )
    meta = ingest.read_episode_meta(p)
    assert meta["path"] == "P2"
    p.write_text('{"map_id": "m", "path": "P9", "lighting": "low", "subject_id": "s"}')
    with pytest.raises(MalformedRow):
        ingest.read_episode_meta(p)
