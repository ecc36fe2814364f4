"""Bit-exact parsers and writers for the on-disk input formats.

ENVT event file (little-endian):
  header   = magic "ENVT" (4B) | version u16 | sensor_width u16
             | sensor_height u16 | reserved u16            -> 12 bytes
  records  = t_us u64 | x u16 | y u16 | flags u8 | pad[3]  -> 16 bytes each
  flags    = bit0 polarity, bit1 is_trigger, bit2 trigger_rising

frames.csv: ``index,t_us,image_ref``; twist CSVs: ``t_us,v_mps,w_radps``;
episode.json carries map_id / path / lighting / subject_id.
"""

import csv
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import EVENT_DTYPE, EventStream, FrameRecord
from .errors import (
    BadMagic,
    BoundsViolation,
    CoordinateOutOfBounds,
    MalformedRow,
    NonMonotonicFrames,
    ReorderViolation,
    TruncatedRecord,
    UnsupportedVersion,
)

ENVT_MAGIC = b"ENVT"
ENVT_VERSION = 1
HEADER_SIZE = 12
RECORD_SIZE = 16
REORDER_TOLERANCE_US = 1000

COMMAND = "COMMAND"
ODOMETRY = "ODOMETRY"

# platform sanity bounds; catch unit mistakes (mm/s vs m/s) at ingest
V_LIMIT_MPS = 2.0
W_LIMIT_RADPS = 6.0

_RECORD_DTYPE = np.dtype(
    [("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("flags", "u1"), ("pad", "u1", (3,))]
)

FLAG_POLARITY = 0x01
FLAG_TRIGGER = 0x02
FLAG_RISING = 0x04


@dataclass(frozen=True)
class TwistSample:
    t: int
    v: float
    w: float
    source: str  # COMMAND or ODOMETRY


@dataclass
class ParseReport:
    """Counters for everything a parser normalized instead of dropping."""

    records: int = 0
    cd_events: int = 0
    trigger_events: int = 0
    reordered: int = 0


@dataclass
class EpisodeBundle:
    events: EventStream
    frames: list
    twists_cmd: list
    twists_odom: list
    meta: dict = field(default_factory=dict)


def _read_all(source):
    if isinstance(source, (str, Path)):
        return Path(source).read_bytes()
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    return source.read()


def parse_events(source):
    """Decode an ENVT byte source into (EventStream, ParseReport).

    Events out of order by at most 1 ms are stably re-sorted and counted in
    the report; anything worse raises ReorderViolation.
    """
    raw = _read_all(source)
    if len(raw) < HEADER_SIZE:
        raise TruncatedRecord(f"file shorter than {HEADER_SIZE}-byte header")
    magic, version, width, height, _reserved = struct.unpack("<4sHHHH", raw[:HEADER_SIZE])
    if magic != ENVT_MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != ENVT_VERSION:
        raise UnsupportedVersion(f"version {version} not supported")
    body = raw[HEADER_SIZE:]
    if len(body) % RECORD_SIZE:
        raise TruncatedRecord(
            f"payload of {len(body)} bytes is not a multiple of {RECORD_SIZE}"
        )
    recs = np.frombuffer(body, _RECORD_DTYPE)

    events = np.zeros(recs.size, EVENT_DTYPE)
    events["t"] = recs["t"]
    events["x"] = recs["x"]
    events["y"] = recs["y"]
    events["polarity"] = recs["flags"] & FLAG_POLARITY
    events["is_trigger"] = (recs["flags"] & FLAG_TRIGGER) >> 1
    events["trigger_rising"] = (recs["flags"] & FLAG_RISING) >> 2

    report = ParseReport(records=int(recs.size))
    report.trigger_events = int(events["is_trigger"].sum())
    report.cd_events = report.records - report.trigger_events

    cd = events[events["is_trigger"] == 0]
    if cd.size and (
        (cd["x"] >= width).any() or (cd["y"] >= height).any()
    ):
        raise CoordinateOutOfBounds(f"CD event outside {width}x{height} sensor")

    t = events["t"].astype(np.int64)
    if t.size > 1:
        running_max = np.maximum.accumulate(t)
        lag = running_max - t
        if (lag > REORDER_TOLERANCE_US).any():
            worst = int(lag.max())
            raise ReorderViolation(
                f"event {worst} us out of order (tolerance {REORDER_TOLERANCE_US} us)"
            )
        if (lag > 0).any():
            report.reordered = int((lag > 0).sum())
            events = events[np.argsort(events["t"], kind="stable")]

    return EventStream(sensor_width=width, sensor_height=height, events=events), report


def write_events(stream, sink):
    """Emit the ENVT layout; inverse of parse_events. Returns bytes written."""
    recs = np.zeros(stream.events.size, _RECORD_DTYPE)
    recs["t"] = stream.events["t"]
    recs["x"] = stream.events["x"]
    recs["y"] = stream.events["y"]
    recs["flags"] = (
        stream.events["polarity"]
        | (stream.events["is_trigger"] << 1)
        | (stream.events["trigger_rising"] << 2)
    )
    payload = (
        struct.pack(
            "<4sHHHH",
            ENVT_MAGIC,
            ENVT_VERSION,
            stream.sensor_width,
            stream.sensor_height,
            0,
        )
        + recs.tobytes()
    )
    if isinstance(sink, (str, Path)):
        Path(sink).write_bytes(payload)
    else:
        sink.write(payload)
    return len(payload)


def _text_rows(source, expected_header):
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    elif isinstance(source, bytes):
        text = source.decode()
    else:
        text = source.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedRow("missing header row") from None
    if [h.strip() for h in header] != expected_header:
        raise MalformedRow(f"expected header {expected_header}, got {header}")
    return reader


def parse_frames(source):
    """Read frames.csv into FrameRecords, verifying strictly increasing time."""
    rows = _text_rows(source, ["index", "t_us", "image_ref"])
    frames = []
    prev_t = None
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise MalformedRow(f"line {lineno}: expected 3 fields, got {len(row)}")
        try:
            idx, t = int(row[0]), int(row[1])
        except ValueError as exc:
            raise MalformedRow(f"line {lineno}: {exc}") from None
        if prev_t is not None and t <= prev_t:
            raise NonMonotonicFrames(f"line {lineno}: t_us {t} <= previous {prev_t}")
        prev_t = t
        frames.append(FrameRecord(index=idx, t=t, image_ref=row[2]))
    return frames


def write_frames(frames, sink):
    lines = ["index,t_us,image_ref"]
    lines += [f"{f.index},{f.t},{f.image_ref}" for f in frames]
    text = "\n".join(lines) + "\n"
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text)
    else:
        sink.write(text)


def parse_twists(source, source_tag, v_limit=V_LIMIT_MPS, w_limit=W_LIMIT_RADPS):
    """Read a twist CSV, tagging each sample and enforcing sanity bounds."""
    if source_tag not in (COMMAND, ODOMETRY):
        raise ValueError(f"unknown source tag {source_tag!r}")
    rows = _text_rows(source, ["t_us", "v_mps", "w_radps"])
    twists = []
    prev_t = None
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise MalformedRow(f"line {lineno}: expected 3 fields, got {len(row)}")
        try:
            t, v, w = int(row[0]), float(row[1]), float(row[2])
        except ValueError as exc:
            raise MalformedRow(f"line {lineno}: {exc}") from None
        if prev_t is not None and t < prev_t:
            raise MalformedRow(f"line {lineno}: t_us {t} precedes previous {prev_t}")
        prev_t = t
        if abs(v) > v_limit or abs(w) > w_limit:
            raise BoundsViolation(
                f"line {lineno}: twist ({v}, {w}) outside (+-{v_limit}, +-{w_limit})"
            )
        twists.append(TwistSample(t=t, v=v, w=w, source=source_tag))
    return twists


def write_twists(twists, sink):
    lines = ["t_us,v_mps,w_radps"]
    lines += [f"{tw.t},{float(tw.v)!r},{float(tw.w)!r}" for tw in twists]
    text = "\n".join(lines) + "\n"
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text)
    else:
        sink.write(text)


VALID_PATHS = ("P1", "P2", "P3")
VALID_LIGHTING = ("normal", "low")


def read_episode_meta(path):
    meta = json.loads(Path(path).read_text())
    if meta.get("path") not in VALID_PATHS:
        raise MalformedRow(f"episode path must be one of {VALID_PATHS}")
    if meta.get("lighting") not in VALID_LIGHTING:
        raise MalformedRow(f"episode lighting must be one of {VALID_LIGHTING}")
    return meta


def write_episode_meta(meta, path):
    Path(path).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


# canonical file names inside an episode directory
EVENTS_FILE = "events.envt"
FRAMES_FILE = "frames.csv"
TWISTS_CMD_FILE = "twists_cmd.csv"
TWISTS_ODOM_FILE = "twists_odom.csv"
META_FILE = "episode.json"
GROUND_TRUTH_FILE = "ground_truth.csv"


def load_episode(episode_dir):
    """Load a full episode directory into an EpisodeBundle."""
    d = Path(episode_dir)
    stream, _ = parse_events(d / EVENTS_FILE)
    frames = parse_frames(d / FRAMES_FILE)
    cmd_path = d / TWISTS_CMD_FILE
    twists_cmd = parse_twists(cmd_path, COMMAND) if cmd_path.exists() else []
    twists_odom = parse_twists(d / TWISTS_ODOM_FILE, ODOMETRY)
    meta = read_episode_meta(d / META_FILE)
    return EpisodeBundle(
        events=stream,
        frames=frames,
        twists_cmd=twists_cmd,
        twists_odom=twists_odom,
        meta=meta,
    )
