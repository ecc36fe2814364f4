"""Binary dataset container: manifest.json + samples.bin.

Record layout (little-endian), one per synchronized sample:

  frame_index u32 | t_evt u64 | v f32 | w f32 | held u8
  | hist u16 x (2*H*W)            channel-major, row-major
  | rgb u8 x (3*H*W)              only when the manifest declares rgb
  | crc32 u32                     over the preceding record bytes

The manifest additionally stores a blob-level CRC32 over samples.bin.
Per-record n_samples/source are not persisted; the manifest carries the
dataset-level label source instead.
"""

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .actions import ActionLabel
from .core import EventHistogram
from .errors import (
    ChecksumMismatch,
    DimMismatch,
    ManifestBlobDisagreement,
    TooFewEpisodes,
    TruncatedBlob,
)
from .geometry import ImageBuffer

FORMAT_VERSION = 1
MANIFEST_FILE = "manifest.json"
SAMPLES_FILE = "samples.bin"

_FIXED = struct.Struct("<IQffB")

TRAIN, VAL, TEST = "TRAIN", "VAL", "TEST"


@dataclass
class DatasetManifest:
    height: int
    width: int
    rgb_included: bool
    episode: dict = field(default_factory=dict)
    split: str = TRAIN
    label_source: str = "ODOMETRY"
    sample_count: int = 0
    blob_crc32: int = 0
    format_version: int = FORMAT_VERSION

    def record_size(self):
        n = _FIXED.size + 2 * 2 * self.height * self.width
        if self.rgb_included:
            n += 3 * self.height * self.width
        return n + 4  # trailing crc32

    def to_json_dict(self):
        return {
            "format_version": self.format_version,
            "episode": self.episode,
            "dims": {"height": self.height, "width": self.width, "hist_channels": 2},
            "rgb_included": self.rgb_included,
            "split": self.split,
            "label_source": self.label_source,
            "sample_count": self.sample_count,
            "checksums": {SAMPLES_FILE: self.blob_crc32},
        }

    @classmethod
    def from_json_dict(cls, d):
        return cls(
            height=int(d["dims"]["height"]),
            width=int(d["dims"]["width"]),
            rgb_included=bool(d["rgb_included"]),
            episode=dict(d.get("episode", {})),
            split=d.get("split", TRAIN),
            label_source=d.get("label_source", "ODOMETRY"),
            sample_count=int(d["sample_count"]),
            blob_crc32=int(d["checksums"][SAMPLES_FILE]),
            format_version=int(d["format_version"]),
        )


@dataclass
class SampleTuple:
    """One synchronized (histogram, optional rgb, action) record.

    Equality covers the persisted fields only; the action's n_samples and
    source are aggregation-time metadata that the record layout drops.
    """

    frame_index: int
    t_evt: int
    histogram: EventHistogram
    action: ActionLabel
    rgb: ImageBuffer | None = None

    def __eq__(self, other):
        if not isinstance(other, SampleTuple):
            return NotImplemented
        return (
            self.frame_index == other.frame_index
            and self.t_evt == other.t_evt
            and self.histogram == other.histogram
            and np.float32(self.action.v) == np.float32(other.action.v)
            and np.float32(self.action.w) == np.float32(other.action.w)
            and self.action.held == other.action.held
            and self.rgb == other.rgb
        )


def _encode_record(sample, manifest):
    hist = sample.histogram
    if hist.height != manifest.height or hist.width != manifest.width:
        raise DimMismatch(
            f"histogram {hist.width}x{hist.height} does not match manifest "
            f"{manifest.width}x{manifest.height}"
        )
    if manifest.rgb_included != (sample.rgb is not None):
        raise DimMismatch("rgb presence disagrees with manifest.rgb_included")
    parts = [
        _FIXED.pack(
            sample.frame_index,
            sample.t_evt,
            np.float32(sample.action.v),
            np.float32(sample.action.w),
            1 if sample.action.held else 0,
        ),
        np.ascontiguousarray(hist.counts, "<u2").tobytes(),
    ]
    if sample.rgb is not None:
        if (
            sample.rgb.height != manifest.height
            or sample.rgb.width != manifest.width
            or sample.rgb.channels != 3
        ):
            raise DimMismatch("rgb buffer does not match manifest dims")
        parts.append(sample.rgb.pixels.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def write_dataset(samples, manifest, out_dir):
    """Stream samples into out_dir/samples.bin and finalize the manifest.

    Returns the number of blob bytes written. The writer owns sample_count
    and the blob checksum; whatever the caller preset is overwritten.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    blob_crc = 0
    count = 0
    written = 0
    with open(out / SAMPLES_FILE, "wb") as fh:
        for sample in samples:
            rec = _encode_record(sample, manifest)
            fh.write(rec)
            blob_crc = zlib.crc32(rec, blob_crc)
            count += 1
            written += len(rec)
    manifest.sample_count = count
    manifest.blob_crc32 = blob_crc
    (out / MANIFEST_FILE).write_text(
        json.dumps(manifest.to_json_dict(), sort_keys=True, indent=2) + "\n"
    )
    return written


def read_manifest(dataset_dir):
    return DatasetManifest.from_json_dict(
        json.loads((Path(dataset_dir) / MANIFEST_FILE).read_text())
    )


def _decode_record(body, manifest, index):
    fi, t_evt, v, w, held = _FIXED.unpack_from(body, 0)
    off = _FIXED.size
    n_hist = 2 * manifest.height * manifest.width
    counts = (
        np.frombuffer(body, "<u2", count=n_hist, offset=off)
        .reshape(2, manifest.height, manifest.width)
        .copy()
    )
    off += 2 * n_hist
    rgb = None
    if manifest.rgb_included:
        n_rgb = 3 * manifest.height * manifest.width
        pixels = (
            np.frombuffer(body, np.uint8, count=n_rgb, offset=off)
            .reshape(manifest.height, manifest.width, 3)
            .copy()
        )
        rgb = ImageBuffer(
            width=manifest.width, height=manifest.height, channels=3, pixels=pixels
        )
    hist = EventHistogram(
        width=manifest.width, height=manifest.height, counts=counts
    )
    action = ActionLabel(
        frame_index=fi,
        v=float(v),
        w=float(w),
        n_samples=0,  # not persisted in the record layout
        source=manifest.label_source,
        held=bool(held),
    )
    return SampleTuple(
        frame_index=fi, t_evt=t_evt, histogram=hist, action=action, rgb=rgb
    )


def read_dataset(dataset_dir):
    """Return (manifest, lazy record iterator) with CRC checks on access."""
    d = Path(dataset_dir)
    manifest = read_manifest(d)
    blob_path = d / SAMPLES_FILE
    size = blob_path.stat().st_size
    rec_size = manifest.record_size()
    if size % rec_size:
        raise TruncatedBlob(
            f"blob size {size} is not a multiple of the {rec_size}-byte record"
        )
    if size // rec_size != manifest.sample_count:
        raise ManifestBlobDisagreement(
            f"manifest declares {manifest.sample_count} records, blob holds "
            f"{size // rec_size}"
        )

    def _iterate():
        blob_crc = 0
        with open(blob_path, "rb") as fh:
            for index in range(manifest.sample_count):
                rec = fh.read(rec_size)
                if len(rec) != rec_size:
                    raise TruncatedBlob(f"record {index} truncated")
                body, (crc_stored,) = rec[:-4], struct.unpack("<I", rec[-4:])
                if zlib.crc32(body) != crc_stored:
                    raise ChecksumMismatch(
                        f"record {index} failed its CRC check", record_index=index
                    )
                blob_crc = zlib.crc32(rec, blob_crc)
                yield _decode_record(body, manifest, index)
        if blob_crc != manifest.blob_crc32:
            raise ManifestBlobDisagreement("blob-level CRC does not match manifest")

    return manifest, _iterate()


def read_all(dataset_dir):
    manifest, records = read_dataset(dataset_dir)
    return manifest, list(records)


def assign_splits(n_episodes, ratios=(0.8, 0.1, 0.1), seed=0):
    """Whole-episode split assignment; every split gets at least one episode."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    if n_episodes < 3:
        raise TooFewEpisodes(f"{n_episodes} episodes cannot populate 3 splits")
    counts = [int(np.floor(r * n_episodes)) for r in ratios]
    remainders = [r * n_episodes - c for r, c in zip(ratios, counts)]
    while sum(counts) < n_episodes:
        i = int(np.argmax(remainders))
        counts[i] += 1
        remainders[i] = -1.0
    for i in range(3):
        while counts[i] == 0:
            j = int(np.argmax(counts))
            counts[j] -= 1
            counts[i] += 1
    order = np.random.default_rng(seed).permutation(n_episodes)
    names = [TRAIN, VAL, TEST]
    assignment = [None] * n_episodes
    pos = 0
    for name, cnt in zip(names, counts):
        for ep in order[pos : pos + cnt]:
            assignment[int(ep)] = name
        pos += cnt
    return assignment
