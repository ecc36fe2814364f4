"""Episode-to-container build orchestration used by the CLI."""

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import actions, container, core, geometry, ingest, sync
from .errors import ConfigInvalid, EvpipeError

CLOCK_MODEL_FILE = "clock_model.json"
DATASET_DIRNAME = "dataset"


@dataclass
class BuildSettings:
    episode_dir: str
    out_dir: str | None = None
    downsample_factor: int = 4
    rgb_included: bool = False
    homography: str = "homography.json"
    t0_policy: str | int = "auto"
    split: str = container.TRAIN
    label_source: str = ingest.ODOMETRY
    saturate: bool = True
    exposure_phase_offset_us: int = 0
    qa_report: str | None = None

    @classmethod
    def from_json_file(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read pipeline config: {exc}") from None
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigInvalid(f"unknown pipeline config keys: {sorted(unknown)}")
        if "episode_dir" not in data:
            raise ConfigInvalid("pipeline config requires episode_dir")
        return cls(**data)

    def resolved_out_dir(self):
        if self.out_dir is not None:
            return Path(self.out_dir)
        return Path(self.episode_dir) / DATASET_DIRNAME


class StageFailure(EvpipeError):
    """Wraps a stage name around the underlying error for exit-code mapping."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except EvpipeError as exc:
        raise StageFailure(name, exc) from exc
    except OSError as exc:
        raise StageFailure(name, exc) from exc


def write_clock_model(model, episode_dir):
    path = Path(episode_dir) / CLOCK_MODEL_FILE
    path.write_text(json.dumps(model.to_json_dict(), sort_keys=True, indent=2) + "\n")
    return path


def read_clock_model(episode_dir):
    path = Path(episode_dir) / CLOCK_MODEL_FILE
    if not path.exists():
        raise ConfigInvalid(f"missing {path}; run align first")
    return sync.ClockModel.from_json_dict(json.loads(path.read_text()))


def align_episode(episode_dir, edge=sync.RISING):
    """Fit the clock model for one episode directory and persist it."""
    d = Path(episode_dir)
    stream, _ = ingest.parse_events(d / ingest.EVENTS_FILE)
    frames = ingest.parse_frames(d / ingest.FRAMES_FILE)
    trigger_times = sync.extract_trigger_times(stream, edge)
    model = sync.fit_clock_model(trigger_times, [f.t for f in frames])
    write_clock_model(model, d)
    return model


def build_episode(settings):
    """Run windowing -> rasterize -> downsample -> labels (-> rgb) -> container.

    Returns a summary dict. Stage errors surface as StageFailure so the CLI
    can map each stage to a distinct exit code.
    """
    d = Path(settings.episode_dir)
    bundle = _stage("ingest", ingest.load_episode, d)
    model = _stage("clock", read_clock_model, d)

    frames = bundle.frames
    if settings.exposure_phase_offset_us:
        frames = [
            core.FrameRecord(f.index, f.t + settings.exposure_phase_offset_us, f.image_ref)
            for f in frames
        ]
    frames_evt = sync.map_frames_to_event_clock(frames, model)
    label_twists = (
        bundle.twists_odom
        if settings.label_source == ingest.ODOMETRY
        else bundle.twists_cmd
    )
    twists_evt = sync.map_twists_to_event_clock(label_twists, model)

    if settings.t0_policy == "auto":
        t0 = core.default_t0(frames_evt)
    else:
        t0 = int(settings.t0_policy)

    windows, drops = _stage("windowing", core.partition_windows, bundle.events, frames_evt, t0)
    labels, twist_drops = _stage("actions", actions.aggregate_actions, twists_evt, frames_evt, t0)

    qa = None
    if settings.qa_report and bundle.twists_cmd and bundle.twists_odom:
        cmd_evt = sync.map_twists_to_event_clock(bundle.twists_cmd, model)
        odom_evt = sync.map_twists_to_event_clock(bundle.twists_odom, model)
        cmd_labels, _ = actions.aggregate_actions(cmd_evt, frames_evt, t0)
        odom_labels, _ = actions.aggregate_actions(odom_evt, frames_evt, t0)
        qa = actions.compare_sources(cmd_labels, odom_labels)
        Path(settings.qa_report).write_text(
            json.dumps(qa.to_json_dict(), sort_keys=True, indent=2) + "\n"
        )

    factor = settings.downsample_factor
    if bundle.events.sensor_width % factor or bundle.events.sensor_height % factor:
        raise StageFailure(
            "rasterize",
            ConfigInvalid(f"factor {factor} does not divide the sensor dims"),
        )
    out_w = bundle.events.sensor_width // factor
    out_h = bundle.events.sensor_height // factor

    homog = None
    if settings.rgb_included:
        hpath = Path(settings.homography)
        if not hpath.is_absolute():
            hpath = d / hpath
        homog = _stage("rgb", geometry.homography_from_json, hpath)

    manifest = container.DatasetManifest(
        height=out_h,
        width=out_w,
        rgb_included=settings.rgb_included,
        episode=bundle.meta,
        split=settings.split,
        label_source=settings.label_source,
    )

    held_count = sum(1 for lb in labels if lb.held)

    def sample_iter():
        sensor_w = bundle.events.sensor_width
        sensor_h = bundle.events.sensor_height
        for window, frame, label in zip(windows, frames, labels):
            hist = _stage(
                "rasterize",
                core.rasterize_histogram,
                window,
                sensor_w,
                sensor_h,
                settings.saturate,
            )
            hist = core.downsample_histogram(hist, factor)
            rgb = None
            if settings.rgb_included:
                img = _stage("rgb", geometry.read_ppm, d / frame.image_ref)
                if img.channels == 1:
                    img = geometry.ImageBuffer(
                        width=img.width,
                        height=img.height,
                        channels=3,
                        pixels=img.pixels.repeat(3, axis=2),
                    )
                warped = _stage("rgb", geometry.warp_image, img, homog, sensor_w, sensor_h)
                rgb = geometry.resize_image(warped, out_w, out_h)
            yield container.SampleTuple(
                frame_index=window.frame_index,
                t_evt=window.t_end,
                histogram=hist,
                action=label,
                rgb=rgb,
            )

    out_dir = settings.resolved_out_dir()
    blob_bytes = _stage("container", container.write_dataset, sample_iter(), manifest, out_dir)

    summary = {
        "out_dir": str(out_dir),
        "samples": manifest.sample_count,
        "held_labels": held_count,
        "events_assigned": int(sum(w.events.size for w in windows)),
        "events_dropped": drops.dropped,
        "twists_dropped": twist_drops.dropped,
        "blob_bytes": blob_bytes,
    }
    if qa is not None:
        summary["qa"] = qa.to_json_dict()
    return summary
