"""Deterministic synthetic episode generator.

A 2D person-following scene: a textured target sprite moves along a waypoint
path over a wrap-around textured panorama; a differential-drive robot with a
first-order command lag pursues it. Brightness is rendered in the log domain
at a sub-frame step and fed through a contrast-threshold event model; frame
pulses inject trigger markers; commands and odometry are sampled on their
own clocks. Everything derives from one seed, so regenerating a config is
byte-identical.
"""

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import ingest
from ._kernels import contrast_events
from .core import EVENT_DTYPE, EventStream, FrameRecord, concat_time_sorted, make_events
from .errors import ConfigInvalid
from .geometry import Homography, ImageBuffer, homography_to_json, write_ppm

NORMAL = "normal"
LOW = "low"

LOW_LIGHT_SCALE = 0.1

BUILTIN_PATHS = {
    "P1": [(2.5, 0.0), (6.0, 0.8), (10.0, -0.8), (14.0, 0.0)],
    "P2": [(2.5, 0.0), (5.0, 1.5), (8.0, -1.5), (11.0, 1.5), (14.0, 0.0)],
    "P3": [(2.5, 0.0), (5.0, 2.0), (8.0, 2.5), (10.0, 0.0), (8.0, -2.5), (5.0, -2.0), (2.5, 0.0)],
}


@dataclass
class SceneConfig:
    seed: int = 0
    duration_s: float = 10.0
    frame_rate_hz: float = 30.0
    sensor_width: int = 1280
    sensor_height: int = 720
    path_name: str = "P1"
    waypoints: list | None = None  # overrides the builtin path geometry
    target_speed: float = 0.5
    contrast_threshold: float = 0.2
    lighting: str = NORMAL
    odom_rate_hz: float = 50.0
    odom_noise_sigma: tuple = (0.01, 0.02)
    cmd_rate_hz: float = 20.0
    sim_substeps: int = 3
    plant_lag_s: float = 0.15
    clock_alpha: float = 1.0
    clock_beta_us: float = 0.0
    trigger_jitter_sigma_us: float = 0.0
    noise_rate_hz: float = 50000.0  # background-activity events/s in low light
    write_rgb: bool = False
    rgb_height_pad: int = 152
    t0_us: int = 1_000_000
    map_id: str = "map0"
    subject_id: str = "s0"
    pursuit_kp: float = 1.5
    pursuit_kv: float = 0.8
    v_max: float = 0.8
    w_max: float = 1.2
    desired_range_m: float = 2.0
    fov_deg: float = 90.0

    def validate(self):
        if self.duration_s <= 0:
            raise ConfigInvalid("duration_s must be positive")
        if self.frame_rate_hz <= 0:
            raise ConfigInvalid("frame_rate_hz must be positive")
        if self.contrast_threshold <= 0:
            raise ConfigInvalid("contrast_threshold must be positive")
        if self.sim_substeps < 1:
            raise ConfigInvalid("sim_substeps must be >= 1")
        if self.lighting not in (NORMAL, LOW):
            raise ConfigInvalid(f"lighting must be '{NORMAL}' or '{LOW}'")
        if self.waypoints is None and self.path_name not in BUILTIN_PATHS:
            raise ConfigInvalid(f"unknown path {self.path_name!r}")
        if self.sensor_width < 8 or self.sensor_height < 8:
            raise ConfigInvalid("sensor dimensions too small")
        if self.t0_us <= self.clock_beta_us:
            raise ConfigInvalid("t0_us must exceed clock_beta_us")
        return self

    def to_json_dict(self):
        d = asdict(self)
        d["odom_noise_sigma"] = list(self.odom_noise_sigma)
        return d

    @classmethod
    def from_json_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.odom_noise_sigma = tuple(cfg.odom_noise_sigma)
        if cfg.waypoints is not None:
            cfg.waypoints = [tuple(p) for p in cfg.waypoints]
        return cfg.validate()

    @classmethod
    def from_json_file(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read scene config: {exc}") from None
        return cls.from_json_dict(data)


def _bilinear_grid(tex, ty, tx, wrap_x=False):
    """Sample a 2D float texture at float coordinate grids."""
    h, w = tex.shape
    y0 = np.floor(ty).astype(np.int64)
    x0 = np.floor(tx).astype(np.int64)
    fy = ty - y0
    fx = tx - x0
    y0 = np.clip(y0, 0, h - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    if wrap_x:
        x0 = x0 % w
        x1 = (x0 + 1) % w
    else:
        x0 = np.clip(x0, 0, w - 1)
        x1 = np.minimum(x0 + 1, w - 1)
    top = tex[y0, x0] * (1 - fx) + tex[y0, x1] * fx
    bot = tex[y1, x0] * (1 - fx) + tex[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def _smooth_texture(rng, height, width, lo, hi, cell_px=96, wrap_x=False):
    """Low-frequency random field: coarse uniform grid upsampled separably."""
    ch = max(2, height // cell_px)
    cw = max(2, width // cell_px)
    coarse = rng.uniform(lo, hi, (ch, cw))
    if wrap_x:
        tx = np.arange(width) * (cw / width)
        x0 = np.floor(tx).astype(np.int64) % cw
        x1 = (x0 + 1) % cw
    else:
        tx = np.linspace(0, cw - 1, width)
        x0 = np.clip(np.floor(tx).astype(np.int64), 0, cw - 1)
        x1 = np.minimum(x0 + 1, cw - 1)
    fx = tx - np.floor(tx)
    rows = coarse[:, x0] * (1 - fx) + coarse[:, x1] * fx
    ty = np.linspace(0, ch - 1, height)
    y0 = np.clip(np.floor(ty).astype(np.int64), 0, ch - 1)
    y1 = np.minimum(y0 + 1, ch - 1)
    fy = (ty - y0)[:, None]
    return (rows[y0] * (1 - fy) + rows[y1] * fy).astype(np.float32)


class _Polyline:
    """Arc-length parametrized waypoint path; closed paths loop, open ones stop."""

    def __init__(self, waypoints):
        pts = np.asarray(waypoints, np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ConfigInvalid("waypoints must be (x, y) pairs")
        self.pts = pts
        if pts.shape[0] > 1:
            seg = np.diff(pts, axis=0)
            self.seg_len = np.sqrt((seg**2).sum(axis=1))
            self.cum = np.concatenate(([0.0], np.cumsum(self.seg_len)))
            self.total = float(self.cum[-1])
            self.closed = bool(np.allclose(pts[0], pts[-1]))
        else:
            self.total = 0.0
            self.closed = False

    def point_at(self, s):
        if self.total == 0.0:
            return float(self.pts[0, 0]), float(self.pts[0, 1])
        s = s % self.total if self.closed else min(s, self.total)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        i = min(i, len(self.seg_len) - 1)
        f = (s - self.cum[i]) / self.seg_len[i] if self.seg_len[i] > 0 else 0.0
        p = self.pts[i] + f * (self.pts[i + 1] - self.pts[i])
        return float(p[0]), float(p[1])


def _wrap_angle(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


class _Scene:
    """Log-domain renderer for the panorama + sprite composition."""

    SPRITE_BASE_H_PX = 360.0  # apparent sprite height at 1 m range

    def __init__(self, cfg, rng):
        self.cfg = cfg
        self.fov = math.radians(cfg.fov_deg)
        self.pan_width = int(round(cfg.sensor_width * 2 * math.pi / self.fov))
        self.pad = cfg.rgb_height_pad
        pan_height = cfg.sensor_height + 2 * self.pad
        cell = max(8, cfg.sensor_width // 14)
        intensity = _smooth_texture(
            rng, pan_height, self.pan_width, 0.2, 0.75, cell_px=cell, wrap_x=True
        )
        self.pan_log = np.log(intensity)
        self.pan_lin = intensity
        self.sprite_lin = _smooth_texture(rng, 64, 32, 0.55, 0.95, cell_px=12)
        self.sprite_log = np.log(self.sprite_lin)
        self.low = cfg.lighting == LOW
        self._cols = np.arange(cfg.sensor_width)

    def _view(self, pan, theta):
        c0 = (theta / (2 * math.pi)) * self.pan_width
        i0 = math.floor(c0)
        f = c0 - i0
        idx = (i0 + self._cols) % self.pan_width
        a = np.take(pan, idx, axis=1)
        b = np.take(pan, (idx + 1) % self.pan_width, axis=1)
        return a * (1 - f) + b * f

    def _sprite_region(self, bearing, range_m):
        w = self.cfg.sensor_width
        h = self.cfg.sensor_height
        h_px = self.SPRITE_BASE_H_PX / max(range_m, 0.5)
        h_px = min(h_px, h * 0.9)
        if h_px < 4:
            return None
        w_px = h_px * 0.45
        u_c = (w / 2) * (1 - bearing / (self.fov / 2))
        r_c = h / 2
        c_lo = int(math.floor(u_c - w_px / 2))
        c_hi = int(math.ceil(u_c + w_px / 2))
        r_lo = int(math.floor(r_c - h_px / 2))
        r_hi = int(math.ceil(r_c + h_px / 2))
        c_lo_c, c_hi_c = max(c_lo, 0), min(c_hi, w)
        r_lo_c, r_hi_c = max(r_lo, 0), min(r_hi, h)
        if c_lo_c >= c_hi_c or r_lo_c >= r_hi_c:
            return None
        rr, cc = np.meshgrid(
            np.arange(r_lo_c, r_hi_c), np.arange(c_lo_c, c_hi_c), indexing="ij"
        )
        th, tw = self.sprite_log.shape
        ty = (rr - (r_c - h_px / 2)) / h_px * (th - 1)
        tx = (cc - (u_c - w_px / 2)) / w_px * (tw - 1)
        return (r_lo_c, r_hi_c, c_lo_c, c_hi_c, ty, tx)

    def render_log_view(self, theta, bearing, range_m):
        """Event-camera view (sensor rows only) in log intensity."""
        view = self._view(self.pan_log[self.pad : self.pad + self.cfg.sensor_height], theta)
        region = self._sprite_region(bearing, range_m)
        if region is not None:
            r0, r1, c0, c1, ty, tx = region
            view[r0:r1, c0:c1] = _bilinear_grid(self.sprite_log, ty, tx)
        if self.low:
            view += math.log(LOW_LIGHT_SCALE)
        return view

    def render_rgb(self, theta, bearing, range_m):
        """Full-height linear-intensity view quantized to 8-bit grayscale RGB."""
        view = self._view(self.pan_lin, theta)
        region = self._sprite_region(bearing, range_m)
        if region is not None:
            r0, r1, c0, c1, ty, tx = region
            view[r0 + self.pad : r1 + self.pad, c0:c1] = _bilinear_grid(
                self.sprite_lin, ty, tx
            )
        if self.low:
            view = view * LOW_LIGHT_SCALE
        gray = np.clip(np.rint(view * 255.0), 0, 255).astype(np.uint8)
        return np.repeat(gray[:, :, None], 3, axis=2)


@dataclass
class _RobotState:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    v: float = 0.0
    w: float = 0.0


def _pursuit_command(cfg, state, target_xy):
    dx, dy = target_xy[0] - state.x, target_xy[1] - state.y
    rng_m = math.hypot(dx, dy)
    bearing = _wrap_angle(math.atan2(dy, dx) - state.theta)
    # bearing_error is how far the heading leads the target (clockwise positive)
    bearing_error = -bearing
    w_cmd = -cfg.pursuit_kp * bearing_error
    w_cmd = min(max(w_cmd, -cfg.w_max), cfg.w_max)
    v_cmd = min(max(cfg.pursuit_kv * (rng_m - cfg.desired_range_m), 0.0), cfg.v_max)
    return v_cmd, w_cmd, bearing, rng_m


def _advance(state, cfg, v_cmd, w_cmd, dt_s):
    if dt_s <= 0:
        return
    if cfg.plant_lag_s > 0:
        lam = 1.0 - math.exp(-dt_s / cfg.plant_lag_s)
    else:
        lam = 1.0
    state.v += (v_cmd - state.v) * lam
    state.w += (w_cmd - state.w) * lam
    state.x += state.v * math.cos(state.theta) * dt_s
    state.y += state.v * math.sin(state.theta) * dt_s
    state.theta = _wrap_angle(state.theta + state.w * dt_s)


def generate_episode(cfg, out_dir=None):
    """Simulate one episode; optionally write it in the ingest formats.

    Returns (EpisodeBundle, ground_truth rows, summary dict). Ground truth
    rows are (frame_index, bearing_rad, expert_v, expert_w).
    """
    cfg.validate()
    seeds = np.random.SeedSequence(cfg.seed).spawn(4)
    rng_tex = np.random.default_rng(seeds[0])
    rng_noise = np.random.default_rng(seeds[1])
    rng_odom = np.random.default_rng(seeds[2])
    rng_jitter = np.random.default_rng(seeds[3])

    scene = _Scene(cfg, rng_tex)
    path = _Polyline(cfg.waypoints if cfg.waypoints is not None else BUILTIN_PATHS[cfg.path_name])
    state = _RobotState()
    c = cfg.contrast_threshold

    n_frames = int(cfg.duration_s * cfg.frame_rate_hz)
    if n_frames < 1:
        raise ConfigInvalid("duration too short for a single frame")
    period_us = 1e6 / cfg.frame_rate_hz
    pulses = cfg.t0_us + np.rint(np.arange(n_frames + 1) * period_us).astype(np.int64)

    def to_event_clock(t_host):
        return (np.asarray(t_host, np.float64) - cfg.clock_beta_us) / cfg.clock_alpha

    cmd_period_us = 1e6 / cfg.cmd_rate_hz
    odom_period_us = 1e6 / cfg.odom_rate_hz

    sim_t = float(pulses[0])
    target_s = 0.0
    v_cmd, w_cmd, bearing, rng_m = _pursuit_command(cfg, state, path.point_at(0.0))
    cmd_rows = [(int(pulses[0]), v_cmd, w_cmd)]
    odom_rows = []
    next_cmd_t = float(pulses[0]) + cmd_period_us
    next_odom_t = float(pulses[0])
    gt_rows = []

    l_prev = scene.render_log_view(state.theta, bearing, rng_m)
    l_ref = l_prev.copy()

    event_chunks = []
    frames = []
    frame_images = []
    n_noise = 0

    def advance_to(t_target_us):
        nonlocal sim_t, target_s, next_odom_t
        while next_odom_t <= t_target_us:
            dt = (next_odom_t - sim_t) * 1e-6
            _advance(state, cfg, v_cmd, w_cmd, dt)
            target_s += cfg.target_speed * dt
            sim_t = next_odom_t
            nv = float(state.v + rng_odom.normal(0.0, cfg.odom_noise_sigma[0]))
            nw = float(state.w + rng_odom.normal(0.0, cfg.odom_noise_sigma[1]))
            odom_rows.append((int(round(sim_t)), nv, nw))
            next_odom_t += odom_period_us
        dt = (t_target_us - sim_t) * 1e-6
        _advance(state, cfg, v_cmd, w_cmd, dt)
        target_s += cfg.target_speed * dt
        sim_t = t_target_us

    for k in range(n_frames):
        t_lo, t_hi = float(pulses[k]), float(pulses[k + 1])
        seg = t_hi - t_lo
        for j in range(1, cfg.sim_substeps + 1):
            tau = t_lo + seg * j / cfg.sim_substeps
            while next_cmd_t <= tau:
                advance_to(next_cmd_t)
                v_cmd, w_cmd, bearing, rng_m = _pursuit_command(
                    cfg, state, path.point_at(target_s)
                )
                cmd_rows.append((int(round(next_cmd_t)), v_cmd, w_cmd))
                next_cmd_t += cmd_period_us
            tau_prev = sim_t
            advance_to(tau)
            tx, ty = path.point_at(target_s)
            bearing = _wrap_angle(math.atan2(ty - state.y, tx - state.x) - state.theta)
            rng_m = math.hypot(tx - state.x, ty - state.y)
            l_new = scene.render_log_view(state.theta, bearing, rng_m)
            ts, xs, ys, ps = contrast_events(l_new, l_prev, l_ref, c, tau_prev, tau)
            if scene.low and cfg.noise_rate_hz > 0:
                n = rng_noise.poisson(cfg.noise_rate_hz * (tau - tau_prev) * 1e-6)
                if n:
                    n_noise += n
                    ts = np.concatenate([ts, tau_prev + rng_noise.random(n) * (tau - tau_prev)])
                    xs = np.concatenate([xs, rng_noise.integers(0, cfg.sensor_width, n).astype(np.uint16)])
                    ys = np.concatenate([ys, rng_noise.integers(0, cfg.sensor_height, n).astype(np.uint16)])
                    ps = np.concatenate([ps, rng_noise.integers(0, 2, n).astype(np.uint8)])
            if ts.size:
                order = np.argsort(ts, kind="stable")
                t_evt = np.rint(to_event_clock(ts[order])).astype(np.int64)
                event_chunks.append(
                    make_events(t_evt.astype(np.uint64), xs[order], ys[order], ps[order])
                )
            l_prev = l_new

        frame_index = k + 1
        ref = f"frames/frame_{frame_index:06d}.ppm"
        frames.append(FrameRecord(index=frame_index, t=int(pulses[k + 1]), image_ref=ref))
        gt_rows.append((frame_index, bearing, v_cmd, w_cmd))
        if cfg.write_rgb:
            frame_images.append((ref, scene.render_rgb(state.theta, bearing, rng_m)))

    rising_evt = to_event_clock(pulses.astype(np.float64))
    falling_evt = to_event_clock(pulses.astype(np.float64) + period_us / 2)
    if cfg.trigger_jitter_sigma_us > 0:
        rising_evt = rising_evt + rng_jitter.normal(0, cfg.trigger_jitter_sigma_us, rising_evt.size)
        falling_evt = falling_evt + rng_jitter.normal(0, cfg.trigger_jitter_sigma_us, falling_evt.size)
    triggers = concat_time_sorted(
        make_events(np.rint(rising_evt).astype(np.uint64), is_trigger=1, trigger_rising=1),
        make_events(np.rint(falling_evt).astype(np.uint64), is_trigger=1, trigger_rising=0),
    )

    all_events = concat_time_sorted(
        *(event_chunks or [np.empty(0, EVENT_DTYPE)]), triggers
    )
    stream = EventStream(
        sensor_width=cfg.sensor_width, sensor_height=cfg.sensor_height, events=all_events
    )

    twists_cmd = [
        ingest.TwistSample(t=t, v=v, w=w, source=ingest.COMMAND) for t, v, w in cmd_rows
    ]
    twists_odom = [
        ingest.TwistSample(t=t, v=v, w=w, source=ingest.ODOMETRY) for t, v, w in odom_rows
    ]
    meta = {
        "map_id": cfg.map_id,
        "path": cfg.path_name,
        "lighting": cfg.lighting,
        "subject_id": cfg.subject_id,
    }
    bundle = ingest.EpisodeBundle(
        events=stream,
        frames=frames,
        twists_cmd=twists_cmd,
        twists_odom=twists_odom,
        meta=meta,
    )
    summary = {
        "frames": len(frames),
        "cd_events": int(all_events.size - triggers.size),
        "noise_events": int(n_noise),
        "trigger_events": int(triggers.size),
        "cmd_samples": len(twists_cmd),
        "odom_samples": len(twists_odom),
    }

    if out_dir is not None:
        _write_episode(cfg, bundle, gt_rows, frame_images, Path(out_dir))
    return bundle, gt_rows, summary


def _write_episode(cfg, bundle, gt_rows, frame_images, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    ingest.write_events(bundle.events, out_dir / ingest.EVENTS_FILE)
    ingest.write_frames(bundle.frames, out_dir / ingest.FRAMES_FILE)
    ingest.write_twists(bundle.twists_cmd, out_dir / ingest.TWISTS_CMD_FILE)
    ingest.write_twists(bundle.twists_odom, out_dir / ingest.TWISTS_ODOM_FILE)
    ingest.write_episode_meta(bundle.meta, out_dir / ingest.META_FILE)
    lines = ["frame,bearing_rad,expert_v,expert_w"]
    lines += [f"{f},{float(b)!r},{float(v)!r},{float(w)!r}" for f, b, v, w in gt_rows]
    (out_dir / ingest.GROUND_TRUTH_FILE).write_text("\n".join(lines) + "\n")
    # true RGB -> event mapping: the event view is the vertically centered crop
    homography_to_json(
        Homography(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, -float(cfg.rgb_height_pad)], [0.0, 0.0, 1.0]])),
        out_dir / "homography.json",
    )
    if frame_images:
        (out_dir / "frames").mkdir(exist_ok=True)
        for ref, rgb in frame_images:
            img = ImageBuffer(
                width=rgb.shape[1], height=rgb.shape[0], channels=3, pixels=rgb
            )
            write_ppm(img, out_dir / ref)


def read_ground_truth(path):
    """Load ground_truth.csv rows as (frame, bearing, v, w) tuples."""
    rows = []
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "frame,bearing_rad,expert_v,expert_w":
        raise ConfigInvalid(f"bad ground truth header in {path}")
    for line in lines[1:]:
        if not line:
            continue
        f, b, v, w = line.split(",")
        rows.append((int(f), float(b), float(v), float(w)))
    return rows
