"""Affine clock recovery between the event-camera and RGB-frame clocks.

The shared hardware pulse shows up twice: as trigger markers in the event
stream (event clock) and as frame timestamps (RGB clock). Matching the two
pulse trains gives an affine model t_rgb ~= alpha * t_evt + beta.
"""

from dataclasses import dataclass

import numpy as np

from .core import FrameRecord
from .errors import InsufficientPulses, NoStableMatch

MIN_PULSES = 10
REJECT_SIGMA = 5.0

RISING = "RISING"
FALLING = "FALLING"

# plausible oscillator drift band; a fit outside it is treated as unstable
ALPHA_MIN = 0.999
ALPHA_MAX = 1.001


@dataclass
class ClockModel:
    alpha: float
    beta_us: float
    residual_rms_us: float
    matched_pulses: int
    rejected_pulses: int = 0

    def to_json_dict(self):
        return {
            "alpha": self.alpha,
            "beta_us": self.beta_us,
            "residual_rms_us": self.residual_rms_us,
            "matched_pulses": self.matched_pulses,
            "rejected_pulses": self.rejected_pulses,
        }

    @classmethod
    def from_json_dict(cls, d):
        return cls(
            alpha=float(d["alpha"]),
            beta_us=float(d["beta_us"]),
            residual_rms_us=float(d["residual_rms_us"]),
            matched_pulses=int(d["matched_pulses"]),
            rejected_pulses=int(d.get("rejected_pulses", 0)),
        )


def identity_model():
    return ClockModel(alpha=1.0, beta_us=0.0, residual_rms_us=0.0, matched_pulses=0)


def extract_trigger_times(stream, edge=RISING):
    """Timestamps of trigger markers with the requested edge, in order."""
    if edge not in (RISING, FALLING):
        raise ValueError(f"edge must be RISING or FALLING, got {edge!r}")
    trig = stream.triggers()
    want = 1 if edge == RISING else 0
    return trig["t"][trig["trigger_rising"] == want].astype(np.int64)


def _offset_for_lag(evt, rgb, k):
    a_lo, b_lo = max(0, -k), max(0, k)
    n = min(evt.size - a_lo, rgb.size - b_lo)
    return float(np.median(rgb[b_lo : b_lo + n] - evt[a_lo : a_lo + n]))


def _coarse_lag(evt, rgb, min_overlap=9):
    """Best pairing offset k (evt[i] <-> rgb[i+k]) from interval sequences.

    A perfectly periodic train scores every lag identically, so near-tied
    lags are broken by the smallest absolute clock offset: on a hardware-
    synchronized rig the true offset is below half a pulse period.
    """
    da, db = np.diff(evt), np.diff(rgb)
    # score only lags keeping at least half the shorter train in overlap:
    # tiny overlaps make the median noisy enough to shadow the true lag
    need = max(min_overlap, min(da.size, db.size) // 2)
    lags, scores = [], []
    for k in range(-(db.size - need), da.size - need + 1):
        a_lo, b_lo = max(0, -k), max(0, k)
        n = min(da.size - a_lo, db.size - b_lo)
        if n < need:
            continue
        diff = da[a_lo : a_lo + n] - db[b_lo : b_lo + n]
        lags.append(k)
        # median, not mean: a recording dropout yields one huge interval that
        # must not poison the true lag's score
        scores.append(float(np.median(diff * diff)))
    if not lags:
        return 0
    scores = np.asarray(scores)
    threshold = max(4.0 * scores.min(), scores.min() + 4.0)
    candidates = [k for k, s in zip(lags, scores) if s <= threshold]
    return min(candidates, key=lambda k: abs(_offset_for_lag(evt, rgb, k)))


def _lsq_affine(x, y):
    """Least squares y ~= alpha*x + beta, mean-centered for conditioning."""
    xm, ym = x.mean(), y.mean()
    xc, yc = x - xm, y - ym
    denom = float(np.dot(xc, xc))
    alpha = float(np.dot(xc, yc)) / denom
    beta = float(ym - alpha * xm)
    resid = y - (alpha * x + beta)
    rms = float(np.sqrt(np.mean(resid * resid)))
    return alpha, beta, rms, resid


def fit_clock_model(trigger_times_evt, frame_times_rgb):
    """Fit t_rgb ~= alpha * t_evt + beta from matched pulse trains.

    Coarse alignment via cross-correlation of inter-pulse intervals, then
    nearest-neighbor pairing, then a least-squares fit with one rejection
    pass at 5x the residual RMS.
    """
    evt = np.asarray(trigger_times_evt, np.float64)
    rgb = np.asarray(frame_times_rgb, np.float64)
    if evt.size < MIN_PULSES or rgb.size < MIN_PULSES:
        raise InsufficientPulses(
            f"need >= {MIN_PULSES} pulses on each side, got {evt.size}/{rgb.size}"
        )

    k = _coarse_lag(evt, rgb)
    offset0 = _offset_for_lag(evt, rgb, k)

    # nearest-neighbor pairing around the coarse offset
    period = float(np.median(np.diff(rgb)))
    predicted = evt + offset0
    j = np.searchsorted(rgb, predicted)
    j = np.clip(j, 1, rgb.size - 1)
    left_closer = (predicted - rgb[j - 1]) <= (rgb[j] - predicted)
    nearest = np.where(left_closer, j - 1, j)
    dist = np.abs(rgb[nearest] - predicted)
    keep = dist <= period / 2
    x, y = evt[keep], rgb[nearest[keep]]
    if x.size < MIN_PULSES:
        raise NoStableMatch(f"only {x.size} pulses paired")

    alpha, beta, rms, resid = _lsq_affine(x, y)
    rejected = 0
    if rms > 0:
        ok = np.abs(resid) <= REJECT_SIGMA * rms
        rejected = int(x.size - ok.sum())
        if rejected:
            x, y = x[ok], y[ok]
            if x.size < MIN_PULSES:
                raise NoStableMatch(f"only {x.size} pulses survive rejection")
            alpha, beta, rms, _ = _lsq_affine(x, y)

    if not (ALPHA_MIN < alpha < ALPHA_MAX):
        raise NoStableMatch(f"fitted drift {alpha} outside plausible range")
    return ClockModel(
        alpha=alpha,
        beta_us=beta,
        residual_rms_us=rms,
        matched_pulses=int(x.size),
        rejected_pulses=rejected,
    )


def map_timestamps(times_rgb, model):
    """Map RGB-clock microsecond timestamps onto the event clock."""
    t = np.asarray(times_rgb, np.float64)
    mapped = np.rint((t - model.beta_us) / model.alpha)
    return mapped.astype(np.int64)


def map_frames_to_event_clock(frames, model):
    mapped = map_timestamps([f.t for f in frames], model)
    return [
        FrameRecord(index=f.index, t=int(t), image_ref=f.image_ref)
        for f, t in zip(frames, mapped)
    ]


def map_twists_to_event_clock(twists, model):
    from .ingest import TwistSample

    mapped = map_timestamps([tw.t for tw in twists], model)
    return [
        TwistSample(t=int(t), v=tw.v, w=tw.w, source=tw.source)
        for tw, t in zip(twists, mapped)
    ]
