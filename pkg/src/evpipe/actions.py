"""Per-window action label reconstruction from twist samples.

Labels are the arithmetic mean of all twists in each synchronization window
(t_{i-1}, t_i]. Windows with no samples carry the previous label forward
with held=True so the sequence keeps one label per frame and the hold is
auditable downstream.
"""

from dataclasses import dataclass

import numpy as np

from .core import DropReport, check_frames_monotonic
from .errors import LengthMismatch, NonMonotonicInput


@dataclass
class ActionLabel:
    frame_index: int
    v: float
    w: float
    n_samples: int
    source: str
    held: bool


@dataclass
class SourceDiscrepancy:
    """Per-dimension disagreement between command- and odometry-derived labels."""

    v_mae: float
    w_mae: float
    v_max: float
    w_max: float
    n: int

    def to_json_dict(self):
        return {
            "v_mae": self.v_mae,
            "w_mae": self.w_mae,
            "v_max": self.v_max,
            "w_max": self.w_max,
            "n": self.n,
        }


def aggregate_actions(twists, frames_evt_clock, t0):
    """Mean (v, w) per window; zero-order hold where a window has no samples.

    Returns (labels, DropReport) where the report counts twists outside
    (t0, t_N]. The first window falls back to (0, 0) when empty.
    """
    check_frames_monotonic(frames_evt_clock)
    ts = np.asarray([tw.t for tw in twists], np.int64)
    if ts.size > 1 and (np.diff(ts) < 0).any():
        raise NonMonotonicInput("twist samples must be time-ordered")
    vs = np.asarray([tw.v for tw in twists], np.float64)
    ws = np.asarray([tw.w for tw in twists], np.float64)
    source = twists[0].source if twists else "ODOMETRY"

    boundaries = np.concatenate(
        ([t0], np.asarray([f.t for f in frames_evt_clock], np.int64))
    )
    positions = np.searchsorted(ts, boundaries, side="right")

    labels = []
    prev_v, prev_w = 0.0, 0.0
    for i, frame in enumerate(frames_evt_clock):
        lo, hi = positions[i], positions[i + 1]
        n = int(hi - lo)
        if n:
            v = float(vs[lo:hi].mean())
            w = float(ws[lo:hi].mean())
            held = False
            prev_v, prev_w = v, w
        else:
            v, w = prev_v, prev_w
            held = True
        labels.append(
            ActionLabel(
                frame_index=frame.index, v=v, w=w, n_samples=n, source=source, held=held
            )
        )
    report = DropReport(
        dropped_before=int(positions[0]), dropped_after=int(ts.size - positions[-1])
    )
    return labels, report


def compare_sources(cmd_labels, odom_labels):
    """QA discrepancy report between two aligned label sequences."""
    if len(cmd_labels) != len(odom_labels):
        raise LengthMismatch(
            f"label counts differ: {len(cmd_labels)} vs {len(odom_labels)}"
        )
    for a, b in zip(cmd_labels, odom_labels):
        if a.frame_index != b.frame_index:
            raise LengthMismatch(
                f"frame index mismatch: {a.frame_index} vs {b.frame_index}"
            )
    dv = np.asarray([abs(a.v - b.v) for a, b in zip(cmd_labels, odom_labels)])
    dw = np.asarray([abs(a.w - b.w) for a, b in zip(cmd_labels, odom_labels)])
    return SourceDiscrepancy(
        v_mae=float(dv.mean()),
        w_mae=float(dw.mean()),
        v_max=float(dv.max()),
        w_max=float(dw.max()),
        n=len(cmd_labels),
    )
