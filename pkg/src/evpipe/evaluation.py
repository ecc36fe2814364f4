"""Action-prediction metrics and the deterministic centroid-PID reference.

Total MAE is the mean of the linear and angular MAE. Report values are
fixed to 4 decimals with decimal (half-up) rounding so printed tables match
hand-computed decimal arithmetic.
"""

import csv
import io
import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from .errors import EmptyInput, LengthMismatch, MissingPredictions


def format_metric(x):
    """4-decimal fixed-point string, rounding the shortest decimal half-up."""
    return str(Decimal(repr(float(x))).quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP))


@dataclass
class MaeReport:
    linear_mae: float
    angular_mae: float
    n: int
    total_mae: float = field(init=False)

    def __post_init__(self):
        self.total_mae = (self.linear_mae + self.angular_mae) / 2

    def to_json_dict(self):
        return {
            "linear_mae": self.linear_mae,
            "angular_mae": self.angular_mae,
            "total_mae": self.total_mae,
            "n": self.n,
        }


def mae(pred, truth):
    """Per-dimension mean absolute error between (v, w) sequences."""
    p = np.asarray(pred, np.float64)
    t = np.asarray(truth, np.float64)
    if p.shape != t.shape:
        raise LengthMismatch(f"shape mismatch {p.shape} vs {t.shape}")
    if p.size == 0:
        raise EmptyInput("empty prediction sequence")
    err = np.abs(p - t)
    return MaeReport(
        linear_mae=float(err[:, 0].mean()),
        angular_mae=float(err[:, 1].mean()),
        n=p.shape[0],
    )


@dataclass
class PidState:
    """Angular PID on the event-centroid bearing plus a cruise-speed rule."""

    k_p: float = 1.0
    k_i: float = 0.0
    k_d: float = 0.0
    v_ref: float = 0.5
    integral: float = 0.0
    prev_error: float = 0.0
    prev_command: tuple = (0.0, 0.0)
    integral_limit: float = 1.0
    activity_floor: int = 1


def centroid_pid_policy(hist, state, dt):
    """Steer toward the event-count centroid; hold on inactivity.

    Bearing error e = (centroid_x - W/2) / (W/2); a centroid right of center
    (e > 0) demands a clockwise (negative) angular command.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    total = hist.counts.sum(dtype=np.int64)
    if total < state.activity_floor:
        return state.prev_command
    col_mass = hist.counts.sum(axis=(0, 1), dtype=np.int64).astype(np.float64)
    centroid = float(np.dot(col_mass, np.arange(hist.width))) / float(total)
    # normalize around the column-index midpoint so that all mass in the
    # edge columns gives exactly |e| = 1 and mirror symmetry gives e = 0
    half = (hist.width - 1) / 2
    e = (centroid - half) / half
    state.integral = float(np.clip(state.integral + e * dt, -state.integral_limit, state.integral_limit))
    de = (e - state.prev_error) / dt
    state.prev_error = e
    w = -(state.k_p * e + state.k_i * state.integral + state.k_d * de)
    v = state.v_ref * max(0.0, 1.0 - abs(e))
    state.prev_command = (v, w)
    return v, w


def load_predictions_csv(source):
    """Read ``frame,v_pred,w_pred`` into {frame_index: (v, w)}."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["frame", "v_pred", "w_pred"]:
        raise MissingPredictions(f"bad predictions header: {header}")
    out = {}
    for row in reader:
        if not row:
            continue
        out[int(row[0])] = (float(row[1]), float(row[2]))
    return out


def write_predictions_csv(predictions, sink):
    lines = ["frame,v_pred,w_pred"]
    lines += [f"{fi},{v!r},{w!r}" for fi, (v, w) in sorted(predictions.items())]
    text = "\n".join(lines) + "\n"
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text)
    else:
        sink.write(text)


GROUP_KEYS = ("lighting", "path", "split")


def evaluate_policy(predictions, labeled_groups, group_by=("lighting",)):
    """Grouped MAE reports for predictions against dataset truth.

    `labeled_groups` is an iterable of (group_info, frame_index, (v, w))
    truth entries, where group_info is a dict with lighting/path/split keys.
    Raises MissingPredictions when any truth frame has no prediction.
    """
    for key in group_by:
        if key not in GROUP_KEYS:
            raise ValueError(f"cannot group by {key!r}; choose from {GROUP_KEYS}")
    grouped = {}
    for info, frame_index, truth_vw in labeled_groups:
        if frame_index not in predictions:
            raise MissingPredictions(f"no prediction for frame {frame_index}")
        key = tuple((k, str(info.get(k))) for k in group_by)
        grouped.setdefault(key, ([], []))
        grouped[key][0].append(predictions[frame_index])
        grouped[key][1].append(truth_vw)
    if not grouped:
        raise EmptyInput("no truth records to evaluate")
    return {key: mae(p, t) for key, (p, t) in sorted(grouped.items())}


def report_rows(reports):
    """Flatten grouped reports into table rows.

    Table cells carry 4-decimal strings; raw_* fields keep the unrounded
    values for machine consumers.
    """
    rows = []
    for key, rep in reports.items():
        row = {name: value for name, value in key}
        row.update(
            linear_mae=format_metric(rep.linear_mae),
            angular_mae=format_metric(rep.angular_mae),
            total_mae=format_metric(rep.total_mae),
            n=rep.n,
            raw_linear_mae=rep.linear_mae,
            raw_angular_mae=rep.angular_mae,
            raw_total_mae=rep.total_mae,
        )
        rows.append(row)
    return rows


def write_report(reports, json_path=None, csv_path=None):
    rows = report_rows(reports)
    if json_path is not None:
        Path(json_path).write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    if csv_path is not None:
        if rows:
            cols = [c for c in rows[0] if not c.startswith("raw_")]
            lines = [",".join(cols)]
            lines += [",".join(str(r[c]) for c in cols) for r in rows]
            Path(csv_path).write_text("\n".join(lines) + "\n")
        else:
            Path(csv_path).write_text("")
    return rows
