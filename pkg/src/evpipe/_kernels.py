"""Hot inner loops with numba-jitted and pure-numpy implementations.

The jitted path is the default whenever numba imports cleanly; setting the
environment variable ``EVPIPE_DISABLE_NUMBA=1`` before import forces the
numpy fallback. Both implementations are kept output-identical (same values,
same ordering) so they can be cross-checked and benchmarked against each
other (see ``evpipe.bench``).
"""

import os

import numpy as np

from .errors import CountOverflow

U16_MAX = 0xFFFF


def _numba_disabled():
    flag = os.environ.get("EVPIPE_DISABLE_NUMBA", "")
    return flag not in ("", "0")


try:
    if _numba_disabled():
        raise ImportError("numba disabled via EVPIPE_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    njit = None
    HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# polarity-histogram rasterization
# ---------------------------------------------------------------------------

def rasterize_counts_numpy(xs, ys, ps, height, width, saturate):
    """Accumulate per-pixel, per-polarity counts into a (2, H, W) u16 grid."""
    idx = (
        (ps.astype(np.int64) ^ 1) * (height * width)
        + ys.astype(np.int64) * width
        + xs.astype(np.int64)
    )
    counts64 = np.bincount(idx, minlength=2 * height * width)
    counts64 = counts64.reshape(2, height, width)
    over = counts64 > U16_MAX
    saturated = bool(over.any())
    if saturated and not saturate:
        raise CountOverflow("histogram cell exceeded 65535 with saturation off")
    if saturated:
        counts64 = np.minimum(counts64, U16_MAX)
    return counts64.astype(np.uint16), saturated


if HAVE_NUMBA:

    @njit(cache=True)
    def _rasterize_njit(xs, ys, ps, counts, saturate):
        # status: 0 clean, 1 saturated, 2 overflow with saturation off
        status = 0
        for i in range(xs.size):
            ch = 0 if ps[i] == 1 else 1
            cur = counts[ch, ys[i], xs[i]]
            if cur == U16_MAX:
                if not saturate:
                    return 2
                status = 1
                continue
            counts[ch, ys[i], xs[i]] = cur + 1
        return status

    def rasterize_counts_numba(xs, ys, ps, height, width, saturate):
        counts = np.zeros((2, height, width), np.uint16)
        status = _rasterize_njit(xs, ys, ps, counts, saturate)
        if status == 2:
            raise CountOverflow("histogram cell exceeded 65535 with saturation off")
        return counts, status == 1

else:
    rasterize_counts_numba = None


# ---------------------------------------------------------------------------
# contrast-threshold event extraction (simulator inner loop)
# ---------------------------------------------------------------------------
#
# Per pixel: fire one event for every full threshold crossing between the
# running reference level and the new log intensity, timestamp it by linear
# interpolation of the crossing level between the previous and new sample,
# and advance the reference by the crossed amount. The 1e-9 guard makes a
# step of exactly k*C yield exactly k events despite float division.

def contrast_events_numpy(l_new, l_old, l_ref, c, t0, t1):
    # log-intensity state is float32; event timestamps stay float64
    c32 = np.float32(c)
    eps = np.float32(1e-6)
    d = l_new - l_ref
    k = (np.abs(d) / c32 + eps).astype(np.int64)
    yy, xx = np.nonzero(k > 0)
    if yy.size == 0:
        return (
            np.empty(0, np.float64),
            np.empty(0, np.uint16),
            np.empty(0, np.uint16),
            np.empty(0, np.uint8),
        )
    kk = k[yy, xx]
    sign = np.where(d[yy, xx] > 0, np.float32(1.0), np.float32(-1.0))
    ref = l_ref[yy, xx]
    lo = l_old[yy, xx]
    denom = l_new[yy, xx] - lo
    total = int(kk.sum())
    starts = np.cumsum(kk) - kk
    rep = np.repeat(np.arange(yy.size), kk)
    m = (np.arange(total, dtype=np.int64) - starts[rep] + 1).astype(np.float32)
    level = ref[rep] + sign[rep] * m * c32
    safe = np.where(denom[rep] == np.float32(0.0), np.float32(1.0), denom[rep])
    frac = np.where(denom[rep] == np.float32(0.0), np.float32(1.0), (level - lo[rep]) / safe)
    frac = np.clip(frac, np.float32(0.0), np.float32(1.0))
    ts = t0 + frac.astype(np.float64) * (t1 - t0)
    l_ref[yy, xx] = ref + sign * kk.astype(np.float32) * c32
    return ts, xx[rep].astype(np.uint16), yy[rep].astype(np.uint16), (sign[rep] > 0).astype(np.uint8)


if HAVE_NUMBA:

    @njit(cache=True)
    def _contrast_events_njit(l_new, l_old, l_ref, c32, eps, t0, t1):
        h, w = l_new.shape
        total = 0
        for i in range(h):
            for j in range(w):
                d = l_new[i, j] - l_ref[i, j]
                total += int(abs(d) / c32 + eps)
        ts = np.empty(total, np.float64)
        xs = np.empty(total, np.uint16)
        ys = np.empty(total, np.uint16)
        ps = np.empty(total, np.uint8)
        n = 0
        for i in range(h):
            for j in range(w):
                ref = l_ref[i, j]
                d = l_new[i, j] - ref
                k = int(abs(d) / c32 + eps)
                if k == 0:
                    continue
                sign = np.float32(1.0) if d > 0 else np.float32(-1.0)
                lo = l_old[i, j]
                denom = l_new[i, j] - lo
                for m in range(1, k + 1):
                    level = ref + sign * np.float32(m) * c32
                    if denom == np.float32(0.0):
                        frac = np.float32(1.0)
                    else:
                        frac = (level - lo) / denom
                        if frac < np.float32(0.0):
                            frac = np.float32(0.0)
                        elif frac > np.float32(1.0):
                            frac = np.float32(1.0)
                    ts[n] = t0 + np.float64(frac) * (t1 - t0)
                    xs[n] = j
                    ys[n] = i
                    ps[n] = 1 if sign > 0 else 0
                    n += 1
                l_ref[i, j] = ref + sign * np.float32(k) * c32
        return ts, xs, ys, ps

    def contrast_events_numba(l_new, l_old, l_ref, c, t0, t1):
        return _contrast_events_njit(
            l_new, l_old, l_ref, np.float32(c), np.float32(1e-6), t0, t1
        )

else:
    contrast_events_numba = None


# active backend
if HAVE_NUMBA:
    rasterize_counts = rasterize_counts_numba
    contrast_events = contrast_events_numba
    BACKEND = "numba"
else:
    rasterize_counts = rasterize_counts_numpy
    contrast_events = contrast_events_numpy
    BACKEND = "numpy"
