import numpy as np
import pytest

from evpipe import sync
from evpipe.core import FrameRecord, make_events
from evpipe.errors import InsufficientPulses, NoStableMatch

from conftest import stream_of


def pulse_train(n=60, period=33_333.33, start=1_000_000):
    return start + np.rint(np.arange(n) * period).astype(np.int64)


# --- extract_trigger_times ----------------------------------------------------

def test_no_triggers_empty():
    stream = stream_of(make_events([10, 20], x=1, y=1))
    assert sync.extract_trigger_times(stream).size == 0


def test_alternating_edges_30hz_spacing():
    # rising/falling alternate every 16,666/16,667 us -> rising spaced ~33,333
    times, rising = [], []
    t = 0
    for i in range(40):
        times.append(t)
        rising.append(1 - (i % 2))
        t += 16_666 if i % 2 == 0 else 16_667
    events = make_events(times, is_trigger=1, trigger_rising=rising)
    stream = stream_of(events)
    up = sync.extract_trigger_times(stream, sync.RISING)
    spacing = np.diff(up)
    assert up.size == 20
    assert (spacing == 33_333).all()
    down = sync.extract_trigger_times(stream, sync.FALLING)
    assert down.size == 20


def test_extracted_equals_generated(rng):
    rising_times = pulse_train(1800)
    falling_times = rising_times + 16_666
    events = np.concatenate(
        [
            make_events(rising_times, is_trigger=1, trigger_rising=1),
            make_events(falling_times, is_trigger=1, trigger_rising=0),
        ]
    )
    events = events[np.argsort(events["t"], kind="stable")]
    got = sync.extract_trigger_times(stream_of(events), sync.RISING)
    np.testing.assert_array_equal(got, rising_times)


# --- fit_clock_model -------------------------------------------------------------

def test_fit_identity_exact():
    t = pulse_train(60)
    model = sync.fit_clock_model(t, t)
    assert model.alpha == 1.0
    assert model.beta_us == 0.0
    assert model.residual_rms_us == 0.0
    assert model.matched_pulses == 60


def test_fit_pure_offset_exact():
    t = pulse_train(60)
    model = sync.fit_clock_model(t, t + 12_345)
    assert model.alpha == 1.0
    assert model.beta_us == 12_345.0
    assert model.residual_rms_us == 0.0


def test_fit_recovers_drift_and_offset(rng):
    # 60 s of 30 Hz pulses, injected drift/offset/jitter
    alpha, beta = 1 + 1e-5, 12_345.0
    t_rgb = pulse_train(1800)
    t_evt = np.rint((t_rgb - beta) / alpha + rng.normal(0, 20, t_rgb.size))
    model = sync.fit_clock_model(t_evt, t_rgb)
    assert abs(model.alpha - alpha) <= 1e-6
    assert abs(model.beta_us - beta) <= 50
    assert model.matched_pulses >= 1700


def test_fit_handles_extra_and_missing_pulses(rng):
    t_rgb = pulse_train(120)
    # event side starts 5 pulses early, misses 3 in the middle
    t_evt = pulse_train(130, start=1_000_000 - 5 * 33_333)
    t_evt = np.delete(t_evt, [40, 41, 42])
    model = sync.fit_clock_model(t_evt, t_rgb.astype(np.float64))
    assert abs(model.alpha - 1.0) < 1e-7
    assert abs(model.beta_us) < 5.0
    assert model.matched_pulses >= 110


def test_fit_shift_invariance():
    t = pulse_train(200)
    shift = 5_000_000
    m1 = sync.fit_clock_model(t, t + 777)
    m2 = sync.fit_clock_model(t + shift, t + shift + 777)
    assert abs(m1.alpha - m2.alpha) <= 1e-9
    assert abs(m1.beta_us + m1.alpha * shift - (m2.beta_us + shift)) < 1e-3


def test_fit_zero_jitter_rms_below_1us(rng):
    for alpha, beta in [(0.9995, 4_321.0), (1.0004, -2_000.0), (1.0, 99_999.0)]:
        t_rgb = pulse_train(300)
        t_evt = np.rint((t_rgb - beta) / alpha)
        model = sync.fit_clock_model(t_evt, t_rgb)
        assert model.residual_rms_us < 1.0
        assert abs(model.alpha - alpha) < 1e-7


def test_fit_errors():
    short = pulse_train(5)
    with pytest.raises(InsufficientPulses):
        sync.fit_clock_model(short, pulse_train(60))
    # wildly incompatible rates cannot pair stably
    a = pulse_train(60, period=33_333)
    b = pulse_train(60, period=1_000)
    with pytest.raises(NoStableMatch):
        sync.fit_clock_model(a, b)


# --- mapping ------------------------------------------------------------------

def frames_from(times):
    return [FrameRecord(index=i + 1, t=int(t), image_ref="") for i, t in enumerate(times)]


def test_map_identity():
    frames = frames_from([100, 200])
    mapped = sync.map_frames_to_event_clock(frames, sync.identity_model())
    assert mapped == frames


def test_map_offset_arithmetic():
    model = sync.ClockModel(alpha=1.0, beta_us=1000.0, residual_rms_us=0.0, matched_pulses=10)
    mapped = sync.map_frames_to_event_clock(frames_from([2000]), model)
    assert mapped[0].t == 1000


def test_map_roundtrip_within_1us(rng):
    model = sync.ClockModel(
        alpha=1.0000004, beta_us=54_321.0, residual_rms_us=0.0, matched_pulses=10
    )
    times = rng.integers(1_000_000, 100_000_000, 500)
    mapped = sync.map_timestamps(times, model)
    recovered = np.rint(mapped * model.alpha + model.beta_us).astype(np.int64)
    assert np.abs(recovered - times).max() <= 1


def test_clock_model_json_roundtrip():
    m = sync.ClockModel(1.000001, 42.5, 0.75, 123, rejected_pulses=4)
    again = sync.ClockModel.from_json_dict(m.to_json_dict())
    assert again == m
