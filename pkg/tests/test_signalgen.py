import math
import numpy as np
import pydantic
import pytest
from hypothesis import given, strategies as st
from scipy.signal import periodogram
from ReadTheFaultsIn.errors import CoverageError, InvalidConfigError, NumericalError, ValidationError
from ReadTheFaultsIn.signalgen import (
    LOAD_LEVELS,
    BearingGeometry,
    FaultClass,
    HealthState,
    MotorConfig,
    OperatingPoint,
    RawSignal,
    SignalSegment,
    DiskCorpus,
    SegmentCorpus,
    SyntheticCorpus,
    bearing_char_freqs,
    compute_slip,
    fault_signature_freqs,
    generate_signal,
    inject_noise,
    measure_snr,
    read_dataset,
    segment,
    segment_count,
    rotor_freq_hz,
    speed_for_load,
    synchronous_speed_rpm,
    write_dataset,
)
from ReadTheFaultsIn.signalgen.signal import drive_noise

@pytest.mark.parametrize("speed, slip", [(1500, 0.0), (1464, 0.024), (1440, 0.04)])
def test_slip_examples(speed, slip):
    assert compute_slip(speed, 50, 2) == pytest.approx(slip, abs=1e-12)

@given(st.floats(0, 1500), st.floats(0, 1500))
def test_slip_decreases_with_speed(a, b):
    lo, hi = sorted((a, b))
    assert compute_slip(lo) >= compute_slip(hi)

def test_slip_rejects_bad_machine():
    with pytest.raises(InvalidConfigError):
        compute_slip(1400, 0, 2)
    with pytest.raises(InvalidConfigError):
        compute_slip(1400, 50, 0)

def test_speed_interpolates_between_tabulated_loads():
    assert speed_for_load(1.0) == 1464.0
    assert speed_for_load(0.125) == pytest.approx(1489.0)
    with pytest.raises(ValidationError):
        speed_for_load(1.5)

def test_bearing_frequencies():
    freqs = bearing_char_freqs(BearingGeometry(), 24.4)
    assert freqs.cage == pytest.approx(9.72, abs=0.01)
    assert freqs.outer == pytest.approx(87.46, abs=0.02)
    assert freqs.inner > freqs.outer

def test_bearing_cage_tends_to_half_rotor_speed():
    freqs = bearing_char_freqs(BearingGeometry(ball_diameter_mm=1e-9), 24.4)
    assert freqs.cage == pytest.approx(12.2, rel=1e-6)

def _psd(signal: RawSignal):
    return periodogram(signal.samples, fs=signal.sample_rate_hz)

def _bin(freqs, target):
    return int(np.argmin(np.abs(freqs - target)))

def test_healthy_spectrum_peaks_at_supply(motor):
    signal = generate_signal(motor, BearingGeometry(), HealthState(FaultClass.HEALTHY), OperatingPoint.at_load(0.5), 2.0, seed=1)
    freqs, power = _psd(signal)
    assert freqs[np.argmax(power)] == pytest.approx(50.0)

def test_broken_bar_sidebands_at_full_load(motor):
    op = OperatingPoint.at_load(1.0)
    state = HealthState(FaultClass.BRB1)
    assert fault_signature_freqs(motor, BearingGeometry(), state, op) == pytest.approx([47.6, 52.4])

    faulty = _psd(generate_signal(motor, BearingGeometry(), state, op, 10.0, seed=3))
    healthy = _psd(generate_signal(motor, BearingGeometry(), HealthState(FaultClass.HEALTHY), op, 10.0, seed=3))
    for target in (47.6, 52.4):
        i = _bin(faulty[0], target)
        assert faulty[1][i] > 100 * healthy[1][i]

@pytest.mark.slow
@pytest.mark.parametrize("fault", [fault for fault in FaultClass if fault != FaultClass.HEALTHY])
@pytest.mark.parametrize("load", LOAD_LEVELS)
def test_fault_signature_clears_healthy_by_6db(motor, fault, load):
    op = OperatingPoint.at_load(load)
    geom = BearingGeometry()
    freqs, faulty = _psd(generate_signal(motor, geom, HealthState(fault), op, 10.0, seed=11))
    _, healthy = _psd(generate_signal(motor, geom, HealthState(FaultClass.HEALTHY), op, 10.0, seed=12))

    for target in fault_signature_freqs(motor, geom, HealthState(fault), op):
        i = _bin(freqs, target)
        assert 10 * math.log10(faulty[i] / healthy[i]) >= 6.0

def test_generation_is_deterministic(motor):
    args = (motor, BearingGeometry(), HealthState(FaultClass.ECC_DYNAMIC), OperatingPoint.at_load(0.25), 0.5)
    a = generate_signal(*args, seed=7)
    b = generate_signal(*args, seed=7)
    c = generate_signal(*args, seed=8)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)

def test_generation_needs_one_segment(motor):
    with pytest.raises(ValidationError):
        generate_signal(motor, BearingGeometry(), HealthState(FaultClass.HEALTHY), OperatingPoint.at_load(0.0), 0.1, seed=0)

def _unit_power_signal(length=10_000, seed=0):
    t = np.arange(length) / 10_000
    samples = math.sqrt(2) * np.sin(2 * np.pi * 50 * t)
    return RawSignal(samples, 10_000.0, HealthState(FaultClass.HEALTHY), OperatingPoint.at_load(0.0))

def test_zero_db_noise_has_signal_power():
    clean = _unit_power_signal()
    noisy = inject_noise(clean, 0.0, seed=0)
    assert np.mean((noisy.samples - clean.samples) ** 2) == pytest.approx(1.0, rel=0.05)
    assert noisy.snr_db == 0.0

def test_twenty_db_is_tenfold_amplitude():
    clean = _unit_power_signal()
    noise = inject_noise(clean, 20.0, seed=1).samples - clean.samples
    ratio = math.sqrt(np.mean(clean.samples ** 2) / np.mean(noise ** 2))
    assert ratio == pytest.approx(10.0, rel=0.05)

@pytest.mark.parametrize("kind", ["gaussian", "drive"])
@pytest.mark.parametrize("target", [2.0, 4.0, 6.0, 20.0])
def test_snr_round_trip(kind, target):
    clean = _unit_power_signal()
    measured = [measure_snr(clean, inject_noise(clean, target, seed, kind)) for seed in range(20)]
    assert np.mean(measured) == pytest.approx(target, abs=0.1)

def test_noise_keeps_segment_dtype():
    seg = SignalSegment(np.ones(16, dtype=np.float32), HealthState(FaultClass.HEALTHY), OperatingPoint.at_load(0.0))
    noisy = inject_noise(seg, 6.0, seed=0, kind="drive", sample_rate_hz=10_000.0)
    assert noisy.values.dtype == np.float32
    assert noisy.snr_db == 6.0

def test_drive_noise_needs_sample_rate():
    seg = SignalSegment(np.ones(16), HealthState(FaultClass.HEALTHY), OperatingPoint.at_load(0.0))
    with pytest.raises(ValidationError):
        inject_noise(seg, 6.0, seed=0, kind="drive")

def test_drive_noise_carries_supply_harmonics():
    clean = _unit_power_signal()
    noise = drive_noise(clean.samples, 0.0, np.random.default_rng(0), 10_000.0)
    freqs, power = periodogram(noise, fs=10_000.0)
    floor = np.median(power)
    assert power[_bin(freqs, 250.0)] > 100 * floor
    assert power[_bin(freqs, 350.0)] > 100 * floor

def test_noise_rejects_silence():
    silent = RawSignal(np.zeros(100), 10_000.0, HealthState(FaultClass.HEALTHY), OperatingPoint.at_load(0.0))
    with pytest.raises(NumericalError):
        inject_noise(silent, 10.0, seed=0)

def test_measure_snr_examples():
    x = np.random.default_rng(0).normal(size=1000)
    assert measure_snr(x, x + x) == pytest.approx(0.0)
    assert measure_snr(x, x + 0.1 * x) == pytest.approx(20.0)
    with pytest.raises(ValidationError):
        measure_snr(x, x[:-1])
    with pytest.raises(NumericalError):
        measure_snr(x, x)

def _recording(length):
    return RawSignal(np.arange(length, dtype=np.float64), 10_000.0, HealthState(FaultClass.HEALTHY), OperatingPoint.at_load(0.0))

def test_segment_counts():
    assert len(segment(_recording(4096), 64, 4096)) == 1
    segs = segment(_recording(8192), 64, 2048)
    assert len(segs) == 3 == segment_count(8192, 64, 2048)
    assert segs[1].values[0] == 2048
    with pytest.raises(ValidationError):
        segment(_recording(100), 64)

def test_corpus_windows_are_disjoint_and_repeatable(tiny_corpus):
    first = tiny_corpus.windows(FaultClass.BRB2, 0.5, 0, 10)
    second = tiny_corpus.windows(FaultClass.BRB2, 0.5, 10, 30)
    again = SyntheticCorpus(seed=0, n=16, block_duration_s=0.5).windows(FaultClass.BRB2, 0.5, 0, 10)

    assert all(np.array_equal(a.values, b.values) for a, b in zip(first, again))
    seen = {seg.values.tobytes() for seg in first}
    assert not any(seg.values.tobytes() in seen for seg in second)
    assert all(seg.side == 16 and seg.values.dtype == np.float32 for seg in first + second)

def test_corpus_coverage_names_missing_class():
    corpus = SyntheticCorpus(n=16, block_duration_s=0.5, classes=[f for f in FaultClass if f != FaultClass.BEARING_BALL])
    with pytest.raises(CoverageError, match="bearing_ball"):
        corpus.check_coverage(list(FaultClass), LOAD_LEVELS)

def test_dataset_files_skip_bad_rows(tmp_path, tiny_corpus):
    segs = tiny_corpus.windows(FaultClass.HEALTHY, 0.25, 0, 4)
    write_dataset(tmp_path, "T0", {FaultClass.HEALTHY: segs}, snr_db=None)
    with open(tmp_path / "healthy.csv", "a") as f:
        f.write(",".join(["abc"] * 256) + "\n")

    manifest, samples = read_dataset(tmp_path)
    assert manifest.task_id == "T0" and manifest.n == 16
    assert len(samples[FaultClass.HEALTHY]) == 4
    assert samples[FaultClass.HEALTHY][2].op == OperatingPoint.at_load(0.25)
    assert np.allclose(samples[FaultClass.HEALTHY][0].values, segs[0].values)

def test_dataset_files_skip_overlong_rows(tmp_path, tiny_corpus):
    segs = tiny_corpus.windows(FaultClass.HEALTHY, 0.25, 0, 3)
    write_dataset(tmp_path, "T0", {FaultClass.HEALTHY: segs})
    path = tmp_path / "healthy.csv"
    good = path.read_text()
    overlong = ",".join(["1.0"] * 300) + "\n"
    path.write_text(overlong + good + overlong + ",".join(["2.0"] * 10) + "\n")

    _, samples = read_dataset(tmp_path)
    assert len(samples[FaultClass.HEALTHY]) == 3
    for seg, expected in zip(samples[FaultClass.HEALTHY], segs):
        assert np.allclose(seg.values, expected.values)

def test_motor_config_rejects_undersampling():
    with pytest.raises(pydantic.ValidationError):
        MotorConfig(sample_rate_hz=100.0)

def test_synchronous_and_rotor_speed():
    assert synchronous_speed_rpm(50.0, 2) == 1500.0
    assert synchronous_speed_rpm(60.0, 3) == 1200.0
    assert rotor_freq_hz(1470.0) == 24.5
    with pytest.raises(InvalidConfigError):
        synchronous_speed_rpm(50.0, 0)

def test_segment_corpus_runs_out(tiny_corpus):
    corpus = SegmentCorpus(tiny_corpus.windows(FaultClass.HEALTHY, 0.0, 0, 5))
    assert corpus.conditions() == {(FaultClass.HEALTHY, 0.0)}
    assert corpus.available(FaultClass.HEALTHY, 0.0) == 5
    assert len(corpus.windows(FaultClass.HEALTHY, 0.0, 3, 2)) == 2
    with pytest.raises(CoverageError):
        corpus.windows(FaultClass.HEALTHY, 0.0, 3, 3)

def test_disk_corpus_reads_every_dataset(tmp_path, tiny_corpus):
    write_dataset(tmp_path / "a", "A", {FaultClass.HEALTHY: tiny_corpus.windows(FaultClass.HEALTHY, 0.25, 0, 3)})
    write_dataset(tmp_path / "b", "B", {FaultClass.BRB1: tiny_corpus.windows(FaultClass.BRB1, 0.75, 0, 4)})

    corpus = DiskCorpus(tmp_path)
    assert corpus.n == 16
    assert corpus.conditions() == {(FaultClass.HEALTHY, 0.25), (FaultClass.BRB1, 0.75)}
    assert corpus.available(FaultClass.BRB1, 0.75) == 4

    shuffled = DiskCorpus(tmp_path, seed=1).windows(FaultClass.BRB1, 0.75, 0, 4)
    assert {seg.values.tobytes() for seg in shuffled} == {
        seg.values.tobytes() for seg in corpus.windows(FaultClass.BRB1, 0.75, 0, 4)
    }

def test_disk_corpus_keeps_noisy_tasks_apart(tmp_path, tiny_corpus):
    clean = tiny_corpus.windows(FaultClass.HEALTHY, 0.0, 0, 3)
    noisy = [
        inject_noise(seg, 2.0, i)
        for i, seg in enumerate(tiny_corpus.windows(FaultClass.HEALTHY, 0.0, 3, 3))
    ]
    write_dataset(tmp_path / "T4", "T4", {FaultClass.HEALTHY: clean})
    write_dataset(tmp_path / "T6", "T6", {FaultClass.HEALTHY: noisy}, snr_db=2.0)

    corpus = DiskCorpus(tmp_path)
    pooled = corpus.windows(FaultClass.HEALTHY, 0.0, 0, 3)
    assert all(seg.snr_db is None for seg in pooled)
    assert corpus.available(FaultClass.HEALTHY, 0.0) == 3

    noisy_corpus = DiskCorpus(tmp_path, snr_db=2.0)
    assert noisy_corpus.available(FaultClass.HEALTHY, 0.0) == 3
    assert all(seg.snr_db == 2.0 for seg in noisy_corpus.windows(FaultClass.HEALTHY, 0.0, 0, 3))

def test_segment_corpus_filters_on_snr(tiny_corpus):
    segs = tiny_corpus.windows(FaultClass.BRB1, 0.5, 0, 4)
    noisy = [inject_noise(seg, 4.0, i) for i, seg in enumerate(segs[:2])]
    corpus = SegmentCorpus(segs[2:] + noisy)
    assert corpus.available(FaultClass.BRB1, 0.5) == 2
    assert SegmentCorpus(segs[2:] + noisy, snr_db=4.0).available(FaultClass.BRB1, 0.5) == 2

def test_disk_corpus_needs_a_manifest(tmp_path):
    with pytest.raises(CoverageError):
        DiskCorpus(tmp_path)
