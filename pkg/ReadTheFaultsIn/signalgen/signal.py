from typing import Optional, Union
from dataclasses import dataclass, replace
import math
import numpy as np
from ..errors import ValidationError, NumericalError
from ..log import log_debug
from .motor import MotorConfig, BearingGeometry, OperatingPoint
from .health import HealthState, FaultModel

DEFAULT_SIDE = 64
FLOOR_REL_STD = 0.005
DRIVE_HARMONICS = ((5, 0.6), (7, 0.4))
DRIVE_HARMONIC_SHARE = 0.5

@dataclass(frozen=True, eq=False)
class RawSignal:
    samples: np.ndarray
    sample_rate_hz: float
    label: HealthState
    op: OperatingPoint
    snr_db: Optional[float] = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValidationError("RawSignal samples must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise NumericalError("RawSignal samples must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    @property
    def power(self) -> float:
        return float(np.mean(self.samples ** 2))

@dataclass(frozen=True, eq=False)
class SignalSegment:
    values: np.ndarray
    label: HealthState
    op: OperatingPoint
    snr_db: Optional[float] = None

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 1:
            raise ValidationError("SignalSegment values must be 1-D")
        if side_length(values.size) is None:
            raise ValidationError(f"Segment length {values.size} is not a perfect square")
        if not np.all(np.isfinite(values)):
            raise NumericalError("SignalSegment values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def side(self) -> int:
        return side_length(self.values.size)

def side_length(length: int) -> Optional[int]:
    if length < 1:
        return None

    side = math.isqrt(length)
    return side if side * side == length else None

def generate_signal(
    cfg: MotorConfig,
    geom: BearingGeometry,
    state: HealthState,
    op: OperatingPoint,
    duration_s: float,
    seed: int,
    segment_side: int = DEFAULT_SIDE,
) -> RawSignal:
    model = FaultModel.for_state(state, cfg, geom, op)

    n_samples = int(round(duration_s * cfg.sample_rate_hz))
    if n_samples < segment_side ** 2:
        raise ValidationError(
            f"{duration_s} s at {cfg.sample_rate_hz} Hz gives {n_samples} samples, "
            f"fewer than one {segment_side}x{segment_side} segment"
        )

    rng = np.random.default_rng(seed)
    t = np.arange(n_samples) / cfg.sample_rate_hz
    amp = cfg.fundamental_amp

    samples = amp * np.sin(2 * np.pi * cfg.supply_freq_hz * t + rng.uniform(0, 2 * np.pi))
    for component in model.components():
        phase = rng.uniform(0, 2 * np.pi)
        samples += amp * component.rel_amp * np.sin(2 * np.pi * component.freq_hz * t + phase)

    samples += rng.normal(0.0, FLOOR_REL_STD * amp, n_samples)

    log_debug(
        f"Generated {n_samples} samples of {state.label} at load {op.load_fraction:.2f}",
        "signalgen::generate_signal",
    )
    return RawSignal(samples, cfg.sample_rate_hz, state, op)

def _samples_of(signal: Union[RawSignal, SignalSegment, np.ndarray]) -> np.ndarray:
    if isinstance(signal, RawSignal):
        return signal.samples
    if isinstance(signal, SignalSegment):
        return signal.values

    return np.asarray(signal, dtype=np.float64)

def noise_like(
    samples: np.ndarray,
    target_snr_db: float,
    rng: np.random.Generator,
    kind: str = "gaussian",
    sample_rate_hz: Optional[float] = None,
    supply_freq_hz: float = 50.0,
) -> np.ndarray:
    signal_power = float(np.mean(np.asarray(samples, dtype=np.float64) ** 2))
    if signal_power <= 0:
        raise NumericalError("Signal power is zero, SNR is undefined")

    noise_power = signal_power / 10 ** (target_snr_db / 10)
    if kind == "gaussian":
        return rng.normal(0.0, math.sqrt(noise_power), len(samples))

    if kind != "drive":
        raise ValidationError(f"Unknown noise kind {kind!r}")
    if sample_rate_hz is None:
        raise ValidationError("Drive noise needs the sample rate")

    # odd supply harmonics plus broadband, scaled jointly to the target power
    t = np.arange(len(samples)) / sample_rate_hz
    harmonics = np.zeros(len(samples))
    for order, weight in DRIVE_HARMONICS:
        if order * supply_freq_hz >= sample_rate_hz / 2:
            continue
        harmonics += weight * np.sin(2 * np.pi * order * supply_freq_hz * t + rng.uniform(0, 2 * np.pi))

    broadband = rng.normal(0.0, 1.0, len(samples))
    harmonic_power = float(np.mean(harmonics ** 2))
    if harmonic_power > 0:
        harmonics *= math.sqrt(DRIVE_HARMONIC_SHARE * noise_power / harmonic_power)
        broadband *= math.sqrt((1 - DRIVE_HARMONIC_SHARE) * noise_power)
    else:
        broadband *= math.sqrt(noise_power)

    return harmonics + broadband

def drive_noise(
    samples: np.ndarray,
    target_snr_db: float,
    rng: np.random.Generator,
    sample_rate_hz: float,
    supply_freq_hz: float = 50.0,
) -> np.ndarray:
    """5th and 7th supply harmonics plus broadband Gaussian, jointly at `target_snr_db`."""
    return noise_like(samples, target_snr_db, rng, "drive", sample_rate_hz, supply_freq_hz)

def inject_noise(
    signal: Union[RawSignal, SignalSegment],
    target_snr_db: float,
    seed: int,
    kind: str = "gaussian",
    supply_freq_hz: float = 50.0,
    sample_rate_hz: Optional[float] = None,
):
    if not math.isfinite(target_snr_db):
        raise ValidationError(f"target_snr_db must be finite, got {target_snr_db}")

    samples = _samples_of(signal)
    if isinstance(signal, RawSignal):
        sample_rate_hz = signal.sample_rate_hz

    rng = np.random.default_rng(seed)
    noisy = samples + noise_like(samples, target_snr_db, rng, kind, sample_rate_hz, supply_freq_hz)

    if isinstance(signal, RawSignal):
        return replace(signal, samples=noisy, snr_db=float(target_snr_db))

    return replace(signal, values=noisy.astype(samples.dtype), snr_db=float(target_snr_db))

def measure_snr(clean, noisy) -> float:
    clean = _samples_of(clean)
    noisy = _samples_of(noisy)
    if clean.shape != noisy.shape:
        raise ValidationError(f"Length mismatch: {clean.size} clean vs {noisy.size} noisy samples")

    signal_energy = float(np.sum(clean.astype(np.float64) ** 2))
    if signal_energy <= 0:
        raise NumericalError("Clean signal power is zero, SNR is undefined")

    noise_energy = float(np.sum((noisy.astype(np.float64) - clean) ** 2))
    if noise_energy <= 0:
        raise NumericalError("Noise power is zero, SNR is infinite")

    return 10.0 * math.log10(signal_energy / noise_energy)

def segment_count(length: int, n: int, stride: int) -> int:
    if length < n * n:
        return 0

    return (length - n * n) // stride + 1

def segment(signal: RawSignal, n: int = DEFAULT_SIDE, stride: Optional[int] = None) -> list[SignalSegment]:
    if n < 2:
        raise ValidationError(f"Segment side must be >= 2, got {n}")

    stride = n * n if stride is None else stride
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")

    length = n * n
    if len(signal) < length:
        raise ValidationError(f"Signal of {len(signal)} samples is shorter than one {n}x{n} segment")

    windows = np.lib.stride_tricks.sliding_window_view(signal.samples, length)[::stride]
    return [
        SignalSegment(window.copy(), signal.label, signal.op, signal.snr_db)
        for window in windows
    ]
