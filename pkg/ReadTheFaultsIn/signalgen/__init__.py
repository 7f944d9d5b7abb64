from .motor import (
    LOAD_LEVELS,
    LOAD_SPEED_TABLE,
    BearingFrequencies,
    BearingGeometry,
    MotorConfig,
    OperatingPoint,
    bearing_char_freqs,
    compute_slip,
    rotor_freq_hz,
    speed_for_load,
    synchronous_speed_rpm,
)
from .health import ALL_CLASSES, FaultClass, FaultModel, HealthState, fault_signature_freqs
from .signal import (
    DEFAULT_SIDE,
    RawSignal,
    SignalSegment,
    drive_noise,
    generate_signal,
    inject_noise,
    measure_snr,
    segment,
    segment_count,
)
from .dataset import DatasetManifest, read_dataset, read_manifest, write_dataset
from .corpus import Corpus, DiskCorpus, SegmentCorpus, SyntheticCorpus
