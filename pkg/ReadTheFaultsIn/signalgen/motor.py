"""Induction-machine and bearing kinematics used by the signal generator."""
from typing import Optional
from functools import cache
from dataclasses import dataclass
import math
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from ..errors import InvalidConfigError, ValidationError

# Load fraction -> measured shaft speed (rpm) of the 1.5 kW, 4-pole test machine.
LOAD_SPEED_TABLE: dict[float, float] = {
    0.0: 1492.0,
    0.25: 1486.0,
    0.5: 1482.0,
    0.75: 1473.0,
    1.0: 1464.0,
}

LOAD_LEVELS = tuple(LOAD_SPEED_TABLE)
DEFAULT_SAMPLE_RATE_HZ = 10_000.0

class MotorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    supply_freq_hz: float = Field(50.0, gt=0)
    pole_pairs: int = Field(2, ge=1)
    rotor_bars: int = Field(28, ge=1)
    rated_speed_rpm: float = Field(1440.0, gt=0)
    sample_rate_hz: float = Field(DEFAULT_SAMPLE_RATE_HZ, gt=0)
    # 3.3 A rms line current (star connection) as a peak value
    fundamental_amp: float = Field(3.3 * math.sqrt(2), gt=0)

    @model_validator(mode="after")
    def check_sample_rate(self):
        if self.sample_rate_hz < 4 * self.supply_freq_hz:
            raise ValueError(
                f"sample_rate_hz ({self.sample_rate_hz}) must be at least 4x supply_freq_hz"
            )
        return self

    @property
    def synchronous_speed_rpm(self) -> float:
        return synchronous_speed_rpm(self.supply_freq_hz, self.pole_pairs)

class BearingGeometry(BaseModel):
    """6205-type deep groove ball bearing on the drive end."""

    model_config = ConfigDict(frozen=True)

    ball_diameter_mm: float = Field(7.835, gt=0)
    cage_diameter_mm: float = Field(38.5, gt=0)
    n_balls: int = Field(9, ge=1)
    contact_angle_deg: float = 0.0

    @model_validator(mode="after")
    def check_diameters(self):
        if self.ball_diameter_mm >= self.cage_diameter_mm:
            raise ValueError("ball_diameter_mm must be smaller than cage_diameter_mm")
        return self

@dataclass(frozen=True)
class OperatingPoint:
    load_fraction: float
    speed_rpm: float

    def __post_init__(self):
        if not 0.0 <= self.load_fraction <= 1.0:
            raise ValidationError(f"load_fraction {self.load_fraction} outside [0, 1]")
        if self.speed_rpm < 0:
            raise ValidationError(f"speed_rpm must be >= 0, got {self.speed_rpm}")

    @classmethod
    def at_load(cls, load_fraction: float, table: Optional[dict[float, float]] = None):
        return cls(load_fraction, speed_for_load(load_fraction, table))

    @property
    def rotor_freq_hz(self) -> float:
        return rotor_freq_hz(self.speed_rpm)

    def to_dict(self) -> dict:
        return {"load": self.load_fraction, "speed_rpm": self.speed_rpm}

@dataclass(frozen=True)
class BearingFrequencies:
    outer: float
    inner: float
    cage: float
    ball: float

def speed_for_load(load_fraction: float, table: Optional[dict[float, float]] = None) -> float:
    table = LOAD_SPEED_TABLE if table is None else table
    if load_fraction in table:
        return float(table[load_fraction])

    loads = sorted(table)
    if not loads[0] <= load_fraction <= loads[-1]:
        raise ValidationError(
            f"load_fraction {load_fraction} outside tabulated range [{loads[0]}, {loads[-1]}]"
        )

    return float(np.interp(load_fraction, loads, [table[load] for load in loads]))

def synchronous_speed_rpm(supply_freq_hz: float, pole_pairs: int) -> float:
    if supply_freq_hz <= 0:
        raise InvalidConfigError(f"supply_freq_hz must be > 0, got {supply_freq_hz}")
    if pole_pairs < 1:
        raise InvalidConfigError(f"pole_pairs must be >= 1, got {pole_pairs}")

    return 60.0 * supply_freq_hz / pole_pairs

def compute_slip(speed_rpm: float, supply_freq_hz: float = 50.0, pole_pairs: int = 2) -> float:
    if speed_rpm < 0:
        raise ValidationError(f"speed_rpm must be >= 0, got {speed_rpm}")

    n_sync = synchronous_speed_rpm(supply_freq_hz, pole_pairs)
    return (n_sync - speed_rpm) / n_sync

def rotor_freq_hz(speed_rpm: float) -> float:
    return speed_rpm / 60.0

@cache
def bearing_char_freqs(geom: BearingGeometry, rotor_freq: float) -> BearingFrequencies:
    """Defect frequencies of a rolling bearing with a stationary outer race.

    cage  = f_r/2 * (1 - r)
    outer = N_b/2 * f_r * (1 - r)
    inner = N_b/2 * f_r * (1 + r)
    ball  = D_c/(2 D_b) * f_r * (1 - r^2)     (ball spin frequency)
    with r = D_b/D_c * cos(contact angle).
    """
    if rotor_freq <= 0:
        raise ValidationError(f"rotor frequency must be > 0, got {rotor_freq}")

    ratio = geom.ball_diameter_mm / geom.cage_diameter_mm
    r = ratio * math.cos(math.radians(geom.contact_angle_deg))

    cage = 0.5 * rotor_freq * (1.0 - r)
    return BearingFrequencies(
        outer=geom.n_balls * cage,
        inner=0.5 * geom.n_balls * rotor_freq * (1.0 + r),
        cage=cage,
        ball=(0.5 / ratio) * rotor_freq * (1.0 - r * r),
    )
