from typing import ClassVar, NamedTuple
from enum import IntEnum
from dataclasses import dataclass
from ..errors import ValidationError
from .motor import MotorConfig, BearingGeometry, OperatingPoint, compute_slip, bearing_char_freqs

class FaultClass(IntEnum):
    HEALTHY = 0
    BRB1 = 1
    BRB2 = 2
    BRB3 = 3
    ECC_STATIC = 4
    ECC_DYNAMIC = 5
    BEARING_OUTER = 6
    BEARING_CAGE = 7
    BEARING_BALL = 8

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value: "str | int | FaultClass") -> "FaultClass":
        if isinstance(value, FaultClass):
            return value
        if isinstance(value, int):
            return cls(value)

        try:
            return cls[str(value).upper()]
        except KeyError:
            raise ValidationError(f"Unknown health state {value!r}") from None

ALL_CLASSES = tuple(FaultClass)

@dataclass(frozen=True)
class HealthState:
    fault: FaultClass
    severity: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.severity <= 1.0:
            raise ValidationError(f"severity {self.severity} outside [0, 1]")

    @property
    def label(self) -> str:
        return self.fault.label

class Component(NamedTuple):
    freq_hz: float
    rel_amp: float

class FaultModel:
    """Current-spectrum signature of one family of health states.

    Subclasses register themselves for the states they model; amplitudes
    are relative to the supply fundamental.
    """

    states: ClassVar[tuple[FaultClass, ...]]
    __models__: ClassVar[dict[FaultClass, type["FaultModel"]]] = {}

    def __init_subclass__(cls, states=None, **kwargs):
        super().__init_subclass__(**kwargs)
        assert states is not None, f"States of {cls.__name__} must be specified"
        cls.states = tuple(states)
        for state in cls.states:
            if state in FaultModel.__models__:
                raise TypeError(f"{state.label} already modelled by {FaultModel.__models__[state].__name__}")

            FaultModel.__models__[state] = cls

    def __init__(self, cfg: MotorConfig, geom: BearingGeometry, state: HealthState, op: OperatingPoint):
        self.cfg = cfg
        self.geom = geom
        self.state = state
        self.op = op

    @classmethod
    def for_state(cls, state: HealthState, cfg: MotorConfig, geom: BearingGeometry, op: OperatingPoint):
        model = cls.__models__.get(state.fault)
        if model is None:
            raise ValidationError(f"No fault model for {state.fault!r}")

        return model(cfg, geom, state, op)

    @property
    def slip(self) -> float:
        return compute_slip(self.op.speed_rpm, self.cfg.supply_freq_hz, self.cfg.pole_pairs)

    def components(self) -> list[Component]:
        return []

    def signature_freqs(self) -> list[float]:
        return [component.freq_hz for component in self.components()]

class Healthy(FaultModel, states=[FaultClass.HEALTHY]):
    pass

class BrokenRotorBars(FaultModel, states=[FaultClass.BRB1, FaultClass.BRB2, FaultClass.BRB3]):
    BASE_AMP = 0.04

    @property
    def broken_bars(self) -> int:
        return int(self.state.fault) - int(FaultClass.BRB1) + 1

    def components(self) -> list[Component]:
        f = self.cfg.supply_freq_hz
        s = self.slip
        amp = self.BASE_AMP * self.broken_bars * self.state.severity * (0.5 + self.op.load_fraction)
        return [
            Component((1 - 2 * s) * f, amp),
            Component((1 + 2 * s) * f, amp),
            Component((1 - 4 * s) * f, 0.3 * amp),
            Component((1 + 4 * s) * f, 0.3 * amp),
        ]

    def signature_freqs(self) -> list[float]:
        return [component.freq_hz for component in self.components()[:2]]

class Eccentricity(FaultModel, states=[FaultClass.ECC_STATIC, FaultClass.ECC_DYNAMIC]):
    BASE_AMP = 0.06

    def components(self) -> list[Component]:
        f = self.cfg.supply_freq_hz
        f_r = self.op.rotor_freq_hz
        amp = self.BASE_AMP * self.state.severity
        components = [
            Component(abs(f - f_r), amp),
            Component(f + f_r, amp),
        ]
        if self.state.fault == FaultClass.ECC_DYNAMIC:
            components += [
                Component(abs(f - 2 * f_r), 0.8 * amp),
                Component(f + 2 * f_r, 0.8 * amp),
            ]

        return components

class BearingDefect(FaultModel, states=[
    FaultClass.BEARING_OUTER,
    FaultClass.BEARING_CAGE,
    FaultClass.BEARING_BALL,
]):
    BASE_AMP = 0.05
    ORDERS = (1, 2)

    @property
    def char_freq(self) -> float:
        freqs = bearing_char_freqs(self.geom, self.op.rotor_freq_hz)
        if self.state.fault == FaultClass.BEARING_OUTER:
            return freqs.outer
        if self.state.fault == FaultClass.BEARING_CAGE:
            return freqs.cage

        return freqs.ball

    def components(self) -> list[Component]:
        f = self.cfg.supply_freq_hz
        f_char = self.char_freq
        components = []
        for m in self.ORDERS:
            amp = self.BASE_AMP * self.state.severity / m
            components += [
                Component(abs(f - m * f_char), amp),
                Component(f + m * f_char, amp),
            ]

        return components

    def signature_freqs(self) -> list[float]:
        return [component.freq_hz for component in self.components()[:2]]

def fault_signature_freqs(cfg: MotorConfig, geom: BearingGeometry, state: HealthState, op: OperatingPoint) -> list[float]:
    return FaultModel.for_state(state, cfg, geom, op).signature_freqs()
