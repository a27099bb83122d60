"""First-harmonic envelope model of the converter.

The winding currents are represented by rotating-frame phasors
``I_qd = I_q + j I_d`` such that ``I(t) = real(I_qd e^{j phi})`` with
``phi = theta - pi/2`` (see :data:`dabdyn.model.PHASOR_FRAME_SHIFT`). Seven
real states::

    xe = [Id, Vc1, Iq1, Id1, Iq2, Id2, Vc2]
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .exceptions import DomainError
from .model import ConverterParams, _transformer_coefficients

if TYPE_CHECKING:
    from .optsolve import OperatingPoint

__all__ = [
    "ENVELOPE_STATE_NAMES",
    "EnvelopeState",
    "SteadyStateResidual",
    "envelope_rhs",
    "steady_state_residual",
    "dc_power_balance",
    "power_losses",
]

ENVELOPE_STATE_NAMES = ("Id", "Vc1", "Iq1", "Id1", "Iq2", "Id2", "Vc2")


@dataclass(frozen=True)
class EnvelopeState:
    Id: float
    Vc1: float
    Iq1: float
    Id1: float
    Iq2: float
    Id2: float
    Vc2: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in dataclasses.astuple(self)):
            raise DomainError("EnvelopeState entries must be finite")

    @property
    def I_qd1(self) -> complex:
        return complex(self.Iq1, self.Id1)

    @property
    def I_qd2(self) -> complex:
        return complex(self.Iq2, self.Id2)

    def as_array(self) -> np.ndarray:
        return np.array(dataclasses.astuple(self), dtype=float)

    @classmethod
    def from_array(cls, x) -> "EnvelopeState":
        return cls(*(float(v) for v in np.asarray(x, dtype=float).reshape(7)))

    @classmethod
    def from_phasors(cls, Id, Vc1, I_qd1, I_qd2, Vc2) -> "EnvelopeState":
        I_qd1, I_qd2 = complex(I_qd1), complex(I_qd2)
        return cls(float(Id), float(Vc1), I_qd1.real, I_qd1.imag,
                   I_qd2.real, I_qd2.imag, float(Vc2))


def _as_vector(xe) -> np.ndarray:
    if isinstance(xe, EnvelopeState):
        return xe.as_array()
    return np.asarray(xe, dtype=float)


def envelope_rhs(xe, S_qd1: complex, S_qd2: complex, load, p: ConverterParams) -> np.ndarray:
    """Time derivatives of the seven envelope states."""
    Id, Vc1, Iq1, Id1, Iq2, Id2, Vc2 = _as_vector(xe)
    I1 = complex(Iq1, Id1)
    I2 = complex(Iq2, Id2)
    Io = load.current(Vc2)
    K, B = _transformer_coefficients(p)
    u1 = S_qd1 * Vc1
    u2 = S_qd2 * Vc2
    jw = 1j * p.ws
    dI1 = K[0, 0] * I1 + K[0, 1] * I2 + B[0, 0] * u1 + B[0, 1] * u2 - jw * I1
    dI2 = K[1, 0] * I1 + K[1, 1] * I2 + B[1, 0] * u1 + B[1, 1] * u2 - jw * I2
    return np.array([
        (p.V1 - Vc1 - p.r * Id) / p.Ld,
        Id / p.C1 - (S_qd1 * I1.conjugate()).real / (2.0 * p.C1),
        dI1.real,
        dI1.imag,
        dI2.real,
        dI2.imag,
        p.n * (S_qd2 * I2.conjugate()).real / (2.0 * p.C2) - Io / p.C2,
    ])


@dataclass(frozen=True)
class SteadyStateResidual:
    """Residuals of the seven steady-state equations.

    ``input_voltage`` [V], ``input_current`` and ``output_current`` [A], the
    four winding-current balances [A/s]. ``scales`` holds, per equation, the
    sum of the magnitudes of its terms; :meth:`scaled` divides by it.
    """

    input_voltage: float
    input_current: float
    winding1_q: float
    winding1_d: float
    winding2_q: float
    winding2_d: float
    output_current: float
    scales: tuple = dataclasses.field(default=(1.0,) * 7, compare=False)

    def values(self) -> np.ndarray:
        return np.array(dataclasses.astuple(self)[:7])

    def scaled(self) -> np.ndarray:
        s = np.maximum(np.asarray(self.scales, dtype=float), 1e-300)
        return self.values() / s

    def max_norm(self, scaled: bool = True) -> float:
        v = self.scaled() if scaled else self.values()
        return float(np.max(np.abs(v)))


def steady_state_residual(op: "OperatingPoint", p: ConverterParams) -> SteadyStateResidual:
    """Evaluate the steady-state equations at a solved operating point.

    The input-voltage equation is ``Vc1 - V1``, or ``Vc1 - V1 + r*Id`` when
    ``p.resistive_input_drop`` is set.
    """
    xe = op.state
    S1, S2 = op.phasors
    K, B = _transformer_coefficients(p)
    w = p.ws
    Sq1, Sd1, Sq2, Sd2 = S1.real, S1.imag, S2.real, S2.imag
    Vc1, Vc2 = xe.Vc1, xe.Vc2
    Iq1, Id1, Iq2, Id2 = xe.Iq1, xe.Id1, xe.Iq2, xe.Id2

    drop = p.r * xe.Id if p.resistive_input_drop else 0.0
    r15 = Vc1 - p.V1 + drop
    r16 = Sq1 * Iq1 + Sd1 * Id1 - 2.0 * xe.Id
    t17 = (K[0, 0] * Iq1, K[0, 1] * Iq2, B[0, 0] * Sq1 * Vc1, B[0, 1] * Sq2 * Vc2, w * Id1)
    t18 = (K[0, 0] * Id1, K[0, 1] * Id2, B[0, 0] * Sd1 * Vc1, B[0, 1] * Sd2 * Vc2, -w * Iq1)
    t19 = (K[1, 0] * Iq1, K[1, 1] * Iq2, B[1, 0] * Sq1 * Vc1, B[1, 1] * Sq2 * Vc2, w * Id2)
    t20 = (K[1, 0] * Id1, K[1, 1] * Id2, B[1, 0] * Sd1 * Vc1, B[1, 1] * Sd2 * Vc2, -w * Iq2)
    r21 = Sq2 * Iq2 + Sd2 * Id2 - 2.0 * op.Io / p.n

    def mag(*terms):
        return float(sum(abs(t) for t in terms))

    scales = (
        mag(Vc1, p.V1, drop),
        mag(Sq1 * Iq1, Sd1 * Id1, 2.0 * xe.Id),
        mag(*t17), mag(*t18), mag(*t19), mag(*t20),
        mag(Sq2 * Iq2, Sd2 * Id2, 2.0 * op.Io / p.n),
    )
    return SteadyStateResidual(r15, r16, sum(t17), sum(t18), sum(t19), sum(t20), r21,
                               scales=scales)


def dc_power_balance(op: "OperatingPoint", p: ConverterParams):
    """``(Pin, Pout)``: ``V1*Id`` drawn from the source, ``Vc2*Io`` into the load."""
    return p.V1 * op.state.Id, op.state.Vc2 * op.Io


def power_losses(op: "OperatingPoint", p: ConverterParams):
    """``(copper, filter)`` losses implied by the envelope state [W]."""
    xe = op.state
    copper = 0.5 * (p.R1 * abs(xe.I_qd1) ** 2 + p.R2 * abs(xe.I_qd2) ** 2)
    return copper, p.r * xe.Id ** 2
