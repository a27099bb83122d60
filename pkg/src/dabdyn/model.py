"""Converter parameters, switching functions and the full-order switched model.

State vector ordering used throughout the package::

    x = [Id, Vc1, I1, I2, Vc2]

``Id`` is the input-filter inductor current, ``Vc1``/``Vc2`` the dc-link
capacitor voltages and ``I1``/``I2`` the primary-referred winding currents.
The two bridges are driven by the three-valued switching functions ``s1`` and
``s2``.

Angles are in radians and measured in the switching-period frame
``theta = 2*pi*fs*t``. In that frame the primary quasi-square wave has its
positive pulse centred on ``theta = pi/2`` so that its fundamental is
``(4/pi) sin(d1/2) sin(theta)``.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import DomainError, SingularLoadError

__all__ = [
    "ConverterParams",
    "ControlVector",
    "FullState",
    "ConstantCurrent",
    "ConstantPower",
    "STATE_NAMES",
    "outer_phase_shift",
    "switching_waveform",
    "full_order_rhs",
    "full_order_jacobian",
    "full_order_matrices",
    "fundamental_phasors",
    "load_params",
    "save_params",
    "default_params_path",
]

STATE_NAMES = ("Id", "Vc1", "I1", "I2", "Vc2")

# Angle between the switching-period frame and the phasor frame in which the
# primary switching phasor is real. real(S e^{j(theta - PHASOR_FRAME_SHIFT)})
# reproduces the time-domain fundamental.
PHASOR_FRAME_SHIFT = math.pi / 2


@dataclass(frozen=True)
class ConverterParams:
    """Physical constants of the converter plus model-variant switches.

    ``r``, ``C1`` and ``C2`` are not published alongside the other values;
    the defaults were fitted to the published small-signal eigenvalues (see
    :func:`dabdyn.stability.calibrate_passives`). ``I1min``/``I2min`` were
    fitted to the published ZVS boundaries (see
    :func:`dabdyn.zvs.calibrate_thresholds`).

    Model switches:

    refer_secondary_voltage
        Multiply ``Vc2`` by the turns ratio where it drives the transformer
        (winding-current equations and their envelope/steady-state forms).
        Keeps the model power-consistent with ``pVc2 = n s2 I2 / C2``. ``False`` uses ``Vc2``
        unreferred.
    symmetric_resistance
        Use ``L2*R1/h`` instead of ``L1*R1/h`` for the ``I1`` self term of
        the ``pI1`` equation, the value implied by inverting the coupled
        inductance matrix.
    resistive_input_drop
        Steady state uses ``Vc1 = V1 - r*Id`` instead of ``Vc1 = V1``.
    """

    V1: float = 100.0
    L1: float = 4.2134e-3
    L2: float = 4.2158e-3
    Lm: float = 4.205e-3
    Ld: float = 10e-3
    R1: float = 0.45
    R2: float = 0.45
    r: float = 0.0728  # calibrated
    C1: float = 1.0157e-3  # calibrated
    C2: float = 0.2583e-3  # calibrated
    n: float = 0.5
    fs: float = 25e3
    Vc2_ref: float = 200.0
    I1min: float = 2.1  # calibrated
    I2min: float = 1.4  # calibrated
    refer_secondary_voltage: bool = True
    symmetric_resistance: bool = False
    resistive_input_drop: bool = False

    def __post_init__(self):
        for name in ("L1", "L2", "Lm", "Ld", "C1", "C2", "fs", "n"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and > 0, got {value!r}")
        for name in ("R1", "R2", "r", "I1min", "I2min"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise DomainError(f"{name} must be finite and >= 0, got {value!r}")
        if not math.isfinite(self.V1) or not math.isfinite(self.Vc2_ref):
            raise DomainError("V1 and Vc2_ref must be finite")
        if self.h == 0:
            raise DomainError("Lm**2 - L1*L2 must be nonzero")
        if self.L1 ** 2 <= self.Lm ** 2:
            warnings.warn(
                "L1**2 <= Lm**2: zero dynamics of the winding currents are not stable",
                RuntimeWarning,
                stacklevel=3,
            )

    @property
    def h(self) -> float:
        """``Lm**2 - L1*L2``; negative for a physical transformer."""
        return self.Lm ** 2 - self.L1 * self.L2

    @property
    def ws(self) -> float:
        return 2.0 * math.pi * self.fs

    @property
    def v2_gain(self) -> float:
        """Factor applied to ``Vc2`` where it drives the transformer."""
        return self.n if self.refer_secondary_voltage else 1.0

    def replace(self, **changes) -> "ConverterParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ControlVector:
    """Triple-phase-shift control: pulse widths ``d1``, ``d2`` and bridge shift ``d3``."""

    d1: float
    d2: float
    d3: float

    def __post_init__(self):
        for name in ("d1", "d2"):
            value = getattr(self, name)
            if not (0.0 <= value <= math.pi):
                raise DomainError(f"{name} must lie in [0, pi], got {value!r}")
        if not math.isfinite(self.d3):
            raise DomainError("d3 must be finite")

    @property
    def delta(self) -> float:
        return outer_phase_shift(self.d1, self.d2, self.d3)

    @classmethod
    def from_delta(cls, d1: float, d2: float, delta: float) -> "ControlVector":
        return cls(d1, d2, delta - (d1 - d2) / 2.0)


@dataclass(frozen=True)
class FullState:
    Id: float
    Vc1: float
    I1: float
    I2: float
    Vc2: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in dataclasses.astuple(self)):
            raise DomainError("FullState entries must be finite")

    def as_array(self) -> np.ndarray:
        return np.array(dataclasses.astuple(self), dtype=float)

    @classmethod
    def from_array(cls, x) -> "FullState":
        return cls(*(float(v) for v in np.asarray(x, dtype=float).reshape(5)))


@dataclass(frozen=True)
class ConstantCurrent:
    """Current-source load drawing ``Io`` amperes from the output capacitor."""

    Io: float

    def current(self, Vc2: float) -> float:
        return self.Io

    def conductance(self, Vc2: float) -> float:
        """``d(load current)/d(Vc2)``."""
        return 0.0


@dataclass(frozen=True)
class ConstantPower:
    """Constant-power load; draws ``P / Vc2``."""

    P: float

    def current(self, Vc2: float) -> float:
        if not Vc2 > 0:
            raise SingularLoadError(f"constant-power load needs Vc2 > 0, got {Vc2!r}")
        return self.P / Vc2

    def conductance(self, Vc2: float) -> float:
        if not Vc2 > 0:
            raise SingularLoadError(f"constant-power load needs Vc2 > 0, got {Vc2!r}")
        return -self.P / Vc2 ** 2


def outer_phase_shift(d1: float, d2: float, d3: float) -> float:
    """Phase shift between the fundamentals of the two bridge voltages."""
    return d3 + (d1 - d2) / 2.0


def switching_waveform(d, phase, theta):
    """Three-level quasi-square wave of pulse width ``d``.

    The positive pulse is centred at ``theta - phase = pi/2`` and the negative
    one half a period later; the wave is zero in between. Works elementwise on
    array ``theta``. Exactly on an edge the value is 0.

    >>> float(switching_waveform(math.pi, 0.0, math.pi / 2))
    1.0
    """
    if not (0.0 <= d <= math.pi):
        raise DomainError(f"pulse width must lie in [0, pi], got {d!r}")
    x = np.mod(np.asarray(theta, dtype=float) - phase - PHASOR_FRAME_SHIFT + math.pi,
               2.0 * math.pi) - math.pi
    ax = np.abs(x)
    half = d / 2.0
    out = np.where(ax < half, 1.0, np.where(ax > math.pi - half, -1.0, 0.0))
    return out if out.ndim else out[()]


def _transformer_coefficients(p: ConverterParams):
    """Resistive matrix ``K`` and voltage matrix ``B`` of the winding equations.

    ``p[I1, I2] = K @ [I1, I2] + B @ [s1*Vc1, s2*Vc2]``.
    """
    h = p.h
    k11 = (p.L2 if p.symmetric_resistance else p.L1) * p.R1 / h
    K = np.array([[k11, p.Lm * p.R2 / h],
                  [p.Lm * p.R1 / h, p.L1 * p.R2 / h]])
    g = p.v2_gain
    B = np.array([[-p.L2 / h, p.Lm * g / h],
                  [-p.Lm / h, p.L1 * g / h]])
    return K, B


def full_order_matrices(s1: float, s2: float, p: ConverterParams):
    """``(A, b)`` with ``dx/dt = A @ x + b - e_Vc2 * Io / C2`` for fixed switch states."""
    K, B = _transformer_coefficients(p)
    A = np.zeros((5, 5))
    A[0, 0] = -p.r / p.Ld
    A[0, 1] = -1.0 / p.Ld
    A[1, 0] = 1.0 / p.C1
    A[1, 2] = -s1 / p.C1
    A[2:4, 2:4] = K
    A[2:4, 1] = B[:, 0] * s1
    A[2:4, 4] = B[:, 1] * s2
    A[4, 3] = p.n * s2 / p.C2
    b = np.array([p.V1 / p.Ld, 0.0, 0.0, 0.0, 0.0])
    return A, b


def _as_vector(x) -> np.ndarray:
    if isinstance(x, FullState):
        return x.as_array()
    return np.asarray(x, dtype=float)


def full_order_rhs(x, s1: float, s2: float, load, p: ConverterParams) -> np.ndarray:
    """Time derivative of the switched state for switch states ``s1``, ``s2``.

    Returns ``[pId, pVc1, pI1, pI2, pVc2]``; the load supplies ``Io``.
    """
    Id, Vc1, I1, I2, Vc2 = _as_vector(x)
    K, B = _transformer_coefficients(p)
    Io = load.current(Vc2)
    v1 = s1 * Vc1
    v2 = s2 * Vc2
    return np.array([
        p.V1 / p.Ld - Vc1 / p.Ld - p.r / p.Ld * Id,
        Id / p.C1 - s1 * I1 / p.C1,
        K[0, 0] * I1 + K[0, 1] * I2 + B[0, 0] * v1 + B[0, 1] * v2,
        K[1, 0] * I1 + K[1, 1] * I2 + B[1, 0] * v1 + B[1, 1] * v2,
        p.n * s2 * I2 / p.C2 - Io / p.C2,
    ])


def full_order_jacobian(x, s1: float, s2: float, load, p: ConverterParams) -> np.ndarray:
    A, _ = full_order_matrices(s1, s2, p)
    A[4, 4] -= load.conductance(float(_as_vector(x)[4])) / p.C2
    return A


def fundamental_phasors(d1: float, d2: float, delta: float):
    """First-harmonic switching phasors ``(S_qd1, S_qd2)``.

    The primary phasor is real (its d-component is zero); the secondary one
    lags it by ``delta``.
    """
    for name, d in (("d1", d1), ("d2", d2)):
        if not (0.0 <= d <= math.pi):
            raise DomainError(f"{name} must lie in [0, pi], got {d!r}")
    S1 = complex(4.0 / math.pi * math.sin(d1 / 2.0), 0.0)
    S2 = 4.0 / math.pi * math.sin(d2 / 2.0) * complex(math.cos(delta), -math.sin(delta))
    return S1, S2


# -- parameter files ---------------------------------------------------------

_FLOAT_FIELDS = [f.name for f in dataclasses.fields(ConverterParams) if f.type in ("float", float)]
_BOOL_FIELDS = [f.name for f in dataclasses.fields(ConverterParams) if f.type in ("bool", bool)]


def default_params_path() -> Path:
    return Path(str(resources.files("dabdyn") / "data" / "default_params.ini"))


def load_params(path=None) -> ConverterParams:
    """Read a parameter file.

    The file is INI-style with a ``[converter]`` section of SI-unit floats and
    an optional ``[model]`` section of boolean switches. Keys that are absent
    take the built-in defaults; unknown keys are an error.
    """
    if path is None:
        path = default_params_path()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    kwargs = {}
    for section in cp.sections():
        if section not in ("converter", "model"):
            raise DomainError(f"unknown section [{section}] in {path}")
        for key, raw in cp.items(section):
            if key in _FLOAT_FIELDS and section == "converter":
                kwargs[key] = float(raw)
            elif key in _BOOL_FIELDS and section == "model":
                kwargs[key] = cp.getboolean(section, key)
            else:
                raise DomainError(f"unknown key {key!r} in [{section}] of {path}")
    return ConverterParams(**kwargs)


def save_params(p: ConverterParams, path) -> None:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["converter"] = {k: repr(float(getattr(p, k))) for k in _FLOAT_FIELDS}
    cp["model"] = {k: str(bool(getattr(p, k))).lower() for k in _BOOL_FIELDS}
    with open(path, "w", encoding="utf-8") as fh:
        cp.write(fh)
