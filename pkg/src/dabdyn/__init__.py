"""Dynamics, steady-state and stability analysis of a dual active bridge converter."""

from .exceptions import (
    ConvergenceError,
    DabError,
    DomainError,
    InfeasiblePowerError,
    IntegrationBlowupError,
    SingularLoadError,
)
from .model import (
    ConverterParams,
    ControlVector,
    FullState,
    ConstantCurrent,
    ConstantPower,
    load_params,
    save_params,
)
from .envelope import EnvelopeState, steady_state_residual
from .optsolve import (
    OperatingPoint,
    SweepTable,
    max_transferable_power,
    solve_operating_point,
    sweep_power,
)
from .zvs import ZvsMap, ZvsReport, zvs_check, zvs_map
from .stability import EigenReport, eigen_report, eigen_table, zero_dynamics_verdicts
from .geometry import AffineSystem, geometry_report
from .simulate import Waveforms, periodic_state, run_switched, steady_metrics, validate_operating_point

__version__ = "0.1.0"
