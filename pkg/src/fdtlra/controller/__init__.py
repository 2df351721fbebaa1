"""Residual-compensated tracking control and the closed-loop simulation."""
from .law import (ControllerGains, adaptive_gain_step, control_input, sliding_variable, switching_direction)
from .loop import (MODES, ClosedLoopLog, DoubleIntegratorPlant, LoopConfig, MultibodyPlant, run_closed_loop)
from .pid import PidController, PidGains

__all__ = ["ControllerGains", "adaptive_gain_step", "control_input", "sliding_variable", "switching_direction",
           "MODES", "ClosedLoopLog", "DoubleIntegratorPlant", "LoopConfig", "MultibodyPlant", "run_closed_loop",
           "PidController", "PidGains"]
