"""Blimp navigation lab: reduced dynamics, waypoint MDP, QR-DQN agent, PID baseline, task harness."""

__version__ = "0.1.0"

from .dynamics import (  # noqa: E402
    ActuatorState, BlimpParams, BlimpState, WindField, apply_actuator_delta, dynamics_step,
    net_vertical_force, trim_state,
)
from .env import (  # noqa: E402
    ACTION_NAMES, ACTION_TABLE, BlimpEnv, EnvConfig, Observation, RewardBreakdown, TargetSpec,
    compute_reward, decode_action, observe,
)
from .pid import PidController, PidGains, pid_command  # noqa: E402

__all__ = [
    "ACTION_NAMES", "ACTION_TABLE", "ActuatorState", "BlimpEnv", "BlimpParams", "BlimpState",
    "EnvConfig", "Observation", "PidController", "PidGains", "RewardBreakdown", "TargetSpec",
    "WindField", "apply_actuator_delta", "compute_reward", "decode_action", "dynamics_step",
    "net_vertical_force", "observe", "pid_command", "trim_state",
]
