from .agent import (
    AgentConfig, Batch, QRDQNAgent, ReplayBuffer, TrainResult, TrainSchedule,
    loss_and_grads, quantile_huber_loss, select_action, td_targets, train,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .network import QuantileTable, forward, forward_batch, init_params, quantile_midpoints

__all__ = [
    "AgentConfig", "Batch", "QRDQNAgent", "QuantileTable", "ReplayBuffer", "TrainResult",
    "TrainSchedule", "forward", "forward_batch", "init_params", "load_checkpoint",
    "loss_and_grads", "quantile_huber_loss", "quantile_midpoints", "save_checkpoint",
    "select_action", "td_targets", "train",
]
