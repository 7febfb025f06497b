# Short QR-DQN run with the settings from configs/hover30.toml, compared
# with the random and idle-at-target references on the 30 m box and on a
# 10 m box. 20k steps takes under a minute; the acceptance suite uses 200k.
# Run with: python3 demos/train_small.py [steps]
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from blimplab.config import load_config
from blimplab.env import BlimpEnv, EnvConfig
from blimplab.harness import RandomPolicy, RLPolicy, evaluate_returns, idle_at_target_return
from blimplab.qrdqn import QRDQNAgent, save_checkpoint, train

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000
run = load_config(Path(__file__).parents[1] / "configs" / "hover30.toml", environ={})

agent = QRDQNAgent(run.agent_config())
train(BlimpEnv(run.env), agent, replace(run.train_schedule(), total_steps=steps),
      progress=lambda row: print("episode %d  return %.1f  eps %.2f" % (row[0], row[2], row[4])))
save_checkpoint(agent, "demo_agent.ckpt")

for cfg in (run.env, EnvConfig(target_sampling_half_extent=10.0)):
    greedy = np.mean(evaluate_returns(RLPolicy(agent), 10, cfg, seed=1))
    rand = np.mean(evaluate_returns(RandomPolicy(1), 10, cfg, seed=1))
    top = idle_at_target_return(cfg)
    print(f"box {cfg.target_sampling_half_extent:.0f} m: greedy {greedy:.1f}   random {rand:.1f}   "
          f"idle-at-target {top:.1f}   gap closed {(greedy - rand) / (top - rand):.2f}")
