"""Self-checks run by ``blimplab verify``.

Each check returns a ``CheckResult``; ``run_all`` collects them. The checks
are deliberately independent of the test suite so an installed copy can
audit itself without pytest.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    ActuatorState, BlimpParams, BlimpState, WindField, dynamics_step, kinetic_energy, trim_state,
)
from .env import ACTION_NAMES, ACTION_TABLE, N_ACTIONS, decode_action
from .qrdqn.agent import Batch, loss_and_grads, td_targets
from .qrdqn.network import PARAM_NAMES, copy_params, init_params, quantile_midpoints


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        return f"{'PASS' if self.ok else 'FAIL'}  {self.name:<20} {self.detail}  ({self.seconds:.2f} s)"


def random_batch(rng, size, obs_dim=10, n_actions=N_ACTIONS):
    return Batch(obs=rng.uniform(-1, 1, (size, obs_dim)),
                 actions=rng.integers(0, n_actions, size),
                 rewards=rng.uniform(-1, 1, size),
                 next_obs=rng.uniform(-1, 1, (size, obs_dim)),
                 dones=rng.random(size) < 0.2)


def gradient_error(seed=0, batch_size=8, n_quantiles=12, hidden=16, h=1e-6, kappa=1.0,
                   gamma=0.99):
    """Worst relative error between analytic and central-difference gradients.

    Every parameter entry is perturbed. The error for one entry is
    ``|a - n| / max(|a| + |n|, 1e-8)``.
    """
    rng = np.random.default_rng(seed)
    params = init_params(rng, 10, hidden, N_ACTIONS, n_quantiles)
    # larger head weights than the default init so quantiles are well separated
    params["W3"] = rng.normal(0.0, 0.5, params["W3"].shape)
    params["b3"] = rng.normal(0.0, 0.1, params["b3"].shape)
    params["g1"] = rng.uniform(0.5, 1.5, hidden)
    params["o1"] = rng.normal(0.0, 0.1, hidden)
    params["g2"] = rng.uniform(0.5, 1.5, hidden)
    params["o2"] = rng.normal(0.0, 0.1, hidden)
    batch = random_batch(rng, batch_size)
    targets = td_targets(batch, copy_params(params), gamma)
    taus = quantile_midpoints(n_quantiles)
    _, grads = loss_and_grads(params, batch, targets, taus, kappa)
    worst = 0.0
    for name in PARAM_NAMES:
        p = params[name]
        flat = p.reshape(-1)
        g = grads[name].reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            lp, _ = loss_and_grads(params, batch, targets, taus, kappa)
            flat[i] = old - h
            lm, _ = loss_and_grads(params, batch, targets, taus, kappa)
            flat[i] = old
            num = (lp - lm) / (2 * h)
            err = abs(g[i] - num) / max(abs(g[i]) + abs(num), 1e-8)
            worst = max(worst, err)
    return worst


def trim_drift(params=None, steps=100):
    """Largest per-step change of any state component from trim with no input."""
    params = params or BlimpParams()
    s = trim_state(params, (0.0, 0.0, -50.0), 0.3)
    worst = 0.0
    for _ in range(steps):
        nxt = dynamics_step(s, ActuatorState(), WindField(), params, 0.1)
        a, b = s.as_array()[:-1], nxt.as_array()[:-1]
        worst = max(worst, float(np.max(np.abs(a - b))))
        s = nxt
    return worst


def wind_drift_error(wind=(2.0, 0.0, 0.0), seconds=600.0, yaw=0.0, params=None):
    """Relative gap between ground velocity and wind after drifting unpowered."""
    params = params or BlimpParams()
    w = WindField(wind)
    s = trim_state(params, (0.0, 0.0, -100.0), yaw)
    for _ in range(int(round(seconds / 0.1))):
        s = dynamics_step(s, ActuatorState(), w, params, 0.1)
    gap = math.dist(s.ground_velocity, w.velocity)
    return gap / math.hypot(*w.velocity)


def energy_increase(steps=10_000, params=None):
    """Largest step-to-step rise of kinetic energy, still air, all actuators off.

    Starts level so no pendulum energy is stored; moving in every channel.
    """
    params = params or BlimpParams()
    s = BlimpState(position=(0.0, 0.0, -50.0), ground_velocity=(3.0, -1.0, 0.5), yaw=0.5,
                   yaw_rate=-0.1)
    worst = -math.inf
    e = kinetic_energy(s, params)
    for _ in range(steps):
        s = dynamics_step(s, ActuatorState(), WindField(), params, 0.1)
        e2 = kinetic_energy(s, params)
        worst = max(worst, e2 - e)
        e = e2
    return worst


def mirror_error(seed=0, trials=50, params=None):
    """Largest deviation from yaw mirror symmetry over random states."""
    params = params or BlimpParams()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        vn, ve, vd = rng.uniform(-4, 4, 3)
        s = BlimpState(position=tuple(rng.uniform(-50, 50, 3)), ground_velocity=(vn, ve, vd),
                       pitch=rng.uniform(-0.4, 0.4), yaw=rng.uniform(-3, 3),
                       pitch_rate=rng.uniform(-0.2, 0.2), yaw_rate=rng.uniform(-0.3, 0.3))
        act = ActuatorState.commanded(rng.uniform(0, 0.5), rng.uniform(-1, 1),
                                      rng.uniform(-1, 1), rng.uniform(-1, 1))
        wn, we = rng.uniform(-3, 3, 2)
        wind = WindField((wn, we, 0.0))
        m = mirror_state(s)
        m_act = ActuatorState(m0=act.m0, m1=act.m1, m2=-act.m2, f0=act.f0, f1=act.f1,
                              f2=-act.f2, f3=-act.f3)
        a = dynamics_step(s, act, wind, params, 0.1)
        b = dynamics_step(m, m_act, WindField((wn, -we, 0.0)), params, 0.1)
        diff = mirror_state(b).as_array() - a.as_array()
        diff[7] = (diff[7] + math.pi) % (2 * math.pi) - math.pi
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst


def mirror_state(s):
    pn, pe, pd = s.position
    vn, ve, vd = s.ground_velocity
    return BlimpState((pn, -pe, pd), (vn, -ve, vd), s.pitch, -s.yaw, s.pitch_rate, -s.yaw_rate,
                      s.time)


def action_table_problems():
    """Structural audit of the discrete action table; returns a list of problems."""
    problems = []
    if ACTION_TABLE.shape != (N_ACTIONS, 8):
        return [f"table shape {ACTION_TABLE.shape}"]
    if np.any(ACTION_TABLE[0] != 0):
        problems.append("IDLE row is not all zero")
    for a in range(N_ACTIONS):
        row = decode_action(a)
        if row[5] != 0:
            problems.append(f"{ACTION_NAMES[a]} moves the servo")
        if row[1] != row[2] or row[3] != row[4] or row[6] != row[7]:
            problems.append(f"{ACTION_NAMES[a]} splits a symmetric pair")
    for a, b in ((1, 2), (3, 4), (5, 6)):
        if not np.array_equal(ACTION_TABLE[a], -ACTION_TABLE[b]):
            problems.append(f"{ACTION_NAMES[a]} / {ACTION_NAMES[b]} are not opposite")
    if np.max(np.abs(ACTION_TABLE[:, 6:])) != 0.01:
        problems.append("motor step is not 0.01")
    if np.max(np.abs(ACTION_TABLE[:, :5])) != 0.025:
        problems.append("fin/tail step is not 0.025")
    return problems


def _timed(name, fn, judge):
    t0 = time.perf_counter()
    try:
        value = fn()
        ok, detail = judge(value)
    except Exception as exc:  # a check that crashes is a failed check
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return CheckResult(name, ok, detail, time.perf_counter() - t0)


def run_all(quick=False):
    checks = [
        ("action-table", action_table_problems,
         lambda p: (not p, "ok" if not p else "; ".join(p))),
        ("gradient", lambda: max(gradient_error(seed) for seed in range(2 if quick else 5)),
         lambda e: (e < 1e-4, f"max rel err {e:.2e} (< 1e-4)")),
        ("trim-fixed-point", trim_drift,
         lambda d: (d < 1e-12, f"max per-step drift {d:.1e} (< 1e-12)")),
        ("energy", lambda: energy_increase(1000 if quick else 10_000),
         lambda d: (d <= 0.0, f"max KE rise {d:.1e} J (<= 0)")),
        ("wind-drift", wind_drift_error,
         lambda e: (e < 0.05, f"relative gap {e:.3%} (< 5%)")),
        ("yaw-mirror", mirror_error,
         lambda d: (d < 1e-9, f"max deviation {d:.1e} (< 1e-9)")),
    ]
    return [_timed(name, fn, judge) for name, fn, judge in checks]
