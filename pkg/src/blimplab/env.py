"""Waypoint-reaching MDP around the blimp simulator.

Observation (10 values in [-1, 1]):
    act part   m0 / throttle_cap, m2, s, f0, f2        (one of each symmetric pair)
    blimp part l_r / l_max, psi_r / pi, z_r / z_max, |V| / v_max, w / w_max

``g = (l_r, psi_r, z_r)`` is the target in body cylindrical coordinates:
planar range, bearing relative to the nose (wrapped to (-pi, pi]) and
altitude difference (positive when the target is higher). ``w`` is
``|V| sin(pitch)``.

Rewards use the clean (pre-noise, clipped) channels; noise only corrupts
what the policy sees.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    ACTUATOR_ORDER, ActuatorState, BlimpParams, WindField, apply_actuator_delta,
    dynamics_step, trim_state, wrap_angle,
)
from .errors import ParameterError, SimulationDiverged

N_ACTIONS = 7
ACTION_NAMES = ("IDLE", "THRUST+", "THRUST-", "NOSE_UP", "NOSE_DOWN", "NOSE_LEFT", "NOSE_RIGHT")

# Rows in ACTUATOR_ORDER = (m2, f0, f1, f2, f3, s, m0, m1).
ACTION_TABLE = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.01, 0.01],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.01, -0.01],
    [0.0, 0.025, 0.025, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, -0.025, -0.025, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.025, 0.0, 0.0, 0.025, 0.025, 0.0, 0.0, 0.0],
    [-0.025, 0.0, 0.0, -0.025, -0.025, 0.0, 0.0, 0.0],
])
ACTION_TABLE.setflags(write=False)

OBS_DIM = 10

TRAJECTORY_COLUMNS = (
    "time", "north", "east", "down", "pitch", "yaw", "speed", "vertical_speed",
    *ACTUATOR_ORDER, "action", "r_success", "r_track", "r_act", "r_total", "distance",
)

# actuator groups sharing one action-noise draw: tail, pitch fins, yaw fins, mains
_NOISE_GROUPS = np.array([0, 1, 1, 2, 2, 3, 3, 3])


@dataclass(frozen=True)
class EnvConfig:
    sim_dt: float = 0.1
    policy_dt: float = 0.5
    episode_length: float = 200.0
    success_radius: float = 10.0
    target_sampling_half_extent: float = 100.0
    min_target_altitude: float = 10.0  # sampled targets stay at down <= -this
    spawn_position: tuple = (0.0, 0.0, -100.0)
    spawn_yaw: float = 0.0
    noise_std: float = 0.05  # additive Gaussian, scaled observation units
    action_noise: float = 0.05  # multiplicative uniform half-width on deltas
    l_max: float = 200.0
    z_max: float = 100.0
    v_max: float = 10.0
    w_max: float = 3.0
    reward_weights: tuple = (1.0, 0.95, 0.05)
    navigate_coeffs: tuple = (0.1, 0.7, 0.2)  # |z_r|, |l_r|, |psi_r|
    hover_coeffs: tuple = (0.3, 0.7)  # |z_r|, |l_r|
    action_coeff: float = 1.0

    def __post_init__(self):
        ratio = self.policy_dt / self.sim_dt
        if self.sim_dt <= 0 or self.sim_dt > 0.1:
            raise ParameterError("sim_dt must be in (0, 0.1]")
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ParameterError("policy_dt must be an integer multiple of sim_dt")
        if self.success_radius <= 0:
            raise ParameterError("success_radius must be > 0")
        for name in ("l_max", "z_max", "v_max", "w_max", "episode_length"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be > 0")
        if self.target_sampling_half_extent < 0 or self.noise_std < 0 or not 0 <= self.action_noise < 1:
            raise ParameterError("sampling extent and noise levels must be non-negative")

    @property
    def sim_steps_per_action(self):
        return int(round(self.policy_dt / self.sim_dt))

    @property
    def steps_per_episode(self):
        return int(math.ceil(self.episode_length / self.policy_dt - 1e-9))


@dataclass(frozen=True)
class TargetSpec:
    position: tuple  # NED

    def cylindrical(self, state):
        return target_coordinates(state, self.position)


@dataclass(frozen=True)
class Observation:
    act_part: np.ndarray
    blimp_part: np.ndarray

    @property
    def vector(self):
        return np.concatenate([self.act_part, self.blimp_part])

    @classmethod
    def from_vector(cls, vec):
        vec = np.asarray(vec, dtype=float)
        return cls(vec[:5].copy(), vec[5:].copy())


@dataclass(frozen=True)
class RewardBreakdown:
    success: float
    track: float
    act: float
    total: float
    in_success_region: bool


def decode_action(a):
    """Actuator delta (``ACTUATOR_ORDER``) for action index ``a``."""
    if isinstance(a, bool) or not isinstance(a, (int, np.integer)) or not 0 <= a < N_ACTIONS:
        raise ValueError(f"action must be an integer in [0, {N_ACTIONS - 1}], got {a!r}")
    return ACTION_TABLE[int(a)].copy()


def target_coordinates(state, target_position):
    """(l_r, psi_r, z_r) of a world-frame point relative to the vehicle."""
    dn = target_position[0] - state.position[0]
    de = target_position[1] - state.position[1]
    dd = target_position[2] - state.position[2]
    l_r = math.hypot(dn, de)
    psi_r = wrap_angle(math.atan2(de, dn) - state.yaw) if l_r > 0 else 0.0
    return l_r, psi_r, -dd


def distance_to(state, target_position):
    return math.dist(state.position, target_position)


def clean_observation(state, act, target, config=EnvConfig(), throttle_cap=0.5):
    pos = target.position if isinstance(target, TargetSpec) else target
    l_r, psi_r, z_r = target_coordinates(state, pos)
    speed = state.speed
    w = speed * math.sin(state.pitch)
    raw = np.array([
        act.m0 / throttle_cap, act.m2, act.s, act.f0, act.f2,
        l_r / config.l_max, psi_r / math.pi, z_r / config.z_max,
        speed / config.v_max, w / config.w_max,
    ])
    return np.clip(raw, -1.0, 1.0)


def observe(state, act, target, noise_std, rng, config=EnvConfig(), throttle_cap=0.5):
    vec = clean_observation(state, act, target, config, throttle_cap)
    if noise_std > 0:
        vec = np.clip(vec + rng.normal(0.0, noise_std, size=OBS_DIM), -1.0, 1.0)
    return Observation.from_vector(vec)


def compute_reward(obs_clean, act, distance, eps, config=EnvConfig(), throttle_cap=0.5):
    l_r, psi_r, z_r = (abs(float(x)) for x in obs_clean.blimp_part[:3])
    inside = distance <= eps
    if inside:
        j0, j1 = config.hover_coeffs
        track = -(j0 * z_r + j1 * l_r)
    else:
        i0, i1, i2 = config.navigate_coeffs
        track = -(i0 * z_r + i1 * l_r + i2 * psi_r)
    success = 1.0 if inside else 0.0
    m0, m1 = act.m0 / throttle_cap, act.m1 / throttle_cap
    r_act = -config.action_coeff * math.sqrt(m0 * m0 + m1 * m1 + act.m2 * act.m2)
    w0, w1, w2 = config.reward_weights
    total = w0 * success + w1 * track + w2 * r_act
    return RewardBreakdown(success, float(track), r_act, float(total), bool(inside))


class BlimpEnv:
    """Single-owner environment instance with its own RNG stream.

    ``step`` takes a discrete action index; ``step_actuators`` takes an
    absolute ``ActuatorState`` (continuous baselines) and skips the action
    table and action noise.
    """

    def __init__(self, config=None, params=None, wind=None, seed=None, log=False):
        self.config = config or EnvConfig()
        self.params = params or BlimpParams()
        self.wind = wind or WindField()
        self.rng = np.random.default_rng(seed)
        self.log = log
        self.rows = []
        self.state = None
        self.actuators = ActuatorState()
        self.target = None
        self.steps = 0

    @property
    def throttle_cap(self):
        return self.params.throttle_cap

    @property
    def distance(self):
        return distance_to(self.state, self.target.position)

    def sample_target(self):
        c = self.config
        spawn = np.asarray(c.spawn_position, dtype=float)
        h = c.target_sampling_half_extent
        pos = spawn + self.rng.uniform(-h, h, size=3)
        pos[2] = min(pos[2], -c.min_target_altitude)
        return TargetSpec(tuple(float(x) for x in pos))

    def reset(self, seed=None, target=None, spawn=None, spawn_yaw=None):
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        c = self.config
        pos = c.spawn_position if spawn is None else spawn
        yaw = c.spawn_yaw if spawn_yaw is None else spawn_yaw
        self.state = trim_state(self.params, pos, yaw)
        self.actuators = ActuatorState()
        self.steps = 0
        self.rows = []
        if target is None:
            self.target = self.sample_target()
        else:
            self.target = target if isinstance(target, TargetSpec) else TargetSpec(tuple(map(float, target)))
        return self._observe()

    def set_target(self, position):
        self.target = TargetSpec(tuple(float(x) for x in position))

    def clean_observation(self):
        return Observation.from_vector(
            clean_observation(self.state, self.actuators, self.target, self.config, self.throttle_cap))

    def _observe(self):
        return observe(self.state, self.actuators, self.target, self.config.noise_std,
                       self.rng, self.config, self.throttle_cap)

    def perturb_delta(self, delta):
        a = self.config.action_noise
        factors = self.rng.uniform(1.0 - a, 1.0 + a, size=4) if a > 0 else np.ones(4)
        return delta * factors[_NOISE_GROUPS]

    def step(self, action):
        delta = self.perturb_delta(decode_action(action))
        act = apply_actuator_delta(self.actuators, delta, self.throttle_cap)
        return self._advance(act, int(action))

    def step_actuators(self, act):
        clipped = ActuatorState.from_vector(act.as_vector(), self.throttle_cap)
        return self._advance(clipped, -1)

    def _advance(self, act, action):
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        self.actuators = act
        s = self.state
        try:
            for _ in range(self.config.sim_steps_per_action):
                s = dynamics_step(s, act, self.wind, self.params, self.config.sim_dt)
        except SimulationDiverged as exc:
            exc.context.update(episode_step=self.steps, action=action)
            raise
        self.state = s
        self.steps += 1
        clean = self.clean_observation()
        dist = self.distance
        reward = compute_reward(clean, act, dist, self.config.success_radius,
                                self.config, self.throttle_cap)
        obs = self._observe()
        done = self.steps >= self.config.steps_per_episode
        if self.log:
            self.rows.append(trajectory_row(s, act, action, reward, dist))
        info = {"distance": dist, "clean_obs": clean, "state": s, "time": s.time}
        return obs, reward, done, info


def trajectory_row(state, act, action, reward, distance):
    speed = state.speed
    return (state.time, *state.position, state.pitch, state.yaw, speed,
            speed * math.sin(state.pitch), *(getattr(act, k) for k in ACTUATOR_ORDER),
            action, reward.success, reward.track, reward.act, reward.total, distance)


def write_trajectory_csv(path, rows):
    # csv writes floats with repr(), so values round-trip exactly
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        w.writerows(rows)
