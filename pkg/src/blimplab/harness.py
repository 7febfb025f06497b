"""Navigation, hover and robustness experiments for any policy.

Waypoints are given to users in ENU (east, north, up) the way the task is
usually drawn; everything inside runs in NED. ``enu_to_ned`` is the only
place the conversion happens.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import partial

import numpy as np

from .dynamics import ACTUATOR_ORDER, ActuatorState, BlimpParams, WindField
from .env import (
    N_ACTIONS, TRAJECTORY_COLUMNS, BlimpEnv, EnvConfig, write_trajectory_csv,
)
from .errors import BlimpLabError, CsvFormatError
from .pid import PidController, PidGains

# Action-table step sizes inflated by the 5 % action-noise bound.
MOTOR_STEP_BOUND = 0.0105
FIN_STEP_BOUND = 0.02625
STEP_BOUNDS = {"m0": MOTOR_STEP_BOUND, "m1": MOTOR_STEP_BOUND, "m2": FIN_STEP_BOUND,
               "f0": FIN_STEP_BOUND, "f1": FIN_STEP_BOUND, "f2": FIN_STEP_BOUND,
               "f3": FIN_STEP_BOUND, "s": 0.0}

SWEEP_PARAMETERS = ("wind_speed", "buoyancy_factor", "ballast_mass")


def enu_to_ned(p):
    e, n, u = p
    return (float(n), float(e), -float(u))


def ned_to_enu(p):
    n, e, d = p
    return (float(e), float(n), -float(d))


# --------------------------------------------------------------------- policies

class Policy:
    name = "policy"
    discrete = True

    def reset(self, env):
        pass

    def __call__(self, env, obs):
        raise NotImplementedError


class IdlePolicy(Policy):
    name = "idle"

    def __call__(self, env, obs):
        return 0


class RandomPolicy(Policy):
    name = "random"

    def __init__(self, seed=0):
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def reset(self, env):
        self.rng = np.random.default_rng(self.seed)

    def __call__(self, env, obs):
        return int(self.rng.integers(N_ACTIONS))


class RLPolicy(Policy):
    name = "rl"

    def __init__(self, agent):
        self.agent = agent

    def __call__(self, env, obs):
        return self.agent.greedy(obs)


class PidPolicy(Policy):
    name = "pid"
    discrete = False

    def __init__(self, gains=None):
        self.gains = gains or PidGains()
        self.controller = None

    def reset(self, env):
        self.controller = PidController(self.gains, env.params)

    def __call__(self, env, obs):
        return self.controller.command(env.state, env.actuators, env.target, env.config.policy_dt,
                                       env.wind.velocity)


def make_policy(kind, agent=None, gains=None, seed=0):
    if kind == "idle":
        return IdlePolicy()
    if kind == "random":
        return RandomPolicy(seed)
    if kind == "pid":
        return PidPolicy(gains)
    if kind == "rl":
        if agent is None:
            raise ValueError("rl policy needs a trained agent")
        return RLPolicy(agent)
    raise ValueError(f"unknown policy {kind!r}")


def policy_step(env, policy, obs):
    out = policy(env, obs)
    if isinstance(out, ActuatorState):
        return env.step_actuators(out)
    return env.step(out)


# ---------------------------------------------------------------------- reports

@dataclass(frozen=True)
class TrackSpec:
    waypoints: tuple  # NED
    trigger_radius: float = 15.0
    laps: int = 3
    direction: str = "ccw"
    spawn: tuple = (0.0, 0.0, -50.0)
    spawn_yaw: float = 0.0

    def __post_init__(self):
        if len(self.waypoints) < 1:
            raise ValueError("track needs at least one waypoint")
        if self.trigger_radius <= 0 or self.laps < 1:
            raise ValueError("trigger_radius and laps must be positive")


def square_track(side=100.0, altitude=50.0, trigger_radius=15.0, laps=3):
    """Counter-clockwise square (seen from above), starting at the ENU origin."""
    enu = [(side, 0.0, altitude), (side, side, altitude), (0.0, side, altitude),
           (0.0, 0.0, altitude)]
    wps = tuple(enu_to_ned(p) for p in enu)
    spawn = enu_to_ned((0.0, 0.0, altitude))
    yaw = math.atan2(wps[0][1] - spawn[1], wps[0][0] - spawn[0])
    return TrackSpec(wps, trigger_radius, laps, "ccw", spawn, yaw)


@dataclass
class TaskReport:
    task: str
    policy: str
    completed: bool
    total_time: float
    trigger_times: list = field(default_factory=list)
    trigger_distances: list = field(default_factory=list)
    trigger_waypoints: list = field(default_factory=list)
    mean_cross_track: float | None = None
    max_cross_track: float | None = None
    mean_altitude_error: float | None = None
    max_altitude_error: float | None = None
    altitude_bias: float | None = None  # mean (altitude - target altitude), m
    mean_planar_radius: float | None = None
    max_planar_radius: float | None = None
    energy: float = 0.0
    smoothness: dict = field(default_factory=dict)
    reward_totals: dict = field(default_factory=dict)
    steps: int = 0
    reward_series: list = field(default_factory=list, repr=False)
    rows: list = field(default_factory=list, repr=False)

    @property
    def n_triggers(self):
        return len(self.trigger_times)

    @property
    def time_to_complete(self):
        return self.total_time if self.completed else math.inf

    def degradation_key(self):
        """Sort key: larger means worse (failed runs rank by fewer triggers)."""
        if self.completed:
            return (0, self.total_time)
        return (1, -self.n_triggers)

    def summary(self):
        d = asdict(self)
        d.pop("rows")
        d.pop("reward_series")
        d["n_triggers"] = self.n_triggers
        return d

    def to_json(self):
        return json.dumps(self.summary(), indent=2, sort_keys=True, allow_nan=True)

    def write(self, stem):
        """Write ``<stem>.json`` (summary) and ``<stem>.csv`` (trajectory)."""
        with open(f"{stem}.json", "w") as fh:
            fh.write(self.to_json() + "\n")
        write_trajectory_csv(f"{stem}.csv", self.rows)


def _cross_track(p, a, b):
    """Planar distance from ``p`` to segment ``a``-``b``."""
    ax, ay = a[0], a[1]
    dx, dy = b[0] - ax, b[1] - ay
    L2 = dx * dx + dy * dy
    t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / L2))
    return math.hypot(p[0] - ax - t * dx, p[1] - ay - t * dy)


def _finish(report, acts, policy_dt, cross, alt_err, alt_bias, radii):
    prev = np.zeros(len(ACTUATOR_ORDER))
    maxd = np.zeros(len(ACTUATOR_ORDER))
    energy = 0.0
    for a in acts:
        v = a.as_vector()
        maxd = np.maximum(maxd, np.abs(v - prev))
        prev = v
        energy += (a.m0 * a.m0 + a.m1 * a.m1 + a.m2 * a.m2) * policy_dt
    report.energy = energy
    report.smoothness = {k: float(x) for k, x in zip(ACTUATOR_ORDER, maxd)}
    if cross:
        report.mean_cross_track = float(np.mean(cross))
        report.max_cross_track = float(np.max(cross))
    if alt_err:
        report.mean_altitude_error = float(np.mean(alt_err))
        report.max_altitude_error = float(np.max(alt_err))
        report.altitude_bias = float(np.mean(alt_bias))
    if radii:
        report.mean_planar_radius = float(np.mean(radii))
        report.max_planar_radius = float(np.max(radii))
    series = np.array(report.reward_series) if report.reward_series else np.zeros((0, 4))
    report.reward_totals = {k: float(series[:, i].sum()) for i, k in
                            enumerate(("success", "track", "act", "total"))}
    report.steps = len(acts)
    return report


def _make_env(env_config, params, wind, seed):
    return BlimpEnv(env_config or EnvConfig(), params or BlimpParams(), wind or WindField(),
                    seed=seed, log=True)


def run_navigation(policy, track=None, env_config=None, params=None, wind=None, seed=0,
                   timeout=3000.0):
    """Fly the track until every waypoint of every lap triggers or ``timeout``."""
    track = track or square_track()
    env = _make_env(env_config, params, wind, seed)
    obs = env.reset(seed=seed, target=track.waypoints[0], spawn=track.spawn,
                    spawn_yaw=track.spawn_yaw)
    policy.reset(env)
    report = TaskReport("nav-square", policy.name, False, 0.0)
    n_wp = len(track.waypoints)
    total = n_wp * track.laps
    k = 0
    prev_wp = track.spawn
    acts, cross, alt_err, alt_bias = [], [], [], []
    max_steps = int(math.ceil(timeout / env.config.policy_dt - 1e-9))
    for _ in range(max_steps):
        obs, reward, _, info = policy_step(env, policy, obs)
        acts.append(env.actuators)
        report.reward_series.append((reward.success, reward.track, reward.act, reward.total))
        s = env.state
        wp = track.waypoints[k % n_wp]
        cross.append(_cross_track(s.position, prev_wp, wp))
        alt_err.append(abs(s.position[2] - wp[2]))
        alt_bias.append(wp[2] - s.position[2])
        if info["distance"] <= track.trigger_radius:
            report.trigger_times.append(s.time)
            report.trigger_distances.append(info["distance"])
            report.trigger_waypoints.append(k % n_wp)
            k += 1
            prev_wp = wp
            if k == total:
                report.completed = True
                break
            env.set_target(track.waypoints[k % n_wp])
    report.total_time = env.state.time
    report.rows = env.rows
    return _finish(report, acts, env.config.policy_dt, cross, alt_err, alt_bias, [])


def run_hover(policy, target=None, duration=600.0, spawn=None, env_config=None, params=None,
              wind=None, seed=0):
    """Hold position on ``target`` (NED; default 50 m above the origin)."""
    target = tuple(target) if target is not None else enu_to_ned((0.0, 0.0, 50.0))
    spawn = tuple(spawn) if spawn is not None else target
    env = _make_env(env_config, params, wind, seed)
    obs = env.reset(seed=seed, target=target, spawn=spawn)
    policy.reset(env)
    report = TaskReport("hover", policy.name, True, 0.0)
    acts, alt_err, alt_bias, radii = [], [], [], []
    n = int(math.ceil(duration / env.config.policy_dt - 1e-9)) if duration > 0 else 0
    for _ in range(n):
        obs, reward, _, _ = policy_step(env, policy, obs)
        acts.append(env.actuators)
        report.reward_series.append((reward.success, reward.track, reward.act, reward.total))
        p = env.state.position
        radii.append(math.hypot(p[0] - target[0], p[1] - target[1]))
        alt_err.append(abs(p[2] - target[2]))
        alt_bias.append(target[2] - p[2])
    report.total_time = env.state.time
    report.rows = env.rows
    return _finish(report, acts, env.config.policy_dt, [], alt_err, alt_bias, radii)


# ------------------------------------------------------------------- evaluation

def episode_return(policy, env_config=None, params=None, wind=None, seed=0, target=None,
                   spawn=None):
    """Undiscounted return of one full-length episode."""
    env = BlimpEnv(env_config or EnvConfig(), params or BlimpParams(), wind or WindField(), seed=seed)
    obs = env.reset(seed=seed, target=target, spawn=spawn)
    policy.reset(env)
    total, done = 0.0, False
    while not done:
        obs, reward, done, _ = policy_step(env, policy, obs)
        total += reward.total
    return total


def evaluate_returns(policy, n_episodes=20, env_config=None, params=None, wind=None, seed=0):
    seeds = np.random.SeedSequence(seed).generate_state(n_episodes)
    return [episode_return(policy, env_config, params, wind, int(s)) for s in seeds]


def idle_at_target_return(env_config=None, params=None, seed=0):
    """Upper reference: spawned on the target at rest and never actuating."""
    cfg = env_config or EnvConfig()
    return episode_return(IdlePolicy(), cfg, params, seed=seed, target=cfg.spawn_position)


# ------------------------------------------------------------------------ sweeps

@dataclass
class SweepCell:
    value: float
    report: TaskReport | None
    error: str | None = None


@dataclass
class SweepReport:
    parameter: str
    cells: list

    @property
    def values(self):
        return [c.value for c in self.cells]

    def reports(self):
        return [c.report for c in self.cells]

    def summary(self):
        out = []
        for c in self.cells:
            r = c.report
            out.append({"value": c.value, "error": c.error,
                        "completed": None if r is None else r.completed,
                        "time_to_complete": None if r is None or not r.completed else r.total_time,
                        "n_triggers": None if r is None else r.n_triggers,
                        "energy": None if r is None else r.energy})
        return {"parameter": self.parameter, "cells": out}


def _overrides(parameter, value, params, wind, wind_heading):
    params = params or BlimpParams()
    if parameter == "wind_speed":
        return params, WindField.from_speed(value, wind_heading)
    if parameter == "buoyancy_factor":
        return replace(params, buoyancy_factor=value), wind
    if parameter == "ballast_mass":
        return replace(params, ballast_mass=value), wind
    raise ValueError(f"unknown sweep parameter {parameter!r}; expected one of {SWEEP_PARAMETERS}")


def run_task(policy, task="nav-square", params=None, wind=None, env_config=None, seed=0,
             **task_kw):
    if task == "nav-square":
        return run_navigation(policy, env_config=env_config, params=params, wind=wind, seed=seed,
                              **task_kw)
    if task == "hover":
        return run_hover(policy, env_config=env_config, params=params, wind=wind, seed=seed,
                         **task_kw)
    raise ValueError(f"unknown task {task!r}")


def _sweep_cell(policy_factory, parameter, value, task, params, wind, wind_heading, env_config,
                seed, task_kw):
    try:
        p, w = _overrides(parameter, value, params, wind, wind_heading)
        report = run_task(policy_factory(), task, p, w, env_config, seed, **task_kw)
        return SweepCell(value, report)
    except (BlimpLabError, ValueError, FloatingPointError) as exc:
        return SweepCell(value, None, f"{type(exc).__name__}: {exc}")


def sweep(policy_factory, parameter, values, task="nav-square", params=None, wind=None,
          wind_heading=0.0, env_config=None, seed=0, workers=1, **task_kw):
    """One task run per value, otherwise identical.

    Every cell uses the same seed, so a one-value sweep reproduces a plain
    ``run_task`` call bit for bit. ``policy_factory`` must build a fresh
    policy (and be picklable when ``workers > 1``).
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"unknown sweep parameter {parameter!r}; expected one of {SWEEP_PARAMETERS}")
    values = [float(v) for v in values]
    if not all(math.isfinite(v) for v in values):
        raise ValueError("sweep values must be finite")
    job = partial(_sweep_cell, policy_factory, parameter, task=task, params=params, wind=wind,
                  wind_heading=wind_heading, env_config=env_config, seed=seed, task_kw=task_kw)
    if workers > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(job, values))
    else:
        cells = [job(v) for v in values]
    return SweepReport(parameter, cells)


# ------------------------------------------------------------------- CSV audits

def read_trajectory_csv(path):
    """Rows of a trajectory CSV as a float array (n, len(TRAJECTORY_COLUMNS))."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvFormatError("missing header row", line=1)
        if tuple(header) != TRAJECTORY_COLUMNS:
            raise CsvFormatError(f"unexpected header {header!r}", line=1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(TRAJECTORY_COLUMNS):
                raise CsvFormatError(f"expected {len(TRAJECTORY_COLUMNS)} fields, got {len(row)}",
                                     line=lineno)
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise CsvFormatError(str(exc), line=lineno) from None
    return np.array(rows, dtype=float).reshape(-1, len(TRAJECTORY_COLUMNS))


@dataclass
class AuditResult:
    max_deltas: dict
    violations: list  # (csv line, actuator, delta)
    enforced: bool

    @property
    def ok(self):
        return not (self.enforced and self.violations)


def smoothness_audit(path, kind="rl", bounds=None):
    """Largest per-policy-step change of each actuator in a trajectory CSV.

    For ``kind="rl"`` every change must respect the discrete-action bounds;
    other kinds (PID) are reported but never fail.
    """
    data = read_trajectory_csv(path)
    bounds = bounds or STEP_BOUNDS
    cols = [TRAJECTORY_COLUMNS.index(k) for k in ACTUATOR_ORDER]
    acts = np.vstack([np.zeros(len(cols)), data[:, cols]]) if len(data) else np.zeros((1, len(cols)))
    deltas = np.abs(np.diff(acts, axis=0))
    max_d = {k: float(deltas[:, i].max()) if len(deltas) else 0.0 for i, k in enumerate(ACTUATOR_ORDER)}
    violations = []
    for i, k in enumerate(ACTUATOR_ORDER):
        for r in np.nonzero(deltas[:, i] > bounds[k])[0]:
            violations.append((int(r) + 2, k, float(deltas[r, i])))
    return AuditResult(max_d, sorted(violations), kind == "rl")


def energy_from_csv(path, policy_dt=0.5):
    data = read_trajectory_csv(path)
    idx = [TRAJECTORY_COLUMNS.index(k) for k in ("m0", "m1", "m2")]
    return float(sum((r[idx[0]] ** 2 + r[idx[1]] ** 2 + r[idx[2]] ** 2) * policy_dt for r in data))
