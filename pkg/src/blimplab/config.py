"""Layered run configuration.

Precedence, lowest first: built-in defaults, a TOML file, ``BLIMP_*``
environment variables, then explicit overrides (CLI flags). Environment
keys use double underscores between levels::

    BLIMP_SEED=3
    BLIMP_ENV__NOISE_STD=0.0
    BLIMP_AGENT__SCHEDULE__TOTAL_STEPS=5000

Values are parsed as TOML scalars/arrays, so ``0.5``, ``true`` and
``[0, 2, 4]`` all work; anything unparsable is taken as a bare string.

Every default lives on the dataclasses themselves (``BlimpParams``,
``EnvConfig``, ``AgentConfig``, ``TrainSchedule``, ``PidGains``,
``TaskConfig``); ``default_config_text()`` renders the full resolved set.
"""
from __future__ import annotations

import dataclasses
import inspect
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dynamics import BlimpParams, WindField
from .env import EnvConfig
from .errors import ConfigError
from .pid import PidGains
from .qrdqn.agent import AgentConfig, TrainSchedule

ENV_PREFIX = "BLIMP_"
SNAPSHOT_NAME = "config.toml"

DEFAULT_SWEEP_VALUES = {
    "wind_speed": (0.0, 2.0, 4.0),
    "buoyancy_factor": (1.0, 0.95, 0.9, 0.85, 0.8),
    "ballast_mass": (0.0, 0.1, -0.1, 0.25, -0.25),
}


@dataclass(frozen=True)
class TaskConfig:
    task: str = "nav-square"  # nav-square | hover
    policy: str = "pid"  # rl | pid | random | idle
    checkpoint: str = ""  # agent file for the rl policy
    timeout: float = 3000.0  # s, navigation
    hover_duration: float = 600.0  # s
    side: float = 100.0  # m, square track
    altitude: float = 50.0  # m above ground (ENU up), track and hover target
    trigger_radius: float = 15.0  # m
    laps: int = 3
    hover_spawn_offset: float = 0.0  # m above the hover target at spawn
    wind_speed: float = 0.0  # m/s
    wind_heading: float = 0.0  # rad, direction the wind blows towards (0 = north)
    eval_episodes: int = 20
    sweep_values: tuple = ()  # empty: per-parameter defaults
    workers: int = 1

    def __post_init__(self):
        if self.task not in ("nav-square", "hover"):
            raise ConfigError(f"unknown task {self.task!r}", key="task.task")
        if self.policy not in ("rl", "pid", "random", "idle"):
            raise ConfigError(f"unknown policy {self.policy!r}", key="task.policy")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1", key="task.workers")

    def wind(self):
        return WindField.from_speed(self.wind_speed, self.wind_heading)


@dataclass(frozen=True)
class RunConfig:
    dynamics: BlimpParams = field(default_factory=BlimpParams)
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    schedule: TrainSchedule = field(default_factory=TrainSchedule)
    pid: PidGains = field(default_factory=PidGains)
    task: TaskConfig = field(default_factory=TaskConfig)
    seed: int = 0
    output_dir: str = "runs"

    def agent_config(self):
        return dataclasses.replace(self.agent, seed=self.seed)

    def train_schedule(self):
        return dataclasses.replace(self.schedule, seed=self.seed)

    def to_dict(self):
        return _config_to_dict(self)


# section name in the file -> (attribute path, dataclass)
_SECTIONS = {
    "dynamics": ("dynamics", BlimpParams),
    "env": ("env", EnvConfig),
    "agent": ("agent", AgentConfig),
    "agent.schedule": ("schedule", TrainSchedule),
    "pid": ("pid", PidGains),
    "task": ("task", TaskConfig),
}
# seeds are driven by the global seed only
_HIDDEN = {"seed"}


def _section_fields(cls):
    return {f.name: f for f in dataclasses.fields(cls) if f.name not in _HIDDEN}


def _to_toml_value(v):
    if isinstance(v, tuple):
        return [_to_toml_value(x) for x in v]
    return v


def _config_to_dict(cfg):
    out = {"seed": cfg.seed, "output_dir": cfg.output_dir}
    for section, (attr, cls) in _SECTIONS.items():
        obj = getattr(cfg, attr)
        values = {name: _to_toml_value(getattr(obj, name)) for name in _section_fields(cls)}
        values = {k: v for k, v in values.items() if v is not None}
        node = out
        parts = section.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node.setdefault(parts[-1], {}).update(values)
    return out


def _coerce(value, default, key):
    """Match a parsed value to the type of the field default."""
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
    elif isinstance(default, int) and default is not None:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
    elif isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif isinstance(default, str):
        if isinstance(value, str):
            return value
    elif isinstance(default, tuple):
        if isinstance(value, (list, tuple)):
            return tuple(float(x) if isinstance(x, int) and not isinstance(x, bool) else x
                         for x in value)
    elif default is None:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    raise ConfigError(f"{key}: expected {type(default).__name__}, got {value!r}", key=key)


def _flatten(tree, prefix=""):
    """Nested dict -> {"section.key": value}; sub-tables only where sections nest."""
    flat = {}
    for k, v in tree.items():
        path = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(_flatten(v, path + "."))
        else:
            flat[path] = v
    return flat


def _split_key(path):
    """'agent.schedule.total_steps' -> ('agent.schedule', 'total_steps')."""
    if "." not in path:
        return None, path
    section, name = path.rsplit(".", 1)
    return section, name


def _check_key(path):
    section, name = _split_key(path)
    if section is None:
        if name not in ("seed", "output_dir"):
            raise ConfigError(f"unknown config key {path!r}", key=path)
        return
    if section not in _SECTIONS:
        raise ConfigError(f"unknown config section {section!r} (in key {path!r})", key=path)
    if name not in _section_fields(_SECTIONS[section][1]):
        raise ConfigError(f"unknown config key {path!r}", key=path)


def parse_value(text):
    """TOML scalar or array from a string; bare words stay strings."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def env_overrides(environ=None):
    environ = os.environ if environ is None else environ
    out = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX):].lower().replace("__", ".")
        out[path] = parse_value(raw)
    return out


def build_config(flat):
    """RunConfig from a flat ``{"section.key": value}`` mapping (already merged)."""
    for path in flat:
        _check_key(path)
    kwargs = {}
    for section, (attr, cls) in _SECTIONS.items():
        defaults = cls()
        values = {}
        for name in _section_fields(cls):
            path = f"{section}.{name}"
            if path in flat:
                values[name] = _coerce(flat[path], getattr(defaults, name), path)
        try:
            kwargs[attr] = cls(**values)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[{section}] {exc}", key=section) from None
    seed = _coerce(flat.get("seed", 0), 0, "seed")
    out_dir = _coerce(flat.get("output_dir", "runs"), "runs", "output_dir")
    return RunConfig(seed=seed, output_dir=out_dir, **kwargs)


def load_config(path=None, environ=None, overrides=None):
    """Merge defaults < file < environment < ``overrides`` (flat dotted keys)."""
    flat = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                tree = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        flat.update(_flatten(tree))
    flat.update(env_overrides(environ))
    flat.update(overrides or {})
    return build_config(flat)


_COMMENT_RE = re.compile(r"^\s+(\w+):[^=]*=.*#\s*(.+)$")


def _field_comments(cls):
    """Trailing ``# ...`` comments on the dataclass field lines."""
    out = {}
    for line in inspect.getsource(cls).splitlines():
        m = _COMMENT_RE.match(line)
        if m:
            out[m.group(1)] = m.group(2).strip()
    return out


def _render(v):
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_render(x) for x in v) + "]"
    return tomli_w.dumps({"v": v})[4:].strip()


def dumps(cfg, comments=False):
    """TOML text of a resolved config; ``comments`` annotates each key with its unit/meaning."""
    d = cfg.to_dict()
    lines = [f"seed = {_render(d['seed'])}", f"output_dir = {_render(d['output_dir'])}"]
    for section, (attr, cls) in _SECTIONS.items():
        node = d
        for part in section.split("."):
            node = node[part]
        notes = _field_comments(cls) if comments else {}
        lines += ["", f"[{section}]"]
        for k, v in node.items():
            if isinstance(v, dict):
                continue
            line = f"{k} = {_render(v)}"
            lines.append(f"{line}  # {notes[k]}" if k in notes else line)
    return "\n".join(lines) + "\n"


def default_config_text():
    return dumps(RunConfig(), comments=True)


def write_snapshot(cfg, directory):
    """Resolved config next to a run's outputs; ``load_config`` on it reproduces the run."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / SNAPSHOT_NAME
    path.write_text(dumps(cfg))
    return path
