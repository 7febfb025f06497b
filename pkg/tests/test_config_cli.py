import json

import pytest

from blimplab.cli import main
from blimplab.config import (
    RunConfig, default_config_text, dumps, env_overrides, load_config, parse_value, write_snapshot,
)
from blimplab.errors import ConfigError


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


# --- config layering --------------------------------------------------------

def test_defaults_when_nothing_given():
    assert load_config(environ={}) == RunConfig()


def test_precedence_file_env_cli(tmp_path):
    path = write(tmp_path, "seed = 1\n[env]\nnoise_std = 0.01\nsuccess_radius = 7.0\n")
    cfg = load_config(path, environ={})
    assert (cfg.seed, cfg.env.noise_std, cfg.env.success_radius) == (1, 0.01, 7.0)
    env = {"BLIMP_SEED": "2", "BLIMP_ENV__NOISE_STD": "0.02"}
    cfg = load_config(path, environ=env)
    assert (cfg.seed, cfg.env.noise_std, cfg.env.success_radius) == (2, 0.02, 7.0)
    cfg = load_config(path, environ=env, overrides={"seed": 3})
    assert (cfg.seed, cfg.env.noise_std) == (3, 0.02)


def test_nested_schedule_section(tmp_path):
    path = write(tmp_path, "[agent.schedule]\ntotal_steps = 777\n")
    assert load_config(path, environ={}).schedule.total_steps == 777
    env = {"BLIMP_AGENT__SCHEDULE__BATCH_SIZE": "16"}
    assert load_config(environ=env).schedule.batch_size == 16


def test_seed_reaches_agent_and_schedule():
    cfg = load_config(environ={}, overrides={"seed": 42})
    assert cfg.agent_config().seed == 42 and cfg.train_schedule().seed == 42


def test_unknown_key_names_path(tmp_path):
    path = write(tmp_path, "[env]\nnoise_sdt = 0.1\n")
    with pytest.raises(ConfigError) as info:
        load_config(path, environ={})
    assert info.value.key == "env.noise_sdt"
    with pytest.raises(ConfigError) as info:
        load_config(environ={"BLIMP_WARP__DRIVE": "1"})
    assert info.value.key == "warp.drive"


def test_type_and_range_errors(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(environ={}, overrides={"dynamics.total_mass": "heavy"})
    assert info.value.key == "dynamics.total_mass"
    with pytest.raises(ConfigError):
        load_config(environ={}, overrides={"dynamics.buoyancy_factor": 3.0})
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "seed = [", "bad.toml"), environ={})
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml", environ={})


def test_int_field_accepts_integral_float():
    cfg = load_config(environ={}, overrides={"agent.schedule.total_steps": 100.0})
    assert cfg.schedule.total_steps == 100


def test_optional_int_field(tmp_path):
    path = write(tmp_path, "[agent.schedule]\nepsilon_decay_steps = 50000\n")
    assert load_config(path, environ={}).schedule.epsilon_decay_steps == 50000
    with pytest.raises(ConfigError):
        load_config(environ={}, overrides={"agent.schedule.epsilon_decay_steps": 0.5})


def test_parse_value():
    assert parse_value("0.5") == 0.5
    assert parse_value("true") is True
    assert parse_value("[0, 2, 4]") == [0, 2, 4]
    assert parse_value("rl") == "rl"


def test_env_overrides_ignore_other_variables():
    assert env_overrides({"PATH": "/bin", "BLIMP_SEED": "4"}) == {"seed": 4}


def test_snapshot_round_trip(tmp_path):
    cfg = load_config(environ={}, overrides={"seed": 9, "env.noise_std": 0.0,
                                             "task.sweep_values": [0.0, 1.5]})
    write_snapshot(cfg, tmp_path)
    assert load_config(tmp_path / "config.toml", environ={}) == cfg


def test_default_text_is_loadable_and_annotated(tmp_path):
    text = default_config_text()
    assert "[agent.schedule]" in text and "#" in text
    assert load_config(write(tmp_path, text), environ={}) == RunConfig()
    assert dumps(RunConfig()) != text


# --- CLI ----------------------------------------------------------------------

def run_cli(*argv):
    return main([str(a) for a in argv])


QUICK = ("--set", "task.timeout=60", "--set", "task.laps=1")


def test_eval_is_byte_identical_under_seed(tmp_path):
    for name in ("a", "b"):
        assert run_cli("eval", "--policy", "pid", "--seed", 5, "--out", tmp_path / name, *QUICK) == 0
    a = (tmp_path / "a" / "nav-square_pid.csv").read_bytes()
    assert a == (tmp_path / "b" / "nav-square_pid.csv").read_bytes()
    assert len(a.splitlines()) == 121


def test_snapshot_reproduces_eval(tmp_path):
    assert run_cli("eval", "--policy", "random", "--seed", 2, "--out", tmp_path / "a", *QUICK) == 0
    assert run_cli("eval", "--config", tmp_path / "a" / "config.toml", "--out", tmp_path / "b") == 0
    assert ((tmp_path / "a" / "nav-square_random.csv").read_bytes()
            == (tmp_path / "b" / "nav-square_random.csv").read_bytes())


def test_eval_hover(tmp_path, capsys):
    assert run_cli("eval", "--task", "hover", "--policy", "pid", "--out", tmp_path,
                   "--set", "task.hover_duration=30") == 0
    summary = json.loads((tmp_path / "hover_pid.json").read_text())
    assert summary["steps"] == 60
    assert "mean radius" in capsys.readouterr().out


def test_eval_returns(tmp_path):
    assert run_cli("eval", "--returns", "--policy", "idle", "--out", tmp_path,
                   "--set", "task.eval_episodes=2", "--set", "env.episode_length=10.0") == 0
    data = json.loads((tmp_path / "returns_idle.json").read_text())
    assert len(data["returns"]) == 2 and data["idle_at_target"] == pytest.approx(20.0)


def test_train_then_eval_rl(tmp_path):
    out = tmp_path / "train"
    assert run_cli("train", "--steps", 120, "--out", out,
                   "--set", "agent.schedule.warmup_steps=40",
                   "--set", "agent.schedule.batch_size=8",
                   "--set", "env.episode_length=20.0") == 0
    assert (out / "agent.ckpt").exists()
    assert len((out / "metrics.csv").read_text().splitlines()) == 1 + 3
    assert run_cli("eval", "--policy", "rl", "--checkpoint", out / "agent.ckpt",
                   "--out", tmp_path / "ev", *QUICK) == 0


def test_sweep_cli(tmp_path):
    assert run_cli("sweep", "--param", "wind", "--values", 0, 2, "--policy", "pid",
                   "--out", tmp_path, *QUICK) == 0
    data = json.loads((tmp_path / "sweep_wind.json").read_text())
    assert [c["value"] for c in data["cells"]] == [0.0, 2.0]
    assert (tmp_path / "sweep_wind_2.csv").exists()


def test_plot_writes_four_figures(tmp_path):
    assert run_cli("eval", "--policy", "pid", "--out", tmp_path, *QUICK) == 0
    assert run_cli("plot", tmp_path / "nav-square_pid.csv", "--out", tmp_path / "fig") == 0
    names = sorted(p.name for p in (tmp_path / "fig").iterdir())
    assert names == [f"nav-square_pid_{k}.svg" for k in ("altitude", "motors", "path", "reward")]
    first = (tmp_path / "fig" / "nav-square_pid_path.svg").read_bytes()
    run_cli("plot", tmp_path / "nav-square_pid.csv", "--out", tmp_path / "fig")
    assert (tmp_path / "fig" / "nav-square_pid_path.svg").read_bytes() == first


def test_verify_quick_passes(capsys):
    assert run_cli("verify", "--quick") == 0
    out = capsys.readouterr().out
    assert "all checks passed" in out and "FAIL" not in out


@pytest.mark.parametrize("argv", [
    ("eval", "--set", "novalue"),
    ("eval", "--set", "env.bogus=1"),
    ("eval", "--policy", "rl"),
])
def test_usage_errors_exit_2(tmp_path, argv):
    assert run_cli(*argv, "--out", tmp_path) == 2


def test_bad_flag_exits_2():
    with pytest.raises(SystemExit) as info:
        run_cli("eval", "--no-such-flag")
    assert info.value.code == 2


def test_missing_checkpoint_exits_1(tmp_path):
    assert run_cli("eval", "--policy", "rl", "--checkpoint", tmp_path / "none.ckpt",
                   "--out", tmp_path) == 1


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        run_cli("--version")
    assert info.value.code == 0
    assert "0.1.0" in capsys.readouterr().out

