import math

import numpy as np
import pytest

from blimplab.dynamics import BlimpParams, WindField
from blimplab.env import TRAJECTORY_COLUMNS, EnvConfig, write_trajectory_csv
from blimplab.errors import CsvFormatError
from blimplab.harness import (
    STEP_BOUNDS, IdlePolicy, PidPolicy, RandomPolicy, enu_to_ned, episode_return, evaluate_returns,
    energy_from_csv, idle_at_target_return, make_policy, ned_to_enu, read_trajectory_csv,
    run_hover, run_navigation, smoothness_audit, square_track, sweep,
)


@pytest.fixture(scope="module")
def pid_square():
    return run_navigation(PidPolicy(), square_track(), seed=3)


@pytest.fixture(scope="module")
def random_nav(tmp_path_factory):
    report = run_navigation(RandomPolicy(1), square_track(), seed=1, timeout=300.0)
    path = tmp_path_factory.mktemp("rand") / "random"
    report.write(path)
    return report, f"{path}.csv"


def test_frame_conversion_round_trip():
    assert enu_to_ned((1.0, 2.0, 50.0)) == (2.0, 1.0, -50.0)
    assert ned_to_enu(enu_to_ned((3.0, -4.0, 7.0))) == (3.0, -4.0, 7.0)


def test_square_track_geometry():
    t = square_track()
    assert len(t.waypoints) == 4
    for a, b in zip(t.waypoints, t.waypoints[1:] + t.waypoints[:1]):
        assert math.dist(a, b) == pytest.approx(100.0)
        assert a[2] == -50.0


def test_trigger_times_strictly_increase(pid_square):
    times = pid_square.trigger_times
    assert len(times) == 12
    assert all(a < b for a, b in zip(times, times[1:]))
    assert pid_square.total_time == times[-1]


def test_report_fields(pid_square):
    s = pid_square.summary()
    assert s["n_triggers"] == 12 and s["completed"]
    assert s["max_cross_track"] >= s["mean_cross_track"] >= 0
    assert "rows" not in s and "reward_series" not in s
    assert len(pid_square.rows) == pid_square.steps == len(pid_square.reward_series)


def test_energy_matches_csv(tmp_path, pid_square):
    pid_square.write(tmp_path / "pid")
    assert energy_from_csv(tmp_path / "pid.csv") == pytest.approx(pid_square.energy, abs=1e-9)
    data = read_trajectory_csv(tmp_path / "pid.csv")
    assert data.shape == (pid_square.steps, len(TRAJECTORY_COLUMNS))


def test_random_policy_passes_rl_audit(random_nav):
    _, path = random_nav
    audit = smoothness_audit(path, "rl")
    assert audit.ok and audit.violations == []
    for k, bound in STEP_BOUNDS.items():
        assert audit.max_deltas[k] <= bound


def test_pid_is_reported_not_failed(tmp_path, pid_square):
    pid_square.write(tmp_path / "pid")
    audit = smoothness_audit(tmp_path / "pid.csv", "pid")
    assert audit.violations  # PID jumps straight to full commands
    assert audit.ok


def test_audit_flags_rl_violation(tmp_path, random_nav):
    report, _ = random_nav
    rows = [list(r) for r in report.rows[:5]]
    m0 = TRAJECTORY_COLUMNS.index("m0")
    rows[3][m0] = rows[2][m0] + 0.1
    write_trajectory_csv(tmp_path / "bad.csv", rows)
    audit = smoothness_audit(tmp_path / "bad.csv", "rl")
    assert not audit.ok
    assert (5, "m0") in [(line, k) for line, k, _ in audit.violations]


def test_empty_trajectory_audits_to_zero(tmp_path):
    write_trajectory_csv(tmp_path / "empty.csv", [])
    audit = smoothness_audit(tmp_path / "empty.csv")
    assert audit.ok and all(v == 0.0 for v in audit.max_deltas.values())
    assert energy_from_csv(tmp_path / "empty.csv") == 0.0


def test_malformed_csv_names_line(tmp_path):
    path = tmp_path / "broken.csv"
    good = ",".join("0" for _ in TRAJECTORY_COLUMNS)
    path.write_text(",".join(TRAJECTORY_COLUMNS) + "\n" + good + "\n" + good + "\n1,2,3\n")
    with pytest.raises(CsvFormatError) as info:
        read_trajectory_csv(path)
    assert info.value.line == 4
    path.write_text("a,b\n")
    with pytest.raises(CsvFormatError) as info:
        read_trajectory_csv(path)
    assert info.value.line == 1


def test_idle_triggers_at_most_one_waypoint():
    report = run_navigation(IdlePolicy(), square_track(), seed=0, timeout=600.0)
    assert not report.completed
    assert report.n_triggers <= 1
    assert report.time_to_complete == math.inf


def test_zero_duration_hover():
    report = run_hover(PidPolicy(), duration=0.0)
    assert report.steps == 0 and report.rows == []
    assert report.reward_totals["total"] == 0.0


def test_hover_from_above_descends():
    target = enu_to_ned((0.0, 0.0, 50.0))
    report = run_hover(PidPolicy(), target, duration=300.0, spawn=(0.0, 0.0, -100.0))
    series = np.array(report.reward_series)
    assert series.shape == (600, 4)
    assert series[-1, 0] == 1.0  # back inside the success radius
    assert report.rows[-1][TRAJECTORY_COLUMNS.index("down")] == pytest.approx(-50.0, abs=5.0)


def test_pid_hover_holds_position():
    report = run_hover(PidPolicy(), duration=120.0)
    assert report.max_planar_radius < 1.0
    assert abs(report.altitude_bias) < 1.0


def test_single_value_sweep_equals_plain_run():
    track = square_track()
    direct = run_navigation(PidPolicy(), track, params=BlimpParams(buoyancy_factor=0.95), seed=2,
                            timeout=400.0)
    rep = sweep(PidPolicy, "buoyancy_factor", [0.95], track=track, seed=2, timeout=400.0)
    cell = rep.cells[0].report
    assert cell.rows == direct.rows
    assert cell.trigger_times == direct.trigger_times


def test_empty_sweep():
    rep = sweep(PidPolicy, "wind_speed", [])
    assert rep.cells == [] and rep.summary()["cells"] == []


def test_sweep_rejects_unknown_parameter():
    with pytest.raises(ValueError):
        sweep(PidPolicy, "gravity", [1.0])
    with pytest.raises(ValueError):
        sweep(PidPolicy, "wind_speed", [math.nan])


def test_sweep_records_cell_errors():
    rep = sweep(PidPolicy, "wind_speed", [30.0], timeout=10.0)  # above the wind limit
    assert rep.cells[0].report is None
    assert "ParameterError" in rep.cells[0].error


def test_parallel_sweep_matches_serial():
    kw = {"track": square_track(), "timeout": 120.0, "seed": 4}
    serial = sweep(PidPolicy, "wind_speed", [0.0, 2.0], **kw)
    parallel = sweep(PidPolicy, "wind_speed", [0.0, 2.0], workers=2, **kw)
    assert [c.report.rows for c in serial.cells] == [c.report.rows for c in parallel.cells]


def test_returns_are_seeded():
    cfg = EnvConfig(target_sampling_half_extent=30.0, episode_length=20.0)
    a = evaluate_returns(RandomPolicy(0), 3, cfg, seed=9)
    b = evaluate_returns(RandomPolicy(0), 3, cfg, seed=9)
    assert a == b and len(a) == 3


def test_idle_at_target_is_upper_bound():
    cfg = EnvConfig(episode_length=20.0)
    top = idle_at_target_return(cfg)
    assert top == pytest.approx(cfg.steps_per_episode)
    assert episode_return(RandomPolicy(3), cfg, seed=3) < top


def test_make_policy():
    assert make_policy("idle").name == "idle"
    assert make_policy("pid").name == "pid"
    with pytest.raises(ValueError):
        make_policy("rl")
    with pytest.raises(ValueError):
        make_policy("genetic")


def test_wind_sweep_ordering_is_monotone():
    rep = sweep(PidPolicy, "wind_speed", [0.0, 2.0, 4.0], wind=WindField())
    keys = [r.degradation_key() for r in rep.reports()]
    assert keys == sorted(keys)
