# Fly the 100 m square with the PID baseline, save the trajectory and plots,
# then repeat it in wind.
# Run with: python3 demos/pid_square.py [outdir]
import sys
from pathlib import Path

from blimplab.harness import PidPolicy, run_navigation, smoothness_audit, square_track, sweep
from blimplab.plotting import plot_trajectory

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)

track = square_track()
report = run_navigation(PidPolicy(), track, seed=0)
report.write(out / "pid_square")
print(f"completed={report.completed} in {report.total_time:.1f} s, "
      f"max cross-track {report.max_cross_track:.1f} m, energy {report.energy:.1f}")
print("trigger times:", [round(t, 1) for t in report.trigger_times])

for path in plot_trajectory(out / "pid_square.csv", waypoints=track.waypoints):
    print("wrote", path)

# the PID moves actuators in jumps; the audit only reports it
audit = smoothness_audit(out / "pid_square.csv", kind="pid")
print("largest per-step actuator jumps:", {k: round(v, 3) for k, v in audit.max_deltas.items()})

rep = sweep(PidPolicy, "wind_speed", [0.0, 2.0, 4.0], track=track)
for cell in rep.cells:
    r = cell.report
    status = f"{r.total_time:.0f} s" if r.completed else f"failed after {r.n_triggers} triggers"
    print(f"wind {cell.value:.0f} m/s: {status}")
