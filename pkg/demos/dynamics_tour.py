# A quick look at the reduced blimp model: trim, ballast, wind drift, fins.
# Run with: python3 demos/dynamics_tour.py
import math

from blimplab.dynamics import (
    ActuatorState, BlimpParams, BlimpState, WindField, dynamics_step, net_vertical_force, trim_state,
)

p = BlimpParams()
print("hull volume (m^3):", round(p.hull_volume, 3))
print("net vertical force, neutral:", net_vertical_force(p))
print("net vertical force, 95% buoyancy:", round(net_vertical_force(BlimpParams(buoyancy_factor=0.95)), 3))

# nose ballast tilts the equilibrium nose down
for ballast in (0.0, 0.1, 0.25, -0.25):
    s = trim_state(BlimpParams(ballast_mass=ballast))
    print(f"ballast {ballast:+.2f} kg -> trim pitch {math.degrees(s.pitch):+.2f} deg")


def fly(state, act, wind, seconds):
    for _ in range(int(seconds / 0.1)):
        state = dynamics_step(state, act, wind, p, 0.1)
    return state


# unpowered, the hull ends up moving with the air
wind = WindField.from_speed(2.0, heading=math.pi / 2)
s = fly(trim_state(p, (0, 0, -100)), ActuatorState(), wind, 600)
print("ground velocity after 600 s drifting:", [round(v, 3) for v in s.ground_velocity])

# steady cruise at 30% throttle
s = fly(trim_state(p, (0, 0, -100)), ActuatorState.commanded(throttle=0.3), WindField(), 300)
print("cruise speed at 30% throttle:", round(s.speed, 3), "m/s")

# fins need airflow: same rudder, two speeds
fins = ActuatorState.commanded(rudder=0.5)
for v in (0.5, 2.0):
    r = dynamics_step(BlimpState(ground_velocity=(v, 0, 0)), fins, WindField(), p, 0.1).yaw_rate
    print(f"rudder 0.5 at {v} m/s -> yaw rate after 0.1 s {r:.5f} rad/s")
