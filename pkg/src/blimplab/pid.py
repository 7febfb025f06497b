"""Cascade PID baseline.

Three channels, each clamped to actuator range:

* yaw: relative bearing -> yaw fins and tail motor (same signed command)
* altitude: altitude error -> pitch reference -> pitch fins (inner loop)
* speed: closing speed (planar ground velocity towards the target) -> both
  main motors

The speed reference tapers linearly to zero inside ``taper_radius`` so the
vehicle coasts to a stop on the target, and is scaled by ``cos(psi_r)`` so
it turns towards a target behind it instead of orbiting. Fin commands are
divided by the fins' effective dynamic pressure relative to that at
``schedule_airspeed`` (gain scheduling); unscheduled, the growth of fin
authority with airspeed drives the 0.5 s-sampled loops into a limit cycle
in headwind. The controller commands absolute
actuator positions every policy step; it does not go through the discrete
action table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .dynamics import ActuatorState, BlimpParams
from .env import TargetSpec, distance_to, target_coordinates


@dataclass(frozen=True)
class PidGains:
    yaw_kp: float = 1.2
    yaw_ki: float = 0.02
    yaw_kd: float = 4.0
    yaw_integral_clamp: float = 5.0
    alt_kp: float = 0.03  # rad of pitch reference per m
    alt_ki: float = 0.001
    alt_kd: float = 0.2  # rad per m/s of climb rate
    alt_integral_clamp: float = 150.0
    pitch_limit: float = 0.5  # rad
    pitch_kp: float = 2.0
    pitch_ki: float = 0.3
    pitch_kd: float = 2.0
    pitch_integral_clamp: float = 2.0
    speed_kp: float = 0.08
    speed_ki: float = 0.01
    speed_integral_clamp: float = 20.0
    reference_speed: float = 2.0  # m/s
    taper_radius: float = 10.0  # m
    schedule_airspeed: float = 2.0  # m/s at which fin gains are nominal

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValueError(f"{f.name} must be finite")
        for name in ("yaw_integral_clamp", "alt_integral_clamp", "pitch_integral_clamp",
                     "speed_integral_clamp", "taper_radius", "schedule_airspeed"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    @classmethod
    def zero(cls):
        gains = {f.name: 0.0 for f in fields(cls) if f.name.endswith(("_kp", "_ki", "_kd"))}
        return cls(**gains)


def _clip(x, lim):
    return max(-lim, min(lim, x))


class PidController:
    """Holds the integrator state; one instance per simulated vehicle."""

    def __init__(self, gains=None, params=None):
        self.gains = gains or PidGains()
        self.params = params or BlimpParams()
        self.throttle_cap = self.params.throttle_cap
        self.reset()

    def _fin_qbar(self, airspeed):
        p = self.params
        return min(0.5 * p.air_density * airspeed * airspeed, p.fin_qbar_limit)

    def reset(self):
        self.i_yaw = 0.0
        self.i_alt = 0.0
        self.i_pitch = 0.0
        self.i_speed = 0.0

    def integrals(self):
        return (self.i_yaw, self.i_alt, self.i_pitch, self.i_speed)

    def command(self, state, act, target, dt, wind=(0.0, 0.0, 0.0)):
        """Actuator positions for the next ``dt`` seconds.

        ``act`` (the current actuator state) is accepted for interface
        symmetry with the discrete policies; the PID output does not depend
        on it. ``wind`` stands in for an airspeed sensor.
        """
        g = self.gains
        pos = target.position if isinstance(target, TargetSpec) else target
        l_r, psi_r, z_r = target_coordinates(state, pos)
        dist = distance_to(state, pos)

        self.i_yaw = _clip(self.i_yaw + psi_r * dt, g.yaw_integral_clamp)
        yaw_cmd = g.yaw_kp * psi_r + g.yaw_ki * self.i_yaw - g.yaw_kd * state.yaw_rate

        climb = -state.ground_velocity[2]
        self.i_alt = _clip(self.i_alt + z_r * dt, g.alt_integral_clamp)
        pitch_ref = _clip(g.alt_kp * z_r + g.alt_ki * self.i_alt - g.alt_kd * climb, g.pitch_limit)

        e_pitch = pitch_ref - state.pitch
        self.i_pitch = _clip(self.i_pitch + e_pitch * dt, g.pitch_integral_clamp)
        elevator = g.pitch_kp * e_pitch + g.pitch_ki * self.i_pitch - g.pitch_kd * state.pitch_rate

        v_ref = g.reference_speed * min(1.0, dist / g.taper_radius) * max(0.0, math.cos(psi_r))
        if l_r > 0:
            vn, ve, _ = state.ground_velocity
            closing = (vn * (pos[0] - state.position[0]) + ve * (pos[1] - state.position[1])) / l_r
        else:
            closing = 0.0
        e_speed = v_ref - closing
        self.i_speed = _clip(self.i_speed + e_speed * dt, g.speed_integral_clamp)
        throttle = g.speed_kp * e_speed + g.speed_ki * self.i_speed

        airspeed = math.dist(state.ground_velocity, wind)
        fin_scale = min(1.0, self._fin_qbar(g.schedule_airspeed) / max(self._fin_qbar(airspeed), 1e-12))
        return ActuatorState.commanded(throttle=throttle, tail=yaw_cmd,
                                       elevator=elevator * fin_scale, rudder=yaw_cmd * fin_scale,
                                       throttle_cap=self.throttle_cap)


def pid_command(state, act, target, gains, dt, controller=None, wind=(0.0, 0.0, 0.0)):
    """Functional entry point; pass ``controller`` to carry integrator state."""
    ctl = controller or PidController(gains)
    return ctl.command(state, act, target, dt, wind)
