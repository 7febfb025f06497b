"""Reduced longitudinal/yaw model of a buoyant vehicle.

World frame is north-east-down. The integrated state is position, ground
velocity, pitch, yaw and the two matching rates; roll and lateral slip are
not modelled (the body-lateral airspeed is zeroed every substep, so the hull
is carried sideways by crosswind but never slips through the air).

Forces: main thrust along the body x axis, per-axis quadratic drag resolved
in body axes, and net buoyancy. Moments: fin deflection scaled by dynamic
pressure, tail motor (yaw only), gondola pendulum restoring moment, nose
ballast weight, and linear rate damping.

Fin servos have finite hinge torque, so the dynamic pressure the fins act
with saturates at ``fin_qbar_limit``. Without that cap full elevator at top
speed out-muscles the pendulum and the hull loops over.

The inner loop is written over plain floats: it runs ten times per 0.1 s
step and dominates the cost of training rollouts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import ParameterError, SimulationDiverged

MAX_SUBSTEP = 0.01
MAX_STEP = 0.1
MAX_WIND_SPEED = 20.0

# Column order of the discrete action table and of every 8-vector delta.
ACTUATOR_ORDER = ("m2", "f0", "f1", "f2", "f3", "s", "m0", "m1")


@dataclass(frozen=True)
class BlimpParams:
    total_mass: float = 12.0  # kg, hull + gondola, excluding ballast
    buoyancy_factor: float = 1.0  # 1.0 = neutrally buoyant
    air_density: float = 1.225  # kg/m^3
    gravity: float = 9.81  # m/s^2
    drag_area_axial: float = 0.8  # m^2, Cd*A along body x
    drag_area_vertical: float = 4.0  # m^2, Cd*A along body z
    drag_area_lateral: float = 4.0  # m^2, Cd*A along body y
    pitch_inertia: float = 40.0  # kg m^2
    yaw_inertia: float = 40.0  # kg m^2
    gondola_pendulum_arm: float = 0.3  # m, CG below centre of buoyancy
    fin_moment_gain_pitch: float = 6.0  # N m / (unit deflection * Pa)
    fin_moment_gain_yaw: float = 6.0  # N m / (unit deflection * Pa)
    tail_motor_moment_gain: float = 4.0  # N m per unit command
    main_thrust_gain: float = 20.0  # N per unit of (m0 + m1)
    fin_qbar_limit: float = 4.0  # Pa, hinge-moment saturation of fin authority
    pitch_damping: float = 40.0  # N m s
    yaw_damping: float = 15.0  # N m s
    ballast_mass: float = 0.0  # kg, signed, at the nose
    ballast_arm: float = 3.0  # m forward of the centre of buoyancy
    throttle_cap: float = 0.5  # upper bound of m0, m1

    def __post_init__(self):
        positive = (
            "total_mass", "air_density", "gravity", "drag_area_axial",
            "drag_area_vertical", "drag_area_lateral", "pitch_inertia",
            "yaw_inertia", "gondola_pendulum_arm", "fin_moment_gain_pitch",
            "fin_moment_gain_yaw", "fin_qbar_limit", "tail_motor_moment_gain", "main_thrust_gain",
            "pitch_damping", "yaw_damping", "ballast_arm", "throttle_cap",
        )
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ParameterError(f"{f.name} must be a finite number, got {v!r}")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0.5 <= self.buoyancy_factor <= 1.5:
            raise ParameterError(f"buoyancy_factor must be in [0.5, 1.5], got {self.buoyancy_factor}")
        if self.throttle_cap > 1.0:
            raise ParameterError(f"throttle_cap must be <= 1, got {self.throttle_cap}")
        if abs(self.ballast_mass) >= self.total_mass:
            raise ParameterError("ballast_mass magnitude must be below total_mass")

    @property
    def hull_volume(self):
        """Envelope volume giving neutral lift at ``buoyancy_factor == 1``."""
        return self.total_mass / self.air_density

    @property
    def inertial_mass(self):
        return self.total_mass + self.ballast_mass

    def with_overrides(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class BlimpState:
    position: tuple = (0.0, 0.0, 0.0)  # m, NED
    ground_velocity: tuple = (0.0, 0.0, 0.0)  # m/s, NED
    pitch: float = 0.0  # rad, nose up positive
    yaw: float = 0.0  # rad, from north towards east
    pitch_rate: float = 0.0
    yaw_rate: float = 0.0
    time: float = 0.0

    @property
    def altitude(self):
        return -self.position[2]

    @property
    def speed(self):
        return math.sqrt(sum(c * c for c in self.ground_velocity))

    def as_array(self):
        return np.array([*self.position, *self.ground_velocity, self.pitch,
                         self.yaw, self.pitch_rate, self.yaw_rate, self.time])


@dataclass(frozen=True)
class ActuatorState:
    """Eight actuator positions. ``s`` (thrust-vectoring servo) is always 0."""

    m0: float = 0.0
    m1: float = 0.0
    m2: float = 0.0
    s: float = 0.0
    f0: float = 0.0  # left fin
    f1: float = 0.0  # right fin
    f2: float = 0.0  # top fin
    f3: float = 0.0  # bottom fin

    def as_vector(self):
        """Values in ``ACTUATOR_ORDER``."""
        return np.array([getattr(self, k) for k in ACTUATOR_ORDER])

    @classmethod
    def from_vector(cls, vec, throttle_cap=0.5):
        return _clip_actuators(dict(zip(ACTUATOR_ORDER, map(float, vec))), throttle_cap)

    @classmethod
    def commanded(cls, throttle=0.0, tail=0.0, elevator=0.0, rudder=0.0, throttle_cap=0.5):
        """Symmetric command: both mains, tail motor, pitch fin pair, yaw fin pair."""
        return _clip_actuators(dict(m0=throttle, m1=throttle, m2=tail, s=0.0,
                                    f0=elevator, f1=elevator, f2=rudder, f3=rudder),
                               throttle_cap)


@dataclass(frozen=True)
class WindField:
    velocity: tuple = (0.0, 0.0, 0.0)  # m/s, NED, direction the air moves towards

    def __post_init__(self):
        v = tuple(float(c) for c in self.velocity)
        if len(v) != 3 or not all(math.isfinite(c) for c in v):
            raise ParameterError(f"wind velocity must be a finite 3-vector, got {self.velocity!r}")
        if math.sqrt(sum(c * c for c in v)) > MAX_WIND_SPEED:
            raise ParameterError(f"wind speed exceeds {MAX_WIND_SPEED} m/s")
        object.__setattr__(self, "velocity", v)

    @classmethod
    def from_speed(cls, speed, heading=0.0):
        """Horizontal wind blowing towards ``heading`` (rad from north)."""
        return cls((speed * math.cos(heading), speed * math.sin(heading), 0.0))


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    return math.pi - (math.pi - a) % (2.0 * math.pi)


def _clip(x, lo, hi):
    return lo if x < lo else hi if x > hi else x


def _clip_actuators(v, throttle_cap):
    m = _clip(0.5 * (v["m0"] + v["m1"]), 0.0, throttle_cap)
    fp = _clip(0.5 * (v["f0"] + v["f1"]), -1.0, 1.0)
    fy = _clip(0.5 * (v["f2"] + v["f3"]), -1.0, 1.0)
    return ActuatorState(m0=m, m1=m, m2=_clip(v["m2"], -1.0, 1.0), s=0.0,
                         f0=fp, f1=fp, f2=fy, f3=fy)


def apply_actuator_delta(act, delta, throttle_cap=0.5):
    """Add an 8-vector delta (``ACTUATOR_ORDER``) and clip to actuator ranges.

    Symmetric pairs are re-tied by averaging, so an asymmetric delta moves
    both members by the mean of their two entries.
    """
    d = dict(zip(ACTUATOR_ORDER, (float(x) for x in delta)))
    if len(d) != 8:
        raise ValueError("actuator delta must have 8 entries")
    v = {k: getattr(act, k) + d[k] for k in ACTUATOR_ORDER}
    return _clip_actuators(v, throttle_cap)


def net_vertical_force(params):
    """Buoyancy minus weight (N, positive up).

    The hull volume is calibrated so ``rho * V == total_mass``; the lift term
    is written on that identity so neutral trim cancels exactly.
    """
    displaced_mass = params.buoyancy_factor * params.total_mass
    return (displaced_mass - params.total_mass - params.ballast_mass) * params.gravity


def static_pitch(params):
    """Pitch at which pendulum moment balances the nose ballast moment."""
    return math.atan2(-params.ballast_mass * params.ballast_arm,
                      params.total_mass * params.gondola_pendulum_arm)


def trim_state(params, position=(0.0, 0.0, 0.0), yaw=0.0):
    if not isinstance(params, BlimpParams):
        raise ParameterError("params must be a BlimpParams instance")
    p = tuple(float(c) for c in position)
    if len(p) != 3 or not all(math.isfinite(c) for c in p):
        raise ParameterError(f"position must be a finite 3-vector, got {position!r}")
    return BlimpState(position=p, pitch=static_pitch(params), yaw=wrap_angle(float(yaw)))


def kinetic_energy(state, params):
    """Translational plus rotational kinetic energy (J)."""
    v2 = sum(c * c for c in state.ground_velocity)
    return 0.5 * (params.inertial_mass * v2
                  + params.pitch_inertia * state.pitch_rate ** 2
                  + params.yaw_inertia * state.yaw_rate ** 2)


def dynamics_step(state, act, wind, params, dt=MAX_STEP):
    """Advance ``state`` by ``dt`` seconds with semi-implicit Euler substeps."""
    if not 0.0 < dt <= MAX_STEP:
        raise ParameterError(f"dt must be in (0, {MAX_STEP}], got {dt}")
    n_sub = max(1, math.ceil(dt / MAX_SUBSTEP - 1e-9))
    h = dt / n_sub

    rho = params.air_density
    mass = params.inertial_mass
    half_rho = 0.5 * rho
    kx = half_rho * params.drag_area_axial
    ky = half_rho * params.drag_area_lateral
    kz = half_rho * params.drag_area_vertical
    f_down = -net_vertical_force(params)
    thrust = params.main_thrust_gain * (act.m0 + act.m1)
    fin_pitch = params.fin_moment_gain_pitch * 0.5 * (act.f0 + act.f1)
    fin_yaw = params.fin_moment_gain_yaw * 0.5 * (act.f2 + act.f3)
    tail = params.tail_motor_moment_gain * act.m2
    pend = params.total_mass * params.gravity * params.gondola_pendulum_arm
    ballast = params.ballast_mass * params.gravity * params.ballast_arm
    iy, iz = params.pitch_inertia, params.yaw_inertia
    cq, cr = params.pitch_damping, params.yaw_damping
    qbar_lim = params.fin_qbar_limit
    wn, we, wd = wind.velocity

    pn, pe, pd = state.position
    vn, ve, vd = state.ground_velocity
    th, psi, q, r = state.pitch, state.yaw, state.pitch_rate, state.yaw_rate

    for _ in range(n_sub):
        cth, sth = math.cos(th), math.sin(th)
        cps, sps = math.cos(psi), math.sin(psi)
        # body axes in world coordinates
        xn, xe, xd = cth * cps, cth * sps, -sth
        yn, ye = -sps, cps
        zn, ze, zd = sth * cps, sth * sps, cth

        an, ae, ad = vn - wn, ve - we, vd - wd
        ua = an * xn + ae * xe + ad * xd
        va = an * yn + ae * ye
        wa = an * zn + ae * ze + ad * zd
        dx = thrust - kx * abs(ua) * ua
        dy = -ky * abs(va) * va
        dz = -kz * abs(wa) * wa
        fn = dx * xn + dy * yn + dz * zn
        fe = dx * xe + dy * ye + dz * ze
        fd = dx * xd + dz * zd + f_down

        qbar = half_rho * (an * an + ae * ae + ad * ad)
        if qbar > qbar_lim:
            qbar = qbar_lim
        m_pitch = fin_pitch * qbar - pend * sth - ballast * cth - cq * q
        m_yaw = fin_yaw * qbar + tail - cr * r

        vn += h * fn / mass
        ve += h * fe / mass
        vd += h * fd / mass
        q += h * m_pitch / iy
        r += h * m_yaw / iz
        th += h * q
        psi += h * r

        # no slip through the air: remove body-lateral airspeed
        sps, cps = math.sin(psi), math.cos(psi)
        lat = -(vn - wn) * sps + (ve - we) * cps
        vn += lat * sps
        ve -= lat * cps

        pn += h * vn
        pe += h * ve
        pd += h * vd

    psi = wrap_angle(psi)
    vals = (pn, pe, pd, vn, ve, vd, th, psi, q, r)
    if not all(math.isfinite(x) for x in vals) or abs(th) >= 0.5 * math.pi:
        raise SimulationDiverged("integration produced a non-finite or inverted state",
                                 state=state, context={"time": state.time})
    return BlimpState(position=(pn, pe, pd), ground_velocity=(vn, ve, vd), pitch=th,
                      yaw=psi, pitch_rate=q, yaw_rate=r, time=state.time + dt)
