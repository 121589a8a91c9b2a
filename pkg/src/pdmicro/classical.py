"""Classical two-path structure of the uniform-field electron fountain.

A monoenergetic point source in a constant downward force reaches any
detector point inside the paraboloid of safety along exactly two
trajectories (early/direct and late/reflected). This module solves the
shooting problem, carries reduced actions and stability amplitudes, and
coherently sums the two paths into a semiclassical Green function that the
exact module can be checked against.

Launch angle theta is measured from +z (0 = straight up, against the force;
pi = straight down toward the detector).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import RootBracketError
from .units import FieldScales
from .green import SpacePoint

__all__ = [
    "Trajectory",
    "TrajectorySet",
    "rho_max",
    "find_trajectories",
    "action_along",
    "action_quadrature",
    "central_phase_difference",
    "fringe_count_estimate",
    "semiclassical_wave",
    "resimulate_endpoint",
]

CAUSTIC_BAND = 0.02           # exclusion band around rho_max, fraction of rho_max
_THETA_CELLS = 720            # bracketing grid over launch angle
_FD_THETA = 1e-6              # Jacobian finite-difference step, radians


@dataclass(frozen=True)
class Trajectory:
    """One classical path from the source to a detector point."""

    t_flight: float          # s
    launch_angle: float      # rad from +z
    action_S: float          # reduced action W = Int p dl at fixed E, J s
    vanvleck_amp: float      # |A| in the (hbar^2/2m) G normalization, 1/m
    maslov: int


@dataclass(frozen=True)
class TrajectorySet:
    target: SpacePoint
    members: tuple
    caustic_flag: bool = False


def _zeta(E: float, scales: FieldScales) -> float:
    return E / scales.force_F


def rho_max(E: float, scales: FieldScales, d: float) -> float:
    """Radius of the classically allowed disk on the plane z = -d.

    Closed form 2 sqrt(d zeta + zeta^2), zeta = E/F, from the paraboloid of
    safety z = zeta - rho^2/(4 zeta).
    """
    if not E > 0.0:
        raise ValueError("rho_max requires E > 0 (no classically allowed region)")
    if not d > 0.0:
        raise ValueError("rho_max requires d > 0")
    z = _zeta(E, scales)
    return 2.0 * math.sqrt(d * z + z * z)


def _flight_time(theta, v0, g, d):
    """Unique positive root of the z equation for given launch angle."""
    vz = v0 * np.cos(theta)
    return (vz + np.sqrt(vz * vz + 2.0 * g * d)) / g


def _shoot(theta, v0, g, d):
    """Arrival meridian coordinate rho_f(theta) on the plane z = -d (signed)."""
    t = _flight_time(theta, v0, g, d)
    return v0 * np.sin(theta) * t


def _polish(fn, lo, hi, f_lo, f_hi, rel_tol=1e-12, max_iter=200):
    """Bisection with secant acceleration on a sign-changing bracket."""
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        # secant candidate, kept only if it lands strictly inside
        denom = f_hi - f_lo
        if denom != 0.0:
            sec = hi - f_hi * (hi - lo) / denom
            if lo < sec < hi:
                mid = sec
        f_mid = fn(mid)
        if f_mid == 0.0 or (hi - lo) <= rel_tol * max(abs(mid), 1e-3):
            return mid
        if (f_lo < 0.0) == (f_mid < 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return 0.5 * (lo + hi)


def _kinematics(E, scales, d):
    m = scales.constants.m_e
    v0 = math.sqrt(2.0 * E / m)
    g = scales.force_F / m
    return m, v0, g


def find_trajectories(target: SpacePoint, E: float, scales: FieldScales) -> TrajectorySet:
    """Solve the shooting problem to a detector point (z = -d < 0).

    Inside the allowed disk returns two members sorted by flight time;
    exactly one degenerate member on the caustic; none outside. A failure
    of the bracketing grid raises RootBracketError with diagnostics rather
    than silently dropping roots.
    """
    if not E > 0.0:
        raise ValueError("find_trajectories requires E > 0")
    if not target.z < 0.0:
        raise ValueError("target must lie below the source (z < 0)")
    d = -target.z
    m, v0, g = _kinematics(E, scales, d)
    rmax = rho_max(E, scales, d)
    rho_t = target.rho

    if rho_t > rmax * (1.0 + 1e-12):
        return TrajectorySet(target=target, members=(), caustic_flag=False)

    if rho_t >= rmax * (1.0 - 1e-9):
        # tangent trajectory: the arrival radius is stationary in theta
        theta_c = _golden_max(lambda th: _shoot(th, v0, g, d), 0.0, 0.5 * math.pi)
        t_c = float(_flight_time(theta_c, v0, g, d))
        traj = _build_trajectory(theta_c, t_c, target, E, scales, d, maslov=0)
        return TrajectorySet(target=target, members=(traj,), caustic_flag=True)

    if rho_t == 0.0:
        # 1-D kinematics: straight down (early) and straight up (late)
        t_dn = (-v0 + math.sqrt(v0 * v0 + 2.0 * g * d)) / g
        t_up = (v0 + math.sqrt(v0 * v0 + 2.0 * g * d)) / g
        members = (
            _build_trajectory(math.pi, t_dn, target, E, scales, d, maslov=0),
            _build_trajectory(0.0, t_up, target, E, scales, d, maslov=1),
        )
        return TrajectorySet(target=target, members=members, caustic_flag=False)

    thetas = np.linspace(0.0, math.pi, _THETA_CELLS + 1)
    resid = _shoot(thetas, v0, g, d) - rho_t
    sign_change = np.nonzero(resid[:-1] * resid[1:] < 0.0)[0]
    if len(sign_change) != 2:
        raise RootBracketError(
            f"expected 2 bracketed launch angles, grid found {len(sign_change)} "
            f"(rho={rho_t:.6e} m, rho_max={rmax:.6e} m, cells={_THETA_CELLS})"
        )
    roots = []
    fn = lambda th: float(_shoot(th, v0, g, d)) - rho_t
    for i in sign_change:
        roots.append(_polish(fn, float(thetas[i]), float(thetas[i + 1]),
                             float(resid[i]), float(resid[i + 1])))
    trajs = []
    for theta in roots:
        t = float(_flight_time(theta, v0, g, d))
        # conjugate point (envelope touch) occurs at v0/(g cos theta)
        conj = (math.cos(theta) > 0.0) and (v0 / (g * math.cos(theta)) < t)
        trajs.append(_build_trajectory(theta, t, target, E, scales, d, maslov=1 if conj else 0))
    trajs.sort(key=lambda tr: tr.t_flight)
    return TrajectorySet(target=target, members=tuple(trajs), caustic_flag=False)


def _golden_max(f, lo, hi, iters=200):
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d_ = a + phi * (b - a)
    fc, fd = f(c), f(d_)
    for _ in range(iters):
        if fc > fd:
            b, d_, fd = d_, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d_, fd
            d_ = a + phi * (b - a)
            fd = f(d_)
        if (b - a) < 1e-14 * math.pi:
            break
    return 0.5 * (a + b)


def _action_closed(E, scales, theta, t):
    """Reduced action W = Int p dl = Int m v^2 dt in closed form (cubic in t)."""
    m = scales.constants.m_e
    F = scales.force_F
    v0 = math.sqrt(2.0 * E / m)
    vz0 = v0 * math.cos(theta)
    return 2.0 * E * t - F * vz0 * t * t + (F * F / (3.0 * m)) * t**3


def _amp_ratio_axis(v0, t):
    """sin(theta)/(rho_f |d rho_f/d theta|) limit on the axis: 1/(v0 t)^2."""
    return 1.0 / (v0 * t) ** 2


def _build_trajectory(theta, t, target, E, scales, d, maslov):
    m, v0, g = _kinematics(E, scales, d)
    W = _action_closed(E, scales, theta, t)

    # flux-tube amplitude from the shooting-map Jacobian
    if target.rho < 1e-9 * d or theta in (0.0, math.pi):
        ratio = _amp_ratio_axis(v0, t)
    else:
        h = _FD_THETA
        drho = (float(_shoot(theta + h, v0, g, d)) - float(_shoot(theta - h, v0, g, d))) / (2.0 * h)
        ratio = math.sin(theta) / (target.rho * abs(drho))
    vz_f = v0 * math.cos(theta) - g * t
    v_f = math.sqrt(v0 * v0 + 2.0 * g * d)       # energy conservation at z=-d
    cos_alpha = abs(vz_f) / v_f
    # |A| = (1/4 pi) sqrt( (v0/v_f) * ratio / cos_alpha ), lengths in meters
    amp = math.sqrt((v0 / v_f) * ratio / cos_alpha) / (4.0 * math.pi)
    return Trajectory(
        t_flight=t,
        launch_angle=theta,
        action_S=W,
        vanvleck_amp=amp,
        maslov=maslov,
    )


def action_along(traj: Trajectory, target: SpacePoint, E: float, scales: FieldScales) -> float:
    """Closed-form reduced action of a trajectory returned by the solver."""
    d = -target.z
    if not d > 0.0:
        raise ValueError("target must lie below the source")
    m, v0, g = _kinematics(E, scales, d)
    # consistency: the trajectory must land on the target
    t = traj.t_flight
    z_end = v0 * math.cos(traj.launch_angle) * t - 0.5 * g * t * t
    rho_end = v0 * math.sin(traj.launch_angle) * t
    if abs(z_end + d) > 1e-6 * d or abs(rho_end - target.rho) > 1e-6 * max(d, target.rho):
        raise ValueError("trajectory does not land on the given target")
    return _action_closed(E, scales, traj.launch_angle, t)


def action_quadrature(traj: Trajectory, target: SpacePoint, E: float, scales: FieldScales,
                      n_samples: int = 60001) -> float:
    """Independent check: W = Int |p| dl along the sampled geometric path.

    Chord-length sampling converges O(h^2); the default sampling puts the
    error near 1e-10 relative.
    """
    d = -target.z
    m, v0, g = _kinematics(E, scales, d)
    F = scales.force_F
    t = np.linspace(0.0, traj.t_flight, n_samples)
    z = v0 * math.cos(traj.launch_angle) * t - 0.5 * g * t * t
    rho = v0 * math.sin(traj.launch_angle) * t
    p = np.sqrt(2.0 * m * (E - F * z))
    dl = np.hypot(np.diff(rho), np.diff(z))
    return float(np.sum(0.5 * (p[1:] + p[:-1]) * dl))


def central_phase_difference(E: float, scales: FieldScales) -> float:
    """Phase offset of the two paths at the pattern center (independent of d).

    Delta Phi = (4 sqrt2 / 3) sqrt(m) E^{3/2} / (hbar F).
    """
    if not E > 0.0:
        raise ValueError("central_phase_difference requires E > 0")
    c = scales.constants
    return (4.0 * math.sqrt(2.0) / 3.0) * math.sqrt(c.m_e) * E**1.5 / (c.hbar * scales.force_F)


def fringe_count_estimate(E: float, scales: FieldScales) -> float:
    """Semiclassical fringe count Delta Phi / (2 pi)."""
    return central_phase_difference(E, scales) / (2.0 * math.pi)


def resimulate_endpoint(traj: Trajectory, E: float, scales: FieldScales, d: float,
                        n_steps: int = 2000):
    """Re-integrate Newton's equations (RK4) and return the landing point.

    RK4 is exact for constant acceleration up to roundoff, so this is a
    genuine independent check of the root solve, not of the integrator.
    """
    m, v0, g = _kinematics(E, scales, d)
    state = np.array([0.0, 0.0, v0 * math.sin(traj.launch_angle), v0 * math.cos(traj.launch_angle)])

    def deriv(s):
        return np.array([s[2], s[3], 0.0, -g])

    h = traj.t_flight / n_steps
    for _ in range(n_steps):
        k1 = deriv(state)
        k2 = deriv(state + 0.5 * h * k1)
        k3 = deriv(state + 0.5 * h * k2)
        k4 = deriv(state + h * k3)
        state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return state[0], state[1]   # (rho, z) at t_flight


def semiclassical_wave(target: SpacePoint, E: float, scales: FieldScales) -> complex:
    """Coherent two-path sum G_sc = -Sum |A_i| e^{i(W_i/hbar - maslov_i pi/2)}.

    Same (hbar^2/2m)-normalization as green_energy, so |G_sc|^2 compares
    directly with |green_energy(...).value|^2. Refuses targets outside the
    allowed disk or within the caustic exclusion band (2% of rho_max),
    where the stationary-phase amplitudes lose meaning.
    """
    d = -target.z
    rmax = rho_max(E, scales, d)
    if target.rho > rmax * (1.0 - CAUSTIC_BAND):
        raise ValueError(
            f"semiclassical_wave: target within the caustic band "
            f"(rho = {target.rho:.4e}, limit {(1.0 - CAUSTIC_BAND) * rmax:.4e})"
        )
    tset = find_trajectories(target, E, scales)
    if len(tset.members) != 2:
        raise RootBracketError("expected the two-path region")
    hbar = scales.constants.hbar
    total = 0.0j
    for tr in tset.members:
        phase = math.fmod(tr.action_S / hbar, 2.0 * math.pi) - tr.maslov * 0.5 * math.pi
        total += tr.vanvleck_amp * np.exp(1j * phase)
    return complex(-total)
