"""Sinusoidal reference generation and the Kanayama tracking law.

The reference carries a constant linear velocity and a sinusoidal angular
feedforward. Its posture is integrated with the same zero-order-hold RK4
step the plant uses, so the reference is exactly trackable by the discrete
loop: with zero initial error the closed loop reproduces it bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .kinematics import BodyVelocity, Posture, rk4_step

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ControllerGains:
    """Kanayama gains (kx, ky, ktheta), all strictly positive."""

    kx: float = 2.0
    ky: float = 2000.0
    ktheta: float = 100.0

    def __post_init__(self):
        for name in ("kx", "ky", "ktheta"):
            g = getattr(self, name)
            if not (math.isfinite(g) and g > 0.0):
                raise ValueError(f"ControllerGains.{name} must be positive, got {g}")


@dataclass(frozen=True)
class RefConfig:
    """Feedforward profile: v_ref constant, omega_r = omega_amp*sin(2*pi*t/omega_period)."""

    v_ref: float = 0.02  # m/s
    omega_amp: float = 0.3  # rad/s
    omega_period: float = 4.0  # s
    duration: float = 30.0  # s

    def __post_init__(self):
        if not (math.isfinite(self.v_ref) and self.v_ref > 0.0):
            raise ValueError(f"RefConfig.v_ref must be positive, got {self.v_ref}")
        if not math.isfinite(self.omega_amp):
            raise ValueError("RefConfig.omega_amp must be finite")
        if not (math.isfinite(self.omega_period) and self.omega_period > 0.0):
            raise ValueError(f"RefConfig.omega_period must be positive, got {self.omega_period}")
        if not (math.isfinite(self.duration) and self.duration > 0.0):
            raise ValueError(f"RefConfig.duration must be positive, got {self.duration}")


@dataclass(frozen=True)
class RefSample:
    """Reference posture and feedforward command at one instant."""

    p_r: Posture
    q_r: BodyVelocity


@dataclass(frozen=True)
class PostureError:
    """Tracking error rotated into the current body frame."""

    xe: float
    ye: float
    thetae: float


def feedforward(cfg: RefConfig, t: float) -> BodyVelocity:
    """Feedforward command q_r(t)."""
    return BodyVelocity(cfg.v_ref, cfg.omega_amp * math.sin(TWO_PI * t / cfg.omega_period))


@lru_cache(maxsize=None)
def reference_table(cfg: RefConfig, dt: float = 0.01) -> np.ndarray:
    """Reference postures on the grid k*dt for k = 0..ceil(duration/dt).

    Integrated from the origin posture by holding q_r(k*dt) over each step,
    matching the plant's own discretization. Cached per (cfg, dt).
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    n = int(math.ceil(cfg.duration / dt - 1e-9))
    table = np.empty((n + 1, 3))
    x = y = th = 0.0
    table[0] = (x, y, th)
    for k in range(n):
        q = feedforward(cfg, k * dt)
        x, y, th = rk4_step(x, y, th, q.v, q.omega, dt)
        table[k + 1] = (x, y, th)
    table.setflags(write=False)
    return table


def gen_reference(cfg: RefConfig, t: float, dt: float = 0.01) -> RefSample:
    """Reference sample at time t in [0, duration].

    Off-grid times are reached by a partial zero-order-hold step from the
    last grid node, keeping the sample consistent with the discrete loop.
    """
    if not (-1e-9 <= t <= cfg.duration + 1e-9):
        raise ValueError(f"t={t} outside [0, {cfg.duration}]")
    t = min(max(t, 0.0), cfg.duration)
    table = reference_table(cfg, dt)
    idx = int(math.floor(t / dt + 1e-9))
    idx = min(idx, len(table) - 1)
    rem = t - idx * dt
    if rem <= 1e-12:
        p = Posture.from_array(table[idx])
    else:
        q = feedforward(cfg, idx * dt)
        p = Posture(*rk4_step(*table[idx], q.v, q.omega, rem))
    return RefSample(p, feedforward(cfg, t))


def body_frame_error(p_r: Posture, p_c: Posture) -> PostureError:
    """World-frame offset to the reference, rotated into the current body frame.

    xe = cos(thc)*(xr-xc) + sin(thc)*(yr-yc)
    ye = -sin(thc)*(xr-xc) + cos(thc)*(yr-yc)
    thetae = thr - thc   (headings unwrapped on both sides)
    """
    c = math.cos(p_c.theta)
    s = math.sin(p_c.theta)
    dx = p_r.x - p_c.x
    dy = p_r.y - p_c.y
    return PostureError(c * dx + s * dy, -s * dx + c * dy, p_r.theta - p_c.theta)


def kanayama(q_r: BodyVelocity, e: PostureError, gains: ControllerGains) -> BodyVelocity:
    """Kanayama tracking law.

    v = v_r*cos(thetae) + kx*xe
    omega = omega_r + v_r*(ky*ye + ktheta*sin(thetae))
    """
    v = q_r.v * math.cos(e.thetae) + gains.kx * e.xe
    omega = q_r.omega + q_r.v * (gains.ky * e.ye + gains.ktheta * math.sin(e.thetae))
    return BodyVelocity(v, omega)


def lyapunov(e: PostureError, gains: ControllerGains) -> float:
    """Tracking Lyapunov value V = (xe^2 + ye^2)/2 + (1 - cos(thetae))/ky."""
    return 0.5 * (e.xe * e.xe + e.ye * e.ye) + (1.0 - math.cos(e.thetae)) / gains.ky
