"""Unicycle kinematics and a fixed-step RK4 integrator for the plant.

The posture is p = (x, y, theta) in the world frame and the command is
q = (v, omega) in the body frame, related by pdot = J(theta) q. The heading
is never wrapped: reflection attacks map theta to 2*theta0 - theta, and
wrapping on either side of the channel would break that affine identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Posture:
    """World-frame pose (x [m], y [m], theta [rad], unwrapped)."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        for name in ("x", "y", "theta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"Posture.{name} must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)

    @staticmethod
    def from_array(arr) -> "Posture":
        return Posture(float(arr[0]), float(arr[1]), float(arr[2]))


@dataclass(frozen=True)
class BodyVelocity:
    """Body-frame command (v [m/s], omega [rad/s])."""

    v: float
    omega: float

    def __post_init__(self):
        if not (math.isfinite(self.v) and math.isfinite(self.omega)):
            raise ValueError("BodyVelocity components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.omega], dtype=float)


def jacobian(theta: float) -> np.ndarray:
    """Input Jacobian J(theta) mapping (v, omega) to (xdot, ydot, thetadot).

    Columns: [cos(theta), sin(theta), 0] and [0, 0, 1]; the first column is a
    unit vector for every heading.
    """
    return np.array([[math.cos(theta), 0.0], [math.sin(theta), 0.0], [0.0, 1.0]])


def derivative(p: Posture, q: BodyVelocity) -> np.ndarray:
    """Posture rate J(theta) @ (v, omega) as a length-3 array."""
    return np.array(
        [q.v * math.cos(p.theta), q.v * math.sin(p.theta), q.omega]
    )


def rk4_step(x: float, y: float, theta: float, v: float, omega: float, dt: float):
    """One classical RK4 step with the command held constant over dt.

    The heading rate equals the held omega at every stage, so the theta
    update is exact (theta + dt*omega) and stages 2 and 3 coincide for the
    position rows; the position combination below is bitwise the classical
    (k1 + 2*k2 + 2*k3 + k4)/6.
    """
    th_mid = theta + 0.5 * dt * omega
    th_end = theta + dt * omega
    k1x = v * math.cos(theta)
    k1y = v * math.sin(theta)
    k2x = v * math.cos(th_mid)
    k2y = v * math.sin(th_mid)
    k4x = v * math.cos(th_end)
    k4y = v * math.sin(th_end)
    return (
        x + dt * ((k1x + 4.0 * k2x + k4x) / 6.0),
        y + dt * ((k1y + 4.0 * k2y + k4y) / 6.0),
        th_end,
    )


def step(p: Posture, q: BodyVelocity, dt: float) -> Posture:
    """Advance the posture by one zero-order-hold RK4 step of length dt.

    Parameters
    ----------
    p : Posture
        Current posture.
    q : BodyVelocity
        Command held constant over the step.
    dt : float
        Step length in seconds, strictly positive.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    x, y, theta = rk4_step(p.x, p.y, p.theta, q.v, q.omega, dt)
    return Posture(x, y, theta)
