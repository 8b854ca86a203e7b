"""Deterministic closed-loop execution and undetectability reporting.

One run steps the plant at a fixed rate with zero-order-hold commands,
applying the attack's observable map before the controller and its command
map after, and logs a decimated trace of the actual state, the observed
state, both command streams, the body-frame error, the Lyapunov value, and
the signature evaluations on both sides of the channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import smsf
from .fdia import AffineAttack, attack_command, attack_state
from .kinematics import Posture, rk4_step
from .tracking import (
    ControllerGains,
    RefConfig,
    body_frame_error,
    feedforward,
    kanayama,
    lyapunov,
    reference_table,
)

TRACE_COLUMNS = (
    "t",
    "x",
    "y",
    "theta",
    "x_obs",
    "y_obs",
    "theta_obs",
    "v_cmd",
    "w_cmd",
    "v_rx",
    "w_rx",
    "xe",
    "ye",
    "thetae",
    "V",
    "phi_plant",
    "phi_ctrl",
)
_COL_INDEX = {name: k for k, name in enumerate(TRACE_COLUMNS)}


@dataclass(frozen=True)
class SimConfig:
    """Closed-loop run configuration; 100 Hz stepping, 50 Hz logging by default."""

    ref: RefConfig = RefConfig()
    gains: ControllerGains = ControllerGains()
    p0: Posture = Posture(0.0, 0.02, 0.0)
    dt: float = 0.01  # s
    log_stride: int = 2  # log every log_stride-th tick
    duration: float = 30.0  # s

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"SimConfig.dt must be positive, got {self.dt}")
        if not isinstance(self.log_stride, int) or self.log_stride < 1:
            raise ValueError(f"SimConfig.log_stride must be a positive int, got {self.log_stride}")
        if not (math.isfinite(self.duration) and self.duration > 0.0):
            raise ValueError(f"SimConfig.duration must be positive, got {self.duration}")
        if self.ref.duration < self.duration - 1e-9:
            raise ValueError(
                f"reference duration {self.ref.duration} shorter than run duration {self.duration}"
            )

    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass
class SimTrace:
    """Logged run: data rows in TRACE_COLUMNS order; columns readable as attributes."""

    data: np.ndarray
    complete: bool = True

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float).reshape(-1, len(TRACE_COLUMNS))

    def __getattr__(self, name):
        idx = _COL_INDEX.get(name)
        if idx is None:
            raise AttributeError(name)
        return self.data[:, idx]

    def __len__(self) -> int:
        return self.data.shape[0]

    def to_csv(self, path) -> None:
        write_trace_csv(path, self.data)

    @staticmethod
    def from_csv(path) -> "SimTrace":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != ",".join(TRACE_COLUMNS):
                raise ValueError(f"unexpected trace header in {path}")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        return SimTrace(data)


def write_trace_csv(path, data: np.ndarray) -> None:
    """17-significant-digit CSV so repeated runs produce byte-identical files."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for row in data:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def run(cfg: SimConfig, attack: AffineAttack | None = None,
        signature: smsf.PolySignature | None = None) -> SimTrace:
    """Execute one closed-loop run and return its trace.

    Per tick: observe (through the attack's state map if present), look up
    the reference, form the body-frame error, apply the Kanayama law, pass
    the command through the attack's command map, log if due, then advance
    the plant one RK4 step. The final tick at t = duration is logged without
    stepping. Identical configs yield bit-identical traces.
    """
    sig = signature if signature is not None else smsf.default_signature()
    table = reference_table(cfg.ref, cfg.dt)
    n_steps = cfg.n_steps()
    if len(table) < n_steps + 1:
        raise ValueError("reference table shorter than the run")
    gains = cfg.gains
    x, y, th = cfg.p0.x, cfg.p0.y, cfg.p0.theta
    rows = []
    for k in range(n_steps + 1):
        t = k * cfg.dt
        p_act = Posture(x, y, th)
        p_obs = attack_state(attack, p_act) if attack is not None else p_act
        p_ref = Posture.from_array(table[k])
        q_ref = feedforward(cfg.ref, t)
        err = body_frame_error(p_ref, p_obs)
        q_cmd = kanayama(q_ref, err, gains)
        q_rx = attack_command(attack, q_cmd) if attack is not None else q_cmd
        if k % cfg.log_stride == 0:
            rows.append(
                (
                    t,
                    x,
                    y,
                    th,
                    p_obs.x,
                    p_obs.y,
                    p_obs.theta,
                    q_cmd.v,
                    q_cmd.omega,
                    q_rx.v,
                    q_rx.omega,
                    err.xe,
                    err.ye,
                    err.thetae,
                    lyapunov(err, gains),
                    smsf.eval_signature(sig, x, y),
                    smsf.eval_signature(sig, p_obs.x, p_obs.y),
                )
            )
        if k < n_steps:
            x, y, th = rk4_step(x, y, th, q_rx.v, q_rx.omega, cfg.dt)
    return SimTrace(np.array(rows, dtype=float))


@dataclass
class UndetectabilityReport:
    """Sup deviations between an attacked run and its nominal shadow."""

    sup_obs_dev: float
    sup_actual_dev: float
    undetectable: bool
    tol: float


def undetectability_report(attacked: SimTrace, nominal: SimTrace,
                           attack: AffineAttack, tol: float = 1e-9) -> UndetectabilityReport:
    """Compare the observed stream of an attacked run against the nominal run.

    sup_obs_dev is the max-norm deviation between the attacked run's observed
    posture and the nominal actual posture; sup_actual_dev compares the
    attacked actual posture against the affine inverse image of the nominal
    one. The verdict holds when sup_obs_dev <= tol.
    """
    if not np.array_equal(attacked.t, nominal.t):
        raise ValueError("time grids differ between the two traces")
    obs = np.stack([attacked.x_obs, attacked.y_obs, attacked.theta_obs], axis=1)
    nom = np.stack([nominal.x, nominal.y, nominal.theta], axis=1)
    sup_obs = float(np.max(np.abs(obs - nom)))

    act = np.stack([attacked.x, attacked.y, attacked.theta], axis=1)
    mapped = np.linalg.solve(attack.s_x, (nom - attack.d_x).T).T
    sup_act = float(np.max(np.abs(act - mapped)))
    return UndetectabilityReport(sup_obs, sup_act, sup_obs <= tol, tol)


def error_series(trace: SimTrace):
    """(t, xe, ye, thetae) arrays of the observed body-frame error."""
    return trace.t, trace.xe, trace.ye, trace.thetae
