"""State-monitoring signature functions.

A signature is a secret bivariate polynomial Phi(x, y) that the plant
evaluates on its actual position and streams to the controller, which
compares it against Phi evaluated on the observed position. A signature is
resilient to a given affine attack when no scalar affine channel
s_phi*Phi(actual) + d_phi can reproduce Phi(observed) over the operating
neighborhood of the attack's anchor posture.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


@dataclass
class PolySignature:
    """Sparse bivariate polynomial: terms maps (i, j) to the x^i y^j coefficient."""

    terms: dict
    max_degree: int = 4

    def __post_init__(self):
        if not isinstance(self.max_degree, int) or self.max_degree < 1:
            raise ValueError(f"max_degree must be a positive int, got {self.max_degree}")
        canon = {}
        for key, coeff in self.terms.items():
            i, j = key
            if not (isinstance(i, int) and isinstance(j, int) and i >= 0 and j >= 0):
                raise ValueError(f"exponents must be non-negative ints, got {key}")
            if i + j > self.max_degree:
                raise ValueError(f"term {key} exceeds max total degree {self.max_degree}")
            coeff = float(coeff)
            if not math.isfinite(coeff):
                raise ValueError(f"coefficient for {key} must be finite")
            canon[(i, j)] = coeff
        # fixed iteration order keeps evaluation bitwise reproducible
        self.terms = dict(sorted(canon.items()))


def default_signature() -> PolySignature:
    """Expanded form of x^4 + y^4 + (x - 50xy)^2 + (xy - 5y)^2."""
    return PolySignature(
        {
            (4, 0): 1.0,
            (0, 4): 1.0,
            (2, 0): 1.0,
            (0, 2): 25.0,
            (2, 1): -100.0,
            (1, 2): -10.0,
            (2, 2): 2501.0,
        }
    )


def eval_signature(sig: PolySignature, x, y):
    """Evaluate Phi at scalar or array positions (broadcasting)."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(xa, ya).shape)
    for (i, j), coeff in sig.terms.items():
        out += coeff * xa**i * ya**j
    if out.ndim == 0:
        return float(out)
    return out


def validate_smsf(sig: PolySignature) -> bool:
    """Check a signature is fit for monitoring duty.

    Requires no constant term (Phi(0,0) = 0, anchoring the zero of the
    residual) and nonnegativity on the operational grid [-1, 1]^2 sampled at
    0.01 resolution. Raises ValueError on violation.
    """
    if sig.terms.get((0, 0), 0.0) != 0.0:
        raise ValueError("signature has a constant term: Phi(0,0) != 0")
    axis = np.linspace(-1.0, 1.0, 201)
    gx, gy = np.meshgrid(axis, axis)
    vals = eval_signature(sig, gx, gy)
    if float(vals.min()) < 0.0:
        raise ValueError("signature is negative on the operational grid")
    return True


@dataclass
class AffineFit:
    """Least-squares scalar channel phi_out ~ s_phi*phi_in + d_phi."""

    s_phi: float
    d_phi: float
    nrmse: float


def affine_fit(pairs) -> AffineFit:
    """Fit phi_out = s_phi*phi_in + d_phi by least squares over (in, out) pairs.

    nrmse is the fit RMSE normalized by the output range. Degenerate input
    spread (range below 1e-12) is rejected: no affine channel is identifiable
    from a constant input stream.
    """
    arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("pairs must be an iterable of (phi_in, phi_out)")
    if arr.shape[0] < 2:
        raise ValueError("need at least two pairs")
    phi_in = arr[:, 0]
    phi_out = arr[:, 1]
    if float(phi_in.max() - phi_in.min()) < 1e-12:
        raise ValueError("degenerate input spread: phi_in range < 1e-12")
    design = np.column_stack([phi_in, np.ones_like(phi_in)])
    coeff, _, _, _ = np.linalg.lstsq(design, phi_out, rcond=None)
    resid = design @ coeff - phi_out
    rmse = float(np.sqrt(np.mean(resid**2)))
    out_range = float(phi_out.max() - phi_out.min())
    if rmse == 0.0:
        nrmse = 0.0
    elif out_range == 0.0:
        nrmse = math.inf
    else:
        nrmse = rmse / out_range
    return AffineFit(float(coeff[0]), float(coeff[1]), nrmse)


@dataclass
class ResilienceResult:
    """resilient means no affine channel reproduces the observed stream."""

    resilient: bool
    fit: AffineFit


def resilience_check(sig: PolySignature, attack, trace, tol: float = 0.05,
                     half_width: float = 0.1, grid_n: int = 101) -> ResilienceResult:
    """Resilience of sig against an affine attack near a run's anchor posture.

    Fits Phi(observed) = s_phi*Phi(actual) + d_phi, the best scalar channel
    the attacker could splice into the plant-side stream, over a grid of
    actual positions covering the square of the given half width centered on
    the run's starting position (heading held at its starting value). The
    signature is vulnerable when the fit's NRMSE is at most tol.

    The neighborhood scale matters: every anchored affine state map looks
    affine in Phi far from its anchor, so the verdict is only informative at
    desk scale, where the anchor offsets are a structural fraction of the
    region. A fit restricted to the one-dimensional path actually driven is
    strictly easier for the attacker and is not what this check answers; use
    monitor() to judge a specific run.
    """
    if not (math.isfinite(half_width) and half_width > 0.0):
        raise ValueError(f"half_width must be positive, got {half_width}")
    if not isinstance(grid_n, int) or grid_n < 2:
        raise ValueError(f"grid_n must be an int >= 2, got {grid_n}")
    x0 = float(trace.x[0])
    y0 = float(trace.y[0])
    theta0 = float(trace.theta[0])
    ax = np.linspace(x0 - half_width, x0 + half_width, grid_n)
    ay = np.linspace(y0 - half_width, y0 + half_width, grid_n)
    gx, gy = np.meshgrid(ax, ay)
    pts = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, theta0)])
    mapped = pts @ attack.s_x.T + attack.d_x
    phi_in = eval_signature(sig, pts[:, 0], pts[:, 1])
    phi_out = eval_signature(sig, mapped[:, 0], mapped[:, 1])
    fit = affine_fit(np.column_stack([phi_in, phi_out]))
    return ResilienceResult(fit.nrmse > tol, fit)


@dataclass(frozen=True)
class DetectionConfig:
    """Online residual detector: flag after `window` consecutive exceedances of epsilon."""

    epsilon: float = 1e-6
    window: int = 10

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not isinstance(self.window, int) or self.window < 1:
            raise ValueError(f"window must be a positive int, got {self.window}")


@dataclass
class MonitorResult:
    t: np.ndarray
    residual: np.ndarray
    flag: bool
    first_exceed_t: float | None
    detect_t: float | None


def windowed_detect(t: np.ndarray, exceed: np.ndarray, window: int):
    """First time a run of `window` consecutive True samples completes, or None."""
    if len(exceed) >= window:
        runs = np.convolve(exceed.astype(float), np.ones(window), mode="valid")
        hits = np.nonzero(runs >= window)[0]
        if len(hits):
            return float(t[hits[0] + window - 1])
    return None


def monitor(trace, sig: PolySignature, channel: AffineFit | None = None,
            cfg: DetectionConfig | None = None) -> MonitorResult:
    """Residual detector r(t) = |Phi_received(t) - Phi_expected(t)| over a trace.

    Phi_received is the plant-side evaluation at the actual position, passed
    through the scalar channel if one is given; Phi_expected is the
    controller-side evaluation at the observed position.
    """
    cfg = cfg if cfg is not None else DetectionConfig()
    phi_plant = eval_signature(sig, trace.x, trace.y)
    received = phi_plant if channel is None else channel.s_phi * phi_plant + channel.d_phi
    expected = eval_signature(sig, trace.x_obs, trace.y_obs)
    residual = np.abs(received - expected)
    exceed = residual > cfg.epsilon
    detect_t = windowed_detect(trace.t, exceed, cfg.window)
    first_exceed_t = float(trace.t[np.argmax(exceed)]) if bool(exceed.any()) else None
    return MonitorResult(np.array(trace.t), residual, detect_t is not None, first_exceed_t, detect_t)


def signature_to_dict(sig: PolySignature) -> dict:
    """JSON-ready form with "i,j" string keys in sorted order."""
    return {
        "max_degree": sig.max_degree,
        "terms": {f"{i},{j}": coeff for (i, j), coeff in sorted(sig.terms.items())},
    }


def signature_from_dict(d: dict) -> PolySignature:
    terms = {}
    for key, coeff in d["terms"].items():
        i, j = key.split(",")
        terms[(int(i), int(j))] = float(coeff)
    return PolySignature(terms, max_degree=int(d.get("max_degree", 4)))


def save_signature(sig: PolySignature, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(signature_to_dict(sig), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_signature(path) -> PolySignature:
    with open(path, "r", encoding="utf-8") as fh:
        return signature_from_dict(json.load(fh))
