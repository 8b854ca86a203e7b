"""Adversarial estimation of the signature function by polynomial regression.

The attacker intercepts (x, y, Phi(x, y)) triples, fits a degree-bounded
bivariate polynomial by least squares, and spoofs the plant-side stream with
the estimate evaluated at the observable the controller is being fed.
Interception is imperfect: an optional seeded Gaussian position noise stands
in for the localization error of a real deployment (the signature value
itself is the plant's exact output). Estimation quality is scored as NRMSE
on a held-out grid spanning the plant's operating region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .smsf import DetectionConfig, PolySignature, default_signature, eval_signature, windowed_detect

# study protocol defaults: interception noise [m] and spiral geometry
STUDY_NOISE_STD = 0.01
SPIRAL_TURNS = 4.0
SPIRAL_RADIUS = 0.39


class UnderdeterminedFit(ValueError):
    """Raised when the sample set cannot pin down the polynomial coefficients."""


@dataclass
class SampleSet:
    """Intercepted triples; positions may carry interception noise."""

    x: np.ndarray
    y: np.ndarray
    phi: np.ndarray
    source: str = "grid"

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).ravel()
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.phi = np.asarray(self.phi, dtype=float).ravel()
        if not (len(self.x) == len(self.y) == len(self.phi)):
            raise ValueError("x, y, phi must have equal length")
        if len(self.x) == 0:
            raise ValueError("sample set is empty")

    @property
    def count(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class EstimatorConfig:
    degree: int = 4
    regularization: float = 0.0  # ridge weight on the coefficients

    def __post_init__(self):
        if not isinstance(self.degree, int) or self.degree < 1:
            raise ValueError(f"degree must be a positive int, got {self.degree}")
        if not (math.isfinite(self.regularization) and self.regularization >= 0.0):
            raise ValueError(f"regularization must be >= 0, got {self.regularization}")


def monomial_basis(degree: int):
    """(i, j) exponent pairs with i + j <= degree in graded-lexicographic order."""
    if degree < 0:
        raise ValueError(f"degree must be >= 0, got {degree}")
    return [(d - j, j) for d in range(degree + 1) for j in range(d + 1)]


def design_matrix(x: np.ndarray, y: np.ndarray, basis) -> np.ndarray:
    return np.column_stack([x**i * y**j for (i, j) in basis])


def fit_signature(samples: SampleSet, cfg: EstimatorConfig = EstimatorConfig()) -> PolySignature:
    """Least-squares polynomial fit of the intercepted signature values.

    Solved via numpy's SVD-based lstsq. The rank cutoff (rcond=1e-15) only
    trips on exact degeneracy such as too few samples, duplicated points, or
    samples confined to a coordinate axis; merely ill-conditioned coverage
    (a short trajectory arc) returns the honest, poorly extrapolating fit.
    """
    basis = monomial_basis(cfg.degree)
    if samples.count < len(basis):
        raise UnderdeterminedFit(
            f"under-determined: {samples.count} samples for {len(basis)} coefficients"
        )
    design = design_matrix(samples.x, samples.y, basis)
    target = samples.phi
    if cfg.regularization > 0.0:
        design = np.vstack([design, math.sqrt(cfg.regularization) * np.eye(len(basis))])
        target = np.concatenate([target, np.zeros(len(basis))])
    coeff, _, rank, _ = np.linalg.lstsq(design, target, rcond=1e-15)
    if rank < len(basis):
        raise UnderdeterminedFit(
            "under-determined: rank-deficient design matrix (insufficient workspace coverage)"
        )
    return PolySignature(dict(zip(basis, (float(c) for c in coeff))), max_degree=cfg.degree)


def nrmse(estimate: PolySignature, truth: PolySignature, eval_xy) -> float:
    """RMSE of (estimate - truth) over the evaluation set, normalized by the truth range."""
    pts = np.asarray(eval_xy, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise ValueError("eval_xy must be a nonempty (n, 2) array of positions")
    est = eval_signature(estimate, pts[:, 0], pts[:, 1])
    tru = eval_signature(truth, pts[:, 0], pts[:, 1])
    rng = float(tru.max() - tru.min())
    if rng <= 0.0:
        raise ValueError("truth has zero range on the evaluation set")
    return float(np.sqrt(np.mean((est - tru) ** 2)) / rng)


def spiral_samples(n: int, turns: float = SPIRAL_TURNS, radius: float = SPIRAL_RADIUS,
                   sig: PolySignature | None = None, noise_std: float = 0.0,
                   seed: int = 0) -> SampleSet:
    """Fictitious Archimedean spiral probe: r = radius*s, angle = 2*pi*turns*s.

    s runs uniformly over [0, 1] in n samples, so the probe always covers the
    full spiral and only the density grows with n. Phi comes from the true
    signature at the true spiral points; noise perturbs the recorded
    positions only.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    sig = sig if sig is not None else default_signature()
    s = np.linspace(0.0, 1.0, n)
    angle = 2.0 * np.pi * turns * s
    r = radius * s
    x = r * np.cos(angle)
    y = r * np.sin(angle)
    phi = np.atleast_1d(eval_signature(sig, x, y)).astype(float)
    if noise_std > 0.0:
        rng = np.random.default_rng(seed)
        x = x + rng.normal(0.0, noise_std, n)
        y = y + rng.normal(0.0, noise_std, n)
    return SampleSet(x, y, phi, source="spiral")


def trajectory_samples(trace, n: int, noise_std: float = 0.0, seed: int = 0) -> SampleSet:
    """First n logged samples eavesdropped from a run's plant-side stream."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n > len(trace.t):
        raise ValueError(f"trace has only {len(trace.t)} logged samples, requested {n}")
    x = np.array(trace.x[:n])
    y = np.array(trace.y[:n])
    phi = np.array(trace.phi_plant[:n])
    if noise_std > 0.0:
        rng = np.random.default_rng(seed)
        x = x + rng.normal(0.0, noise_std, n)
        y = y + rng.normal(0.0, noise_std, n)
    return SampleSet(x, y, phi, source="trajectory")


def holdout_grid(trace, n: int = 50, inflate: float = 0.2) -> np.ndarray:
    """n x n evaluation grid over the actual-trajectory bounding box, inflated."""
    x_lo, x_hi = float(trace.x.min()), float(trace.x.max())
    y_lo, y_hi = float(trace.y.min()), float(trace.y.max())
    pad_x = max(0.5 * inflate * (x_hi - x_lo), 1e-6)
    pad_y = max(0.5 * inflate * (y_hi - y_lo), 1e-6)
    xs = np.linspace(x_lo - pad_x, x_hi + pad_x, n)
    ys = np.linspace(y_lo - pad_y, y_hi + pad_y, n)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass
class SpoofResult:
    t: np.ndarray
    residual: np.ndarray
    caught: bool
    detect_t: float | None
    sup_residual: float


def spoof(trace, estimate: PolySignature, cfg: DetectionConfig | None = None) -> SpoofResult:
    """Replay a run with the plant-side stream replaced by the estimate.

    The attacker must reproduce the signature at the observable it feeds the
    controller, so the spoofed stream is the estimate evaluated at the
    observed position; the monitor compares it against the controller-side
    expectation already logged in the trace. An exact estimate is never
    caught, on any run.
    """
    cfg = cfg if cfg is not None else DetectionConfig()
    spoofed = eval_signature(estimate, trace.x_obs, trace.y_obs)
    residual = np.abs(spoofed - trace.phi_ctrl)
    detect_t = windowed_detect(trace.t, residual > cfg.epsilon, cfg.window)
    return SpoofResult(
        np.array(trace.t), residual, detect_t is not None, detect_t, float(residual.max())
    )


@dataclass
class StudyRow:
    source: str
    n: int
    nrmse: float


def estimation_study(trace, truth: PolySignature | None = None, ns=(150, 500, 1000),
                     noise_std: float = STUDY_NOISE_STD, seed: int = 0,
                     degree: int = 4):
    """Coverage study: fit quality versus sample count and eavesdropping source.

    For each n, fits once from the run's own trajectory prefix and once from
    the spiral probe, then scores both on the same held-out grid over the
    run's operating region. Returns StudyRow entries (source, n, nrmse).
    """
    truth = truth if truth is not None else default_signature()
    grid = holdout_grid(trace)
    cfg = EstimatorConfig(degree=degree)
    rows = []
    for source in ("trajectory", "spiral"):
        for n in ns:
            if source == "trajectory":
                samples = trajectory_samples(trace, n, noise_std=noise_std, seed=seed)
            else:
                samples = spiral_samples(n, noise_std=noise_std, seed=seed)
            estimate = fit_signature(samples, cfg)
            rows.append(StudyRow(source, int(n), nrmse(estimate, truth, grid)))
    return rows


def samples_to_csv(samples: SampleSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,y,phi\n")
        for xv, yv, pv in zip(samples.x, samples.y, samples.phi):
            fh.write(f"{xv:.17g},{yv:.17g},{pv:.17g}\n")


def samples_from_csv(path, source: str = "grid") -> SampleSet:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "x,y,phi":
            raise ValueError(f"unexpected sample header in {path}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return SampleSet(data[:, 0], data[:, 1], data[:, 2], source=source)
