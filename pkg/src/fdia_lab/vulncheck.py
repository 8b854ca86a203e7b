"""Vulnerability of scalar function families to linear s-channel attacks.

A family member g is vulnerable when some nontrivial pair (alpha, beta)
satisfies alpha*g(beta*x) = g(x) on the operating grid: the attacker can
then scale the argument and the value without moving the residual. The
checker scans beta on a dense grid, solves the best alpha per beta in
closed form (one-dimensional least squares), and classifies the candidate
set: a one-dimensional manifold of solutions, isolated nontrivial pairs, or
only the trivial identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TAG_LINEAR = "Linear"
TAG_COSINE = "Cosine"
TAG_SINE = "Sine"
TAG_QUADRATIC = "Quadratic"
TAG_EXPONENTIAL = "Exponential"
FAMILY_TAGS = (TAG_LINEAR, TAG_COSINE, TAG_SINE, TAG_QUADRATIC, TAG_EXPONENTIAL)

CLASS_CONTINUOUS = "continuous-family"
CLASS_DISCRETE = "discrete-nontrivial"
CLASS_TRIVIAL = "trivial-only"


@dataclass(frozen=True)
class ScalarFamily:
    """One member of a parameterized scalar family; c scales Linear/Quadratic/Exponential."""

    tag: str
    c: float = 1.0

    def __post_init__(self):
        if self.tag not in FAMILY_TAGS:
            raise ValueError(f"unknown family {self.tag!r}, expected one of {FAMILY_TAGS}")
        if not math.isfinite(self.c):
            raise ValueError("ScalarFamily.c must be finite")
        if self.tag in (TAG_LINEAR, TAG_QUADRATIC, TAG_EXPONENTIAL) and self.c == 0.0:
            raise ValueError(f"{self.tag} requires c != 0")


def family_function(fam: ScalarFamily):
    if fam.tag == TAG_LINEAR:
        return lambda x: fam.c * x
    if fam.tag == TAG_COSINE:
        return np.cos
    if fam.tag == TAG_SINE:
        return np.sin
    if fam.tag == TAG_QUADRATIC:
        return lambda x: fam.c * x * x
    return lambda x: fam.c * np.exp(x)


def default_grid(fam: ScalarFamily) -> np.ndarray:
    """Trig families: theta in [-2*pi, 2*pi]; others: x in [-2, 2]; step ~0.01."""
    if fam.tag in (TAG_COSINE, TAG_SINE):
        return np.linspace(-2.0 * np.pi, 2.0 * np.pi, 1257)
    return np.linspace(-2.0, 2.0, 401)


def attack_residual(fam: ScalarFamily, alpha: float, beta: float, grid) -> float:
    """max |alpha*g(beta*x) - g(x)| over the grid."""
    x = np.asarray(grid, dtype=float)
    if x.size == 0:
        raise ValueError("empty evaluation grid")
    g = family_function(fam)
    return float(np.max(np.abs(alpha * g(beta * x) - g(x))))


@dataclass
class VulnVerdict:
    family: str
    kind: str  # CLASS_CONTINUOUS | CLASS_DISCRETE | CLASS_TRIVIAL
    constraint: str | None
    candidates: list = field(default_factory=list)  # (alpha, beta) pairs
    residual: float = math.inf  # best residual over nontrivial pairs


def _manifold_label(candidates, tol: float) -> str:
    a = np.array([c[0] for c in candidates])
    b = np.array([c[1] for c in candidates])
    if float(np.max(np.abs(a * b - 1.0))) <= tol:
        return "alpha*beta = 1"
    if float(np.max(np.abs(a * b * b - 1.0))) <= tol:
        return "alpha*beta^2 = 1"
    return "alpha = h(beta) (tabulated)"


def classify(fam: ScalarFamily, tol: float = 1e-9, alpha_range=(-3.0, 3.0),
             beta_range=(-3.0, 3.0), step: float = 0.001) -> VulnVerdict:
    """Grid search for nontrivial (alpha, beta) pairs with residual <= tol.

    beta runs over its range at the given step; the best alpha for each beta
    is the closed-form least-squares solution on the evaluation grid, checked
    against the max-residual tolerance and the alpha range. Ten or more
    admitting betas classify as a continuous family, at least one as
    discrete nontrivial pairs, none as trivial-only. The identity (1, 1) is
    always excluded.
    """
    if tol <= 0.0 or step <= 0.0:
        raise ValueError("tol and step must be positive")
    x = default_grid(fam)
    g = family_function(fam)
    gx = g(x)

    n_beta = int(round((beta_range[1] - beta_range[0]) / step))
    betas = np.linspace(beta_range[0], beta_range[1], n_beta + 1)
    betas = betas[np.abs(betas) > 0.5 * step]  # beta = 0 collapses the argument

    gbx = g(betas[:, None] * x[None, :])  # (n_beta, n_grid)
    denom = np.sum(gbx * gbx, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        alphas = np.where(denom > 0.0, (gbx @ gx) / denom, np.inf)
    residuals = np.max(np.abs(alphas[:, None] * gbx - gx[None, :]), axis=1)

    in_range = np.isfinite(alphas) & (alphas >= alpha_range[0]) & (alphas <= alpha_range[1])
    trivial = (np.abs(betas - 1.0) <= 0.5 * step) & (np.abs(alphas - 1.0) <= 1e-6)
    nontrivial = in_range & ~trivial

    admitted = nontrivial & (residuals <= tol)
    candidates = [(float(a), float(b)) for a, b in zip(alphas[admitted], betas[admitted])]
    best = float(np.min(residuals[nontrivial])) if nontrivial.any() else math.inf

    if len(candidates) >= 10:
        return VulnVerdict(fam.tag, CLASS_CONTINUOUS, _manifold_label(candidates, tol),
                           candidates, best)
    if candidates:
        return VulnVerdict(fam.tag, CLASS_DISCRETE, None, candidates, best)
    return VulnVerdict(fam.tag, CLASS_TRIVIAL, None, [], best)


def default_families():
    return (
        ScalarFamily(TAG_LINEAR),
        ScalarFamily(TAG_COSINE),
        ScalarFamily(TAG_SINE),
        ScalarFamily(TAG_QUADRATIC),
        ScalarFamily(TAG_EXPONENTIAL),
    )


def verdict_table(tol: float = 1e-9):
    """Classify every default family; returns the verdicts in declaration order."""
    return [classify(fam, tol=tol) for fam in default_families()]
