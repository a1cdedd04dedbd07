"""Pointwise similarity on R^d: ground kernels and the negative squared-distance score."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GROUND_KINDS = ("gaussian", "halved_gaussian_ratio", "unit")
CPD_KINDS = ("neg_sq_euclid",)

_LOG_HALF = math.log(0.5)


@dataclass(frozen=True)
class GroundKernelSpec:
    """A named positive kernel on points.

    gaussian                exp(-|x-y|^2 / sigma^2)
    halved_gaussian_ratio   h / (1 - h) with h = exp(-|x-y|^2 / sigma^2) / 2
    unit                    constant 1 (sigma unused)
    """

    kind: str
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in GROUND_KINDS:
            raise ValueError(f"unknown ground kernel {self.kind!r} (expected one of {GROUND_KINDS})")
        sigma = float(self.sigma)
        if self.kind != "unit" and not (math.isfinite(sigma) and sigma > 0.0):
            raise ValueError(f"sigma must be a finite positive number, got {self.sigma!r}")
        object.__setattr__(self, "sigma", sigma)


@dataclass(frozen=True)
class CpdScoreSpec:
    """A conditionally positive definite additive score; only -|x-y|^2 for now."""

    kind: str = "neg_sq_euclid"

    def __post_init__(self):
        if self.kind not in CPD_KINDS:
            raise ValueError(f"unknown cpd score {self.kind!r} (expected one of {CPD_KINDS})")


def _checked_sqdist(x, y) -> float:
    xv = np.asarray(x, dtype=float).ravel()
    yv = np.asarray(y, dtype=float).ravel()
    if xv.shape != yv.shape:
        raise ValueError(f"dimension mismatch: {xv.shape[0]} vs {yv.shape[0]}")
    if not (np.all(np.isfinite(xv)) and np.all(np.isfinite(yv))):
        raise ValueError("non-finite input point")
    d = xv - yv
    return float(np.dot(d, d))


def eval_kernel(spec: GroundKernelSpec, x, y) -> float:
    sq = _checked_sqdist(x, y)
    if spec.kind == "unit":
        return 1.0
    if spec.kind == "gaussian":
        return math.exp(-sq / (spec.sigma * spec.sigma))
    h = 0.5 * math.exp(-sq / (spec.sigma * spec.sigma))
    return h / (1.0 - h)


def eval_log(spec: GroundKernelSpec, x, y) -> float:
    """log of eval_kernel, computed without going through the linear value.

    Stays finite where the linear value would underflow to 0.
    """
    sq = _checked_sqdist(x, y)
    if spec.kind == "unit":
        return 0.0
    if spec.kind == "gaussian":
        return -sq / (spec.sigma * spec.sigma)
    log_h = _LOG_HALF - sq / (spec.sigma * spec.sigma)
    # log(h / (1-h)); exp(log_h) may underflow, in which case log1p(-0) == 0 is exact enough
    return log_h - math.log1p(-math.exp(log_h))


def eval_cpd(spec: CpdScoreSpec, x, y) -> float:
    if not isinstance(spec, CpdScoreSpec):
        raise TypeError("spec must be a CpdScoreSpec")
    return -_checked_sqdist(x, y)


def ratio_transform_check(spec: GroundKernelSpec, x, y) -> float:
    """k / (1 + k): maps the ratio kernel back to the halved Gaussian it came from."""
    k = eval_kernel(spec, x, y)
    return k / (1.0 + k)


# ---------------------------------------------------------------------------
# Vectorized forms used by the sequence kernels; same formulas as above.

# Cap on elements in one broadcast difference block (n * m * d), to bound peak memory.
_BLOCK_ELEMS = 32_000_000


def sqdist_matrix(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, (n, m), via explicit differences."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
        raise ValueError(f"point arrays must be 2-d with equal dim, got {X.shape} and {Y.shape}")
    n, m, d = X.shape[0], Y.shape[0], X.shape[1]
    out = np.empty((n, m))
    block = max(1, _BLOCK_ELEMS // max(m * d, 1))
    for s in range(0, n, block):
        e = min(n, s + block)
        diff = X[s:e, None, :] - Y[None, :, :]
        out[s:e] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def log_ground_matrix(spec: GroundKernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    if spec.kind == "unit":
        return np.zeros((len(X), len(Y)))
    sq = sqdist_matrix(X, Y)
    if spec.kind == "gaussian":
        return -sq / (spec.sigma * spec.sigma)
    log_h = _LOG_HALF - sq / (spec.sigma * spec.sigma)
    return log_h - np.log1p(-np.exp(log_h))


def ground_matrix(spec: GroundKernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    if spec.kind == "unit":
        return np.ones((len(X), len(Y)))
    sq = sqdist_matrix(X, Y)
    if spec.kind == "gaussian":
        return np.exp(-sq / (spec.sigma * spec.sigma))
    h = 0.5 * np.exp(-sq / (spec.sigma * spec.sigma))
    return h / (1.0 - h)
