"""Global alignment kernel: the sum of alignment weights, evaluated in the log domain.

K(x, y) sums, over every alignment of the two series, the product of ground
kernel values along the aligned pairs. Equivalently, log K is a soft maximum
of the additive alignment scores. The quadratic-time recursion accumulates

    M[i, j] = (M[i, j-1] + M[i-1, j-1] + M[i-1, j]) * k(x_i, y_j)

with M[0, 0] = 1 and zero elsewhere on the boundary; K(x, y) = M[n, m].
Run linearly this overflows or underflows beyond toy sizes, so the production
path applies the same recursion to L = log M with log-sum-exp combining.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .alignments import AlignmentBudget, DEFAULT_BUDGET, enumerate_alignments, product_weight
from .ground import GroundKernelSpec, ground_matrix, log_ground_matrix
from .timeseries import TimeSeries

# exp() is representable (normal, finite) only for arguments in this band
_MAX_EXP = math.log(np.finfo(np.float64).max)
_MIN_EXP = math.log(np.finfo(np.float64).tiny)


@dataclass(frozen=True)
class GaResult:
    """value_log always holds; value_linear is None when exp(value_log) leaves
    the normal double range."""

    value_log: float
    value_linear: float | None
    cells_computed: int


def _check_pair(x: TimeSeries, y: TimeSeries) -> None:
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} vs {y.dim}")


@numba.njit(cache=True, nogil=True)
def _ga_log_dp(logk):
    n, m = logk.shape
    prev = np.full(m + 1, -np.inf)
    cur = np.full(m + 1, -np.inf)
    prev[0] = 0.0
    for i in range(n):
        cur[0] = -np.inf
        for j in range(1, m + 1):
            a = cur[j - 1]
            b = prev[j - 1]
            c = prev[j]
            hi = a if a >= b else b
            if c > hi:
                hi = c
            if hi == -np.inf:
                cur[j] = -np.inf
            else:
                cur[j] = (
                    hi
                    + np.log(np.exp(a - hi) + np.exp(b - hi) + np.exp(c - hi))
                    + logk[i, j - 1]
                )
        prev, cur = cur, prev
    return prev[m]


@numba.njit(cache=True, nogil=True)
def _ga_linear_dp(kmat):
    n, m = kmat.shape
    prev = np.zeros(m + 1)
    cur = np.zeros(m + 1)
    prev[0] = 1.0
    for i in range(n):
        cur[0] = 0.0
        for j in range(1, m + 1):
            cur[j] = (cur[j - 1] + prev[j - 1] + prev[j]) * kmat[i, j - 1]
        prev, cur = cur, prev
    return prev[m]


def ga_kernel(x: TimeSeries, y: TimeSeries, k: GroundKernelSpec) -> GaResult:
    """Evaluate the kernel for one pair; O(n*m) time, O(min(n, m)) DP rows."""
    _check_pair(x, y)
    logk = log_ground_matrix(k, x.values, y.values)
    n, m = logk.shape
    if logk.shape[1] > logk.shape[0]:
        # the kernel is symmetric in its arguments; roll over the shorter side
        logk = np.ascontiguousarray(logk.T)
    value_log = float(_ga_log_dp(logk))
    if _MIN_EXP <= value_log <= _MAX_EXP:
        value_linear = math.exp(value_log)
    else:
        value_linear = None
    return GaResult(value_log, value_linear, n * m)


def softmax_of_scores(x: TimeSeries, y: TimeSeries, k: GroundKernelSpec) -> float:
    """log K(x, y): the soft maximum of all alignment scores under log k."""
    return ga_kernel(x, y, k).value_log


def ga_log_matrix(x: TimeSeries, y: TimeSeries, k: GroundKernelSpec) -> np.ndarray:
    """The full (n+1, m+1) log-domain DP table, for inspection on small inputs."""
    _check_pair(x, y)
    logk = log_ground_matrix(k, x.values, y.values)
    n, m = logk.shape
    L = np.full((n + 1, m + 1), -np.inf)
    L[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            terms = np.array([L[i, j - 1], L[i - 1, j - 1], L[i - 1, j]])
            hi = terms.max()
            L[i, j] = hi + np.log(np.exp(terms - hi).sum()) + logk[i - 1, j - 1]
    return L


def ga_kernel_bruteforce(
    x: TimeSeries, y: TimeSeries, k: GroundKernelSpec, budget: AlignmentBudget = DEFAULT_BUDGET
) -> float:
    """Sum of per-alignment product weights by explicit enumeration.

    Independent of the DP; feasible only within the enumeration budget.
    Terms are accumulated largest first to keep the summation tight.
    """
    _check_pair(x, y)
    weights = [product_weight(a, x, y, k) for a in enumerate_alignments(len(x), len(y), budget)]
    weights.sort(reverse=True)
    return float(sum(weights))


def ga_kernel_linear_reference(x: TimeSeries, y: TimeSeries, k: GroundKernelSpec) -> float:
    """The linear-domain recursion, kept as a reference.

    Overflows to inf (or drowns to 0) beyond small inputs; that failure is the
    point of comparison for the log-domain path.
    """
    _check_pair(x, y)
    kmat = ground_matrix(k, x.values, y.values)
    if kmat.shape[1] > kmat.shape[0]:
        kmat = np.ascontiguousarray(kmat.T)
    return float(_ga_linear_dp(kmat))
