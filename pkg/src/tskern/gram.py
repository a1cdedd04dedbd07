"""Gram and cross-Gram construction, Jacobi spectra, shift regularization, persistence.

Sequence kernels here are not guaranteed positive semidefinite (log-domain
values are not even kernels), so training code regularizes a Gram by adding
-lambda_min to the diagonal when the smallest eigenvalue is negative. That
shift touches square training Grams only; rectangular train-vs-test blocks
are always left as computed.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numba
import numpy as np

from .dtw import MEAN_MODES, kdtw1, kdtw2
from .ga import ga_kernel
from .ground import GroundKernelSpec
from .timeseries import LabeledDataset, TimeSeries

GRAM_FAMILIES = ("ga_log", "ga_linear", "dtw1", "dtw2")


class NonRepresentableError(ValueError):
    """A linear-domain kernel value left the double range."""


class EigConvergenceError(RuntimeError):
    """The Jacobi sweep failed to reduce the off-diagonal mass."""


@dataclass(frozen=True)
class KernelSelector:
    """Which sequence kernel fills a Gram.

    ga_log / ga_linear need a ground kernel spec; dtw2 needs sigma; dtw1
    needs neither. mean_mode applies to the dtw families only.
    """

    family: str
    ground: GroundKernelSpec | None = None
    sigma: float | None = None
    mean_mode: str = "auto"

    def __post_init__(self):
        if self.family not in GRAM_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r} (expected one of {GRAM_FAMILIES})")
        if self.family in ("ga_log", "ga_linear") and self.ground is None:
            raise ValueError(f"{self.family} requires a ground kernel spec")
        if self.family == "dtw2":
            if self.sigma is None or not (math.isfinite(self.sigma) and self.sigma > 0):
                raise ValueError("dtw2 requires a finite positive sigma")
        if self.mean_mode not in MEAN_MODES:
            raise ValueError(f"unknown mean mode {self.mean_mode!r}")

    def desc(self) -> dict:
        d: dict = {"family": self.family, "log_domain": self.family == "ga_log"}
        if self.ground is not None:
            d["ground"] = {"kind": self.ground.kind, "sigma": self.ground.sigma}
        if self.family == "dtw2":
            d["sigma"] = float(self.sigma)
        if self.family in ("dtw1", "dtw2"):
            d["mean_mode"] = self.mean_mode
        return d


def with_sigma(selector: KernelSelector, sigma: float) -> KernelSelector:
    """The selector with its bandwidth replaced, wherever the family keeps one."""
    if selector.family in ("ga_log", "ga_linear"):
        if selector.ground.kind == "unit":
            return selector
        return replace(selector, ground=GroundKernelSpec(selector.ground.kind, sigma))
    if selector.family == "dtw2":
        return replace(selector, sigma=float(sigma))
    return selector


def pair_value(selector: KernelSelector, x: TimeSeries, y: TimeSeries) -> float:
    fam = selector.family
    if fam == "ga_log":
        return ga_kernel(x, y, selector.ground).value_log
    if fam == "ga_linear":
        r = ga_kernel(x, y, selector.ground)
        if r.value_linear is None:
            raise NonRepresentableError(
                f"linear kernel value not representable (value_log = {r.value_log:.6g})"
            )
        return r.value_linear
    if fam == "dtw1":
        return kdtw1(x, y, selector.mean_mode)
    return kdtw2(x, y, selector.sigma, selector.mean_mode)


@dataclass(frozen=True, eq=False)
class GramMatrix:
    values: np.ndarray
    ids: tuple[str, ...]
    kernel_desc: dict
    regularization: dict | None = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        n = len(self.ids)
        if vals.ndim != 2 or vals.shape != (n, n):
            raise ValueError(f"values must be ({n}, {n}), got {vals.shape}")
        if len(set(self.ids)) != n:
            raise ValueError("ids must be unique")
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite Gram entry")
        scale = max(1.0, float(np.abs(vals).max())) if vals.size else 1.0
        if float(np.abs(vals - vals.T).max()) > 1e-12 * scale:
            raise ValueError("Gram matrix is not symmetric")
        if self.regularization is not None:
            lam = float(self.regularization["lambda_min_before"])
            shift = float(self.regularization["shift_applied"])
            if shift < 0 or abs(shift - max(0.0, -lam)) > 1e-12 * max(1.0, scale, abs(lam)):
                raise ValueError("regularization record inconsistent with lambda_min_before")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "ids", tuple(self.ids))

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True, eq=False)
class CrossGram:
    """Kernel values between a row dataset (training) and a column dataset."""

    values: np.ndarray
    row_ids: tuple[str, ...]
    col_ids: tuple[str, ...]
    kernel_desc: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape != (len(self.row_ids), len(self.col_ids)):
            raise ValueError(
                f"values must be ({len(self.row_ids)}, {len(self.col_ids)}), got {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite cross-Gram entry")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        object.__setattr__(self, "col_ids", tuple(self.col_ids))


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        return os.cpu_count() or 1
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return workers


def _pair_values(selector, tasks, workers):
    # tasks: list of (x, y, id_x, id_y); result order follows task order, so
    # the assembled matrix does not depend on the worker count.
    def one(task):
        x, y, ix, iy = task
        try:
            return pair_value(selector, x, y)
        except NonRepresentableError as e:
            raise NonRepresentableError(f"pair ({ix!r}, {iy!r}): {e}") from None

    w = _resolve_workers(workers)
    if w <= 1 or len(tasks) < 2:
        return [one(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=w) as ex:
        return list(ex.map(one, tasks, chunksize=8))


def build_gram(ds: LabeledDataset, selector: KernelSelector, workers: int | None = None) -> GramMatrix:
    """Dense symmetric Gram over a dataset; the upper triangle is computed and
    mirrored, so symmetry is exact."""
    items = ds.items
    n = len(items)
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    tasks = [(items[i].series, items[j].series, items[i].id, items[j].id) for i, j in pairs]
    results = _pair_values(selector, tasks, workers)
    vals = np.zeros((n, n))
    for (i, j), v in zip(pairs, results):
        vals[i, j] = v
        vals[j, i] = v
    return GramMatrix(vals, ds.ids(), selector.desc(), None)


def build_cross_gram(
    train: LabeledDataset,
    test: LabeledDataset,
    selector: KernelSelector,
    workers: int | None = None,
) -> CrossGram:
    if train.dim != test.dim:
        raise ValueError(f"dimension mismatch between datasets: {train.dim} vs {test.dim}")
    pairs = [(i, j) for i in range(len(train)) for j in range(len(test))]
    tasks = [
        (train.items[i].series, test.items[j].series, train.items[i].id, test.items[j].id)
        for i, j in pairs
    ]
    results = _pair_values(selector, tasks, workers)
    vals = np.zeros((len(train), len(test)))
    for (i, j), v in zip(pairs, results):
        vals[i, j] = v
    return CrossGram(vals, train.ids(), test.ids(), selector.desc())


def submatrix(g: GramMatrix, indices) -> GramMatrix:
    """Principal submatrix on a subset of items; any shift record is dropped."""
    idx = np.asarray(indices, dtype=int)
    vals = g.values[np.ix_(idx, idx)]
    ids = tuple(g.ids[i] for i in idx)
    return GramMatrix(vals, ids, g.kernel_desc, None)


def cross_from_gram(g: GramMatrix, row_indices, col_indices) -> CrossGram:
    rows = np.asarray(row_indices, dtype=int)
    cols = np.asarray(col_indices, dtype=int)
    vals = g.values[np.ix_(rows, cols)]
    return CrossGram(
        vals,
        tuple(g.ids[i] for i in rows),
        tuple(g.ids[j] for j in cols),
        g.kernel_desc,
    )


# ---------------------------------------------------------------------------
# Spectra via cyclic Jacobi rotations


@numba.njit(cache=True, nogil=True)
def _off_norm(A):
    n = A.shape[0]
    acc = 0.0
    for p in range(n - 1):
        for q in range(p + 1, n):
            acc += 2.0 * A[p, q] * A[p, q]
    return math.sqrt(acc)


@numba.njit(cache=True, nogil=True)
def _jacobi_sweeps(A, target, max_sweeps):
    n = A.shape[0]
    off = _off_norm(A)
    prev_off = np.inf
    sweeps = 0
    while off > target and sweeps < max_sweeps and off < prev_off:
        prev_off = off
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = 0.5 * (A[q, q] - A[p, p]) / apq
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    sign = 1.0 if theta >= 0.0 else -1.0
                    t = sign / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
        sweeps += 1
        off = _off_norm(A)
    return off


def jacobi_eigenvalues(a, max_sweeps: int = 100) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations."""
    A = np.array(a, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("non-finite matrix entry")
    scale = max(1.0, float(np.abs(A).max()))
    if float(np.abs(A - A.T).max()) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    n = A.shape[0]
    if n == 1:
        return A[0, :1].copy()
    A = np.ascontiguousarray(0.5 * (A + A.T))
    fnorm = float(np.sqrt((A * A).sum()))
    if fnorm == 0.0:
        return np.zeros(n)
    off = float(_jacobi_sweeps(A, 1e-14 * fnorm, max_sweeps))
    # rotations may stall at the rounding floor; only an off-diagonal residue
    # large enough to disturb eigenvalues is a failure
    if off > 1e-9 * fnorm:
        raise EigConvergenceError(f"off-diagonal mass {off:.3e} did not converge")
    return np.sort(np.diagonal(A))


def _values_of(g) -> np.ndarray:
    return g.values if isinstance(g, GramMatrix) else np.asarray(g, dtype=float)


def min_eigenvalue(g) -> float:
    return float(jacobi_eigenvalues(_values_of(g))[0])


@dataclass(frozen=True)
class PsdReport:
    is_psd: bool
    lambda_min: float


def psd_check(g, tol: float = 1e-9) -> PsdReport:
    """Positive semidefinite up to rounding: lambda_min >= -tol * max(1, spectral radius)."""
    lam = jacobi_eigenvalues(_values_of(g))
    radius = float(np.abs(lam).max())
    lam_min = float(lam[0])
    return PsdReport(lam_min >= -tol * max(1.0, radius), lam_min)


def regularize(g: GramMatrix) -> GramMatrix:
    """Shift the diagonal by -lambda_min when the spectrum dips negative.

    A matrix that is already PSD within rounding (lambda_min >= -tol with
    tol = 1e-12 * max(1, largest entry)) is returned unshifted, which makes
    the operation idempotent.
    """
    lam_min = min_eigenvalue(g)
    tol = 1e-12 * max(1.0, float(np.abs(g.values).max()))
    if lam_min < -tol:
        shift = -lam_min
        vals = g.values + shift * np.eye(len(g))
    else:
        shift = 0.0
        vals = g.values
    record = {"lambda_min_before": lam_min, "shift_applied": shift}
    return GramMatrix(vals, g.ids, g.kernel_desc, record)


# ---------------------------------------------------------------------------
# Persistence: <base>.gram.csv (matrix) + <base>.gram.json (sidecar)


def _base_path(path) -> str:
    s = str(path)
    for suffix in (".gram.csv", ".gram.json"):
        if s.endswith(suffix):
            return s[: -len(suffix)]
    return s


def save_gram(g: GramMatrix, path) -> tuple[Path, Path]:
    base = _base_path(path)
    csv_path = Path(base + ".gram.csv")
    json_path = Path(base + ".gram.json")
    np.savetxt(csv_path, g.values, fmt="%.17g", delimiter=",")
    sidecar = {
        "ids": list(g.ids),
        "kernel_desc": g.kernel_desc,
        "regularization": g.regularization,
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
    return csv_path, json_path


def load_gram(path) -> GramMatrix:
    base = _base_path(path)
    vals = np.loadtxt(base + ".gram.csv", delimiter=",", ndmin=2)
    with open(base + ".gram.json", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    return GramMatrix(
        vals,
        tuple(sidecar["ids"]),
        sidecar["kernel_desc"],
        sidecar["regularization"],
    )
