"""Soft-margin SVM on precomputed kernels: SMO dual solver, one-vs-all, CV grid search.

The solver works on the dual with box constraint 0 <= alpha <= C and
sum(alpha * t) = 0, picking the maximal-KKT-violating pair each iteration and
keeping the gradient incrementally updated. The dual objective is tracked and
must never decrease; a violation raises instead of passing silently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numba
import numpy as np

from .gram import (
    CrossGram,
    GramMatrix,
    KernelSelector,
    build_cross_gram,
    build_gram,
    cross_from_gram,
    regularize,
    submatrix,
    with_sigma,
)
from .ground import sqdist_matrix
from .timeseries import DatasetError, LabeledDataset

SMO_TOL = 1e-3
SMO_MAX_PASSES = 100_000

DEFAULT_C = 1000.0
DEFAULT_C_GRID = tuple(10.0 ** i for i in range(-2, 7))
DEFAULT_SIGMA_FACTORS = (0.25, 0.5, 1.0, 2.0, 4.0)


class SmoConvergenceError(RuntimeError):
    """The working-pair loop hit its iteration cap before closing the KKT gap."""


@numba.njit(cache=True, nogil=True)
def _smo(K, t, C, tol, max_iter):
    n = t.shape[0]
    alpha = np.zeros(n)
    grad = np.full(n, -1.0)
    obj = 0.0
    monotone = True
    it = 0
    converged = False
    m_val = -np.inf
    M_val = np.inf
    while True:
        # maximal violating pair: i from the set free to grow in the +t
        # direction, j from the set free to shrink
        m_val = -np.inf
        M_val = np.inf
        i = -1
        j = -1
        for a in range(n):
            ta = t[a]
            v = -ta * grad[a]
            if (ta > 0.0 and alpha[a] < C) or (ta < 0.0 and alpha[a] > 0.0):
                if v > m_val:
                    m_val = v
                    i = a
            if (ta > 0.0 and alpha[a] > 0.0) or (ta < 0.0 and alpha[a] < C):
                if v < M_val:
                    M_val = v
                    j = a
        if i < 0 or j < 0 or m_val - M_val <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        q = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if q <= 1e-12:
            q = 1e-12
        lam = (m_val - M_val) / q
        cap_i = (C - alpha[i]) if t[i] > 0.0 else alpha[i]
        cap_j = alpha[j] if t[j] > 0.0 else (C - alpha[j])
        if cap_i < lam:
            lam = cap_i
        if cap_j < lam:
            lam = cap_j
        alpha[i] = min(C, max(0.0, alpha[i] + t[i] * lam))
        alpha[j] = min(C, max(0.0, alpha[j] - t[j] * lam))
        for a in range(n):
            grad[a] += lam * t[a] * (K[a, i] - K[a, j])
        s_alpha = 0.0
        ag = 0.0
        for a in range(n):
            s_alpha += alpha[a]
            ag += alpha[a] * grad[a]
        new_obj = 0.5 * (s_alpha - ag)
        if new_obj < obj - 1e-9 * max(1.0, abs(obj)):
            monotone = False
        obj = new_obj
        it += 1
    return alpha, grad, it, converged, monotone, m_val, M_val, obj


@dataclass(frozen=True, eq=False)
class SvmBinaryModel:
    alphas: np.ndarray
    bias: float
    positive_label: str
    C: float
    targets: np.ndarray
    iterations: int
    objective: float

    def __post_init__(self):
        alphas = np.array(self.alphas, dtype=float)
        targets = np.array(self.targets, dtype=float)
        if alphas.shape != targets.shape or alphas.ndim != 1:
            raise ValueError("alphas and targets must be 1-d arrays of equal length")
        if np.any(alphas < 0.0) or np.any(alphas > self.C):
            raise ValueError("alphas must lie in [0, C]")
        if abs(float(alphas @ targets)) > 1e-6:
            raise ValueError("sum(alpha * t) must vanish")
        alphas.flags.writeable = False
        targets.flags.writeable = False
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "targets", targets)


def train_binary(
    gram,
    targets,
    C: float,
    positive_label: str = "",
    tol: float = SMO_TOL,
    max_passes: int = SMO_MAX_PASSES,
) -> SvmBinaryModel:
    """Fit one binary machine on a precomputed square kernel matrix."""
    K = np.ascontiguousarray(gram.values if isinstance(gram, GramMatrix) else np.asarray(gram, float))
    t = np.ascontiguousarray(np.asarray(targets, dtype=float))
    if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] != t.shape[0]:
        raise ValueError(f"kernel matrix {K.shape} does not match {t.shape[0]} targets")
    if not np.all(np.isin(t, (-1.0, 1.0))):
        raise ValueError("targets must be +1 or -1")
    if np.all(t > 0) or np.all(t < 0):
        raise ValueError("targets must contain both classes")
    if not (math.isfinite(C) and C > 0):
        raise ValueError("C must be a finite positive number")
    alpha, grad, iters, converged, monotone, m_val, M_val, obj = _smo(
        K, t, float(C), float(tol), int(max_passes)
    )
    if not converged:
        raise SmoConvergenceError(
            f"no convergence in {max_passes} iterations (KKT gap {m_val - M_val:.3e} > {tol:g})"
        )
    if not monotone:
        raise RuntimeError("dual objective decreased during optimization")
    free = (alpha > 0.0) & (alpha < C)
    v = t - (alpha * t) @ K
    if np.any(free):
        bias = float(np.mean(v[free]))
    elif math.isfinite(m_val) and math.isfinite(M_val):
        bias = float(0.5 * (m_val + M_val))
    else:
        bias = 0.0
    return SvmBinaryModel(alpha, bias, positive_label, float(C), t, int(iters), float(obj))


def kkt_residual(model: SvmBinaryModel, gram) -> float:
    """Largest violation of the optimality conditions on the training set."""
    K = gram.values if isinstance(gram, GramMatrix) else np.asarray(gram, float)
    t = model.targets
    f = (model.alphas * t) @ K + model.bias
    margin = t * f
    res = 0.0
    for a in range(len(t)):
        al = model.alphas[a]
        if al <= 0.0:
            res = max(res, 1.0 - margin[a])
        elif al >= model.C:
            res = max(res, margin[a] - 1.0)
        else:
            res = max(res, abs(margin[a] - 1.0))
    return float(res)


@dataclass(frozen=True, eq=False)
class OvaModel:
    binaries: tuple[SvmBinaryModel, ...]
    labels: tuple[str, ...]
    train_ids: tuple[str, ...]

    def __post_init__(self):
        if len(self.binaries) != len(self.labels):
            raise ValueError("one binary machine per label required")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be unique")


def train_ova(
    gram: GramMatrix,
    labels,
    C: float,
    tol: float = SMO_TOL,
    max_passes: int = SMO_MAX_PASSES,
) -> OvaModel:
    """One machine per distinct label (first-appearance order), each against the rest."""
    labels = list(labels)
    if len(labels) != len(gram):
        raise ValueError(f"{len(labels)} labels for a {len(gram)}x{len(gram)} Gram")
    classes: list[str] = []
    for lab in labels:
        if lab not in classes:
            classes.append(lab)
    if len(classes) < 2:
        raise ValueError("training data must contain at least two classes")
    lab_arr = np.asarray(labels)
    binaries = []
    for cls in classes:
        t = np.where(lab_arr == cls, 1.0, -1.0)
        binaries.append(train_binary(gram, t, C, positive_label=cls, tol=tol, max_passes=max_passes))
    return OvaModel(tuple(binaries), tuple(classes), gram.ids)


def decision_function(model: OvaModel, cross: CrossGram) -> np.ndarray:
    """Per-class decision values, shape (n_classes, n_test)."""
    if tuple(cross.row_ids) != model.train_ids:
        raise ValueError("cross-Gram rows are not aligned with the training ids")
    rows = [
        (b.alphas * b.targets) @ cross.values + b.bias
        for b in model.binaries
    ]
    return np.vstack(rows)


def predict(model: OvaModel, cross: CrossGram) -> tuple[str, ...]:
    """argmax of the per-class decision values; ties go to the earliest label."""
    scores = decision_function(model, cross)
    winners = np.argmax(scores, axis=0)
    return tuple(model.labels[k] for k in winners)


# ---------------------------------------------------------------------------
# Cross-validation and grid selection


@dataclass(frozen=True)
class CvConfig:
    sigma_grid: tuple[float, ...]
    c_grid: tuple[float, ...]
    folds: int = 4
    repeats: int = 4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sigma_grid", tuple(float(s) for s in self.sigma_grid))
        object.__setattr__(self, "c_grid", tuple(float(c) for c in self.c_grid))
        if not self.sigma_grid or not self.c_grid:
            raise ValueError("parameter grids must be non-empty")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


@dataclass(frozen=True)
class CvCell:
    sigma: float
    c: float
    mean_error: float
    std_error: float


@dataclass(frozen=True)
class FoldShift:
    sigma: float
    repeat: int
    fold: int
    lambda_min_before: float
    shift: float


@dataclass(frozen=True)
class CvReport:
    cells: tuple[CvCell, ...]
    fold_shifts: tuple[FoldShift, ...]
    folds: int
    repeats: int


def _fold_assignments(labels: np.ndarray, cfg: CvConfig) -> list[np.ndarray]:
    classes = []
    for lab in labels:
        if lab not in classes:
            classes.append(lab)
    for cls in classes:
        count = int(np.sum(labels == cls))
        if count < cfg.folds:
            raise DatasetError(
                f"label {cls!r} has {count} items; stratified {cfg.folds}-fold CV needs >= {cfg.folds}"
            )
    rng = np.random.default_rng(cfg.seed)
    out = []
    for _ in range(cfg.repeats):
        fold_of = np.empty(len(labels), dtype=int)
        for cls in classes:
            idx = np.flatnonzero(labels == cls)
            perm = rng.permutation(len(idx))
            for k, pos in enumerate(perm):
                fold_of[idx[pos]] = k % cfg.folds
        out.append(fold_of)
    return out


def cross_validate(
    ds: LabeledDataset,
    selector: KernelSelector,
    cfg: CvConfig,
    workers: int | None = None,
) -> CvReport:
    """Repeated stratified k-fold error for every (sigma, C) grid point.

    One full Gram per distinct kernel is built over the whole dataset and
    sub-indexed per fold. The training-fold block is shift-regularized before
    fitting; the train-vs-validation block is used exactly as computed.
    """
    labels = np.asarray([it.label for it in ds.items])
    assignments = _fold_assignments(labels, cfg)

    grams: dict[str, GramMatrix] = {}
    gram_for_sigma: dict[float, GramMatrix] = {}
    for s in cfg.sigma_grid:
        sel = with_sigma(selector, s)
        key = json.dumps(sel.desc(), sort_keys=True)
        if key not in grams:
            grams[key] = build_gram(ds, sel, workers=workers)
        gram_for_sigma[s] = grams[key]

    errors: dict[tuple[float, float], list[float]] = {
        (s, c): [] for s in cfg.sigma_grid for c in cfg.c_grid
    }
    fold_shifts = []
    for r, fold_of in enumerate(assignments):
        for f in range(cfg.folds):
            val_idx = np.flatnonzero(fold_of == f)
            train_idx = np.flatnonzero(fold_of != f)
            truth = labels[val_idx]
            train_labels = [labels[i] for i in train_idx]
            for s in cfg.sigma_grid:
                G = gram_for_sigma[s]
                reg = regularize(submatrix(G, train_idx))
                fold_shifts.append(
                    FoldShift(
                        s,
                        r,
                        f,
                        reg.regularization["lambda_min_before"],
                        reg.regularization["shift_applied"],
                    )
                )
                cross = cross_from_gram(G, train_idx, val_idx)
                for c in cfg.c_grid:
                    model = train_ova(reg, train_labels, c)
                    pred = np.asarray(predict(model, cross))
                    errors[(s, c)].append(float(np.mean(pred != truth)))

    cells = tuple(
        CvCell(s, c, float(np.mean(errs)), float(np.std(errs)))
        for (s, c), errs in errors.items()
    )
    return CvReport(cells, tuple(fold_shifts), cfg.folds, cfg.repeats)


def grid_select(report: CvReport) -> tuple[float, float]:
    """Smallest mean error; ties resolve to the smaller sigma, then smaller C."""
    best = min(report.cells, key=lambda cell: (cell.mean_error, cell.sigma, cell.c))
    return best.sigma, best.c


def default_sigma_grid(
    ds: LabeledDataset,
    factors: tuple[float, ...] = DEFAULT_SIGMA_FACTORS,
    max_points: int = 512,
) -> tuple[float, ...]:
    """Median pairwise point distance, scaled by a small factor ladder.

    Points are pooled across all series; beyond max_points an evenly strided
    deterministic subsample stands in for the pool.
    """
    pts = np.vstack([it.series.values for it in ds.items])
    if len(pts) > max_points:
        sel = np.linspace(0, len(pts) - 1, max_points).astype(int)
        pts = pts[sel]
    sq = sqdist_matrix(pts, pts)
    upper = sq[np.triu_indices(len(pts), k=1)]
    med = float(np.sqrt(np.median(upper))) if upper.size else 0.0
    if med <= 0.0:
        med = 1.0
    return tuple(med * f for f in factors)


@dataclass(frozen=True)
class ExperimentResult:
    test_error: float
    chosen_sigma: float
    chosen_c: float
    cv: CvReport
    predictions: tuple[str, ...]


def run_experiment(
    train_ds: LabeledDataset,
    test_ds: LabeledDataset,
    selector: KernelSelector,
    cfg: CvConfig,
    workers: int | None = None,
) -> ExperimentResult:
    """Grid-select (sigma, C) by CV on the training set, refit, score on the test set."""
    report = cross_validate(train_ds, selector, cfg, workers=workers)
    sigma, c = grid_select(report)
    sel = with_sigma(selector, sigma)
    gram = regularize(build_gram(train_ds, sel, workers=workers))
    model = train_ova(gram, [it.label for it in train_ds.items], c)
    cross = build_cross_gram(train_ds, test_ds, sel, workers=workers)
    pred = predict(model, cross)
    truth = [it.label for it in test_ds.items]
    err = float(np.mean([p != tr for p, tr in zip(pred, truth)]))
    return ExperimentResult(err, sigma, c, report, pred)
