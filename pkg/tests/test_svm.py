import numpy as np
import pytest

from tskern.gram import CrossGram, GramMatrix, KernelSelector, build_gram, regularize
from tskern.ground import GroundKernelSpec
from tskern.svm import (
    CvConfig,
    CvCell,
    CvReport,
    SmoConvergenceError,
    cross_validate,
    decision_function,
    default_sigma_grid,
    grid_select,
    kkt_residual,
    predict,
    run_experiment,
    train_binary,
    train_ova,
)
from tskern.timeseries import DatasetError, SynthSpec, generate_synthetic, split_train_test

DESC = {"family": "test"}


def _gram(values, n=None):
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    return GramMatrix(values, tuple(f"i{k}" for k in range(n)), DESC)


def _cross_like(gram):
    return CrossGram(gram.values, gram.ids, gram.ids, gram.kernel_desc)


# ---------------------------------------------------------------------------
# binary solver


def test_two_point_identity_problem_solved_exactly():
    model = train_binary(np.eye(2), [1.0, -1.0], C=10.0)
    assert np.allclose(model.alphas, [1.0, 1.0], atol=1e-12)
    assert model.bias == pytest.approx(0.0, abs=1e-12)
    assert model.objective == pytest.approx(1.0, abs=1e-12)
    f = (model.alphas * model.targets) @ np.eye(2) + model.bias
    assert f[0] == pytest.approx(1.0, abs=1e-12)
    assert f[1] == pytest.approx(-1.0, abs=1e-12)


def test_kkt_residual_small_after_convergence():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(size=(10, 3)) + 2.0, rng.normal(size=(10, 3)) - 2.0])
    K = X @ X.T
    t = np.array([1.0] * 10 + [-1.0] * 10)
    model = train_binary(K, t, C=1000.0, tol=1e-8)
    assert kkt_residual(model, K) <= 1e-6


def test_alpha_feasibility_on_random_problems():
    rng = np.random.default_rng(1)
    for trial in range(10):
        n = int(rng.integers(6, 25))
        A = rng.normal(size=(n, n))
        K = A @ A.T  # PSD by construction
        t = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        if np.all(t > 0) or np.all(t < 0):
            t[0] = -t[0]
        C = float(rng.choice([0.1, 1.0, 10.0]))
        model = train_binary(K, t, C=C)
        assert np.all(model.alphas >= 0.0) and np.all(model.alphas <= C)
        assert abs(float(model.alphas @ model.targets)) <= 1e-6
        assert model.iterations >= 1


def test_duplicating_the_dataset_keeps_the_decision_function():
    # identity-block Gram: duplicates share kernel rows; with alphas interior
    # the per-group coefficient mass is unchanged, so decisions match
    K2 = np.eye(2)
    base = train_binary(K2, [1.0, -1.0], C=10.0)
    K4 = np.kron(np.eye(2), np.ones((2, 2)))
    t4 = np.array([1.0, 1.0, -1.0, -1.0])
    dup = train_binary(K4, t4, C=10.0)
    # decision on the two original points = columns 0 and 2
    cross = K4[:, [0, 2]]
    f_dup = (dup.alphas * dup.targets) @ cross + dup.bias
    f_base = (base.alphas * base.targets) @ K2 + base.bias
    assert np.allclose(f_dup, f_base, atol=1e-6)


def test_duplication_invariance_on_separable_blobs():
    rng = np.random.default_rng(2)
    X = np.vstack([rng.normal(size=(8, 2)) + 3.0, rng.normal(size=(8, 2)) - 3.0])
    t = np.array([1.0] * 8 + [-1.0] * 8)
    K = X @ X.T
    base = train_binary(K, t, C=1e6, tol=1e-8)
    X2 = np.vstack([X, X])
    t2 = np.concatenate([t, t])
    K2 = X2 @ X2.T
    dup = train_binary(K2, t2, C=1e6, tol=1e-8)
    f_base = (base.alphas * base.targets) @ K + base.bias
    f_dup = (dup.alphas * dup.targets) @ K2[:, : len(t)] + dup.bias
    assert np.allclose(f_dup, f_base, atol=1e-6)


def test_separable_blocks_reach_zero_training_error():
    K = np.kron(np.eye(2), np.ones((3, 3)))
    g = _gram(K)
    labels = ["a", "a", "a", "b", "b", "b"]
    model = train_ova(g, labels, C=10.0)
    pred = predict(model, _cross_like(g))
    assert list(pred) == labels


def test_input_validation():
    with pytest.raises(ValueError, match="both classes"):
        train_binary(np.eye(3), [1.0, 1.0, 1.0], C=1.0)
    with pytest.raises(ValueError, match=r"\+1 or -1"):
        train_binary(np.eye(2), [1.0, 0.0], C=1.0)
    with pytest.raises(ValueError, match="C must"):
        train_binary(np.eye(2), [1.0, -1.0], C=0.0)
    with pytest.raises(ValueError, match="does not match"):
        train_binary(np.eye(3), [1.0, -1.0], C=1.0)


def test_non_convergence_is_reported():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(30, 30))
    K = A @ A.T
    t = np.where(rng.random(30) < 0.5, 1.0, -1.0)
    t[0], t[1] = 1.0, -1.0
    with pytest.raises(SmoConvergenceError, match="iterations"):
        train_binary(K, t, C=10.0, max_passes=1)


def test_solver_is_deterministic():
    rng = np.random.default_rng(4)
    A = rng.normal(size=(20, 20))
    K = A @ A.T
    t = np.where(rng.random(20) < 0.5, 1.0, -1.0)
    t[0], t[1] = 1.0, -1.0
    m1 = train_binary(K, t, C=5.0)
    m2 = train_binary(K, t, C=5.0)
    assert np.array_equal(m1.alphas, m2.alphas)
    assert m1.bias == m2.bias and m1.iterations == m2.iterations


# ---------------------------------------------------------------------------
# one-vs-all


def test_ova_argmax_and_tie_rule():
    g = _gram(np.eye(4))
    model = train_ova(g, ["a", "b", "a", "b"], C=10.0)
    assert model.labels == ("a", "b")
    # a column of exactly zero kernel values scores bias-only for every class;
    # equal biases mean a tie, resolved to the earliest label
    cross = CrossGram(np.zeros((4, 1)), g.ids, ("t0",), DESC)
    scores = decision_function(model, cross)
    assert scores[0, 0] == scores[1, 0]
    assert predict(model, cross) == ("a",)


def test_predict_checks_row_alignment():
    g = _gram(np.eye(4))
    model = train_ova(g, ["a", "b", "a", "b"], C=10.0)
    wrong = CrossGram(np.zeros((4, 1)), ("x0", "x1", "x2", "x3"), ("t0",), DESC)
    with pytest.raises(ValueError, match="aligned"):
        predict(model, wrong)


def test_ova_needs_two_classes():
    g = _gram(np.eye(3))
    with pytest.raises(ValueError, match="two classes"):
        train_ova(g, ["a", "a", "a"], C=1.0)


# ---------------------------------------------------------------------------
# cross-validation


def _cv_dataset(seed=0, per_class=8, noise=0.3):
    return generate_synthetic(
        SynthSpec(num_classes=2, per_class=per_class, dim=1, base_length=12,
                  length_jitter=0.2, noise_sigma=noise, warp_strength=0.2, seed=seed)
    )


GA_SEL = KernelSelector("ga_log", ground=GroundKernelSpec("gaussian", 1.0))


def test_cross_validate_shape_and_determinism():
    ds = _cv_dataset()
    cfg = CvConfig((0.5, 1.0), (1.0, 1000.0), folds=2, repeats=2, seed=3)
    r1 = cross_validate(ds, GA_SEL, cfg, workers=1)
    r2 = cross_validate(ds, GA_SEL, cfg, workers=2)
    assert r1 == r2  # worker count must not leak into results
    assert len(r1.cells) == 4
    assert len(r1.fold_shifts) == 2 * 2 * 2  # sigma x repeat x fold
    for cell in r1.cells:
        assert 0.0 <= cell.mean_error <= 1.0
        assert cell.std_error >= 0.0


def test_cross_validate_separable_data_reaches_zero():
    ds = _cv_dataset(seed=5, noise=0.05)
    cfg = CvConfig((1.0,), (1000.0,), folds=2, repeats=1, seed=0)
    report = cross_validate(ds, GA_SEL, cfg, workers=1)
    assert report.cells[0].mean_error == 0.0


def test_cross_validate_regularizes_each_training_fold():
    ds = _cv_dataset(seed=6)
    cfg = CvConfig((0.5,), (10.0,), folds=2, repeats=2, seed=1)
    report = cross_validate(ds, GA_SEL, cfg, workers=1)
    # log-domain Grams are strongly indefinite: every fold needs a real shift,
    # and different folds see different spectra
    shifts = [fs.shift for fs in report.fold_shifts]
    assert all(s > 0.0 for s in shifts)
    assert len(set(shifts)) > 1
    for fs in report.fold_shifts:
        assert fs.shift == pytest.approx(-fs.lambda_min_before, rel=1e-12)


def test_cross_validate_rejects_small_labels():
    ds = _cv_dataset(per_class=3)
    cfg = CvConfig((1.0,), (1.0,), folds=4, repeats=1, seed=0)
    with pytest.raises(DatasetError, match="needs >= 4"):
        cross_validate(ds, GA_SEL, cfg, workers=1)


def test_grid_select_prefers_small_sigma_then_small_c():
    cells = (
        CvCell(2.0, 10.0, 0.25, 0.0),
        CvCell(1.0, 10.0, 0.10, 0.0),
        CvCell(2.0, 1.0, 0.10, 0.0),
        CvCell(1.0, 1.0, 0.10, 0.0),
    )
    report = CvReport(cells, (), 4, 4)
    assert grid_select(report) == (1.0, 1.0)


def test_default_sigma_grid_scales_with_the_data():
    ds = _cv_dataset(seed=9)
    grid = default_sigma_grid(ds)
    assert len(grid) == 5
    assert all(s > 0 for s in grid)
    assert grid == tuple(sorted(grid))
    assert grid[2] / grid[0] == pytest.approx(4.0)


def test_run_experiment_end_to_end():
    ds = _cv_dataset(seed=10, per_class=10, noise=0.1)
    train, test = split_train_test(ds, 0.5, seed=1)
    cfg = CvConfig((0.5, 1.0), (1.0, 1000.0), folds=2, repeats=1, seed=2)
    res = run_experiment(train, test, GA_SEL, cfg, workers=1)
    assert 0.0 <= res.test_error <= 1.0
    assert res.chosen_sigma in cfg.sigma_grid
    assert res.chosen_c in cfg.c_grid
    assert len(res.predictions) == len(test)
    # separable setup: the selected grid point generalizes
    assert res.test_error <= 0.2


def test_cv_config_validation():
    with pytest.raises(ValueError):
        CvConfig((), (1.0,))
    with pytest.raises(ValueError):
        CvConfig((1.0,), (1.0,), folds=1)
    with pytest.raises(ValueError):
        CvConfig((1.0,), (1.0,), repeats=0)
