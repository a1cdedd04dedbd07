import math

import numpy as np
import pytest

from tskern.ga import ga_kernel
from tskern.gram import (
    EigConvergenceError,
    GramMatrix,
    KernelSelector,
    NonRepresentableError,
    build_cross_gram,
    build_gram,
    cross_from_gram,
    jacobi_eigenvalues,
    load_gram,
    min_eigenvalue,
    psd_check,
    regularize,
    save_gram,
    submatrix,
    with_sigma,
)
from tskern.ground import GroundKernelSpec
from tskern.timeseries import LabeledDataset, LabeledItem, SynthSpec, TimeSeries, generate_synthetic

GA_LOG = KernelSelector("ga_log", ground=GroundKernelSpec("gaussian", 1.0))
GA_LIN = KernelSelector("ga_linear", ground=GroundKernelSpec("gaussian", 1.0))
DESC = {"family": "test"}


def _dataset(seed, count=6, base=5):
    return generate_synthetic(
        SynthSpec(num_classes=2, per_class=count // 2, dim=2, base_length=base,
                  length_jitter=0.4, noise_sigma=0.4, warp_strength=0.2, seed=seed)
    )


def test_selector_validation():
    with pytest.raises(ValueError):
        KernelSelector("ga_log")
    with pytest.raises(ValueError):
        KernelSelector("dtw2")
    with pytest.raises(ValueError):
        KernelSelector("spectral")
    KernelSelector("dtw1")
    assert KernelSelector("dtw2", sigma=2.0).desc()["sigma"] == 2.0
    assert GA_LOG.desc()["log_domain"] is True
    assert GA_LIN.desc()["log_domain"] is False


def test_with_sigma():
    assert with_sigma(GA_LOG, 3.0).ground.sigma == 3.0
    assert with_sigma(KernelSelector("dtw2", sigma=1.0), 3.0).sigma == 3.0
    d1 = KernelSelector("dtw1")
    assert with_sigma(d1, 3.0) is d1
    unit = KernelSelector("ga_log", ground=GroundKernelSpec("unit"))
    assert with_sigma(unit, 3.0) is unit


def test_single_item_gram():
    ds = LabeledDataset((LabeledItem("only", "a", TimeSeries([[0.0], [1.0]])),))
    g = build_gram(ds, GA_LIN, workers=1)
    expected = ga_kernel(ds.items[0].series, ds.items[0].series, GA_LIN.ground).value_linear
    assert g.values.shape == (1, 1)
    assert g.values[0, 0] == expected


def test_gram_entries_match_pairwise_kernel():
    ds = _dataset(0)
    g = build_gram(ds, GA_LOG, workers=1)
    for i, it_i in enumerate(ds.items):
        for j, it_j in enumerate(ds.items):
            assert g.values[i, j] == pytest.approx(
                ga_kernel(it_i.series, it_j.series, GA_LOG.ground).value_log, abs=1e-12
            )
    assert np.array_equal(g.values, g.values.T)


def test_gram_worker_count_does_not_change_bytes():
    ds = _dataset(1, count=10)
    g1 = build_gram(ds, GA_LOG, workers=1)
    g4 = build_gram(ds, GA_LOG, workers=4)
    assert np.array_equal(g1.values, g4.values)
    assert g1.ids == g4.ids


def test_gram_permutation_conjugation():
    ds = _dataset(2, count=6)
    perm = [3, 0, 5, 1, 4, 2]
    shuffled = LabeledDataset(tuple(ds.items[i] for i in perm))
    g = build_gram(ds, GA_LOG, workers=1)
    gp = build_gram(shuffled, GA_LOG, workers=1)
    assert gp.ids == tuple(g.ids[i] for i in perm)
    # pairs swap argument order under the permutation, which reorders the
    # floating-point accumulation; agreement is to roundoff, not bitwise
    assert np.allclose(gp.values, g.values[np.ix_(perm, perm)], rtol=1e-12, atol=1e-12)


def test_unit_ground_gives_log_counts():
    ds = LabeledDataset((
        LabeledItem("u", "a", TimeSeries(np.zeros((3, 1)))),
        LabeledItem("v", "a", TimeSeries(np.ones((3, 1)))),
    ))
    sel = KernelSelector("ga_log", ground=GroundKernelSpec("unit"))
    g = build_gram(ds, sel, workers=1)
    assert g.values[0, 1] == pytest.approx(math.log(13.0), rel=1e-12)


def test_gram_matrix_validation():
    with pytest.raises(ValueError, match="symmetric"):
        GramMatrix(np.array([[0.0, 1.0], [0.5, 0.0]]), ("a", "b"), DESC)
    with pytest.raises(ValueError, match="unique"):
        GramMatrix(np.eye(2), ("a", "a"), DESC)
    with pytest.raises(ValueError, match="non-finite"):
        GramMatrix(np.array([[np.inf]]), ("a",), DESC)
    with pytest.raises(ValueError, match="regularization"):
        GramMatrix(np.eye(2), ("a", "b"), DESC,
                   {"lambda_min_before": -2.0, "shift_applied": 1.0})


def test_ga_linear_overflow_names_the_pair():
    rng = np.random.default_rng(3)
    ds = LabeledDataset((
        LabeledItem("long_a", "a", TimeSeries(rng.normal(size=(450, 13)))),
        LabeledItem("long_b", "a", TimeSeries(rng.normal(size=(450, 13)))),
    ))
    sel = KernelSelector("ga_linear", ground=GroundKernelSpec("gaussian", 1e6))
    with pytest.raises(NonRepresentableError, match="long_"):
        build_gram(ds, sel, workers=1)


# ---------------------------------------------------------------------------
# spectra


def test_jacobi_small_cases():
    assert np.allclose(jacobi_eigenvalues(np.eye(3)), [1.0, 1.0, 1.0])
    assert np.allclose(jacobi_eigenvalues([[1.0, 2.0], [2.0, 1.0]]), [-1.0, 3.0], atol=1e-12)
    assert np.allclose(jacobi_eigenvalues(np.diag([5.0, -3.0, 0.0])), [-3.0, 0.0, 5.0])
    assert jacobi_eigenvalues([[4.0]]) == [4.0]
    assert np.all(jacobi_eigenvalues(np.zeros((3, 3))) == 0.0)


def test_jacobi_matches_numpy_oracle():
    rng = np.random.default_rng(4)
    for n in (2, 5, 12, 30):
        a = rng.normal(size=(n, n))
        a = a + a.T
        got = jacobi_eigenvalues(a)
        want = np.linalg.eigvalsh(a)
        assert np.allclose(got, want, atol=1e-9 * max(1.0, np.abs(want).max()))


def test_jacobi_input_validation():
    with pytest.raises(ValueError, match="symmetric"):
        jacobi_eigenvalues([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ValueError, match="square"):
        jacobi_eigenvalues(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="non-finite"):
        jacobi_eigenvalues([[np.nan]])


def test_min_eigenvalue():
    assert min_eigenvalue(np.eye(3)) == pytest.approx(1.0, abs=1e-12)
    assert min_eigenvalue([[1.0, 2.0], [2.0, 1.0]]) == pytest.approx(-1.0, abs=1e-9)


def test_psd_check():
    assert psd_check(np.eye(2)).is_psd
    rep = psd_check([[1.0, 2.0], [2.0, 1.0]])
    assert not rep.is_psd
    assert rep.lambda_min == pytest.approx(-1.0, abs=1e-9)


def test_regularize_textbook_case():
    g = GramMatrix([[1.0, 2.0], [2.0, 1.0]], ("a", "b"), DESC)
    reg = regularize(g)
    assert reg.regularization["shift_applied"] == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(reg.values, [[2.0, 2.0], [2.0, 2.0]], atol=1e-9)
    assert np.allclose(jacobi_eigenvalues(reg.values), [0.0, 4.0], atol=1e-9)


def test_regularize_leaves_psd_untouched():
    g = GramMatrix(np.eye(3), ("a", "b", "c"), DESC)
    reg = regularize(g)
    assert reg.regularization["shift_applied"] == 0.0
    assert np.array_equal(reg.values, g.values)


def test_regularize_idempotent():
    rng = np.random.default_rng(5)
    for n in (2, 6, 15):
        a = rng.normal(size=(n, n))
        g = GramMatrix(a + a.T, tuple(f"i{k}" for k in range(n)), DESC)
        once = regularize(g)
        twice = regularize(once)
        assert np.array_equal(once.values, twice.values)
        assert twice.regularization["shift_applied"] == 0.0
        lam = jacobi_eigenvalues(once.values)
        assert lam[0] >= -1e-9 * max(1.0, np.abs(lam).max())


# ---------------------------------------------------------------------------
# cross and sub matrices


def test_cross_gram_against_full_gram():
    ds = _dataset(6, count=8)
    g = build_gram(ds, GA_LOG, workers=1)
    left = LabeledDataset(ds.items[:5])
    right = LabeledDataset(ds.items[5:])
    cross = build_cross_gram(left, right, GA_LOG, workers=1)
    assert np.array_equal(cross.values, g.values[np.ix_(range(5), range(5, 8))])
    assert cross.row_ids == left.ids() and cross.col_ids == right.ids()


def test_submatrix_and_cross_from_gram():
    ds = _dataset(7, count=6)
    g = build_gram(ds, GA_LOG, workers=1)
    idx = [4, 1, 3]
    sub = submatrix(g, idx)
    assert sub.ids == tuple(g.ids[i] for i in idx)
    assert np.array_equal(sub.values, g.values[np.ix_(idx, idx)])
    assert sub.regularization is None

    cross = cross_from_gram(g, [0, 2], [5, 1])
    assert np.array_equal(cross.values, g.values[np.ix_([0, 2], [5, 1])])
    assert cross.row_ids == (g.ids[0], g.ids[2])


def test_cross_gram_dim_mismatch():
    a = LabeledDataset((LabeledItem("a", "x", TimeSeries([[0.0]])),))
    b = LabeledDataset((LabeledItem("b", "x", TimeSeries([[0.0, 1.0]])),))
    with pytest.raises(ValueError, match="dimension"):
        build_cross_gram(a, b, GA_LOG)


# ---------------------------------------------------------------------------
# persistence


def test_save_load_round_trip(tmp_path):
    ds = _dataset(8, count=5)
    g = regularize(build_gram(ds, GA_LOG, workers=1))
    base = tmp_path / "toy"
    csv_path, json_path = save_gram(g, base)
    assert csv_path.name == "toy.gram.csv" and json_path.name == "toy.gram.json"
    back = load_gram(base)
    assert np.array_equal(back.values, g.values)  # %.17g round-trips doubles
    assert back.ids == g.ids
    assert back.kernel_desc == g.kernel_desc
    assert back.regularization == g.regularization
    # loading via either artifact path works too
    assert np.array_equal(load_gram(csv_path).values, g.values)


def test_save_load_single_item(tmp_path):
    ds = LabeledDataset((LabeledItem("one", "a", TimeSeries([[0.5]])),))
    g = build_gram(ds, GA_LIN, workers=1)
    save_gram(g, tmp_path / "single")
    back = load_gram(tmp_path / "single")
    assert back.values.shape == (1, 1)
    assert np.array_equal(back.values, g.values)


# ---------------------------------------------------------------------------
# structural evidence on ga_log Grams


def test_diagonal_dominance_gap_grows_with_length():
    # log K(x,x) ~ alignment count grows with length, so the margin between
    # the diagonal and its row should widen with the series length
    gaps = []
    for base in (5, 10, 20):
        ds = generate_synthetic(
            SynthSpec(num_classes=2, per_class=3, dim=2, base_length=base,
                      noise_sigma=0.5, seed=base)
        )
        g = build_gram(ds, GA_LOG, workers=1)
        off = g.values - np.diag(np.full(len(g), np.inf))  # diagonal pushed to -inf
        margins = np.diag(g.values) - off.max(axis=1)
        gaps.append(float(np.median(margins)))
    assert gaps[0] < gaps[1] < gaps[2]
