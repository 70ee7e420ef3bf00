import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cs_emg.features import DEPTHS, N_FEATURES, FeatureSample
from cs_emg.spatial import (
    INVERSE_ROW_ORDER,
    ROW_ORDER,
    ScalerStats,
    apply_scaler,
    build_grids,
    fit_scaler,
    one_hot,
    permute_rows,
    scale_flat,
    transform_batch,
    unpermute_rows,
)


def random_samples(n, seed=0, mask_prob=0.0):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        values = rng.normal(3.0, 2.0, N_FEATURES)
        mask = rng.random((6, 6, 7)) < mask_prob
        fs = FeatureSample.from_flat(values, mask, k % 2, f"s{k}")
        for f, d in enumerate(DEPTHS):
            fs.families[f][mask[f]] = np.nan
        out.append(fs)
    return out


def tagged_sample():
    """Each cell holds a unique tag: 10000*family + 1000*muscle + 100*movement + feature."""
    families = []
    for f, d in enumerate(DEPTHS):
        i, j, q = np.meshgrid(np.arange(6), np.arange(7), np.arange(d), indexing="ij")
        families.append((10000 * f + 1000 * i + 100 * j + q).astype(float))
    return FeatureSample(families, np.zeros((6, 6, 7), bool), 0)


def test_row_order():
    assert ROW_ORDER == (0, 5, 2, 3, 1, 4)
    grids = build_grids(tagged_sample())
    # source muscle 5 lands in output row 1
    assert np.all(grids[0].values[1] // 1000 % 10 == 5)
    for r, src in enumerate(ROW_ORDER):
        assert np.all(grids[2].values[r] // 1000 % 10 == src)
    # columns keep movement order
    assert np.all(grids[1].values[:, 3] // 100 % 10 == 3)


def test_grids_are_bijection_and_invertible():
    fs = tagged_sample()
    for g, src in zip(build_grids(fs), fs.families):
        assert sorted(g.values.ravel()) == sorted(src.ravel())
        assert np.array_equal(unpermute_rows(g.values), src)
    assert tuple(np.array(ROW_ORDER)[list(INVERSE_ROW_ORDER)]) == tuple(range(6))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 5))
def test_permutation_preserves_multiset(seed, d):
    x = np.random.default_rng(seed).standard_normal((3, 6, 7, d))
    y = permute_rows(x)
    assert np.array_equal(np.sort(x.ravel()), np.sort(y.ravel()))
    assert np.array_equal(unpermute_rows(y), x)


def _stats_from_column(col, mask=None):
    n = len(col)
    samples = []
    for k in range(n):
        v = np.zeros(N_FEATURES)
        v[0] = col[k]
        m = np.zeros((6, 6, 7), bool)
        if mask is not None and mask[k]:
            m[0, 0, 0] = True
            v[0] = np.nan
        samples.append(FeatureSample.from_flat(v, m, 0))
    return fit_scaler(samples)


def test_fit_scaler_two_point():
    s = _stats_from_column([1.0, 3.0])
    assert s.mean[0] == 2 and s.std[0] == 1 and s.impute[0] == 2


def test_fit_scaler_constant_column_passthrough():
    s = _stats_from_column([4.0, 4.0, 4.0])
    assert s.std[0] == 0 and s.passthrough[0]
    assert s.passthrough[5]  # untouched all-zero column


def test_fit_scaler_ignores_masked():
    s = _stats_from_column([1.0, 99.0, 3.0], mask=[False, True, False])
    assert s.mean[0] == 2


def test_fit_scaler_all_missing_column():
    s = _stats_from_column([1.0, 2.0], mask=[True, True])
    assert s.all_missing[0] and s.impute[0] == 0 and s.passthrough[0]


def test_fit_scaler_needs_two():
    with pytest.raises(ValueError):
        fit_scaler(random_samples(1))


def test_standardized_training_data():
    samples = random_samples(40, mask_prob=0.05)
    stats = fit_scaler(samples)
    X = np.stack([np.concatenate([g.values.ravel() for g in apply_scaler(fs, stats)]) for fs in samples])
    assert np.all(np.isfinite(X))
    # compare on unmasked entries of each column, in flat (source-order) layout
    Z = np.stack([scale_flat(fs.flat(), fs.flat_mask(), stats) for fs in samples])
    M = np.stack([fs.flat_mask() for fs in samples])
    for c in range(0, N_FEATURES, 97):
        vals = Z[~M[:, c], c]
        assert abs(vals.mean()) < 1e-6
        assert abs(vals.std() - 1) < 1e-6


def test_fully_masked_sample_is_zero():
    stats = fit_scaler(random_samples(10))
    fs = FeatureSample.from_flat(np.full(N_FEATURES, np.nan), np.ones((6, 6, 7), bool), 1)
    assert all(np.all(g.values == 0) for g in apply_scaler(fs, stats))


def test_masked_cell_is_local():
    train = random_samples(10, seed=1)
    stats = fit_scaler(train)
    fs = random_samples(1, seed=2)[0]
    ref = apply_scaler(fs, stats)
    fs.mask[3, 4, 5] = True
    fs.families[3][4, 5] = np.nan
    out = apply_scaler(fs, stats)
    r = ROW_ORDER.index(4)
    assert np.all(out[3].values[r, 5] == 0)
    changed = [(k, np.argwhere(a.values != b.values)) for k, (a, b) in enumerate(zip(out, ref))]
    assert all(len(idx) == 0 for k, idx in changed if k != 3)
    assert {(int(i), int(j)) for i, j, _ in changed[3][1]} == {(r, 5)}


def test_transform_batch_matches_apply():
    samples = random_samples(6, mask_prob=0.1)
    stats = fit_scaler(samples)
    batch = transform_batch(samples, stats)
    for n, fs in enumerate(samples):
        for k, g in enumerate(apply_scaler(fs, stats)):
            assert np.array_equal(batch[k][n], g.values)
    assert [b.shape for b in batch] == [(6, 6, 7, d) for d in DEPTHS]


def test_scaler_json_roundtrip(tmp_path):
    stats = fit_scaler(random_samples(5, mask_prob=0.2))
    stats.save(tmp_path / "s.json")
    back = ScalerStats.load(tmp_path / "s.json")
    for name in ("mean", "std", "impute", "passthrough", "all_missing"):
        assert np.array_equal(getattr(back, name), getattr(stats, name))


def test_one_hot():
    assert one_hot([0, 1, 1]).tolist() == [[1, 0], [0, 1], [0, 1]]
    with pytest.raises(ValueError):
        one_hot([2])
