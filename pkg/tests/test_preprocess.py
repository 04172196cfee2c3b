import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filterscope.preprocess import (
    MaxAbsFilterScaler,
    filter_scale,
    filter_scales,
    maxabs_scale,
    scale_weights,
)
from filterscope.records import FilterRecord, FilterSet

from util import random_filter_set

finite32 = st.floats(
    min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False, width=32
)
kernel = st.lists(finite32, min_size=9, max_size=9)


def make_set(rows):
    w = np.array(rows, dtype=np.float32).reshape(-1, 9)
    return FilterSet.single_model("m", w, np.zeros(len(w), dtype=int), np.arange(len(w)))


def test_simple_division():
    fs = make_set([[0.5, -2.0, 0, 0, 0, 0, 0, 0, 0]])
    out = maxabs_scale(fs)
    assert not out.degenerate_flags[0]
    np.testing.assert_array_equal(
        out.weights[0], np.array([0.25, -1.0, 0, 0, 0, 0, 0, 0, 0], dtype=np.float32)
    )


def test_all_zero_filter_flagged_not_divided():
    fs = make_set([[0.0] * 9])
    out = maxabs_scale(fs)
    assert out.degenerate_flags[0]
    np.testing.assert_array_equal(out.weights[0], np.zeros(9, dtype=np.float32))


def test_subthreshold_flagged_unchanged():
    tiny = [1e-15] * 9
    fs = make_set([tiny])
    out = maxabs_scale(fs)
    assert out.degenerate_flags[0]
    np.testing.assert_array_equal(out.weights[0], np.array(tiny, dtype=np.float32))


def test_idempotence_exact_on_random_filters():
    rng = np.random.default_rng(0)
    fs = random_filter_set(rng, 500)
    once = maxabs_scale(fs)
    twice = maxabs_scale(once.filters)
    assert once.weights.tobytes() == twice.weights.tobytes()
    np.testing.assert_array_equal(once.degenerate_flags, twice.degenerate_flags)


def test_scaled_weights_in_unit_interval_and_peak_is_one():
    rng = np.random.default_rng(1)
    fs = random_filter_set(rng, 1000)
    out = maxabs_scale(fs)
    assert np.abs(out.weights).max() <= 1.0
    peaks = np.abs(out.weights[~out.degenerate_flags]).max(axis=1)
    assert np.all(np.abs(peaks - 1.0) <= 1e-6)


def test_sign_pattern_and_zeros_preserved():
    rng = np.random.default_rng(2)
    w = rng.standard_normal((200, 9)).astype(np.float32)
    w[rng.random((200, 9)) < 0.3] = 0.0
    fs = make_set(w)
    out = maxabs_scale(fs)
    np.testing.assert_array_equal(np.sign(out.weights), np.sign(w))


def test_raw_mode_passthrough():
    rng = np.random.default_rng(3)
    fs = random_filter_set(rng, 50)
    out = maxabs_scale(fs, mode="raw")
    assert out.weights.tobytes() == fs.weights.tobytes()
    assert out.mode == "raw"
    assert not out.degenerate_flags.any()


@given(kernel)
def test_filter_scale_is_max_minus_min(ws):
    expected = max(np.float32(w) for w in ws) - min(np.float32(w) for w in ws)
    got = filter_scale(np.array(ws, dtype=np.float32))
    assert got == pytest.approx(float(expected), rel=1e-6, abs=1e-12)
    assert got >= 0


def test_filter_scale_cases():
    w = [-0.3, 0.5, 0, 0, 0, 0, 0, 0, 0]
    assert filter_scale(np.array(w, dtype=np.float32)) == pytest.approx(0.8, rel=1e-6)
    assert filter_scale(np.full(9, 0.7, dtype=np.float32)) == 0.0
    rec = FilterRecord(weights=tuple(w), model_id="m", layer_index=0, filter_ordinal=0)
    assert filter_scale(rec) == pytest.approx(0.8, rel=1e-6)


@given(kernel, st.permutations(list(range(9))))
@settings(max_examples=50)
def test_filter_scale_permutation_invariant(ws, perm):
    a = np.array(ws, dtype=np.float32)
    b = a[perm]
    assert filter_scale(a) == filter_scale(b)


def test_filter_scale_homogeneous_in_scalar():
    rng = np.random.default_rng(4)
    w = rng.standard_normal((100, 9)).astype(np.float32)
    base = filter_scales(make_set(w))
    for c in (2.5, -3.0):
        scaled = filter_scales(make_set((w.astype(np.float64) * c).astype(np.float32)))
        np.testing.assert_allclose(scaled, abs(c) * base, rtol=1e-6)


def test_estimator_api():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((100, 9)).astype(np.float32)
    X[0] = 0.0
    est = MaxAbsFilterScaler().fit(X)
    assert est.get_params()["degeneracy_threshold"] == 1e-12
    out = est.fit_transform(X)
    mask = est.degenerate_mask(X)
    assert mask[0] and not mask[1:].any()
    direct, mask2 = scale_weights(X)
    np.testing.assert_array_equal(out, direct)
    np.testing.assert_array_equal(mask, mask2)


def test_estimator_rejects_bad_params():
    with pytest.raises(ValueError):
        MaxAbsFilterScaler(mode="nope").fit(np.zeros((1, 9), dtype=np.float32))
    with pytest.raises(ValueError):
        MaxAbsFilterScaler(degeneracy_threshold=0.0).fit(np.zeros((1, 9), dtype=np.float32))
    with pytest.raises(ValueError):
        maxabs_scale(make_set([[0.0] * 9]), degeneracy_threshold=-1.0)
