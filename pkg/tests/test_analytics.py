import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from filterscope.analytics import (
    depth_decile,
    distribution_from_matrix,
    fit_scaled_basis,
    group_filters,
    mean_scale_per_decile,
    pairwise_shift_distribution,
    shift_matrix,
    shift_matrix_from_groups,
)
from filterscope.catalog import FilterCatalog
from filterscope.divergence import DivergenceConfig
from filterscope.errors import IndexOutOfRange, TooFewGroups, UnknownModel
from filterscope.records import FilterSet, LayerRecord, ModelMeta

from util import oracle_project, oracle_shift, random_model


def test_depth_decile_formula_cases():
    assert depth_decile(0, 13) == 0
    assert depth_decile(12, 13) == 9
    assert depth_decile(5, 10) == 5


def test_depth_decile_out_of_range():
    with pytest.raises(IndexOutOfRange):
        depth_decile(13, 13)
    with pytest.raises(IndexOutOfRange):
        depth_decile(-1, 13)


@given(st.integers(min_value=1, max_value=500))
def test_depth_decile_monotone_and_bounded(L):
    values = [depth_decile(k, L) for k in range(L)]
    assert all(0 <= v <= 9 for v in values)
    assert values == sorted(values)
    if L >= 10:
        assert set(values) == set(range(10))


def gaussian_group_set(rng, n, mean=0.0, model_id="m"):
    w = (rng.standard_normal((n, 9)) + mean).astype(np.float32)
    return FilterSet.single_model(model_id, w, np.zeros(n, dtype=int), np.arange(n))


def flat_model(model_id, weights, n_layers, task="classification", data_type="natural"):
    """Distribute weights evenly over n_layers for catalog tests."""
    n = len(weights)
    per = n // n_layers
    layer_idx = np.repeat(np.arange(n_layers), per)
    ordinals = np.tile(np.arange(per), n_layers)
    layers = [
        LayerRecord(model_id=model_id, layer_index=i, filter_count=per)
        for i in range(n_layers)
    ]
    meta = ModelMeta(model_id=model_id, name=model_id, task=task, data_type=data_type,
                     conv_layer_count=n_layers)
    fs = FilterSet.single_model(model_id, weights[: per * n_layers], layer_idx, ordinals)
    return meta, layers, fs


def test_shift_matrix_identical_groups_zero_offdiagonal():
    rng = np.random.default_rng(0)
    base = gaussian_group_set(rng, 300)
    groups = {"a": base, "b": base}
    m = shift_matrix_from_groups(groups, config=DivergenceConfig(scaling_mode="raw"),
                                 min_group_size=10, axis="test")
    assert m.labels == ["a", "b"]
    np.testing.assert_array_equal(m.values, np.zeros((2, 2)))


def test_shift_matrix_three_groups_ordering_and_oracle():
    rng = np.random.default_rng(1)
    g1 = gaussian_group_set(rng, 800, mean=0.0)
    g2 = gaussian_group_set(rng, 800, mean=0.0)
    g3 = gaussian_group_set(rng, 800, mean=5.0)
    groups = {"g1": g1, "g2": g2, "g3": g3}
    cfg = DivergenceConfig(scaling_mode="raw")
    m = shift_matrix_from_groups(groups, config=cfg, min_group_size=10, axis="test")

    d12, d13, d23 = m.values[0, 1], m.values[0, 2], m.values[1, 2]
    assert d12 < 0.1 * min(d13, d23)
    assert d13 == pytest.approx(d23, rel=0.25)

    # independent per-pair recomputation
    union = FilterSet.concat([g1, g2, g3])
    basis = fit_scaled_basis(union, mode="raw")
    m2 = shift_matrix_from_groups(groups, basis=basis, config=cfg, min_group_size=10, axis="test")
    for (i, j), labels in [((0, 1), ("g1", "g2")), ((0, 2), ("g1", "g3")), ((1, 2), ("g2", "g3"))]:
        a, b = groups[labels[0]], groups[labels[1]]
        ca = oracle_project(a.weights, basis.mean, basis.components)
        cb = oracle_project(b.weights, basis.mean, basis.components)
        expected = oracle_shift(ca, cb, basis.explained_variance_ratios,
                                cfg.bin_count, cfg.epsilon)
        assert m2.values[i, j] == pytest.approx(expected, abs=1e-9)


def test_shift_matrix_properties_random_groups():
    rng = np.random.default_rng(2)
    groups = {f"g{i}": gaussian_group_set(rng, 150, mean=rng.normal()) for i in range(4)}
    m = shift_matrix_from_groups(groups, config=DivergenceConfig(), min_group_size=10, axis="x")
    assert np.array_equal(m.values, m.values.T)
    assert np.all(np.diag(m.values) == 0.0)
    assert np.all(m.values >= 0.0)
    assert np.all(np.isfinite(m.values))
    assert m.labels == sorted(m.labels)


def test_shift_matrix_pair_basis_scope():
    rng = np.random.default_rng(12)
    groups = {
        "a": gaussian_group_set(rng, 300, mean=0.0),
        "b": gaussian_group_set(rng, 300, mean=2.0),
        "c": gaussian_group_set(rng, 300, mean=4.0),
    }
    cfg = DivergenceConfig(scaling_mode="raw")
    m = shift_matrix_from_groups(groups, config=cfg, min_group_size=10,
                                 basis_scope="pair", axis="x")
    assert m.config["basis"] == "per-pair"
    assert np.array_equal(m.values, m.values.T)
    assert np.all(np.diag(m.values) == 0.0)
    assert np.all(m.values >= 0.0)
    # each cell equals a fresh per-pair computation
    from filterscope.divergence import shift as shift_op

    pair = FilterSet.concat([groups["a"], groups["c"]])
    pair_basis = fit_scaled_basis(pair, mode="raw")
    assert m.values[0, 2] == pytest.approx(
        shift_op(groups["a"], groups["c"], pair_basis, cfg), abs=1e-12
    )


def test_shift_matrix_min_size_omission_and_too_few():
    rng = np.random.default_rng(3)
    groups = {
        "big1": gaussian_group_set(rng, 200),
        "big2": gaussian_group_set(rng, 200),
        "tiny": gaussian_group_set(rng, 5),
    }
    m = shift_matrix_from_groups(groups, min_group_size=100, axis="x")
    assert m.labels == ["big1", "big2"]
    assert m.omitted == [("tiny", 5)]
    with pytest.raises(TooFewGroups):
        shift_matrix_from_groups({"a": gaussian_group_set(rng, 5),
                                  "b": gaussian_group_set(rng, 200)},
                                 min_group_size=100, axis="x")


def test_shift_matrix_from_catalog_by_data_type(tmp_path):
    rng = np.random.default_rng(4)
    catalog = FilterCatalog(tmp_path / "cat")
    for i, dt in enumerate(["natural", "natural", "seismic"]):
        meta, layers, fs = flat_model(f"m{i}", rng.standard_normal((120, 9)).astype(np.float32),
                                      n_layers=2, data_type=dt)
        catalog.register_model(meta, layers, fs)
    m = shift_matrix(catalog, "data_type", min_group_size=50)
    assert m.labels == ["natural", "seismic"]
    assert m.values[0, 1] > 0
    assert m.config["basis"] != "per-pair"
    assert m.config["bins"] == 70


def test_pairwise_distribution_two_groups():
    rng = np.random.default_rng(5)
    groups = {"a": gaussian_group_set(rng, 200), "b": gaussian_group_set(rng, 200, mean=1.0)}
    m = shift_matrix_from_groups(groups, min_group_size=10, axis="x")
    stats = distribution_from_matrix(m)
    assert stats.pair_count == 1
    assert stats.minimum == stats.median == stats.maximum == m.values[0, 1]
    assert stats.outliers == []


def test_pairwise_distribution_quantile_oracle():
    rng = np.random.default_rng(6)
    groups = {f"g{i}": gaussian_group_set(rng, 150, mean=rng.normal(0, 2)) for i in range(6)}
    m = shift_matrix_from_groups(groups, min_group_size=10, axis="x")
    stats = distribution_from_matrix(m)

    # independent quantile routine: sort + linear interpolation
    vals = sorted(m.values[i, j] for i in range(6) for j in range(i + 1, 6))
    def quant(p):
        pos = p * (len(vals) - 1)
        lo = int(np.floor(pos))
        hi = int(np.ceil(pos))
        frac = pos - lo
        return vals[lo] * (1 - frac) + vals[hi] * frac

    assert stats.minimum == vals[0]
    assert stats.maximum == vals[-1]
    assert stats.q1 == pytest.approx(quant(0.25), abs=0)
    assert stats.median == pytest.approx(quant(0.5), abs=0)
    assert stats.q3 == pytest.approx(quant(0.75), abs=0)

    iqr = stats.q3 - stats.q1
    expected_outliers = [v for v in vals if v < stats.q1 - 1.5 * iqr or v > stats.q3 + 1.5 * iqr]
    assert sorted(v for _, _, v in stats.outliers) == expected_outliers


def test_pairwise_distribution_identical_groups_all_zero():
    rng = np.random.default_rng(7)
    base = gaussian_group_set(rng, 200)
    groups = {"a": base, "b": base, "c": base}
    m = shift_matrix_from_groups(groups, min_group_size=10, axis="x")
    stats = distribution_from_matrix(m)
    assert stats.minimum == stats.q1 == stats.median == stats.q3 == stats.maximum == 0.0


def test_mean_scale_per_decile_constant_filters(tmp_path):
    catalog = FilterCatalog(tmp_path / "cat")
    w = np.full((10, 9), 0.5, dtype=np.float32)
    meta, layers, fs = flat_model("const", w, n_layers=1)
    catalog.register_model(meta, layers, fs)
    stats = mean_scale_per_decile("const", catalog)
    assert stats.means[0] == 0.0
    assert stats.means[1:] == [None] * 9


def test_mean_scale_per_decile_constructed_ranges(tmp_path):
    catalog = FilterCatalog(tmp_path / "cat")
    rows = []
    for k in range(10):
        w = np.zeros((3, 9), dtype=np.float32)
        w[:, 1] = k / 10.0  # range = k/10 (min 0, max k/10)
        rows.append(w)
    weights = np.concatenate(rows)
    meta, layers, fs = flat_model("mk", weights, n_layers=10)
    catalog.register_model(meta, layers, fs)
    stats = mean_scale_per_decile("mk", catalog)
    for k in range(10):
        assert stats.means[k] == pytest.approx(k / 10.0, rel=1e-6, abs=1e-12)


def test_mean_scale_matches_flat_list_oracle(tmp_path):
    rng = np.random.default_rng(8)
    catalog = FilterCatalog(tmp_path / "cat")
    meta, layers, fs = flat_model("m", rng.standard_normal((60, 9)).astype(np.float32), n_layers=6)
    catalog.register_model(meta, layers, fs)
    stats = mean_scale_per_decile("m", catalog)

    # brute force over the flat record list
    per_decile = {}
    for rec in fs.records():
        d = min(9, 10 * rec.layer_index // 6)
        rng_k = max(rec.weights) - min(rec.weights)
        per_decile.setdefault(d, []).append(rng_k)
    for d in range(10):
        if d in per_decile:
            assert stats.means[d] == pytest.approx(float(np.mean(per_decile[d])), rel=1e-12)
        else:
            assert stats.means[d] is None


def test_mean_scale_unknown_model(tmp_path):
    catalog = FilterCatalog(tmp_path / "cat")
    with pytest.raises(UnknownModel):
        mean_scale_per_decile("nope", catalog)


def test_mean_scale_invariant_to_filter_order(tmp_path):
    rng = np.random.default_rng(9)
    w = rng.standard_normal((40, 9)).astype(np.float32)
    catalog1 = FilterCatalog(tmp_path / "c1")
    meta, layers, fs = flat_model("m", w, n_layers=4)
    catalog1.register_model(meta, layers, fs)
    # same filters, registered from a scrambled record order
    perm = rng.permutation(40)
    catalog2 = FilterCatalog(tmp_path / "c2")
    catalog2.register_model(meta, layers, fs.take(perm))
    a = mean_scale_per_decile("m", catalog1)
    b = mean_scale_per_decile("m", catalog2)
    assert a.means == b.means


def test_group_filters_partition(tmp_path):
    rng = np.random.default_rng(10)
    catalog = FilterCatalog(tmp_path / "cat")
    total = 0
    for i in range(4):
        meta, layers, fs = random_model(rng, model_id=f"m{i}")
        catalog.register_model(meta, layers, fs)
        total += len(fs)
    for axis in ("task", "data_type", "model_id", "depth_decile", "layer_index",
                 "training_sets", "architecture_family"):
        groups = group_filters(catalog, axis)
        assert sum(len(g) for g in groups.values()) == total
        assert list(groups) == sorted(groups, key=lambda x: int(x) if x.lstrip("-").isdigit() else x) or list(groups) == sorted(groups)


def test_group_filters_decile_axis_matches_scalar_formula(tmp_path):
    rng = np.random.default_rng(13)
    catalog = FilterCatalog(tmp_path / "cat")
    for i, n_layers in enumerate([1, 7, 13, 25]):
        meta, layers, fs = flat_model(f"m{i}", rng.standard_normal((n_layers * 2, 9)).astype(np.float32),
                                      n_layers=n_layers)
        catalog.register_model(meta, layers, fs)
    groups = group_filters(catalog, "depth_decile")
    for label, fs in groups.items():
        for rec in fs.records():
            L = catalog.meta(rec.model_id).conv_layer_count
            assert depth_decile(rec.layer_index, L) == int(label)


def test_pairwise_shift_distribution_from_catalog(tmp_path):
    rng = np.random.default_rng(11)
    catalog = FilterCatalog(tmp_path / "cat")
    for i, task in enumerate(["classification", "segmentation", "gan-generator"]):
        meta, layers, fs = flat_model(f"m{i}", rng.standard_normal((150, 9)).astype(np.float32),
                                      n_layers=3, task=task)
        catalog.register_model(meta, layers, fs)
    stats = pairwise_shift_distribution(catalog, "task", min_group_size=50)
    assert stats.pair_count == 3
    assert stats.minimum >= 0
