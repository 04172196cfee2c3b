"""Edge paths that the main module tests do not reach."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from filterscope.catalog import FilterCatalog, Query
from filterscope.cli import main
from filterscope.errors import EmptyResult, InsufficientSamples
from filterscope.fpack import parse_fpack, serialize_fpack, write_fpack_file
from filterscope.records import FilterSet, LayerRecord, ModelMeta

from util import random_model


def test_unicode_model_id_round_trip(tmp_path):
    model_id = "modèle-число-模型"
    meta = ModelMeta(model_id=model_id, name=model_id, task="classification",
                     data_type="natural", conv_layer_count=1)
    layers = [LayerRecord(model_id=model_id, layer_index=0, filter_count=2)]
    fs = FilterSet.single_model(model_id, np.ones((2, 9), dtype=np.float32), [0, 0], [0, 1])
    data = serialize_fpack(meta, layers, fs)
    meta2, layers2, fs2 = parse_fpack(data)
    assert meta2.model_id == model_id
    assert serialize_fpack(meta2, layers2, fs2) == data

    catalog = FilterCatalog(tmp_path / "cat")
    catalog.register_model(meta, layers, fs)
    blob = list((tmp_path / "cat" / "blobs").iterdir())
    assert len(blob) == 1 and blob[0].suffix == ".fpack"
    assert catalog.query(Query(model_id=model_id)).same_filters(fs.sorted())


def test_combined_query_predicates(tmp_path):
    catalog = FilterCatalog(tmp_path / "cat")
    meta = ModelMeta(model_id="deep", name="deep", task="classification",
                     data_type="natural", conv_layer_count=20)
    layers = [LayerRecord(model_id="deep", layer_index=i, filter_count=1) for i in range(20)]
    w = np.arange(20 * 9, dtype=np.float32).reshape(20, 9)
    fs = FilterSet.single_model("deep", w, np.arange(20), np.zeros(20, dtype=int))
    catalog.register_model(meta, layers, fs)

    got = catalog.query(Query(task="classification", depth_decile=5))
    assert sorted(set(got.layer_indices.tolist())) == [10, 11]
    with pytest.raises(EmptyResult):
        catalog.query(Query(task="segmentation", depth_decile=5))
    got = catalog.query(Query(layer_index=7))
    assert got.layer_indices.tolist() == [7]


def test_query_on_empty_catalog(tmp_path):
    catalog = FilterCatalog(tmp_path / "cat")
    with pytest.raises(EmptyResult):
        catalog.query()
    assert catalog.stats("task") == []
    assert catalog.totals().filter_count == 0


def test_report_with_undersized_catalog_exits_4(tmp_path):
    runner = CliRunner()
    cat = str(tmp_path / "cat")
    meta = ModelMeta(model_id="tiny", name="tiny", task="classification",
                     data_type="natural", conv_layer_count=1)
    layers = [LayerRecord(model_id="tiny", layer_index=0, filter_count=5)]
    fs = FilterSet.single_model("tiny", np.random.default_rng(0).standard_normal((5, 9)).astype(np.float32),
                                [0] * 5, range(5))
    FilterCatalog(cat).register_model(meta, layers, fs)
    res = runner.invoke(main, ["--catalog", cat, "report", "--out-dir", str(tmp_path / "out")])
    assert res.exit_code == 4
    assert json.loads(res.stderr)["error"] == "InsufficientSamples"


def test_report_single_group_axis_skips_shift_but_completes(tmp_path):
    runner = CliRunner()
    rng = np.random.default_rng(1)
    cat = str(tmp_path / "cat")
    catalog = FilterCatalog(cat)
    for i in range(2):  # same task, same data_type -> 1 group on those axes
        meta, layers, fs = random_model(rng, model_id=f"m{i}", task="classification",
                                        data_type="natural", min_filters=120, max_channels=9)
        catalog.register_model(meta, layers, fs)
    res = runner.invoke(main, ["--catalog", cat, "report", "--out-dir", str(tmp_path / "out"),
                               "--min-group-size", "50"])
    assert res.exit_code == 0, res.output
    arts = json.loads(res.output)["artifacts"]
    assert "shift_task.csv" not in arts  # one group only, skipped
    assert "ridge_task.csv" in arts
    runlog = (tmp_path / "out" / "runlog.txt").read_text()
    assert "shift[task] skipped" in runlog


def test_cli_shift_pair_scope(tmp_path):
    runner = CliRunner()
    rng = np.random.default_rng(2)
    cat = str(tmp_path / "cat")
    catalog = FilterCatalog(cat)
    for i, dt in enumerate(["natural", "seismic"]):
        meta, layers, fs = random_model(rng, model_id=f"m{i}", data_type=dt,
                                        min_filters=130, max_channels=9)
        catalog.register_model(meta, layers, fs)
    res = runner.invoke(main, ["--catalog", cat, "shift", "--group-by", "data_type",
                               "--basis", "pair", "--min-group-size", "50"])
    assert res.exit_code == 0, res.output
    assert "basis=per-pair" in res.output.splitlines()[0]


def test_fit_on_empty_query_exits_4(tmp_path):
    runner = CliRunner()
    rng = np.random.default_rng(3)
    cat = str(tmp_path / "cat")
    catalog = FilterCatalog(cat)
    meta, layers, fs = random_model(rng, task="classification")
    catalog.register_model(meta, layers, fs)
    res = runner.invoke(main, ["--catalog", cat, "pca", "--task", "face-detection"])
    assert res.exit_code == 4
    assert json.loads(res.stderr)["error"] == "InsufficientSamples"


def test_ingest_wrong_format_flag_exits_3(tmp_path):
    runner = CliRunner()
    rng = np.random.default_rng(4)
    meta, layers, fs = random_model(rng)
    csv_path = tmp_path / "m.csv"
    from filterscope.fpack import serialize_csv

    csv_path.write_text(serialize_csv(meta, layers, fs))
    res = runner.invoke(main, ["--catalog", str(tmp_path / "c"), "ingest",
                               "--in", str(csv_path), "--format", "fpack"])
    assert res.exit_code == 3
    assert json.loads(res.stderr)["error"] == "BadMagic"


def test_insufficient_samples_message_zero_filters():
    from filterscope.pca import MomentAccumulator, fit_from_accumulator

    with pytest.raises(InsufficientSamples):
        fit_from_accumulator(MomentAccumulator())


def test_fpack_file_io_helpers(tmp_path):
    rng = np.random.default_rng(5)
    meta, layers, fs = random_model(rng)
    path = tmp_path / "m.fpack"
    write_fpack_file(path, meta, layers, fs)
    from filterscope.fpack import read_fpack_file

    meta2, layers2, fs2 = read_fpack_file(path)
    assert fs2.same_filters(fs.sorted())
