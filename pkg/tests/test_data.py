import filecmp
import json
from dataclasses import replace

import numpy as np
import pytest

from taam.data import (ContinualDataset, DataError, SBMConfig, TaskData, TaskSplit,
                       generate_sbm_sequence, load_dataset, save_dataset, validate_dataset)
from taam.graph import build_graph


def same_dataset(a, b):
    assert a.feature_dim == b.feature_dim and a.n_tasks == b.n_tasks
    for ta, tb in zip(a.tasks, b.tasks):
        assert ta.task_id == tb.task_id and ta.class_set == tb.class_set
        for s in ("train", "val", "test"):
            sa, sb = ta.split(s), tb.split(s)
            assert sa.graph.n_nodes == sb.graph.n_nodes
            assert np.array_equal(sa.graph.row_offsets, sb.graph.row_offsets)
            assert np.array_equal(sa.graph.col_indices, sb.graph.col_indices)
            assert np.array_equal(sa.features, sb.features)
            assert np.array_equal(sa.labels, sb.labels)


def test_generator_structure():
    ds = generate_sbm_sequence(SBMConfig(n_tasks=3, classes_per_task=2, nodes_per_class=30,
                                         p_in=0.2, p_out=0.02, feature_dim=16), 7)
    assert ds.n_tasks == 3 and ds.n_classes == 6
    assert [t.class_set for t in ds.tasks] == [(0, 1), (2, 3), (4, 5)]
    graphs = {id(t.split(s).graph) for t in ds.tasks for s in ("train", "val", "test")}
    assert len(graphs) == 9
    for t in ds.tasks:
        for s in ("train", "val", "test"):
            sp = t.split(s)
            assert sp.features.shape == (60, 16)
            assert sorted(set(sp.labels.tolist())) == list(t.class_set)
    assert validate_dataset(ds).ok


def test_generator_edgeless(tmp_path):
    ds = generate_sbm_sequence(SBMConfig(n_tasks=2, p_in=0.0, p_out=0.0), 0)
    assert all(t.split(s).graph.n_edges == 0 for t in ds.tasks for s in ("train", "val", "test"))
    save_dataset(ds, tmp_path)
    same_dataset(load_dataset(tmp_path), ds)


def test_generator_deterministic_bytes(tmp_path):
    cfg = SBMConfig(n_tasks=2, nodes_per_class=10, feature_dim=4)
    save_dataset(generate_sbm_sequence(cfg, 5), tmp_path / "a")
    save_dataset(generate_sbm_sequence(cfg, 5), tmp_path / "b")
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
    for name in cmp.common_files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    other = generate_sbm_sequence(cfg, 6)
    assert not np.array_equal(other.tasks[0].train.features,
                              generate_sbm_sequence(cfg, 5).tasks[0].train.features)


def test_class_structure_visible_in_edges():
    ds = generate_sbm_sequence(SBMConfig(n_tasks=1, nodes_per_class=40, p_in=0.3, p_out=0.01), 2)
    sp = ds.tasks[0].train
    same = diff = 0
    for u, v in sp.graph.edge_list():
        if sp.labels[u] == sp.labels[v]:
            same += 1
        else:
            diff += 1
    assert same > 5 * diff


@pytest.mark.parametrize("kw", [dict(p_in=0.01, p_out=0.1), dict(p_in=1.5), dict(n_tasks=0),
                                dict(classes_per_task=1), dict(nodes_per_class=0)])
def test_generator_rejects(kw):
    with pytest.raises(DataError):
        generate_sbm_sequence(SBMConfig(**kw), 0)


def test_round_trip(tmp_path, small_ds):
    save_dataset(small_ds, tmp_path)
    back = load_dataset(tmp_path)
    same_dataset(back, small_ds)
    assert back.seed == 7 and back.name == small_ds.name
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["tasks"][1]["splits"]["test"]["n_nodes"] == small_ds.tasks[1].test.n_nodes
    edges = (tmp_path / manifest["tasks"][0]["splits"]["train"]["edges"]).read_text()
    assert all(len(line.split("\t")) == 2 for line in edges.splitlines())


def test_load_overlapping_class_sets(tmp_path, small_ds):
    save_dataset(small_ds, tmp_path)
    man = json.loads((tmp_path / "manifest.json").read_text())
    man["tasks"][1]["class_set"] = [1, 2]
    (tmp_path / "manifest.json").write_text(json.dumps(man))
    with pytest.raises(DataError, match="class sets not disjoint"):
        load_dataset(tmp_path)


def test_load_bad_feature_row(tmp_path, small_ds):
    save_dataset(small_ds, tmp_path)
    path = tmp_path / "task1_val.features.csv"
    lines = path.read_text().splitlines()
    lines[4] = ",".join(lines[4].split(",")[:-1])
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match=r"task1_val\.features\.csv: row 5"):
        load_dataset(tmp_path)


def test_load_missing_file(tmp_path, small_ds):
    save_dataset(small_ds, tmp_path)
    (tmp_path / "task2_test.labels.csv").unlink()
    with pytest.raises(DataError, match="missing file"):
        load_dataset(tmp_path)
    with pytest.raises(DataError, match="missing file"):
        load_dataset(tmp_path / "nowhere")


def test_load_label_outside_class_set(tmp_path, small_ds):
    save_dataset(small_ds, tmp_path)
    path = tmp_path / "task0_train.labels.csv"
    lines = path.read_text().splitlines()
    lines[0] = "5"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match="outside class set"):
        load_dataset(tmp_path)


def test_validate_foreign_label(small_ds):
    t1 = small_ds.tasks[1]
    labels = t1.val.labels.copy()
    labels[0] = 0  # belongs to task 0
    bad_task = replace(t1, val=TaskSplit(t1.val.graph, t1.val.features, labels))
    ds = replace(small_ds, tasks=(small_ds.tasks[0], bad_task, small_ds.tasks[2]))
    report = validate_dataset(ds)
    assert len(report.violations) == 1
    assert "outside class set" in report.violations[0]


def test_validate_single_task():
    ds = generate_sbm_sequence(SBMConfig(n_tasks=1, nodes_per_class=5), 0)
    report = validate_dataset(ds)
    assert report.ok
    assert report.tasks[0]["train"]["nodes"] == 10


def test_validate_shared_graph_and_dim():
    g = build_graph([(0, 1)], 2)
    sp = TaskSplit(g, np.zeros((2, 3)), np.array([0, 1]))
    ds = ContinualDataset((TaskData(0, (0, 1), sp, sp, sp),), feature_dim=4)
    v = validate_dataset(ds).violations
    assert any("share a graph" in x for x in v)
    assert any("feature dim" in x for x in v)
