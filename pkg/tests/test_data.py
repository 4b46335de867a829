import numpy as np
import pytest

from degnn import (
    DataError,
    Dataset,
    LabelVector,
    build_graph,
    dataset_report,
    homophily_ratio,
    load_dataset,
    load_geomgcn_format,
    load_split,
    make_split,
    save_split,
    write_geomgcn_format,
)
from degnn.data import convert_content_cites, convert_json_mirror

from conftest import random_dataset


def write_pair(tmp_path, edge_lines, node_lines):
    edge_path = tmp_path / "edges.tsv"
    node_path = tmp_path / "nodes.tsv"
    edge_path.write_text("\n".join(edge_lines) + "\n", encoding="utf-8")
    node_path.write_text("\n".join(node_lines) + "\n", encoding="utf-8")
    return edge_path, node_path


class TestLoader:
    def test_two_node_example(self, tmp_path):
        edge_path, node_path = write_pair(
            tmp_path,
            ["src\tdst", "0\t1"],
            ["node_id\tfeature\tlabel", "0\t1,0\t0", "1\t0,1\t1"],
        )
        ds = load_geomgcn_format(edge_path, node_path)
        assert ds.num_nodes == 2 and ds.num_features == 2
        assert homophily_ratio(ds.graph, ds.labels) == 0.0

    def test_duplicate_reversed_edges_collapse(self, tmp_path):
        edge_path, node_path = write_pair(
            tmp_path,
            ["src\tdst", "0\t1", "1\t0", "0\t1"],
            ["node_id\tfeature\tlabel", "0\t1\t0", "1\t1\t1"],
        )
        ds = load_geomgcn_format(edge_path, node_path)
        assert ds.graph.num_edges == 1

    def test_headerless_files_are_accepted(self, tmp_path):
        edge_path, node_path = write_pair(
            tmp_path,
            ["0\t1"],
            ["0\t1,0\t0", "1\t0,1\t1"],
        )
        ds = load_geomgcn_format(edge_path, node_path)
        assert ds.graph.num_edges == 1 and ds.num_nodes == 2

    def test_malformed_line_is_reported_with_number(self, tmp_path):
        edge_path, node_path = write_pair(
            tmp_path,
            ["src\tdst", "0\t1", "0\t1\t2"],
            ["node_id\tfeature\tlabel", "0\t1\t0", "1\t1\t1"],
        )
        with pytest.raises(DataError, match="line 3"):
            load_geomgcn_format(edge_path, node_path)

    def test_node_id_gap_is_an_error(self, tmp_path):
        edge_path, node_path = write_pair(
            tmp_path,
            ["src\tdst", "0\t1"],
            ["node_id\tfeature\tlabel", "0\t1\t0", "2\t1\t1"],
        )
        with pytest.raises(DataError, match="node ids"):
            load_geomgcn_format(edge_path, node_path)

    def test_edge_outside_nodes_is_an_error(self, tmp_path):
        edge_path, node_path = write_pair(
            tmp_path,
            ["src\tdst", "0\t7"],
            ["node_id\tfeature\tlabel", "0\t1\t0", "1\t1\t1"],
        )
        with pytest.raises(DataError, match="outside"):
            load_geomgcn_format(edge_path, node_path)

    def test_feature_index_lists_expand_to_multi_hot(self, tmp_path):
        edge_path, node_path = write_pair(
            tmp_path,
            ["src\tdst", "0\t1"],
            [
                "node_id\tfeature_ids\tlabel",
                "0\t0,3\t0",
                "1\t1\t1",
            ],
        )
        ds = load_geomgcn_format(edge_path, node_path)
        assert ds.num_features == 4
        assert ds.features.tolist() == [[1, 0, 0, 1], [0, 1, 0, 0]]

    def test_shuffled_lines_load_identically(self, tmp_path):
        ds = random_dataset(seed=5)
        a_dir = tmp_path / "a"
        b_dir = tmp_path / "b"
        for d in (a_dir, b_dir):
            d.mkdir()
        write_geomgcn_format(ds, a_dir / "edges.tsv", a_dir / "nodes.tsv")
        rng = np.random.default_rng(0)
        for name in ("edges.tsv", "nodes.tsv"):
            lines = (a_dir / name).read_text().strip().split("\n")
            header, rows = lines[0], lines[1:]
            rng.shuffle(rows)
            (b_dir / name).write_text("\n".join([header] + rows) + "\n")
        a = load_geomgcn_format(a_dir / "edges.tsv", a_dir / "nodes.tsv")
        b = load_geomgcn_format(b_dir / "edges.tsv", b_dir / "nodes.tsv")
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels.labels, b.labels.labels)
        assert np.array_equal(a.graph.col_indices, b.graph.col_indices)

    def test_round_trip_is_exact(self, tmp_path):
        ds = random_dataset(seed=8)
        write_geomgcn_format(ds, tmp_path / "edges.tsv", tmp_path / "nodes.tsv")
        back = load_geomgcn_format(tmp_path / "edges.tsv", tmp_path / "nodes.tsv", name=ds.name)
        assert np.array_equal(back.features, ds.features)
        assert np.array_equal(back.labels.labels, ds.labels.labels)
        assert np.array_equal(back.graph.row_offsets, ds.graph.row_offsets)
        assert np.array_equal(back.graph.col_indices, ds.graph.col_indices)

    def test_load_dataset_resolves_directory(self, tmp_path):
        ds = random_dataset(seed=2, name="toy")
        sub = tmp_path / "toy"
        sub.mkdir()
        write_geomgcn_format(ds, sub / "edges.tsv", sub / "nodes.tsv")
        back = load_dataset("toy", tmp_path)
        assert back.name == "toy" and back.num_nodes == ds.num_nodes
        with pytest.raises(DataError, match="no dataset files"):
            load_dataset("missing", tmp_path)


class TestDatasetValidation:
    def test_missing_class_rejected(self):
        g = build_graph([(0, 1)], 3)
        feats = np.ones((3, 2), dtype=np.float32)
        with pytest.raises(DataError, match=r"classes \[1\]"):
            Dataset(g, feats, LabelVector(np.array([0, 0, 2]), 3))

    def test_negative_features_rejected(self):
        g = build_graph([(0, 1)], 2)
        with pytest.raises(DataError, match="nonnegative"):
            Dataset(g, np.array([[-1.0], [0.0]], dtype=np.float32), LabelVector(np.array([0, 0]), 1))


class TestMakeSplit:
    def test_exact_fractions(self):
        ds = random_dataset(n=30, classes=3, seed=0)
        split = make_split(ds, seed=1)
        # each class has 10 nodes -> 6/2/2
        assert split.train.size == 18 and split.val.size == 6 and split.test.size == 6
        labels = ds.labels.labels
        for cls in range(3):
            assert np.count_nonzero(labels[split.train] == cls) == 6

    def test_deterministic_for_seed(self):
        ds = random_dataset(seed=0)
        a = make_split(ds, seed=7)
        b = make_split(ds, seed=7)
        assert np.array_equal(a.train, b.train)
        assert np.array_equal(a.val, b.val)
        assert np.array_equal(a.test, b.test)

    def test_partitions_all_nodes(self):
        ds = random_dataset(seed=3)
        split = make_split(ds, seed=0)
        union = np.concatenate([split.train, split.val, split.test])
        assert np.array_equal(np.sort(union), np.arange(ds.num_nodes))

    def test_train_proportions_within_one_node_per_class(self):
        ds = random_dataset(n=40, classes=4, seed=6)
        split = make_split(ds, seed=2)
        labels = ds.labels.labels
        for cls in range(4):
            total = np.count_nonzero(labels == cls)
            in_train = np.count_nonzero(labels[split.train] == cls)
            assert abs(in_train - 0.6 * total) <= 1.0

    def test_small_class_is_named_in_error(self):
        g = build_graph([(0, 1), (1, 2), (2, 3)], 4)
        feats = np.ones((4, 2), dtype=np.float32)
        ds = Dataset(g, feats, LabelVector(np.array([0, 0, 0, 1]), 2))
        with pytest.raises(DataError, match="class 1"):
            make_split(ds)

    def test_split_file_round_trip(self, tmp_path):
        ds = random_dataset(seed=4)
        split = make_split(ds, seed=5)
        path = tmp_path / "split.txt"
        save_split(split, path)
        back = load_split(path)
        assert back.seed == split.seed
        assert np.array_equal(back.train, split.train)
        assert np.array_equal(back.val, split.val)
        assert np.array_equal(back.test, split.test)


class TestDatasetReport:
    def test_uniform_triangle(self, triangle):
        ds = Dataset(
            triangle,
            np.ones((3, 1), dtype=np.float32),
            LabelVector(np.zeros(3, dtype=int), 1),
            "tri",
        )
        report = dataset_report(ds)
        assert report["homophily_ratio"] == 1.0
        assert report["num_edges"] == 3
        assert report["num_classes"] == 1


class TestConverters:
    def test_content_cites(self, tmp_path):
        content = tmp_path / "toy.content"
        cites = tmp_path / "toy.cites"
        content.write_text(
            "paperA 1 0 1 theory\n"
            "paperB 0 1 0 systems\n"
            "paperC 1 1 0 theory\n"
        )
        cites.write_text("paperA paperB\npaperC paperA\npaperX paperA\n")
        out = tmp_path / "converted"
        ds = convert_content_cites(content, cites, out, name="toy")
        assert ds.num_nodes == 3 and ds.num_features == 3
        assert ds.graph.num_edges == 2  # the dangling citation is dropped
        assert ds.labels.num_classes == 2
        back = load_geomgcn_format(out / "edges.tsv", out / "nodes.tsv")
        assert np.array_equal(back.features, ds.features)

    def test_json_mirror(self, tmp_path):
        payload = tmp_path / "toy.json"
        payload.write_text(
            '{"edges": [[0, 1], [1, 2]],'
            ' "features": [[1, 0], [0, 1], [1, 1]],'
            ' "labels": [0, 1, 0]}'
        )
        out = tmp_path / "converted"
        ds = convert_json_mirror(payload, out, name="toy")
        assert ds.num_nodes == 3 and ds.graph.num_edges == 2
        assert load_dataset("converted", tmp_path).num_features == 2
