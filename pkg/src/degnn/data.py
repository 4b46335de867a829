"""Dataset loading, canonical text format, splits and statistics.

The canonical on-disk layout is two tab-separated UTF-8 text files with a
header line each:

* edge file —  ``src<TAB>dst``, one edge per line (direction ignored);
* node file —  ``id<TAB>f1,f2,...<TAB>label``. The middle column is either
  a dense comma-separated feature vector, or a comma-separated list of the
  indices of nonzero (multi-hot) features when the header names the column
  ``feature_ids`` or row lengths vary.

This matches the layout the public WebKB / Wikipedia / Actor node
classification benchmarks are distributed in; a converter for the classic
``.content`` / ``.cites`` citation-network files is also provided.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import Graph, GraphError, LabelVector, build_graph, homophily_ratio
from .validation import check_seed

__all__ = [
    "DataError",
    "Dataset",
    "SplitSpec",
    "load_geomgcn_format",
    "write_geomgcn_format",
    "load_dataset",
    "make_split",
    "save_split",
    "load_split",
    "dataset_report",
    "convert_content_cites",
    "convert_json_mirror",
]

EDGE_FILENAMES = ("out1_graph_edges.txt", "edges.tsv")
NODE_FILENAMES = ("out1_node_feature_label.txt", "nodes.tsv")


class DataError(ValueError):
    """Raised for malformed dataset files or invalid split requests."""


@dataclass
class Dataset:
    """A graph with dense raw node features and labels.

    Features are stored single precision (they can be wide); compute
    paths widen to float64 via :attr:`features64`.
    """

    graph: Graph
    features: np.ndarray
    labels: LabelVector
    name: str = "dataset"
    _features64: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        n = self.graph.num_nodes
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise DataError(
                f"feature matrix shape {self.features.shape} does not match "
                f"{n} nodes"
            )
        if self.features.shape[1] < 1:
            raise DataError("feature matrix must have at least one column")
        if self.labels.labels.size != n:
            raise DataError(
                f"{self.labels.labels.size} labels for {n} nodes"
            )
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain non-finite values")
        if self.features.min() < 0:
            raise DataError("features must be nonnegative")
        present = np.unique(self.labels.labels)
        if present.size != self.labels.num_classes:
            missing = sorted(set(range(self.labels.num_classes)) - set(present.tolist()))
            raise DataError(f"classes {missing} have no nodes")

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return self.labels.num_classes

    @property
    def features64(self) -> np.ndarray:
        if self._features64 is None:
            self._features64 = self.features.astype(np.float64)
        return self._features64


def _read_lines(path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    return [line for line in text.split("\n") if line.strip()]


def _is_header(line: str) -> bool:
    head = line.split("\t")[0].strip()
    try:
        int(head)
        return False
    except ValueError:
        return True


def _parse_edges(path) -> list[tuple[int, int]]:
    lines = _read_lines(path)
    if not lines:
        return []
    start = 1 if _is_header(lines[0]) else 0
    edges = []
    for lineno, line in enumerate(lines[start:], start=start + 1):
        parts = line.split("\t")
        if len(parts) == 1:
            parts = line.split()
        if len(parts) != 2:
            raise DataError(f"{path}: line {lineno}: expected 'src<TAB>dst', got {line!r}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise DataError(f"{path}: line {lineno}: non-integer endpoint in {line!r}") from None
    return edges


def load_geomgcn_format(edge_path, node_path, name: str = "dataset") -> Dataset:
    """Load a dataset from the canonical edge/node text files."""
    lines = _read_lines(node_path)
    if not lines:
        raise DataError(f"{node_path}: empty node file")
    header = None
    start = 0
    if _is_header(lines[0]):
        header = lines[0]
        start = 1
    rows: dict[int, tuple[str, int]] = {}
    for lineno, line in enumerate(lines[start:], start=start + 1):
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataError(
                f"{node_path}: line {lineno}: expected 'id<TAB>features<TAB>label', got {line!r}"
            )
        try:
            node_id = int(parts[0])
            label = int(parts[2])
        except ValueError:
            raise DataError(f"{node_path}: line {lineno}: non-integer id or label") from None
        if node_id in rows:
            raise DataError(f"{node_path}: line {lineno}: duplicate node id {node_id}")
        rows[node_id] = (parts[1], label)
    n = len(rows)
    if sorted(rows) != list(range(n)):
        raise DataError(
            f"{node_path}: node ids must be exactly 0..{n - 1} (got {n} rows, "
            f"min {min(rows)}, max {max(rows)})"
        )
    payloads = [rows[i][0] for i in range(n)]
    labels = np.array([rows[i][1] for i in range(n)], dtype=np.int64)
    lengths = {payload.count(",") for payload in payloads}
    index_lists = (header is not None and "feature_ids" in header) or len(lengths) > 1
    if index_lists:
        ids = [np.fromstring(p, dtype=np.int64, sep=",") for p in payloads]
        d = int(max(arr.max() for arr in ids if arr.size) + 1)
        features = np.zeros((n, d), dtype=np.float32)
        for i, arr in enumerate(ids):
            features[i, arr] = 1.0
    else:
        features = np.array(
            [np.fromstring(p, dtype=np.float64, sep=",") for p in payloads],
            dtype=np.float32,
        )
    if labels.min() < 0:
        raise DataError(f"{node_path}: negative label")
    num_classes = int(labels.max()) + 1
    edges = _parse_edges(edge_path)
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise DataError(
                f"{edge_path}: edge ({u}, {v}) references a node outside 0..{n - 1}"
            )
    graph = build_graph(edges, n)
    return Dataset(graph, features, LabelVector(labels, num_classes), name)


def _format_value(x: np.floating) -> str:
    f = float(x)
    return str(int(f)) if f.is_integer() else repr(f)


def write_geomgcn_format(dataset: Dataset, edge_path, node_path) -> None:
    """Write the canonical text files; inverse of :func:`load_geomgcn_format`."""
    g = dataset.graph
    with open(edge_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("src\tdst\n")
        row = np.repeat(np.arange(g.num_nodes), g.degrees)
        for u, v in zip(row, g.col_indices):
            if u < v:
                fh.write(f"{u}\t{v}\n")
    with open(node_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("node_id\tfeature\tlabel\n")
        for i in range(dataset.num_nodes):
            payload = ",".join(_format_value(x) for x in dataset.features[i])
            fh.write(f"{i}\t{payload}\t{dataset.labels.labels[i]}\n")


def load_dataset(name: str, data_dir) -> Dataset:
    """Load ``<data_dir>/<name>/`` using either canonical filename pair."""
    base = Path(data_dir) / name
    for edge_name, node_name in zip(EDGE_FILENAMES, NODE_FILENAMES):
        edge_path, node_path = base / edge_name, base / node_name
        if edge_path.exists() and node_path.exists():
            return load_geomgcn_format(edge_path, node_path, name=name)
    raise DataError(
        f"no dataset files for {name!r} under {base} (expected one of "
        f"{EDGE_FILENAMES} with matching {NODE_FILENAMES})"
    )


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint train/val/test node-id sets."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int

    def __post_init__(self):
        sets = [set(self.train.tolist()), set(self.val.tolist()), set(self.test.tolist())]
        total = len(sets[0]) + len(sets[1]) + len(sets[2])
        if len(sets[0] | sets[1] | sets[2]) != total:
            raise DataError("train/val/test sets overlap")


def make_split(dataset: Dataset, fractions=(0.6, 0.2, 0.2), seed: int = 0) -> SplitSpec:
    """Per-class stratified split.

    Each class of size c contributes ceil(f_train * c) training nodes,
    then ceil(f_val * c) validation nodes from the remainder, then the
    rest to test. Deterministic for a given seed.
    """
    f_train, f_val, f_test = (float(f) for f in fractions)
    if not np.isclose(f_train + f_val + f_test, 1.0) or min(f_train, f_val, f_test) < 0:
        raise DataError(f"fractions must be nonnegative and sum to 1, got {fractions}")
    seed = check_seed(seed)
    labels = dataset.labels.labels
    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for cls in range(dataset.num_classes):
        members = np.flatnonzero(labels == cls)
        if members.size < 3:
            raise DataError(
                f"class {cls} has only {members.size} nodes; need at least 3 to split"
            )
        members = rng.permutation(members)
        n_train = int(np.ceil(f_train * members.size))
        n_val = min(int(np.ceil(f_val * members.size)), members.size - n_train)
        train.append(members[:n_train])
        val.append(members[n_train:n_train + n_val])
        test.append(members[n_train + n_val:])
    return SplitSpec(
        train=np.sort(np.concatenate(train)),
        val=np.sort(np.concatenate(val)),
        test=np.sort(np.concatenate(test)),
        seed=seed,
    )


def save_split(split: SplitSpec, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"seed: {split.seed}\n")
        for name in ("train", "val", "test"):
            ids = " ".join(str(i) for i in getattr(split, name))
            fh.write(f"{name}: {ids}\n")


def load_split(path) -> SplitSpec:
    fields: dict[str, str] = {}
    for line in _read_lines(path):
        key, _, rest = line.partition(":")
        fields[key.strip()] = rest.strip()
    try:
        return SplitSpec(
            train=np.array([int(x) for x in fields["train"].split()], dtype=np.int64),
            val=np.array([int(x) for x in fields["val"].split()], dtype=np.int64),
            test=np.array([int(x) for x in fields["test"].split()], dtype=np.int64),
            seed=int(fields["seed"]),
        )
    except KeyError as exc:
        raise DataError(f"{path}: missing section {exc}") from None


def dataset_report(dataset: Dataset) -> dict:
    """Summary statistics: sizes, dimensions and homophily ratio."""
    try:
        psi = homophily_ratio(dataset.graph, dataset.labels)
    except GraphError:
        psi = float("nan")
    return {
        "name": dataset.name,
        "num_nodes": dataset.num_nodes,
        "num_edges": dataset.graph.num_edges,
        "num_features": dataset.num_features,
        "num_classes": dataset.num_classes,
        "homophily_ratio": psi,
    }


def convert_content_cites(content_path, cites_path, out_dir, name: str = "dataset") -> Dataset:
    """Convert classic citation-network text files to the canonical layout.

    ``.content`` rows are ``<paper_id> <f1> ... <fd> <label>``; ``.cites``
    rows are ``<cited> <citing>``. String ids are assigned indices in file
    order, labels alphabetically. Citations naming unknown papers are
    dropped. Writes ``edges.tsv`` / ``nodes.tsv`` under ``out_dir`` and
    returns the loaded dataset.
    """
    ids: dict[str, int] = {}
    feats: list[np.ndarray] = []
    label_names: list[str] = []
    for line in _read_lines(content_path):
        parts = line.split()
        if len(parts) < 3:
            raise DataError(f"{content_path}: malformed row {line!r}")
        paper, values, label = parts[0], parts[1:-1], parts[-1]
        if paper in ids:
            raise DataError(f"{content_path}: duplicate paper id {paper!r}")
        ids[paper] = len(ids)
        feats.append(np.array([float(v) for v in values], dtype=np.float32))
        label_names.append(label)
    classes = sorted(set(label_names))
    labels = np.array([classes.index(l) for l in label_names], dtype=np.int64)
    edges = []
    for line in _read_lines(cites_path):
        parts = line.split()
        if len(parts) != 2:
            raise DataError(f"{cites_path}: malformed row {line!r}")
        if parts[0] in ids and parts[1] in ids:
            edges.append((ids[parts[0]], ids[parts[1]]))
    dataset = Dataset(
        build_graph(edges, len(ids)),
        np.vstack(feats),
        LabelVector(labels, len(classes)),
        name,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_geomgcn_format(dataset, out / "edges.tsv", out / "nodes.tsv")
    return dataset


def convert_json_mirror(json_path, out_dir, name: str = "dataset") -> Dataset:
    """Convert a JSON mirror {"edges": [[u,v],...], "features": [[...],...],
    "labels": [...]} to the canonical layout."""
    import json

    payload = json.loads(Path(json_path).read_text(encoding="utf-8"))
    try:
        features = np.asarray(payload["features"], dtype=np.float32)
        labels = np.asarray(payload["labels"], dtype=np.int64)
        edges = [(int(u), int(v)) for u, v in payload["edges"]]
    except KeyError as exc:
        raise DataError(f"{json_path}: missing key {exc}") from None
    dataset = Dataset(
        build_graph(edges, features.shape[0]),
        features,
        LabelVector(labels, int(labels.max()) + 1),
        name,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_geomgcn_format(dataset, out / "edges.tsv", out / "nodes.tsv")
    return dataset
