"""Dataset-free verification suite behind ``bench selftest``.

Every check here validates the implementation against an independent
reference: exhaustive walk enumeration for landing probabilities, a
textbook queue BFS for distances, central finite differences for
gradients, and byte comparison of repeated benchmark runs for
determinism. The oracles deliberately share no code with the kernels
they check.
"""

from __future__ import annotations

import tempfile
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset, write_geomgcn_format
from .features import rw_landing_probabilities, spd_onehot
from .graph import Graph, LabelVector, build_graph, extract_ego_subgraph, permute_nodes
from .models import BatchModel, _batch_from_subgraph, build_network, forward, predict, preset
from .nn import Params

__all__ = [
    "CheckResult",
    "make_degree_toy",
    "oracle_walk_landing",
    "oracle_bfs_distances",
    "random_graph",
    "random_connected_graph",
    "finite_difference_max_error",
    "run_all",
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _adjacency_lists(g: Graph) -> list[list[int]]:
    return [g.neighbors(v).tolist() for v in range(g.num_nodes)]


def oracle_walk_landing(g: Graph, target: int, k: int) -> np.ndarray:
    """Landing probabilities by enumerating every walk of length <= k."""
    adj = _adjacency_lists(g)
    deg = [len(a) for a in adj]
    out = np.zeros((g.num_nodes, k))

    def visit(node: int, step: int, prob: float) -> None:
        if step == k or deg[node] == 0:
            return
        p = prob / deg[node]
        for nb in adj[node]:
            out[nb, step] += p
            visit(nb, step + 1, p)

    visit(target, 0, 1.0)
    return out


def oracle_bfs_distances(g: Graph, source: int) -> np.ndarray:
    """Queue-based BFS distances; unreachable nodes get -1."""
    adj = _adjacency_lists(g)
    dist = np.full(g.num_nodes, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for nb in adj[v]:
            if dist[nb] < 0:
                dist[nb] = dist[v] + 1
                queue.append(nb)
    return dist


def random_graph(rng: np.random.Generator, n: int, p: float) -> Graph:
    upper = np.triu_indices(n, k=1)
    keep = rng.random(upper[0].size) < p
    edges = np.stack([upper[0][keep], upper[1][keep]], axis=1)
    return build_graph(edges, n)


def random_connected_graph(rng: np.random.Generator, n: int, p: float) -> Graph:
    while True:
        g = random_graph(rng, n, p)
        if g.num_edges and (oracle_bfs_distances(g, 0) >= 0).all():
            return g


def cycle_graph(n: int) -> Graph:
    return build_graph([(i, (i + 1) % n) for i in range(n)], n)


def _check_rw_oracle(num_graphs: int = 200, seed: int = 2024) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_sum = 0.0
    for _ in range(num_graphs):
        n = int(rng.integers(2, 9))
        g = random_connected_graph(rng, n, float(rng.uniform(0.3, 0.9)))
        target = int(rng.integers(n))
        k = int(rng.integers(1, 5))
        got = rw_landing_probabilities(g, target, k)
        want = oracle_walk_landing(g, target, k)
        worst = max(worst, float(np.abs(got - want).max()))
        # connected graphs have no degree-0 nodes: columns stay stochastic
        worst_sum = max(worst_sum, float(np.abs(got.sum(axis=0) - 1.0).max()))
    ok = worst <= 1e-12 and worst_sum <= 1e-12
    return CheckResult(
        "rw-landing-probabilities vs walk enumeration",
        ok,
        f"{num_graphs} graphs, max abs err {worst:.2e}, "
        f"max column-sum deviation {worst_sum:.2e}",
    )


def _check_spd_oracle(num_graphs: int = 200, seed: int = 77) -> CheckResult:
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(num_graphs):
        n = 64
        g = random_graph(rng, n, float(rng.uniform(0.02, 0.1)))
        target = int(rng.integers(n))
        k = int(rng.integers(1, 5))
        got = spd_onehot(g, target, k)
        dist = oracle_bfs_distances(g, target)
        buckets = np.where((dist < 0) | (dist > k), k + 1, dist)
        want = np.zeros((n, k + 2))
        want[np.arange(n), buckets] = 1.0
        if not np.array_equal(got, want):
            failures += 1
    return CheckResult(
        "spd one-hot vs queue BFS",
        failures == 0,
        f"{num_graphs} random 64-node graphs, {failures} mismatches",
    )


def _check_cycles() -> CheckResult:
    tri = rw_landing_probabilities(cycle_graph(3), 0, 3)
    hexa = rw_landing_probabilities(cycle_graph(6), 0, 3)
    ok = tri[0, 2] == 0.25 and hexa[0, 2] == 0.0
    return CheckResult(
        "C3/C6 separation in the third walk step",
        ok,
        f"triangle return prob {float(tri[0, 2])!r}, 6-cycle {float(hexa[0, 2])!r}",
    )


def finite_difference_max_error(loss_fn, params: Params, h: float = 1e-5) -> float:
    """Max relative error between stored grads and central differences."""
    loss_fn(params)  # populate analytic gradients
    analytic = [g.copy() for g in params.gW] + [g.copy() for g in params.gb]
    tensors = list(params.W) + list(params.b)
    worst = 0.0
    for w, g in zip(tensors, analytic):
        flat_w = w.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_w.size):
            keep = flat_w[i]
            flat_w[i] = keep + h
            up = loss_fn(params)
            flat_w[i] = keep - h
            down = loss_fn(params)
            flat_w[i] = keep
            numeric = (up - down) / (2 * h)
            denom = max(abs(flat_g[i]), abs(numeric), 1e-5)
            worst = max(worst, abs(flat_g[i] - numeric) / denom)
    return worst


def _gradient_cases():
    """(name, network, subgraph-batch loss closure) for every layer path."""
    rng = np.random.default_rng(5)
    g = random_connected_graph(rng, 6, 0.6)
    sub = extract_ego_subgraph(g, 0, 3)
    raw = rng.uniform(0.0, 1.0, size=(6, 4))
    labels = np.array([1])
    cases = []
    for name, model_name, de in (
        ("dense layers (MLP path)", "M6", None),
        ("struct-only sage + hidden sage", "M3", "spd"),
        ("full composite with raw-first injection (M1)", "M1", "spd"),
        ("last-injection head (M2)", "M2", "rw"),
        ("raw-only sage (M5)", "M5", None),
    ):
        config = preset(model_name, de, k=2, num_layers=2, hidden_dim=5, subgraph_hops=3)
        net = build_network(config, raw_dim=4, num_classes=3)
        batch = _batch_from_subgraph(net, sub)
        model = BatchModel(net, batch, raw, labels=labels)
        cases.append((name, net, model))
    return cases


def _check_gradients() -> CheckResult:
    details = []
    ok = True
    for name, net, model in _gradient_cases():
        params = Params(net.specs, np.random.default_rng(11))

        def loss_fn(p, model=model):
            return model.loss_and_grads(p, None, 0.0)

        err = finite_difference_max_error(loss_fn, params)
        ok = ok and err <= 1e-4
        details.append(f"{name}: {err:.2e}")
    return CheckResult(
        "analytic gradients vs central finite differences",
        ok,
        "; ".join(details),
    )


def _toy_inputs(seed: int = 3):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, 10, 0.4)
    raw = rng.uniform(0.0, 1.0, size=(10, 6))
    return rng, g, raw


def _check_isolation() -> CheckResult:
    rng, g, raw = _toy_inputs()
    problems = []
    # structural-only models must ignore raw features entirely
    for name, de in (("M3", "spd"), ("M4", None)):
        config = preset(name, de, k=2, num_layers=2, hidden_dim=4, subgraph_hops=2)
        net = build_network(config, raw_dim=6, num_classes=3)
        params = Params(net.specs, np.random.default_rng(21))
        sub = extract_ego_subgraph(g, 4, config.hops)
        base = forward(net, params, sub, raw)
        other = forward(net, params, sub, rng.uniform(5.0, 9.0, size=raw.shape))
        if not np.array_equal(base, other):
            problems.append(f"{name} reacted to raw features")
    # raw-only models must ignore the DE configuration
    for name in ("M5", "M6"):
        nets = []
        for k in (2, 4):
            config = preset(name, None, k=k, num_layers=1, hidden_dim=4, subgraph_hops=k)
            nets.append(build_network(config, raw_dim=6, num_classes=3))
        params = Params(nets[0].specs, np.random.default_rng(22))
        outs = []
        for net in nets:
            sub = extract_ego_subgraph(g, 4, net.config.hops)
            outs.append(forward(net, params, sub, raw))
        if not np.array_equal(outs[0], outs[1]):
            problems.append(f"{name} reacted to the DE configuration")
    # node relabeling must not change predictions
    perm = np.random.default_rng(23).permutation(g.num_nodes)
    g_perm = permute_nodes(g, perm)
    raw_perm = np.empty_like(raw)
    raw_perm[perm] = raw
    for name, de in (("M1", "spd"), ("M2", "rw"), ("M5", None)):
        config = preset(name, de, k=2, num_layers=2, hidden_dim=4, subgraph_hops=2)
        net = build_network(config, raw_dim=6, num_classes=3)
        params = Params(net.specs, np.random.default_rng(24))
        for target in (0, 4, 7):
            a = predict(net, params, g, raw, target)
            b = predict(net, params, g_perm, raw_perm, int(perm[target]))
            if a != b:
                problems.append(f"{name} prediction changed under relabeling")
                break
    return CheckResult(
        "configuration isolation and relabeling invariance",
        not problems,
        "; ".join(problems) if problems else "M3/M4 raw-blind, M5/M6 DE-blind, relabeling safe",
    )


def make_degree_toy(num_stars: int = 12, leaves: int = 5, seed: int = 9) -> Dataset:
    """Toy dataset whose label is a pure function of node degree.

    ``num_stars`` star graphs: each hub (label 1) connects to ``leaves``
    leaf nodes (label 0). Raw features are uninformative noise, so only
    degree-aware models can separate the classes.
    """
    edges = []
    labels = []
    for s in range(num_stars):
        hub = s * (leaves + 1)
        labels.append(1)
        for i in range(1, leaves + 1):
            edges.append((hub, hub + i))
            labels.append(0)
    n = num_stars * (leaves + 1)
    rng = np.random.default_rng(seed)
    features = rng.uniform(0.0, 1.0, size=(n, 4)).astype(np.float32)
    return Dataset(
        build_graph(edges, n),
        features,
        LabelVector(np.array(labels), 2),
        name="degree-toy",
    )


def _check_benchmark_determinism() -> CheckResult:
    from .cli import main as cli_main

    toy = make_degree_toy()
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        data_dir = tmp / "data" / toy.name
        data_dir.mkdir(parents=True)
        write_geomgcn_format(toy, data_dir / "edges.tsv", data_dir / "nodes.tsv")
        digests = []
        for run in ("a", "b"):
            out = tmp / f"out-{run}"
            code = cli_main(
                [
                    "run",
                    "--dataset", toy.name,
                    "--data-dir", str(tmp / "data"),
                    "--model", "M4",
                    "--seeds", "2",
                    "--lr", "1e-2",
                    "--epochs", "40",
                    "--patience", "40",
                    "--out", str(out),
                    "--quiet",
                ]
            )
            if code != 0:
                return CheckResult("benchmark determinism", False, f"run exited {code}")
            digests.append((out / "results.csv").read_bytes())
    ok = digests[0] == digests[1]
    return CheckResult(
        "benchmark determinism (identical results.csv)",
        ok,
        f"{len(digests[0])} bytes, {'identical' if ok else 'DIFFER'}",
    )


def run_all(quick: bool = False) -> list[CheckResult]:
    sweep = 50 if quick else 200
    checks = [
        _check_rw_oracle(num_graphs=sweep),
        _check_spd_oracle(num_graphs=sweep),
        _check_cycles(),
        _check_gradients(),
        _check_isolation(),
        _check_benchmark_determinism(),
    ]
    return checks
