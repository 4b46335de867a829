import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from degnn import (
    ConfigError,
    DEGNNClassifier,
    LabelVector,
    ModelConfig,
    Params,
    build_graph,
    build_network,
    extract_ego_subgraph,
    forward,
    make_split,
    permute_nodes,
    predict,
    preset,
)
from degnn import Dataset

from conftest import random_dataset, random_edges


def two_star_graph(leaves=3):
    """Two disjoint, identically-built stars: hubs 0 and leaves+1."""
    edges = []
    for base in (0, leaves + 1):
        edges += [(base, base + i) for i in range(1, leaves + 1)]
    return build_graph(edges, 2 * (leaves + 1))


def fitted_toy_classifier(**kwargs):
    dataset = random_dataset(n=30, p=0.3, seed=1)
    split = make_split(dataset, seed=0)
    defaults = dict(
        model="M1", de="spd", k=2, num_layers=1, hidden_dim=8,
        learning_rate=1e-2, max_epochs=15, patience=15, dropout=0.0,
        random_state=3,
    )
    defaults.update(kwargs)
    clf = DEGNNClassifier(**defaults)
    clf.fit(dataset, split.train, split.val)
    return dataset, split, clf


class TestPresets:
    # (uses DE, uses degree, raw injection)
    TABLE = {
        "M1": (True, True, "first"),
        "M2": (True, True, "last"),
        "M3": (True, True, "none"),
        "M4": (False, True, "none"),
        "M5": (False, False, "first"),
        "M6": (False, False, "last"),
        "M7": (False, True, "first"),
        "M8": (False, True, "last"),
    }

    @pytest.mark.parametrize("name", sorted(TABLE))
    def test_flag_table(self, name):
        uses_de, use_degree, injection = self.TABLE[name]
        config = preset(name, "spd" if uses_de else None)
        assert (config.de is not None) == uses_de
        assert config.use_degree == use_degree
        assert config.raw_injection == injection

    def test_m3_spd_has_no_raw_injection(self):
        config = preset("M3", "spd")
        assert config.de.variant == "spd" and config.use_degree
        assert config.raw_injection == "none"

    def test_m5_is_raw_first_only(self):
        config = preset("M5")
        assert config.de is None and not config.use_degree
        assert config.raw_injection == "first"

    def test_m1_m2_differ_only_in_injection(self):
        a = preset("M1", "rw")
        b = preset("M2", "rw")
        assert a.de == b.de and a.use_degree == b.use_degree
        assert (a.raw_injection, b.raw_injection) == ("first", "last")

    def test_de_variant_required_for_m1_m3(self):
        with pytest.raises(ConfigError, match="requires"):
            preset("M1")

    def test_de_variant_forbidden_for_m4_m8(self):
        with pytest.raises(ConfigError, match="does not take"):
            preset("M7", "spd")

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            preset("M9")

    def test_default_hops_is_max_of_layers_and_k(self):
        assert preset("M1", "spd", k=3, num_layers=1).hops == 3
        assert preset("M1", "spd", k=2, num_layers=3).hops == 3
        assert preset("M5", num_layers=2).hops == 3  # k defaults to 3
        assert preset("M5", k=1, num_layers=2).hops == 2


class TestNetworkAssembly:
    def test_no_inputs_outside_mlp_path_is_an_error(self):
        config = ModelConfig(de=None, use_degree=False, raw_injection="none")
        with pytest.raises(ConfigError, match="no inputs"):
            build_network(config, raw_dim=4, num_classes=3)

    def test_m6_degenerates_to_mlp(self):
        net = build_network(preset("M6"), raw_dim=7, num_classes=4)
        assert net.mlp_only
        assert [s.kind for s in net.specs] == ["dense", "dense"]
        assert net.specs[0].in_dim == 7

    def test_last_injection_head_width(self):
        net = build_network(preset("M2", "spd", k=2, hidden_dim=16), raw_dim=9, num_classes=3)
        assert net.head_specs[0].in_dim == 16 + 9

    def test_first_injection_head_width(self):
        net = build_network(preset("M5", hidden_dim=16), raw_dim=9, num_classes=3)
        assert net.head_specs[0].in_dim == 16
        assert net.sage_specs[0].in_dim == 9

    def test_m1_first_layer_width(self):
        net = build_network(preset("M1", "spd", k=3), raw_dim=10, num_classes=2)
        # raw 10 + one-hot (k + 2) + degree 1
        assert net.sage_specs[0].in_dim == 10 + 5 + 1


class TestForwardIsolation:
    def test_m4_ignores_raw_features_on_isomorphic_stars(self):
        g = two_star_graph(3)
        rng = np.random.default_rng(0)
        raw = rng.uniform(size=(g.num_nodes, 5))
        config = preset("M4", num_layers=1, hidden_dim=4, subgraph_hops=2)
        net = build_network(config, raw_dim=5, num_classes=2)
        params = Params(net.specs, np.random.default_rng(1))
        hubs = (0, 4)
        outs = [
            forward(net, params, extract_ego_subgraph(g, hub, config.hops), raw)
            for hub in hubs
        ]
        assert np.array_equal(outs[0], outs[1])

    def test_m6_is_graph_agnostic(self):
        rng = np.random.default_rng(2)
        raw = rng.uniform(size=(6, 4))
        g1 = build_graph([(0, 1), (1, 2), (3, 4)], 6)
        g2 = build_graph([(0, 5), (2, 4), (1, 3), (2, 3)], 6)
        net = build_network(preset("M6", hidden_dim=4), raw_dim=4, num_classes=3)
        params = Params(net.specs, np.random.default_rng(3))
        for target in range(6):
            a = forward(net, params, extract_ego_subgraph(g1, target, 1), raw)
            b = forward(net, params, extract_ego_subgraph(g2, target, 1), raw)
            assert np.array_equal(a, b)

    def test_m2_with_zeroed_raw_head_rows_ignores_raw_values(self):
        rng = np.random.default_rng(4)
        g = build_graph(random_edges(rng, 10, 0.4), 10)
        raw = rng.uniform(size=(10, 6))
        config = preset("M2", "spd", k=2, num_layers=1, hidden_dim=4, subgraph_hops=2)
        net = build_network(config, raw_dim=6, num_classes=3)
        params = Params(net.specs, np.random.default_rng(5))
        head_w = params.W[len(net.sage_specs)]
        head_w[net.config.hidden_dim:, :] = 0.0  # rows that multiply x_target
        sub = extract_ego_subgraph(g, 2, config.hops)
        a = forward(net, params, sub, raw)
        b = forward(net, params, sub, rng.uniform(3.0, 9.0, size=raw.shape))
        assert np.array_equal(a, b)

    def test_m5_m6_ignore_de_configuration(self):
        rng = np.random.default_rng(6)
        g = build_graph(random_edges(rng, 10, 0.4), 10)
        raw = rng.uniform(size=(10, 5))
        for name in ("M5", "M6"):
            nets = [
                build_network(
                    preset(name, None, k=k, num_layers=1, hidden_dim=4, subgraph_hops=k),
                    raw_dim=5,
                    num_classes=2,
                )
                for k in (2, 4)
            ]
            params = Params(nets[0].specs, np.random.default_rng(7))
            outs = [
                forward(net, params, extract_ego_subgraph(g, 3, net.config.hops), raw)
                for net in nets
            ]
            assert np.array_equal(outs[0], outs[1])


class TestPredict:
    def test_tie_breaks_toward_lowest_class(self, triangle):
        raw = np.ones((3, 2))
        net = build_network(preset("M6", hidden_dim=3), raw_dim=2, num_classes=4)
        params = Params(net.specs, np.random.default_rng(0))
        for w in params.W:
            w[:] = 0.0
        # all logits equal zero -> argmax returns class 0
        assert predict(net, params, triangle, raw, 0) == 0

    def test_single_class_dataset(self, triangle):
        raw = np.ones((3, 2))
        net = build_network(preset("M5", hidden_dim=3), raw_dim=2, num_classes=1)
        params = Params(net.specs, np.random.default_rng(1))
        assert predict(net, params, triangle, raw, 1) == 0

    def test_invariant_under_node_relabeling(self):
        rng = np.random.default_rng(8)
        g = build_graph(random_edges(rng, 12, 0.3), 12)
        raw = rng.uniform(size=(12, 4))
        perm = rng.permutation(12)
        g_perm = permute_nodes(g, perm)
        raw_perm = np.empty_like(raw)
        raw_perm[perm] = raw
        for name, de in (("M1", "spd"), ("M2", "rw"), ("M4", None), ("M6", None)):
            config = preset(name, de, k=2, num_layers=2, hidden_dim=4, subgraph_hops=2)
            net = build_network(config, raw_dim=4, num_classes=3)
            params = Params(net.specs, np.random.default_rng(9))
            for target in range(12):
                assert predict(net, params, g, raw, target) == predict(
                    net, params, g_perm, raw_perm, int(perm[target])
                )


class TestEstimator:
    def test_fit_predict_score(self):
        dataset, split, clf = fitted_toy_classifier()
        pred = clf.predict(split.test)
        assert pred.shape == (split.test.size,)
        assert set(pred.tolist()) <= set(range(dataset.num_classes))
        score = clf.score(split.test, dataset.labels.labels[split.test])
        assert 0.0 <= score <= 1.0
        proba = clf.predict_proba(split.test)
        assert np.allclose(proba.sum(axis=1), 1.0)

    def test_batched_predictions_match_functional_path(self):
        dataset, split, clf = fitted_toy_classifier(model="M2", de="rw")
        logits = clf.decision_function(split.test[:5])
        for row, node in zip(logits, split.test[:5]):
            ref = forward(
                clf.network_,
                clf.params_,
                extract_ego_subgraph(dataset.graph, int(node), clf.config_.hops),
                dataset.features64,
            )
            assert np.allclose(row, ref, rtol=1e-10, atol=1e-12)
            assert predict(
                clf.network_, clf.params_, dataset.graph, dataset.features64, int(node)
            ) == int(np.argmax(row))

    def test_same_seed_is_bitwise_identical(self):
        _, _, a = fitted_toy_classifier(dropout=0.3, random_state=11)
        _, _, b = fitted_toy_classifier(dropout=0.3, random_state=11)
        for wa, wb in zip(a.params_.W, b.params_.W):
            assert np.array_equal(wa, wb)
        assert [h["loss"] for h in a.history_] == [h["loss"] for h in b.history_]

    def test_requires_fit_before_predict(self):
        clf = DEGNNClassifier()
        with pytest.raises(NotFittedError):
            clf.predict([0])

    def test_sklearn_clone_and_get_params(self):
        clf = DEGNNClassifier(model="M3", de="rw", hidden_dim=64)
        cloned = clone(clf)
        assert cloned.get_params() == clf.get_params()

    def test_empty_train_set_rejected(self):
        dataset = random_dataset()
        with pytest.raises(ValueError, match="training set"):
            DEGNNClassifier().fit(dataset, np.array([], dtype=int))

    def test_training_loss_overfits_small_problem(self):
        # 20 separable examples, enough capacity: loss sinks below 0.01
        rng = np.random.default_rng(12)
        features = np.zeros((20, 4), dtype=np.float32)
        labels = np.arange(20) % 2
        features[labels == 0, 0] = rng.uniform(0.8, 1.0, size=10)
        features[labels == 1, 1] = rng.uniform(0.8, 1.0, size=10)
        dataset = Dataset(
            build_graph([], 20), features, LabelVector(labels, 2), "sep"
        )
        clf = DEGNNClassifier(
            model="M6", hidden_dim=32, learning_rate=1e-2, max_epochs=500,
            patience=500, dropout=0.0, weight_decay=0.0, random_state=0,
        )
        clf.fit(dataset, np.arange(20))
        assert min(h["loss"] for h in clf.history_) < 0.01


class TestTruncationExactness:
    """Propagation restricted to the num_layers-ball must reproduce the
    full-subgraph computation at the target row."""

    @pytest.mark.parametrize("name,de", [("M1", "spd"), ("M1", "rw"), ("M3", "spd"), ("M5", None), ("M7", None)])
    def test_matches_naive_full_subgraph_forward(self, name, de):
        from degnn import assemble_structural_features, sage_forward
        from degnn.nn import dense_forward

        rng = np.random.default_rng(31)
        g = build_graph(random_edges(rng, 25, 0.15), 25)
        raw = rng.uniform(size=(25, 4))
        config = preset(name, de, k=3, num_layers=2, hidden_dim=6, subgraph_hops=4)
        net = build_network(config, raw_dim=4, num_classes=3)
        params = Params(net.specs, np.random.default_rng(32))
        for target in (0, 7, 19):
            sub = extract_ego_subgraph(g, target, config.hops)
            # naive path: all hops-ball rows, layer by layer
            blocks = []
            if config.raw_injection == "first":
                blocks.append(raw[sub.node_map])
            if config.struct_dim:
                blocks.append(assemble_structural_features(sub, config.de, config.use_degree))
            H = np.hstack(blocks)
            for i, spec in enumerate(net.sage_specs):
                H = sage_forward(spec, params.W[i], params.b[i], sub.graph, H)
            U = H[sub.target_local][None, :]
            for j, spec in enumerate(net.head_specs):
                idx = len(net.sage_specs) + j
                U = dense_forward(spec, params.W[idx], params.b[idx], U)
            naive = U[0]
            fast = forward(net, params, sub, raw)
            assert np.allclose(fast, naive, rtol=1e-11, atol=1e-12)
