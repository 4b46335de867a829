"""The eight feature-configuration variants and their assembled networks.

A variant decides three things: whether distance-encoding features are
computed, whether the log-degree column is used, and where raw node
features enter — concatenated into the first-layer inputs of every
subgraph node ("first"), concatenated onto the target's final
representation just before the classifier head ("last"), or not at all.
With no propagation input and "last" injection the model collapses to an
MLP over the target's raw features alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .batching import DatasetContext, SubgraphBatch
from .features import DEConfig, assemble_structural_features, structural_dim
from .graph import Graph, Subgraph, bfs_distances, extract_ego_subgraph, induced_subgraph_csr
from .nn import (
    LayerSpec,
    Params,
    TrainConfig,
    dropout_forward,
    relu,
    softmax_cross_entropy,
    train,
)
from .validation import check_node_ids, check_positive_int

__all__ = [
    "ConfigError",
    "ModelConfig",
    "Network",
    "PRESET_NAMES",
    "preset",
    "build_network",
    "BatchModel",
    "forward",
    "predict",
    "DEGNNClassifier",
]


class ConfigError(ValueError):
    """Raised for inconsistent model configuration."""


# name -> (uses DE, uses degree, raw injection point)
_PRESET_TABLE = {
    "M1": (True, True, "first"),
    "M2": (True, True, "last"),
    "M3": (True, True, "none"),
    "M4": (False, True, "none"),
    "M5": (False, False, "first"),
    "M6": (False, False, "last"),
    "M7": (False, True, "first"),
    "M8": (False, True, "last"),
}
PRESET_NAMES = tuple(_PRESET_TABLE)
_DE_PRESETS = ("M1", "M2", "M3")


@dataclass(frozen=True)
class ModelConfig:
    de: DEConfig | None
    use_degree: bool
    raw_injection: str  # "first" | "last" | "none"
    num_layers: int = 1
    hidden_dim: int = 32
    subgraph_hops: int | None = None

    def __post_init__(self):
        if self.raw_injection not in ("first", "last", "none"):
            raise ConfigError(f"unknown raw injection {self.raw_injection!r}")
        check_positive_int(self.num_layers, "num_layers")
        check_positive_int(self.hidden_dim, "hidden_dim")
        if self.subgraph_hops is not None:
            check_positive_int(self.subgraph_hops, "subgraph_hops")

    @property
    def struct_dim(self) -> int:
        return structural_dim(self.de, self.use_degree)

    @property
    def hops(self) -> int:
        if self.subgraph_hops is not None:
            return self.subgraph_hops
        k = self.de.k if self.de is not None else 1
        return max(self.num_layers, k)


def preset(
    name: str,
    de_variant: str | None = None,
    *,
    k: int = 3,
    num_layers: int = 1,
    hidden_dim: int = 32,
    subgraph_hops: int | None = None,
) -> ModelConfig:
    """Build the configuration for one of the presets M1..M8.

    ``de_variant`` ("spd" or "rw") is required for M1-M3 and must be
    omitted for M4-M8.
    """
    key = str(name).upper()
    if key not in _PRESET_TABLE:
        raise ConfigError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")
    uses_de, use_degree, injection = _PRESET_TABLE[key]
    if uses_de and de_variant is None:
        raise ConfigError(f"preset {key} requires a DE variant ('spd' or 'rw')")
    if not uses_de and de_variant is not None:
        raise ConfigError(f"preset {key} does not take a DE variant")
    de = DEConfig(de_variant, k) if uses_de else None
    if subgraph_hops is None:
        # shared default radius: DE-less variants use the same balls, so a
        # benchmark over all eight presets samples each subgraph once
        subgraph_hops = max(num_layers, k)
    return ModelConfig(
        de=de,
        use_degree=use_degree,
        raw_injection=injection,
        num_layers=num_layers,
        hidden_dim=hidden_dim,
        subgraph_hops=subgraph_hops,
    )


@dataclass(frozen=True)
class Network:
    """A model configuration bound to input/output dimensions."""

    config: ModelConfig
    raw_dim: int
    num_classes: int
    sage_specs: tuple
    head_specs: tuple

    @property
    def specs(self) -> tuple:
        return self.sage_specs + self.head_specs

    @property
    def prop_raw(self) -> bool:
        return self.config.raw_injection == "first"

    @property
    def struct_dim(self) -> int:
        return self.config.struct_dim

    @property
    def mlp_only(self) -> bool:
        return not self.sage_specs


def build_network(config: ModelConfig, raw_dim: int, num_classes: int) -> Network:
    check_positive_int(raw_dim, "raw_dim")
    check_positive_int(num_classes, "num_classes")
    first_in = config.struct_dim + (raw_dim if config.raw_injection == "first" else 0)
    hidden = config.hidden_dim
    if first_in == 0:
        if config.raw_injection != "last":
            raise ConfigError(
                "model has no inputs: no structural features and raw features "
                "are not injected anywhere"
            )
        sage_specs = ()
        head_specs = (
            LayerSpec("dense", raw_dim, hidden, "relu"),
            LayerSpec("dense", hidden, num_classes, "none"),
        )
    else:
        dims = [first_in] + [hidden] * config.num_layers
        sage_specs = tuple(
            LayerSpec("sage", dims[i], dims[i + 1], "relu")
            for i in range(config.num_layers)
        )
        if config.raw_injection == "last":
            head_in = hidden + raw_dim
            head_specs = (
                LayerSpec("dense", head_in, hidden, "relu"),
                LayerSpec("dense", hidden, num_classes, "none"),
            )
        else:
            head_in = hidden
            head_specs = (LayerSpec("dense", hidden, num_classes, "none"),)
        assert head_specs[0].in_dim == head_in
    return Network(config, raw_dim, num_classes, sage_specs, head_specs)


class BatchModel:
    """Forward/backward over a union batch of per-target subgraphs.

    The first SAGE layer never materializes the gathered raw-feature
    matrix: raw features are projected once per pass on the full n x d
    matrix and the projections are gathered per union row.
    """

    def __init__(self, net: Network, batch: SubgraphBatch, raw: np.ndarray | None, labels=None):
        self.net = net
        self.batch = batch
        self.labels = None if labels is None else np.asarray(labels, dtype=np.int64)
        self.S = batch.struct
        needs_raw = net.prop_raw or net.config.raw_injection == "last"
        if needs_raw:
            if raw is None:
                raise ConfigError("this configuration requires raw node features")
            if raw.dtype != np.float64:
                raw = raw.astype(np.float64)
        self.raw = raw if net.prop_raw else None
        if not net.mlp_only:
            self.abar = batch.abar()
            self.abar_t = batch.abar_t()
        if net.prop_raw:
            R = batch.num_rows
            self.gather_t = sp.csr_matrix(
                (np.ones(R), batch.rows_to_node, np.arange(R + 1, dtype=np.int64)),
                shape=(R, raw.shape[0]),
            ).T.tocsr()
        self.raw_t = (
            raw[batch.target_nodes] if net.config.raw_injection == "last" else None
        )

    def _forward(self, params: Params, rng, dropout_p, training, capture=None):
        net = self.net
        sage_cache = []
        H = None
        li = 0
        for spec in net.sage_specs:
            W, b = params.W[li], params.b[li]
            if li == 0:
                d = net.raw_dim if net.prop_raw else 0
                s = net.struct_dim
                Z = None
                if d:
                    Z = (self.raw @ W[:d])[self.batch.rows_to_node]
                if s:
                    part = self.S @ W[d:d + s]
                    Z = part if Z is None else Z + part
                M = None
                if d:
                    M = (self.raw @ W[d + s:2 * d + s])[self.batch.rows_to_node]
                if s:
                    part = self.S @ W[2 * d + s:]
                    M = part if M is None else M + part
                Z = Z + (self.abar @ M) + b
                layer = {"Z": Z}
            else:
                R_agg = self.abar @ H
                Z = H @ W[:spec.in_dim] + R_agg @ W[spec.in_dim:] + b
                layer = {"Z": Z, "H_in": H, "R": R_agg}
            A = relu(Z) if spec.activation == "relu" else Z
            A, mask = dropout_forward(A, dropout_p, rng, training)
            layer["mask"] = mask
            sage_cache.append(layer)
            if capture is not None:
                capture.append((f"sage{li}", A))
            H = A
            li += 1
        if net.mlp_only:
            U = self.raw_t
        elif net.config.raw_injection == "last":
            U = np.hstack([H[self.batch.target_rows], self.raw_t])
        else:
            U = H[self.batch.target_rows]
        head_cache = []
        for hi, spec in enumerate(net.head_specs):
            W, b = params.W[li], params.b[li]
            Z = U @ W + b
            A = relu(Z) if spec.activation == "relu" else Z
            mask = None
            if spec.activation == "relu":
                A, mask = dropout_forward(A, dropout_p, rng, training)
            head_cache.append({"Z": Z, "U": U, "mask": mask})
            if capture is not None:
                capture.append((f"head{hi}", A))
            U = A
            li += 1
        return U, sage_cache, head_cache

    def logits(self, params: Params) -> np.ndarray:
        out, _, _ = self._forward(params, None, 0.0, training=False)
        return out

    def accuracy(self, params: Params) -> float:
        pred = np.argmax(self.logits(params), axis=1)
        return float(np.mean(pred == self.labels))

    def diagnose_nonfinite(self, params: Params) -> str | None:
        capture = []
        self._forward(params, None, 0.0, training=False, capture=capture)
        for name, arr in capture:
            if not np.all(np.isfinite(arr)):
                return name
        return None

    def loss_and_grads(self, params: Params, rng, dropout_p: float) -> float:
        params.zero_grads()
        logits, sage_cache, head_cache = self._forward(
            params, rng, dropout_p, training=True
        )
        loss, dU = softmax_cross_entropy(logits, self.labels)
        net = self.net
        li = len(params.specs) - 1
        for hi in reversed(range(len(net.head_specs))):
            spec = net.head_specs[hi]
            hc = head_cache[hi]
            if hc["mask"] is not None:
                dU = dU * hc["mask"]
            dZ = dU * (hc["Z"] > 0) if spec.activation == "relu" else dU
            params.gb[li] += dZ.sum(axis=0)
            params.gW[li] += hc["U"].T @ dZ
            dU = dZ @ params.W[li].T
            li -= 1
        if net.mlp_only:
            return loss
        hid = net.sage_specs[-1].out_dim
        dHt = dU[:, :hid] if net.config.raw_injection == "last" else dU
        dH = np.zeros((self.batch.num_rows, hid))
        dH[self.batch.target_rows] = dHt
        for si in reversed(range(len(net.sage_specs))):
            spec = net.sage_specs[si]
            lc = sage_cache[si]
            if lc["mask"] is not None:
                dH = dH * lc["mask"]
            dZ = dH * (lc["Z"] > 0) if spec.activation == "relu" else dH
            params.gb[si] += dZ.sum(axis=0)
            W = params.W[si]
            if si > 0:
                params.gW[si][:spec.in_dim] += lc["H_in"].T @ dZ
                params.gW[si][spec.in_dim:] += lc["R"].T @ dZ
                dH = dZ @ W[:spec.in_dim].T + self.abar_t @ (dZ @ W[spec.in_dim:].T)
            else:
                d = net.raw_dim if net.prop_raw else 0
                s = net.struct_dim
                dM = self.abar_t @ dZ
                gW = params.gW[0]
                if d:
                    gW[:d] += self.raw.T @ (self.gather_t @ dZ)
                    gW[d + s:2 * d + s] += self.raw.T @ (self.gather_t @ dM)
                if s:
                    gW[d:d + s] += self.S.T @ dZ
                    gW[2 * d + s:] += self.S.T @ dM
        return loss


def _batch_from_subgraph(net: Network, sub: Subgraph) -> SubgraphBatch:
    """Batch of one, with propagation truncated to the layer count."""
    config = net.config
    struct = None
    if config.struct_dim:
        struct = assemble_structural_features(sub, config.de, config.use_degree)
    prop_hops = 0 if net.mlp_only else config.num_layers
    dist = bfs_distances(sub.graph, sub.target_local, max_hops=prop_hops)
    keep = np.flatnonzero(dist >= 0).astype(np.int64)
    indptr, indices, _ = induced_subgraph_csr(sub.graph, keep)
    target = int(sub.node_map[sub.target_local])
    return SubgraphBatch(
        num_rows=int(keep.size),
        indptr=indptr,
        indices=indices,
        rows_to_node=sub.node_map[keep],
        target_rows=np.array([np.searchsorted(keep, sub.target_local)], dtype=np.int64),
        target_nodes=np.array([target], dtype=np.int64),
        struct=None if struct is None else struct[keep],
    )


def forward(net: Network, params: Params, sub: Subgraph, raw: np.ndarray | None) -> np.ndarray:
    """Logits for the subgraph's target node."""
    batch = _batch_from_subgraph(net, sub)
    model = BatchModel(net, batch, _as_f64(raw), labels=None)
    return model.logits(params)[0]


def predict(net: Network, params: Params, graph: Graph, raw: np.ndarray | None, target: int) -> int:
    """Extract the target's ego subgraph, run the model, argmax the logits.

    Ties break toward the lowest class id.
    """
    sub = extract_ego_subgraph(graph, target, net.config.hops)
    return int(np.argmax(forward(net, params, sub, raw)))


def _as_f64(X):
    if X is None:
        return None
    X = np.asarray(X)
    return X.astype(np.float64) if X.dtype != np.float64 else X


class _TrainingProblem:
    def __init__(self, train_model: BatchModel, val_model: BatchModel):
        self._train = train_model
        self._val = val_model

    def loss_and_grads(self, params, rng, dropout_p):
        return self._train.loss_and_grads(params, rng, dropout_p)

    def val_accuracy(self, params):
        return self._val.accuracy(params)

    def diagnose_nonfinite(self, params):
        return self._train.diagnose_nonfinite(params)


class DEGNNClassifier(BaseEstimator, ClassifierMixin):
    """Transductive node classifier over one of the M1..M8 variants.

    Parameters
    ----------
    model : str (default="M1")
        Preset name, one of M1..M8.
    de : str (default="spd")
        Distance-encoding variant, "spd" or "rw"; consulted only by
        presets M1-M3.
    k : int (default=3)
        Walk length / maximum encoded distance.
    hops : int or None (default=None)
        Ego-subgraph radius; defaults to max(num_layers, k).
    num_layers, hidden_dim : network shape.
    learning_rate, max_epochs, patience, dropout, weight_decay :
        optimizer settings (Adam with decoupled weight decay, early
        stopping on validation accuracy).
    random_state : int
        Seeds weight initialization and dropout; runs are reproducible
        bit for bit.

    The graph, raw features and labels travel together in a
    :class:`~degnn.data.Dataset`; ``fit`` receives the dataset plus the
    node ids of the training and validation sets, and ``predict`` maps
    node ids of the same dataset to class ids.
    """

    def __init__(
        self,
        model: str = "M1",
        de: str = "spd",
        k: int = 3,
        hops: int | None = None,
        num_layers: int = 1,
        hidden_dim: int = 32,
        learning_rate: float = 1e-4,
        max_epochs: int = 500,
        patience: int = 50,
        dropout: float = 0.2,
        weight_decay: float = 1e-6,
        random_state: int = 0,
    ):
        self.model = model
        self.de = de
        self.k = k
        self.hops = hops
        self.num_layers = num_layers
        self.hidden_dim = hidden_dim
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.patience = patience
        self.dropout = dropout
        self.weight_decay = weight_decay
        self.random_state = random_state

    def _config(self) -> ModelConfig:
        name = str(self.model).upper()
        de_variant = self.de if name in _DE_PRESETS else None
        hops = self.hops if self.hops is not None else max(self.num_layers, self.k)
        return preset(
            name,
            de_variant,
            k=self.k,
            num_layers=self.num_layers,
            hidden_dim=self.hidden_dim,
            subgraph_hops=hops,
        )

    def fit(self, dataset, train_idx, val_idx=None, context: DatasetContext | None = None):
        """Train on ``train_idx``; early-stop on ``val_idx`` accuracy.

        ``val_idx`` defaults to the training set itself. A shared
        :class:`DatasetContext` skips recomputing subgraphs and features
        across repeated fits on the same dataset.
        """
        config = self._config()
        n = dataset.graph.num_nodes
        train_idx = check_node_ids(train_idx, n, "train_idx")
        if train_idx.size == 0:
            raise ValueError("training set is empty")
        val_idx = train_idx if val_idx is None else check_node_ids(val_idx, n, "val_idx")
        if val_idx.size == 0:
            raise ValueError("validation set is empty")
        net = build_network(config, dataset.num_features, dataset.labels.num_classes)
        if context is None:
            context = DatasetContext(dataset.graph)
        builder = context.builder(
            hops=config.hops,
            k=self.k,
            prop_hops=0 if net.mlp_only else config.num_layers,
            de=config.de,
            use_degree=config.use_degree,
        )
        X64 = dataset.features64
        labels = dataset.labels.labels
        train_model = BatchModel(net, builder.batch(train_idx), X64, labels[train_idx])
        val_model = BatchModel(net, builder.batch(val_idx), X64, labels[val_idx])
        seed_seq = np.random.SeedSequence(int(self.random_state))
        init_seed, dropout_seed = (int(s.generate_state(1)[0]) for s in seed_seq.spawn(2))
        params = Params(net.specs, np.random.default_rng(init_seed))
        train_config = TrainConfig(
            learning_rate=self.learning_rate,
            max_epochs=self.max_epochs,
            patience=self.patience,
            dropout_p=self.dropout,
            weight_decay=self.weight_decay,
            seed=dropout_seed,
        )
        result = train(_TrainingProblem(train_model, val_model), params, train_config)
        params.load_weights(result.best_weights)
        self.config_ = config
        self.network_ = net
        self.params_ = params
        self.classes_ = np.arange(dataset.labels.num_classes)
        self.best_epoch_ = result.best_epoch
        self.best_val_accuracy_ = result.best_val_accuracy
        self.history_ = result.history
        self._builder = builder
        self._X64 = X64
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError(
                "this DEGNNClassifier instance is not fitted yet; call fit first"
            )

    def decision_function(self, node_ids) -> np.ndarray:
        self._check_fitted()
        ids = check_node_ids(node_ids, self._X64.shape[0], "node_ids")
        batch = self._builder.batch(ids)
        model = BatchModel(self.network_, batch, self._X64, labels=None)
        return model.logits(self.params_)

    def predict_proba(self, node_ids) -> np.ndarray:
        logits = self.decision_function(node_ids)
        shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
        return shifted / shifted.sum(axis=1, keepdims=True)

    def predict(self, node_ids) -> np.ndarray:
        return np.argmax(self.decision_function(node_ids), axis=1)
