"""Distance-encoding structural features and GraphSAGE-style variants for
node classification on homophilic and heterophilic graphs."""

from .batching import BatchBuilder, DatasetContext, FeatureCache, SubgraphBatch
from .bench import (
    ExperimentPlan,
    ExperimentResult,
    emit_report,
    hyperparameter_search,
    profile_settings,
    run_benchmark,
)
from .data import (
    DataError,
    Dataset,
    SplitSpec,
    dataset_report,
    load_dataset,
    load_geomgcn_format,
    load_split,
    make_split,
    save_split,
    write_geomgcn_format,
)
from .features import (
    DEConfig,
    FeatureError,
    assemble_structural_features,
    degree_feature,
    rw_landing_probabilities,
    spd_onehot,
)
from .graph import (
    Graph,
    GraphError,
    LabelVector,
    Subgraph,
    bfs_distances,
    build_graph,
    extract_ego_subgraph,
    homophily_ratio,
    permute_nodes,
)
from .models import (
    ConfigError,
    DEGNNClassifier,
    ModelConfig,
    Network,
    build_network,
    forward,
    predict,
    preset,
)
from .nn import (
    LayerSpec,
    Params,
    TrainConfig,
    TrainingError,
    TrainResult,
    adam_step,
    dense_forward,
    dropout_forward,
    load_params,
    mean_aggregate,
    sage_forward,
    save_params,
    softmax_cross_entropy,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BatchBuilder",
    "ConfigError",
    "DEConfig",
    "DEGNNClassifier",
    "DataError",
    "Dataset",
    "DatasetContext",
    "ExperimentPlan",
    "ExperimentResult",
    "FeatureCache",
    "FeatureError",
    "Graph",
    "GraphError",
    "LabelVector",
    "LayerSpec",
    "ModelConfig",
    "Network",
    "Params",
    "SplitSpec",
    "Subgraph",
    "SubgraphBatch",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "adam_step",
    "assemble_structural_features",
    "bfs_distances",
    "build_graph",
    "build_network",
    "dataset_report",
    "degree_feature",
    "dense_forward",
    "dropout_forward",
    "emit_report",
    "extract_ego_subgraph",
    "forward",
    "homophily_ratio",
    "hyperparameter_search",
    "load_dataset",
    "load_geomgcn_format",
    "load_params",
    "load_split",
    "make_split",
    "mean_aggregate",
    "permute_nodes",
    "predict",
    "preset",
    "profile_settings",
    "rw_landing_probabilities",
    "run_benchmark",
    "sage_forward",
    "save_params",
    "save_split",
    "softmax_cross_entropy",
    "spd_onehot",
    "train",
    "write_geomgcn_format",
]
