"""Learnable approximate network motif mining on synthetic graph benchmarks."""

from .baseline import (
    BudgetExceededError,
    MotifClass,
    canonical_form,
    enumerate_connected,
    exact_mine,
)
from .decoder import (
    AssignmentMatrix,
    LshTable,
    decode,
    decode_grid_search,
    lsh_hash,
    make_lsh_table,
)
from .evaluation import (
    EvalReport,
    dummy_control,
    evaluate_assignments,
    jaccard,
    m_jaccard,
    sigma_separation,
)
from .features import ablation_study, graph_embedding, motif_presence_labels
from .graphs import (
    DatasetBundle,
    Graph,
    MotifSpec,
    build_dataset,
    distort,
    erdos_renyi,
    gen_motif,
    induced_subgraph,
    is_connected,
    load_dataset,
    plant_motif,
    rewire_null,
    save_dataset,
)
from .kernel import sim_g, transport_cost, wl_refine
from .miner import (
    CoarseLayer,
    MinerConfig,
    MinerModel,
    TrainingDivergedError,
    conc_loss,
    contract,
    forward_pass,
    init_features,
    init_model,
    joint_embed,
    knn_density,
    load_model,
    rep_loss,
    run_forward_passes,
    save_model,
    score_edge,
    train,
)

__all__ = [
    "AssignmentMatrix",
    "BudgetExceededError",
    "CoarseLayer",
    "DatasetBundle",
    "EvalReport",
    "Graph",
    "LshTable",
    "MinerConfig",
    "MinerModel",
    "MotifClass",
    "MotifSpec",
    "TrainingDivergedError",
    "ablation_study",
    "build_dataset",
    "canonical_form",
    "conc_loss",
    "contract",
    "decode",
    "decode_grid_search",
    "distort",
    "dummy_control",
    "enumerate_connected",
    "erdos_renyi",
    "evaluate_assignments",
    "exact_mine",
    "forward_pass",
    "gen_motif",
    "graph_embedding",
    "induced_subgraph",
    "init_features",
    "init_model",
    "is_connected",
    "jaccard",
    "joint_embed",
    "knn_density",
    "load_dataset",
    "load_model",
    "lsh_hash",
    "m_jaccard",
    "make_lsh_table",
    "motif_presence_labels",
    "plant_motif",
    "rep_loss",
    "rewire_null",
    "run_forward_passes",
    "save_dataset",
    "save_model",
    "score_edge",
    "sigma_separation",
    "sim_g",
    "train",
    "transport_cost",
    "wl_refine",
]
