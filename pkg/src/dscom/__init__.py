"""Data-driven community-based influence maximization.

Learn edge closeness from observed diffusion cascades with a graph
attention network, partition the network by normalized-cut spectral
clustering, and pick seeds per community by centrality.  Ships with
IC/LT diffusion simulators (plus feature-conditioned variants), exact
influence oracles for tiny instances, reference baselines, and a
config-driven experiment harness.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DimensionError,
    DSComError,
    NumericError,
    ParameterError,
    ParseError,
    SizeLimitError,
    ValidationError,
)
from .graph import (
    AttributedGraph,
    DiffusionDataset,
    as_node_set,
    induced_subgraph,
    load_attributed_graph,
    load_diffusion_dataset,
    random_attributed_graph,
    save_attributed_graph,
    save_diffusion_dataset,
)
from .seeding import derive_seed
from .diffusion import (
    DiffusionModel,
    PICParams,
    edge_probability,
    load_model,
    make_model,
    save_model,
)
from .cascade import (
    CascadeTrace,
    InfluenceEstimate,
    estimate_influence,
    exact_influence_oracle,
    generate_dataset,
    simulate_cascade,
)
from .relation import (
    AttentionModel,
    TrainConfig,
    WeightedGraph,
    extract_edge_weights,
    gat_forward,
    init_attention_model,
    load_attention_model,
    load_weighted_graph,
    save_attention_model,
    save_weighted_graph,
    train_relation_model,
    uniform_weighted,
)
from .community import (
    Partition,
    load_partition,
    ncut_score,
    save_partition,
    spectral_cluster,
    symmetrized_similarity,
)
from .selection import (
    STRATEGY_MEASURES,
    SeedSet,
    allocate_budget,
    centrality,
    load_seed_set,
    save_seed_set,
    select_seeds,
)
from .baselines import (
    BASELINE_NAMES,
    celf_greedy,
    gatk_select,
    generate_rr_set,
    random_seeds,
    ris_influence_estimate,
    rl_ris_select,
    spec_pr_select,
)
from .pipeline import (
    CellResult,
    RunConfig,
    RunReport,
    emit_report,
    load_run_config,
    report_body,
    run_pipeline,
    seeds_hash,
)

__all__ = [
    "AttentionModel",
    "AttributedGraph",
    "BASELINE_NAMES",
    "CascadeTrace",
    "CellResult",
    "ConfigError",
    "DSComError",
    "DiffusionDataset",
    "DiffusionModel",
    "DimensionError",
    "InfluenceEstimate",
    "NumericError",
    "PICParams",
    "ParameterError",
    "ParseError",
    "Partition",
    "RunConfig",
    "RunReport",
    "STRATEGY_MEASURES",
    "SeedSet",
    "SizeLimitError",
    "TrainConfig",
    "ValidationError",
    "WeightedGraph",
    "allocate_budget",
    "as_node_set",
    "celf_greedy",
    "centrality",
    "derive_seed",
    "edge_probability",
    "emit_report",
    "estimate_influence",
    "exact_influence_oracle",
    "extract_edge_weights",
    "gat_forward",
    "gatk_select",
    "generate_dataset",
    "generate_rr_set",
    "induced_subgraph",
    "init_attention_model",
    "load_attention_model",
    "load_attributed_graph",
    "load_diffusion_dataset",
    "load_model",
    "load_partition",
    "load_run_config",
    "load_seed_set",
    "load_weighted_graph",
    "make_model",
    "ncut_score",
    "random_attributed_graph",
    "random_seeds",
    "report_body",
    "ris_influence_estimate",
    "rl_ris_select",
    "run_pipeline",
    "save_attention_model",
    "save_attributed_graph",
    "save_diffusion_dataset",
    "save_model",
    "save_partition",
    "save_seed_set",
    "save_weighted_graph",
    "seeds_hash",
    "select_seeds",
    "simulate_cascade",
    "spec_pr_select",
    "spectral_cluster",
    "symmetrized_similarity",
    "train_relation_model",
    "uniform_weighted",
]
