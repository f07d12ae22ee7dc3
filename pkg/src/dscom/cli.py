"""Command-line front end.

Each subcommand wraps one library call so the whole experiment can be run
stage by stage from the shell, or in one shot via `pipeline --config`.
All artifacts are plain text files: edge lists, feature CSVs, cascade
files, JSON model dumps, and CSV estimate rows.
"""

from __future__ import annotations

import argparse
import sys
import time

from .baselines import (
    BASELINE_NAMES,
    celf_greedy,
    gatk_select,
    random_seeds,
    rl_ris_select,
    spec_pr_select,
)
from .cascade import estimate_influence, generate_dataset
from .community import save_partition, load_partition, spectral_cluster
from .diffusion import KINDS, load_model, make_model, save_model
from .errors import DSComError
from .graph import (
    load_attributed_graph,
    load_diffusion_dataset,
    random_attributed_graph,
    save_attributed_graph,
    save_diffusion_dataset,
)
from .pipeline import (
    _TRAIN_KEYS,
    _take,
    emit_report,
    load_run_config,
    run_pipeline,
    seeds_hash,
)
from .relation import (
    TrainConfig,
    gat_forward,
    extract_edge_weights,
    load_attention_model,
    load_weighted_graph,
    save_attention_model,
    save_weighted_graph,
    train_relation_model,
)
from .selection import (
    STRATEGY_MEASURES,
    allocate_budget,
    load_seed_set,
    save_seed_set,
    select_seeds,
)

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib


def _graph_args(parser, required=True):
    parser.add_argument("--edges", required=required,
                        help="edge list file ('src dst' lines)")
    parser.add_argument("--features", default=None,
                        help="node feature CSV (row i = node i)")
    parser.add_argument("--undirected", action="store_true",
                        help="expand each edge in both directions")


def _load_graph(args):
    return load_attributed_graph(args.edges, args.features, args.undirected)


def _require_out(args):
    if args.out is None:
        raise DSComError("--out is required for this command")
    return args.out


def cmd_gen_model(args) -> int:
    out = _require_out(args)
    if args.synthetic_n is not None:
        if args.save_edges is None:
            raise DSComError("--synthetic-n needs --save-edges to keep the "
                             "generated graph")
        graph = random_attributed_graph(args.synthetic_n,
                                        args.mean_out_degree,
                                        args.feature_dim,
                                        rng_seed=args.seed)
        save_attributed_graph(graph, args.save_edges, args.save_features)
    elif args.edges is not None:
        graph = _load_graph(args)
    else:
        raise DSComError("gen-model needs --edges or --synthetic-n")
    model = make_model(args.kind, graph, rng_seed=args.seed,
                       calibration=args.calibration,
                       score_dim=args.score_dim)
    save_model(model, out)
    print(f"wrote {out}")
    return 0


def cmd_gen_cascades(args) -> int:
    out = _require_out(args)
    graph = _load_graph(args)
    model = load_model(args.model)
    dataset = generate_dataset(graph, model, args.n_cascades,
                               seed_fraction=args.seed_fraction,
                               rng_seed=args.seed,
                               max_cascades=args.max_cascades)
    save_diffusion_dataset(dataset, out)
    print(f"wrote {out} ({dataset.pairs.shape[0]} pairs)")
    return 0


def _train_config(args) -> TrainConfig:
    kwargs = {}
    if args.config is not None:
        with open(args.config, "rb") as fh:
            doc = tomllib.load(fh)
        kwargs = _take(doc.get("train", {}), "train", _TRAIN_KEYS)
        kwargs.pop("rng_seed", None)
    if args.epochs is not None:
        kwargs["epochs"] = args.epochs
    if args.lr is not None:
        kwargs["lr"] = args.lr
    return TrainConfig(rng_seed=args.seed, **kwargs)


def cmd_train(args) -> int:
    out = _require_out(args)
    graph = _load_graph(args)
    dataset = load_diffusion_dataset(args.cascades, graph)
    model, history = train_relation_model(graph, dataset, _train_config(args))
    save_attention_model(model, out)
    last = f" final loss {history[-1]:.6f}" if history else ""
    print(f"wrote {out}{last}")
    return 0


def cmd_extract(args) -> int:
    out = _require_out(args)
    graph = _load_graph(args)
    model = load_attention_model(args.model)
    weighted = extract_edge_weights(model, graph)
    save_weighted_graph(weighted, out)
    print(f"wrote {out}")
    return 0


def cmd_cluster(args) -> int:
    out = _require_out(args)
    graph = _load_graph(args)
    weighted = load_weighted_graph(args.weights, graph)
    partition = spectral_cluster(weighted, args.k, rng_seed=args.seed)
    save_partition(partition, out)
    print(f"wrote {out} ({partition.k} communities)")
    return 0


def cmd_select(args) -> int:
    out = _require_out(args)
    graph = _load_graph(args)
    partition = load_partition(args.partition, n=graph.n)
    measure = STRATEGY_MEASURES[args.strategy]
    budgets = allocate_budget(partition, args.k)
    seeds = select_seeds(graph, partition, budgets, measure)
    save_seed_set(seeds, out)
    print(f"wrote {out} ({len(seeds)} seeds)")
    return 0


def cmd_evaluate(args) -> int:
    graph = _load_graph(args)
    model = load_model(args.model)
    seeds = load_seed_set(args.seeds)
    t0 = time.perf_counter()
    est = estimate_influence(graph, model, seeds.nodes.tolist(),
                             R=args.replications, repeats=args.repeats,
                             rng_seed=args.seed)
    wall_ms = (time.perf_counter() - t0) * 1000.0
    header = "seeds_hash,mean,std,R,repeats,wall_ms"
    row = (f"{seeds_hash(seeds.nodes)},{est.mean!r},{est.std!r},"
           f"{est.replications},{est.repeats},{wall_ms:.3f}")
    if args.out is not None:
        with open(args.out, "w") as fh:
            fh.write(header + "\n" + row + "\n")
    print(header)
    print(row)
    return 0


def cmd_pipeline(args) -> int:
    if args.config is None:
        raise DSComError("pipeline needs --config")
    config = load_run_config(args.config)
    if args.seed is not None:
        config.master_seed = args.seed
    if args.out is not None:
        config.out_dir = args.out
    report = run_pipeline(config)
    written = emit_report(report, config.out_dir,
                          write_seeds=config.write_seeds)
    failed = [c for c in report.cells if c.status != "ok"]
    for path in written[:3]:
        print(f"wrote {path}")
    if failed:
        print(f"{len(failed)} cell(s) failed; see summary", file=sys.stderr)
    return 1 if failed else 0


def cmd_baseline(args) -> int:
    out = _require_out(args)
    graph = _load_graph(args)
    name = args.name
    if name == "random":
        seeds = random_seeds(graph, args.k, rng_seed=args.seed)
    elif name == "celf":
        if args.model is None:
            raise DSComError("baseline celf needs --model")
        model = load_model(args.model)
        seeds = celf_greedy(graph, model, k=args.k, R=args.replications,
                            rng_seed=args.seed)
    elif name == "gatk":
        if args.attention is None:
            raise DSComError("baseline gatk needs --attention")
        model = load_attention_model(args.attention)
        embeddings, _ = gat_forward(model, graph)
        seeds = gatk_select(embeddings, args.k, rng_seed=args.seed)
    elif name == "spec-pr":
        seeds = spec_pr_select(graph, args.k, rng_seed=args.seed)
    else:
        if args.weights is None:
            raise DSComError("baseline rl-ris needs --weights")
        weighted = load_weighted_graph(args.weights, graph)
        theta = args.theta if args.theta else None
        seeds = rl_ris_select(graph, weighted, args.k, theta=theta,
                              rng_seed=args.seed)
    save_seed_set(seeds, out)
    print(f"wrote {out} ({len(seeds)} seeds)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dscom",
        description="cascade-driven influence maximization toolkit")
    parser.add_argument("--seed", type=int, default=None,
                        help="random seed (pipeline: overrides master_seed)")
    parser.add_argument("--config", default=None, help="TOML config file")
    parser.add_argument("--out", default=None, help="output file or directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-model", help="plant a ground-truth model")
    _graph_args(p, required=False)
    p.add_argument("--kind", choices=KINDS, default="PIC")
    p.add_argument("--calibration", type=float, default=0.1)
    p.add_argument("--score-dim", type=int, default=8)
    p.add_argument("--synthetic-n", type=int, default=None,
                   help="generate a random graph with this many nodes")
    p.add_argument("--mean-out-degree", type=float, default=4.0)
    p.add_argument("--feature-dim", type=int, default=4)
    p.add_argument("--save-edges", default=None)
    p.add_argument("--save-features", default=None)
    p.set_defaults(func=cmd_gen_model)

    p = sub.add_parser("gen-cascades", help="sample a diffusion dataset")
    _graph_args(p)
    p.add_argument("--model", required=True, help="diffusion model JSON")
    p.add_argument("--n-cascades", type=int, default=1000)
    p.add_argument("--seed-fraction", type=float, default=0.01)
    p.add_argument("--max-cascades", type=int, default=None)
    p.set_defaults(func=cmd_gen_cascades)

    p = sub.add_parser("train", help="fit the attention model to cascades")
    _graph_args(p)
    p.add_argument("--cascades", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="attention coefficients -> edge weights")
    _graph_args(p)
    p.add_argument("--model", required=True, help="attention model JSON")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("cluster", help="partition the weighted graph")
    _graph_args(p)
    p.add_argument("--weights", required=True, help="'src dst weight' file")
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("select", help="pick seeds from a partition")
    _graph_args(p)
    p.add_argument("--partition", required=True)
    p.add_argument("--strategy", choices=sorted(STRATEGY_MEASURES),
                   default="D-PR")
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("evaluate", help="Monte Carlo influence of a seed set")
    _graph_args(p)
    p.add_argument("--model", required=True, help="diffusion model JSON")
    p.add_argument("--seeds", required=True, help="seed set file")
    p.add_argument("--replications", type=int, default=1000)
    p.add_argument("--repeats", type=int, default=10)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="run every stage from one config")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("baseline", help="run a comparison selector")
    _graph_args(p)
    p.add_argument("--name", choices=BASELINE_NAMES, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--model", default=None, help="diffusion model (celf)")
    p.add_argument("--attention", default=None, help="attention model (gatk)")
    p.add_argument("--weights", default=None, help="edge weights (rl-ris)")
    p.add_argument("--replications", type=int, default=1000,
                   help="worlds per gain estimate (celf)")
    p.add_argument("--theta", type=int, default=None,
                   help="reverse-reachable sample count (rl-ris)")
    p.set_defaults(func=cmd_baseline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None and args.command != "pipeline":
        args.seed = 0
    try:
        return args.func(args)
    except DSComError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
