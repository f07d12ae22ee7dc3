"""Experiment harness wiring the full pipeline end to end.

A run starts from a config (TOML file or plain dict), builds or loads a
graph, plants a ground-truth diffusion model, samples cascades, trains the
relation model, clusters the learned weights, selects seeds per strategy
and budget, and scores every seed set by Monte Carlo simulation under the
planted model.  Each (strategy, k) cell is isolated: a failure marks the
cell and the run continues.  All randomness is fanned out from one master
seed so identical configs produce byte-identical report bodies.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .baselines import (
    BASELINE_NAMES,
    celf_greedy,
    gatk_select,
    random_seeds,
    rl_ris_select,
    spec_pr_select,
)
from .cascade import estimate_influence, generate_dataset
from .community import ncut_score, spectral_cluster, symmetrized_similarity
from .diffusion import KINDS, make_model
from .errors import ConfigError
from .graph import (
    load_attributed_graph,
    load_diffusion_dataset,
    random_attributed_graph,
)
from .relation import (
    TrainConfig,
    extract_edge_weights,
    gat_forward,
    train_relation_model,
)
from .seeding import derive_seed
from .selection import (
    STRATEGY_MEASURES,
    allocate_budget,
    save_seed_set,
    select_seeds,
)

__all__ = [
    "RunConfig",
    "CellResult",
    "RunReport",
    "load_run_config",
    "run_pipeline",
    "emit_report",
    "report_body",
    "seeds_hash",
]

_TRAINED_BASELINES = ("gatk", "rl-ris")


def seeds_hash(nodes) -> str:
    """Short stable digest of a seed set, for log and CSV rows."""
    ids = sorted({int(v) for v in nodes})
    text = " ".join(str(v) for v in ids)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


# --------------------------------------------------------------- run config

_TOP_KEYS = {"master_seed": int, "out_dir": str}
_GRAPH_KEYS = {
    "edges": str,
    "features": str,
    "undirected": bool,
    "n": int,
    "mean_out_degree": float,
    "feature_dim": int,
}
_MODEL_KEYS = {"kind": str, "calibration": float, "score_dim": int}
_DATASET_KEYS = {
    "cascades": str,
    "n_cascades": int,
    "seed_fraction": float,
    "max_cascades": int,
}
_EVAL_KEYS = {"replications": int, "repeats": int}
_SELECT_KEYS = {
    "budgets": list,
    "strategies": list,
    "baselines": list,
    "celf_replications": int,
    "ris_theta": int,
    "write_seeds": bool,
}
_TRAIN_KEYS = {
    f.name: f.type for f in dataclasses.fields(TrainConfig)
    if f.name != "rng_seed"
}


def _coerce(section, key, value, want):
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if want is int and isinstance(value, bool):
        raise ConfigError(f"{section}.{key} must be an integer")
    if want is list:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{section}.{key} must be a list")
        return list(value)
    if not isinstance(value, want):
        raise ConfigError(f"{section}.{key} must be {want.__name__}")
    return value


def _take(table: dict, section: str, keys: dict) -> dict:
    out = {}
    for key, value in table.items():
        if key not in keys:
            raise ConfigError(f"unknown config key {section}.{key}")
        want = keys[key]
        if isinstance(want, str):
            want = {"int": int, "float": float}[want]
        out[key] = _coerce(section, key, value, want)
    return out


def _dedup(names):
    seen, out = set(), []
    for name in names:
        if name not in seen:
            seen.add(name)
            out.append(name)
    return tuple(out)


@dataclass
class RunConfig:
    """Everything a pipeline run needs, with defaults for every field."""

    master_seed: int = 0
    out_dir: str = "run-out"
    edge_path: str | None = None
    feature_path: str | None = None
    undirected: bool = False
    n: int = 100
    mean_out_degree: float = 4.0
    feature_dim: int = 4
    kind: str = "PIC"
    calibration: float = 0.1
    score_dim: int = 8
    cascade_path: str | None = None
    n_cascades: int = 1000
    seed_fraction: float = 0.01
    max_cascades: int | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    replications: int = 1000
    repeats: int = 10
    budgets: tuple = (10,)
    strategies: tuple = ("D-PR",)
    baselines: tuple = ()
    celf_replications: int = 1000
    ris_theta: int | None = None
    write_seeds: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if not 0.0 < self.calibration < 1.0:
            raise ConfigError("model.calibration must lie in (0, 1)")
        if self.n < 1 or self.n_cascades < 1:
            raise ConfigError("graph.n and dataset.n_cascades must be >= 1")
        if self.replications < 1 or self.repeats < 1:
            raise ConfigError("evaluate.replications and repeats must be >= 1")
        if self.celf_replications < 1:
            raise ConfigError("select.celf_replications must be >= 1")
        self.budgets = tuple(int(k) for k in self.budgets)
        if any(k < 1 for k in self.budgets):
            raise ConfigError("select.budgets entries must be >= 1")
        self.strategies = _dedup(self.strategies)
        self.baselines = _dedup(self.baselines)
        for name in self.strategies:
            if name not in STRATEGY_MEASURES:
                raise ConfigError(f"unknown strategy {name!r}")
        for name in self.baselines:
            if name not in BASELINE_NAMES:
                raise ConfigError(f"unknown baseline {name!r}")
        for path in (self.edge_path, self.feature_path, self.cascade_path):
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"referenced file does not exist: {path}")

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        kwargs = {}
        top = {k: v for k, v in doc.items() if not isinstance(v, dict)}
        kwargs.update(_take(top, "top-level", _TOP_KEYS))
        for key in top:
            doc.pop(key)

        graph = _take(doc.pop("graph", {}), "graph", _GRAPH_KEYS)
        kwargs["edge_path"] = graph.pop("edges", None)
        kwargs["feature_path"] = graph.pop("features", None)
        kwargs.update(graph)

        kwargs.update(_take(doc.pop("model", {}), "model", _MODEL_KEYS))

        data = _take(doc.pop("dataset", {}), "dataset", _DATASET_KEYS)
        kwargs["cascade_path"] = data.pop("cascades", None)
        if data.get("max_cascades") == 0:
            data["max_cascades"] = None
        kwargs.update(data)

        train_table = doc.pop("train", {})
        if "rng_seed" in train_table:
            raise ConfigError("train.rng_seed is derived from master_seed")
        kwargs["train"] = TrainConfig(**_take(train_table, "train", _TRAIN_KEYS))

        kwargs.update(_take(doc.pop("evaluate", {}), "evaluate", _EVAL_KEYS))

        select = _take(doc.pop("select", {}), "select", _SELECT_KEYS)
        if select.get("ris_theta") == 0:
            select["ris_theta"] = None
        kwargs.update(select)

        if doc:
            raise ConfigError(f"unknown config section {sorted(doc)[0]!r}")
        return cls(**kwargs)

    def echo(self):
        """Sorted flat (key, value) pairs; stable across identical runs.

        out_dir is omitted: it is output plumbing, and two runs of the
        same experiment into different directories must still produce
        byte-identical report bodies.
        """
        pairs = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "out_dir":
                continue
            if f.name == "train":
                for tf in dataclasses.fields(TrainConfig):
                    pairs.append((f"train.{tf.name}", repr(getattr(value, tf.name))))
            else:
                pairs.append((f.name, repr(value)))
        return tuple(sorted(pairs))


def load_run_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return RunConfig.from_dict(doc)


# --------------------------------------------------------------- run report


@dataclass
class CellResult:
    name: str
    k: int
    status: str = "ok"
    reason: str = ""
    seeds: object = None
    mean: float = math.nan
    std: float = math.nan
    select_ms: float = math.nan
    eval_ms: float = math.nan


@dataclass
class RunReport:
    version: str
    config_echo: tuple
    graph_n: int
    graph_m: int
    dataset_cascades: int
    dataset_pairs: int
    dataset_incomplete: bool
    training_ms: float | None
    ncut: dict
    cells: list


def _load_graph(config: RunConfig):
    if config.edge_path is not None:
        return load_attributed_graph(config.edge_path, config.feature_path,
                                     config.undirected)
    return random_attributed_graph(config.n, config.mean_out_degree,
                                   config.feature_dim,
                                   derive_seed(config.master_seed, "graph"))


def run_pipeline(config: RunConfig) -> RunReport:
    from . import __version__

    master = config.master_seed
    graph = _load_graph(config)
    model = make_model(config.kind, graph, derive_seed(master, "model"),
                       calibration=config.calibration,
                       score_dim=config.score_dim)
    if config.cascade_path is not None:
        dataset = load_diffusion_dataset(config.cascade_path, graph)
    else:
        dataset = generate_dataset(graph, model, config.n_cascades,
                                   seed_fraction=config.seed_fraction,
                                   rng_seed=derive_seed(master, "cascades"),
                                   max_cascades=config.max_cascades)

    needs_training = bool(config.budgets) and (
        bool(config.strategies)
        or any(b in _TRAINED_BASELINES for b in config.baselines))
    training_ms = None
    att_model = None
    weighted = None
    train_error = None
    if needs_training:
        try:
            tcfg = dataclasses.replace(config.train,
                                       rng_seed=derive_seed(master, "train"))
            t0 = time.perf_counter()
            att_model, _ = train_relation_model(graph, dataset, tcfg)
            weighted = extract_edge_weights(att_model, graph)
            training_ms = (time.perf_counter() - t0) * 1000.0
        except Exception as exc:
            train_error = f"training failed: {exc}"

    ncut = {}
    partitions = {}

    def partition_for(k):
        if train_error is not None:
            raise ConfigError(train_error)
        if k not in partitions:
            t0 = time.perf_counter()
            part = spectral_cluster(weighted, k,
                                    rng_seed=derive_seed(master, "cluster", k))
            ms = (time.perf_counter() - t0) * 1000.0
            partitions[k] = (part, ms)
            ncut[k] = ncut_score(symmetrized_similarity(weighted), part)
        return partitions[k]

    def baseline_seeds(name, k):
        seed = derive_seed(master, "baseline", name, k)
        if name == "random":
            return random_seeds(graph, k, rng_seed=seed)
        if name == "celf":
            return celf_greedy(graph, model, k=k,
                               R=config.celf_replications, rng_seed=seed)
        if name == "spec-pr":
            return spec_pr_select(graph, k, rng_seed=seed)
        if train_error is not None:
            raise ConfigError(train_error)
        if name == "gatk":
            embeddings, _ = gat_forward(att_model, graph)
            return gatk_select(embeddings, k, rng_seed=seed)
        return rl_ris_select(graph, weighted, k, theta=config.ris_theta,
                             rng_seed=seed)

    cells = []
    for name in config.strategies:
        measure = STRATEGY_MEASURES[name]
        for k in config.budgets:
            cell = CellResult(name, k)
            try:
                part, part_ms = partition_for(k)
                t0 = time.perf_counter()
                budgets_vec = allocate_budget(part, k)
                cell.seeds = select_seeds(graph, part, budgets_vec, measure)
                cell.select_ms = part_ms + (time.perf_counter() - t0) * 1000.0
            except Exception as exc:
                cell.status, cell.reason = "failed", str(exc)
            cells.append(cell)
    for name in config.baselines:
        for k in config.budgets:
            cell = CellResult(name, k)
            try:
                t0 = time.perf_counter()
                cell.seeds = baseline_seeds(name, k)
                cell.select_ms = (time.perf_counter() - t0) * 1000.0
            except Exception as exc:
                cell.status, cell.reason = "failed", str(exc)
            cells.append(cell)

    for cell in cells:
        if cell.status != "ok":
            continue
        try:
            t0 = time.perf_counter()
            est = estimate_influence(
                graph, model, cell.seeds.nodes.tolist(),
                R=config.replications, repeats=config.repeats,
                rng_seed=derive_seed(master, "evaluate", cell.name, cell.k))
            cell.eval_ms = (time.perf_counter() - t0) * 1000.0
            cell.mean, cell.std = est.mean, est.std
        except Exception as exc:
            cell.status, cell.reason = "failed", f"evaluation failed: {exc}"

    return RunReport(
        version=__version__,
        config_echo=config.echo(),
        graph_n=graph.n,
        graph_m=graph.m,
        dataset_cascades=len(set(dataset.cascade_ids)),
        dataset_pairs=int(dataset.pairs.shape[0]),
        dataset_incomplete=bool(dataset.incomplete),
        training_ms=training_ms,
        ncut=ncut,
        cells=cells,
    )


# ------------------------------------------------------------------- output


def report_body(report: RunReport) -> str:
    """Deterministic text form of a report: no wall-clock values."""
    lines = ["influence run report", f"version: {report.version}", "config:"]
    lines.extend(f"  {key} = {value}" for key, value in report.config_echo)
    lines.append(f"graph: n={report.graph_n} m={report.graph_m}")
    lines.append(
        f"dataset: cascades={report.dataset_cascades}"
        f" pairs={report.dataset_pairs}"
        f" incomplete={report.dataset_incomplete}")
    lines.append("ncut:")
    for k in sorted(report.ncut):
        lines.append(f"  k={k}: {report.ncut[k]!r}")
    lines.append("cells:")
    for cell in report.cells:
        if cell.status == "ok":
            seeds = " ".join(str(v) for v in cell.seeds.nodes.tolist())
            lines.append(f"  {cell.name} k={cell.k}: ok"
                         f" mean={cell.mean!r} std={cell.std!r}"
                         f" seeds={seeds}")
        else:
            lines.append(f"  {cell.name} k={cell.k}: failed ({cell.reason})")
    return "\n".join(lines) + "\n"


def _timing_appendix(report: RunReport) -> str:
    lines = ["timing (ms, wall clock, not reproducible):"]
    if report.training_ms is None:
        lines.append("  training: skipped")
    else:
        lines.append(f"  training: {report.training_ms:.3f}")
    for cell in report.cells:
        if cell.status == "ok":
            lines.append(f"  {cell.name} k={cell.k}:"
                         f" select={cell.select_ms:.3f}"
                         f" eval={cell.eval_ms:.3f}")
    return "\n".join(lines) + "\n"


def emit_report(report: RunReport, out_dir, write_seeds: bool = True):
    """Write report.csv, report_body.txt and summary.txt; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    csv_path = out / "report.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strategy", "k", "status", "mean", "std", "time_ms"])
        for cell in report.cells:
            if cell.status == "ok":
                writer.writerow([cell.name, cell.k, "ok", repr(cell.mean),
                                 repr(cell.std), f"{cell.select_ms:.3f}"])
            else:
                writer.writerow([cell.name, cell.k, "failed", "", "", ""])
    written.append(csv_path)

    body = report_body(report)
    body_path = out / "report_body.txt"
    body_path.write_text(body)
    written.append(body_path)

    summary_path = out / "summary.txt"
    summary_path.write_text(body + "\n" + _timing_appendix(report))
    written.append(summary_path)

    if write_seeds:
        seed_dir = out / "seeds"
        for cell in report.cells:
            if cell.status != "ok":
                continue
            seed_dir.mkdir(parents=True, exist_ok=True)
            path = seed_dir / f"{cell.name}-k{cell.k}.seeds"
            save_seed_set(cell.seeds, path)
            written.append(path)
    return written
