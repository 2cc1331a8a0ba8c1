"""Scenario sweeps: replicated runs, pointwise averaging, CSV + manifest output."""

from __future__ import annotations

import json
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .gossip import GossipProcess, SpectralError
from .graphs import DirectedGraph, GraphError, GraphSchedule, complete_graph, gilbert_graph
from .metrics import RunTrace, average_traces
from .objectives import Dataset, LogisticObjectives, QuadraticObjectives, load_libsvm, partition_uniform
from .optimizer import DivergenceError, OptimizerConfig, centralized_sgd, run_dtgo
from .rng import stream
from .warmup import WarmupError, run_warmup

log = logging.getLogger(__name__)

SCENARIOS = ("gilbert-sweep", "delay-sweep", "mixed", "timevarying")
MAX_ABORT_FRACTION = 0.10


class ExperimentError(RuntimeError):
    pass


def poisson_delay_map(graph, lam: float, rng: np.random.Generator) -> dict:
    """Independent Poisson(``lam``) delay for every non-self edge, in sorted edge order."""
    if lam < 0:
        raise ValueError("mean delay must be non-negative")
    edges = graph.non_self_edges()
    draws = rng.poisson(lam, size=len(edges))
    return {e: int(d) for e, d in zip(edges, draws)}


@dataclass
class ExperimentSpec:
    scenario: str
    points: list[float]
    replications: int = 20
    rounds: int = 250
    warmup_rounds: int = 512
    n_nodes: int = 10
    objective: str = "logistic"
    dataset: str = ""
    step_size: float = 2.0
    reg: float = -1.0  # negative: 1 / n_samples
    batch_size: int = 1
    standardize: bool = False  # scale features to unit variance before partitioning
    edge_prob: float = 0.5  # base graph for timevarying
    delay_lambda: float = 0.3  # fixed delay level for mixed
    quad_dim: int = 5
    noise_var: float = 1.0
    virtual_ids_visible: bool = False
    reject_disconnected_base: bool = True
    graph_retries: int = 10_000
    workers: int = 1
    output: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if not self.points:
            raise ValueError("at least one scenario point is required")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.objective not in ("logistic", "quadratic"):
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.objective == "logistic" and not self.dataset:
            raise ValueError("the logistic objective needs a dataset path")
        if self.scenario == "timevarying" and any(p >= 1.0 for p in self.points):
            warnings.warn("p_err = 1 removes every link: nodes never communicate", stacklevel=2)

    @property
    def parameter(self) -> str:
        return {"gilbert-sweep": "p", "delay-sweep": "lambda", "mixed": "p", "timevarying": "p_err"}[self.scenario]

    def label(self, value: float) -> str:
        return f"{self.scenario}_{self.parameter}={value:g}"


_LIST_KEYS = {"points"}


def parse_config(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; lists are comma-separated."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def spec_from_config(text: str, **overrides) -> ExperimentSpec:
    raw = parse_config(text)
    types = {f.name: f.type for f in fields(ExperimentSpec)}
    kwargs = {}
    for key, value in raw.items():
        if key not in types:
            raise ValueError(f"unknown config key {key!r}")
        kind = types[key]
        if key in _LIST_KEYS:
            kwargs[key] = [float(v) for v in value.split(",") if v.strip()]
        elif kind == "bool":
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"{key}: expected a boolean, got {value!r}")
            kwargs[key] = value.lower() in ("true", "1", "yes")
        elif kind == "int":
            kwargs[key] = int(value)
        elif kind == "float":
            kwargs[key] = float(value)
        else:
            kwargs[key] = value
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec(**kwargs)


def replication_seed(master: int, r: int) -> int:
    return int(np.random.SeedSequence([master & 0xFFFFFFFFFFFFFFFF, r]).generate_state(1, np.uint64)[0])


def build_objectives(spec: ExperimentSpec, r: int, data: Dataset | None):
    if spec.objective == "quadratic":
        centers = stream(spec.seed, "data", r).normal(0.0, 1.0, size=(spec.n_nodes, spec.quad_dim))
        return QuadraticObjectives(centers, spec.noise_var)
    shards = partition_uniform(len(data), spec.n_nodes, stream(spec.seed, "partition", r))
    reg = spec.reg if spec.reg >= 0 else 1.0 / len(data)
    return LogisticObjectives(data, shards, reg, spec.batch_size)


def build_process(spec: ExperimentSpec, value: float, r: int) -> tuple[GossipProcess, GossipProcess]:
    """Processes for optimization and for warm-up (separate drop streams)."""
    n = spec.n_nodes
    graph_rng = stream(spec.seed, "graph", r)
    delays = {}
    if spec.scenario == "gilbert-sweep":
        base = gilbert_graph(n, value, graph_rng, spec.graph_retries)
    elif spec.scenario == "delay-sweep":
        base = complete_graph(n)
        delays = poisson_delay_map(base, value, stream(spec.seed, "delays", r))
    elif spec.scenario == "mixed":
        base = gilbert_graph(n, value, graph_rng, spec.graph_retries)
        delays = poisson_delay_map(base, spec.delay_lambda, stream(spec.seed, "delays", r))
    else:
        if spec.reject_disconnected_base:
            base = gilbert_graph(n, spec.edge_prob, graph_rng, spec.graph_retries)
        else:
            adj = (graph_rng.random((n, n)) < spec.edge_prob) & ~np.eye(n, dtype=bool)
            base = DirectedGraph.from_adjacency(adj)
        drop_seed = int(stream(spec.seed, "edge_drop", r).integers(2**63))
        warm_seed = int(stream(spec.seed, "warmup_drop", r).integers(2**63))
        opt = GossipProcess(GraphSchedule(base, "edge-drop", value, seed=drop_seed))
        warm = GossipProcess(GraphSchedule(base, "edge-drop", value, seed=warm_seed))
        return opt, warm
    proc = GossipProcess(GraphSchedule(base), delays)
    return proc, proc


def run_replication(spec: ExperimentSpec, value: float, r: int, data: Dataset | None,
                    baseline: RunTrace | None = None) -> RunTrace:
    objectives = build_objectives(spec, r, data)
    config = OptimizerConfig(spec.step_size, spec.rounds, seed=replication_seed(spec.seed, r))
    if baseline is None:
        baseline = centralized_sgd(config, objectives)
    process, warm_process = build_process(spec, value, r)
    warm = run_warmup(warm_process, spec.warmup_rounds, stream(spec.seed, "ids", r),
                      virtual_ids_visible=spec.virtual_ids_visible)
    n_eff = warm.n_used if warm.n_used > 0 else process.n_real
    try:
        pi = process.spectral.pi
    except SpectralError:
        # no communication in expectation (e.g. p_err = 1): any weighting is stationary
        warnings.warn(f"{spec.label(value)}: no unique stationary weights; tracking the plain average",
                      stacklevel=2)
        pi = np.zeros(process.n_total)
        pi[: process.n_real] = 1.0 / process.n_real
    return run_dtgo(config, process, objectives, warm.corrections, baseline=baseline, n_eff=n_eff, pi=pi)


def _task(args) -> tuple[int, int, RunTrace | str]:
    spec, i, value, r, data = args
    try:
        return i, r, run_replication(spec, value, r, data)
    except (DivergenceError, WarmupError, GraphError) as exc:
        return i, r, f"{type(exc).__name__}: {exc}"


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    curves: dict[float, RunTrace]
    aborted: dict[float, list[str]] = field(default_factory=dict)
    files: dict[str, str] = field(default_factory=dict)
    max_drift: dict[float, float] = field(default_factory=dict)  # largest per-run identity residual


def run_experiment(spec: ExperimentSpec, data: Dataset | None = None) -> ExperimentResult:
    """Average ``spec.replications`` paired runs per scenario point.

    Replication ``r`` uses the same data partition, sampling stream and
    baseline at every point, so points differ only along the swept axis.
    """
    if spec.objective == "logistic" and data is None:
        data = load_libsvm(spec.dataset)
    if spec.objective == "logistic" and spec.standardize:
        data = data.standardized()
    tasks = [(spec, i, v, r, data) for i, v in enumerate(spec.points) for r in range(spec.replications)]
    results: dict[tuple[int, int], RunTrace | str] = {}
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            for i, r, res in pool.map(_task, tasks):
                results[i, r] = res
    else:
        baselines: dict[int, RunTrace] = {}
        for _, i, v, r, _ in tasks:
            try:
                if r not in baselines:
                    objectives = build_objectives(spec, r, data)
                    config = OptimizerConfig(spec.step_size, spec.rounds, seed=replication_seed(spec.seed, r))
                    baselines[r] = centralized_sgd(config, objectives)
                results[i, r] = run_replication(spec, v, r, data, baselines[r])
            except (DivergenceError, WarmupError, GraphError) as exc:
                results[i, r] = f"{type(exc).__name__}: {exc}"
    out = ExperimentResult(spec, {})
    for i, v in enumerate(spec.points):
        runs = [results[i, r] for r in range(spec.replications)]
        failed = [x for x in runs if isinstance(x, str)]
        ok = [x for x in runs if not isinstance(x, str)]
        if failed:
            out.aborted[v] = failed
            warnings.warn(f"{spec.label(v)}: {len(failed)} of {len(runs)} replications aborted", stacklevel=2)
        if len(failed) > MAX_ABORT_FRACTION * len(runs):
            raise ExperimentError(f"{spec.label(v)}: {len(failed)}/{len(runs)} replications aborted: {failed[0]}")
        out.curves[v] = average_traces(ok)
        out.max_drift[v] = max(float(np.max(t.weighted_avg_drift)) for t in ok)
    if spec.output:
        write_results(out, Path(spec.output))
    return out


def write_results(result: ExperimentResult, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    spec = result.spec
    manifest = {"scenario": spec.scenario, "parameter": spec.parameter, "seed": spec.seed,
                "replications": spec.replications, "rounds": spec.rounds, "points": []}
    for v, trace in result.curves.items():
        name = spec.label(v) + ".csv"
        (outdir / name).write_text(trace.to_csv())
        result.files[spec.label(v)] = name
        manifest["points"].append({"value": v, "file": name, "aborted": len(result.aborted.get(v, []))})
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
