"""Experiment configuration, run-matrix expansion, execution, and reports.

A JSON config names one dataset (corpus + qrels plus preprocessing), the
strategies, the classifier variants (built-in LR and/or external plugins
with a further-pre-training epoch sweep), and the loop knobs. The run
matrix is the Cartesian product topics x strategies x classifier variants;
each run gets a seed derived purely from (rng_seed, run_id), so results
never depend on scheduling. Runs execute under a bounded worker pool;
aggregation happens after all runs finish and is byte-deterministic
(rows sorted by run_id).

Output layout under the configured directory:

    <run_id dirs>/trace.csv     per-iteration metric trace
    <run_id dirs>/run.json      run metadata + headline metrics
    summary.csv                 one row per run
    significance.csv            paired t-tests vs. the LR baseline
    bins.csv                    difficulty/prevalence bin averages
    relative_costs.csv          mean-of-ratios and ratio-of-sums costs
    meta.json                   config echo, code version, RNG id
    failures.csv                only when runs failed

The cost columns are always reported at the 80% recall target; extra
configured recall targets add second-phase count columns to the trace.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from . import __version__
from .active_learning import (
    DEFAULT_ITERATIONS,
    STRATEGIES,
    LrScorer,
    TopicFeatures,
    run_topic,
)
from .classifier import DEFAULT_LAMBDA, DEFAULT_TOL, ClassifierHandle
from .corpus import Corpus, TopicTask, build_topic_task, dedup, downsample, load_corpus, load_qrels
from .evaluation import (
    DEFAULT_RHO,
    EXPENSIVE_COST,
    UNIFORM_COST,
    CostStructure,
    RunResult,
    relative_cost,
    relative_cost_ratio_of_sums,
)
from .plugin_bridge import (
    DEFAULT_HANDSHAKE_TIMEOUT,
    DEFAULT_REQUEST_TIMEOUT,
    PluginScorer,
    PluginSpec,
    open_plugin,
)
from .rng import RNG_ALGORITHM, derive_seed
from .stats import PairedSample, assign_bins, bonferroni, paired_t_test

log = logging.getLogger("tar_bench")

DEFAULT_BATCH_SIZE = 200

SUMMARY_COLUMNS = [
    "run_id",
    "topic",
    "strategy",
    "classifier",
    "pretrain_epochs",
    "final_r_precision",
    "min_cost_uniform",
    "min_cost_expensive",
    "wall_clock_seconds",
]

SIGNIFICANCE_COLUMNS = [
    "dataset",
    "strategy",
    "metric",
    "classifier",
    "pretrain_epochs",
    "t",
    "p",
    "p_bonferroni",
    "family_size",
    "significant_at_0.05",
]

BINS_COLUMNS = [
    "dataset",
    "difficulty",
    "prevalence",
    "strategy",
    "classifier",
    "pretrain_epochs",
    "metric",
    "n_topics",
    "mean_relative_cost",
]

RELATIVE_COLUMNS = [
    "dataset",
    "strategy",
    "classifier",
    "pretrain_epochs",
    "metric",
    "relative_cost_mean_of_ratios",
    "relative_cost_ratio_of_sums",
    "n_topics",
]

_PRESET_STRUCTURES = {"uniform": UNIFORM_COST, "expensive": EXPENSIVE_COST}


class ConfigError(ValueError):
    """Invalid experiment configuration; message carries a key locator."""


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    corpus_path: str
    qrels_path: str
    dedup: bool = False
    downsample_rate: float | None = None
    downsample_seed: int = 0
    pool_scope: str = "corpus"


@dataclass(frozen=True)
class ClassifierVariant:
    """One column of the experiment matrix: a classifier at fixed settings."""

    descriptor: str
    kind: str  # "builtin-lr" | "external-plugin"
    pretrain_epochs: int | None = None
    lam: float = DEFAULT_LAMBDA
    tol: float = DEFAULT_TOL
    command: tuple[str, ...] = ()
    extra: Mapping[str, str] = field(default_factory=dict)
    handshake_timeout: float = DEFAULT_HANDSHAKE_TIMEOUT
    request_timeout: float = DEFAULT_REQUEST_TIMEOUT

    @property
    def is_baseline(self) -> bool:
        return self.kind == "builtin-lr"

    @property
    def epoch_label(self) -> str:
        return "na" if self.pretrain_epochs is None else str(self.pretrain_epochs)

    @property
    def handle(self) -> ClassifierHandle:
        if self.is_baseline:
            return ClassifierHandle("builtin-lr", {"lam": self.lam, "tol": self.tol})
        return ClassifierHandle(
            "external-plugin",
            {
                "command": list(self.command),
                "pretrain_epochs": self.pretrain_epochs,
                "extra": dict(self.extra),
            },
        )


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetSpec
    strategies: tuple[str, ...]
    classifiers: tuple[ClassifierVariant, ...]
    topics: tuple[str, ...] | None = None
    batch_size: int = DEFAULT_BATCH_SIZE
    iterations: int = DEFAULT_ITERATIONS
    rhos: tuple[float, ...] = (DEFAULT_RHO,)
    cost_structures: tuple[tuple[str, CostStructure], ...] = (
        ("uniform", UNIFORM_COST),
        ("expensive", EXPENSIVE_COST),
    )
    rng_seed: int = 0
    output_dir: str = "out"
    raw: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class RunSpec:
    run_id: str
    dataset: str
    topic_id: str
    strategy: str
    variant: ClassifierVariant
    seed: int


def _require(obj: Mapping, key: str, loc: str) -> Any:
    if key not in obj:
        raise ConfigError(f"{loc}.{key}: missing required key")
    return obj[key]


def _check_keys(obj: Mapping, allowed: set[str], loc: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{loc}.{unknown[0]}: unknown key")


def _as_type(value: Any, types, loc: str, what: str) -> Any:
    type_tuple = types if isinstance(types, tuple) else (types,)
    if isinstance(value, bool) and bool not in type_tuple:
        raise ConfigError(f"{loc}: expected {what}, got {value!r}")
    if not isinstance(value, types):
        raise ConfigError(f"{loc}: expected {what}, got {value!r}")
    return value


def _parse_dataset(obj: Any, loc: str) -> DatasetSpec:
    if not isinstance(obj, dict):
        raise ConfigError(f"{loc}: expected an object")
    _check_keys(
        obj,
        {"name", "corpus", "qrels", "dedup", "downsample", "pool_scope"},
        loc,
    )
    corpus_path = _as_type(_require(obj, "corpus", loc), str, f"{loc}.corpus", "a path string")
    qrels_path = _as_type(_require(obj, "qrels", loc), str, f"{loc}.qrels", "a path string")
    name = obj.get("name") or Path(corpus_path).stem
    rate, seed = None, 0
    if "downsample" in obj:
        ds = obj["downsample"]
        if not isinstance(ds, dict):
            raise ConfigError(f"{loc}.downsample: expected an object")
        _check_keys(ds, {"rate", "seed"}, f"{loc}.downsample")
        rate = _as_type(_require(ds, "rate", f"{loc}.downsample"), (int, float),
                        f"{loc}.downsample.rate", "a number")
        if not 0 < rate <= 1:
            raise ConfigError(f"{loc}.downsample.rate: must be in (0, 1], got {rate}")
        seed = _as_type(ds.get("seed", 0), int, f"{loc}.downsample.seed", "an integer")
    pool_scope = obj.get("pool_scope", "corpus")
    if pool_scope not in ("corpus", "judged"):
        raise ConfigError(f'{loc}.pool_scope: must be "corpus" or "judged", got {pool_scope!r}')
    dedup_flag = obj.get("dedup", False)
    if not isinstance(dedup_flag, bool):
        raise ConfigError(f"{loc}.dedup: expected true/false")
    return DatasetSpec(
        name=name,
        corpus_path=corpus_path,
        qrels_path=qrels_path,
        dedup=dedup_flag,
        downsample_rate=float(rate) if rate is not None else None,
        downsample_seed=seed,
        pool_scope=pool_scope,
    )


def _parse_classifier(obj: Any, loc: str) -> list[ClassifierVariant]:
    if not isinstance(obj, dict):
        raise ConfigError(f"{loc}: expected an object")
    kind = _require(obj, "kind", loc)
    if kind == "builtin-lr":
        _check_keys(obj, {"kind", "lam", "tol"}, loc)
        lam = _as_type(obj.get("lam", DEFAULT_LAMBDA), (int, float), f"{loc}.lam", "a number")
        tol = _as_type(obj.get("tol", DEFAULT_TOL), (int, float), f"{loc}.tol", "a number")
        if lam <= 0:
            raise ConfigError(f"{loc}.lam: must be positive")
        return [ClassifierVariant(descriptor="builtin-lr", kind=kind, lam=float(lam), tol=float(tol))]
    if kind == "external-plugin":
        _check_keys(
            obj,
            {"kind", "name", "command", "pretrain_epochs", "extra",
             "handshake_timeout", "request_timeout"},
            loc,
        )
        name = _as_type(_require(obj, "name", loc), str, f"{loc}.name", "a string")
        command = _require(obj, "command", loc)
        if not isinstance(command, list) or not command or not all(isinstance(c, str) for c in command):
            raise ConfigError(f"{loc}.command: expected a nonempty list of strings")
        epochs = obj.get("pretrain_epochs", [0])
        if not isinstance(epochs, list) or not epochs or not all(
            isinstance(e, int) and not isinstance(e, bool) and e >= 0 for e in epochs
        ):
            raise ConfigError(f"{loc}.pretrain_epochs: expected a nonempty list of integers >= 0")
        if len(set(epochs)) != len(epochs):
            raise ConfigError(f"{loc}.pretrain_epochs: duplicate values")
        extra = obj.get("extra", {})
        if not isinstance(extra, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in extra.items()
        ):
            raise ConfigError(f"{loc}.extra: expected a string-to-string object")
        hs_timeout = _as_type(obj.get("handshake_timeout", DEFAULT_HANDSHAKE_TIMEOUT),
                              (int, float), f"{loc}.handshake_timeout", "a number")
        rq_timeout = _as_type(obj.get("request_timeout", DEFAULT_REQUEST_TIMEOUT),
                              (int, float), f"{loc}.request_timeout", "a number")
        return [
            ClassifierVariant(
                descriptor=name,
                kind=kind,
                pretrain_epochs=e,
                command=tuple(command),
                extra=dict(extra),
                handshake_timeout=float(hs_timeout),
                request_timeout=float(rq_timeout),
            )
            for e in epochs
        ]
    raise ConfigError(f'{loc}.kind: must be "builtin-lr" or "external-plugin", got {kind!r}')


def parse_config(raw: dict, base_dir: Path | None = None) -> RunConfig:
    """Validate a parsed JSON config and apply defaults.

    Relative dataset paths are resolved against base_dir (the config
    file's directory) when given.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    _check_keys(
        raw,
        {"dataset", "topics", "strategies", "classifiers", "batch_size",
         "iterations", "rho", "cost_structures", "rng_seed", "output_dir"},
        "config",
    )
    dataset = _parse_dataset(_require(raw, "dataset", "config"), "config.dataset")
    if base_dir is not None:
        dataset = DatasetSpec(
            name=dataset.name,
            corpus_path=str((base_dir / dataset.corpus_path).resolve()),
            qrels_path=str((base_dir / dataset.qrels_path).resolve()),
            dedup=dataset.dedup,
            downsample_rate=dataset.downsample_rate,
            downsample_seed=dataset.downsample_seed,
            pool_scope=dataset.pool_scope,
        )

    strategies = _require(raw, "strategies", "config")
    if not isinstance(strategies, list) or not strategies:
        raise ConfigError("config.strategies: expected a nonempty list")
    for s in strategies:
        if s not in STRATEGIES:
            raise ConfigError(f"config.strategies: unknown strategy {s!r}")
    if len(set(strategies)) != len(strategies):
        raise ConfigError("config.strategies: duplicate values")

    classifier_list = _require(raw, "classifiers", "config")
    if not isinstance(classifier_list, list) or not classifier_list:
        raise ConfigError("config.classifiers: expected a nonempty list")
    variants: list[ClassifierVariant] = []
    for i, entry in enumerate(classifier_list):
        variants.extend(_parse_classifier(entry, f"config.classifiers[{i}]"))
    seen = set()
    for v in variants:
        key = (v.descriptor, v.pretrain_epochs)
        if key in seen:
            raise ConfigError(f"config.classifiers: duplicate variant {v.descriptor}/{v.epoch_label}")
        seen.add(key)

    topics = raw.get("topics")
    if topics is not None:
        if not isinstance(topics, list) or not all(isinstance(t, str) for t in topics):
            raise ConfigError("config.topics: expected a list of strings")
        if len(set(topics)) != len(topics):
            raise ConfigError("config.topics: duplicate values")

    batch_size = _as_type(raw.get("batch_size", DEFAULT_BATCH_SIZE), int,
                          "config.batch_size", "an integer")
    if batch_size <= 0:
        raise ConfigError("config.batch_size: must be positive")
    iterations = _as_type(raw.get("iterations", DEFAULT_ITERATIONS), int,
                          "config.iterations", "an integer")
    if iterations < 1:
        raise ConfigError("config.iterations: must be >= 1")

    rhos = raw.get("rho", [DEFAULT_RHO])
    if isinstance(rhos, (int, float)) and not isinstance(rhos, bool):
        rhos = [rhos]
    if not isinstance(rhos, list) or not rhos or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) and 0 < x <= 1 for x in rhos
    ):
        raise ConfigError("config.rho: expected numbers in (0, 1]")

    structures: list[tuple[str, CostStructure]] = list(_PRESET_STRUCTURES.items())
    if "cost_structures" in raw:
        extra_cs = raw["cost_structures"]
        if not isinstance(extra_cs, dict):
            raise ConfigError("config.cost_structures: expected an object of name -> 4 coefficients")
        for cs_name, coeffs in extra_cs.items():
            if cs_name in _PRESET_STRUCTURES:
                continue  # presets are always present and fixed
            if (
                not isinstance(coeffs, list)
                or len(coeffs) != 4
                or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in coeffs)
            ):
                raise ConfigError(f"config.cost_structures.{cs_name}: expected 4 numbers")
            try:
                structures.append((cs_name, CostStructure(*coeffs)))
            except ValueError as exc:
                raise ConfigError(f"config.cost_structures.{cs_name}: {exc}") from exc

    rng_seed = _as_type(raw.get("rng_seed", 0), int, "config.rng_seed", "an integer")
    output_dir = _as_type(raw.get("output_dir", "out"), str, "config.output_dir", "a string")
    if base_dir is not None and not Path(output_dir).is_absolute():
        output_dir = str(base_dir / output_dir)

    return RunConfig(
        dataset=dataset,
        strategies=tuple(strategies),
        classifiers=tuple(variants),
        topics=tuple(topics) if topics is not None else None,
        batch_size=batch_size,
        iterations=iterations,
        rhos=tuple(float(x) for x in rhos),
        cost_structures=tuple(structures),
        rng_seed=rng_seed,
        output_dir=output_dir,
        raw=raw,
    )


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a JSON config file; paths resolve relative to it."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    config = parse_config(raw, base_dir=path.parent)
    for p, key in ((config.dataset.corpus_path, "corpus"), (config.dataset.qrels_path, "qrels")):
        if not Path(p).is_file():
            raise ConfigError(f"config.dataset.{key}: file not found: {p}")
    return config


@dataclass
class LoadedDataset:
    spec: DatasetSpec
    corpus: Corpus
    qrels: dict[str, dict[str, int]]
    tasks: dict[str, TopicTask]


def restrict_qrels(
    qrels: Mapping[str, Mapping[str, int]], corpus: Corpus
) -> dict[str, dict[str, int]]:
    """Drop judgments for documents no longer in the (processed) corpus."""
    return {
        topic: {d: y for d, y in judgments.items() if d in corpus}
        for topic, judgments in qrels.items()
    }


def load_dataset(spec: DatasetSpec, topics: Sequence[str] | None = None) -> LoadedDataset:
    """Load, preprocess, and build the per-topic tasks for one dataset.

    With topics=None every topic that still has at least one relevant
    document after preprocessing becomes a task; explicitly requested
    topics must be valid and raise otherwise.
    """
    corpus = load_corpus(spec.corpus_path)
    if spec.dedup:
        corpus = dedup(corpus)
    if spec.downsample_rate is not None and spec.downsample_rate < 1.0:
        corpus = downsample(corpus, spec.downsample_rate, spec.downsample_seed)
    qrels = restrict_qrels(load_qrels(spec.qrels_path), corpus)

    tasks: dict[str, TopicTask] = {}
    if topics is None:
        for topic_id in sorted(qrels):
            judgments = qrels[topic_id]
            if not any(y == 1 for y in judgments.values()):
                log.warning("topic %s has no surviving relevant documents; skipped", topic_id)
                continue
            tasks[topic_id] = build_topic_task(corpus, topic_id, qrels, pool_scope=spec.pool_scope)
    else:
        for topic_id in topics:
            tasks[topic_id] = build_topic_task(corpus, topic_id, qrels, pool_scope=spec.pool_scope)
    return LoadedDataset(spec=spec, corpus=corpus, qrels=qrels, tasks=tasks)


def expand_matrix(config: RunConfig, dataset: LoadedDataset | None = None) -> list[RunSpec]:
    """Topics x strategies x classifier variants, with derived per-run seeds."""
    if dataset is None:
        dataset = load_dataset(config.dataset, config.topics)
    runs = []
    for topic_id in sorted(dataset.tasks):
        for strategy in config.strategies:
            for variant in config.classifiers:
                run_id = "/".join(
                    [config.dataset.name, topic_id, strategy, variant.descriptor, variant.epoch_label]
                )
                runs.append(
                    RunSpec(
                        run_id=run_id,
                        dataset=config.dataset.name,
                        topic_id=topic_id,
                        strategy=strategy,
                        variant=variant,
                        seed=derive_seed(config.rng_seed, run_id),
                    )
                )
    if not runs:
        raise ConfigError("empty run matrix: no valid topics")
    return runs


def _safe_segment(segment: str) -> str:
    return "".join(c if c.isalnum() or c in "._-" else "_" for c in segment) or "_"


def run_directory(output_dir: str | Path, run_id: str) -> Path:
    return Path(output_dir).joinpath(*(_safe_segment(s) for s in run_id.split("/")))


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def trace_columns(config: RunConfig) -> list[str]:
    cols = ["iteration", "n_reviewed", "t_p", "t_n", "r_precision", "m_p_u80", "m_n_u80",
            "cost_uniform", "cost_expensive"]
    for name, _ in config.cost_structures:
        if name not in ("uniform", "expensive"):
            cols.append(f"cost_{name}")
    for rho in config.rhos:
        if rho != DEFAULT_RHO:
            pct = f"{rho * 100:g}".replace(".", "_")
            cols.extend([f"m_p_u{pct}", f"m_n_u{pct}"])
    return cols


def write_trace(path: Path, config: RunConfig, result: RunResult) -> None:
    rows = []
    for outcome in result.iterations:
        rec = outcome.record
        row = [
            rec.iteration,
            rec.t_p + rec.t_n,
            rec.t_p,
            rec.t_n,
            outcome.r_precision,
            outcome.second_phase[DEFAULT_RHO][0],
            outcome.second_phase[DEFAULT_RHO][1],
            outcome.costs[UNIFORM_COST].total,
            outcome.costs[EXPENSIVE_COST].total,
        ]
        for name, cs in config.cost_structures:
            if name not in ("uniform", "expensive"):
                row.append(outcome.costs[cs].total)
        for rho in config.rhos:
            if rho != DEFAULT_RHO:
                row.extend(outcome.second_phase[rho])
        rows.append(row)
    _write_csv(path, trace_columns(config), rows)


def _execute_one(
    run: RunSpec,
    config: RunConfig,
    dataset: LoadedDataset,
    features_cache: Mapping[str, TopicFeatures],
    pool_files: Mapping[str, Path],
    timer: Callable[[], float],
) -> dict:
    task = dataset.tasks[run.topic_id]
    started = timer()
    variant = run.variant
    extra_rhos = tuple(x for x in config.rhos if x != DEFAULT_RHO)
    kwargs = dict(
        strategy=run.strategy,
        batch_size=config.batch_size,
        iterations=config.iterations,
        rho=DEFAULT_RHO,
        extra_rhos=extra_rhos,
        cost_structures=tuple(cs for _, cs in config.cost_structures),
        classifier_desc=variant.descriptor,
        pretrain_epochs=variant.pretrain_epochs,
    )
    if variant.is_baseline:
        features = features_cache.get(run.topic_id) or TopicFeatures(dataset.corpus, task)
        scorer = LrScorer(features, lam=variant.lam, tol=variant.tol)
        result = run_topic(task, scorer, **kwargs)
    else:
        spec = PluginSpec(
            command=variant.command,
            pretrain_epochs=variant.pretrain_epochs or 0,
            extra={**variant.extra, "seed": str(run.seed)},
        )
        with open_plugin(
            spec,
            str(pool_files[run.topic_id]),
            handshake_timeout=variant.handshake_timeout,
            request_timeout=variant.request_timeout,
        ) as session:
            result = run_topic(task, PluginScorer(session), **kwargs)
    elapsed = timer() - started

    run_dir = run_directory(config.output_dir, run.run_id)
    run_dir.mkdir(parents=True, exist_ok=True)
    write_trace(run_dir / "trace.csv", config, result)
    structures = dict(config.cost_structures)
    record = {
        "run_id": run.run_id,
        "dataset": run.dataset,
        "topic": run.topic_id,
        "strategy": run.strategy,
        "classifier": variant.descriptor,
        "pretrain_epochs": variant.pretrain_epochs,
        "batch_size": config.batch_size,
        "iterations": config.iterations,
        "rho": DEFAULT_RHO,
        "seed": run.seed,
        "R": task.R,
        "pool_size": len(task.doc_ids),
        "final_r_precision": result.final_r_precision,
        "min_costs": {name: result.min_costs[cs] for name, cs in structures.items()},
        "wall_clock_seconds": elapsed,
    }
    with open(run_dir / "run.json", "w", encoding="utf-8") as f:
        json.dump(record, f, indent=2, sort_keys=True)
        f.write("\n")
    log.info("run %s finished in %.2fs", run.run_id, elapsed)
    return record


@dataclass
class ExperimentOutcome:
    records: list[dict]
    failures: list[tuple[str, str]]  # (run_id, error)

    @property
    def ok(self) -> bool:
        return not self.failures


def execute(
    config: RunConfig,
    parallelism: int = 1,
    timer: Callable[[], float] = time.perf_counter,
) -> ExperimentOutcome:
    """Run the full matrix and write all output files.

    Individual run failures never abort sibling runs; they are recorded,
    excluded from aggregation, and reflected in the outcome.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    dataset = load_dataset(config.dataset, config.topics)
    runs = expand_matrix(config, dataset)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    # Shared immutable per-topic state, prepared before the worker pool.
    features_cache: dict[str, TopicFeatures] = {}
    pool_files: dict[str, Path] = {}
    for run in runs:
        if run.variant.is_baseline and run.topic_id not in features_cache:
            features_cache[run.topic_id] = TopicFeatures(
                dataset.corpus, dataset.tasks[run.topic_id]
            )
        if not run.variant.is_baseline and run.topic_id not in pool_files:
            pool_files[run.topic_id] = _write_pool_file(out_dir, dataset, run.topic_id)

    records: list[dict] = []
    failures: list[tuple[str, str]] = []

    def _guarded(run: RunSpec) -> None:
        try:
            record = _execute_one(run, config, dataset, features_cache, pool_files, timer)
            records.append(record)
        except Exception as exc:  # noqa: BLE001 - a run failure must not kill siblings
            log.error("run %s failed: %s", run.run_id, exc)
            failures.append((run.run_id, str(exc)))

    if parallelism == 1:
        for run in runs:
            _guarded(run)
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            list(pool.map(_guarded, runs))

    write_aggregates(out_dir, config, records, failures)
    if failures:
        log.error("%d of %d runs failed", len(failures), len(runs))
    return ExperimentOutcome(records=records, failures=failures)


def _write_pool_file(out_dir: Path, dataset: LoadedDataset, topic_id: str) -> Path:
    pools_dir = out_dir / "_pools"
    pools_dir.mkdir(parents=True, exist_ok=True)
    path = pools_dir / f"{_safe_segment(topic_id)}.jsonl"
    task = dataset.tasks[topic_id]
    with open(path, "w", encoding="utf-8") as f:
        for doc_id in task.doc_ids:
            doc = dataset.corpus[doc_id]
            f.write(json.dumps({"doc_id": doc.doc_id, "text": doc.text}) + "\n")
    return path


def write_aggregates(
    out_dir: Path,
    config: RunConfig,
    records: Sequence[dict],
    failures: Sequence[tuple[str, str]] = (),
) -> None:
    """summary.csv, significance.csv, bins.csv, relative_costs.csv, meta.json."""
    records = sorted(records, key=lambda r: r["run_id"])
    summary_rows = []
    for rec in records:
        summary_rows.append([
            rec["run_id"],
            rec["topic"],
            rec["strategy"],
            rec["classifier"],
            rec["pretrain_epochs"],
            rec["final_r_precision"],
            rec["min_costs"]["uniform"],
            rec["min_costs"]["expensive"],
            rec["wall_clock_seconds"],
        ])
    for run_id, _error in sorted(failures):
        parts = run_id.split("/")
        topic = parts[1] if len(parts) > 1 else ""
        strategy = parts[2] if len(parts) > 2 else ""
        classifier = parts[3] if len(parts) > 3 else ""
        epochs = parts[4] if len(parts) > 4 else ""
        summary_rows.append([
            run_id, topic, strategy, classifier,
            None if epochs == "na" else epochs,
            None, None, None, None,
        ])
    summary_rows.sort(key=lambda row: row[0])
    _write_csv(out_dir / "summary.csv", SUMMARY_COLUMNS, summary_rows)

    if failures:
        _write_csv(out_dir / "failures.csv", ["run_id", "error"], sorted(failures))

    metrics = {
        "r_precision": lambda rec: rec["final_r_precision"],
        "min_cost_uniform": lambda rec: rec["min_costs"]["uniform"],
        "min_cost_expensive": lambda rec: rec["min_costs"]["expensive"],
    }

    by_group: dict[tuple, dict[str, dict]] = {}
    for rec in records:
        key = (rec["dataset"], rec["strategy"], rec["classifier"], rec["pretrain_epochs"])
        by_group.setdefault(key, {})[rec["topic"]] = rec

    datasets = sorted({rec["dataset"] for rec in records})
    strategies = sorted({rec["strategy"] for rec in records})
    variant_keys = sorted(
        {(rec["classifier"], rec["pretrain_epochs"]) for rec in records},
        key=lambda ce: (ce[0], -1 if ce[1] is None else ce[1]),
    )

    significance_rows = []
    relative_rows = []
    bins_rows = []
    for ds in datasets:
        for strategy in strategies:
            baseline_recs = by_group.get((ds, strategy, "builtin-lr", None), {})
            candidates = [
                (c, e) for c, e in variant_keys
                if (ds, strategy, c, e) in by_group and not (c == "builtin-lr" and e is None)
            ]
            family_size = len(candidates)
            for classifier_name, epochs in ([("builtin-lr", None)] if baseline_recs else []) + candidates:
                group = by_group[(ds, strategy, classifier_name, epochs)]
                if not baseline_recs:
                    continue
                common = sorted(set(group) & set(baseline_recs))
                if not common:
                    continue
                for metric_name, getter in metrics.items():
                    if metric_name == "r_precision":
                        continue
                    cand_costs = {t: getter(group[t]) for t in common}
                    base_costs = {t: getter(baseline_recs[t]) for t in common}
                    try:
                        rel = relative_cost(cand_costs, base_costs)
                        rel_pooled = relative_cost_ratio_of_sums(cand_costs, base_costs)
                    except ValueError:
                        continue
                    relative_rows.append([
                        ds, strategy, classifier_name, epochs,
                        metric_name.removeprefix("min_cost_"),
                        rel, rel_pooled, len(common),
                    ])
                if (classifier_name, epochs) == ("builtin-lr", None):
                    continue
                if len(common) < 2:
                    continue
                for metric_name, getter in metrics.items():
                    sample = PairedSample(
                        topics=tuple(common),
                        candidate=tuple(getter(group[t]) for t in common),
                        baseline=tuple(getter(baseline_recs[t]) for t in common),
                    )
                    try:
                        t_stat, p = paired_t_test(sample)
                    except ValueError as exc:
                        log.warning(
                            "t-test skipped for %s/%s/%s/%s %s: %s",
                            ds, strategy, classifier_name, epochs, metric_name, exc,
                        )
                        continue
                    p_adj = bonferroni(p, family_size)
                    significance_rows.append([
                        ds, strategy, metric_name, classifier_name, epochs,
                        t_stat, p, p_adj, family_size,
                        "yes" if p_adj < 0.05 else "no",
                    ])

            # Difficulty/prevalence bins need per-topic R; carried in records.
            if baseline_recs:
                topic_rs = sorted(
                    {(rec["topic"], rec["R"]) for rec in baseline_recs.values()}
                )
                bins = assign_bins(topic_rs)
                for classifier_name, epochs in candidates:
                    group = by_group[(ds, strategy, classifier_name, epochs)]
                    common = sorted(set(group) & set(baseline_recs))
                    cells: dict[tuple[str, str], list[str]] = {}
                    for t in common:
                        cells.setdefault(bins[t], []).append(t)
                    for (difficulty, prevalence), members in sorted(cells.items()):
                        for metric_name in ("min_cost_uniform", "min_cost_expensive"):
                            getter = metrics[metric_name]
                            try:
                                rel = relative_cost(
                                    {t: getter(group[t]) for t in members},
                                    {t: getter(baseline_recs[t]) for t in members},
                                )
                            except ValueError:
                                continue
                            bins_rows.append([
                                ds, difficulty, prevalence, strategy,
                                classifier_name, epochs,
                                metric_name.removeprefix("min_cost_"),
                                len(members), rel,
                            ])

    _write_csv(out_dir / "significance.csv", SIGNIFICANCE_COLUMNS, significance_rows)
    _write_csv(out_dir / "bins.csv", BINS_COLUMNS, bins_rows)
    _write_csv(out_dir / "relative_costs.csv", RELATIVE_COLUMNS, relative_rows)
    meta = {
        "code_version": __version__,
        "rng_algorithm": RNG_ALGORITHM,
        "config": config.raw,
        "bonferroni_family": "non-baseline variants within one (dataset, strategy, metric) table",
    }
    with open(out_dir / "meta.json", "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def report(out_dir: str | Path) -> None:
    """Regenerate the summary tables from persisted run.json + trace files."""
    out_dir = Path(out_dir)
    meta_path = out_dir / "meta.json"
    if not meta_path.is_file():
        raise FileNotFoundError(f"{meta_path}: not an experiment output directory")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    config = parse_config(meta["config"])
    records = []
    for run_json in sorted(out_dir.rglob("run.json")):
        record = json.loads(run_json.read_text(encoding="utf-8"))
        trace_path = run_json.parent / "trace.csv"
        with open(trace_path, encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            trace_rows = list(reader)
        for name in record["min_costs"]:
            column = f"cost_{name}"
            if trace_rows and column in trace_rows[0]:
                recomputed = min(float(row[column]) for row in trace_rows)
                record["min_costs"][name] = recomputed
        record["final_r_precision"] = (
            float(trace_rows[-1]["r_precision"]) if trace_rows else record["final_r_precision"]
        )
        records.append(record)
    if not records:
        raise FileNotFoundError(f"{out_dir}: no run.json files found")
    write_aggregates(out_dir, config, records)
