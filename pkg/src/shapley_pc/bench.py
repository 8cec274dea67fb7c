"""Seeded benchmark suites: synthetic ER/SEM sweeps and bnlearn networks.

Every replicate derives its randomness from ``seed + replicate`` so any row
of a results file can be regenerated on its own.  Results are written by a
single writer in (config, replicate) order, whatever the worker count.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .bif import DiscreteBayesNet, encode_standardize, resolve_network, sample_bn
from .graph import Dag, MixedGraph, write_edge_list
from .metrics import MetricRow, evaluate, saturation
from .pc import run_pc
from .shapley import DecisionRule, SpcConfig
from .simulate import SEM_KINDS, er_dag, sem_class, simulate, standardize

logger = logging.getLogger(__name__)

RULES = tuple(r.value for r in DecisionRule) + ("random",)

CONFIG_COLUMNS = [
    "config_id",
    "dataset",
    "n_nodes",
    "density",
    "zeta",
    "sem",
    "s",
    "n_samples",
    "alpha",
    "rule",
    "oracle",
    "replicate",
    "seed",
]
RESULT_COLUMNS = CONFIG_COLUMNS + MetricRow.FIELDS + ["num_tests", "elapsed", "error"]
TIME_COLUMN = "elapsed"
SWEEPABLE = ("n_nodes", "density", "sem", "s", "alpha", "rule")


class EmptyResultsError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n_nodes: int = 10
    density: float = 1
    sem: str = "gauss"
    s: int = 50
    alpha: float = 0.01
    rule: str = "spc"
    reps: int = 10
    seed: int = 0
    oracle: bool = False
    standardize: bool = True
    spc_selection: str = "threshold"
    tau: float = 0.0
    require_negative_siv: bool = True
    maxpc_prefer_without_middle: bool = True

    def __post_init__(self) -> None:
        if self.sem not in SEM_KINDS:
            raise ValueError(f"unknown sem {self.sem!r}; expected one of {SEM_KINDS}")
        if self.rule.lower() not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}; expected one of {RULES}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.reps < 1 or self.s < 1 or self.n_nodes < 2:
            raise ValueError("reps, s must be positive and n_nodes at least 2")

    @property
    def n_samples(self) -> int:
        return self.s * self.n_nodes

    @property
    def spc_config(self) -> SpcConfig:
        return SpcConfig(self.spc_selection, self.tau, self.require_negative_siv)


def expand_grid(settings: dict[str, Any]) -> list[ExperimentConfig]:
    """Expand list-valued sweep fields into the Cartesian product of configs."""
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(settings) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    fixed = {k: v for k, v in settings.items() if not (k in SWEEPABLE and isinstance(v, list))}
    swept = [k for k in SWEEPABLE if isinstance(settings.get(k), list)]
    configs = []
    for combo in itertools.product(*(settings[k] for k in swept)):
        configs.append(ExperimentConfig(**fixed, **dict(zip(swept, combo))))
    return configs


def load_config(path: str | Path | None, overrides: dict[str, Any] | None = None) -> list[ExperimentConfig]:
    """Defaults, then the JSON file, then non-None ``overrides``."""
    settings: dict[str, Any] = {}
    if path is not None:
        settings.update(json.loads(Path(path).read_text()))
    for k, v in (overrides or {}).items():
        if v is not None:
            settings[k] = v
    return expand_grid(settings)


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return "NA" if math.isnan(value) else repr(value)
    return str(value)


def _replicate_streams(seed: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


def _blank_metrics() -> dict[str, Any]:
    return {k: float("nan") for k in MetricRow.FIELDS}


def _estimate(source, cfg: ExperimentConfig, truth: Dag, rng: np.random.Generator) -> tuple[MixedGraph, int, float]:
    if cfg.rule.lower() == "random":
        start = time.perf_counter()
        est = er_dag(truth.num_nodes, truth.num_edges / truth.num_nodes, rng)
        return MixedGraph.from_dag(est), 0, time.perf_counter() - start
    res = run_pc(
        source,
        alpha=cfg.alpha,
        rule=cfg.rule,
        spc_config=cfg.spc_config,
        maxpc_prefer_without_middle=cfg.maxpc_prefer_without_middle,
    )
    return res.cpdag, res.num_tests, res.elapsed


def run_replicate(cfg: ExperimentConfig, replicate: int, config_id: str = "c000", graph_dir: str | None = None) -> dict:
    seed = cfg.seed + replicate
    row: dict[str, Any] = {
        "config_id": config_id,
        "dataset": "er",
        "n_nodes": cfg.n_nodes,
        "density": cfg.density,
        "zeta": round(saturation(cfg.n_nodes, cfg.density), 6),
        "sem": cfg.sem,
        "s": cfg.s,
        "n_samples": cfg.n_samples,
        "alpha": cfg.alpha,
        "rule": cfg.rule.lower(),
        "oracle": cfg.oracle,
        "replicate": replicate,
        "seed": seed,
        "num_tests": "",
        "elapsed": "",
        "error": "",
    }
    try:
        g_rng, d_rng, r_rng = _replicate_streams(seed)
        truth = er_dag(cfg.n_nodes, cfg.density, g_rng)
        if cfg.oracle:
            source: Any = truth
        else:
            data = simulate(truth, cfg.sem, cfg.n_samples, d_rng)
            source = (standardize(data) if cfg.standardize else data).values
        est, num_tests, elapsed = _estimate(source, cfg, truth, r_rng)
        row.update(evaluate(est, truth).as_dict())
        row["num_tests"] = num_tests
        row["elapsed"] = elapsed
        if graph_dir is not None:
            stem = Path(graph_dir) / f"{config_id}_rep{replicate:03d}"
            write_edge_list(truth, f"{stem}_truth.txt")
            write_edge_list(est, f"{stem}_est.txt")
    except Exception as exc:  # one bad replicate must not sink the suite
        logger.warning("replicate %s/%d failed: %s", config_id, replicate, exc)
        row.update(_blank_metrics())
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _run_task(args: tuple) -> dict:
    kind = args[0]
    if kind == "er":
        return run_replicate(*args[1:])
    return _bif_replicate(*args[1:])


def _gather(tasks: list[tuple], workers: int) -> list[dict]:
    if workers <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks))


def run_suite(
    configs: ExperimentConfig | Sequence[ExperimentConfig],
    out_dir: str | Path | None = None,
    workers: int = 1,
) -> list[dict]:
    """Run every replicate of every config; persist results when ``out_dir`` is given."""
    if isinstance(configs, ExperimentConfig):
        configs = [configs]
    graph_dir = None
    if out_dir is not None:
        graph_dir = Path(out_dir) / "graphs"
        graph_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        ("er", cfg, rep, f"c{idx:03d}", None if graph_dir is None else str(graph_dir))
        for idx, cfg in enumerate(configs)
        for rep in range(cfg.reps)
    ]
    rows = _gather(tasks, workers)
    if out_dir is not None:
        write_results(rows, Path(out_dir))
        (Path(out_dir) / "config.json").write_text(
            json.dumps([asdict(c) for c in configs], indent=2, sort_keys=True) + "\n"
        )
    return rows


# ---------------------------------------------------------------------------
# bnlearn networks


def _bif_replicate(
    net: DiscreteBayesNet,
    n_samples: int,
    rules: Sequence[str],
    alpha: float,
    seed: int,
    replicate: int,
    spc: SpcConfig,
    graph_dir: str | None,
) -> list[dict]:
    truth = net.dag()
    rows = []
    rep_seed = seed + replicate
    s_rng, r_rng = np.random.default_rng(rep_seed), np.random.default_rng([rep_seed, 1])
    try:
        data = encode_standardize(sample_bn(net, n_samples, s_rng)).values
        data_error = None
    except Exception as exc:
        data, data_error = None, f"{type(exc).__name__}: {exc}"
    density = truth.num_edges / truth.num_nodes
    for rule in rules:
        cfg = ExperimentConfig(
            n_nodes=max(truth.num_nodes, 2),
            density=density,
            alpha=alpha,
            rule=rule,
            reps=1,
            seed=rep_seed,
            spc_selection=spc.selection,
            tau=spc.tau,
            require_negative_siv=spc.require_negative_siv,
        )
        row: dict[str, Any] = {
            "config_id": f"{net.name}",
            "dataset": net.name,
            "n_nodes": truth.num_nodes,
            "density": round(density, 6),
            "zeta": round(saturation(truth.num_nodes, density), 6),
            "sem": "bif",
            "s": "",
            "n_samples": n_samples,
            "alpha": alpha,
            "rule": rule.lower(),
            "oracle": False,
            "replicate": replicate,
            "seed": rep_seed,
            "num_tests": "",
            "elapsed": "",
            "error": "",
        }
        try:
            if data_error is not None:
                raise RuntimeError(data_error)
            est, num_tests, elapsed = _estimate(data, cfg, truth, r_rng)
            row.update(evaluate(est, truth).as_dict())
            row["num_tests"] = num_tests
            row["elapsed"] = elapsed
            if graph_dir is not None:
                stem = Path(graph_dir) / f"{net.name}_{rule.lower()}_rep{replicate:03d}"
                write_edge_list(truth, f"{stem}_truth.txt")
                write_edge_list(est, f"{stem}_est.txt")
        except Exception as exc:
            logger.warning("%s/%s replicate %d failed: %s", net.name, rule, replicate, exc)
            row.update(_blank_metrics())
            row["error"] = f"{type(exc).__name__}: {exc}" if data_error is None else data_error
        rows.append(row)
    return rows


def bif_suite(
    network: str | DiscreteBayesNet,
    n_samples: int = 2000,
    rules: Sequence[str] = ("spc",),
    seed: int = 0,
    reps: int = 1,
    alpha: float = 0.01,
    spc_config: SpcConfig | None = None,
    out_dir: str | Path | None = None,
    workers: int = 1,
) -> list[dict]:
    """Sample a BIF network, label-encode and standardise, run each rule.

    The network is parsed before anything is written, so a malformed file
    leaves no partial output behind.
    """
    net = resolve_network(network) if isinstance(network, str) else network
    for r in rules:
        if r.lower() not in RULES:
            raise ValueError(f"unknown rule {r!r}")
    spc_config = spc_config or SpcConfig()
    graph_dir = None
    if out_dir is not None:
        graph_dir = Path(out_dir) / "graphs"
        graph_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        ("bif", net, n_samples, list(rules), alpha, seed, rep, spc_config, None if graph_dir is None else str(graph_dir))
        for rep in range(reps)
    ]
    rows = [row for chunk in _gather(tasks, workers) for row in chunk]
    if out_dir is not None:
        write_results(rows, Path(out_dir))
    return rows


# ---------------------------------------------------------------------------
# persistence and aggregation


def write_results(rows: Iterable[dict], out_dir: Path, stem: str = "results") -> None:
    rows = list(rows)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"{stem}.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in RESULT_COLUMNS])
    with open(out_dir / f"{stem}.json", "w") as fh:
        clean = [{c: _json_value(row.get(c)) for c in RESULT_COLUMNS} for row in rows]
        json.dump(clean, fh, indent=1)
        fh.write("\n")


def _json_value(v: Any) -> Any:
    if isinstance(v, float) and math.isnan(v):
        return None
    if isinstance(v, np.generic):
        return v.item()
    return v


def read_results(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


PLOT_METRICS = ("shd", "nshd", "sid", "nsid", "precision", "recall", "fdr", "tpr", "fpr", "egs", "num_tests", "elapsed")
DEFAULT_GROUP_BY = ("zeta", "sem_class", "rule")


def _as_float(v: Any) -> float:
    if v in (None, "", "NA"):
        return float("nan")
    return float(v)


def emit_plot_data(
    rows: Sequence[dict],
    group_by: Sequence[str] = DEFAULT_GROUP_BY,
    out_path: str | Path | None = None,
) -> list[dict]:
    """Mean and standard deviation of every metric per group.

    ``zeta`` is recomputed from ``n_nodes`` and ``density`` and rounded so
    graphs of different sizes with the same saturation pool together;
    ``sem_class`` is linear, nonlinear or bif.  Undefined values are skipped
    and ``<metric>_n`` records how many entered the mean.
    """
    if not rows:
        raise EmptyResultsError("no results to aggregate")
    enriched = []
    for row in rows:
        r = dict(row)
        r["zeta"] = f"{saturation(int(r['n_nodes']), float(r['density'])):.4f}"
        r["sem_class"] = "bif" if r["sem"] == "bif" else sem_class(r["sem"])
        enriched.append(r)
    for key in group_by:
        if key not in enriched[0]:
            raise KeyError(f"unknown group-by key {key!r}")
    groups: dict[tuple, list[dict]] = {}
    for r in enriched:
        groups.setdefault(tuple(str(r[k]) for k in group_by), []).append(r)
    out = []
    for key in sorted(groups):
        members = groups[key]
        agg: dict[str, Any] = dict(zip(group_by, key))
        agg["count"] = len(members)
        for m in PLOT_METRICS:
            vals = [x for x in (_as_float(r.get(m)) for r in members) if not math.isnan(x)]
            agg[f"{m}_mean"] = statistics.fmean(vals) if vals else float("nan")
            agg[f"{m}_sd"] = statistics.stdev(vals) if len(vals) > 1 else float("nan")
            agg[f"{m}_n"] = len(vals)
        out.append(agg)
    if out_path is not None:
        cols = list(out[0])
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(cols)
            for agg in out:
                writer.writerow([_fmt(agg[c]) for c in cols])
    return out


def strip_time(csv_text: str) -> str:
    """Drop the elapsed-time column from results CSV text (for determinism checks)."""
    lines = csv_text.splitlines()
    idx = lines[0].split(",").index(TIME_COLUMN)
    return "\n".join(",".join(c for n, c in enumerate(next(csv.reader([ln]))) if n != idx) for ln in lines)


__all__ = [
    "CONFIG_COLUMNS",
    "RESULT_COLUMNS",
    "EmptyResultsError",
    "ExperimentConfig",
    "bif_suite",
    "emit_plot_data",
    "expand_grid",
    "load_config",
    "read_results",
    "run_replicate",
    "run_suite",
    "strip_time",
    "write_results",
]
