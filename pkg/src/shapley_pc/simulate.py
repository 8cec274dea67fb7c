"""Synthetic DAGs and additive-noise structural equation models."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .citest import DegenerateColumnError
from .graph import Dag, build_dag, topological_order, write_edge_list

LINEAR_NOISE = ("gauss", "exp", "gumbel", "uniform")
NONLINEAR_KINDS = ("mlp", "mim", "gp", "gp-add")
SEM_KINDS = LINEAR_NOISE + NONLINEAR_KINDS

WEIGHT_RANGE = (0.5, 2.0)
MLP_HIDDEN = 100
GP_JITTER = 1e-8
GP_SAMPLE_CAP = 5000

class TooDenseError(ValueError):
    pass


class SampleCapExceededError(ValueError):
    pass


class NoPathsError(ValueError):
    pass


def sem_class(kind: str) -> str:
    if kind in LINEAR_NOISE:
        return "linear"
    if kind in NONLINEAR_KINDS:
        return "nonlinear"
    raise ValueError(f"unknown SEM kind {kind!r}")


@dataclass
class Dataset:
    values: np.ndarray
    columns: list[str] = field(default_factory=list)
    seed: int | None = None
    kind: str | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise ValueError("dataset needs a 2-D array with at least one row")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("dataset contains non-finite values")
        if not self.columns:
            self.columns = [f"X{j}" for j in range(self.values.shape[1])]

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    def save(self, path: str | Path, graph_file: str | None = None) -> None:
        """Write a headerless CSV plus a ``.json`` sidecar next to it."""
        path = Path(path)
        np.savetxt(path, self.values, delimiter=",", fmt="%.17g")
        meta = {"seed": self.seed, "kind": self.kind, "columns": self.columns, "graph": graph_file}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        path = Path(path)
        values = np.loadtxt(path, delimiter=",", ndmin=2)
        sidecar = path.with_suffix(".json")
        meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
        return cls(values, meta.get("columns") or [], meta.get("seed"), meta.get("kind"))


@dataclass
class LinearSemParams:
    weights: np.ndarray
    noise_kind: str


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def er_dag(num_nodes: int, density: float, seed=None) -> Dag:
    """Erdos-Renyi DAG with exactly ``num_nodes * density`` edges.

    A uniformly random permutation fixes the causal order, then distinct node
    pairs are drawn without replacement and oriented along it.
    """
    num_edges = num_nodes * density
    if abs(num_edges - round(num_edges)) > 1e-9:
        raise ValueError(f"num_nodes * density must be an integer, got {num_edges}")
    num_edges = int(round(num_edges))
    max_edges = num_nodes * (num_nodes - 1) // 2
    if num_edges > max_edges or num_edges < 0:
        raise TooDenseError(f"{num_edges} edges do not fit in a DAG on {num_nodes} nodes")
    rng = _rng(seed)
    order = rng.permutation(num_nodes)
    pairs = list(combinations(range(num_nodes), 2))
    chosen = rng.choice(len(pairs), size=num_edges, replace=False) if num_edges else []
    edges = [(int(order[pairs[t][0]]), int(order[pairs[t][1]])) for t in sorted(chosen)]
    return build_dag(num_nodes, edges)


def sample_weights(g: Dag, seed=None) -> np.ndarray:
    """Edge weights uniform on [-2, -0.5] U [0.5, 2]."""
    rng = _rng(seed)
    n = g.num_nodes
    mag = rng.uniform(*WEIGHT_RANGE, size=(n, n))
    sign = rng.choice([-1.0, 1.0], size=(n, n))
    return np.where(g.adjacency, mag * sign, 0.0)


def sample_noise(kind: str, size: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "gauss":
        return rng.normal(0.0, 1.0, size)
    if kind == "exp":
        return rng.exponential(1.0, size)
    if kind == "gumbel":
        return rng.gumbel(0.0, 1.0, size)
    if kind == "uniform":
        return rng.uniform(-1.0, 1.0, size)
    raise ValueError(f"unknown noise kind {kind!r}; expected one of {LINEAR_NOISE}")


def simulate_linear(
    g: Dag,
    noise_kind: str,
    n_samples: int,
    seed=None,
    weights: np.ndarray | None = None,
) -> tuple[Dataset, LinearSemParams]:
    """Sample ``X = W^T X + u`` column by column in topological order."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    rng = _rng(seed)
    if weights is None:
        weights = sample_weights(g, rng)
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (g.num_nodes,) * 2 or np.any((weights != 0) != g.adjacency):
            raise ValueError("weights must be non-zero exactly on the edges of g")
    x = np.zeros((n_samples, g.num_nodes))
    for j in topological_order(g):
        x[:, j] = x @ weights[:, j] + sample_noise(noise_kind, n_samples, rng)
    seed_tag = seed if isinstance(seed, int) else None
    return Dataset(x, seed=seed_tag, kind=noise_kind), LinearSemParams(weights, noise_kind)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def mlp_function(parents: np.ndarray, w_in: np.ndarray, w_out: np.ndarray) -> np.ndarray:
    return _sigmoid(parents @ w_in) @ w_out


def mim_function(parents: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """``tanh(X t1) + cos(X t2) + sin(X t3)`` for ``theta`` of shape (n_parents, 3)."""
    z = parents @ theta
    return np.tanh(z[:, 0]) + np.cos(z[:, 1]) + np.sin(z[:, 2])


def rbf_kernel(x: np.ndarray, length_scale: float = 1.0) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    sq = np.sum(x**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * x @ x.T, 0.0)
    return np.exp(-0.5 * d2 / length_scale**2)


def _kernel_factor(k: np.ndarray) -> np.ndarray:
    k = k + GP_JITTER * np.eye(len(k))
    try:
        return np.linalg.cholesky(k)
    except np.linalg.LinAlgError:
        # near-duplicate inputs make the Gram matrix rank deficient
        vals, vecs = np.linalg.eigh(k)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def gp_draw(x: np.ndarray, rng: np.random.Generator, length_scale: float = 1.0) -> np.ndarray:
    """One draw of a zero-mean GP with RBF kernel evaluated at the rows of ``x``."""
    factor = _kernel_factor(rbf_kernel(x, length_scale))
    return factor @ rng.standard_normal(len(factor))


def _uniform_signed(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.uniform(*WEIGHT_RANGE, size=shape) * rng.choice([-1.0, 1.0], size=shape)


def simulate_nonlinear(
    g: Dag,
    kind: str,
    n_samples: int,
    seed=None,
    gp_cap: int = GP_SAMPLE_CAP,
    mlp_weight_scale: float = 1.0,
) -> Dataset:
    """Additive-noise SEM ``X_j = f_j(pa(X_j)) + N(0, 1)``.

    kind
        ``"mlp"``: one hidden layer of 100 sigmoid units, weights uniform in
        ``[-mlp_weight_scale, mlp_weight_scale]``;
        ``"mim"``: mixed index model with tanh, cos and sin links;
        ``"gp"``: a joint GP draw over the parents;
        ``"gp-add"``: a sum of independent univariate GP draws, one per parent.
    """
    if kind not in NONLINEAR_KINDS:
        raise ValueError(f"unknown nonlinear kind {kind!r}; expected one of {NONLINEAR_KINDS}")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if kind in ("gp", "gp-add") and n_samples > gp_cap:
        raise SampleCapExceededError(f"{kind} sampling is capped at {gp_cap} rows, got {n_samples}")
    rng = _rng(seed)
    x = np.zeros((n_samples, g.num_nodes))
    for j in topological_order(g):
        pa = sorted(g.parents(j))
        f = np.zeros(n_samples)
        if pa:
            xp = x[:, pa]
            if kind == "mlp":
                w_in = rng.uniform(-mlp_weight_scale, mlp_weight_scale, size=(len(pa), MLP_HIDDEN))
                w_out = rng.uniform(-mlp_weight_scale, mlp_weight_scale, size=MLP_HIDDEN)
                f = mlp_function(xp, w_in, w_out)
            elif kind == "mim":
                f = mim_function(xp, _uniform_signed(rng, (len(pa), 3)))
            elif kind == "gp":
                f = gp_draw(xp, rng)
            else:
                f = sum(gp_draw(xp[:, [c]], rng) for c in range(len(pa)))
        x[:, j] = f + rng.normal(0.0, 1.0, n_samples)
    return Dataset(x, seed=seed if isinstance(seed, int) else None, kind=kind)


def simulate(g: Dag, kind: str, n_samples: int, seed=None) -> Dataset:
    """Dispatch to :func:`simulate_linear` or :func:`simulate_nonlinear` by kind."""
    if kind in LINEAR_NOISE:
        return simulate_linear(g, kind, n_samples, seed)[0]
    return simulate_nonlinear(g, kind, n_samples, seed)


def standardize(ds: Dataset | np.ndarray) -> Dataset:
    """Centre every column and scale it to unit standard deviation (ddof=0)."""
    src = ds if isinstance(ds, Dataset) else Dataset(ds)
    x = src.values
    sd = x.std(axis=0)
    bad = np.flatnonzero(sd == 0)
    if bad.size:
        raise DegenerateColumnError(f"constant column(s): {bad.tolist()}")
    z = (x - x.mean(axis=0)) / sd
    return Dataset(z, list(src.columns), src.seed, src.kind)


def varsortability(ds: Dataset | np.ndarray, g: Dag, tol: float = 1e-9) -> float:
    """Fraction of ancestor/descendant pairs whose variance increases downstream.

    Ties (variance difference within ``tol``) count one half.
    """
    x = ds.values if isinstance(ds, Dataset) else np.asarray(ds, dtype=float)
    var = x.var(axis=0)
    score = 0.0
    count = 0
    for a in range(g.num_nodes):
        for b in g.descendants(a):
            diff = var[b] - var[a]
            score += 0.5 if abs(diff) <= tol else float(diff > 0)
            count += 1
    if count == 0:
        raise NoPathsError("graph has no directed paths")
    return score / count


def save_simulation(ds: Dataset, g: Dag, data_path: str | Path, graph_path: str | Path) -> None:
    write_edge_list(g, graph_path)
    ds.save(data_path, graph_file=str(graph_path))


__all__: list[str] = [
    "Dataset",
    "LinearSemParams",
    "NoPathsError",
    "SampleCapExceededError",
    "TooDenseError",
    "er_dag",
    "gp_draw",
    "mim_function",
    "mlp_function",
    "rbf_kernel",
    "save_simulation",
    "sem_class",
    "simulate",
    "simulate_linear",
    "simulate_nonlinear",
    "standardize",
    "varsortability",
]
