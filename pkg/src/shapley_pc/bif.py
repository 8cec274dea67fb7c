"""Reader, writer and forward sampler for discrete networks in BIF format.

Supported grammar (the subset used by the bnlearn repository)::

    network NAME { property ...; }
    variable NAME { type discrete [ K ] { s1, ..., sK }; property ...; }
    probability ( CHILD | P1, ..., Pm ) {
        table p, ...;                 (roots, or full table with CHILD slowest)
        (a1, ..., am) p1, ..., pK;    (one row per parent configuration)
        default p1, ..., pK;          (rows not listed explicitly)
    }

``//`` and ``/* */`` comments are skipped.  Any other top-level block is an
error.
"""

from __future__ import annotations

import gzip
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .citest import DegenerateColumnError
from .graph import CycleError, Dag, build_dag, topological_order
from .simulate import Dataset, standardize

ROW_TOL = 1e-6

TABLE1_NETWORKS = (
    "cancer",
    "earthquake",
    "survey",
    "asia",
    "sachs",
    "alarm",
    "child",
    "insurance",
    "hailfinder",
    "hepar2",
)


class BifError(ValueError):
    pass


class ParseError(BifError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class SemanticError(BifError):
    pass


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<string>"[^"]*")
  | (?P<punct>[{}()\[\]|,;])
  | (?P<word>[^\s{}()\[\]|,;"]+)
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind in ("word", "punct", "string"):
            value = chunk[1:-1] if kind == "string" else chunk
            toks.append(_Tok("word" if kind == "string" else kind, value, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Tok | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else _Tok("eof", "", 1, 1)
            raise ParseError("unexpected end of input", last.line, last.col)
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text or tok.kind == "word" and text in "{}()[]|,;":
            raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def word(self) -> _Tok:
        tok = self.next()
        if tok.kind != "word":
            raise ParseError(f"expected a name, found {tok.text!r}", tok.line, tok.col)
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.text == text

    def skip_until_semicolon(self) -> None:
        while not self.at(";"):
            self.next()
        self.next()

    def number_list(self) -> list[float]:
        vals = []
        while True:
            tok = self.word()
            try:
                vals.append(float(tok.text))
            except ValueError:
                raise ParseError(f"expected a number, found {tok.text!r}", tok.line, tok.col) from None
            if self.at(","):
                self.next()
                continue
            self.expect(";")
            return vals

    def name_list(self, close: str) -> list[str]:
        names = [self.word().text]
        while self.at(","):
            self.next()
            names.append(self.word().text)
        self.expect(close)
        return names


@dataclass
class DiscreteBayesNet:
    """Discrete Bayesian network.

    ``cpts[v]`` has shape ``(prod(parent cards), card(v))``; parent
    configurations are enumerated with the first parent varying slowest.
    """

    names: list[str]
    states: list[list[str]]
    parents: list[list[int]]
    cpts: list[np.ndarray]
    name: str = "unknown"
    _dag: Dag | None = field(default=None, repr=False, compare=False)

    @property
    def num_nodes(self) -> int:
        return len(self.names)

    @property
    def cards(self) -> list[int]:
        return [len(s) for s in self.states]

    def index(self, name: str) -> int:
        return self.names.index(name)

    def dag(self) -> Dag:
        if self._dag is None:
            edges = [(p, v) for v, ps in enumerate(self.parents) for p in ps]
            self._dag = build_dag(self.num_nodes, edges)
        return self._dag

    @property
    def num_edges(self) -> int:
        return sum(len(p) for p in self.parents)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, DiscreteBayesNet)
            and self.names == other.names
            and self.states == other.states
            and self.parents == other.parents
            and all(np.array_equal(a, b) for a, b in zip(self.cpts, other.cpts))
        )


def parse_bif(text: str) -> DiscreteBayesNet:
    """Parse BIF text into a :class:`DiscreteBayesNet`.

    Raises
    ------
    ParseError
        Malformed syntax; carries the line and column.
    SemanticError
        Unknown variables or states, incomplete or non-normalised tables,
        cycles.
    """
    ps = _Parser(text)
    net_name = "unknown"
    names: list[str] = []
    states: dict[str, list[str]] = {}
    prob_blocks: dict[str, tuple[list[str], dict]] = {}
    while ps.peek() is not None:
        tok = ps.word()
        if tok.text == "network":
            net_name = ps.word().text
            ps.expect("{")
            while not ps.at("}"):
                kw = ps.word()
                if kw.text != "property":
                    raise ParseError(f"unexpected {kw.text!r} in network block", kw.line, kw.col)
                ps.skip_until_semicolon()
            ps.expect("}")
        elif tok.text == "variable":
            name_tok = ps.word()
            if name_tok.text in states:
                raise SemanticError(f"variable {name_tok.text!r} declared twice")
            ps.expect("{")
            labels = None
            while not ps.at("}"):
                kw = ps.word()
                if kw.text == "property":
                    ps.skip_until_semicolon()
                elif kw.text == "type":
                    vtype = ps.word()
                    if vtype.text != "discrete":
                        raise SemanticError(f"variable {name_tok.text!r}: only discrete variables are supported")
                    ps.expect("[")
                    k_tok = ps.word()
                    ps.expect("]")
                    ps.expect("{")
                    labels = ps.name_list("}")
                    ps.expect(";")
                    if not k_tok.text.isdigit() or int(k_tok.text) != len(labels):
                        raise SemanticError(
                            f"variable {name_tok.text!r} declares {k_tok.text} states but lists {len(labels)}"
                        )
                    if len(set(labels)) != len(labels):
                        raise SemanticError(f"variable {name_tok.text!r} has repeated state labels")
                else:
                    raise ParseError(f"unexpected {kw.text!r} in variable block", kw.line, kw.col)
            ps.expect("}")
            if labels is None:
                raise SemanticError(f"variable {name_tok.text!r} has no type declaration")
            names.append(name_tok.text)
            states[name_tok.text] = labels
        elif tok.text == "probability":
            ps.expect("(")
            child = ps.word().text
            parents: list[str] = []
            if ps.at("|"):
                ps.next()
                parents = ps.name_list(")")
            else:
                ps.expect(")")
            if child in prob_blocks:
                raise SemanticError(f"two probability blocks for {child!r}")
            body: dict = {"rows": [], "table": None, "default": None}
            ps.expect("{")
            while not ps.at("}"):
                head = ps.next()
                if head.text == "(" and head.kind == "punct":
                    combo = ps.name_list(")")
                    body["rows"].append((combo, ps.number_list(), head))
                elif head.text == "table":
                    body["table"] = ps.number_list()
                elif head.text == "default":
                    body["default"] = ps.number_list()
                elif head.text == "property":
                    ps.skip_until_semicolon()
                else:
                    raise ParseError(f"unexpected {head.text!r} in probability block", head.line, head.col)
            ps.expect("}")
            prob_blocks[child] = (parents, body)
        else:
            raise ParseError(f"unknown block {tok.text!r}", tok.line, tok.col)
    return _resolve(net_name, names, states, prob_blocks)


def _resolve(net_name, names, states, prob_blocks) -> DiscreteBayesNet:
    index = {n: i for i, n in enumerate(names)}
    for child in prob_blocks:
        if child not in index:
            raise SemanticError(f"probability block for undeclared variable {child!r}")
    parents_idx: list[list[int]] = []
    cpts: list[np.ndarray] = []
    for name in names:
        if name not in prob_blocks:
            raise SemanticError(f"no probability block for {name!r}")
        pnames, body = prob_blocks[name]
        for p in pnames:
            if p not in index:
                raise SemanticError(f"{name!r} has unknown parent {p!r}")
        if len(set(pnames)) != len(pnames) or name in pnames:
            raise SemanticError(f"{name!r} has an invalid parent list")
        card = len(states[name])
        pcards = [len(states[p]) for p in pnames]
        n_rows = int(np.prod(pcards)) if pcards else 1
        cpt = np.full((n_rows, card), np.nan)
        if body["table"] is not None:
            vals = np.asarray(body["table"], dtype=float)
            if vals.size != n_rows * card:
                raise SemanticError(f"table for {name!r} has {vals.size} entries, expected {n_rows * card}")
            cpt[:] = vals.reshape(card, n_rows).T
        for combo, probs, tok in body["rows"]:
            if len(combo) != len(pnames):
                raise SemanticError(f"row for {name!r} at line {tok.line} names {len(combo)} parent states")
            row = 0
            for p, label in zip(pnames, combo):
                if label not in states[p]:
                    raise SemanticError(f"unknown state {label!r} of {p!r} at line {tok.line}")
                row = row * len(states[p]) + states[p].index(label)
            if len(probs) != card:
                raise SemanticError(f"row for {name!r} at line {tok.line} has {len(probs)} values, expected {card}")
            if not np.all(np.isnan(cpt[row])):
                raise SemanticError(f"parent configuration {combo} of {name!r} given twice")
            cpt[row] = probs
        if body["default"] is not None:
            if len(body["default"]) != card:
                raise SemanticError(f"default row for {name!r} has the wrong length")
            missing = np.isnan(cpt).any(axis=1)
            cpt[missing] = body["default"]
        if np.isnan(cpt).any():
            raise SemanticError(f"probability table of {name!r} is incomplete")
        if np.any(cpt < 0):
            raise SemanticError(f"negative probability in table of {name!r}")
        sums = cpt.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_TOL):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise SemanticError(f"row {bad} of {name!r} sums to {sums[bad]:.9g}, not 1")
        parents_idx.append([index[p] for p in pnames])
        cpts.append(cpt)
    net = DiscreteBayesNet(list(names), [list(states[n]) for n in names], parents_idx, cpts, net_name)
    try:
        net.dag()
    except CycleError as exc:
        raise SemanticError("network structure contains a directed cycle") from exc
    return net


def format_bif(net: DiscreteBayesNet) -> str:
    """Serialise ``net`` in the same BIF subset :func:`parse_bif` reads."""
    out = [f"network {net.name} {{", "}"]
    for name, labels in zip(net.names, net.states):
        out.append(f"variable {name} {{")
        out.append(f"  type discrete [ {len(labels)} ] {{ {', '.join(labels)} }};")
        out.append("}")
    for v, name in enumerate(net.names):
        ps = net.parents[v]
        fmt = lambda row: ", ".join(repr(float(p)) for p in row)  # noqa: E731
        if not ps:
            out.append(f"probability ( {name} ) {{")
            out.append(f"  table {fmt(net.cpts[v][0])};")
        else:
            out.append(f"probability ( {name} | {', '.join(net.names[p] for p in ps)} ) {{")
            combos = np.array(np.meshgrid(*[range(len(net.states[p])) for p in ps], indexing="ij"))
            combos = combos.reshape(len(ps), -1).T
            for row, combo in enumerate(combos):
                labels = ", ".join(net.states[p][c] for p, c in zip(ps, combo))
                out.append(f"  ({labels}) {fmt(net.cpts[v][row])};")
        out.append("}")
    return "\n".join(out) + "\n"


def read_bif(path: str | Path) -> DiscreteBayesNet:
    path = Path(path)
    raw = path.read_bytes()
    text = gzip.decompress(raw).decode("utf-8") if path.suffix == ".gz" else raw.decode("utf-8")
    return parse_bif(text)


def load_network(name: str) -> DiscreteBayesNet:
    """Load one of the bundled bnlearn networks by (case-insensitive) name."""
    key = name.lower()
    if key not in TABLE1_NETWORKS:
        raise KeyError(f"no bundled network {name!r}; available: {', '.join(TABLE1_NETWORKS)}")
    data = resources.files("shapley_pc").joinpath("networks", f"{key}.bif.gz").read_bytes()
    net = parse_bif(gzip.decompress(data).decode("utf-8"))
    net.name = key
    return net


def resolve_network(name_or_path: str) -> DiscreteBayesNet:
    """A file path, or else the name of a bundled network."""
    path = Path(name_or_path)
    if path.exists():
        return read_bif(path)
    return load_network(name_or_path)


@dataclass
class DiscreteDataset:
    codes: np.ndarray
    names: list[str]
    states: list[list[str]]

    def __post_init__(self) -> None:
        for j, labels in enumerate(self.states):
            col = self.codes[:, j]
            if col.size and (col.min() < 0 or col.max() >= len(labels)):
                raise ValueError(f"column {j} holds an invalid state index")

    def save(self, path: str | Path) -> None:
        np.savetxt(path, self.codes, delimiter=",", fmt="%d")


def sample_bn(net: DiscreteBayesNet, n_samples: int, seed=None) -> DiscreteDataset:
    """Ancestral sampling in topological order."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    codes = np.zeros((n_samples, net.num_nodes), dtype=np.int64)
    for v in topological_order(net.dag()):
        row = np.zeros(n_samples, dtype=np.int64)
        for p in net.parents[v]:
            row = row * len(net.states[p]) + codes[:, p]
        cum = np.cumsum(net.cpts[v], axis=1)
        cum[:, -1] = 1.0
        u = rng.random(n_samples)
        codes[:, v] = (u[:, None] >= cum[row]).sum(axis=1)
    return DiscreteDataset(codes, list(net.names), [list(s) for s in net.states])


def label_codes(dd: DiscreteDataset) -> np.ndarray:
    """Re-code every column so that codes follow lexicographic label order."""
    out = np.empty_like(dd.codes)
    for j, labels in enumerate(dd.states):
        rank = np.empty(len(labels), dtype=np.int64)
        rank[np.argsort(np.array(labels, dtype=object), kind="stable")] = np.arange(len(labels))
        out[:, j] = rank[dd.codes[:, j]]
    return out


def encode_standardize(dd: DiscreteDataset) -> Dataset:
    codes = label_codes(dd)
    for j in range(codes.shape[1]):
        if np.unique(codes[:, j]).size < 2:
            raise DegenerateColumnError(f"column {dd.names[j]!r} has a single observed state")
    return standardize(Dataset(codes.astype(float), list(dd.names)))
