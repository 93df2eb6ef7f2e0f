"""Directed influence graphs: ingestion, neighborhoods, residuals, degree stats.

Node ids are dense integers assigned at load time in first-appearance order;
the original labels are kept in a side table so graphs round-trip through
edge-list text.  Edge ``(u, v)`` carries the probability that ``u`` influences
``v``; inputs tagged undirected are stored as two directed edges.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable

import numpy as np


class EdgeListParseError(ValueError):
    """Malformed edge-list input, reported with a 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class Graph:
    """Immutable directed graph in CSR form with per-edge probabilities."""

    def __init__(self, node_count: int, src, dst, prob, directed: bool = True, labels=None):
        self.node_count = int(node_count)
        src = np.asarray(src, dtype=np.int32)
        dst = np.asarray(dst, dtype=np.int32)
        prob = np.asarray(prob, dtype=np.float64)
        if not (len(src) == len(dst) == len(prob)):
            raise ValueError("src, dst, prob must have equal length")
        if len(src) and (src.min() < 0 or src.max() >= node_count or dst.min() < 0 or dst.max() >= node_count):
            raise ValueError("edge endpoint out of range")
        if len(prob) and (prob.min() < 0.0 or prob.max() > 1.0):
            raise ValueError("edge probability outside [0, 1]")
        order = np.argsort(src, kind="stable")
        self.edge_src = np.ascontiguousarray(src[order])
        self.edge_dst = np.ascontiguousarray(dst[order])
        self.edge_prob = np.ascontiguousarray(prob[order])
        counts = np.bincount(self.edge_src, minlength=node_count)
        self.indptr = np.zeros(node_count + 1, dtype=np.int64)
        np.cumsum(counts, out=self.indptr[1:])
        self.directed = bool(directed)
        if labels is None:
            labels = np.arange(node_count, dtype=np.int64)
        self.labels = np.asarray(labels)
        self._transpose = None
        self._in_degree = None

    # -- basic accessors -------------------------------------------------

    @property
    def edge_count(self) -> int:
        return len(self.edge_dst)

    def neighbors(self, u: int) -> np.ndarray:
        return self.edge_dst[self.indptr[u]:self.indptr[u + 1]]

    def out_probs(self, u: int) -> np.ndarray:
        return self.edge_prob[self.indptr[u]:self.indptr[u + 1]]

    @property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def in_degree(self) -> np.ndarray:
        if self._in_degree is None:
            self._in_degree = np.bincount(self.edge_dst, minlength=self.node_count)
        return self._in_degree

    @property
    def total_degree(self) -> np.ndarray:
        return self.out_degree + self.in_degree

    def transpose_csr(self):
        """(tindptr, tsources, tprobs): incoming edges grouped by target."""
        if self._transpose is None:
            order = np.argsort(self.edge_dst, kind="stable")
            tsources = np.ascontiguousarray(self.edge_src[order])
            tprobs = np.ascontiguousarray(self.edge_prob[order])
            counts = np.bincount(self.edge_dst, minlength=self.node_count)
            tindptr = np.zeros(self.node_count + 1, dtype=np.int64)
            np.cumsum(counts, out=tindptr[1:])
            self._transpose = (tindptr, tsources, tprobs)
        return self._transpose

    def edges(self) -> Iterable[tuple[int, int, float]]:
        for s, d, p in zip(self.edge_src, self.edge_dst, self.edge_prob):
            yield int(s), int(d), float(p)

    def _check_nodes(self, nodes) -> list[int]:
        out = []
        for u in nodes:
            u = int(u)
            if not 0 <= u < self.node_count:
                raise ValueError(f"node id {u} out of range [0, {self.node_count})")
            out.append(u)
        return out


# -- ingestion -----------------------------------------------------------


def load_edge_list(text, directed: bool, alpha: float) -> Graph:
    """Parse SNAP-style edge-list text into a graph with alpha-scaled probabilities.

    Lines hold two whitespace-separated non-negative integer labels; ``#``
    lines are comments.  Undirected inputs get each edge doubled.  Self-loops
    are dropped and duplicate edges collapsed, after which every edge
    ``(u, v)`` receives probability ``alpha / in-degree(v)``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if isinstance(text, bytes):
        lines = io.StringIO(text.decode("ascii"))
    elif isinstance(text, str):
        lines = io.StringIO(text)
    else:
        lines = text
    label_to_id: dict[int, int] = {}
    labels: list[int] = []
    pairs: list[tuple[int, int]] = []

    def intern(tok: str, line_no: int) -> int:
        try:
            lab = int(tok)
        except ValueError:
            raise EdgeListParseError(line_no, f"not an integer label: {tok!r}") from None
        if lab < 0:
            raise EdgeListParseError(line_no, f"negative label: {lab}")
        node = label_to_id.get(lab)
        if node is None:
            node = len(labels)
            label_to_id[lab] = node
            labels.append(lab)
        return node

    for line_no, raw in enumerate(lines, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("ascii")
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split()
        if len(toks) != 2:
            raise EdgeListParseError(line_no, f"expected 'u v', got {len(toks)} tokens")
        u = intern(toks[0], line_no)
        v = intern(toks[1], line_no)
        if u == v:
            continue
        pairs.append((u, v))
        if not directed:
            pairs.append((v, u))

    n = len(labels)
    uniq = sorted(set(pairs))
    src = np.array([e[0] for e in uniq], dtype=np.int32)
    dst = np.array([e[1] for e in uniq], dtype=np.int32)
    indeg = np.bincount(dst, minlength=n) if n else np.zeros(0, dtype=np.int64)
    prob = alpha / indeg[dst] if len(dst) else np.zeros(0)
    prob = np.minimum(prob, 1.0)
    return Graph(n, src, dst, prob, directed=directed, labels=np.array(labels, dtype=np.int64))


def write_edge_list(g: Graph, stream) -> None:
    """Emit one 'u v' line per stored directed edge, using original labels."""
    labels = g.labels
    for s, d, _ in g.edges():
        stream.write(f"{labels[s]} {labels[d]}\n")


# -- set operations ------------------------------------------------------


def neighborhood(g: Graph, t) -> set[int]:
    """Union of out-neighbors of ``t`` minus ``t`` itself."""
    members = set(g._check_nodes(t))
    out: set[int] = set()
    for u in members:
        out.update(int(v) for v in g.neighbors(u))
    return out - members


def residual_subgraph(g: Graph, influenced) -> tuple[Graph, np.ndarray]:
    """Induced subgraph on the uninfluenced nodes.

    Returns the subgraph (re-indexed densely) together with the array mapping
    its node ids back to ids in ``g``.
    """
    influenced = set(g._check_nodes(influenced))
    keep_mask = np.ones(g.node_count, dtype=bool)
    if influenced:
        keep_mask[list(influenced)] = False
    parent_ids = np.flatnonzero(keep_mask).astype(np.int64)
    new_id = np.full(g.node_count, -1, dtype=np.int64)
    new_id[parent_ids] = np.arange(len(parent_ids))
    emask = keep_mask[g.edge_src] & keep_mask[g.edge_dst]
    sub = Graph(
        len(parent_ids),
        new_id[g.edge_src[emask]],
        new_id[g.edge_dst[emask]],
        g.edge_prob[emask],
        directed=g.directed,
        labels=g.labels[parent_ids] if len(g.labels) else g.labels,
    )
    return sub, parent_ids


def sample_accessible(g: Graph, k: int, rng: np.random.Generator) -> set[int]:
    """Uniform sample of ``k`` distinct nodes (the initially accessible users)."""
    if k < 0 or k > g.node_count:
        raise ValueError(f"k={k} outside [0, {g.node_count}]")
    if k == 0:
        return set()
    picks = rng.choice(g.node_count, size=k, replace=False)
    return {int(u) for u in picks}


@dataclass(frozen=True)
class FpStats:
    avg_deg_x: float
    avg_deg_nx: float
    paradox_holds: bool


def fp_statistics(g: Graph, x, degree: str = "total") -> FpStats:
    """Average degree of a node set versus its neighborhood.

    ``paradox_holds`` reports whether the neighborhood average is at least the
    set's own average, the set-wise friendship-paradox direction.  Degrees are
    total (in+out) by default; "out" and "in" are also supported.
    """
    x = set(g._check_nodes(x))
    if not x:
        raise ValueError("x must be nonempty")
    nx = neighborhood(g, x)
    if not nx:
        raise ValueError("neighborhood of x is empty")
    if degree == "total":
        deg = g.total_degree
    elif degree == "out":
        deg = g.out_degree
    elif degree == "in":
        deg = g.in_degree
    else:
        raise ValueError(f"unknown degree mode {degree!r}")
    avg_x = float(deg[sorted(x)].mean())
    avg_nx = float(deg[sorted(nx)].mean())
    return FpStats(avg_x, avg_nx, avg_nx >= avg_x)


def owner_assignment(g: Graph, x) -> dict[int, int]:
    """Assign each node of N(X) to exactly one adjacent member of ``x``.

    The owner is the lowest-id adjacent member, which makes the per-agent
    neighbor sets deterministic and non-overlapping.
    """
    x_sorted = sorted(set(g._check_nodes(x)))
    x_set = set(x_sorted)
    owners: dict[int, int] = {}
    for u in x_sorted:
        for v in g.neighbors(u):
            v = int(v)
            if v not in x_set and v not in owners:
                owners[v] = u
    return owners


def owned_neighbors(g: Graph, x) -> dict[int, list[int]]:
    """Per-agent lists of owned neighbors (inverse of owner_assignment)."""
    owned: dict[int, list[int]] = {int(u): [] for u in x}
    for v, u in owner_assignment(g, x).items():
        owned[u].append(v)
    for u in owned:
        owned[u].sort()
    return owned


# -- synthetic graphs ----------------------------------------------------


def preferential_attachment(n: int, m: int, rng: np.random.Generator, alpha: float = 1.0) -> Graph:
    """Undirected preferential-attachment graph, stored directed-doubled.

    Each arriving node attaches to ``m`` distinct existing nodes chosen
    proportionally to degree (repeated-nodes sampling).  Edge probabilities
    follow the alpha / in-degree rule.
    """
    if n < 2 or m < 1:
        raise ValueError("need n >= 2 and m >= 1")
    repeated: list[int] = []
    pairs: list[tuple[int, int]] = []
    for v in range(1, n):
        k = min(m, v)
        chosen: set[int] = set()
        while len(chosen) < k:
            if repeated:
                u = repeated[int(rng.integers(len(repeated)))]
            else:
                u = int(rng.integers(v))
            chosen.add(u)
        for u in sorted(chosen):
            pairs.append((v, u))
            repeated.extend((v, u))
    src = np.array([p[0] for p in pairs] + [p[1] for p in pairs], dtype=np.int32)
    dst = np.array([p[1] for p in pairs] + [p[0] for p in pairs], dtype=np.int32)
    uniq = sorted(set(zip(src.tolist(), dst.tolist())))
    src = np.array([e[0] for e in uniq], dtype=np.int32)
    dst = np.array([e[1] for e in uniq], dtype=np.int32)
    indeg = np.bincount(dst, minlength=n)
    prob = np.minimum(alpha / indeg[dst], 1.0)
    return Graph(n, src, dst, prob, directed=False, labels=np.arange(n, dtype=np.int64))
