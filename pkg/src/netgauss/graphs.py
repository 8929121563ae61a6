"""Time-varying directed communication graphs and their mixing matrices.

Agents are labeled 1..n. An edge (j, i) means agent j can send to agent i.
Every node implicitly communicates with itself: the mixing matrix built from
a graph always puts weight 1/(out_degree + 1) on the diagonal, which makes
each column sum to one (column-stochastic mixing, the structural basis of
push-sum averaging on digraphs).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

Edge = tuple[int, int]


@dataclass(frozen=True)
class DirectedGraph:
    """A directed graph on agents 1..n; self-loops are implicit, never stored."""

    n: int
    edges: frozenset[Edge] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"agent count must be positive, got {self.n}")
        object.__setattr__(self, "edges", frozenset(map(tuple, self.edges)))
        for j, i in self.edges:
            if not (1 <= j <= self.n and 1 <= i <= self.n):
                raise ValueError(f"edge ({j},{i}) outside 1..{self.n}")
            if j == i:
                raise ValueError(f"self-edge ({j},{i}) must not be stored")

    def out_degree(self, j: int) -> int:
        """Number of non-self out-edges of node j."""
        return sum(1 for (a, _) in self.edges if a == j)

    def in_neighbors(self, i: int) -> list[int]:
        """Sorted senders j with (j, i) an edge, excluding i itself."""
        return sorted(a for (a, b) in self.edges if b == i)


def is_regular(g: DirectedGraph) -> bool:
    """True when all in-degrees and out-degrees coincide.

    This is the notion of regularity under which the mixing matrix of
    `build_weight_matrix` is doubly stochastic and the cumulative mass
    floor (`empirical_delta`) equals exactly one.
    """
    out = [0] * (g.n + 1)
    inc = [0] * (g.n + 1)
    for j, i in g.edges:
        out[j] += 1
        inc[i] += 1
    degs = out[1:] + inc[1:]
    return len(set(degs)) <= 1


def build_weight_matrix(g: DirectedGraph) -> np.ndarray:
    """Column-stochastic mixing matrix from out-degrees.

    Entry (i, j) is 1/(d_j + 1) when j = i or (j, i) is an edge, where d_j
    is the non-self out-degree of j; all other entries are zero. Every
    column sums to exactly one by construction.
    """
    a = np.zeros((g.n, g.n))
    inv = np.empty(g.n)
    for j in range(1, g.n + 1):
        inv[j - 1] = 1.0 / (g.out_degree(j) + 1)
    for j, i in g.edges:
        a[i - 1, j - 1] = inv[j - 1]
    a[np.diag_indices(g.n)] = inv
    return a


def check_weight_matrix(a: np.ndarray, g: DirectedGraph | None = None, tol: float = 1e-12) -> None:
    """Raise if `a` is not a valid mixing matrix (optionally for graph `g`)."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"weight matrix must be square, got shape {a.shape}")
    if np.any(a < 0):
        raise ValueError("weight matrix has negative entries")
    col_sums = a.sum(axis=0)
    if np.max(np.abs(col_sums - 1.0)) > tol:
        raise ValueError("weight matrix columns must sum to 1")
    if np.any(np.diag(a) <= 0):
        raise ValueError("weight matrix needs strictly positive diagonal")
    if g is not None:
        if a.shape[0] != g.n:
            raise ValueError(f"matrix size {a.shape[0]} != agent count {g.n}")
        allowed = np.eye(g.n, dtype=bool)
        for j, i in g.edges:
            allowed[i - 1, j - 1] = True
        if np.any((a != 0) & ~allowed):
            raise ValueError("nonzero weight outside graph edges")


def is_strongly_connected(g: DirectedGraph) -> bool:
    """True iff every node reaches every other node along directed edges."""
    if g.n == 1:
        return True
    fwd: list[list[int]] = [[] for _ in range(g.n + 1)]
    rev: list[list[int]] = [[] for _ in range(g.n + 1)]
    for j, i in g.edges:
        fwd[j].append(i)
        rev[i].append(j)

    def reaches_all(adj: list[list[int]]) -> bool:
        seen = {1}
        stack = [1]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == g.n

    return reaches_all(fwd) and reaches_all(rev)


@dataclass(frozen=True)
class GraphSequence:
    """Periodic schedule of directed graphs, one per time step.

    The graph active at step k is ``graphs[k % period]``. ``window`` is the
    claimed connectivity window B: the union of any B consecutive edge sets
    should be strongly connected (checked by `validate_b_connectivity`).
    """

    n: int
    graphs: tuple[DirectedGraph, ...]
    window: int = 1

    def __post_init__(self):
        if not self.graphs:
            raise ValueError("schedule needs at least one graph")
        if self.window < 1:
            raise ValueError(f"connectivity window must be >= 1, got {self.window}")
        object.__setattr__(self, "graphs", tuple(self.graphs))
        for g in self.graphs:
            if g.n != self.n:
                raise ValueError(f"graph with n={g.n} in sequence with n={self.n}")

    @property
    def period(self) -> int:
        return len(self.graphs)

    def graph_at(self, k: int) -> DirectedGraph:
        return self.graphs[k % self.period]

    def weight_at(self, k: int) -> np.ndarray:
        return build_weight_matrix(self.graph_at(k))

    def weight_cycle(self) -> list[np.ndarray]:
        """One period of mixing matrices (index = step mod period)."""
        return [build_weight_matrix(g) for g in self.graphs]

    def is_static_regular(self) -> bool:
        return self.period == 1 and is_regular(self.graphs[0])


def union_graph(graphs: Iterable[DirectedGraph]) -> DirectedGraph:
    gs = list(graphs)
    if not gs:
        raise ValueError("union of no graphs")
    n = gs[0].n
    edges: set[Edge] = set()
    for g in gs:
        if g.n != n:
            raise ValueError("union over graphs of different sizes")
        edges |= g.edges
    return DirectedGraph(n, frozenset(edges))


def validate_b_connectivity(seq: GraphSequence, window: int) -> bool:
    """Check that every length-`window` block union is strongly connected.

    Blocks start at multiples of `window`; since the schedule is periodic
    with period P, only lcm(P, window)/window distinct blocks exist and all
    are checked.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    n_blocks = math.lcm(seq.period, window) // window
    for b in range(n_blocks):
        block = [seq.graph_at(t) for t in range(b * window, (b + 1) * window)]
        if not is_strongly_connected(union_graph(block)):
            return False
    return True


def matrix_product(seq: GraphSequence, k: int, t: int) -> np.ndarray:
    """Ordered mixing-matrix product A_k A_{k-1} ... A_{t+1} A_t."""
    if t < 0:
        raise ValueError(f"start step must be >= 0, got {t}")
    if k < t:
        raise ValueError(f"product requires k >= t, got k={k}, t={t}")
    cycle = seq.weight_cycle()
    prod = cycle[t % seq.period].copy()
    for s in range(t + 1, k + 1):
        prod = cycle[s % seq.period] @ prod
    return prod


def column_spread(m: np.ndarray) -> float:
    """Largest within-row difference max_{i,j,j'} |m_ij - m_ij'|.

    For a product of mixing matrices this gauges how far the product is
    from rank one (all columns equal), and is bounded by twice the
    geometric envelope of `mixing_constants`.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return float(np.max(m.max(axis=1) - m.min(axis=1)))


@dataclass(frozen=True)
class GraphConstants:
    """Constants (C, lambda, delta) of the geometric mixing envelope.

    ``lam_gap`` stores 1 - lambda exactly; for large n the gap underflows
    the spacing of floats near 1.0, so the rounded ``lam`` property can
    print as 1.0 while the gap stays positive. Always use ``lam_gap`` in
    denominators.
    """

    c: float
    lam_gap: float
    delta: float
    window: int = 1
    regular: bool = False

    def __post_init__(self):
        if self.c < 1:
            raise ValueError(f"C must be >= 1, got {self.c}")
        if not (0 < self.lam_gap <= 1):
            raise ValueError(f"1-lambda must be in (0,1], got {self.lam_gap}")
        if not (0 < self.delta <= 1):
            raise ValueError(f"delta must be in (0,1], got {self.delta}")

    @property
    def lam(self) -> float:
        return 1.0 - self.lam_gap

    def envelope(self, steps: int | np.ndarray) -> np.ndarray | float:
        """C * lambda**steps, computed in log space for tiny gaps."""
        return self.c * np.exp(np.asarray(steps) * np.log1p(-self.lam_gap))


def mixing_constants(n: int, window: int = 1, regular: bool = False) -> GraphConstants:
    """Mixing-envelope constants for a B-strongly-connected sequence.

    General case: C = 4, lambda = (1 - n^(-nB))^(1/B), delta = n^(-nB).
    Regular static case (requires window 1): C = sqrt(2),
    lambda = 1 - 1/(4 n^3), delta = 1.
    A single node mixes instantly: lambda = 0, delta = 1.
    """
    if n < 1:
        raise ValueError(f"agent count must be >= 1, got {n}")
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if regular and window > 1:
        raise ValueError("the regular case applies only to window 1")
    if n == 1:
        return GraphConstants(c=math.sqrt(2) if regular else 4.0, lam_gap=1.0,
                              delta=1.0, window=window, regular=regular)
    if regular:
        return GraphConstants(c=math.sqrt(2), lam_gap=1.0 / (4 * n**3),
                              delta=1.0, window=1, regular=True)
    floor = float(n) ** (-n * window)
    # 1 - (1 - floor)^(1/B) without cancellation near 1.0
    gap = -math.expm1(math.log1p(-floor) / window)
    return GraphConstants(c=4.0, lam_gap=gap, delta=floor, window=window, regular=False)


def empirical_delta(seq: GraphSequence, horizon: int) -> float:
    """Smallest per-node mass of cumulative products, min_{k<=horizon,i} [A_{k:0} 1]_i.

    For a B-strongly-connected sequence this never drops below the
    n^(-nB) floor of `mixing_constants`; for regular static graphs it is
    exactly one.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    cycle = seq.weight_cycle()
    v = np.ones(seq.n)
    lo = math.inf
    for k in range(horizon + 1):
        v = cycle[k % seq.period] @ v
        lo = min(lo, float(v.min()))
    return lo


@dataclass(frozen=True)
class TopologySpec:
    """Named topology family plus its parameters, as written in config files.

    kinds:
      path         bidirectional line on n nodes
      cycle        ring on n nodes; one-way when ``directed`` is true
      grid         bidirectional rows x cols lattice (rows*cols = n)
      complete     all ordered pairs
      star         bidirectional spokes around ``hub``
      ring-hub     one-way ring plus hub spokes (``spokes``: out|in|both);
                   a deliberately unbalanced digraph that stresses
                   push-sum mixing
      round-robin  period-n schedule activating bidirectional pair
                   (k+1, k+2 mod n) at step k
      custom       explicit per-step edge lists in ``steps`` with claimed
                   ``window``; set ``validate`` to check the claim
    """

    kind: str
    n: int
    rows: int | None = None
    cols: int | None = None
    directed: bool = False
    hub: int = 1
    spokes: str = "out"
    steps: tuple[tuple[Edge, ...], ...] | None = None
    window: int | None = None
    validate: bool = True

    KINDS = ("path", "cycle", "grid", "complete", "star", "ring-hub",
             "round-robin", "custom")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown topology kind {self.kind!r}; expected one of {self.KINDS}")
        if self.n < 1:
            raise ValueError(f"topology needs n >= 1, got {self.n}")


def _bidirectional(pairs: Iterable[Edge]) -> set[Edge]:
    out: set[Edge] = set()
    for a, b in pairs:
        out.add((a, b))
        out.add((b, a))
    return out


def generate_graph_sequence(spec: TopologySpec) -> GraphSequence:
    """Build the graph schedule described by `spec`.

    The returned sequence carries the smallest window the generator
    guarantees: 1 for static strongly connected families, the period for
    round-robin, the declared window for custom schedules.
    """
    n = spec.n
    kind = spec.kind

    if kind == "path":
        edges = _bidirectional((i, i + 1) for i in range(1, n))
        return GraphSequence(n, (DirectedGraph(n, frozenset(edges)),), window=1)

    if kind == "cycle":
        ring = [(i, i % n + 1) for i in range(1, n + 1)] if n > 1 else []
        edges = set(ring) if spec.directed else _bidirectional(ring)
        return GraphSequence(n, (DirectedGraph(n, frozenset(edges)),), window=1)

    if kind == "grid":
        rows, cols = spec.rows, spec.cols
        if rows is None or cols is None:
            raise ValueError("grid topology needs rows and cols")
        if rows * cols != n:
            raise ValueError(f"grid {rows}x{cols} has {rows * cols} nodes, expected n={n}")
        node = lambda r, c: r * cols + c + 1
        pairs = []
        for r in range(rows):
            for c in range(cols):
                if c + 1 < cols:
                    pairs.append((node(r, c), node(r, c + 1)))
                if r + 1 < rows:
                    pairs.append((node(r, c), node(r + 1, c)))
        edges = _bidirectional(pairs)
        return GraphSequence(n, (DirectedGraph(n, frozenset(edges)),), window=1)

    if kind == "complete":
        edges = {(j, i) for j in range(1, n + 1) for i in range(1, n + 1) if j != i}
        return GraphSequence(n, (DirectedGraph(n, frozenset(edges)),), window=1)

    if kind == "star":
        if not (1 <= spec.hub <= n):
            raise ValueError(f"star hub {spec.hub} outside 1..{n}")
        edges = _bidirectional((spec.hub, i) for i in range(1, n + 1) if i != spec.hub)
        return GraphSequence(n, (DirectedGraph(n, frozenset(edges)),), window=1)

    if kind == "ring-hub":
        if not (1 <= spec.hub <= n):
            raise ValueError(f"ring-hub hub {spec.hub} outside 1..{n}")
        if spec.spokes not in ("out", "in", "both"):
            raise ValueError(f"ring-hub spokes must be out|in|both, got {spec.spokes!r}")
        edges = {(i, i % n + 1) for i in range(1, n + 1) if n > 1}
        for i in range(1, n + 1):
            if i == spec.hub:
                continue
            if spec.spokes in ("out", "both"):
                edges.add((spec.hub, i))
            if spec.spokes in ("in", "both"):
                edges.add((i, spec.hub))
        return GraphSequence(n, (DirectedGraph(n, frozenset(edges)),), window=1)

    if kind == "round-robin":
        if n < 2:
            raise ValueError("round-robin needs n >= 2")
        graphs = []
        for k in range(n):
            a, b = k + 1, (k + 1) % n + 1
            graphs.append(DirectedGraph(n, frozenset(_bidirectional([(a, b)]))))
        return GraphSequence(n, tuple(graphs), window=n)

    if kind == "custom":
        if not spec.steps:
            raise ValueError("custom topology needs per-step edge lists")
        graphs = tuple(DirectedGraph(n, frozenset(map(tuple, step))) for step in spec.steps)
        window = spec.window if spec.window is not None else len(graphs)
        seq = GraphSequence(n, graphs, window=window)
        if spec.validate and not validate_b_connectivity(seq, window):
            raise ValueError(f"custom schedule is not strongly connected over windows of {window}")
        return seq

    raise AssertionError(f"unhandled kind {kind}")
