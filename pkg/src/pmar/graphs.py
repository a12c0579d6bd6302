"""Acyclic directed mixed graphs, m-separation, and pattern enumeration.

An :class:`Admg` carries directed and bidirected edges over labeled vertices
(default X, Y, Z, S). m-separation is decided by converting each bidirected
edge into a parentless latent with the edge's endpoints as children, then
running a reachability-based d-separation test on the resulting DAG.

:func:`enumerate_pmar_admgs` brute-forces every ADMG over {X, Y, Z, S} whose
separation pattern makes the selection mechanism nonignorable given X alone
but ignorable given X and Z:

    X not-sep Y | {} ,  Y not-sep S | {} ,  Y not-sep S | {X} ,  Y sep S | {X, Z}

The enumeration domain is configurable (see the flags on
:func:`enumerate_pmar_admgs`); counts per configuration are listed in the
README.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

PMAR_VERTICES = ("X", "Y", "Z", "S")


class GraphError(Exception):
    """Base class for graph-contract violations."""


class CyclicGraph(GraphError):
    """The directed part of a graph contains a cycle."""


class OverlappingSets(GraphError):
    """Separation query sets are not disjoint."""


class WrongVertexSet(GraphError):
    """Operation requires the vertex set {X, Y, Z, S}."""


def _normalize_directed(edges) -> frozenset[tuple[str, str]]:
    out = set()
    for a, b in edges:
        if a == b:
            raise ValueError(f"self-loop {a} -> {b}")
        out.add((str(a), str(b)))
    return frozenset(out)


def _normalize_bidirected(edges) -> frozenset[tuple[str, str]]:
    out = set()
    for e in edges:
        a, b = sorted(map(str, e))
        if a == b:
            raise ValueError(f"self-loop {a} <-> {b}")
        out.add((a, b))
    return frozenset(out)


def _has_cycle(vertices: Sequence[str], directed: Iterable[tuple[str, str]]) -> bool:
    children: dict[str, list[str]] = {v: [] for v in vertices}
    indeg = {v: 0 for v in vertices}
    for a, b in directed:
        children[a].append(b)
        indeg[b] += 1
    queue = deque(v for v in vertices if indeg[v] == 0)
    seen = 0
    while queue:
        v = queue.popleft()
        seen += 1
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return seen != len(vertices)


@dataclass(frozen=True)
class Admg:
    """Acyclic directed mixed graph over labeled vertices.

    ``directed`` holds ordered pairs (tail, head); ``bidirected`` holds
    unordered pairs stored sorted. A directed and a bidirected edge may
    coexist between the same pair of vertices.
    """

    vertices: tuple[str, ...] = PMAR_VERTICES
    directed: frozenset[tuple[str, str]] = field(default_factory=frozenset)
    bidirected: frozenset[tuple[str, str]] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(str(v) for v in self.vertices))
        object.__setattr__(self, "directed", _normalize_directed(self.directed))
        object.__setattr__(self, "bidirected", _normalize_bidirected(self.bidirected))
        vs = set(self.vertices)
        if len(vs) != len(self.vertices):
            raise ValueError("duplicate vertex labels")
        for a, b in self.directed | self.bidirected:
            if a not in vs or b not in vs:
                raise ValueError(f"edge endpoint {a!r} or {b!r} not a vertex")
        if _has_cycle(self.vertices, self.directed):
            raise CyclicGraph("directed part of the ADMG is cyclic")

    def canonical_key(self):
        return (tuple(sorted(self.directed)), tuple(sorted(self.bidirected)))


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph, possibly with synthesized latent vertices."""

    vertices: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    latents: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "edges", _normalize_directed(self.edges))
        object.__setattr__(self, "latents", frozenset(self.latents))
        if _has_cycle(self.vertices, self.edges):
            raise CyclicGraph("graph is cyclic")

    def parents(self, v: str) -> list[str]:
        return sorted(a for a, b in self.edges if b == v)

    def children(self, v: str) -> list[str]:
        return sorted(b for a, b in self.edges if a == v)


def to_dag_with_latents(g: Admg) -> Dag:
    """Replace each bidirected edge by a fresh parentless latent vertex.

    The latent's only children are the two endpoints of the edge it
    replaces; directed edges are preserved unchanged.
    """
    latents = []
    edges = set(g.directed)
    for a, b in sorted(g.bidirected):
        name = f"U_{a}{b}"
        while name in g.vertices or name in latents:
            name += "_"
        latents.append(name)
        edges.add((name, a))
        edges.add((name, b))
    return Dag(
        vertices=g.vertices + tuple(latents),
        edges=frozenset(edges),
        latents=frozenset(latents),
    )


def topological_order(d: Dag) -> list[str]:
    """Kahn's algorithm with ties broken by the listed vertex order."""
    index = {v: i for i, v in enumerate(d.vertices)}
    children: dict[str, list[str]] = {v: [] for v in d.vertices}
    indeg = {v: 0 for v in d.vertices}
    for a, b in d.edges:
        children[a].append(b)
        indeg[b] += 1
    ready = sorted((v for v in d.vertices if indeg[v] == 0), key=index.get)
    order: list[str] = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        changed = False
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
                changed = True
        if changed:
            ready.sort(key=index.get)
    if len(order) != len(d.vertices):
        raise CyclicGraph("graph is cyclic")
    return order


def _reachable(
    n_vertices: int,
    parents: list[list[int]],
    children: list[list[int]],
    sources: Iterable[int],
    conditioned: int,
) -> int:
    """Bitmask of vertices d-connected to ``sources`` given ``conditioned``.

    Reachability version of d-separation: states are (vertex, direction)
    pairs, where direction records whether the ball arrived from a child
    (moving up) or from a parent (moving down). ``conditioned`` is a bitmask.
    """
    # ancestors of the conditioning set, including the set itself
    anc = conditioned
    stack = [v for v in range(n_vertices) if (conditioned >> v) & 1]
    while stack:
        v = stack.pop()
        for p in parents[v]:
            bit = 1 << p
            if not anc & bit:
                anc |= bit
                stack.append(p)

    visited_up = 0
    visited_down = 0
    reached = 0
    stack = [(s, True) for s in sources]  # True: moving up (arrived from a child)
    while stack:
        v, up = stack.pop()
        bit = 1 << v
        if up:
            if visited_up & bit:
                continue
            visited_up |= bit
        else:
            if visited_down & bit:
                continue
            visited_down |= bit
        if not conditioned & bit:
            reached |= bit
        if up and not conditioned & bit:
            for p in parents[v]:
                stack.append((p, True))
            for c in children[v]:
                stack.append((c, False))
        elif not up:
            if not conditioned & bit:
                for c in children[v]:
                    stack.append((c, False))
            if anc & bit:
                for p in parents[v]:
                    stack.append((p, True))
    return reached


def _dag_adjacency(d: Dag) -> tuple[dict[str, int], list[list[int]], list[list[int]]]:
    index = {v: i for i, v in enumerate(d.vertices)}
    parents: list[list[int]] = [[] for _ in d.vertices]
    children: list[list[int]] = [[] for _ in d.vertices]
    for a, b in d.edges:
        parents[index[b]].append(index[a])
        children[index[a]].append(index[b])
    return index, parents, children


def m_separated(g: Admg, a, b, c=()) -> bool:
    """True iff vertex sets ``a`` and ``b`` are m-separated given ``c``.

    Decided as d-separation on the latent-augmented DAG, which is equivalent
    to m-separation on the ADMG.
    """
    a, b, c = set(a), set(b), set(c)
    if a & b or a & c or b & c:
        raise OverlappingSets("query sets must be disjoint")
    known = set(g.vertices)
    for v in a | b | c:
        if v not in known:
            raise ValueError(f"unknown vertex {v!r}")
    dag = to_dag_with_latents(g)
    index, parents, children = _dag_adjacency(dag)
    cond = 0
    for v in c:
        cond |= 1 << index[v]
    reached = _reachable(
        len(dag.vertices), parents, children, [index[v] for v in a], cond
    )
    return not any((reached >> index[v]) & 1 for v in b)


def is_pmar_pattern(g: Admg) -> bool:
    """Separation pattern of a nonignorable mechanism repaired by Z.

    Requires vertices exactly {X, Y, Z, S} and checks:
    X and Y dependent; Y and S dependent marginally and given X;
    Y and S separated given {X, Z}.
    """
    if set(g.vertices) != set(PMAR_VERTICES):
        raise WrongVertexSet(f"expected vertices {set(PMAR_VERTICES)}, got {set(g.vertices)}")
    dag = to_dag_with_latents(g)
    index, parents, children = _dag_adjacency(dag)
    n = len(dag.vertices)
    x, y, z, s = index["X"], index["Y"], index["Z"], index["S"]

    def sep(src: int, dst: int, cond: int) -> bool:
        return not (_reachable(n, parents, children, [src], cond) >> dst) & 1

    return (
        not sep(x, y, 0)
        and not sep(y, s, 0)
        and not sep(y, s, 1 << x)
        and sep(y, s, (1 << x) | (1 << z))
    )


def _acyclic_directed_subsets(vertices: Sequence[str]) -> list[frozenset[tuple[str, str]]]:
    pairs = [(a, b) for a in vertices for b in vertices if a != b]
    out = []
    for mask in range(1 << len(pairs)):
        edges = frozenset(pairs[i] for i in range(len(pairs)) if (mask >> i) & 1)
        if not _has_cycle(vertices, edges):
            out.append(edges)
    return out


def enumerate_admgs(
    vertices: Sequence[str] = PMAR_VERTICES,
    *,
    bidirected: bool = True,
    coexisting_edges: bool = True,
    require_s_sink: bool = False,
    bidirected_at_s: bool = True,
):
    """Yield every ADMG in the configured enumeration domain.

    The domain is all acyclic directed-edge subsets crossed with all
    bidirected-edge subsets. ``coexisting_edges=False`` forbids a directed
    and a bidirected edge between the same vertex pair;
    ``require_s_sink=True`` drops graphs where S has directed children;
    ``bidirected_at_s=False`` forbids bidirected edges incident to S.
    """
    vertices = tuple(vertices)
    unordered = list(combinations(sorted(vertices), 2))
    directed_sets = _acyclic_directed_subsets(vertices)
    bidirected_masks = range(1 << len(unordered)) if bidirected else range(1)
    for dset in directed_sets:
        if require_s_sink and any(a == "S" for a, _ in dset):
            continue
        dpairs = {tuple(sorted(e)) for e in dset}
        for bmask in bidirected_masks:
            bset = frozenset(
                unordered[i] for i in range(len(unordered)) if (bmask >> i) & 1
            )
            if not coexisting_edges and bset & dpairs:
                continue
            if not bidirected_at_s and any("S" in e for e in bset):
                continue
            yield Admg(vertices=vertices, directed=dset, bidirected=bset)


def enumerate_pmar_admgs(
    *,
    coexisting_edges: bool = True,
    require_s_sink: bool = False,
    bidirected_at_s: bool = True,
) -> list[Admg]:
    """All ADMGs over {X, Y, Z, S} passing :func:`is_pmar_pattern`.

    Returned in a deterministic canonical order (lexicographic on sorted
    edge lists). See the README for the graph count under each flag
    configuration.
    """
    found = [
        g
        for g in enumerate_admgs(
            PMAR_VERTICES,
            coexisting_edges=coexisting_edges,
            require_s_sink=require_s_sink,
            bidirected_at_s=bidirected_at_s,
        )
        if is_pmar_pattern(g)
    ]
    found.sort(key=Admg.canonical_key)
    return found


def format_graph(g: Admg) -> str:
    """Render a graph in the text format (one edge per line)."""
    lines = [f"vertices: {' '.join(g.vertices)}"]
    lines += [f"{a} -> {b}" for a, b in sorted(g.directed)]
    lines += [f"{a} <-> {b}" for a, b in sorted(g.bidirected)]
    return "\n".join(lines) + "\n"


def format_graphs(graphs: Sequence[Admg]) -> str:
    """Render many graphs into one document with numbered separators."""
    blocks = []
    for k, g in enumerate(graphs):
        blocks.append(f"--- graph {k} ---\n{format_graph(g)}")
    return "".join(blocks)


def parse_graph(text: str) -> Admg:
    """Parse the single-graph text format.

    Lines hold one edge each, ``A -> B`` or ``A <-> B``; ``#`` starts a
    comment; a ``vertices:`` header overrides the default {X, Y, Z, S}.
    """
    vertices: tuple[str, ...] = PMAR_VERTICES
    directed = set()
    bidirected = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower().startswith("vertices:"):
            vertices = tuple(line.split(":", 1)[1].split())
            continue
        if "<->" in line:
            a, b = (p.strip() for p in line.split("<->"))
            bidirected.add((a, b))
        elif "->" in line:
            a, b = (p.strip() for p in line.split("->"))
            directed.add((a, b))
        else:
            raise ValueError(f"line {lineno}: cannot parse edge {raw!r}")
    return Admg(vertices=vertices, directed=frozenset(directed), bidirected=frozenset(bidirected))


def parse_graphs(text: str) -> list[Admg]:
    """Parse a multi-graph document with ``--- graph <k> ---`` separators."""
    chunks: list[list[str]] = []
    current: list[str] | None = None
    for raw in text.splitlines():
        if raw.strip().startswith("--- graph"):
            current = []
            chunks.append(current)
            continue
        if current is None:
            if raw.strip():
                current = [raw]
                chunks.append(current)
        else:
            current.append(raw)
    return [parse_graph("\n".join(chunk)) for chunk in chunks if any(l.strip() for l in chunk)]
