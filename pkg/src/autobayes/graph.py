"""Role-tagged Bayesian graphs, full-chain enumeration and the named model catalog."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence


class GraphError(ValueError):
    pass


_KIND_ORDER = {"Y": 0, "S": 1, "Z": 2, "X": 3}


@dataclass(frozen=True, order=False)
class NodeRole:
    """A graph variable: task ``Y``, nuisance ``S<i>``, latent ``Z<i>`` or data ``X``."""

    kind: str
    index: int = 0

    def __post_init__(self):
        if self.kind not in _KIND_ORDER:
            raise GraphError(f"unknown node kind {self.kind!r}")
        if self.kind in ("S", "Z") and self.index < 1:
            raise GraphError(f"{self.kind} nodes need an index >= 1")
        if self.kind in ("Y", "X") and self.index != 0:
            raise GraphError(f"{self.kind} takes no index")

    @property
    def name(self) -> str:
        return self.kind if self.kind in ("Y", "X") else f"{self.kind}{self.index}"

    @property
    def sort_key(self) -> tuple[int, int]:
        return (_KIND_ORDER[self.kind], self.index)

    def __lt__(self, other: "NodeRole") -> bool:
        return self.sort_key < other.sort_key

    def __str__(self) -> str:
        return self.name

    def __repr__(self) -> str:
        return f"NodeRole({self.name})"

    @classmethod
    def parse(cls, text: str) -> "NodeRole":
        text = text.strip()
        if text in ("Y", "X"):
            return cls(text)
        if text and text[0] in ("S", "Z"):
            return cls(text[0], int(text[1:]) if len(text) > 1 else 1)
        raise GraphError(f"cannot parse node {text!r}")


Y = NodeRole("Y")
X = NodeRole("X")
S = NodeRole("S", 1)
Z = NodeRole("Z", 1)
Z1 = Z
Z2 = NodeRole("Z", 2)


def sort_nodes(nodes: Iterable[NodeRole]) -> tuple[NodeRole, ...]:
    return tuple(sorted(nodes, key=lambda n: n.sort_key))


@dataclass(frozen=True)
class Dag:
    """Plain DAG over hashable nodes; the Bayes-Ball routines only need this much."""

    nodes: tuple
    edges: frozenset

    def __post_init__(self):
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise GraphError("duplicate nodes")
        for a, b in self.edges:
            if a not in node_set or b not in node_set:
                raise GraphError(f"edge {a}->{b} references unknown node")
            if a == b:
                raise GraphError(f"self loop on {a}")
        object.__setattr__(self, "_parents", {n: frozenset(a for a, b in self.edges if b == n) for n in self.nodes})
        object.__setattr__(self, "_children", {n: frozenset(b for a, b in self.edges if a == n) for n in self.nodes})
        if self.topological_order() is None:
            raise GraphError("graph has a cycle")

    def parents(self, node) -> frozenset:
        return self._parents[node]

    def children(self, node) -> frozenset:
        return self._children[node]

    def topological_order(self):
        indeg = {n: len(self._parents[n]) for n in self.nodes}
        ready = [n for n in self.nodes if indeg[n] == 0]
        out = []
        while ready:
            n = ready.pop(0)
            out.append(n)
            for c in self.nodes:
                if c in self._children[n]:
                    indeg[c] -= 1
                    if indeg[c] == 0:
                        ready.append(c)
        return out if len(out) == len(self.nodes) else None

    def descendants(self, node) -> set:
        seen, stack = set(), [node]
        while stack:
            for c in self._children[stack.pop()]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen


@dataclass(frozen=True)
class BayesianGraph(Dag):
    """Generative DAG over role-tagged nodes.

    ``mask`` is set only on graphs produced by :func:`enumerate_pruned_graphs`
    and records which full-chain edges were kept.
    """

    name: str | None = None
    mask: tuple[bool, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", sort_nodes(_as_node(n) for n in self.nodes))
        object.__setattr__(self, "edges", frozenset(self.edges))
        super().__post_init__()
        kinds = [n.kind for n in self.nodes]
        if kinds.count("Y") != 1 or kinds.count("X") != 1:
            raise GraphError("need exactly one task node and one data node")
        for kind in ("S", "Z"):
            idx = sorted(n.index for n in self.nodes if n.kind == kind)
            if idx != list(range(1, len(idx) + 1)):
                raise GraphError(f"{kind} indices must be contiguous from 1")
        for a, b in self.edges:
            if a.kind == "X":
                raise GraphError("data node cannot have children")
            if b.kind == "Y" and a.kind in ("X", "Z"):
                raise GraphError("task node cannot have data or latent parents")

    @classmethod
    def from_edges(cls, edges: Iterable, nodes: Iterable | None = None, name: str | None = None) -> "BayesianGraph":
        """Build from ``("Y", "Z")``-style string pairs or NodeRole pairs."""
        parsed = {(_as_node(a), _as_node(b)) for a, b in edges}
        if nodes is None:
            node_set = {Y, X} | {n for e in parsed for n in e}
        else:
            node_set = {_as_node(n) for n in nodes}
        return cls(sort_nodes(node_set), frozenset(parsed), name=name)

    @property
    def latents(self) -> tuple[NodeRole, ...]:
        return tuple(n for n in sort_nodes(self.nodes) if n.kind == "Z")

    @property
    def nuisances(self) -> tuple[NodeRole, ...]:
        return tuple(n for n in sort_nodes(self.nodes) if n.kind == "S")

    def label(self, node: NodeRole) -> str:
        """Short display label: ``S``/``Z`` when the graph has only one of that kind."""
        if node.kind in ("S", "Z") and sum(n.kind == node.kind for n in self.nodes) == 1:
            return node.kind
        return node.name

    def edge_list(self) -> list[tuple[NodeRole, NodeRole]]:
        return sorted(self.edges, key=lambda e: (e[0].sort_key, e[1].sort_key))

    def describe_edges(self) -> str:
        return ", ".join(f"{self.label(a)}->{self.label(b)}" for a, b in self.edge_list())

    def with_name(self, name: str) -> "BayesianGraph":
        return BayesianGraph(self.nodes, self.edges, name=name, mask=self.mask)


def _as_node(n) -> NodeRole:
    return n if isinstance(n, NodeRole) else NodeRole.parse(str(n))


def _check_order(order: Sequence[NodeRole]) -> list[NodeRole]:
    order = [_as_node(n) for n in order]
    if len(order) < 2 or order[0] != Y or order[-1] != X:
        raise GraphError("factorization order must start at Y and end at X")
    if len(set(order)) != len(order):
        raise GraphError("factorization order repeats a node")
    return order


def full_chain_graph(order: Sequence) -> BayesianGraph:
    """Complete DAG where every earlier node in ``order`` is a parent of every later one."""
    order = _check_order(order)
    edges = {(a, b) for i, a in enumerate(order) for b in order[i + 1:]}
    return BayesianGraph(sort_nodes(order), frozenset(edges), name="chain[" + ",".join(map(str, order)) + "]")


def full_chain_edges(order: Sequence) -> list[tuple[NodeRole, NodeRole]]:
    """Full-chain edges in lexicographic order of (parent position, child position)."""
    order = _check_order(order)
    return [(a, b) for i, a in enumerate(order) for b in order[i + 1:]]


def enumerate_pruned_graphs(order: Sequence, budget: int | None = None) -> Iterator[BayesianGraph]:
    """Yield every edge subset of the full-chain graph, keep-masks in lexicographic order.

    The first graph keeps all edges; the last one is empty. No deduplication.
    """
    edges = full_chain_edges(order)
    nodes = sort_nodes(_check_order(order))
    prefix = "chain[" + ",".join(map(str, _check_order(order))) + "]"
    for count, keep in enumerate(itertools.product((True, False), repeat=len(edges))):
        if budget is not None and count >= budget:
            return
        kept = frozenset(e for e, k in zip(edges, keep) if k)
        bits = "".join("1" if k else "0" for k in keep)
        yield BayesianGraph(nodes, kept, name=f"{prefix}#{bits}", mask=tuple(keep))


def factorization_orders(nodes: Iterable) -> Iterator[list[NodeRole]]:
    """All Y-first, X-last orders of ``nodes`` (middle nodes permuted)."""
    nodes = sort_nodes({_as_node(n) for n in nodes})
    middle = [n for n in nodes if n.kind in ("S", "Z")]
    for perm in itertools.permutations(middle):
        yield [Y, *perm, X]


def canonical_key(graph: Dag) -> tuple:
    """Key equal for graphs identical up to relabelling same-role latent indices."""
    nodes = sort_nodes(graph.nodes)
    latents = [n for n in nodes if n.kind == "Z"]
    best = None
    for perm in itertools.permutations(latents):
        relabel = dict(zip(latents, perm))
        mapped = tuple(sorted(
            (relabel.get(a, a).sort_key, relabel.get(b, b).sort_key) for a, b in graph.edges
        ))
        if best is None or mapped < best:
            best = mapped
    return (tuple(n.sort_key for n in nodes), best)


_CATALOG_EDGES = {
    "A": ["YX"],
    "B": ["YZ", "ZX"],
    "C": ["SX", "YX"],
    "D": ["SZ", "YZ", "ZX"],
    "E": ["YZ", "ZX", "SX"],
    "F": ["SZ", "ZX", "YX"],
    "G": ["SZ", "YZ", "ZX", "SX"],
    "H": ["SZ", "YZ", "ZX", "YX"],
    "I": ["SZ", "YZ", "ZX", "SX", "YX"],
    "J": [("S", "Z1"), ("Y", "Z2"), ("Z1", "X"), ("Z2", "X")],
    "K": [("S", "Z1"), ("Y", "Z2"), ("Z1", "Z2"), ("Z1", "X"), ("Z2", "X")],
}


class GraphCatalog:
    """Ordered collection of uniquely named graphs, indexable by name."""

    def __init__(self, entries: Iterable[BayesianGraph]):
        self.entries = list(entries)
        names = [g.name for g in self.entries]
        if None in names or len(set(names)) != len(names):
            raise GraphError("catalog names must be present and unique")

    def __getitem__(self, name: str) -> BayesianGraph:
        for g in self.entries:
            if g.name == name:
                return g
        raise KeyError(name)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def names(self) -> list[str]:
        return [g.name for g in self.entries]

    def subset(self, names: Iterable[str]) -> "GraphCatalog":
        return GraphCatalog(self[n] for n in names)


def paper_catalog() -> GraphCatalog:
    """The eleven named generative graphs A-K over Y, S, Z (Z1, Z2 for J, K) and X."""
    graphs = []
    for name, edges in _CATALOG_EDGES.items():
        pairs = [(e[0], e[1]) for e in edges]
        nodes = {"Y", "X", "S"} | ({"Z1", "Z2"} if name in ("J", "K") else {"Z"})
        graphs.append(BayesianGraph.from_edges(pairs, nodes=nodes, name=name))
    return GraphCatalog(graphs)
