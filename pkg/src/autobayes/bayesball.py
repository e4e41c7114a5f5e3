"""d-separation by the Bayes-Ball traversal and the independency list used for pruning."""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterable

from .graph import BayesianGraph, Dag, sort_nodes

# Transition table of the ten Bayes-Ball motifs. Key: (observed, arrived_from_child).
# Value: (continue to parents, continue to children).
#   unobserved, from child  -> parents and other children (chain upward, fork, bounce at parent)
#   unobserved, from parent -> children only (chain downward; collider and leaf block)
#   observed,   from parent -> parents only (collider opens, bounce back at child)
#   observed,   from child  -> nowhere (observed chain and fork block)
BALL_RULES = {
    (False, True): (True, True),
    (False, False): (False, True),
    (True, False): (True, False),
    (True, True): (False, False),
}


class IndependenceQueryError(ValueError):
    pass


def _as_set(nodes) -> frozenset:
    if nodes is None:
        return frozenset()
    if isinstance(nodes, (set, frozenset, list, tuple)):
        return frozenset(nodes)
    return frozenset([nodes])


def reachable(graph: Dag, sources: Iterable, given: Iterable = ()) -> set:
    """Nodes reachable from ``sources`` along active trails when ``given`` is observed."""
    given = _as_set(given)
    # a ball starting at a source behaves as if it arrived from a (virtual) child
    queue = deque((s, True) for s in _as_set(sources))
    visited = set()
    found = set()
    while queue:
        node, from_child = queue.popleft()
        if (node, from_child) in visited:
            continue
        visited.add((node, from_child))
        observed = node in given
        if not observed:
            found.add(node)
        up, down = BALL_RULES[(observed, from_child)]
        if up:
            for p in graph.parents(node):
                queue.append((p, True))
        if down:
            for c in graph.children(node):
                queue.append((c, False))
    return found


def is_d_separated(graph: Dag, a, b, given=()) -> bool:
    a, b, given = _as_set(a), _as_set(b), _as_set(given)
    if not a or not b:
        raise IndependenceQueryError("query sets must be nonempty")
    if a & b or a & given or b & given:
        raise IndependenceQueryError("query sets must be pairwise disjoint")
    unknown = (a | b | given) - set(graph.nodes)
    if unknown:
        raise IndependenceQueryError(f"unknown nodes {sorted(map(str, unknown))}")
    return not (reachable(graph, a, given) & b)


def _key(nodes: frozenset) -> tuple:
    return tuple(n.sort_key for n in sort_nodes(nodes))


@dataclass(frozen=True)
class IndependencyStatement:
    """``left`` is independent of ``right`` given ``given``; ``left`` precedes ``right``."""

    left: frozenset
    right: frozenset
    given: frozenset

    def __post_init__(self):
        left, right, given = _as_set(self.left), _as_set(self.right), _as_set(self.given)
        if not left or not right:
            raise IndependenceQueryError("left and right must be nonempty")
        if left & right or left & given or right & given:
            raise IndependenceQueryError("statement sets must be disjoint")
        if _key(right) < _key(left):
            left, right = right, left
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "given", given)

    def render(self, graph: BayesianGraph | None = None) -> str:
        name = graph.label if graph is not None else str
        side = lambda ns: ",".join(name(n) for n in sort_nodes(ns))
        # written latent-first, e.g. "Z ⊥ S", "S ⊥ X"
        disp = lambda ns: tuple(("YZSX".index(n.kind), n.index) for n in sort_nodes(ns))
        a, b = (self.left, self.right) if disp(self.left) <= disp(self.right) else (self.right, self.left)
        text = f"{side(a)} ⊥ {side(b)}"
        return text + (f" | {side(self.given)}" if self.given else "")

    def sort_key(self) -> tuple:
        return (len(self.given), _key(self.left), _key(self.right), _key(self.given))

    def to_json(self) -> dict:
        return {
            "left": [n.name for n in sort_nodes(self.left)],
            "right": [n.name for n in sort_nodes(self.right)],
            "given": [n.name for n in sort_nodes(self.given)],
        }


# above this node count only conditioning sets up to this size are enumerated
FULL_ENUMERATION_NODES = 5
MAX_GIVEN_LARGE = 3


def independency_list(graph: BayesianGraph, max_given: int | None = None) -> list[IndependencyStatement]:
    """Pairwise statements u ⊥ v | C for every C over the remaining nodes, plus Z_k ⊥ S-set
    (marginally and given subsets of the other latents).

    Graphs over more than five nodes cap |C| at ``MAX_GIVEN_LARGE`` unless ``max_given``
    is passed explicitly.
    """
    nodes = sort_nodes(graph.nodes)
    if max_given is None:
        max_given = len(nodes) if len(nodes) <= FULL_ENUMERATION_NODES else MAX_GIVEN_LARGE
    out = []
    for u, v in itertools.combinations(nodes, 2):
        rest = [n for n in nodes if n not in (u, v)]
        for size in range(0, min(max_given, len(rest)) + 1):
            for cond in itertools.combinations(rest, size):
                if is_d_separated(graph, {u}, {v}, set(cond)):
                    out.append(IndependencyStatement(frozenset([u]), frozenset([v]), frozenset(cond)))
    nuisances = frozenset(graph.nuisances)
    latents = graph.latents
    if len(nuisances) > 1 or len(latents) > 1:
        # the single-nuisance, single-latent case is already covered above
        for z in latents:
            others = [l for l in latents if l != z]
            for size in range(0, len(others) + 1):
                for cond in itertools.combinations(others, size):
                    stmt = IndependencyStatement(frozenset([z]), nuisances, frozenset(cond))
                    if stmt not in out and is_d_separated(graph, {z}, nuisances, set(cond)):
                        out.append(stmt)
    return sorted(set(out), key=IndependencyStatement.sort_key)


class IndependencySet:
    """Membership lookup over an independency list, symmetric in left/right."""

    def __init__(self, statements: Iterable[IndependencyStatement]):
        self.statements = list(statements)
        self._set = set(self.statements)

    def holds(self, a, b, given=()) -> bool:
        try:
            stmt = IndependencyStatement(_as_set(a), _as_set(b), _as_set(given))
        except IndependenceQueryError:
            return False
        return stmt in self._set

    def __contains__(self, stmt: IndependencyStatement) -> bool:
        return stmt in self._set

    def __iter__(self):
        return iter(self.statements)

    def __len__(self):
        return len(self.statements)
