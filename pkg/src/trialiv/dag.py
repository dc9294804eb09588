"""Causal diagrams: d-separation queries and instrumental-variable checks.

Graphs here are trial-sized (a handful of nodes), so queries enumerate
every simple path between the endpoints and report a per-path verdict.
That costs exponential time in general but buys fully explainable output:
each verdict names the path, the rule applied at every internal node
(chain, fork, or collider), and the node that blocks it.

A collider is open when it *or any of its descendants* is conditioned on;
the descendant clause is part of the standard definition even though
simplified rule statements often omit it.

Text format, one directive per line (blank lines and ``#`` comments
allowed)::

    R -> T
    T -> Y
    latent U
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .errors import DagError, ParseError, UnknownNodeError

CHAIN = "chain"
FORK = "fork"
COLLIDER = "collider"


@dataclass(frozen=True)
class Dag:
    """Immutable directed acyclic graph with observed/latent node flags."""

    nodes: Tuple[str, ...]
    edges: Tuple[Tuple[str, str], ...]
    latent: FrozenSet[str] = frozenset()

    def __post_init__(self) -> None:
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise DagError("duplicate node names")
        seen = set()
        for u, v in self.edges:
            if u not in node_set or v not in node_set:
                raise DagError(f"edge {u} -> {v} references an unknown node")
            if u == v:
                raise DagError(f"self-loop on node {u}")
            if (u, v) in seen:
                raise DagError(f"duplicate edge {u} -> {v}")
            seen.add((u, v))
        unknown_latent = self.latent - node_set
        if unknown_latent:
            raise DagError(f"latent flags on unknown nodes: {sorted(unknown_latent)}")
        self._toposort()  # raises on cycles

    def _toposort(self) -> List[str]:
        indeg = {n: 0 for n in self.nodes}
        for _, v in self.edges:
            indeg[v] += 1
        order = [n for n in self.nodes if indeg[n] == 0]
        out = 0
        while out < len(order):
            node = order[out]
            out += 1
            for u, v in self.edges:
                if u == node:
                    indeg[v] -= 1
                    if indeg[v] == 0:
                        order.append(v)
        if len(order) != len(self.nodes):
            raise DagError("graph contains a directed cycle")
        return order

    def parents(self, node: str) -> Set[str]:
        return {u for u, v in self.edges if v == node}

    def children(self, node: str) -> Set[str]:
        return {v for u, v in self.edges if u == node}

    def neighbors(self, node: str) -> Set[str]:
        return self.parents(node) | self.children(node)

    def descendants(self, node: str) -> Set[str]:
        """All nodes reachable from ``node`` along directed edges."""
        seen: Set[str] = set()
        stack = [node]
        while stack:
            cur = stack.pop()
            for child in self.children(cur):
                if child not in seen:
                    seen.add(child)
                    stack.append(child)
        return seen

    def has_directed_path(self, a: str, b: str) -> bool:
        return b in self.descendants(a)

    def require(self, *names: str) -> None:
        for name in names:
            if name not in self.nodes:
                raise UnknownNodeError(f"node {name!r} is not in the graph")

    @classmethod
    def from_text(cls, text: str) -> "Dag":
        """Parse the one-directive-per-line text format."""
        nodes: List[str] = []
        edges: List[Tuple[str, str]] = []
        latent: Set[str] = set()

        def add_node(name: str) -> None:
            if name not in nodes:
                nodes.append(name)

        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("latent "):
                name = line[len("latent "):].strip()
                if not name or " " in name:
                    raise ParseError(f"line {lineno}: bad latent directive {raw!r}")
                add_node(name)
                latent.add(name)
            elif "->" in line:
                left, _, right = line.partition("->")
                u, v = left.strip(), right.strip()
                if not u or not v or " " in u or " " in v:
                    raise ParseError(f"line {lineno}: bad edge {raw!r}")
                add_node(u)
                add_node(v)
                edges.append((u, v))
            else:
                raise ParseError(
                    f"line {lineno}: expected 'A -> B' or 'latent U', got {raw!r}"
                )
        try:
            return cls(tuple(nodes), tuple(edges), frozenset(latent))
        except DagError as exc:
            raise ParseError(str(exc)) from exc

    def to_text(self) -> str:
        lines = [f"{u} -> {v}" for u, v in self.edges]
        lines += [f"latent {n}" for n in self.nodes if n in self.latent]
        return "\n".join(lines) + "\n"

    def render_path(self, path: Tuple[str, ...]) -> str:
        """Render a path with its edge directions, e.g. ``R <- U -> Y``."""
        edge_set = set(self.edges)
        parts = [path[0]]
        for a, b in zip(path, path[1:]):
            parts.append(" -> " if (a, b) in edge_set else " <- ")
            parts.append(b)
        return "".join(parts)


@dataclass(frozen=True)
class PathVerdict:
    """One undirected path with its open/blocked ruling.

    ``rules`` holds the rule kind at each internal node of the path, in
    order; ``blocking_node`` is the first internal node whose rule blocks
    the path, or None when the path is open.
    """

    path: Tuple[str, ...]
    open: bool
    blocking_node: Optional[str]
    rules: Tuple[str, ...]

    def render(self) -> str:
        return " - ".join(self.path)


@dataclass(frozen=True)
class SeparationResult:
    separated: bool
    paths: Tuple[PathVerdict, ...]

    @property
    def open_paths(self) -> Tuple[PathVerdict, ...]:
        return tuple(p for p in self.paths if p.open)


def _simple_paths(g: Dag, a: str, b: str) -> Iterable[Tuple[str, ...]]:
    """All simple paths between a and b over the undirected skeleton."""
    adjacency: Dict[str, List[str]] = {
        n: sorted(g.neighbors(n)) for n in g.nodes
    }
    path = [a]
    on_path = {a}

    def walk() -> Iterable[Tuple[str, ...]]:
        cur = path[-1]
        if cur == b:
            yield tuple(path)
            return
        for nxt in adjacency[cur]:
            if nxt in on_path:
                continue
            path.append(nxt)
            on_path.add(nxt)
            yield from walk()
            path.pop()
            on_path.remove(nxt)

    yield from walk()


def _judge_path(
    g: Dag, path: Tuple[str, ...], conditioned: FrozenSet[str]
) -> PathVerdict:
    edge_set = set(g.edges)
    rules: List[str] = []
    blocking: Optional[str] = None
    for i in range(1, len(path) - 1):
        prev, mid, nxt = path[i - 1], path[i], path[i + 1]
        into_left = (prev, mid) in edge_set
        into_right = (nxt, mid) in edge_set
        if into_left and into_right:
            kind = COLLIDER
            opened = mid in conditioned or bool(
                g.descendants(mid) & conditioned
            )
        else:
            kind = FORK if not into_left and not into_right else CHAIN
            opened = mid not in conditioned
        rules.append(kind)
        if not opened and blocking is None:
            blocking = mid
    return PathVerdict(
        path=path,
        open=blocking is None,
        blocking_node=blocking,
        rules=tuple(rules),
    )


def d_separated(
    g: Dag, a: str, b: str, conditioned: Iterable[str] = ()
) -> SeparationResult:
    """Decide whether every path between a and b is blocked given the set.

    Chains and forks are blocked by conditioning on the middle node;
    colliders are open only if the collider or one of its descendants is
    conditioned on. The result lists every simple path with its verdict.
    """
    cond = frozenset(conditioned)
    g.require(a, b, *cond)
    if a == b:
        raise DagError("d-separation query needs two distinct nodes")
    if a in cond or b in cond:
        raise DagError("queried nodes must not be in the conditioning set")
    verdicts = tuple(_judge_path(g, p, cond) for p in _simple_paths(g, a, b))
    return SeparationResult(
        separated=all(not v.open for v in verdicts), paths=verdicts
    )


@dataclass(frozen=True)
class IvReport:
    """Structural verdicts for the three instrumental-variable assumptions.

    iv1 (relevance): a directed path instrument -> treatment exists.
    iv2 (randomization): the instrument is d-separated from every
    confounder given nothing.
    iv3 (exclusion restriction): the instrument is d-separated from the
    outcome given the treatment and the confounders.
    Open paths witnessing a failure are kept per assumption.
    """

    iv1: bool
    iv2: bool
    iv3: bool
    iv2_open_paths: Dict[str, Tuple[PathVerdict, ...]] = field(default_factory=dict)
    iv3_open_paths: Tuple[PathVerdict, ...] = ()

    @property
    def all_hold(self) -> bool:
        return self.iv1 and self.iv2 and self.iv3


def check_iv(
    g: Dag,
    instrument: str,
    treatment: str,
    outcome: str,
    confounders: Iterable[str] = (),
) -> IvReport:
    conf = tuple(dict.fromkeys(confounders))
    g.require(instrument, treatment, outcome, *conf)
    named = (instrument, treatment, outcome)
    if len(set(named)) != 3:
        raise DagError("instrument, treatment, and outcome must be distinct")

    iv1 = g.has_directed_path(instrument, treatment)

    iv2_failures: Dict[str, Tuple[PathVerdict, ...]] = {}
    for c in conf:
        res = d_separated(g, instrument, c, ())
        if not res.separated:
            iv2_failures[c] = res.open_paths

    iv3_res = d_separated(g, instrument, outcome, {treatment, *conf})

    return IvReport(
        iv1=iv1,
        iv2=not iv2_failures,
        iv3=iv3_res.separated,
        iv2_open_paths=iv2_failures,
        iv3_open_paths=iv3_res.open_paths,
    )
