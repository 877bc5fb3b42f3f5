"""Missing-data DAGs: node roles, validation, d-separation and ordering queries.

A missing-data graph is a DAG over three kinds of nodes: fully observed
variables, partially observed variables, and the binary response indicators
that flag whether a partially observed value was recorded. Proxy variables
(the NA-bearing columns actually seen in data) are deterministic functions of
a variable and its indicator and are deliberately *not* materialized as graph
nodes.

Graphs are immutable after construction and all queries are pure functions,
so instances are safe to share across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, NamedTuple


class GraphParseError(ValueError):
    """A graph description is malformed or violates a structural invariant."""


class Role(Enum):
    OBSERVED = "observed"
    PARTIAL = "partial"
    RESPONSE = "response"


@dataclass(frozen=True)
class Node:
    """A named graph node. ``owner`` is set only for response indicators."""

    name: str
    role: Role
    owner: str | None = None


_NAME_RE = re.compile(r"^[A-Za-z0-9_.]+$")


class MissingDataGraph:
    """Validated DAG over substantive variables and response indicators.

    Invariants enforced at construction:
      * node names are unique, nonempty identifiers;
      * every response indicator points at an existing partially observed
        variable, and every partially observed variable has exactly one;
      * response indicators never have substantive (observed or partial)
        children;
      * the directed graph is acyclic.
    """

    def __init__(self, nodes: Iterable[Node], edges: Iterable[tuple[str, str]]):
        node_list = list(nodes)
        self._roles: dict[str, Role] = {}
        self._owner: dict[str, str] = {}
        for node in node_list:
            if not node.name or not _NAME_RE.match(node.name):
                raise GraphParseError(f"invalid node name {node.name!r}")
            if node.name in self._roles:
                raise GraphParseError(f"duplicate node {node.name!r}")
            self._roles[node.name] = node.role
            if node.role is Role.RESPONSE:
                if node.owner is None:
                    raise GraphParseError(
                        f"response indicator {node.name!r} has no owner"
                    )
                self._owner[node.name] = node.owner

        for r, owner in self._owner.items():
            if self._roles.get(owner) is not Role.PARTIAL:
                raise GraphParseError(
                    f"response indicator {r!r} owns {owner!r}, which is not a "
                    "partially observed variable"
                )

        self._indicator_of: dict[str, str] = {}
        for r, owner in self._owner.items():
            if owner in self._indicator_of:
                raise GraphParseError(
                    f"{owner!r} has more than one response indicator"
                )
            self._indicator_of[owner] = r
        for name, role in self._roles.items():
            if role is Role.PARTIAL and name not in self._indicator_of:
                raise GraphParseError(
                    f"partially observed variable {name!r} has no response indicator"
                )

        self._parents: dict[str, set[str]] = {n: set() for n in self._roles}
        self._children: dict[str, set[str]] = {n: set() for n in self._roles}
        edge_set: set[tuple[str, str]] = set()
        for parent, child in edges:
            for end in (parent, child):
                if end not in self._roles:
                    raise GraphParseError(f"edge references unknown node {end!r}")
            if parent == child:
                raise GraphParseError(f"self-loop on {parent!r}")
            if (
                self._roles[parent] is Role.RESPONSE
                and self._roles[child] is not Role.RESPONSE
            ):
                raise GraphParseError(
                    f"response indicator {parent!r} may not be a parent of the "
                    f"substantive variable {child!r}"
                )
            edge_set.add((parent, child))
            self._parents[child].add(parent)
            self._children[parent].add(child)
        self._edges = frozenset(edge_set)

        self._order = self._toposort()  # raises on cycles

    # -- construction helpers -------------------------------------------------

    def _toposort(self) -> tuple[str, ...]:
        import heapq

        indegree = {n: len(ps) for n, ps in self._parents.items()}
        ready = [n for n, d in indegree.items() if d == 0]
        heapq.heapify(ready)
        order: list[str] = []
        while ready:
            node = heapq.heappop(ready)
            order.append(node)
            for child in sorted(self._children[node]):
                indegree[child] -= 1
                if indegree[child] == 0:
                    heapq.heappush(ready, child)
        if len(order) != len(self._roles):
            stuck = sorted(n for n, d in indegree.items() if d > 0)
            raise GraphParseError(f"graph contains a cycle through {stuck}")
        return tuple(order)

    # -- basic accessors -------------------------------------------------------

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(sorted(self._roles))

    @property
    def edges(self) -> frozenset[tuple[str, str]]:
        return self._edges

    def role(self, name: str) -> Role:
        self._require(name)
        return self._roles[name]

    def parents(self, name: str) -> frozenset[str]:
        self._require(name)
        return frozenset(self._parents[name])

    def children(self, name: str) -> frozenset[str]:
        self._require(name)
        return frozenset(self._children[name])

    @property
    def substantive(self) -> tuple[str, ...]:
        """Fully plus partially observed variables, in topological order."""
        return tuple(n for n in self._order if self._roles[n] is not Role.RESPONSE)

    @property
    def partially_observed(self) -> tuple[str, ...]:
        return tuple(n for n in self._order if self._roles[n] is Role.PARTIAL)

    @property
    def fully_observed(self) -> tuple[str, ...]:
        return tuple(n for n in self._order if self._roles[n] is Role.OBSERVED)

    @property
    def response_indicators(self) -> tuple[str, ...]:
        return tuple(n for n in self._order if self._roles[n] is Role.RESPONSE)

    def indicator_of(self, variable: str) -> str:
        """Name of the response indicator flagging ``variable``."""
        self._require(variable)
        try:
            return self._indicator_of[variable]
        except KeyError:
            raise ValueError(f"{variable!r} is not partially observed") from None

    def owner_of(self, indicator: str) -> str:
        """The partially observed variable flagged by ``indicator``."""
        self._require(indicator)
        try:
            return self._owner[indicator]
        except KeyError:
            raise ValueError(f"{indicator!r} is not a response indicator") from None

    def _require(self, name: str) -> None:
        if name not in self._roles:
            raise ValueError(f"unknown node {name!r}")

    def __contains__(self, name: str) -> bool:
        return name in self._roles

    def __repr__(self) -> str:
        return (
            f"MissingDataGraph({len(self._roles)} nodes, {len(self._edges)} edges)"
        )


def parse_graph(text: str) -> MissingDataGraph:
    """Parse the plain-text graph description format.

    The document has two sections introduced by ``nodes:`` and ``edges:``.
    Node lines are ``NAME observed``, ``NAME partial`` or
    ``NAME response OWNER``; edge lines are ``PARENT -> CHILD``. ``#`` starts
    a comment. Declaring a variable ``partial`` auto-creates its response
    indicator ``R_NAME`` unless one is declared explicitly.
    """
    nodes: list[Node] = []
    edges: list[tuple[str, str]] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        lowered = line.lower()
        if lowered in ("nodes:", "edges:"):
            section = lowered[:-1]
            continue
        if section == "nodes":
            parts = line.split()
            if len(parts) == 2 and parts[1].lower() in ("observed", "partial"):
                nodes.append(Node(parts[0], Role(parts[1].lower())))
            elif len(parts) == 3 and parts[1].lower() == "response":
                nodes.append(Node(parts[0], Role.RESPONSE, owner=parts[2]))
            else:
                raise GraphParseError(f"line {lineno}: cannot parse node {line!r}")
        elif section == "edges":
            parts = [p.strip() for p in line.split("->")]
            if len(parts) != 2 or not all(parts):
                raise GraphParseError(f"line {lineno}: cannot parse edge {line!r}")
            edges.append((parts[0], parts[1]))
        else:
            raise GraphParseError(
                f"line {lineno}: content before a 'nodes:'/'edges:' section"
            )

    # Auto-create R_<name> for partial variables without a declared indicator.
    declared_owners = {n.owner for n in nodes if n.role is Role.RESPONSE}
    names = {n.name for n in nodes}
    for node in list(nodes):
        if node.role is Role.PARTIAL and node.name not in declared_owners:
            auto = f"R_{node.name}"
            if auto in names:
                raise GraphParseError(
                    f"cannot auto-create indicator {auto!r}: name already taken"
                )
            nodes.append(Node(auto, Role.RESPONSE, owner=node.name))
            names.add(auto)

    return MissingDataGraph(nodes, edges)


def topological_order(g: MissingDataGraph) -> list[str]:
    """All nodes, parents before children, ties broken by name."""
    return list(g._order)


def d_separated(
    g: MissingDataGraph,
    a: Iterable[str],
    b: Iterable[str],
    z: Iterable[str],
) -> bool:
    """Return True iff every path between ``a`` and ``b`` is blocked by ``z``.

    Uses the linear-time reachability formulation: a breadth-first search
    over (node, direction) states in which a collider may be traversed only
    when it has a descendant in the conditioning set.
    """
    a, b, z = set(a), set(b), set(z)
    for name in a | b | z:
        g._require(name)
    if (a & b) or (a & z) or (b & z):
        raise ValueError("A, B and Z must be pairwise disjoint")
    if not a or not b:
        return True

    # ancestors of z, including z itself (collider openers)
    an_z: set[str] = set()
    stack = list(z)
    while stack:
        node = stack.pop()
        if node in an_z:
            continue
        an_z.add(node)
        stack.extend(g._parents[node])

    UP, DOWN = 0, 1  # arrived from a child / from a parent
    visited: set[tuple[str, int]] = set()
    frontier: list[tuple[str, int]] = [(node, UP) for node in a]
    while frontier:
        node, direction = frontier.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node not in z and node in b:
            return False
        if direction == UP and node not in z:
            frontier.extend((p, UP) for p in g._parents[node])
            frontier.extend((c, DOWN) for c in g._children[node])
        elif direction == DOWN:
            if node not in z:
                frontier.extend((c, DOWN) for c in g._children[node])
            if node in an_z:
                frontier.extend((p, UP) for p in g._parents[node])
    return True


class RowPattern(NamedTuple):
    """Per-row partition of the partially observed variables."""

    observed: frozenset[str]
    missing: frozenset[str]


def row_pattern(g: MissingDataGraph, row: Mapping[str, object]) -> RowPattern:
    """Split the partially observed variables by this row's indicator values.

    ``row`` must carry a 0/1 value for every response indicator, keyed either
    by the indicator's name or by the variable it flags.
    """
    observed: set[str] = set()
    missing: set[str] = set()
    for var in g.partially_observed:
        ind = g.indicator_of(var)
        if ind in row:
            value = row[ind]
        elif var in row:
            value = row[var]
        else:
            raise ValueError(f"row has no indicator value for {var!r}")
        if value == 1:
            observed.add(var)
        elif value == 0:
            missing.add(var)
        else:
            raise ValueError(
                f"indicator for {var!r} must be 0 or 1, got {value!r}"
            )
    return RowPattern(frozenset(observed), frozenset(missing))
