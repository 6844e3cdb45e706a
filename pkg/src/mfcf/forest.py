"""Clique forests: the data structure, the expansion move and validators.

A clique forest is stored as the list of maximal cliques in insertion
order, the list of separators (one per tree edge), the tree edges
(parent clique, child clique, separator index) and the vertex insertion
order.  Vertices are 0-based integers; the I/O layer maps external
labels to indices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


class ForestError(ValueError):
    """Raised when an operation would violate clique-forest invariants."""


@dataclass
class AdjacencyView:
    """Undirected simple graph: vertex count and set of (a, b) pairs, a < b."""

    p: int
    edges: set[tuple[int, int]]

    def neighbours(self) -> list[set[int]]:
        adj = [set() for _ in range(self.p)]
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj


@dataclass
class CliqueForest:
    """Forest of cliques built by repeated clique expansion.

    Cliques are stored in insertion order, which the construction keeps a
    perfect sequence; the reversed ``vertex_order`` is a perfect
    elimination order of the induced chordal graph.
    """

    p: int
    cliques: list[tuple[int, ...]] = field(default_factory=list)
    separators: list[tuple[int, ...]] = field(default_factory=list)
    tree_edges: list[tuple[int, int, int]] = field(default_factory=list)
    vertex_order: list[int] = field(default_factory=list)
    labels: list[str] | None = None

    def placed(self) -> set[int]:
        return set(self.vertex_order)

    def is_complete(self) -> bool:
        return len(self.vertex_order) == self.p

    def copy(self) -> "CliqueForest":
        return CliqueForest(
            p=self.p,
            cliques=list(self.cliques),
            separators=list(self.separators),
            tree_edges=list(self.tree_edges),
            vertex_order=list(self.vertex_order),
            labels=list(self.labels) if self.labels is not None else None,
        )


def add_seed_clique(forest: CliqueForest, members) -> int:
    """Insert a root clique whose members are not yet in the forest."""
    members = tuple(sorted(members))
    if not members:
        raise ForestError("seed clique is empty")
    already = forest.placed().intersection(members)
    if already:
        raise ForestError(f"vertex not isolated: {sorted(already)}")
    forest.cliques.append(members)
    forest.vertex_order.extend(members)
    return len(forest.cliques) - 1


def clique_expand(forest: CliqueForest, source_clique: int, vertex: int,
                  separator) -> int:
    """Attach an isolated vertex to the forest through one clique expansion.

    The move has three outcomes depending on the separator: a proper
    non-empty subset of the source clique creates a new clique
    ``separator + {vertex}`` hanging off the earliest clique containing the
    separator; the full source clique grows in place; the empty separator
    starts a new disconnected root.  Returns the index of the clique that
    now contains ``vertex``.
    """
    if not 0 <= vertex < forest.p:
        raise ForestError(f"vertex {vertex} out of range [0, {forest.p})")
    if vertex in forest.placed():
        raise ForestError(f"vertex not isolated: {vertex}")
    sep = tuple(sorted(separator))
    if len(set(sep)) != len(sep):
        raise ForestError("invalid separator: duplicate members")
    source = forest.cliques[source_clique]
    if not set(sep) <= set(source):
        raise ForestError(
            f"invalid separator: {list(sep)} not a subset of clique "
            f"{source_clique}")

    if len(sep) == 0:
        forest.cliques.append((vertex,))
        forest.vertex_order.append(vertex)
        return len(forest.cliques) - 1

    if len(sep) == len(source):
        # Full expansion: the source clique grows, no new separator.
        forest.cliques[source_clique] = tuple(sorted(source + (vertex,)))
        forest.vertex_order.append(vertex)
        return source_clique

    new_clique = tuple(sorted(sep + (vertex,)))
    parent = _earliest_containing(forest, sep)
    forest.cliques.append(new_clique)
    child = len(forest.cliques) - 1
    forest.separators.append(sep)
    forest.tree_edges.append((parent, child, len(forest.separators) - 1))
    forest.vertex_order.append(vertex)
    return child


def _earliest_containing(forest: CliqueForest, sep: tuple[int, ...]) -> int:
    sset = set(sep)
    for j, clique in enumerate(forest.cliques):
        if sset <= set(clique):
            return j
    raise ForestError(f"invalid separator: {list(sep)} not inside any clique")


def to_adjacency(forest: CliqueForest) -> AdjacencyView:
    """Union of the edge sets of all cliques."""
    edges: set[tuple[int, int]] = set()
    for clique in forest.cliques:
        for i, a in enumerate(clique):
            for b in clique[i + 1:]:
                edges.add((a, b))
    return AdjacencyView(p=forest.p, edges=edges)


def is_chordal(g: AdjacencyView) -> bool:
    """Maximum cardinality search with the fill-in check.

    Independent of the forest bookkeeping: works on any adjacency view.
    Ties on cardinality break on the lowest vertex index.
    """
    adj = g.neighbours()
    n = g.p
    visited = [False] * n
    weight = [0] * n
    order: list[int] = []
    for _ in range(n):
        best, best_w = -1, -1
        for v in range(n):
            if not visited[v] and weight[v] > best_w:
                best, best_w = v, weight[v]
        visited[best] = True
        order.append(best)
        for u in adj[best]:
            if not visited[u]:
                weight[u] += 1
    # Reversed visit order is a perfect elimination order iff chordal:
    # the earlier-visited neighbours of each vertex must form a clique.
    pos = {v: i for i, v in enumerate(order)}
    for v in order:
        earlier = [u for u in adj[v] if pos[u] < pos[v]]
        if not earlier:
            continue
        # It suffices to check that the latest-visited earlier neighbour
        # is adjacent to all the others (Tarjan & Yannakakis).
        w = max(earlier, key=lambda u: pos[u])
        for u in earlier:
            if u != w and u not in adj[w]:
                return False
    return True


def validate_perfect_sequence(forest: CliqueForest) -> bool:
    """Check the running intersection property of the clique insertion order.

    For each clique after the first, its intersection with the union of
    all earlier cliques must be contained in a single earlier clique, and
    every recorded tree edge must carry the exact intersection of the two
    cliques it joins.
    """
    history: set[int] = set()
    for i, clique in enumerate(forest.cliques):
        cset = set(clique)
        if i > 0:
            inter = cset & history
            if inter and not any(
                    inter <= set(forest.cliques[j]) for j in range(i)):
                return False
        history |= cset
    for parent, child, sep_idx in forest.tree_edges:
        sep = set(forest.separators[sep_idx])
        if sep != set(forest.cliques[parent]) & set(forest.cliques[child]):
            return False
        if not sep:
            return False
    return True


def first_violation(forest: CliqueForest) -> str | None:
    """Name the first broken invariant, or None if the forest is valid."""
    seen: set[int] = set()
    for clique in forest.cliques:
        if len(set(clique)) != len(clique) or list(clique) != sorted(clique):
            return f"clique {list(clique)} is not a sorted duplicate-free set"
        seen |= set(clique)
    if seen != set(range(forest.p)) and forest.is_complete():
        return "vertex_order complete but cliques do not cover [0, p)"
    for v in seen:
        if not 0 <= v < forest.p:
            return f"vertex {v} out of range [0, {forest.p})"
    history: set[int] = set()
    for i, clique in enumerate(forest.cliques):
        cset = set(clique)
        if i > 0:
            inter = cset & history
            if inter and not any(
                    inter <= set(forest.cliques[j]) for j in range(i)):
                return (f"running intersection violated at clique {i}: "
                        f"{sorted(inter)} not inside a single earlier clique")
        history |= cset
    for parent, child, sep_idx in forest.tree_edges:
        sep = set(forest.separators[sep_idx])
        expect = set(forest.cliques[parent]) & set(forest.cliques[child])
        if sep != expect:
            return (f"tree edge ({parent}, {child}) separator "
                    f"{sorted(sep)} != clique intersection {sorted(expect)}")
    if not is_chordal(to_adjacency(forest)):
        return "induced graph is not chordal"
    return None


def perfect_elimination_order(forest: CliqueForest) -> list[int]:
    """Reverse of the vertex insertion order; requires a complete forest."""
    if not forest.is_complete():
        raise ForestError(
            f"forest incomplete: {len(forest.vertex_order)} of {forest.p} "
            "vertices placed")
    return list(reversed(forest.vertex_order))


def is_perfect_elimination(g: AdjacencyView, order) -> bool:
    """Check that each vertex is simplicial among the not-yet-eliminated.

    Brute force: for every vertex in elimination order, its remaining
    neighbours must be pairwise adjacent.
    """
    adj = g.neighbours()
    remaining = set(range(g.p))
    for v in order:
        nbrs = [u for u in adj[v] if u in remaining]
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1:]:
                if b not in adj[a]:
                    return False
        remaining.discard(v)
    return True


def edge_count_identity(forest: CliqueForest) -> int:
    """Edge count implied by inclusion-exclusion over cliques and separators."""
    n = sum(len(c) * (len(c) - 1) // 2 for c in forest.cliques)
    n -= sum(len(s) * (len(s) - 1) // 2 for s in forest.separators)
    return n


# ---------------------------------------------------------------------------
# JSON round-trip.  This format is the contract between CLI subcommands.

def forest_to_dict(forest: CliqueForest) -> dict:
    out = {
        "p": forest.p,
        "cliques": [list(c) for c in forest.cliques],
        "separators": [list(s) for s in forest.separators],
        "tree": [list(e) for e in forest.tree_edges],
        "vertex_order": list(forest.vertex_order),
    }
    if forest.labels is not None:
        out["labels"] = list(forest.labels)
    return out


def forest_from_dict(d: dict) -> CliqueForest:
    try:
        forest = CliqueForest(
            p=int(d["p"]),
            cliques=[tuple(int(v) for v in c) for c in d["cliques"]],
            separators=[tuple(int(v) for v in s) for s in d["separators"]],
            tree_edges=[(int(a), int(b), int(s)) for a, b, s in d["tree"]],
            vertex_order=[int(v) for v in d["vertex_order"]],
            labels=list(d["labels"]) if "labels" in d else None,
        )
    except (KeyError, TypeError) as exc:
        raise ForestError(f"malformed forest dict: {exc}") from exc
    return forest


def save_forest(forest: CliqueForest, path) -> None:
    with open(path, "w") as fh:
        json.dump(forest_to_dict(forest), fh, indent=1)
        fh.write("\n")


def load_forest(path) -> CliqueForest:
    with open(path) as fh:
        return forest_from_dict(json.load(fh))
