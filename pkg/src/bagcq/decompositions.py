"""Tree decompositions, chordality, junction trees, and bag-entropy expressions.

A decomposition is a forest of bags (variable bitmasks) with a parent
orientation.  Junction trees are built deterministically: Maximum Cardinality
Search with smallest-index tie-breaking, maximal cliques sorted by bitmask,
and a maximum-separator-weight spanning forest with ties broken by the
smallest clique-id pair.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .errors import NotChordal
from .expressions import LinearExpression, popcount
from .queries import ConjunctiveQuery, gaifman_graph


@dataclass(frozen=True)
class TreeDecomposition:
    n: int                                   # variable-universe size
    bags: tuple[int, ...]                    # node id -> variable bitmask
    edges: frozenset[frozenset[int]]
    parent: tuple[int | None, ...]           # node id -> parent node id

    @property
    def nodes(self):
        return range(len(self.bags))

    def neighbors(self, t: int):
        out = []
        for e in self.edges:
            a, b = tuple(e)
            if a == t:
                out.append(b)
            elif b == t:
                out.append(a)
        return sorted(out)

    def separator(self, t: int) -> int:
        p = self.parent[t]
        return 0 if p is None else self.bags[t] & self.bags[p]

    def reroot(self, roots) -> "TreeDecomposition":
        """Reorient the same forest from the given root nodes."""
        adj = {t: self.neighbors(t) for t in self.nodes}
        parent: list[int | None] = [None] * len(self.bags)
        seen = set()
        for r in roots:
            if r in seen:
                continue
            stack = [r]
            seen.add(r)
            while stack:
                u = stack.pop()
                for w in adj[u]:
                    if w not in seen:
                        seen.add(w)
                        parent[w] = u
                        stack.append(w)
        if len(seen) != len(self.bags):
            raise ValueError("roots do not cover every component")
        return TreeDecomposition(self.n, self.bags, self.edges, tuple(parent))

    def serialize(self, names=None) -> str:
        names = names or [f"v{i}" for i in range(self.n)]
        lines = []
        for t in self.nodes:
            vs = " ".join(names[i] for i in range(self.n) if self.bags[t] >> i & 1)
            lines.append(f"bag {t}: {vs}")
        for e in sorted(tuple(sorted(e)) for e in self.edges):
            lines.append(f"edge {e[0]} {e[1]}")
        return "\n".join(lines) + "\n"


def parse_decomposition(text: str, names: list[str]) -> TreeDecomposition:
    """Inverse of :meth:`TreeDecomposition.serialize` for a known universe."""
    index = {nm: i for i, nm in enumerate(names)}
    bags: dict[int, int] = {}
    edges = set()
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, rest = line.split(None, 1)
        if kind == "bag":
            head, vs = rest.split(":", 1)
            mask = 0
            for nm in vs.split():
                mask |= 1 << index[nm]
            bags[int(head)] = mask
        elif kind == "edge":
            a, b = rest.split()
            edges.add(frozenset((int(a), int(b))))
        else:
            raise ValueError(f"unknown line kind {kind!r}")
    bag_list = tuple(bags[i] for i in range(len(bags)))
    td = TreeDecomposition(len(names), bag_list, frozenset(edges),
                           (None,) * len(bag_list))
    roots = _default_roots(td)
    return td.reroot(roots)


def _default_roots(td: TreeDecomposition):
    seen = set()
    roots = []
    for t in td.nodes:  # smallest node id per component
        if t in seen:
            continue
        roots.append(t)
        stack = [t]
        seen.add(t)
        while stack:
            u = stack.pop()
            for w in td.neighbors(u):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
    return roots


@dataclass(frozen=True)
class DecompositionClass:
    chordal: bool
    acyclic: bool
    simple: bool
    totally_disconnected: bool


def validate(td: TreeDecomposition, q: ConjunctiveQuery | None = None) -> None:
    """Check forest shape, parent consistency, running intersection, and
    (when a query is given) atom coverage.  Raises ValueError on failure."""
    m = len(td.bags)
    for e in td.edges:
        if len(e) != 2 or not all(0 <= t < m for t in e):
            raise ValueError(f"bad edge {set(e)}")
    # forest: union-find over edges must never merge an existing component
    root = list(range(m))

    def find(x):
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    for e in td.edges:
        a, b = tuple(e)
        ra, rb = find(a), find(b)
        if ra == rb:
            raise ValueError("edges contain a cycle")
        root[ra] = rb
    for t in td.nodes:
        p = td.parent[t]
        if p is not None and frozenset((t, p)) not in td.edges:
            raise ValueError(f"parent of {t} is not an edge")
    n_roots = sum(1 for t in td.nodes if td.parent[t] is None)
    if n_roots != len({find(t) for t in td.nodes}):
        raise ValueError("orientation roots do not match components")
    # parent orientation must be acyclic toward roots
    for t in td.nodes:
        seen = set()
        u = t
        while u is not None:
            if u in seen:
                raise ValueError("parent pointers contain a cycle")
            seen.add(u)
            u = td.parent[u]
    # running intersection per variable
    for i in range(td.n):
        holders = [t for t in td.nodes if td.bags[t] >> i & 1]
        if not holders:
            continue
        reach = {holders[0]}
        stack = [holders[0]]
        holder_set = set(holders)
        while stack:
            u = stack.pop()
            for w in td.neighbors(u):
                if w in holder_set and w not in reach:
                    reach.add(w)
                    stack.append(w)
        if reach != holder_set:
            raise ValueError(f"variable {i} induces a disconnected subtree")
    if q is not None:
        for a in q.atoms:
            if not any(a.var_mask & ~td.bags[t] == 0 for t in td.nodes):
                raise ValueError(f"atom {a.unparse()} not covered by any bag")


# ---------------------------------------------------------------------------
# chordality and junction trees

def is_chordal(adj: dict[int, set[int]]):
    """Maximum Cardinality Search chordality test.

    Returns ``(True, elimination_order)`` where the order is a perfect
    elimination order (reverse MCS visit order), or ``(False, None)``.
    """
    nodes = sorted(adj)
    visited: list[int] = []
    weight = {v: 0 for v in nodes}
    pos = {}
    while len(visited) < len(nodes):
        best = max((v for v in nodes if v not in pos),
                   key=lambda v: (weight[v], -v))
        pos[best] = len(visited)
        visited.append(best)
        for w in adj[best]:
            if w not in pos:
                weight[w] += 1
    for v in visited[1:]:
        earlier = [u for u in adj[v] if pos[u] < pos[v]]
        if not earlier:
            continue
        parent = max(earlier, key=lambda u: pos[u])
        rest = set(earlier) - {parent}
        if not rest <= adj[parent]:
            return False, None
    return True, list(reversed(visited))


def _maximal_cliques_chordal(adj: dict[int, set[int]]):
    ok, _ = is_chordal(adj)
    if not ok:
        raise NotChordal("graph is not chordal")
    nodes = sorted(adj)
    visited: list[int] = []
    pos = {}
    weight = {v: 0 for v in nodes}
    candidates = []
    while len(visited) < len(nodes):
        best = max((v for v in nodes if v not in pos),
                   key=lambda v: (weight[v], -v))
        pos[best] = len(visited)
        visited.append(best)
        earlier = frozenset(u for u in adj[best] if u in pos and u != best)
        candidates.append(frozenset({best}) | earlier)
        for w in adj[best]:
            if w not in pos:
                weight[w] += 1
    cliques = []
    for c in candidates:
        if not any(c < d for d in candidates):
            cliques.append(c)
    masks = sorted({sum(1 << v for v in c) for c in cliques})
    return masks


def _mst_forest(bag_masks):
    """Maximum-separator-weight spanning forest over the clique graph."""
    m = len(bag_masks)
    edges = []
    for i in range(m):
        for j in range(i + 1, m):
            w = popcount(bag_masks[i] & bag_masks[j])
            if w > 0:
                edges.append((w, i, j))
    edges.sort(key=lambda e: (-e[0], e[1], e[2]))
    root = list(range(m))

    def find(x):
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    chosen = set()
    for w, i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            root[ri] = rj
            chosen.add(frozenset((i, j)))
    return frozenset(chosen)


def junction_tree(q: ConjunctiveQuery) -> TreeDecomposition:
    """Junction tree of a chordal query: bags are the maximal cliques of the
    Gaifman graph, joined by a maximum-separator-weight spanning forest."""
    adj = gaifman_graph(q)
    masks = _maximal_cliques_chordal(adj)
    edges = _mst_forest(masks)
    td = TreeDecomposition(q.n, tuple(masks), edges, (None,) * len(masks))
    td = td.reroot(_default_roots(td))
    validate(td, q)
    return td


def trivial_decomposition(q: ConjunctiveQuery) -> TreeDecomposition:
    """Single bag holding every variable; valid for any query."""
    return TreeDecomposition(q.n, (q.all_vars_mask,), frozenset(), (None,))


def is_acyclic(q: ConjunctiveQuery) -> bool:
    """GYO reduction over the hypergraph of atom variable sets."""
    edges = sorted({a.var_mask for a in q.atoms})
    changed = True
    while changed and edges:
        changed = False
        # drop edges contained in another edge
        for i, e in enumerate(edges):
            if any(j != i and e & ~f == 0 for j, f in enumerate(edges)):
                edges.pop(i)
                changed = True
                break
        if changed:
            continue
        # remove isolated "ear" variables occurring in exactly one edge
        occurs: dict[int, int] = {}
        for e in edges:
            mask = e
            while mask:
                bit = mask & -mask
                occurs[bit] = occurs.get(bit, 0) + 1
                mask ^= bit
        lonely = 0
        for bit, cnt in occurs.items():
            if cnt == 1:
                lonely |= bit
        if lonely:
            edges = sorted({e & ~lonely for e in edges} - {0}) or []
            changed = True
    return not edges


def classify(td: TreeDecomposition, q: ConjunctiveQuery | None = None) -> DecompositionClass:
    """Flags for a (validated) decomposition; acyclicity is a query property
    and reported when the query is supplied, else derived from the bags."""
    seps = [popcount(td.bags[a] & td.bags[b]) for a, b in
            (tuple(e) for e in td.edges)]
    simple = all(s <= 1 for s in seps)
    totally_disconnected = all(s == 0 for s in seps)
    if q is not None:
        acyclic = is_acyclic(q)
        chordal = is_chordal(gaifman_graph(q))[0]
    else:
        atom_masks = set(td.bags)
        acyclic = all(b in atom_masks for b in td.bags)
        chordal = True
    return DecompositionClass(chordal=chordal, acyclic=acyclic, simple=simple,
                              totally_disconnected=totally_disconnected)


# ---------------------------------------------------------------------------
# bag-entropy expressions

def et_expression(td: TreeDecomposition) -> LinearExpression:
    """sum over nodes of h(bag | bag & parent bag), as a coefficient map.

    Equals ``sum h(bag) - sum over edges h(bag1 & bag2)`` and is therefore
    independent of the chosen roots.
    """
    acc: dict[int, Fraction] = {}
    for t in td.nodes:
        acc[td.bags[t]] = acc.get(td.bags[t], Fraction(0)) + 1
        sep = td.separator(t)
        if sep:
            acc[sep] = acc.get(sep, Fraction(0)) - 1
    return LinearExpression.from_dict(td.n, acc)


def et_conditional_terms(td: TreeDecomposition):
    """The (bag, separator) pairs behind :func:`et_expression`."""
    return [(td.bags[t], td.separator(t)) for t in td.nodes]


def et_inclusion_exclusion(td: TreeDecomposition) -> LinearExpression:
    """Inclusion-exclusion form: over every node subset S, the intersection
    of its bags weighted by +-1 and the number of connected components of
    the nodes touching the union of S's bags."""
    m = len(td.bags)
    adj = {t: td.neighbors(t) for t in td.nodes}
    acc: dict[int, Fraction] = {}
    for smask in range(1, 1 << m):
        members = [t for t in range(m) if smask >> t & 1]
        inter = td.bags[members[0]]
        union = 0
        for t in members:
            inter &= td.bags[t]
            union |= td.bags[t]
        if inter == 0:
            continue
        touched = {t for t in td.nodes if td.bags[t] & union}
        cc = 0
        seen: set[int] = set()
        for t in sorted(touched):
            if t in seen:
                continue
            cc += 1
            stack = [t]
            seen.add(t)
            while stack:
                u = stack.pop()
                for w in adj[u]:
                    if w in touched and w not in seen:
                        seen.add(w)
                        stack.append(w)
        sign = 1 if len(members) % 2 == 1 else -1
        acc[inter] = acc.get(inter, Fraction(0)) + sign * cc
    return LinearExpression.from_dict(td.n, acc)


def enumerate_junction_trees(q: ConjunctiveQuery, limit: int = 64):
    """All junction trees (maximum-separator-weight clique-graph spanning
    forests) of a chordal query, truncated at ``limit``.

    Large clique graphs (over 12 cliques or 24 weighted edges) fall back to
    the single deterministic tree from :func:`junction_tree`.
    """
    base = junction_tree(q)
    masks = list(base.bags)
    m = len(masks)
    base_weight = sum(popcount(masks[a] & masks[b])
                      for a, b in (tuple(e) for e in base.edges))
    all_edges = []
    for i in range(m):
        for j in range(i + 1, m):
            w = popcount(masks[i] & masks[j])
            if w > 0:
                all_edges.append((i, j, w))
    if m > 12 or len(all_edges) > 24:
        return [base]
    results = []
    for combo in itertools.combinations(range(len(all_edges)), len(base.edges)):
        if len(results) >= limit:
            break
        if sum(all_edges[k][2] for k in combo) != base_weight:
            continue
        root = list(range(m))

        def find(x):
            while root[x] != x:
                root[x] = root[root[x]]
                x = root[x]
            return x

        acyclic_pick = True
        for k in combo:
            ra, rb = find(all_edges[k][0]), find(all_edges[k][1])
            if ra == rb:
                acyclic_pick = False
                break
            root[ra] = rb
        if not acyclic_pick:
            continue
        chosen = frozenset(frozenset(all_edges[k][:2]) for k in combo)
        td = TreeDecomposition(q.n, tuple(masks), chosen, (None,) * m)
        td = td.reroot(_default_roots(td))
        try:
            validate(td, q)
        except ValueError:
            continue
        results.append(td)
    return results
