"""Relational structures, V-relations, homomorphism counting, and witnesses.

Values are opaque string tokens; domain-product values are parenthesized
pairs of tokens, which keeps nested products flat, hashable, and sortable.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import HomomorphismLimitExceeded, ResourceCapExceeded
from .queries import ConjunctiveQuery, Variable, gaifman_graph
from . import decompositions


@dataclass(frozen=True)
class RelationalStructure:
    domain: tuple[str, ...]
    relations: dict[str, frozenset[tuple[str, ...]]]

    def sorted_tuples(self, symbol):
        return sorted(self.relations.get(symbol, frozenset()))

    def serialize(self) -> str:
        lines = ["domain: " + " ".join(self.domain)]
        for sym in sorted(self.relations):
            cells = " ".join("(" + ",".join(t) + ")"
                             for t in sorted(self.relations[sym]))
            lines.append(f"{sym}: {cells}")
        return "\n".join(lines) + "\n"


def parse_structure(text: str) -> RelationalStructure:
    domain: tuple[str, ...] = ()
    relations: dict[str, frozenset] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, rest = line.split(":", 1)
        head = head.strip()
        if head == "domain":
            domain = tuple(rest.split())
            continue
        tuples = set()
        for cell in rest.split():
            if not (cell.startswith("(") and cell.endswith(")")):
                raise ValueError(f"malformed tuple {cell!r}")
            tuples.add(tuple(cell[1:-1].split(",")))
        relations[head] = frozenset(tuples)
    return RelationalStructure(domain, relations)


@dataclass(frozen=True)
class VRelation:
    columns: tuple[Variable, ...]
    tuples: frozenset[tuple[str, ...]]

    def __post_init__(self):
        width = len(self.columns)
        if len({c.id for c in self.columns}) != width:
            raise ValueError("duplicate columns")
        for t in self.tuples:
            if len(t) != width:
                raise ValueError("ragged tuple width")

    @property
    def size(self) -> int:
        return len(self.tuples)

    def sorted_tuples(self):
        return sorted(self.tuples)

    def serialize(self) -> str:
        lines = ["cols: " + " ".join(c.name for c in self.columns)]
        for t in self.sorted_tuples():
            lines.append("row: " + " ".join(t))
        return "\n".join(lines) + "\n"


def parse_vrelation(text: str) -> VRelation:
    columns = None
    rows = set()
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, rest = line.split(":", 1)
        head = head.strip()
        if head == "cols":
            names = rest.split()
            columns = tuple(Variable(i, nm) for i, nm in enumerate(names))
        elif head == "row":
            if columns is None:
                raise ValueError("row before cols")
            rows.add(tuple(rest.split()))
        else:
            raise ValueError(f"unknown line kind {head!r}")
    if columns is None:
        raise ValueError("missing cols line")
    return VRelation(columns, frozenset(rows))


@dataclass(frozen=True)
class NormalRelationSpec:
    """Iterated domain product of two-tuple step relations."""

    n: int
    factors: tuple[tuple[int, int], ...]  # (subset mask, multiplicity), mask proper

    def __post_init__(self):
        full = (1 << self.n) - 1
        for mask, mult in self.factors:
            if mask & ~full or mask == full:
                raise ValueError("factor subset must be proper")
            if mult < 1:
                raise ValueError("multiplicity must be positive")

    @property
    def total_multiplicity(self) -> int:
        return sum(m for _, m in self.factors)


# ---------------------------------------------------------------------------
# constructions

def canonical_structure(q: ConjunctiveQuery) -> RelationalStructure:
    """Domain is vars(q); one tuple per atom."""
    relations: dict[str, set] = {sym: set() for sym in q.vocabulary.arities}
    for a in q.atoms:
        relations[a.relation].add(tuple(v.name for v in a.args))
    return RelationalStructure(tuple(v.name for v in q.vars),
                               {s: frozenset(ts) for s, ts in relations.items()})


def generalized_projection(p: VRelation, phi) -> frozenset:
    """``{f o phi : f in p}`` where ``phi`` is a sequence of source columns
    (one per target position, repeats allowed)."""
    col_index = {c.id: i for i, c in enumerate(p.columns)}
    try:
        positions = [col_index[v.id] for v in phi]
    except KeyError as e:
        raise ValueError(f"projection target uses unknown column {e}") from e
    return frozenset(tuple(t[i] for i in positions) for t in p.tuples)


def induce_database(q1: ConjunctiveQuery, p: VRelation) -> RelationalStructure:
    """Project ``p`` on every atom of ``q1`` and union per relation symbol."""
    if tuple(c.id for c in p.columns) != tuple(v.id for v in q1.vars):
        raise ValueError("relation columns must equal vars(q1)")
    relations: dict[str, set] = {sym: set() for sym in q1.vocabulary.arities}
    for a in q1.atoms:
        relations[a.relation] |= generalized_projection(p, a.args)
    domain = sorted({v for t in p.tuples for v in t})
    return RelationalStructure(tuple(domain),
                               {s: frozenset(ts) for s, ts in relations.items()})


def domain_product(p1: VRelation, p2: VRelation) -> VRelation:
    if p1.columns != p2.columns:
        raise ValueError("domain product requires identical column lists")
    tuples = frozenset(
        tuple(f"({a},{b})" for a, b in zip(f, g))
        for f in p1.tuples for g in p2.tuples)
    return VRelation(p1.columns, tuples)


def step_relation(w_mask: int, columns: tuple[Variable, ...]) -> VRelation:
    """Two tuples: all ones, and ones on ``w_mask`` / twos elsewhere."""
    full = (1 << len(columns)) - 1
    if w_mask & ~full or w_mask == full:
        raise ValueError("step subset must be a proper subset of the columns")
    f1 = tuple("1" for _ in columns)
    f2 = tuple("1" if w_mask >> c.id & 1 else "2" for c in columns)
    return VRelation(columns, frozenset({f1, f2}))


def canonicalize_columns(p: VRelation) -> VRelation:
    """Rename values per column to 1,2,... in first-occurrence order over the
    sorted tuple list.  Tuple count and all marginal counts are preserved."""
    maps: list[dict[str, str]] = [dict() for _ in p.columns]
    rows = []
    for t in p.sorted_tuples():
        out = []
        for i, v in enumerate(t):
            if v not in maps[i]:
                maps[i][v] = str(len(maps[i]) + 1)
            out.append(maps[i][v])
        rows.append(tuple(out))
    return VRelation(p.columns, frozenset(rows))


def annotate_columns(p: VRelation) -> VRelation:
    """Prefix every value with its column name, making columns disjoint."""
    tuples = frozenset(
        tuple(f"{c.name}:{v}" for c, v in zip(p.columns, t)) for t in p.tuples)
    return VRelation(p.columns, tuples)


def materialize_normal(spec: NormalRelationSpec, columns: tuple[Variable, ...],
                       size_cap: int = 4096) -> VRelation:
    """Iterated domain product of step relations, with canonical values.

    The result has ``2 ** total_multiplicity`` tuples and its entropy equals
    the weighted sum of the factor step functions.
    """
    total = spec.total_multiplicity
    if 1 << total > size_cap:
        raise ResourceCapExceeded("witness tuples", 1 << total, size_cap)
    acc = VRelation(columns, frozenset({tuple("1" for _ in columns)}))
    for mask, mult in sorted(spec.factors):
        for _ in range(mult):
            acc = domain_product(acc, step_relation(mask, columns))
    return canonicalize_columns(acc)


def disjoint_copies(a: RelationalStructure, n: int) -> RelationalStructure:
    if n < 1:
        raise ValueError("need at least one copy")
    domain = tuple(f"{v}@{i}" for i in range(1, n + 1) for v in a.domain)
    relations = {}
    for sym, ts in a.relations.items():
        out = set()
        for i in range(1, n + 1):
            out |= {tuple(f"{v}@{i}" for v in t) for t in ts}
        relations[sym] = frozenset(out)
    return RelationalStructure(domain, relations)


# ---------------------------------------------------------------------------
# homomorphisms

class _HomSearch:
    """Element-driven backtracking with forward checking.

    Elements of ``b`` are assigned in domain order, candidates in ``a``
    domain order, which makes the enumeration order lexicographic.
    """

    def __init__(self, b: RelationalStructure, a: RelationalStructure,
                 node_cap: int | None = None):
        self.b = b
        self.a = a
        self.elems = list(b.domain)
        self.index = {e: i for i, e in enumerate(self.elems)}
        self.a_domain = list(a.domain)
        self.node_cap = node_cap
        self.nodes = 0
        # constraints: (relation tuples of a, b-tuple as element-index tuple)
        self.constraints = []
        for sym, ts in b.relations.items():
            a_tuples = a.relations.get(sym, frozenset())
            for t in sorted(ts):
                self.constraints.append(
                    (tuple(self.index[v] for v in t), a_tuples))
        # constraints touching element i whose max element index is i
        self.checks_at = [[] for _ in self.elems]
        self.touching = [[] for _ in self.elems]
        for ci, (positions, _) in enumerate(self.constraints):
            if positions:
                self.checks_at[max(positions)].append(ci)
                for e in set(positions):
                    self.touching[e].append(ci)

    def _consistent(self, assign, upto):
        for ci in self.checks_at[upto]:
            positions, a_tuples = self.constraints[ci]
            image = tuple(assign[p] for p in positions)
            if image not in a_tuples:
                return False
        # forward check: every partially assigned tuple must stay matchable
        for ci in self.touching[upto]:
            positions, a_tuples = self.constraints[ci]
            if max(positions) <= upto:
                continue
            ok = False
            for cand in a_tuples:
                if all(assign[p] == cand[k] for k, p in enumerate(positions)
                       if p <= upto):
                    ok = True
                    break
            if not ok:
                return False
        return True

    def run(self):
        m = len(self.elems)
        if m == 0:
            yield {}
            return
        assign: list = [None] * m

        def rec(i):
            for val in self.a_domain:
                self.nodes += 1
                if self.node_cap is not None and self.nodes > self.node_cap:
                    raise ResourceCapExceeded("homomorphism search nodes",
                                              self.nodes, self.node_cap)
                assign[i] = val
                if self._consistent(assign, i):
                    if i + 1 == m:
                        yield dict(zip(self.elems, assign))
                    else:
                        yield from rec(i + 1)
            assign[i] = None

        yield from rec(0)


def enumerate_homomorphisms(b: RelationalStructure, a: RelationalStructure,
                            limit: int | None = None,
                            node_cap: int | None = None):
    """All maps f with f(R^B) subseteq R^A, in lexicographic domain order."""
    out = []
    for hom in _HomSearch(b, a, node_cap).run():
        out.append(hom)
        if limit is not None and len(out) > limit:
            raise HomomorphismLimitExceeded(len(out))
    return out


def count_homomorphisms_upto(b, a, bound: int, node_cap: int | None = None) -> int:
    """Count homomorphisms but stop once ``bound`` are seen (early exit)."""
    count = 0
    for _ in _HomSearch(b, a, node_cap).run():
        count += 1
        if count >= bound:
            return count
    return count


def count_homomorphisms(q: ConjunctiveQuery, d: RelationalStructure,
                        node_cap: int | None = 10 ** 8) -> int:
    """|hom(canonical(q), d)|, by junction-tree dynamic programming when the
    query is chordal, otherwise by backtracking."""
    if q.atoms and decompositions.is_chordal(gaifman_graph(q))[0]:
        return _count_by_decomposition(q, d, node_cap)
    b = canonical_structure(q)
    count = 0
    for _ in _HomSearch(b, d, node_cap).run():
        count += 1
    return count


def _bag_assignments(q, d, bag_mask, node_budget):
    """Distinct assignments of the bag's variables satisfying every atom
    whose variables lie inside the bag."""
    bag_vars = [v for v in q.vars if bag_mask >> v.id & 1]
    local_atoms = [a for a in q.atoms if a.var_mask & ~bag_mask == 0]
    partial: list[dict] = [{}]
    for atom in local_atoms:
        tuples = sorted(d.relations.get(atom.relation, frozenset()))
        nxt = []
        for asg in partial:
            for t in tuples:
                merged = dict(asg)
                ok = True
                for v, val in zip(atom.args, t):
                    if merged.get(v.id, val) != val:
                        ok = False
                        break
                    merged[v.id] = val
                if ok:
                    nxt.append(merged)
            node_budget[0] -= len(tuples)
            if node_budget[0] < 0:
                raise ResourceCapExceeded("hom-count DP nodes")
        partial = nxt
        if not partial:
            return {}, [v.id for v in bag_vars]
    # dedupe and extend over variables not covered by local atoms
    covered = set()
    for a in local_atoms:
        covered.update(v.id for v in a.args)
    free = [v.id for v in bag_vars if v.id not in covered]
    seen: dict[tuple, int] = {}
    order = [v.id for v in bag_vars]
    for asg in partial:
        combos = [asg]
        for fv in free:
            combos = [{**c, fv: val} for c in combos for val in d.domain]
            node_budget[0] -= len(combos)
            if node_budget[0] < 0:
                raise ResourceCapExceeded("hom-count DP nodes")
        for c in combos:
            seen[tuple(c[i] for i in order)] = 1
    return seen, order


def _count_by_decomposition(q, d, node_cap):
    td = decompositions.junction_tree(q)
    budget = [node_cap if node_cap is not None else float("inf")]
    tables = {}
    orders = {}
    for t in td.nodes:
        tables[t], orders[t] = _bag_assignments(q, d, td.bags[t], budget)
    children: dict[int, list[int]] = {t: [] for t in td.nodes}
    roots = []
    for t in td.nodes:
        p = td.parent[t]
        if p is None:
            roots.append(t)
        else:
            children[p].append(t)

    def process(t) -> dict:
        table = dict(tables[t])
        order = orders[t]
        for ch in children[t]:
            child_counts = process(ch)
            sep = td.bags[ch] & td.bags[t]
            sep_ids = [i for i in orders[ch] if sep >> i & 1]
            grouped: dict[tuple, int] = {}
            for key, cnt in child_counts.items():
                asg = dict(zip(orders[ch], key))
                gkey = tuple(asg[i] for i in sep_ids)
                grouped[gkey] = grouped.get(gkey, 0) + cnt
            for key in list(table):
                asg = dict(zip(order, key))
                gkey = tuple(asg[i] for i in sep_ids)
                factor = grouped.get(gkey, 0)
                if factor:
                    table[key] *= factor
                else:
                    del table[key]
        return table

    total = 1
    for r in roots:
        total *= sum(process(r).values())
    return total


# ---------------------------------------------------------------------------
# witnesses

@dataclass(frozen=True)
class WitnessCheck:
    ok: bool | None            # None when the count cap was hit
    p_size: int
    hom_count: int | None
    indeterminate: bool


def verify_witness(q1: ConjunctiveQuery, q2: ConjunctiveQuery, p: VRelation,
                   node_cap: int | None = 10 ** 8) -> WitnessCheck:
    """Does ``p`` prove non-containment, i.e. |p| > |hom(q2, induced db)|?"""
    db = induce_database(q1, p)
    try:
        cnt = count_homomorphisms(q2, db, node_cap)
    except ResourceCapExceeded:
        return WitnessCheck(None, p.size, None, True)
    return WitnessCheck(p.size > cnt, p.size, cnt, False)
