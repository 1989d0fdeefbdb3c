"""Conjunctive queries, vocabularies, the surface grammar, and preprocessing.

Variables are numbered densely in first-occurrence order, so every variable
set downstream is a bitmask over ``range(len(q.vars))``.  Queries are
immutable; all operations return new objects.

Grammar (UTF-8 text, ``#`` starts a comment to end of line)::

    query  := name ( "(" varlist? ")" )? ":-" atomlist? "."
    atom   := relname "(" var ("," var)* ")"
    names  := [A-Za-z_][A-Za-z0-9_']*

The head parenthesis group is optional for Boolean queries.  An empty atom
list is accepted (the query with no atoms has exactly one homomorphism into
every database).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ArityMismatch, QuerySyntaxError, ResourceCapExceeded

#: Default cap on query variables; bitmask width and 2^n lattices depend on it.
MAX_QUERY_VARS = 16


@dataclass(frozen=True, order=True)
class Variable:
    id: int
    name: str


@dataclass(frozen=True)
class Atom:
    relation: str
    args: tuple[Variable, ...]

    @property
    def var_mask(self) -> int:
        m = 0
        for v in self.args:
            m |= 1 << v.id
        return m

    def unparse(self) -> str:
        return f"{self.relation}({','.join(v.name for v in self.args)})"


@dataclass(frozen=True)
class Vocabulary:
    """Relation symbol -> arity.  ``projections`` records generated symbols."""

    arities: dict[str, int] = field(default_factory=dict)
    projections: dict[str, tuple[str, tuple[int, ...]]] = field(default_factory=dict)

    def arity(self, symbol: str) -> int:
        return self.arities[symbol]

    def check(self) -> None:
        for sym, a in self.arities.items():
            if a < 1:
                raise ArityMismatch(f"relation {sym} has arity {a} < 1")


@dataclass(frozen=True)
class ConjunctiveQuery:
    name: str
    vars: tuple[Variable, ...]
    atoms: tuple[Atom, ...]
    head: tuple[Variable, ...]
    vocabulary: Vocabulary

    @property
    def n(self) -> int:
        return len(self.vars)

    @property
    def all_vars_mask(self) -> int:
        return (1 << self.n) - 1

    @property
    def is_boolean(self) -> bool:
        return not self.head

    def var_named(self, name: str) -> Variable:
        for v in self.vars:
            if v.name == name:
                return v
        raise KeyError(name)

    def unparse(self) -> str:
        head = f"({','.join(v.name for v in self.head)})" if self.head else "()"
        body = ", ".join(a.unparse() for a in self.atoms)
        return f"{self.name}{head} :- {body}."


def make_query(name, var_names, atoms_spec, head_names=(), vocab=None,
               max_vars=MAX_QUERY_VARS) -> ConjunctiveQuery:
    """Build a validated query from ``atoms_spec = [(rel, [varname, ...]), ...]``.

    Variables are numbered in ``var_names`` order; the vocabulary is inferred
    from arities when not supplied.  Repeated atoms are removed eagerly
    (bag-set semantics makes them redundant).
    """
    if len(var_names) > max_vars:
        raise ResourceCapExceeded("query variables", len(var_names), max_vars)
    if len(set(var_names)) != len(var_names):
        raise QuerySyntaxError(f"duplicate variable name in {var_names}")
    variables = tuple(Variable(i, nm) for i, nm in enumerate(var_names))
    by_name = {v.name: v for v in variables}

    inferred = {}
    atoms = []
    seen = set()
    for rel, args in atoms_spec:
        avars = tuple(by_name[a] for a in args)
        if vocab is not None:
            if rel not in vocab.arities:
                raise ArityMismatch(f"unknown relation {rel}")
            if vocab.arity(rel) != len(avars):
                raise ArityMismatch(
                    f"relation {rel} used with arity {len(avars)}, declared {vocab.arity(rel)}")
        else:
            prev = inferred.setdefault(rel, len(avars))
            if prev != len(avars):
                raise ArityMismatch(
                    f"relation {rel} used with arities {prev} and {len(avars)}")
        atom = Atom(rel, avars)
        key = (rel, avars)
        if key not in seen:
            seen.add(key)
            atoms.append(atom)

    used = set()
    for a in atoms:
        used.update(v.id for v in a.args)
    for v in variables:
        if v.id not in used:
            raise QuerySyntaxError(f"variable {v.name} occurs in no atom")
    head = tuple(by_name[nm] for nm in head_names)

    if vocab is None:
        vocab = Vocabulary(inferred)
    vocab.check()
    return ConjunctiveQuery(name, variables, tuple(atoms), head, vocab)


# ---------------------------------------------------------------------------
# parsing

class _Tokenizer:
    PUNCT = {"(", ")", ",", ".", ":-"}

    def __init__(self, text):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def error(self, msg):
        raise QuerySyntaxError(msg, self.line, self.col)

    def _advance(self, k):
        for ch in self.text[self.pos:self.pos + k]:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += k

    def _skip_ws(self):
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "#":
                while self.pos < len(self.text) and self.text[self.pos] != "\n":
                    self._advance(1)
            elif ch.isspace():
                self._advance(1)
            else:
                break

    def next(self):
        """Return (kind, value, line, col); kind in {'name','punct','eof'}."""
        self._skip_ws()
        if self.pos >= len(self.text):
            return ("eof", "", self.line, self.col)
        line, col = self.line, self.col
        if self.text.startswith(":-", self.pos):
            self._advance(2)
            return ("punct", ":-", line, col)
        ch = self.text[self.pos]
        if ch in "(),.":
            self._advance(1)
            return ("punct", ch, line, col)
        if ch.isalpha() or ch == "_":
            j = self.pos
            while j < len(self.text) and (self.text[j].isalnum() or self.text[j] in "_'"):
                j += 1
            value = self.text[self.pos:j]
            self._advance(j - self.pos)
            return ("name", value, line, col)
        self.error(f"unexpected character {ch!r}")


def parse_query(text: str, vocab: Vocabulary | None = None,
                max_vars: int = MAX_QUERY_VARS) -> ConjunctiveQuery:
    """Parse one query; variables numbered by first occurrence."""
    tok = _Tokenizer(text)

    def expect(kind, value=None):
        k, v, line, col = tok.next()
        if k != kind or (value is not None and v != value):
            raise QuerySyntaxError(
                f"expected {value or kind}, got {v!r}", line, col)
        return v

    qname = expect("name")
    k, v, line, col = tok.next()
    head_names = []
    if k == "punct" and v == "(":
        k, v, line, col = tok.next()
        while not (k == "punct" and v == ")"):
            if k != "name":
                raise QuerySyntaxError(f"expected variable, got {v!r}", line, col)
            head_names.append(v)
            k, v, line, col = tok.next()
            if k == "punct" and v == ",":
                k, v, line, col = tok.next()
            elif not (k == "punct" and v == ")"):
                raise QuerySyntaxError(f"expected ',' or ')', got {v!r}", line, col)
        k, v, line, col = tok.next()
    if not (k == "punct" and v == ":-"):
        raise QuerySyntaxError(f"expected ':-', got {v!r}", line, col)

    var_order: list[str] = []
    atoms_spec = []

    def note_var(nm):
        if nm not in var_order:
            var_order.append(nm)

    k, v, line, col = tok.next()
    while not (k == "punct" and v == "."):
        if k != "name":
            raise QuerySyntaxError(f"expected relation name, got {v!r}", line, col)
        rel = v
        expect("punct", "(")
        args = []
        k, v, line, col = tok.next()
        while not (k == "punct" and v == ")"):
            if k != "name":
                raise QuerySyntaxError(f"expected variable, got {v!r}", line, col)
            args.append(v)
            note_var(v)
            k, v, line, col = tok.next()
            if k == "punct" and v == ",":
                k, v, line, col = tok.next()
            elif not (k == "punct" and v == ")"):
                raise QuerySyntaxError(f"expected ',' or ')', got {v!r}", line, col)
        if not args:
            raise QuerySyntaxError("empty atom argument list", line, col)
        atoms_spec.append((rel, args))
        k, v, line, col = tok.next()
        if k == "punct" and v == ",":
            k, v, line, col = tok.next()
        elif not (k == "punct" and v == "."):
            raise QuerySyntaxError(f"expected ',' or '.', got {v!r}", line, col)
    k, v, line, col = tok.next()
    if k != "eof":
        raise QuerySyntaxError(f"trailing input {v!r}", line, col)

    for nm in head_names:
        if nm not in var_order:
            raise QuerySyntaxError(f"head variable {nm} occurs in no atom")
    return make_query(qname, var_order, atoms_spec, head_names, vocab, max_vars)


# ---------------------------------------------------------------------------
# preprocessing reductions

def _fresh_symbol(base: str, taken: set[str]) -> str:
    sym = base
    while sym in taken:
        sym += "'"
    return sym


def booleanize(q1: ConjunctiveQuery, q2: ConjunctiveQuery):
    """Reduce containment of queries with heads to Boolean containment.

    Adds one fresh unary atom per head position to both queries (head
    variables are matched positionally) and empties the heads.  Boolean
    inputs are returned unchanged.
    """
    if len(q1.head) != len(q2.head):
        raise ArityMismatch(
            f"head arity mismatch: {len(q1.head)} vs {len(q2.head)}")
    if not q1.head:
        return q1, q2
    taken = set(q1.vocabulary.arities) | set(q2.vocabulary.arities)
    marker_syms = []
    for i in range(len(q1.head)):
        sym = _fresh_symbol(f"U{i + 1}", taken)
        taken.add(sym)
        marker_syms.append(sym)

    def extend(q):
        spec = [(a.relation, [v.name for v in a.args]) for a in q.atoms]
        for sym, hv in zip(marker_syms, q.head):
            spec.append((sym, [hv.name]))
        return make_query(q.name, [v.name for v in q.vars], spec, ())

    return extend(q1), extend(q2)


def _proper_position_subsets(arity):
    # nonempty proper subsets of positions, ordered by (size, positions)
    subsets = []
    for mask in range(1, (1 << arity) - 1):
        positions = tuple(i for i in range(arity) if mask >> i & 1)
        subsets.append(positions)
    subsets.sort(key=lambda s: (len(s), s))
    return subsets


def close_vocabulary(q1: ConjunctiveQuery, q2: ConjunctiveQuery,
                     arity_cap: int | None = None, max_atoms: int = 2000):
    """Close both queries under positional projections of their atoms.

    For every atom R(x) and every nonempty proper subset S of its positions,
    both queries gain the atom R_S(x|_S) over a generated |S|-ary symbol.
    The containment verdict is invariant under this transform.  Generated
    symbols are never projected again, which makes the operation idempotent.
    """
    if q1.head or q2.head:
        raise ArityMismatch("close_vocabulary requires Boolean queries")
    max_arity = max([*q1.vocabulary.arities.values(),
                     *q2.vocabulary.arities.values()], default=1)
    if arity_cap is not None and arity_cap < max_arity:
        raise ArityMismatch(f"arity_cap {arity_cap} below max arity {max_arity}")

    base_syms = {}
    for q in (q1, q2):
        for sym, ar in q.vocabulary.arities.items():
            if sym not in q.vocabulary.projections:
                base_syms[sym] = ar
    taken = set(q1.vocabulary.arities) | set(q2.vocabulary.arities)
    proj_names: dict[tuple[str, tuple[int, ...]], str] = {}
    for sym, ar in sorted(base_syms.items()):
        for positions in _proper_position_subsets(ar):
            name = _fresh_symbol(
                sym + "__" + "_".join(str(p + 1) for p in positions), taken)
            taken.add(name)
            proj_names[(sym, positions)] = name

    def extend(q):
        spec = [(a.relation, [v.name for v in a.args]) for a in q.atoms]
        projections = dict(q.vocabulary.projections)
        for a in q.atoms:
            if a.relation in q.vocabulary.projections:
                continue
            for positions in _proper_position_subsets(len(a.args)):
                name = proj_names[(a.relation, positions)]
                spec.append((name, [a.args[p].name for p in positions]))
                projections[name] = (a.relation, positions)
            if len(spec) > max_atoms:
                raise ResourceCapExceeded("closure atoms", len(spec), max_atoms)
        out = make_query(q.name, [v.name for v in q.vars], spec, ())
        return ConjunctiveQuery(out.name, out.vars, out.atoms, out.head,
                                Vocabulary(out.vocabulary.arities, projections))

    return extend(q1), extend(q2)


def gaifman_graph(q: ConjunctiveQuery) -> dict[int, set[int]]:
    """Adjacency map over variable ids: an edge iff two variables co-occur."""
    adj: dict[int, set[int]] = {v.id: set() for v in q.vars}
    for a in q.atoms:
        ids = sorted({v.id for v in a.args})
        for i, u in enumerate(ids):
            for w in ids[i + 1:]:
                adj[u].add(w)
                adj[w].add(u)
    return adj
