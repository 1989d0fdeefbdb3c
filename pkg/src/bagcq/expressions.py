"""Linear expressions over marginal-entropy coordinates, and max-inequalities.

A :class:`LinearExpression` is a finitely supported map from variable subsets
(bitmasks over ``range(n)``) to exact rational coefficients; it denotes
``sum(c_X * h(X))``.  The empty-set coefficient is identically zero.  A
:class:`MaxInequality` asserts ``0 <= max over its expressions``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import QuerySyntaxError


def popcount(mask: int) -> int:
    return mask.bit_count()


def mask_of(ids) -> int:
    m = 0
    for i in ids:
        m |= 1 << i
    return m


def subset_name(mask: int, names) -> str:
    if mask == 0:
        return "{}"
    return ",".join(names[i] for i in range(len(names)) if mask >> i & 1)


@dataclass(frozen=True)
class LinearExpression:
    n: int
    coeffs: tuple[tuple[int, Fraction], ...]  # sorted by mask, zero-free, no empty set

    @staticmethod
    def from_dict(n: int, coeffs: dict) -> "LinearExpression":
        items = []
        for mask, c in sorted(coeffs.items()):
            c = Fraction(c)
            if mask == 0 or c == 0:
                continue
            if mask >= (1 << n) or mask < 0:
                raise ValueError(f"subset {mask:#x} out of range for n={n}")
            items.append((mask, c))
        return LinearExpression(n, tuple(items))

    def as_dict(self) -> dict[int, Fraction]:
        return dict(self.coeffs)

    def evaluate(self, values) -> Fraction:
        """Evaluate on any indexable of length 2^n (h(emptyset) ignored)."""
        return sum((c * values[mask] for mask, c in self.coeffs), start=Fraction(0))

    def evaluate_float(self, values) -> float:
        return sum(float(c) * values[mask] for mask, c in self.coeffs)

    def scaled(self, factor) -> "LinearExpression":
        f = Fraction(factor)
        return LinearExpression.from_dict(self.n, {m: c * f for m, c in self.coeffs})

    def plus(self, other: "LinearExpression") -> "LinearExpression":
        if other.n != self.n:
            raise ValueError("mixed variable universes")
        acc = dict(self.coeffs)
        for m, c in other.coeffs:
            acc[m] = acc.get(m, Fraction(0)) + c
        return LinearExpression.from_dict(self.n, acc)

    def substitute(self, image: dict[int, int], target_n: int) -> "LinearExpression":
        """Re-key every subset through a variable mapping, summing collisions.

        ``image[i]`` is the target variable index of source variable ``i``;
        the mapping must cover every variable appearing in the expression.
        """
        acc: dict[int, Fraction] = {}
        for mask, c in self.coeffs:
            out = 0
            for i in range(self.n):
                if mask >> i & 1:
                    out |= 1 << image[i]
            acc[out] = acc.get(out, Fraction(0)) + c
        return LinearExpression.from_dict(target_n, acc)

    def format(self, names=None) -> str:
        names = names or [f"X{i + 1}" for i in range(self.n)]
        if not self.coeffs:
            return "0"
        parts = []
        for mask, c in self.coeffs:
            term = f"h({subset_name(mask, names)})"
            if c == 1:
                lit = term
            elif c == -1:
                lit = f"-{term}"
            else:
                lit = f"{c} {term}"
            parts.append(lit)
        text = " + ".join(parts)
        return text.replace("+ -", "- ")


def conditional_expression(n: int, y_mask: int, x_mask: int) -> LinearExpression:
    """h(Y|X) = h(X u Y) - h(X)."""
    acc: dict[int, Fraction] = {}
    acc[x_mask | y_mask] = Fraction(1)
    acc[x_mask] = acc.get(x_mask, Fraction(0)) - 1
    return LinearExpression.from_dict(n, acc)


@dataclass(frozen=True)
class MaxInequality:
    n: int
    exprs: tuple[LinearExpression, ...]

    def __post_init__(self):
        if not self.exprs:
            raise ValueError("max-inequality needs at least one expression")
        for e in self.exprs:
            if e.n != self.n:
                raise ValueError("expressions disagree on variable count")

    @property
    def k(self) -> int:
        return len(self.exprs)

    def evaluate(self, values):
        return max(e.evaluate(values) for e in self.exprs)

    def evaluate_float(self, values):
        return max(e.evaluate_float(values) for e in self.exprs)

    def format(self, names=None) -> str:
        if len(self.exprs) == 1:
            return f"0 <= {self.exprs[0].format(names)}"
        body = " ; ".join(e.format(names) for e in self.exprs)
        return f"0 <= max {{ {body} }}"


# ---------------------------------------------------------------------------
# text grammar

class _IneqTokenizer:
    def __init__(self, text):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1
        self.tokens = []
        self._scan()
        self.idx = 0

    def _scan(self):
        text = self.text
        i = 0
        line, col = 1, 1

        def push(kind, value):
            self.tokens.append((kind, value, line, col))

        while i < len(text):
            ch = text[i]
            if ch == "#":
                while i < len(text) and text[i] != "\n":
                    i += 1
                continue
            if ch == "\n":
                line += 1
                col = 1
                i += 1
                continue
            if ch.isspace():
                i += 1
                col += 1
                continue
            if text.startswith("<=", i):
                push("punct", "<=")
                i += 2
                col += 2
                continue
            if ch in "(){};|+-,":
                push("punct", ch)
                i += 1
                col += 1
                continue
            if ch.isdigit():
                j = i
                while j < len(text) and text[j].isdigit():
                    j += 1
                if j < len(text) and text[j] == "/":
                    k = j + 1
                    while k < len(text) and text[k].isdigit():
                        k += 1
                    if k == j + 1:
                        raise QuerySyntaxError("malformed rational", line, col)
                    push("number", Fraction(int(text[i:j]), int(text[j + 1:k])))
                    col += k - i
                    i = k
                else:
                    push("number", Fraction(int(text[i:j])))
                    col += j - i
                    i = j
                continue
            if ch.isalpha() or ch == "_":
                j = i
                while j < len(text) and (text[j].isalnum() or text[j] in "_'"):
                    j += 1
                push("name", text[i:j])
                col += j - i
                i = j
                continue
            raise QuerySyntaxError(f"unexpected character {ch!r}", line, col)
        self.tokens.append(("eof", "", line, col))

    def peek(self):
        return self.tokens[self.idx]

    def next(self):
        t = self.tokens[self.idx]
        self.idx += 1
        return t


def parse_inequality(text: str):
    """Parse ``0 <= <expr>`` or ``0 <= max { <expr> ; ... }``.

    Returns ``(MaxInequality, variable names)``.  Terms are
    ``c h(V1,...,Vk)`` or ``c h(Ys | Xs)`` with optional rational ``c``;
    conditionals expand to ``h(XY) - h(X)``.  Variables are numbered in
    first-appearance order.
    """
    tok = _IneqTokenizer(text)
    names: list[str] = []

    def var_index(nm):
        if nm not in names:
            names.append(nm)
        return names.index(nm)

    def expect_punct(p):
        k, v, line, col = tok.next()
        if k != "punct" or v != p:
            raise QuerySyntaxError(f"expected {p!r}, got {v!r}", line, col)

    def parse_varlist(closers):
        ids = []
        while True:
            k, v, line, col = tok.peek()
            if k == "punct" and v in closers:
                return ids
            k, v, line, col = tok.next()
            if k != "name":
                raise QuerySyntaxError(f"expected variable, got {v!r}", line, col)
            ids.append(var_index(v))
            k2, v2, _, _ = tok.peek()
            if k2 == "punct" and v2 == ",":
                tok.next()

    def parse_expr():
        # list of (sign, coeff, y_ids, x_ids); masks resolved after all names seen
        terms = []
        sign = Fraction(1)
        first = True
        while True:
            k, v, line, col = tok.peek()
            if k == "punct" and v in (";", "}"):
                break
            if k == "eof":
                break
            if k == "punct" and v in "+-":
                tok.next()
                sign = Fraction(1) if v == "+" else Fraction(-1)
            elif not first:
                raise QuerySyntaxError(f"expected '+' or '-', got {v!r}", line, col)
            coeff = Fraction(1)
            k, v, line, col = tok.peek()
            if k == "number":
                tok.next()
                coeff = v
            k, v, line, col = tok.next()
            if k != "name" or v != "h":
                raise QuerySyntaxError(f"expected 'h', got {v!r}", line, col)
            expect_punct("(")
            y_ids = parse_varlist({"|", ")"})
            k, v, line, col = tok.next()
            x_ids = []
            if k == "punct" and v == "|":
                x_ids = parse_varlist({")"})
                k, v, line, col = tok.next()
            if not (k == "punct" and v == ")"):
                raise QuerySyntaxError(f"expected ')', got {v!r}", line, col)
            if not y_ids:
                raise QuerySyntaxError("empty entropy term", line, col)
            terms.append((sign * coeff, y_ids, x_ids))
            sign = Fraction(1)
            first = False
        if not terms:
            raise QuerySyntaxError("empty expression")
        return terms

    k, v, line, col = tok.next()
    if not (k == "number" and v == 0):
        raise QuerySyntaxError(f"inequality must start with 0, got {v!r}", line, col)
    expect_punct("<=")

    k, v, line, col = tok.peek()
    exprs_raw = []
    if k == "name" and v == "max":
        tok.next()
        expect_punct("{")
        while True:
            exprs_raw.append(parse_expr())
            k, v, line, col = tok.next()
            if k == "punct" and v == ";":
                continue
            if k == "punct" and v == "}":
                break
            raise QuerySyntaxError(f"expected ';' or '}}', got {v!r}", line, col)
        k, v, line, col = tok.next()
        if k != "eof":
            raise QuerySyntaxError(f"trailing input {v!r}", line, col)
    else:
        exprs_raw.append(parse_expr())
        k, v, line, col = tok.next()
        if k != "eof":
            raise QuerySyntaxError(f"trailing input {v!r}", line, col)

    n = len(names)
    exprs = []
    for terms in exprs_raw:
        acc: dict[int, Fraction] = {}
        for coeff, y_ids, x_ids in terms:
            ym, xm = mask_of(y_ids), mask_of(x_ids)
            acc[ym | xm] = acc.get(ym | xm, Fraction(0)) + coeff
            if xm:
                acc[xm] = acc.get(xm, Fraction(0)) - coeff
        exprs.append(LinearExpression.from_dict(n, acc))
    return MaxInequality(n, tuple(exprs)), names


# ---------------------------------------------------------------------------
# conditional-form classification

def classify_expression(expr: LinearExpression):
    """Try to write ``expr`` as ``sum d_{Y|X} h(Y|X) - q h(V)`` with d, q >= 0.

    Returns a dict with flags ``conditional_form``, ``simple`` (all |X| <= 1)
    and ``unconditioned`` (all X empty), plus one witnessing decomposition
    ``terms = [(y_mask, x_mask, d), ...]`` and ``q`` when the form exists.
    """
    from . import lp  # local import; lp is a leaf module

    n = expr.n
    full = (1 << n) - 1
    coeffs = expr.as_dict()

    def attempt(allowed_x):
        pairs = []
        for x in allowed_x:
            for rest in range(1, 1 << n):
                y = x | rest
                if y != x:
                    pairs.append((y, x))
        pairs = sorted(set(pairs))
        ncols = len(pairs) + 1  # d variables then q
        rows = []
        for mask in range(1, 1 << n):
            row = [Fraction(0)] * ncols
            for j, (y, x) in enumerate(pairs):
                if y == mask:
                    row[j] += 1
                if x == mask:
                    row[j] -= 1
            if mask == full:
                row[-1] = Fraction(-1)
            rows.append((row, "==", coeffs.get(mask, Fraction(0))))
        res = lp.solve(ncols, [Fraction(1)] * ncols, rows)
        if res.status != "optimal":
            return None
        terms = [(y, x, d) for (y, x), d in zip(pairs, res.x[:-1]) if d != 0]
        return terms, res.x[-1]

    unconditioned = all(c >= 0 for m, c in coeffs.items() if m != full)
    simple_x = [0] + [1 << i for i in range(n)]
    simple_attempt = attempt(simple_x)
    if simple_attempt is not None:
        terms, q = simple_attempt
        return {"conditional_form": True, "simple": True,
                "unconditioned": unconditioned, "terms": terms, "q": q}
    general = attempt(list(range(1 << n)))
    if general is not None:
        terms, q = general
        return {"conditional_form": True, "simple": False,
                "unconditioned": False, "terms": terms, "q": q}
    return {"conditional_form": False, "simple": False, "unconditioned": False,
            "terms": None, "q": None}
