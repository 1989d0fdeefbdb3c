"""Set functions over the subset lattice: entropies, polymatroids, normality.

Two numeric regimes coexist.  Synthetic functions carry exact ``Fraction``
values; entropies of relations are base-2 floats compared with tolerance
``REAL_TOL``.  The regime travels with the function (``exact`` flag) and
mixing requires an explicit conversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .expressions import popcount, subset_name
from .relations import VRelation

REAL_TOL = 1e-9


@dataclass(frozen=True)
class SetFunction:
    n: int
    values: tuple
    exact: bool

    def __post_init__(self):
        if len(self.values) != 1 << self.n:
            raise ValueError("need one value per subset")
        if self.values[0] != 0:
            raise ValueError("value at the empty set must be 0")

    @staticmethod
    def from_values(n, values, exact=True) -> "SetFunction":
        if exact:
            return SetFunction(n, tuple(Fraction(v) for v in values), True)
        return SetFunction(n, tuple(float(v) for v in values), False)

    def value(self, mask: int):
        return self.values[mask]

    def tol(self):
        return Fraction(0) if self.exact else REAL_TOL

    def to_exact(self, max_denominator: int = 1 << 20) -> "SetFunction":
        """Round each value onto the grid of denominator ``max_denominator``."""
        if self.exact:
            return self
        vals = [Fraction(round(v * max_denominator), max_denominator)
                for v in self.values]
        return SetFunction(self.n, tuple(vals), True)

    def to_real(self) -> "SetFunction":
        if not self.exact:
            return self
        return SetFunction(self.n, tuple(float(v) for v in self.values), False)

    def serialize(self, names=None) -> str:
        names = names or [f"X{i + 1}" for i in range(self.n)]
        lines = []
        for mask in range(1, 1 << self.n):
            lines.append(f"h({subset_name(mask, names)}) = {self.values[mask]}")
        return "\n".join(lines) + "\n"


def parse_setfunction(text: str) -> tuple[SetFunction, list[str]]:
    """Parse ``h(<vars>) = <value>`` lines; every nonempty subset must appear."""
    entries = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        lhs, rhs = line.split("=", 1)
        lhs = lhs.strip()
        if not (lhs.startswith("h(") and lhs.endswith(")")):
            raise ValueError(f"malformed line {line!r}")
        vars_part = lhs[2:-1].strip()
        var_names = [v.strip() for v in vars_part.split(",")] if vars_part else []
        rhs = rhs.strip()
        value = Fraction(rhs) if "." not in rhs and "e" not in rhs.lower() \
            else float(rhs)
        entries.append((var_names, value))
    names: list[str] = []
    for var_names, _ in entries:
        for nm in var_names:
            if nm not in names:
                names.append(nm)
    n = len(names)
    exact = all(isinstance(v, Fraction) for _, v in entries)
    values = [None] * (1 << n)
    values[0] = Fraction(0) if exact else 0.0
    for var_names, value in entries:
        mask = 0
        for nm in var_names:
            mask |= 1 << names.index(nm)
        values[mask] = Fraction(value) if exact else float(value)
    missing = [m for m, v in enumerate(values) if v is None]
    if missing:
        raise ValueError(
            f"missing value for subset {subset_name(missing[0], names)}")
    return SetFunction(n, tuple(values), exact), names


# ---------------------------------------------------------------------------
# Moebius transforms over the superset lattice

@dataclass(frozen=True)
class MobiusVector:
    n: int
    values: tuple
    exact: bool

    def value(self, mask: int):
        return self.values[mask]


def mobius_inverse(h: SetFunction) -> MobiusVector:
    """g(X) = sum over Y >= X of (-1)^|Y-X| h(Y)."""
    vals = list(h.values)
    for i in range(h.n):
        bit = 1 << i
        for mask in range(1 << h.n):
            if not mask & bit:
                vals[mask] = vals[mask] - vals[mask | bit]
    return MobiusVector(h.n, tuple(vals), h.exact)


def mobius_forward(g: MobiusVector) -> SetFunction:
    """h(X) = sum over Y >= X of g(Y); inverse of :func:`mobius_inverse`."""
    vals = list(g.values)
    for i in range(g.n):
        bit = 1 << i
        for mask in range(1 << g.n):
            if not mask & bit:
                vals[mask] = vals[mask] + vals[mask | bit]
    if not g.exact:
        vals[0] = 0.0 if abs(vals[0]) <= REAL_TOL else vals[0]
    return SetFunction(g.n, tuple(vals), g.exact)


# ---------------------------------------------------------------------------
# entropies

def entropy_of_relation(p: VRelation) -> SetFunction:
    """Marginal entropies (base 2) of the uniform distribution on ``p``."""
    if not p.tuples:
        raise ValueError("empty relation has no distribution")
    n = len(p.columns)
    rows = p.sorted_tuples()
    total = len(rows)
    values = [0.0] * (1 << n)
    for mask in range(1, 1 << n):
        cols = [i for i in range(n) if mask >> i & 1]
        counts: dict[tuple, int] = {}
        for t in rows:
            key = tuple(t[i] for i in cols)
            counts[key] = counts.get(key, 0) + 1
        sizes = list(counts.values())
        if all(s == sizes[0] for s in sizes):
            values[mask] = math.log2(len(sizes))  # totally uniform marginal
        else:
            values[mask] = math.log2(total) - sum(
                s * math.log2(s) for s in sizes) / total
    return SetFunction(n, tuple(values), False)


# ---------------------------------------------------------------------------
# classification

def _leq(a, b, tol):
    return a <= b + tol


def elemental_checks(h: SetFunction):
    """Yield the elemental inequality values (monotonicity then
    submodularity); all must be >= 0 for a polymatroid."""
    n = h.n
    full = (1 << n) - 1
    for i in range(n):
        yield h.values[full] - h.values[full ^ (1 << i)]
    for i in range(n):
        for j in range(i + 1, n):
            pair = (1 << i) | (1 << j)
            rest = full ^ pair
            sub = rest
            while True:
                yield (h.values[sub | 1 << i] + h.values[sub | 1 << j]
                       - h.values[sub | pair] - h.values[sub])
                if sub == 0:
                    break
                sub = (sub - 1) & rest


def is_polymatroid(h: SetFunction) -> bool:
    tol = h.tol()
    return all(v >= -tol for v in elemental_checks(h))


def is_modular(h: SetFunction) -> bool:
    tol = h.tol()
    for mask in range(1 << h.n):
        s = sum(h.values[1 << i] for i in range(h.n) if mask >> i & 1)
        if abs(h.values[mask] - s) > tol:
            return False
    return True


def is_normal(h: SetFunction) -> bool:
    """Moebius sign test: g <= 0 off the full set and g(full) >= 0."""
    g = mobius_inverse(h)
    tol = h.tol()
    full = (1 << h.n) - 1
    if g.values[full] < -tol:
        return False
    return all(g.values[m] <= tol for m in range(1 << h.n) if m != full)


def normal_step_weights(h: SetFunction) -> dict[int, Fraction]:
    """Decompose a normal exact function as nonnegative step-function weights."""
    if not h.exact:
        raise ValueError("step decomposition needs the exact regime")
    if not is_normal(h):
        raise ValueError("function is not normal")
    g = mobius_inverse(h)
    full = (1 << h.n) - 1
    return {m: -g.values[m] for m in range(1 << h.n)
            if m != full and g.values[m] != 0}


# ---------------------------------------------------------------------------
# basic constructions

def step_function(w_mask: int, n: int) -> SetFunction:
    """0 on subsets of W, 1 elsewhere; W must be a proper subset."""
    full = (1 << n) - 1
    if w_mask & ~full or w_mask == full:
        raise ValueError("step subset must be proper")
    values = [Fraction(0) if mask & ~w_mask == 0 else Fraction(1)
              for mask in range(1 << n)]
    return SetFunction(n, tuple(values), True)


def modular_from_singletons(singletons) -> SetFunction:
    sing = [Fraction(a) for a in singletons]
    if any(a < 0 for a in sing):
        raise ValueError("singleton values must be nonnegative")
    n = len(sing)
    values = [sum((sing[i] for i in range(n) if mask >> i & 1), Fraction(0))
              for mask in range(1 << n)]
    return SetFunction(n, tuple(values), True)


def max_normal(levels) -> SetFunction:
    """h(X) = max of the given per-variable levels over X; a normal polymatroid."""
    lv = [Fraction(a) for a in levels]
    if any(a < 0 for a in lv):
        raise ValueError("levels must be nonnegative")
    n = len(lv)
    values = [max((lv[i] for i in range(n) if mask >> i & 1), default=Fraction(0))
              for mask in range(1 << n)]
    return SetFunction(n, tuple(values), True)


def conditional(h: SetFunction, y_mask: int, x_mask: int):
    return h.values[x_mask | y_mask] - h.values[x_mask]


def mutual_information(h: SetFunction, i: int, j: int, x_mask: int = 0):
    a, b = 1 << i, 1 << j
    return (h.values[x_mask | a] + h.values[x_mask | b]
            - h.values[x_mask] - h.values[x_mask | a | b])


def parity_function() -> SetFunction:
    """Three variables, singleton entropies 1, every larger subset 2."""
    values = [Fraction(0)] + [Fraction(1) if popcount(m) == 1 else Fraction(2)
                              for m in range(1, 8)]
    return SetFunction(3, tuple(values), True)


# ---------------------------------------------------------------------------
# domination

def normal_dominant(h: SetFunction) -> SetFunction:
    """Largest-variable recursion producing a normal h' <= h that preserves
    the total value and every singleton value.

    The top variable is split off: the conditional function given it is
    handled recursively, the remainder is replaced by the max of the pairwise
    mutual informations with the top variable, and the two halves are glued
    by shifting the top variable's mass between the two lattice tops.
    """
    if not h.exact:
        raise ValueError("normal_dominant needs the exact regime")
    if not is_polymatroid(h):
        raise ValueError("input is not a polymatroid")
    return SetFunction(h.n, tuple(_dominant_values(h.n, list(h.values))), True)


def _dominant_values(n, values):
    if n <= 1:
        return values
    top = 1 << (n - 1)
    h_top = values[top]
    cond = [values[mask | top] - h_top for mask in range(top)]
    cond_prime = _dominant_values(n - 1, cond)
    mi = [values[1 << i] + h_top - values[(1 << i) | top] for i in range(n - 1)]
    out = [None] * (1 << n)
    for mask in range(top):
        level = max((mi[i] for i in range(n - 1) if mask >> i & 1),
                    default=Fraction(0))
        out[mask] = level + cond_prime[mask]
        out[mask | top] = h_top + cond_prime[mask]
    return out


def modularization(h: SetFunction) -> SetFunction:
    """Chain-rule lower bound: h''(X) = sum over i in X of h(i | earlier)."""
    marginal = []
    prefix = 0
    for i in range(h.n):
        marginal.append(h.values[prefix | 1 << i] - h.values[prefix])
        prefix |= 1 << i
    zero = Fraction(0) if h.exact else 0.0
    values = tuple(sum((marginal[i] for i in range(h.n) if mask >> i & 1), zero)
                   for mask in range(1 << h.n))
    return SetFunction(h.n, values, h.exact)
