"""Deciding max-linear entropy inequalities over polyhedral cones.

``decide_max`` answers whether ``0 <= max_l E_l(h)`` holds for every ``h`` in
the chosen cone.  The strict-failure region is scaled to ``E_l(h) <= -1`` for
all ``l`` (cones are closed under positive scaling, so this is exact), and the
resulting feasibility problem is solved by exact rational LP:

* polymatroids: free coordinates per nonempty subset, elemental inequalities;
* normal functions: nonnegative step-function weights per proper subset;
* modular functions: nonnegative singleton weights.

Valid verdicts come with Farkas multipliers (``lambda`` over expressions
summing to one, ``mu`` over the cone's defining rows); Invalid verdicts with
an in-cone counterexample on which every expression evaluates to at most -1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

from . import lp
from .errors import ResourceCapExceeded
from .expressions import LinearExpression, MaxInequality
from .setfunctions import (SetFunction, is_modular, is_normal, is_polymatroid,
                           modular_from_singletons, step_function)

POLYMATROID_N_CAP = 10
WEIGHT_CONE_N_CAP = 16


class Cone(enum.Enum):
    MODULAR = "modular"
    NORMAL = "normal"
    POLYMATROID = "polymatroid"


@dataclass(frozen=True)
class DecisionResult:
    verdict: str                     # "valid" | "invalid"
    cone: Cone
    inequality: MaxInequality
    lambda_: tuple | None = None     # per expression, sums to 1 (valid only)
    mu: tuple | None = None          # multipliers over the cone rows (valid)
    counterexample: SetFunction | None = None
    step_weights: dict | None = None       # normal cone: mask -> weight
    singleton_weights: tuple | None = None  # modular cone

    @property
    def valid(self) -> bool:
        return self.verdict == "valid"


def elemental_inequalities(n: int, cap: int = WEIGHT_CONE_N_CAP):
    """Monotonicity rows h(full) - h(full minus i), then submodularity rows
    h(X+i) + h(X+j) - h(X+ij) - h(X); their nonnegative hull is the
    polymatroid cone."""
    if not 1 <= n <= cap:
        raise ResourceCapExceeded("elemental variable count", n, cap)
    full = (1 << n) - 1
    out = []
    for i in range(n):
        out.append(LinearExpression.from_dict(
            n, {full: Fraction(1), full ^ (1 << i): Fraction(-1)}))
    for i in range(n):
        for j in range(i + 1, n):
            pair = (1 << i) | (1 << j)
            rest = full ^ pair
            subs = []
            sub = rest
            while True:
                subs.append(sub)
                if sub == 0:
                    break
                sub = (sub - 1) & rest
            for sub in sorted(subs):
                out.append(LinearExpression.from_dict(n, {
                    sub | 1 << i: Fraction(1),
                    sub | 1 << j: Fraction(1),
                    sub | pair: Fraction(-1),
                    sub: Fraction(-1)}))
    return out


def _dedupe(exprs):
    seen: dict[tuple, int] = {}
    unique = []
    back = []
    for e in exprs:
        key = e.coeffs
        if key not in seen:
            seen[key] = len(unique)
            unique.append(e)
        back.append(seen[key])
    return unique, back


def _expr_on_step(expr: LinearExpression, w_mask: int) -> Fraction:
    # E(h_W) = sum of coefficients on subsets not inside W
    return sum((c for mask, c in expr.coeffs if mask & ~w_mask), Fraction(0))


def _expr_on_singleton(expr: LinearExpression, i: int) -> Fraction:
    return sum((c for mask, c in expr.coeffs if mask >> i & 1), Fraction(0))


def decide_max(ineq: MaxInequality, cone: Cone,
               polymatroid_cap: int = POLYMATROID_N_CAP,
               weight_cap: int = WEIGHT_CONE_N_CAP) -> DecisionResult:
    """Decide ``0 <= max_l E_l(h)`` over the cone, with certificates."""
    n = ineq.n
    unique, back = _dedupe(ineq.exprs)
    k = len(unique)

    if cone is Cone.POLYMATROID:
        if n > polymatroid_cap:
            raise ResourceCapExceeded("polymatroid LP variables", n,
                                      polymatroid_cap)
        ncols = (1 << n) - 1         # h(X) for nonempty X; column X-1
        elementals = elemental_inequalities(n, cap=polymatroid_cap)
        rows = []
        for e in elementals:
            row = [Fraction(0)] * ncols
            for mask, c in e.coeffs:
                row[mask - 1] = c
            rows.append((row, ">=", Fraction(0)))
        for e in unique:
            row = [Fraction(0)] * ncols
            for mask, c in e.coeffs:
                row[mask - 1] = -c
            rows.append((row, ">=", Fraction(1)))
        res = lp.solve(ncols, [Fraction(1)] * ncols, rows,
                       free=frozenset(range(ncols)))
        if res.status == "optimal":
            h = SetFunction(n, (Fraction(0),) + tuple(res.x), True)
            return _invalid(ineq, cone, h)
        assert res.status == "infeasible"
        mu = tuple(res.farkas[:len(elementals)])
        lam_unique = res.farkas[len(elementals):]
        return _valid(ineq, cone, back, lam_unique, mu)

    if n > weight_cap:
        raise ResourceCapExceeded("weight-cone LP variables", n, weight_cap)

    if cone is Cone.NORMAL:
        gens = list(range((1 << n) - 1))       # proper subsets as masks
        on_gen = _expr_on_step
    else:
        gens = list(range(n))                  # singleton indices
        on_gen = _expr_on_singleton

    table = [[on_gen(e, g) for g in gens] for e in unique]
    rows = [([-table[l][c] for c in range(len(gens))], ">=", Fraction(1))
            for l in range(k)]
    res = lp.solve(len(gens), [Fraction(1)] * len(gens), rows)
    if res.status == "optimal":
        weights = res.x
        if cone is Cone.NORMAL:
            h = _weighted_steps(n, dict(zip(gens, weights)))
            sw = {g: w for g, w in zip(gens, weights) if w != 0}
            return _invalid(ineq, cone, h, step_weights=sw)
        h = modular_from_singletons(weights)
        return _invalid(ineq, cone, h, singleton_weights=tuple(weights))
    assert res.status == "infeasible"
    lam_unique = list(res.farkas)
    total = sum(lam_unique, Fraction(0))
    mu = tuple(sum((lam_unique[l] * table[l][c] for l in range(k)),
                   Fraction(0)) / total for c in range(len(gens)))
    return _valid(ineq, cone, back, lam_unique, mu)


def _weighted_steps(n, weights: dict) -> SetFunction:
    values = [Fraction(0)] * (1 << n)
    for w_mask, c in weights.items():
        if c == 0:
            continue
        step = step_function(w_mask, n)
        for mask in range(1 << n):
            values[mask] += c * step.values[mask]
    return SetFunction(n, tuple(values), True)


def _valid(ineq, cone, back, lam_unique, mu) -> DecisionResult:
    total = sum(lam_unique, Fraction(0))
    assert total > 0
    lam_unique = [v / total for v in lam_unique]
    if cone is Cone.POLYMATROID:
        mu = tuple(v / total for v in mu)
    lam = [Fraction(0)] * len(back)
    seen = set()
    for idx, u in enumerate(back):
        if u not in seen:       # assign the merged mass to the first copy
            seen.add(u)
            lam[idx] = lam_unique[u]
    result = DecisionResult("valid", cone, ineq, lambda_=tuple(lam), mu=mu)
    assert verify_certificate(result)
    return result


def _invalid(ineq, cone, h, step_weights=None, singleton_weights=None):
    result = DecisionResult("invalid", cone, ineq, counterexample=h,
                            step_weights=step_weights,
                            singleton_weights=singleton_weights)
    assert verify_certificate(result)
    return result


def cone_membership(h: SetFunction, cone: Cone) -> bool:
    if cone is Cone.POLYMATROID:
        return is_polymatroid(h)
    if cone is Cone.NORMAL:
        return is_normal(h)
    return is_modular(h)


def verify_certificate(result: DecisionResult) -> bool:
    """Exact re-verification of either certificate kind."""
    ineq = result.inequality
    n = ineq.n
    if result.verdict == "invalid":
        h = result.counterexample
        if not cone_membership(h, result.cone):
            return False
        return all(e.evaluate(h.values) <= -1 for e in ineq.exprs)
    lam = result.lambda_
    if lam is None or any(v < 0 for v in lam) or sum(lam) != 1:
        return False
    combo: dict[int, Fraction] = {}
    for weight, e in zip(lam, ineq.exprs):
        if weight == 0:
            continue
        for mask, c in e.coeffs:
            combo[mask] = combo.get(mask, Fraction(0)) + weight * c
    combined = LinearExpression.from_dict(n, combo)
    if result.cone is Cone.POLYMATROID:
        if result.mu is None or any(v < 0 for v in result.mu):
            return False
        acc: dict[int, Fraction] = {}
        for weight, e in zip(result.mu, elemental_inequalities(n)):
            for mask, c in e.coeffs:
                acc[mask] = acc.get(mask, Fraction(0)) + weight * c
        return LinearExpression.from_dict(n, acc).coeffs == combined.coeffs
    if result.cone is Cone.NORMAL:
        return all(_expr_on_step(combined, w) >= 0
                   for w in range((1 << n) - 1))
    return all(_expr_on_singleton(combined, i) >= 0 for i in range(n))


def decide_linear(expr: LinearExpression, cone: Cone, **caps) -> DecisionResult:
    return decide_max(MaxInequality(expr.n, (expr,)), cone, **caps)


def lambda_certificate(ineq: MaxInequality, cone: Cone, **caps):
    """The convex weights turning a valid max-inequality into one valid
    linear inequality; raises on invalid input."""
    result = decide_max(ineq, cone, **caps)
    if not result.valid:
        raise ValueError("inequality is invalid over the requested cone")
    return result.lambda_
