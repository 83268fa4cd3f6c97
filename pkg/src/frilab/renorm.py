"""Scale hierarchies and box-tree combinatorics for the decoupling scheme.

Everything here is deterministic integer/rational arithmetic: geometric
scale sequences, descendant-box enumeration on nested grids, the doubling
recursion with its sandwich bounds, and the slowly growing radius map used
by the finite-size critical-intensity diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal, getcontext
from fractions import Fraction
from itertools import product

from .lattice import OffGridError


class RenormError(ValueError):
    pass


@dataclass(frozen=True)
class KScales:
    """Dyadic-style box scales K_n = K0 * k0^n on nested grids."""

    K0: int
    k0: int

    def __post_init__(self):
        if self.K0 < 1:
            raise RenormError("K0 must be a positive integer")
        if self.k0 < 2:
            raise RenormError("k0 must be >= 2 (k0 = 1 degenerates the grid)")

    def K(self, n: int) -> int:
        if n < 0:
            raise RenormError("scale index must be >= 0")
        return self.K0 * self.k0**n


@dataclass(frozen=True)
class LScales:
    """Truncation scales L_n = L0 * l0^n.

    The theory wants L0 >= 100 and l0 >= 1000; smaller desk-scale values
    are permitted and flagged through ``theory_range_ok``.
    """

    L0: int
    l0: int

    def __post_init__(self):
        if self.L0 < 1 or self.l0 < 2:
            raise RenormError("need L0 >= 1 and l0 >= 2")

    @property
    def theory_range_ok(self) -> bool:
        return self.L0 >= 100 and self.l0 >= 1000

    def L(self, n: int) -> int:
        if n < 0:
            raise RenormError("scale index must be >= 0")
        return self.L0 * self.l0**n

    def sequence(self, n_max: int) -> list:
        return [self.L(n) for n in range(n_max + 1)]


def zeta(b: float) -> float:
    """sum_{j>=1} (j+5)^(-b) to absolute accuracy 1e-10, for b in (1, 2].

    Partial sum of 10^5 terms plus the midpoint-rule integral tail; the
    correction error is bounded by b/24 * (J+4.5)^(-b-1) < 1e-11.
    """
    if not 1.0 < b <= 2.0:
        raise RenormError("b must lie in (1, 2]")
    J = 100_000
    partial = math.fsum((j + 5.0) ** (-b) for j in range(1, J + 1))
    tail = (J + 5.5) ** (1.0 - b) / (b - 1.0)
    return partial + tail


def j_scales(J1, b: float, k_max: int) -> list:
    """Values J_1..J_k_max of J_{k+1} = 2 (1 + (k+5)^(-b)) J_k.

    Exact rationals when b is an integer (the multiplier is then rational),
    floats otherwise.  Indexing: element i is J_{i+1}.
    """
    if not 1.0 < float(b) <= 2.0:
        raise RenormError("b must lie in (1, 2]")
    if k_max < 1:
        raise RenormError("k_max must be >= 1")
    exact = float(b).is_integer()
    vals = [Fraction(J1) if exact else float(J1)]
    for k in range(1, k_max):
        if exact:
            mult = 2 * (1 + Fraction(1, (k + 5) ** int(b)))
        else:
            mult = 2.0 * (1.0 + (k + 5.0) ** (-float(b)))
        vals.append(mult * vals[-1])
    return vals


@dataclass(frozen=True)
class JScales:
    """Doubling recursion values with the sandwich envelope

    J1 * 2^(k-1) <= J_k <= exp(zeta(b)) * J1 * 2^(k-1).
    """

    J1: float
    b: float
    k_max: int
    values: list = field(default_factory=list, compare=False)

    def __post_init__(self):
        if self.J1 <= 0:
            raise RenormError("J1 must be positive")
        object.__setattr__(self, "values", j_scales(self.J1, self.b, self.k_max))

    @property
    def theory_range_ok(self) -> bool:
        return self.J1 >= 100

    def J(self, k: int):
        if not 1 <= k <= self.k_max:
            raise RenormError("k out of range")
        return self.values[k - 1]

    def sandwich_holds(self, rel_tol: float = 1e-9) -> bool:
        """Check the envelope for every generated value: exactly for
        rational values, to ``rel_tol`` otherwise."""
        upper_factor = math.exp(zeta(self.b))
        for k in range(1, self.k_max + 1):
            jk = self.J(k)
            base = (
                Fraction(self.J1) * 2 ** (k - 1)
                if isinstance(jk, Fraction)
                else float(self.J1) * 2.0 ** (k - 1)
            )
            if isinstance(jk, Fraction):
                if jk < base:
                    return False
                if float(jk / base) > upper_factor * (1.0 + 1e-15):
                    return False
            else:
                if jk < base * (1.0 - rel_tol):
                    return False
                if jk > upper_factor * base * (1.0 + rel_tol):
                    return False
        return True


# ---------------------------------------------------------------------------
# descendant boxes and box trees


def _check_on_grid(x, spacing: int):
    for c in x:
        if int(c) % spacing != 0:
            raise OffGridError(f"center {tuple(x)} not on the {spacing}-grid")


def _box_touches_shell(y, half: int, x, r: int) -> bool:
    """Does the box of radius ``half`` at y intersect the sup-norm shell of
    radius r at x?  Exact: the sup-norm distance to x over the box ranges
    over all integers between its min and max."""
    per_axis = [abs(int(a) - int(b)) for a, b in zip(y, x)]
    min_dist = max(max(v - half, 0) for v in per_axis)
    max_dist = max(per_axis) + half
    return min_dist <= r <= max_dist


def h1_descendants(n: int, x, ks: KScales) -> list:
    """Centers y on the level-(n-1) grid with the box B_y(K_{n-1}) inside
    B_x(K_n) and touching its boundary shell."""
    if n < 1:
        raise RenormError("n must be >= 1")
    K_n, K = ks.K(n), ks.K(n - 1)
    _check_on_grid(x, K_n)
    d = len(x)
    out = []
    for w in product(range(-ks.k0 - 1, ks.k0 + 2), repeat=d):
        y = tuple(int(c) + K * wi for c, wi in zip(x, w))
        inside = max(abs(a - b) for a, b in zip(y, x)) <= K_n - K
        if inside and _box_touches_shell(y, K, x, K_n):
            out.append(y)
    return out


def h2_descendants(n: int, x, ks: KScales) -> list:
    """Centers y on the level-(n-1) grid whose box touches the shell of
    radius floor(1.5 K_{n-1}) around x."""
    if n < 1:
        raise RenormError("n must be >= 1")
    K_n, K = ks.K(n), ks.K(n - 1)
    _check_on_grid(x, K_n)
    r = (3 * K) // 2
    d = len(x)
    reach = r // K + 2
    out = []
    for w in product(range(-reach, reach + 1), repeat=d):
        y = tuple(int(c) + K * wi for c, wi in zip(x, w))
        if _box_touches_shell(y, K, x, r):
            out.append(y)
    return out


@dataclass(frozen=True)
class BoxTree:
    """One admissible descendant tree: node set plus a witnessing
    assignment of (first, second) descendant pairs."""

    root: tuple
    nodes: frozenset
    assignment: tuple


_TREE_GUARD = 300_000


def enumerate_trees(n: int, x, ks: KScales) -> list:
    """All distinct trees rooted at (n, x), for n <= 2.

    Trees are distinguished by their node sets (the quantity the counting
    bound speaks about); each carries one witnessing assignment.  Raises
    when the assignment count would exceed the explosion guard.
    """
    if n not in (0, 1, 2):
        raise RenormError("enumerate_trees supports n in {0, 1, 2} only")
    x = tuple(int(c) for c in x)
    root = (n, x)
    if n == 0:
        return [BoxTree(root=root, nodes=frozenset([root]), assignment=())]

    def pairs_for(level, center):
        h1 = h1_descendants(level, center, ks)
        h2 = h2_descendants(level, center, ks)
        return [(a, b) for a in h1 for b in h2]

    top = pairs_for(n, x)
    if n == 1:
        est = len(top)
    else:
        per_node = max(
            (len(pairs_for(1, c)) for pr in top[:1] for c in set(pr)),
            default=0,
        )
        est = len(top) * max(per_node, 1) ** 2
    if est > _TREE_GUARD:
        raise RenormError(
            f"enumeration would visit about {est} assignments "
            f"(guard {_TREE_GUARD})"
        )
    seen = {}
    if n == 1:
        for y1, y2 in top:
            nodes = frozenset([root, (0, y1), (0, y2)])
            key = nodes
            if key not in seen:
                seen[key] = BoxTree(
                    root=root,
                    nodes=nodes,
                    assignment=((root, ((0, y1), (0, y2))),),
                )
        return list(seen.values())
    pair_cache = {}
    for y1, y2 in top:
        level1 = sorted({y1, y2})
        for c in level1:
            if c not in pair_cache:
                pair_cache[c] = pairs_for(1, c)
        choice_lists = [pair_cache[c] for c in level1]
        for combo in product(*choice_lists):
            level0 = set()
            assignment = [(root, ((1, y1), (1, y2)))]
            for c, (z1, z2) in zip(level1, combo):
                level0.update([(0, z1), (0, z2)])
                assignment.append(((1, c), ((0, z1), (0, z2))))
            nodes = frozenset(
                [root, (1, y1), (1, y2)] + list(level0)
            )
            if nodes not in seen:
                seen[nodes] = BoxTree(
                    root=root, nodes=nodes, assignment=tuple(assignment)
                )
    return list(seen.values())


def tree_count_bound_check(counts: dict, k0: int, d: int) -> float:
    """Smallest C with counts[n] <= (C * k0^(2(d-1)))^(2^n) for all n >= 1
    given; n = 0 entries (always 1) impose no constraint beyond C > 0."""
    c_min = 0.0
    for n, cnt in counts.items():
        if n == 0:
            continue
        c_min = max(c_min, cnt ** (1.0 / 2**n) / k0 ** (2 * (d - 1)))
    return c_min


# ---------------------------------------------------------------------------
# slowly growing radius map


def mu(R: int) -> int:
    """floor(exp((ln R)^(1/3))) with a high-precision fallback when the
    float value sits within 1e-9 of an integer."""
    if R < 1:
        raise RenormError("R must be >= 1")
    v = math.exp(math.log(R) ** (1.0 / 3.0)) if R > 1 else 1.0
    n = math.floor(v)
    if min(v - n, n + 1 - v) < 1e-9:
        return _mu_decimal(R)
    return int(n)


def _mu_decimal(R: int) -> int:
    ctx = getcontext().copy()
    ctx.prec = 60
    lnr = ctx.ln(Decimal(R))
    third = Decimal(1) / Decimal(3)
    t = ctx.power(lnr, third) if lnr > 0 else Decimal(0)
    v = ctx.exp(t)
    return int(v.to_integral_value(rounding="ROUND_FLOOR"))


# ---------------------------------------------------------------------------
# fitted-constant diagnostic for the scale-doubling inequality


def recursion_diagnostic(
    p_hat_0: float, p_hat_1: float, k0: int, d: int, K0: int | None = None,
    c_grid=(0.1, 0.5, 1.0),
) -> dict:
    """Report the smallest constant C making

        p_hat_1 <= [C * k0^(2(d-1)) * (p_hat_0 + 2 exp(-c K0))]^2

    hold, for each decay rate c in ``c_grid`` (when K0 is given) and in the
    no-correction limit.  Purely diagnostic: the theory never pins C or c.
    """
    if not 0 <= p_hat_1 <= 1 or not 0 <= p_hat_0 <= 1:
        raise ValueError("probability estimates must lie in [0, 1]")
    geom = float(k0) ** (2 * (d - 1))
    report = {"k0": k0, "d": d, "p_hat_0": p_hat_0, "p_hat_1": p_hat_1}
    denom = geom * p_hat_0
    report["C_no_correction"] = (
        math.sqrt(p_hat_1) / denom if denom > 0 else math.inf
    )
    if K0 is not None:
        per_c = {}
        for c in c_grid:
            base = geom * (p_hat_0 + 2.0 * math.exp(-c * K0))
            per_c[c] = math.sqrt(p_hat_1) / base if base > 0 else math.inf
        report["C_by_decay_rate"] = per_c
    return report
