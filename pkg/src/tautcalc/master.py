"""Assembly of the star-tree master classes and the vanishing check.

For a star rooted tree T with root genus g_r and leaf blocks, and a positive
integer vector a, the tree contributes

    u^{2g-2+m} * prod_e (a(e)/u)
      * push_T( sum_d Psi_d / (-u)^d  (x)  prod_e sum_d D_d / u^d )

with the root series Psi = prod_e 1/(1 - a(e) psi_e), the leaf series
D = lambda_{g_v} DR_{g_v}(a's, -a(e)) / (1 - a(e) psi_last), and the formal
scalar a(e)^{-1} in (formal) degree -1 on genus-0 valence-2 vertices, which
the pushforward contracts.

The total over all trees is a Laurent polynomial in u with tautological-class
coefficients; the check pairs every strictly negative u-coefficient against a
spanning set of the complementary degree and reports exact zeroes, then
interpolates the a-dependence on an integer grid to audit the degree bound.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .algebra import (APoly, ULaurent, laurent_negative_part, poly_interpolate,
                      rat_to_str)
from .cycles import dr_cycle, lambda_class
from .graphs import StableGraph, StarTree, Stratum, enumerate_pssrt, enumerate_strata
from .strata import (UNSTABLE, TautClass, multiply, pair, psi_memo_stats,
                     pullback_stats, push_vertex_classes, relabel_class)


def root_edge_label(T: StarTree, j: int) -> int:
    return T.n + T.m + 2 * j + 1


def leaf_edge_label(T: StarTree, j: int) -> int:
    return T.n + T.m + 2 * j + 2


def root_class(T: StarTree, a: Sequence[int]) -> ULaurent:
    """sum_d Psi(root)_d / (-u)^d on the root moduli space.

    Stable root: coefficients are TautClass on the space whose markings are
    the root-side edge labels and the legs n+1..n+m.  Exceptional unstable
    root (genus 0, m = 1, one edge): the formal scalar a(e)^{-1} in degree
    -1, i.e. the Fraction -a(e)^{-1} at u-exponent +1.
    """
    _check_a(T, a)
    if T.root_unstable():
        ae = T.edge_part(0, a)
        return ULaurent({1: Fraction(-1, ae)})
    k = T.num_edges()
    marks = tuple(root_edge_label(T, j) for j in range(k)) + \
        tuple(range(T.n + 1, T.n + T.m + 1))
    g_r = T.root_genus
    dim = 3 * g_r - 3 + len(marks)
    G = StableGraph([g_r], [marks], [])
    out: Dict[int, TautClass] = {}
    for exps in itertools.product(range(dim + 1), repeat=k):
        d = sum(exps)
        if d > dim:
            continue
        coeff = Fraction(1)
        psi = {}
        for j, e in enumerate(exps):
            if e:
                coeff *= T.edge_part(j, a) ** e
                psi[root_edge_label(T, j)] = e
        if d % 2 == 1:
            coeff = -coeff
        S = Stratum(G, psi)
        if S.is_zero_by_dimension():
            continue
        C = TautClass(g_r, marks, {S: coeff})
        out[-d] = out[-d] + C if -d in out else C
    return ULaurent(out)


def leaf_class(T: StarTree, j: int, a: Sequence[int]) -> ULaurent:
    """sum_d D(leaf j)_d / u^d on the leaf moduli space.

    Stable leaf: lambda_{g_v} DR_{g_v}(block parts, -a(e)) expanded against
    the geometric series in a(e) psi at the edge marking.  Unstable leaf
    (genus 0, single leg): the formal scalar a(e)^{-1} at u-exponent +1.
    """
    _check_a(T, a)
    if T.leaf_unstable(j):
        ae = T.edge_part(j, a)
        return ULaurent({1: Fraction(1, ae)})
    g_v, legs = T.blocks[j]
    ae = T.edge_part(j, a)
    ell = len(legs)
    parts = tuple(a[i - 1] for i in legs) + (-ae,)
    base_std = multiply(lambda_class(g_v, g_v, ell + 1),
                        dr_cycle(g_v, parts))
    mapping = {i + 1: legs[i] for i in range(ell)}
    mapping[ell + 1] = leaf_edge_label(T, j)
    base = relabel_class(base_std, mapping)
    marks = base.marks
    dim = base.dim()
    out: Dict[int, TautClass] = {}
    edge_mark = leaf_edge_label(T, j)
    for t in range(dim - 2 * g_v + 1):
        if t == 0:
            C = base
        else:
            C = multiply(base, _psi_power(g_v, marks, edge_mark, t)).scale(ae ** t)
        if C:
            out[-(2 * g_v + t)] = C
    return ULaurent(out)


def _psi_power(g, marks, m, t):
    G = StableGraph([g], [marks], [])
    return TautClass(g, marks, {Stratum(G, {m: t}): Fraction(1)})


def _check_a(T: StarTree, a: Sequence[int]) -> None:
    if len(a) != T.n:
        raise ValueError(f"a-vector must have length n = {T.n}")
    if any(x <= 0 for x in a):
        raise ValueError("a-vector entries must be positive integers")


@dataclass
class XiTerm:
    tree: StarTree
    value: ULaurent          # coefficients: TautClass on (g, n+m)

    def u_support(self) -> List[int]:
        return self.value.support()


def xi_of_tree(T: StarTree, a: Sequence[int]) -> XiTerm:
    """u^{2g-2+m} prod_e (a(e)/u) times the pushforward of the vertex series."""
    _check_a(T, a)
    g, n, m = T.g, T.n, T.m
    k = T.num_edges()
    marks = tuple(range(1, n + m + 1))
    G = T.to_graph()
    pref_exp = 2 * g - 2 + m - k
    pref_coeff = Fraction(1)
    for j in range(k):
        pref_coeff *= T.edge_part(j, a)
    vertex_series = [root_class(T, a)] + \
        [leaf_class(T, j, a) for j in range(k)]
    unstable = [T.root_unstable()] + [T.leaf_unstable(j) for j in range(k)]

    total: Dict[int, TautClass] = {}
    items = [list(s.coeffs.items()) for s in vertex_series]
    for combo in itertools.product(*items):
        uexp = pref_exp + sum(kk for kk, _ in combo)
        scalar = pref_coeff
        classes: List[object] = []
        for is_unstable, (kk, C) in zip(unstable, combo):
            if is_unstable:
                scalar *= C
                classes.append(UNSTABLE)
            else:
                classes.append(C)
        pushed = push_vertex_classes(G, marks, g, classes).scale(scalar)
        if not pushed:
            continue
        want_deg = 2 * g - 2 + m - uexp
        if not pushed.is_homogeneous(want_deg):
            raise AssertionError(
                f"grading violation in {T}: u^{uexp} coefficient has "
                f"degrees {pushed.degrees()}, expected {want_deg}")
        total[uexp] = total[uexp] + pushed if uexp in total else pushed
    return XiTerm(T, ULaurent(total))


def xi_total(g: int, n: int, m: int, a: Sequence[int],
             trees: Optional[Sequence[StarTree]] = None) -> ULaurent:
    """Sum of the tree classes over all of PSSRT_{g,n,m} at the point a."""
    trees = trees if trees is not None else enumerate_pssrt(g, n, m)
    out = ULaurent()
    for T in trees:
        out = out + xi_of_tree(T, a).value
    return out


def a_grid(g: int, n: int, m: int) -> List[Tuple[int, ...]]:
    """Positive-integer principal lattice, unisolvent for total degree
    B = 3g-3+n+m: all a with sum(a_i - 1) <= B."""
    B = 3 * g - 3 + n + m
    return [tuple(x + 1 for x in exps)
            for exps in itertools.product(range(B + 1), repeat=n)
            if sum(exps) <= B]


def a_grid_extra(g: int, n: int, m: int) -> List[Tuple[int, ...]]:
    """Off-lattice points used to confirm interpolants."""
    B = 3 * g - 3 + n + m
    pts = [tuple(B + 2 if i == 0 else 2 for i in range(n))]
    if n > 1:
        pts.append(tuple(B + 2 if i == n - 1 else 1 for i in range(n)))
    else:
        pts.append((B + 3,))
    return pts


@dataclass
class XiReport:
    g: int
    n: int
    m: int
    verdict: str = "pass"
    gorenstein_only: bool = True
    trees: List[dict] = field(default_factory=list)
    grid: List[Tuple[int, ...]] = field(default_factory=list)
    extra_points: List[Tuple[int, ...]] = field(default_factory=list)
    pairings: List[dict] = field(default_factory=list)
    pairing_polys: List[dict] = field(default_factory=list)
    degree_bound: dict = field(default_factory=dict)
    audit_all_pass: Optional[bool] = None
    timing_ms: Optional[int] = None
    cache: dict = field(default_factory=dict)

    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "schema": "tautcalc-xi-report/1",
            "instance": {"g": self.g, "n": self.n, "m": self.m},
            "verdict": self.verdict,
            "vanishing_sense": "gorenstein-pairing" if self.gorenstein_only
                               else "structural",
            "trees": self.trees,
            "grid": [list(p) for p in self.grid],
            "extra_points": [list(p) for p in self.extra_points],
            "negative_pairings": self.pairings,
            "negative_pairing_polynomials": self.pairing_polys,
            "degree_bound": self.degree_bound,
            "audit_all_pass": self.audit_all_pass,
            "timing_ms": self.timing_ms,
            "cache": self.cache,
        }


def polynomiality_check(g: int, n: int, m: int,
                        grid: Optional[Sequence[Sequence[int]]] = None,
                        run_audit: bool = True,
                        with_timing: bool = False) -> XiReport:
    """Verify that all negative u-degrees of the master class vanish in the
    Gorenstein pairing, for every a on the grid; also audit the per-tree
    localization algebra and the total a-degree bound."""
    t0 = time.monotonic()
    N = n + m
    B = 3 * g - 3 + n + m
    dim = B
    marks = tuple(range(1, N + 1))
    trees = enumerate_pssrt(g, n, m)
    grid = [tuple(p) for p in grid] if grid else a_grid(g, n, m)
    extras = a_grid_extra(g, n, m) if len(grid) > 1 or n == 1 else []
    report = XiReport(g=g, n=n, m=m, grid=list(grid),
                      extra_points=list(extras))

    if run_audit:
        from .audit import audit_tree
        audits = {T: audit_tree(T) for T in trees}
        report.audit_all_pass = all(audits.values())
    else:
        audits = {}

    base_point = grid[0]
    spanning: Dict[int, List[Stratum]] = {}
    all_zero = True

    # per-grid-point evaluation and pairing
    values: Dict[Tuple[int, str], Dict[Tuple[int, ...], Fraction]] = {}
    xi_by_point: Dict[Tuple[int, ...], ULaurent] = {}
    for point in list(grid) + extras:
        xi = xi_total(g, n, m, point, trees)
        xi_by_point[point] = xi
        neg = laurent_negative_part(xi)
        for k in sorted(neg.coeffs):
            C = neg.coeffs[k]
            deg = 2 * g - 2 + m - k
            comp = dim - deg
            if comp < 0 or not C:
                continue
            if comp not in spanning:
                spanning[comp] = enumerate_strata(g, N, comp)
            for S in spanning[comp]:
                v = pair(C, TautClass(g, marks, {S: Fraction(1)}))
                key = (k, S.to_text())
                values.setdefault(key, {})[point] = v
                if v:
                    all_zero = False
                if point in grid:
                    report.pairings.append({
                        "u": k, "stratum": S.to_text(),
                        "a": list(point), "value": rat_to_str(v)})

    # per-tree contributions at the base point
    for T in trees:
        term = xi_of_tree(T, base_point)
        entry = {
            "tree": T.to_text(),
            "u_support": term.u_support(),
            "negative_u_text": {
                str(k): c.to_text() for k, c in
                laurent_negative_part(term.value).coeffs.items()},
        }
        if audits:
            entry["audit"] = audits[T]
        report.trees.append(entry)

    # interpolate pairing values over the grid; confirm on the extra points
    interp_consistent = True
    for (k, stext), tbl in sorted(values.items()):
        pts = [(p, tbl.get(p, Fraction(0))) for p in grid]
        poly = poly_interpolate(pts, B)
        for p in extras:
            if p in tbl and poly.evaluate(p) != tbl[p]:
                interp_consistent = False
        if poly:
            report.pairing_polys.append({
                "u": k, "stratum": stext,
                "coefficients": {
                    ",".join(map(str, e)): rat_to_str(c)
                    for e, c in sorted(poly.terms.items())}})

    # a-degree bound for the interpolated master class itself
    max_deg = 0
    bound_ok = True
    stratum_keys: Dict[Tuple[int, object], Stratum] = {}
    for xi in xi_by_point.values():
        for k, C in xi.coeffs.items():
            for S in C.terms:
                stratum_keys[(k, S.key())] = S
    for (k, skey), S in sorted(stratum_keys.items(), key=lambda kv: repr(kv[0])):
        pts = []
        for p in grid:
            C = xi_by_point[p].coefficient(k)
            c = C.terms.get(S, Fraction(0)) if C else Fraction(0)
            pts.append((p, c))
        poly = poly_interpolate(pts, B)
        max_deg = max(max_deg, poly.total_degree())
        for p in extras:
            C = xi_by_point[p].coefficient(k)
            c = C.terms.get(S, Fraction(0)) if C else Fraction(0)
            if poly.evaluate(p) != c:
                bound_ok = False
    report.degree_bound = {
        "bound": B,
        "max_total_degree": max_deg,
        "extra_points_consistent": bound_ok and interp_consistent,
    }

    ok = (all_zero and (report.audit_all_pass in (True, None))
          and bound_ok and interp_consistent and max_deg <= B)
    report.verdict = "pass" if ok else "fail"
    report.cache = {**psi_memo_stats(), **pullback_stats()}
    if with_timing:
        report.timing_ms = int((time.monotonic() - t0) * 1000)
    return report
