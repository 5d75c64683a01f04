"""Distinguished tautological classes: double ramification cycles and
Hodge classes.

The DR cycle is computed from the weighted-graph sum: for a modulus r, sum
over stable graphs G and weightings of the half-edges by residues mod r
(legs carry the ramification parts, edge halves are opposite, vertices are
balanced), each graph contributing

    r^{-h1(G)} / |Aut G| * push along G of
        prod_legs exp(a_i^2 psi_i)
        * prod_edges (1 - exp(-w' w'' (psi' + psi''))) / (psi' + psi'')

in total degree g.  For r beyond the sampling threshold every stratum
coefficient is a polynomial in r of degree at most 2g; the cycle is 2^{-g}
times its constant term, obtained here by exact interpolation on a schedule
of sample primes.

Hodge classes come from the Chern character of the Hodge bundle,

    ch_{2l-1} = B_{2l}/(2l)! * ( kappa_{2l-1} - sum_i psi_i^{2l-1}
                + 1/2 * sum over boundary gluings of
                  push of sum_{i+j=2l-2} (-1)^i psi'^i psi''^j ),

with the irreducible gluing counted once and each separating divisor in both
orientations; even Chern characters vanish.  The elementary symmetric
classes lambda_i follow by Newton's identities.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import comb, factorial
from typing import Dict, List, Optional, Sequence, Tuple

from .algebra import (ULaurent, bernoulli, poly_interpolate, primes_above)
from .graphs import (StableGraph, Stratum, automorphism_count,
                     enumerate_stable_graphs, enumerate_strata)
from .strata import (TautClass, fundamental, integrate, kappa_class,
                     multiply, pair, psi_class)


# ---------------------------------------------------------------------------
# Pixton's weighted-graph sum and the DR cycle
# ---------------------------------------------------------------------------

def _admissible_weightings(G: StableGraph, parts: Sequence[int], r: int):
    """Yield, for each admissible weighting mod r, the tuple of integer
    products w(h')w(h'') over the edges of G (in edge order).

    w assigns residues in {0..r-1}: legs are fixed to the parts mod r, the
    two halves of an edge are opposite mod r, and each vertex is balanced.
    There are exactly r^{h1} of them for connected G.
    """
    nv = len(G.genera)
    legsum = [sum(parts[m - 1] for m in G.legs[v]) % r for v in range(nv)]

    # spanning tree by BFS from vertex 0
    parent_edge: Dict[int, Tuple[int, int]] = {}   # v -> (edge idx, side at v)
    order = [0]
    seen = {0}
    qi = 0
    while qi < len(order):
        v = order[qi]
        qi += 1
        for i, (a, b) in enumerate(G.edges):
            for s, (x, y) in ((0, (a, b)), (1, (b, a))):
                if x == v and y not in seen:
                    seen.add(y)
                    parent_edge[y] = (i, 1 - s)   # side at child y
                    order.append(y)
    tree_edges = {e for e, _ in parent_edge.values()}
    free_edges = [i for i in range(len(G.edges)) if i not in tree_edges]

    for free_vals in itertools.product(range(r), repeat=len(free_edges)):
        t = [None] * len(G.edges)
        for i, val in zip(free_edges, free_vals):
            t[i] = val

        def half_weight(i, s):
            return t[i] if s == 0 else (r - t[i]) % r

        ok = True
        for v in reversed(order):
            if v == 0:
                total = legsum[v]
                for i, (a, b) in enumerate(G.edges):
                    if a == v:
                        total += half_weight(i, 0)
                    if b == v:
                        total += half_weight(i, 1)
                if total % r != 0:
                    ok = False
                break
            ei, side = parent_edge[v]
            total = legsum[v]
            for i, (a, b) in enumerate(G.edges):
                if i == ei:
                    continue
                if a == v:
                    total += half_weight(i, 0)
                if b == v:
                    total += half_weight(i, 1)
            # weight of the half (ei, side) must be (-total) mod r
            need = (-total) % r
            t[ei] = need if side == 0 else (r - need) % r
        if not ok:
            continue
        yield tuple(t[i] * ((r - t[i]) % r) for i in range(len(G.edges)))


def pixton_sum(g: int, parts: Sequence[int], r: int, degree: int) -> TautClass:
    """The degree-`degree` part of the weighted-graph sum at modulus r,
    on the standard markings 1..len(parts)."""
    N = len(parts)
    marks = tuple(range(1, N + 1))
    acc: Dict[Stratum, Fraction] = {}
    for G in enumerate_stable_graphs(g, N, degree):
        E = len(G.edges)
        rem = degree - E
        if rem < 0:
            continue
        autG = automorphism_count(G)
        pref = Fraction(1, autG * r ** G.h1())

        # Needed power sums: for each vector (k_e) with sum <= rem the
        # weighting sum of prod m_e^{k_e+1}.
        kvecs = [kv for kv in itertools.product(range(rem + 1), repeat=E)
                 if sum(kv) <= rem]
        psums = {kv: 0 for kv in kvecs}
        for mvec in _admissible_weightings(G, parts, r):
            for kv in kvecs:
                p = 1
                for m, k in zip(mvec, kv):
                    p *= m ** (k + 1)
                psums[kv] += p

        leg_list = [(m, parts[m - 1]) for m in marks]
        for kv in kvecs:
            if not psums[kv]:
                continue
            edge_coeff = Fraction(1)
            for k in kv:
                edge_coeff *= Fraction((-1) ** k, factorial(k + 1))
            psi_budget = rem - sum(kv)
            # distribute psi_budget over legs, and each k_e over the two sides
            for leg_exp in itertools.product(range(psi_budget + 1),
                                             repeat=len(leg_list)):
                if sum(leg_exp) != psi_budget:
                    continue
                leg_coeff = Fraction(1)
                psi0 = {}
                for (m, a), j in zip(leg_list, leg_exp):
                    if j:
                        if a == 0:
                            leg_coeff = Fraction(0)
                            break
                        leg_coeff *= Fraction(a ** (2 * j), factorial(j))
                        psi0[m] = j
                if not leg_coeff:
                    continue
                for sides in itertools.product(
                        *[range(k + 1) for k in kv]):
                    side_coeff = 1
                    psi = dict(psi0)
                    for i, (k, s) in enumerate(zip(kv, sides)):
                        side_coeff *= comb(k, s)
                        if s:
                            psi[(i, 0)] = s
                        if k - s:
                            psi[(i, 1)] = k - s
                    S = Stratum(G, psi)
                    if S.is_zero_by_dimension():
                        continue
                    c = pref * edge_coeff * leg_coeff * side_coeff * psums[kv]
                    tot = acc.get(S, Fraction(0)) + c
                    if tot:
                        acc[S] = tot
                    else:
                        acc.pop(S, None)
    res = TautClass(g, marks)
    res.terms = {S: c for S, c in acc.items()
                 if S.degree() <= res.dim() and not S.is_zero_by_dimension()}
    return res


_DR_MEMO: Dict[tuple, TautClass] = {}


def dr_prime_schedule(g: int, parts: Sequence[int], skip: int = 0) -> List[int]:
    """2g+2 sample primes above the safety threshold sum|a_i| + 2g; `skip`
    selects an independent schedule further along the prime sequence."""
    threshold = sum(abs(a) for a in parts) + 2 * g
    return primes_above(threshold, 2 * g + 2, skip=skip)


def dr_cycle(g: int, parts: Sequence[int],
             schedule: Optional[Sequence[int]] = None) -> TautClass:
    """Double ramification cycle DR_g(parts), a degree-g class.

    Samples the weighted-graph sum at the primes of `schedule` (default:
    :func:`dr_prime_schedule`), interpolates each stratum coefficient as a
    polynomial of degree <= 2g in the modulus, checks the extra sample, and
    returns 2^{-g} times the constant term.
    """
    parts = tuple(int(a) for a in parts)
    N = len(parts)
    if sum(parts) != 0:
        raise ValueError(f"parts must sum to zero, got {parts}")
    if N < 1 or 2 * g - 2 + N <= 0:
        raise ValueError(f"unstable ({g}, {N})")
    marks = tuple(range(1, N + 1))
    key = (g, parts, tuple(schedule) if schedule else None)
    hit = _DR_MEMO.get(key)
    if hit is not None:
        return hit
    rs = list(schedule) if schedule else dr_prime_schedule(g, parts)
    if len(rs) < 2 * g + 1:
        raise ValueError("schedule too short for degree 2g interpolation")
    samples = [pixton_sum(g, parts, r, g) for r in rs]
    strata = set()
    for X in samples:
        strata.update(X.terms)
    out: Dict[Stratum, Fraction] = {}
    scale = Fraction(1, 2 ** g)
    for S in strata:
        pts = [((r,), X.terms.get(S, Fraction(0)))
               for r, X in zip(rs, samples)]
        poly = poly_interpolate(pts, 2 * g)
        c = poly.terms.get((0,), Fraction(0)) * scale
        if c:
            out[S] = c
    res = TautClass(g, marks, out)
    _DR_MEMO[key] = res
    return res


# ---------------------------------------------------------------------------
# Hodge classes via the Chern character
# ---------------------------------------------------------------------------

_CH_MEMO: Dict[tuple, TautClass] = {}
_LAMBDA_MEMO: Dict[tuple, TautClass] = {}


def hodge_chern_character(g: int, N: int, k: int,
                          marks: Optional[Sequence[int]] = None) -> TautClass:
    """ch_k of the Hodge bundle on (g, N); zero in positive even degrees."""
    marks = tuple(sorted(marks)) if marks else tuple(range(1, N + 1))
    if k == 0:
        return fundamental(g, marks).scale(g)
    if k % 2 == 0:
        return TautClass(g, marks)
    key = (g, marks, k)
    hit = _CH_MEMO.get(key)
    if hit is not None:
        return hit
    two_l = k + 1
    coeff = bernoulli(two_l) / factorial(two_l)
    total = kappa_class(g, marks, k)
    for m in marks:
        total = total - psi_class(g, marks, m, k)
    half = Fraction(1, 2)
    kernel = [(i, k - 1 - i) for i in range(k)]
    for G in enumerate_stable_graphs(g, N, 1):
        if not G.edges:
            continue
        orientations = (0,) if G.h1() == 1 else (0, 1)
        for orient in orientations:
            for i, j in kernel:
                psi = {}
                if i:
                    psi[(0, orient)] = i
                if j:
                    psi[(0, 1 - orient)] = j
                S = Stratum(G, psi)
                if S.is_zero_by_dimension():
                    continue
                total = total + TautClass(
                    g, marks, {S: half * Fraction((-1) ** i)})
    res = total.scale(coeff)
    _CH_MEMO[key] = res
    return res


def lambda_class(g: int, i: int, N: int,
                 marks: Optional[Sequence[int]] = None) -> TautClass:
    """lambda_i = c_i of the Hodge bundle, through Newton's identities."""
    marks = tuple(sorted(marks)) if marks else tuple(range(1, N + 1))
    if i < 0 or i > g:
        raise ValueError(f"lambda_{i} undefined for genus {g}")
    key = (g, marks, i)
    hit = _LAMBDA_MEMO.get(key)
    if hit is not None:
        return hit
    es: List[TautClass] = [fundamental(g, marks)]
    for k in range(1, i + 1):
        acc = TautClass(g, marks)
        for t in range(1, k + 1):
            p_t = hodge_chern_character(g, N, t, marks).scale(factorial(t))
            term = multiply(es[k - t], p_t)
            acc = acc + (term if t % 2 == 1 else -term)
        es.append(acc.scale(Fraction(1, k)))
    for k, e in enumerate(es):
        _LAMBDA_MEMO[(g, marks, k)] = e
    return es[i]


def hodge_poly(g: int, N: int, sign: int,
               marks: Optional[Sequence[int]] = None) -> ULaurent:
    """sum_{i=0..g} sign^i lambda_i u^{g-i}, coefficients TautClass."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    marks = tuple(sorted(marks)) if marks else tuple(range(1, N + 1))
    out = {}
    for i in range(g + 1):
        c = lambda_class(g, i, N, marks)
        if sign == -1 and i % 2 == 1:
            c = -c
        if c:
            out[g - i] = c
    return ULaurent(out)


def mumford_check(g: int, N: int) -> bool:
    """Does Lambda^-(u) Lambda^+(u) - u^{2g} pair to zero against the full
    spanning set in every degree?  The system's deepest self-test."""
    marks = tuple(range(1, N + 1))
    prod = hodge_poly(g, N, -1, marks) * hodge_poly(g, N, +1, marks)
    defect = prod - ULaurent({2 * g: fundamental(g, marks)})
    dim = 3 * g - 3 + N
    for k, C in defect.coeffs.items():
        deg = 2 * g - k
        if not C:
            continue
        if not C.is_homogeneous(deg):
            return False
        if deg > dim:
            continue
        for S in enumerate_strata(g, N, dim - deg):
            if pair(C, TautClass(g, marks, {S: Fraction(1)})):
                return False
    return True
