"""The working tautological ring on moduli of stable curves.

Classes are exact rational combinations of decorated boundary strata
(:class:`tautcalc.graphs.Stratum`).  The three pillars:

* ``psi_integral`` -- Witten--Kontsevich numbers by string/dilaton reduction
  and the Virasoro (DVV) recursion, from the two base values
  <tau_0^3>_0 = 1 and <tau_1>_1 = 1/24;
* ``multiply`` -- the strata-algebra product.  A product against a stratum
  supported on a graph G is computed by pulling the other factor back along
  the gluing map of G, one edge at a time.  The one-edge pullback is the
  excess-intersection formula: a term with factor (-psi' - psi'') for every
  matching edge of the operand, plus one term for every way of refining an
  operand vertex (vertex split, or genus drop with a loop) compatible with
  the one-edge degeneration being pulled back along;
* ``integrate`` -- evaluation of the top-degree part, vertex by vertex,
  after rewriting kappa decorations through an extra marked point.

Pushforwards are pure graph substitution: inserting each vertex-level
stratum into the outer graph, so no automorphism factors appear anywhere in
the calculus (they belong to coefficients, e.g. in Pixton-style sums).
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .algebra import double_factorial, rat_from_str, rat_to_str
from .graphs import (PsiKey, StableGraph, Stratum, vertex_refinements)

# ---------------------------------------------------------------------------
# psi intersection numbers
# ---------------------------------------------------------------------------

_PSI_MEMO: Dict[Tuple[int, Tuple[int, ...]], Fraction] = {}
_PSI_FROM_CACHE = 0


def psi_memo_stats() -> Dict[str, int]:
    return {"entries": len(_PSI_MEMO), "preloaded": _PSI_FROM_CACHE}


def psi_memo_export() -> Dict[Tuple[int, Tuple[int, ...]], Fraction]:
    return dict(_PSI_MEMO)


def psi_memo_load(entries: Iterable[Tuple[int, Tuple[int, ...], Fraction]]) -> None:
    global _PSI_FROM_CACHE
    for g, ds, val in entries:
        key = (g, tuple(sorted(ds, reverse=True)))
        _PSI_MEMO.setdefault(key, val)
    _PSI_FROM_CACHE = len(_PSI_MEMO)


def psi_integral(g: int, exponents: Sequence[int]) -> Fraction:
    """<tau_{d_1} ... tau_{d_N}>_g, exact.

    Requires sum(d_i) == 3g - 3 + N and stability; raises ValueError on a
    dimension mismatch.
    """
    ds = tuple(sorted((int(d) for d in exponents), reverse=True))
    n = len(ds)
    if n < 1 or any(d < 0 for d in ds):
        raise ValueError("exponents must be a nonempty list of nonnegative ints")
    if 2 * g - 2 + n <= 0:
        raise ValueError(f"unstable ({g}, {n})")
    if sum(ds) != 3 * g - 3 + n:
        raise ValueError(
            f"dimension mismatch: sum {sum(ds)} != 3g-3+N = {3 * g - 3 + n}")
    return _psi(g, ds)


def _psi_valid(g: int, ds: Tuple[int, ...]) -> bool:
    n = len(ds)
    return (g >= 0 and n >= 1 and 2 * g - 2 + n > 0
            and sum(ds) == 3 * g - 3 + n)


def _psi(g: int, ds: Tuple[int, ...]) -> Fraction:
    key = (g, ds)
    hit = _PSI_MEMO.get(key)
    if hit is not None:
        return hit
    n = len(ds)
    if g == 0 and ds == (0, 0, 0):
        val = Fraction(1)
    elif g == 1 and ds == (1,):
        val = Fraction(1, 24)
    elif ds[-1] == 0:
        # string equation
        rest = ds[:-1]
        val = Fraction(0)
        for j, d in enumerate(rest):
            if d >= 1:
                sub = tuple(sorted(rest[:j] + (d - 1,) + rest[j + 1:],
                                   reverse=True))
                val += _psi(g, sub)
    elif ds[-1] == 1:
        # dilaton equation
        rest = ds[:-1]
        val = (2 * g - 2 + n - 1) * _psi(g, rest)
    else:
        # DVV recursion on the largest exponent d1 = k + 1
        d1, rest = ds[0], ds[1:]
        k = d1 - 1
        total = Fraction(0)
        for j, d in enumerate(rest):
            sub = tuple(sorted(rest[:j] + (k + d,) + rest[j + 1:],
                               reverse=True))
            total += Fraction(double_factorial(2 * k + 2 * d + 1),
                              double_factorial(2 * d - 1)) * _psi(g, sub)
        half = Fraction(1, 2)
        for a in range(k):
            b = k - 1 - a
            coef = Fraction(double_factorial(2 * a + 1)
                            * double_factorial(2 * b + 1))
            sub = tuple(sorted((a, b) + rest, reverse=True))
            if g >= 1 and _psi_valid(g - 1, sub):
                total += half * coef * _psi(g - 1, sub)
            idx = range(len(rest))
            for rI in range(len(rest) + 1):
                for I in itertools.combinations(idx, rI):
                    Iset = set(I)
                    dI = tuple(sorted((a,) + tuple(rest[i] for i in I),
                                      reverse=True))
                    dJ = tuple(sorted((b,) + tuple(rest[i] for i in idx
                                                   if i not in Iset),
                                      reverse=True))
                    for g1 in range(g + 1):
                        g2 = g - g1
                        if _psi_valid(g1, dI) and _psi_valid(g2, dJ):
                            total += half * coef * _psi(g1, dI) * _psi(g2, dJ)
        val = total / double_factorial(2 * k + 3)
    _PSI_MEMO[key] = val
    return val


_VERTEX_MEMO: Dict[tuple, Fraction] = {}


def vertex_integral(g: int, psi_exps: Sequence[int],
                    kappas: Sequence[int]) -> Fraction:
    """Integral of a psi/kappa monomial over one moduli space.

    Returns 0 unless the monomial has exactly top degree.  Kappa indices are
    rewritten through an extra marked point: with kappa_b = pi_*(psi^{b+1}),
    pulling the remaining kappas back contributes -psi^{b_j} cross terms,
    which yields the usual inclusion-exclusion over subsets.
    """
    ps = tuple(sorted(int(p) for p in psi_exps))
    ks = tuple(sorted(int(k) for k in kappas))
    n = len(ps)
    if sum(ps) + sum(ks) != 3 * g - 3 + n:
        return Fraction(0)
    if 2 * g - 2 + n <= 0 and not ks:
        return Fraction(0)
    key = (g, ps, ks)
    hit = _VERTEX_MEMO.get(key)
    if hit is not None:
        return hit
    if not ks:
        val = _psi(g, tuple(sorted(ps, reverse=True)))
    else:
        last, others = ks[-1], ks[:-1]
        val = Fraction(0)
        for r in range(len(others) + 1):
            for S in itertools.combinations(range(len(others)), r):
                Sset = set(S)
                new_exp = last + 1 + sum(others[j] for j in S)
                rest = tuple(others[j] for j in range(len(others))
                             if j not in Sset)
                val += (Fraction(-1) ** r) * vertex_integral(
                    g, ps + (new_exp,), rest)
    _VERTEX_MEMO[key] = val
    return val


# ---------------------------------------------------------------------------
# Tautological classes
# ---------------------------------------------------------------------------

class TautClass:
    """Formal rational combination of canonical decorated strata on a fixed
    ambient moduli space (genus, marking set).

    Terms above the ambient dimension, or with a vertex decorated past its
    own moduli dimension, are dropped on construction (eager truncation).
    """

    __slots__ = ("genus", "marks", "terms")

    def __init__(self, genus: int, marks: Sequence[int],
                 terms: Optional[Dict[Stratum, Fraction]] = None):
        self.genus = int(genus)
        self.marks = tuple(sorted(int(m) for m in marks))
        self.terms: Dict[Stratum, Fraction] = {}
        dim = self.dim()
        if terms:
            for S, c in terms.items():
                if not c:
                    continue
                if S.degree() > dim or S.is_zero_by_dimension():
                    continue
                self.terms[S] = Fraction(c)

    def dim(self) -> int:
        return 3 * self.genus - 3 + len(self.marks)

    def ambient(self) -> Tuple[int, Tuple[int, ...]]:
        return (self.genus, self.marks)

    def zero_like(self) -> "TautClass":
        return TautClass(self.genus, self.marks)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other):
        return (isinstance(other, TautClass)
                and self.ambient() == other.ambient()
                and self.terms == other.terms)

    def __hash__(self):
        return hash((self.ambient(), frozenset(self.terms.items())))

    def __add__(self, other: "TautClass") -> "TautClass":
        self._check(other)
        out = dict(self.terms)
        for S, c in other.terms.items():
            s = out.get(S, Fraction(0)) + c
            if s:
                out[S] = s
            else:
                out.pop(S, None)
        res = TautClass(self.genus, self.marks)
        res.terms = out
        return res

    def __neg__(self) -> "TautClass":
        res = TautClass(self.genus, self.marks)
        res.terms = {S: -c for S, c in self.terms.items()}
        return res

    def __sub__(self, other: "TautClass") -> "TautClass":
        return self + (-other)

    def scale(self, c) -> "TautClass":
        c = Fraction(c)
        res = TautClass(self.genus, self.marks)
        if c:
            res.terms = {S: c * v for S, v in self.terms.items()}
        return res

    def __mul__(self, other):
        if isinstance(other, TautClass):
            return multiply(self, other)
        return self.scale(other)

    __rmul__ = __mul__

    def _check(self, other: "TautClass") -> None:
        if self.ambient() != other.ambient():
            raise ValueError(
                f"ambient mismatch: {self.ambient()} vs {other.ambient()}")

    def degree_part(self, d: int) -> "TautClass":
        res = TautClass(self.genus, self.marks)
        res.terms = {S: c for S, c in self.terms.items() if S.degree() == d}
        return res

    def degrees(self) -> List[int]:
        return sorted({S.degree() for S in self.terms})

    def is_homogeneous(self, d: int) -> bool:
        return all(S.degree() == d for S in self.terms)

    def fingerprint(self):
        return tuple(sorted((S.key(), c) for S, c in self.terms.items()))

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        bits = []
        for S in sorted(self.terms):
            bits.append(f"{rat_to_str(self.terms[S])} * [{S.to_text()}]")
        return " + ".join(bits)

    def __repr__(self):
        return f"TautClass(g={self.genus}, marks={self.marks}: {self.to_text()})"


def fundamental(g: int, marks: Sequence[int]) -> TautClass:
    marks = tuple(sorted(marks))
    G = StableGraph([g], [marks], [])
    return TautClass(g, marks, {Stratum(G): Fraction(1)})


def psi_class(g: int, marks: Sequence[int], marking: int, power: int = 1) -> TautClass:
    marks = tuple(sorted(marks))
    G = StableGraph([g], [marks], [])
    return TautClass(g, marks, {Stratum(G, {marking: power}): Fraction(1)})


def kappa_class(g: int, marks: Sequence[int], index: int) -> TautClass:
    marks = tuple(sorted(marks))
    G = StableGraph([g], [marks], [])
    return TautClass(g, marks, {Stratum(G, None, [(index,)]): Fraction(1)})


def class_of_stratum(g: int, marks: Sequence[int], S: Stratum) -> TautClass:
    return TautClass(g, marks, {S: Fraction(1)})


def graph_pushforward_class(g: int, marks: Sequence[int], G: StableGraph,
                            psi: Dict[PsiKey, int] | None = None,
                            kappa=None) -> TautClass:
    return TautClass(g, marks, {Stratum(G, psi, kappa): Fraction(1)})


def relabel_class(X: TautClass, mapping: Dict[int, int]) -> TautClass:
    """Rename markings by `mapping` (markings absent from the map are kept)."""
    new_marks = tuple(sorted(mapping.get(m, m) for m in X.marks))
    out: Dict[Stratum, Fraction] = {}
    for S, c in X.terms.items():
        G = S.graph
        legs = [[mapping.get(m, m) for m in ls] for ls in G.legs]
        psi = {}
        for k, e in S.psi.items():
            psi[mapping.get(k, k) if isinstance(k, int) else k] = e
        S2 = Stratum(StableGraph(G.genera, legs, G.edges), psi, S.kappa)
        out[S2] = out.get(S2, Fraction(0)) + c
    return TautClass(X.genus, new_marks, out)


def integrate(X: TautClass) -> Fraction:
    """Pairing of the top-degree part with the fundamental class."""
    total = Fraction(0)
    for S, c in X.terms.items():
        total += c * _stratum_integral(S)
    return total


def _stratum_integral(S: Stratum) -> Fraction:
    G = S.graph
    val = Fraction(1)
    for v in range(len(G.genera)):
        exps = [S.psi.get(m, 0) for m in G.legs[v]]
        exps += [S.psi.get(h, 0) for h in G.vertex_halfedges(v)]
        val *= vertex_integral(G.genera[v], exps, S.kappa[v])
        if not val:
            return val
    return val


def pair(X: TautClass, Y: TautClass) -> Fraction:
    """integrate(X * Y); the Gorenstein pairing of complementary classes."""
    if not X or not Y:
        return Fraction(0)
    return integrate(multiply(X, Y))


# ---------------------------------------------------------------------------
# Raw (labeled, mutable) strata used by cut/split surgery
# ---------------------------------------------------------------------------

def _raw(S: Stratum):
    G = S.graph
    return ([*G.genera], [list(ls) for ls in G.legs], list(G.edges),
            dict(S.psi), [tuple(k) for k in S.kappa])


def _components(nv: int, edges: Sequence[Tuple[int, int]],
                skip: Optional[int] = None) -> List[List[int]]:
    parent = list(range(nv))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, (a, b) in enumerate(edges):
        if i == skip:
            continue
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    comps: Dict[int, List[int]] = {}
    for v in range(nv):
        comps.setdefault(find(v), []).append(v)
    return list(comps.values())


def _side_data(genera, legs, edges, verts, skip: Optional[int]):
    vs = set(verts)
    e_in = sum(1 for i, (a, b) in enumerate(edges)
               if i != skip and a in vs and b in vs)
    genus = sum(genera[v] for v in verts) + (e_in - len(verts) + 1)
    marks = sorted(m for v in verts for m in legs[v])
    return genus, marks


def _extract(genera, legs, edges, psi, kappa, verts) -> Stratum:
    vs = sorted(verts)
    vmap = {v: i for i, v in enumerate(vs)}
    new_edges = []
    emap = {}
    for i, (a, b) in enumerate(edges):
        if a in vmap and b in vmap:
            emap[i] = len(new_edges)
            new_edges.append((vmap[a], vmap[b]))
    new_psi = {}
    for k, e in psi.items():
        if isinstance(k, int):
            new_psi[k] = e
        elif k[0] in emap:
            new_psi[(emap[k[0]], k[1])] = e
    # leg-psi keys for markings outside this side are dropped with the legs
    side_marks = {m for v in vs for m in legs[v]}
    new_psi = {k: e for k, e in new_psi.items()
               if not isinstance(k, int) or k in side_marks}
    G = StableGraph([genera[v] for v in vs], [legs[v] for v in vs], new_edges)
    return Stratum(G, new_psi, [kappa[v] for v in vs])


def _kappa_splits(multiset: Tuple[int, ...]):
    """All ways to distribute a kappa multiset over two vertices."""
    out = []
    for bits in itertools.product((0, 1), repeat=len(multiset)):
        a = tuple(x for x, b in zip(multiset, bits) if b == 0)
        b = tuple(x for x, b2 in zip(multiset, bits) if b2 == 1)
        out.append((a, b))
    return out


# ---------------------------------------------------------------------------
# One-edge pullback (the excess-intersection kernel of the product)
# ---------------------------------------------------------------------------

_PULL_CACHE: Dict[tuple, list] = {}


def pullback_stats() -> Dict[str, int]:
    return {"cached_pullbacks": len(_PULL_CACHE)}


def _pull_stratum_sep(S: Stratum, gA: int, marksA: Tuple[int, ...], mA: int,
                      gB: int, marksB: Tuple[int, ...], mB: int):
    """Pull ONE stratum back along a separating one-edge gluing.

    Returns a list of (coeff, stratum on side A, stratum on side B).
    Side A has original markings `marksA` plus the new marking mA at the
    branch; likewise B.
    """
    key = (S.key(), "sep", gA, marksA, mA, gB, marksB, mB)
    hit = _PULL_CACHE.get(key)
    if hit is not None:
        return hit
    genera, legs, edges, psi, kappa = _raw(S)
    nv = len(genera)
    setA, setB = set(marksA), set(marksB)
    out = []

    def emit(c, ge, le, ed, ps, ka, compA, compB):
        SA = _extract(ge, le, ed, ps, ka, compA)
        SB = _extract(ge, le, ed, ps, ka, compB)
        if SA.is_zero_by_dimension() or SB.is_zero_by_dimension():
            return
        out.append((c, SA, SB))

    # (a) an existing edge of S matches the divisor: excess factor
    for j, (va, vb) in enumerate(edges):
        comps = _components(nv, edges, skip=j)
        if len(comps) != 2:
            continue
        compa = next(cp for cp in comps if va in cp)
        compb = next(cp for cp in comps if vb in cp)
        ga, ma = _side_data(genera, legs, edges, compa, j)
        gb, mb = _side_data(genera, legs, edges, compb, j)
        for orient in (0, 1):
            cA, cB = (compa, compb) if orient == 0 else (compb, compa)
            gA2, mA2 = (ga, ma) if orient == 0 else (gb, mb)
            gB2, mB2 = (gb, mb) if orient == 0 else (ga, ma)
            if gA2 != gA or set(mA2) != setA or gB2 != gB or set(mB2) != setB:
                continue
            sideA_half = (j, 0) if orient == 0 else (j, 1)
            sideB_half = (j, 1) if orient == 0 else (j, 0)
            le = [list(ls) for ls in legs]
            le[edges[j][0 if orient == 0 else 1]].append(mA)
            le[edges[j][1 if orient == 0 else 0]].append(mB)
            ed = edges[:j] + edges[j + 1:]
            base_psi = {}
            for k, e in psi.items():
                if isinstance(k, int):
                    base_psi[k] = e
                elif k[0] == j:
                    base_psi[mA if k == sideA_half else mB] = e
                else:
                    base_psi[(k[0] - 1 if k[0] > j else k[0], k[1])] = e
            for extra_on, coeff in ((mA, Fraction(-1)), (mB, Fraction(-1))):
                ps = dict(base_psi)
                ps[extra_on] = ps.get(extra_on, 0) + 1
                emit(coeff, genera, le, ed, ps, kappa, cA, cB)

    # (b) refine a vertex of S so that the new edge matches the divisor
    for v in range(nv):
        for H, info in vertex_refinements(S.graph, v):
            if info["kind"] != "split":
                continue
            j = len(H.edges) - 1          # the new edge, side 0 stays at v
            ge = list(H.genera)
            le = [list(ls) for ls in H.legs]
            ed = list(H.edges[:j])
            comps = _components(len(ge), ed)
            if len(comps) != 2:
                continue
            compA = next(cp for cp in comps if v in cp)
            compB = next(cp for cp in comps if (len(ge) - 1) in cp)
            ga, ma = _side_data(ge, le, ed, compA, None)
            gb, mb = _side_data(ge, le, ed, compB, None)
            if ga != gA or set(ma) != setA or gb != gB or set(mb) != setB:
                continue
            le[v].append(mA)
            le[len(ge) - 1].append(mB)
            for kapA, kapB in _kappa_splits(kappa[v]):
                ka = list(kappa) + [kapB]
                ka[v] = kapA
                emit(Fraction(1), ge, le, ed, psi, ka, compA, compB)
    _PULL_CACHE[key] = out
    return out


def _pull_stratum_irr(S: Stratum, mA: int, mB: int):
    """Pull ONE stratum back along the irreducible one-edge gluing.

    Returns a list of (coeff, stratum) on the space with genus reduced by
    one and new markings mA, mB.
    """
    key = (S.key(), "irr", mA, mB)
    hit = _PULL_CACHE.get(key)
    if hit is not None:
        return hit
    genera, legs, edges, psi, kappa = _raw(S)
    nv = len(genera)
    out = []

    def emit(c, ge, le, ed, ps, ka):
        T = _extract(ge, le, ed, ps, ka, range(len(ge)))
        if not T.is_zero_by_dimension():
            out.append((c, T))

    # (a) existing non-separating edges, both branch labelings, with excess
    for j, (va, vb) in enumerate(edges):
        if len(_components(nv, edges, skip=j)) != 1:
            continue
        for orient in (0, 1):
            sideA_half = (j, orient)
            sideB_half = (j, 1 - orient)
            le = [list(ls) for ls in legs]
            le[edges[j][orient]].append(mA)
            le[edges[j][1 - orient]].append(mB)
            ed = edges[:j] + edges[j + 1:]
            base_psi = {}
            for k, e in psi.items():
                if isinstance(k, int):
                    base_psi[k] = e
                elif k[0] == j:
                    base_psi[mA if k == sideA_half else mB] = e
                else:
                    base_psi[(k[0] - 1 if k[0] > j else k[0], k[1])] = e
            for extra_on in (mA, mB):
                ps = dict(base_psi)
                ps[extra_on] = ps.get(extra_on, 0) + 1
                emit(Fraction(-1), genera, le, ed, ps, kappa)

    # (b) vertex refinements whose new edge is non-separating
    for v in range(nv):
        for H, info in vertex_refinements(S.graph, v):
            j = len(H.edges) - 1
            if info["kind"] == "loop":
                ge = list(H.genera)
                le = [list(ls) for ls in H.legs]
                le[v] = le[v] + [mA, mB]
                ed = list(H.edges[:j])
                emit(Fraction(1), ge, le, ed, psi, kappa)
            else:
                ge = list(H.genera)
                le = [list(ls) for ls in H.legs]
                ed = list(H.edges[:j])
                if len(_components(len(ge), ed)) != 1:
                    continue
                le[v].append(mA)
                le[len(ge) - 1].append(mB)
                for kapA, kapB in _kappa_splits(kappa[v]):
                    ka = list(kappa) + [kapB]
                    ka[v] = kapA
                    emit(Fraction(1), ge, le, ed, psi, ka)
    _PULL_CACHE[key] = out
    return out


# ---------------------------------------------------------------------------
# Pullback along a full gluing map, product, pushforward
# ---------------------------------------------------------------------------

def _edge_labels(G: StableGraph, marks: Sequence[int]) -> Dict[Tuple[int, int], int]:
    """Deterministic marking labels for the half-edges of G: the half-edge
    (i, side) of the canonical edge order gets base + 2i + side + 1."""
    base = max(marks)
    return {(i, s): base + 2 * i + s + 1
            for i in range(len(G.edges)) for s in (0, 1)}


class _WorkGraph:
    """Partially cut copy of a gluing graph during pullback."""

    __slots__ = ("genera", "legs", "edges", "edge_ids", "vmap")

    def __init__(self, genera, legs, edges, edge_ids, vmap):
        self.genera = list(genera)
        self.legs = [list(ls) for ls in legs]
        self.edges = list(edges)
        self.edge_ids = list(edge_ids)
        self.vmap = list(vmap)


def pullback_along(G: StableGraph, X: TautClass):
    """Pull X back along the gluing map of G (legs of G = markings of X).

    Returns a list of ``(coeff, {vertex of G: Stratum})``; the stratum at
    vertex v lives on the moduli space with markings ``legs(v)`` plus the
    labels from :func:`_edge_labels` for the half-edges at v.
    """
    labels = _edge_labels(G, X.marks)
    wg = _WorkGraph(G.genera, G.legs, G.edges,
                    list(range(len(G.edges))), range(len(G.genera)))
    terms = [(c, S) for S, c in X.terms.items()]
    return _pullback_work(wg, terms, labels)


def _pullback_work(wg: _WorkGraph, terms, labels):
    if not terms:
        return []
    if not wg.edges:
        v = wg.vmap[0]
        return [(c, {v: S}) for c, S in terms]
    eid = wg.edge_ids[0]
    mA, mB = labels[(eid, 0)], labels[(eid, 1)]
    va, vb = wg.edges[0]
    comps = _components(len(wg.genera), wg.edges, skip=0)
    if len(comps) == 2:
        compA = next(cp for cp in comps if va in cp)
        compB = next(cp for cp in comps if vb in cp)
        gA, marksA = _side_data(wg.genera, wg.legs, wg.edges, compA, 0)
        gB, marksB = _side_data(wg.genera, wg.legs, wg.edges, compB, 0)
        pairs = []
        for c, S in terms:
            for c2, SA, SB in _pull_stratum_sep(
                    S, gA, tuple(marksA), mA, gB, tuple(marksB), mB):
                pairs.append((c * c2, SA, SB))
        if not pairs:
            return []
        wgA = _sub_workgraph(wg, compA, extra_leg=(va, mA))
        wgB = _sub_workgraph(wg, compB, extra_leg=(vb, mB))
        byA: Dict[Stratum, list] = {}
        for c, SA, SB in pairs:
            byA.setdefault(SA, []).append((c, SB))
        out = []
        cacheB: Dict[tuple, list] = {}
        for SA, blist in byA.items():
            resA = _pullback_work(wgA, [(Fraction(1), SA)], labels)
            if not resA:
                continue
            byB: Dict[Stratum, Fraction] = {}
            for c, SB in blist:
                byB[SB] = byB.get(SB, Fraction(0)) + c
            for SB, c in byB.items():
                kB = SB.key()
                if kB not in cacheB:
                    cacheB[kB] = _pullback_work(wgB, [(Fraction(1), SB)], labels)
                for cA, dA in resA:
                    for cB, dB in cacheB[kB]:
                        out.append((c * cA * cB, {**dA, **dB}))
        return out
    # non-separating first edge
    pulled = []
    for c, S in terms:
        for c2, T in _pull_stratum_irr(S, mA, mB):
            pulled.append((c * c2, T))
    wg2 = _WorkGraph(wg.genera, wg.legs, wg.edges[1:], wg.edge_ids[1:], wg.vmap)
    wg2.legs[va] = wg2.legs[va] + [mA]
    wg2.legs[vb] = wg2.legs[vb] + [mB]
    return _pullback_work(wg2, pulled, labels)


def _sub_workgraph(wg: _WorkGraph, verts, extra_leg):
    vs = sorted(verts)
    vmap = {v: i for i, v in enumerate(vs)}
    genera = [wg.genera[v] for v in vs]
    legs = [list(wg.legs[v]) for v in vs]
    v_extra, m_extra = extra_leg
    legs[vmap[v_extra]].append(m_extra)
    edges, edge_ids = [], []
    for i in range(1, len(wg.edges)):
        a, b = wg.edges[i]
        if a in vmap and b in vmap:
            edges.append((vmap[a], vmap[b]))
            edge_ids.append(wg.edge_ids[i])
    return _WorkGraph(genera, legs, edges, edge_ids,
                      [wg.vmap[v] for v in vs])


def substitute(G: StableGraph, marks: Sequence[int],
               vertex_strata: Dict[int, Stratum],
               labels: Optional[Dict[Tuple[int, int], int]] = None) -> Stratum:
    """Insert vertex-level strata into the gluing graph G.

    ``vertex_strata[v]`` lives on the space whose markings are the legs of v
    together with the half-edge labels at v.  The composite is the stratum
    whose gluing map is the composition, a pure graph operation.
    """
    labels = labels or _edge_labels(G, marks)
    genera: List[int] = []
    legs: List[List[int]] = []
    edges: List[Tuple[int, int]] = []
    psi: Dict[PsiKey, int] = {}
    kappa: List[Tuple[int, ...]] = []
    where: Dict[int, Tuple[int, int]] = {}  # half-edge label -> (vertex, psi)
    for v in range(len(G.genera)):
        Sv = vertex_strata[v]
        Gv = Sv.graph
        offset = len(genera)
        emap = {}
        for i, (a, b) in enumerate(Gv.edges):
            emap[i] = len(edges)
            edges.append((a + offset, b + offset))
        for k, e in Sv.psi.items():
            if not isinstance(k, int):
                psi[(emap[k[0]], k[1])] = e
        my_labels = {labels[(i, s)]
                     for i, s in _halfedges_at(G, v)}
        for w in range(len(Gv.genera)):
            genera.append(Gv.genera[w])
            kappa.append(Sv.kappa[w])
            keep = []
            for m in Gv.legs[w]:
                if m in my_labels:
                    where[m] = (offset + w, Sv.psi.get(m, 0))
                else:
                    keep.append(m)
                    if Sv.psi.get(m, 0):
                        psi[m] = Sv.psi[m]
            legs.append(keep)
    for i in range(len(G.edges)):
        m0, m1 = labels[(i, 0)], labels[(i, 1)]
        (w0, p0), (w1, p1) = where[m0], where[m1]
        idx = len(edges)
        edges.append((w0, w1))
        if p0:
            psi[(idx, 0)] = p0
        if p1:
            psi[(idx, 1)] = p1
    return Stratum(StableGraph(genera, legs, edges), psi, kappa)


def _halfedges_at(G: StableGraph, v: int):
    out = []
    for i, (a, b) in enumerate(G.edges):
        if a == v:
            out.append((i, 0))
        if b == v:
            out.append((i, 1))
    return out


def multiply(X: TautClass, Y: TautClass) -> TautClass:
    """Strata-algebra product on the common ambient space."""
    X._check(Y)
    out = TautClass(X.genus, X.marks)
    if not X or not Y:
        return out
    dim = X.dim()
    acc: Dict[Stratum, Fraction] = {}
    for S, cS in Y.terms.items():
        if not X.terms:
            break
        G = S.graph
        labels = _edge_labels(G, X.marks)
        pulled = pullback_along(G, X)
        for c, vstrata in pulled:
            for c2, vstrata2 in _distribute_decorations(S, vstrata, labels):
                comp = substitute(G, X.marks, vstrata2, labels)
                if comp.degree() > dim or comp.is_zero_by_dimension():
                    continue
                coeff = cS * c * c2
                s = acc.get(comp, Fraction(0)) + coeff
                if s:
                    acc[comp] = s
                else:
                    acc.pop(comp, None)
    res = TautClass(X.genus, X.marks)
    res.terms = acc
    return res


def _distribute_decorations(S: Stratum, vstrata: Dict[int, Stratum], labels):
    """Multiply the pulled-back vertex classes by the decorations of S.

    Leg and half-edge psi classes restrict to the corresponding marking of
    the vertex space; each kappa class restricts to the sum of the kappas of
    the inserted graph's vertices.
    """
    G = S.graph
    base: Dict[int, Tuple[Stratum, Dict, List]] = {}
    for v, Sv in vstrata.items():
        psi = dict(Sv.psi)
        kappa = [list(k) for k in Sv.kappa]
        base[v] = (Sv, psi, kappa)
    # psi decorations are deterministic: apply them in place
    for k, e in S.psi.items():
        if isinstance(k, int):
            v = next(v for v in range(len(G.genera)) if k in G.legs[v])
            m = k
        else:
            v = G.edges[k[0]][k[1]]
            m = labels[k]
        _, psi, _ = base[v]
        psi[m] = psi.get(m, 0) + e
    # kappa decorations branch over the vertices of each inserted graph
    branch_vs = [v for v in range(len(G.genera)) if S.kappa[v]]
    choices = []
    for v in branch_vs:
        nw = len(base[v][0].graph.genera)
        choices.append(list(itertools.product(range(nw),
                                              repeat=len(S.kappa[v]))))
    out = []
    for combo in itertools.product(*choices) if branch_vs else [()]:
        result: Dict[int, Stratum] = {}
        ok = True
        for v in range(len(G.genera)):
            Sv, psi, kappa = base[v]
            kap = [list(k) for k in kappa]
            if v in branch_vs:
                assign = combo[branch_vs.index(v)]
                for idx, w in zip(S.kappa[v], assign):
                    kap[w].append(idx)
            T = Stratum(Sv.graph, psi, kap)
            if T.is_zero_by_dimension():
                ok = False
                break
            result[v] = T
        if ok:
            out.append((Fraction(1), result))
    return out


UNSTABLE = object()


def push_vertex_classes(G: StableGraph, marks: Sequence[int], genus: int,
                        vertex_classes: List[object]) -> TautClass:
    """Boundary pushforward along G of a tensor of vertex classes.

    ``vertex_classes[v]`` is a TautClass on the space with markings
    ``legs(v)`` + half-edge labels at v, or the UNSTABLE sentinel for a
    genus-0 valence-2 vertex, which is contracted: its through-marking is
    transplanted onto the branch it meets.
    """
    marks = tuple(sorted(marks))
    labels = _edge_labels(G, marks)
    unstable = [v for v, c in enumerate(vertex_classes) if c is UNSTABLE]
    stable = [v for v, c in enumerate(vertex_classes) if c is not UNSTABLE]

    # Contract unstable vertices: drop the vertex and its edge; the partner
    # half-edge marking is renamed to the through-going leg.
    rename: Dict[int, int] = {}
    dead_edges = set()
    for v in unstable:
        if G.genera[v] != 0 or G.valence(v) != 2 or len(G.legs[v]) != 1:
            raise ValueError("UNSTABLE marker on a vertex that is not (0,2)")
        leg = G.legs[v][0]
        (i, s), = _halfedges_at(G, v)
        dead_edges.add(i)
        partner = (i, 1 - s)
        pv = G.edges[i][1 - s]
        if vertex_classes[pv] is UNSTABLE:
            raise ValueError("two unstable vertices joined by an edge")
        rename[labels[partner]] = leg

    # Reduced graph on the stable vertices
    vmap = {v: i for i, v in enumerate(stable)}
    genera = [G.genera[v] for v in stable]
    legs = [list(G.legs[v]) for v in stable]
    red_edges = []
    red_labels = {}
    for i, (a, b) in enumerate(G.edges):
        if i in dead_edges:
            continue
        idx = len(red_edges)
        red_edges.append((vmap[a], vmap[b]))
        red_labels[(idx, 0)] = labels[(i, 0)]
        red_labels[(idx, 1)] = labels[(i, 1)]
    RG = StableGraph(genera, legs, red_edges)

    out = TautClass(genus, marks)
    combos = [[(S, c) for S, c in vertex_classes[v].terms.items()]
              for v in stable]
    for pick in itertools.product(*combos):
        coeff = Fraction(1)
        vstrata = {}
        for slot, (S, c) in enumerate(pick):
            coeff *= c
            if rename:
                S = _rename_stratum(S, rename)
            vstrata[slot] = S
        comp = substitute(RG, marks, vstrata, red_labels)
        if comp.degree() > out.dim() or comp.is_zero_by_dimension():
            continue
        out = out + TautClass(genus, marks, {comp: coeff})
    return out


def _rename_stratum(S: Stratum, rename: Dict[int, int]) -> Stratum:
    if not any(m in rename for ls in S.graph.legs for m in ls):
        return S
    G = S.graph
    legs = [[rename.get(m, m) for m in ls] for ls in G.legs]
    psi = {}
    for k, e in S.psi.items():
        psi[rename.get(k, k) if isinstance(k, int) else k] = e
    return Stratum(StableGraph(G.genera, legs, G.edges), psi, S.kappa)


# ---------------------------------------------------------------------------
# Intersection-number cache file
# ---------------------------------------------------------------------------

CACHE_HEADER = "tautcalc-psi-cache v1"


class CacheError(RuntimeError):
    pass


def load_psi_cache(path: str) -> int:
    """Load cached psi integrals; returns the number of entries read.
    Raises CacheError on any schema violation."""
    import os
    if not os.path.exists(path):
        return 0
    entries = []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().rstrip("\n")
        if header != CACHE_HEADER:
            raise CacheError(f"bad cache header {header!r} in {path}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise CacheError(f"{path}:{lineno}: expected 'g d1,..,dn p/q'")
            try:
                g = int(parts[0])
                ds = tuple(int(x) for x in parts[1].split(","))
                val = rat_from_str(parts[2])
            except ValueError as exc:
                raise CacheError(f"{path}:{lineno}: {exc}") from exc
            if g < 0 or any(d < 0 for d in ds) or sum(ds) != 3 * g - 3 + len(ds):
                raise CacheError(f"{path}:{lineno}: inconsistent entry")
            entries.append((g, ds, val))
    psi_memo_load(entries)
    return len(entries)


def save_psi_cache(path: str) -> int:
    """Write the full psi memo atomically (write then rename)."""
    import os
    import tempfile
    entries = sorted(psi_memo_export().items())
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".psi-cache-")
    with os.fdopen(fd, "w", encoding="ascii") as fh:
        fh.write(CACHE_HEADER + "\n")
        for (g, ds), val in entries:
            fh.write(f"{g} {','.join(map(str, ds))} {rat_to_str(val)}\n")
    os.replace(tmp, path)
    return len(entries)
