"""Stable graphs, star rooted trees, canonical labeling and enumeration.

A stable graph is stored with an explicit vertex order:

* ``genera[v]``   -- genus label of vertex v,
* ``legs[v]``     -- sorted tuple of marking labels attached to v,
* ``edges[i]``    -- pair ``(v1, v2)`` of vertex indices (``v1 == v2`` for a
  loop).  A half-edge is addressed as ``(i, side)`` with side 0 at ``v1`` and
  side 1 at ``v2``.

Graphs of interest here are tiny (at most ~12 half-edges), so canonical
labeling is done by minimizing the full serialized record over vertex
permutations compatible with a cheap vertex invariant.
"""

from __future__ import annotations

import itertools
from math import comb
from typing import Dict, Iterator, List, Sequence, Tuple

HalfEdge = Tuple[int, int]          # (edge index, side)
PsiKey = object                     # int marking label, or HalfEdge


class StableGraph:
    __slots__ = ("genera", "legs", "edges", "_key")

    def __init__(self, genera: Sequence[int], legs: Sequence[Sequence[int]],
                 edges: Sequence[Tuple[int, int]]):
        self.genera = tuple(int(g) for g in genera)
        self.legs = tuple(tuple(sorted(ls)) for ls in legs)
        self.edges = tuple((int(a), int(b)) for a, b in edges)
        if len(self.legs) != len(self.genera):
            raise ValueError("genera/legs length mismatch")
        nv = len(self.genera)
        for a, b in self.edges:
            if not (0 <= a < nv and 0 <= b < nv):
                raise ValueError("edge endpoint out of range")
        self._key = None

    # -- basic structure ---------------------------------------------------

    def num_vertices(self) -> int:
        return len(self.genera)

    def num_edges(self) -> int:
        return len(self.edges)

    def h1(self) -> int:
        return len(self.edges) - len(self.genera) + 1

    def total_genus(self) -> int:
        return sum(self.genera) + self.h1()

    def markings(self) -> Tuple[int, ...]:
        return tuple(sorted(m for ls in self.legs for m in ls))

    def valence(self, v: int) -> int:
        val = len(self.legs[v])
        for a, b in self.edges:
            if a == v:
                val += 1
            if b == v:
                val += 1
        return val

    def vertex_halfedges(self, v: int) -> List[HalfEdge]:
        out = []
        for i, (a, b) in enumerate(self.edges):
            if a == v:
                out.append((i, 0))
            if b == v:
                out.append((i, 1))
        return out

    def halfedge_vertex(self, h: HalfEdge) -> int:
        i, side = h
        return self.edges[i][side]

    def is_connected(self) -> bool:
        nv = len(self.genera)
        if nv == 0:
            return False
        seen = {0}
        frontier = [0]
        while frontier:
            v = frontier.pop()
            for a, b in self.edges:
                for x, y in ((a, b), (b, a)):
                    if x == v and y not in seen:
                        seen.add(y)
                        frontier.append(y)
        return len(seen) == nv

    def is_stable(self) -> bool:
        return all(2 * self.genera[v] - 2 + self.valence(v) > 0
                   for v in range(len(self.genera)))

    def validate(self, g: int, N: int) -> None:
        if not self.is_connected():
            raise ValueError("graph is not connected")
        if self.total_genus() != g:
            raise ValueError(f"total genus {self.total_genus()} != {g}")
        if self.markings() != tuple(range(1, N + 1)):
            raise ValueError("markings are not 1..N")
        if not self.is_stable():
            raise ValueError("unstable vertex")

    # -- canonical form ----------------------------------------------------

    def _vertex_invariant(self, psi: Dict[PsiKey, int],
                          kappa: Sequence[Tuple[int, ...]]):
        inv = []
        for v in range(len(self.genera)):
            own_psi = sorted(psi.get((i, s), 0)
                             for i, s in self.vertex_halfedges(v))
            leg_psi = tuple(psi.get(m, 0) for m in self.legs[v])
            loops = sum(1 for a, b in self.edges if a == b == v)
            inv.append((self.genera[v], self.legs[v], leg_psi,
                        tuple(kappa[v]) if kappa else (),
                        self.valence(v), loops, tuple(own_psi)))
        return inv

    def canonical_record(self, psi: Dict[PsiKey, int] | None = None,
                         kappa: Sequence[Tuple[int, ...]] | None = None):
        """Isomorphism-invariant serialization of (graph, decorations).

        Two decorated graphs have equal records iff they differ by a
        relabeling of vertices and half-edges fixing the legs pointwise.
        """
        psi = psi or {}
        nv = len(self.genera)
        kappa = tuple(tuple(sorted(k)) for k in kappa) if kappa else ((),) * nv
        inv = self._vertex_invariant(psi, kappa)

        # Group vertices by invariant; only same-invariant vertices may swap.
        classes: Dict[object, List[int]] = {}
        for v in range(nv):
            classes.setdefault(tuple(inv[v]), []).append(v)
        class_list = [vs for _, vs in sorted(classes.items(), key=lambda kv: repr(kv[0]))]

        best = None
        for perm_parts in itertools.product(
                *(itertools.permutations(vs) for vs in class_list)):
            relabel = [0] * nv
            pos = 0
            order: List[int] = []
            for part in perm_parts:
                order.extend(part)
            # new label of old vertex order[j] is j, but we want contiguous
            # labels respecting the class order
            for new, old in enumerate(order):
                relabel[old] = new
            genera = tuple(self.genera[old] for old in order)
            legs = tuple(self.legs[old] for old in order)
            kap = tuple(kappa[old] for old in order)
            erecs = []
            for i, (a, b) in enumerate(self.edges):
                x, y = relabel[a], relabel[b]
                pa, pb = psi.get((i, 0), 0), psi.get((i, 1), 0)
                if (x, pa) <= (y, pb):
                    erecs.append((x, y, pa, pb))
                else:
                    erecs.append((y, x, pb, pa))
            erecs.sort()
            leg_psi = tuple(sorted((m, e) for m, e in psi.items()
                                   if isinstance(m, int) and e))
            rec = (genera, legs, kap, tuple(erecs), leg_psi)
            if best is None or rec < best:
                best = rec
        return best

    def key(self):
        if self._key is None:
            self._key = self.canonical_record()
        return self._key

    def __eq__(self, other):
        return isinstance(other, StableGraph) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def to_text(self) -> str:
        genera, legs, _, erecs, _ = self.key()
        vbits = [f"{g}[{','.join(map(str, ls))}]" for g, ls in zip(genera, legs)]
        ebits = [f"({a},{b})" for a, b, _, _ in erecs]
        return "V:" + "|".join(vbits) + ";E:" + "".join(ebits)

    def __repr__(self):
        return f"StableGraph({self.to_text()})"


def graph_from_record(rec) -> Tuple[StableGraph, Dict[PsiKey, int], Tuple[Tuple[int, ...], ...]]:
    genera, legs, kappa, erecs, leg_psi = rec
    edges = [(a, b) for a, b, _, _ in erecs]
    psi: Dict[PsiKey, int] = {}
    for i, (_, _, pa, pb) in enumerate(erecs):
        if pa:
            psi[(i, 0)] = pa
        if pb:
            psi[(i, 1)] = pb
    for m, e in leg_psi:
        psi[m] = e
    return StableGraph(genera, legs, edges), psi, kappa


def canonical_form(G: StableGraph) -> StableGraph:
    """Canonical representative of the isomorphism class of G."""
    if not G.is_connected():
        raise ValueError("canonical_form requires a connected graph")
    graph, _, _ = graph_from_record(G.key())
    return graph


def trivial_graph(g: int, N: int) -> StableGraph:
    return StableGraph([g], [tuple(range(1, N + 1))], [])


def automorphism_count(G: StableGraph) -> int:
    """Order of the automorphism group fixing all legs pointwise.

    Automorphisms permute vertices (respecting genus and leg sets), permute
    parallel edges, and may swap the two half-edges of a loop.
    """
    nv = len(G.genera)
    # multiplicity of edges between unordered vertex pairs / loops at vertices
    pair_mult: Dict[Tuple[int, int], int] = {}
    loop_mult = [0] * nv
    for a, b in G.edges:
        if a == b:
            loop_mult[a] += 1
        else:
            k = (min(a, b), max(a, b))
            pair_mult[k] = pair_mult.get(k, 0) + 1

    # vertices with legs are fixed (legs are pointwise fixed and distinct)
    movable: Dict[Tuple[int, int], List[int]] = {}
    for v in range(nv):
        if not G.legs[v]:
            movable.setdefault((G.genera[v], loop_mult[v]), []).append(v)

    from math import factorial
    total = 0
    groups = list(movable.values())
    for perm_parts in itertools.product(
            *(itertools.permutations(vs) for vs in groups)):
        pi = list(range(nv))
        for vs, part in zip(groups, perm_parts):
            for old, new in zip(vs, part):
                pi[old] = new
        ok = True
        for v in range(nv):
            if loop_mult[v] != loop_mult[pi[v]]:
                ok = False
                break
        if ok:
            for (a, b), m in pair_mult.items():
                x, y = pi[a], pi[b]
                if pair_mult.get((min(x, y), max(x, y)), 0) != m:
                    ok = False
                    break
        if not ok:
            continue
        cnt = 1
        for m in pair_mult.values():
            cnt *= factorial(m)
        for v in range(nv):
            cnt *= factorial(loop_mult[v]) * 2 ** loop_mult[v]
        total += cnt
    return total


# ---------------------------------------------------------------------------
# Star rooted trees
# ---------------------------------------------------------------------------

class StarTree:
    """Rooted tree in which every edge meets the root.

    The root carries legs ``n+1 .. n+m``; each non-root vertex carries a
    nonempty block of the legs ``1 .. n`` and one edge to the root.  Blocks
    are kept sorted by their smallest leg, which makes the representation
    canonical.  ``a(e)`` for the edge at block j is the sum of the grid values
    ``a_i`` over the block.
    """

    __slots__ = ("g", "n", "m", "root_genus", "blocks")

    def __init__(self, g: int, n: int, m: int, root_genus: int,
                 blocks: Sequence[Tuple[int, Sequence[int]]]):
        self.g = g
        self.n = n
        self.m = m
        self.root_genus = int(root_genus)
        blk = [(int(gv), tuple(sorted(ls))) for gv, ls in blocks]
        blk.sort(key=lambda t: t[1][0])
        self.blocks = tuple(blk)

    def num_edges(self) -> int:
        return len(self.blocks)

    def edge_part(self, j: int, a: Sequence[int]) -> int:
        """a(e) for edge j: the sum of a_i over the block's legs."""
        return sum(a[i - 1] for i in self.blocks[j][1])

    def leaf_genera(self) -> Tuple[int, ...]:
        return tuple(gv for gv, _ in self.blocks)

    def to_graph(self) -> StableGraph:
        genera = [self.root_genus] + [gv for gv, _ in self.blocks]
        legs = [tuple(range(self.n + 1, self.n + self.m + 1))]
        legs += [ls for _, ls in self.blocks]
        edges = [(0, j + 1) for j in range(len(self.blocks))]
        return StableGraph(genera, legs, edges)

    def root_unstable(self) -> bool:
        return (self.root_genus == 0
                and 2 * 0 - 2 + len(self.blocks) + self.m == 0)

    def leaf_unstable(self, j: int) -> bool:
        gv, ls = self.blocks[j]
        return gv == 0 and len(ls) + 1 == 2

    def key(self):
        return (self.g, self.n, self.m, self.root_genus, self.blocks)

    def __eq__(self, other):
        return isinstance(other, StarTree) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def to_text(self) -> str:
        bits = [f"{gv}({','.join(map(str, ls))})" for gv, ls in self.blocks]
        return f"root:{self.root_genus}*" + "*".join(bits)

    def __repr__(self):
        return f"StarTree({self.to_text()})"


def check_star_tree(T: StarTree) -> None:
    """Assert every defining constraint of a pre-stable star rooted tree."""
    G = T.to_graph()
    if G.h1() != 0:
        raise AssertionError("underlying graph is not a tree")
    if any(a != 0 for a, _ in G.edges):
        raise AssertionError("an edge misses the root")
    got = sorted(i for _, ls in T.blocks for i in ls)
    if got != list(range(1, T.n + 1)):
        raise AssertionError("legs 1..n must sit on non-root vertices")
    # pre-stability: 2g(v) - 2 + |H(v)| >= 0, and every vertex carries a leg
    if 2 * T.root_genus - 2 + len(T.blocks) + T.m < 0:
        raise AssertionError("root violates pre-stability")
    if T.m < 1:
        raise AssertionError("root carries no leg")
    for gv, ls in T.blocks:
        if 2 * gv - 2 + len(ls) + 1 < 0:
            raise AssertionError("leaf violates pre-stability")
        if not ls:
            raise AssertionError("leaf carries no leg")
    if T.root_genus + sum(gv for gv, _ in T.blocks) != T.g:
        raise AssertionError("vertex genera do not sum to g")


def set_partitions(items: Sequence[int]) -> Iterator[List[List[int]]]:
    """All partitions of `items` into nonempty blocks, canonical order."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def weak_compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(total + 1):
        for rest in weak_compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_pssrt(g: int, n: int, m: int) -> List[StarTree]:
    """All pre-stable star rooted trees for (g, n, m), canonically ordered."""
    if g < 0 or n < 1 or m < 1 or 2 * g - 2 + n + m <= 0:
        raise ValueError(f"invalid (g, n, m) = ({g}, {n}, {m})")
    out: List[StarTree] = []
    for part in set_partitions(range(1, n + 1)):
        k = len(part)
        blocks_legs = sorted((tuple(sorted(b)) for b in part),
                             key=lambda b: b[0])
        for comp in weak_compositions(g, k + 1):
            root_genus, leaf_genera = comp[0], comp[1:]
            T = StarTree(g, n, m, root_genus,
                         list(zip(leaf_genera, blocks_legs)))
            check_star_tree(T)
            out.append(T)
    out.sort(key=lambda t: t.key())
    return out


def stirling2(n: int, k: int) -> int:
    if k == 0:
        return 1 if n == 0 else 0
    if k > n:
        return 0
    row = [1] + [0] * k
    for i in range(1, n + 1):
        new = [0] * (k + 1)
        for j in range(1, min(i, k) + 1):
            new[j] = j * row[j] + row[j - 1]
        new[0] = 1 if i == 0 else 0
        row = new
    return row[k]


def pssrt_count(g: int, n: int) -> int:
    """Closed form for |PSSRT_{g,n,m}| (independent of m):
    sum_k S(n,k) * C(g+k, k)."""
    return sum(stirling2(n, k) * comb(g + k, k) for k in range(1, n + 1))


# ---------------------------------------------------------------------------
# One-edge degenerations and stable-graph enumeration
# ---------------------------------------------------------------------------

def vertex_refinements(G: StableGraph, v: int) -> Iterator[Tuple[StableGraph, dict]]:
    """All stable graphs obtained from G by one degeneration at vertex v.

    Yields ``(graph, info)`` where info records how the new edge was created:

    * ``{"kind": "loop"}`` -- genus of v dropped by one, new loop at v;
    * ``{"kind": "split", "sides": (H1, H2), "genera": (g1, g2)}`` -- v split
      in two along the new edge, H1/H2 the leg-and-half-edge sets.

    The new edge is always appended last; on a split, the side-0 half sits on
    the vertex that keeps index v (side H1) and side 1 on the appended vertex.
    """
    nv = len(G.genera)
    halves = G.vertex_halfedges(v)
    slots = list(G.legs[v]) + halves

    if G.genera[v] >= 1:
        genera = list(G.genera)
        genera[v] -= 1
        edges = list(G.edges) + [(v, v)]
        H = StableGraph(genera, G.legs, edges)
        if H.is_stable():
            yield H, {"kind": "loop"}

    for r in range(len(slots) + 1):
        for H1 in itertools.combinations(slots, r):
            H1set = frozenset(H1)
            H2 = tuple(s for s in slots if s not in H1set)
            for g1 in range(G.genera[v] + 1):
                g2 = G.genera[v] - g1
                if 2 * g1 - 2 + len(H1) + 1 <= 0 or 2 * g2 - 2 + len(H2) + 1 <= 0:
                    continue
                genera = list(G.genera) + [g2]
                genera[v] = g1
                legs = [list(ls) for ls in G.legs] + [[]]
                legs[v] = [s for s in H1 if isinstance(s, int)]
                legs[nv] = [s for s in H2 if isinstance(s, int)]
                edges = list(G.edges)
                for h in halves:
                    i, side = h
                    if h not in H1set:
                        a, b = edges[i]
                        edges[i] = (nv, b) if side == 0 else (a, nv)
                edges.append((v, nv))
                H = StableGraph(genera, legs, edges)
                yield H, {"kind": "split", "sides": (H1, H2),
                          "genera": (g1, g2)}


def enumerate_stable_graphs(g: int, N: int, max_edges: int) -> List[StableGraph]:
    """All stable graphs of type (g, N) with at most max_edges edges,
    one canonical representative each, ordered by (edge count, key)."""
    if 3 * g - 3 + N < 0:
        return []
    start = canonical_form(trivial_graph(g, N))
    levels: List[List[StableGraph]] = [[start]]
    seen = {start.key()}
    for _ in range(max_edges):
        nxt: List[StableGraph] = []
        for G in levels[-1]:
            for v in range(len(G.genera)):
                for H, _ in vertex_refinements(G, v):
                    Hc = canonical_form(H)
                    if Hc.key() not in seen:
                        seen.add(Hc.key())
                        nxt.append(Hc)
        nxt.sort(key=lambda G: G.key())
        levels.append(nxt)
    out: List[StableGraph] = []
    for level in levels:
        out.extend(level)
    return out


# ---------------------------------------------------------------------------
# Decorated strata
# ---------------------------------------------------------------------------

class Stratum:
    """A boundary stratum with psi/kappa decorations, in canonical form.

    ``psi`` maps a marking label (int) or half-edge ``(edge, side)`` to a
    positive exponent; ``kappa[v]`` is the sorted multiset of kappa indices
    at vertex v.  The represented class is the pushforward along the gluing
    map of the decoration monomial (no automorphism normalization; any
    1/|Aut| factors belong to coefficients).
    """

    __slots__ = ("graph", "psi", "kappa", "_key")

    def __init__(self, graph: StableGraph, psi: Dict[PsiKey, int] | None = None,
                 kappa: Sequence[Sequence[int]] | None = None):
        psi = {k: int(e) for k, e in (psi or {}).items() if e}
        nv = len(graph.genera)
        kappa = tuple(tuple(sorted(int(i) for i in k)) for k in (kappa or ((),) * nv))
        if len(kappa) != nv:
            raise ValueError("kappa length mismatch")
        if any(i < 1 for k in kappa for i in k):
            raise ValueError("kappa indices must be positive")
        rec = graph.canonical_record(psi, kappa)
        self.graph, self.psi, self.kappa = graph_from_record(rec)
        self._key = rec

    def key(self):
        return self._key

    def __eq__(self, other):
        return isinstance(other, Stratum) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __lt__(self, other):
        return self._key < other._key

    def degree(self) -> int:
        return (len(self.graph.edges) + sum(self.psi.values())
                + sum(sum(k) for k in self.kappa))

    def vertex_decoration_degree(self, v: int) -> int:
        d = sum(sum(k) for k in (self.kappa[v],))
        for m in self.graph.legs[v]:
            d += self.psi.get(m, 0)
        for h in self.graph.vertex_halfedges(v):
            d += self.psi.get(h, 0)
        return d

    def is_zero_by_dimension(self) -> bool:
        """True when a vertex carries more decoration than its moduli allows."""
        G = self.graph
        for v in range(len(G.genera)):
            if self.vertex_decoration_degree(v) > 3 * G.genera[v] - 3 + G.valence(v):
                return True
        return False

    def to_text(self) -> str:
        base = self.graph.to_text()
        bits = []
        for k in sorted(self.psi, key=repr):
            bits.append(f"psi{k}={self.psi[k]}" if isinstance(k, int)
                        else f"psi(e{k[0]}.{k[1]})={self.psi[k]}")
        for v, kap in enumerate(self.kappa):
            if kap:
                bits.append(f"ka{v}={','.join(map(str, kap))}")
        return base + (";" + ";".join(bits) if bits else "")

    def __repr__(self):
        return f"Stratum({self.to_text()})"


def integer_partitions(n: int) -> Iterator[Tuple[int, ...]]:
    """Partitions of n into positive parts, each as a sorted tuple."""
    if n == 0:
        yield ()
        return

    def rec(remaining: int, cap: int):
        if remaining == 0:
            yield ()
            return
        for first in range(min(remaining, cap), 0, -1):
            for rest in rec(remaining - first, first):
                yield (first,) + rest

    yield from rec(n, n)


def enumerate_strata(g: int, N: int, d: int) -> List[Stratum]:
    """A spanning set of the degree-d tautological classes of (g, N):
    all decorated boundary strata of degree exactly d, up to isomorphism,
    with vertex decorations fitting inside the vertex moduli."""
    if d < 0 or d > 3 * g - 3 + N:
        raise ValueError(f"degree {d} out of range for (g, N) = ({g}, {N})")
    out: Dict[object, Stratum] = {}
    for G in enumerate_stable_graphs(g, N, d):
        rem = d - len(G.edges)
        if rem < 0:
            continue
        nv = len(G.genera)
        slots: List[PsiKey] = []
        for v in range(nv):
            slots.extend(G.legs[v])
        for i, (a, b) in enumerate(G.edges):
            slots.append((i, 0))
            slots.append((i, 1))
        # split rem into (psi part, per-vertex kappa weights)
        for comp in weak_compositions(rem, len(slots) + nv):
            psi = {s: e for s, e in zip(slots, comp[:len(slots)]) if e}
            kap_weights = comp[len(slots):]
            kappa_choices = [list(integer_partitions(w)) for w in kap_weights]
            for kap in itertools.product(*kappa_choices):
                S = Stratum(G, psi, kap)
                if S.is_zero_by_dimension():
                    continue
                out[S.key()] = S
    return [out[k] for k in sorted(out, key=repr)]
