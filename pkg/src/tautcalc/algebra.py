"""Exact scalar, polynomial and Laurent arithmetic.

Everything in this package is computed over the rationals with no rounding
anywhere.  The scalar type is ``fractions.Fraction`` (always reduced, positive
denominator), re-exported here as ``Rational``.

Two small algebraic containers live here:

* ``APoly`` -- a sparse multivariate polynomial in the ramification variables
  ``a_1 .. a_n``, stored as ``{exponent tuple: Fraction}`` with no zero
  coefficients.  Values of this kind are produced by exact interpolation from
  evaluations on positive-integer grids.
* ``ULaurent`` -- a Laurent polynomial in the grading variable ``u`` whose
  coefficients may be rationals, ``APoly``'s, or tautological classes.  The
  coefficient type only needs ``+``, scalar ``*`` and truthiness (empty/zero
  coefficients are falsy and get dropped eagerly).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, List, Sequence, Tuple

Rational = Fraction

Exponent = Tuple[int, ...]


def rat_to_str(x: Fraction) -> str:
    """Serialize exactly, always with an explicit denominator."""
    return f"{x.numerator}/{x.denominator}"


def rat_from_str(s: str) -> Fraction:
    num, _, den = s.partition("/")
    if not den:
        den = "1"
    return Fraction(int(num), int(den))


class APoly:
    """Sparse polynomial in ``n`` variables over the rationals.

    Immutable by convention: all operations return new objects.  Zero
    coefficients are never stored, so ``bool(p)`` tests zero structurally.
    """

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Dict[Exponent, Fraction] | None = None):
        self.n = n
        self.terms: Dict[Exponent, Fraction] = {}
        if terms:
            for exp, c in terms.items():
                if c:
                    if len(exp) != n:
                        raise ValueError(f"exponent {exp} has wrong length for n={n}")
                    self.terms[exp] = Fraction(c)

    @classmethod
    def const(cls, n: int, value) -> "APoly":
        return cls(n, {(0,) * n: Fraction(value)})

    @classmethod
    def var(cls, n: int, i: int) -> "APoly":
        exp = [0] * n
        exp[i] = 1
        return cls(n, {tuple(exp): Fraction(1)})

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, APoly):
            return self.n == other.n and self.terms == other.terms
        if other == 0:
            return not self.terms
        return NotImplemented

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def __add__(self, other: "APoly") -> "APoly":
        if self.n != other.n:
            raise ValueError("variable count mismatch")
        out = dict(self.terms)
        for exp, c in other.terms.items():
            s = out.get(exp, Fraction(0)) + c
            if s:
                out[exp] = s
            else:
                out.pop(exp, None)
        return APoly(self.n, out)

    def __neg__(self) -> "APoly":
        return APoly(self.n, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: "APoly") -> "APoly":
        return self + (-other)

    def __mul__(self, other) -> "APoly":
        if isinstance(other, APoly):
            if self.n != other.n:
                raise ValueError("variable count mismatch")
            out: Dict[Exponent, Fraction] = {}
            for e1, c1 in self.terms.items():
                for e2, c2 in other.terms.items():
                    e = tuple(x + y for x, y in zip(e1, e2))
                    s = out.get(e, Fraction(0)) + c1 * c2
                    if s:
                        out[e] = s
                    else:
                        out.pop(e, None)
            return APoly(self.n, out)
        c = Fraction(other)
        return APoly(self.n, {e: v * c for e, v in self.terms.items()})

    __rmul__ = __mul__

    def evaluate(self, point: Sequence) -> Fraction:
        if len(point) != self.n:
            raise ValueError("point has wrong length")
        total = Fraction(0)
        for exp, c in self.terms.items():
            v = c
            for x, e in zip(point, exp):
                if e:
                    v *= Fraction(x) ** e
            total += v
        return total

    def total_degree(self) -> int:
        """Total degree; 0 for the zero polynomial."""
        return max((sum(e) for e in self.terms), default=0)

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        bits = []
        for exp in sorted(self.terms, key=lambda e: (sum(e), e)):
            c = self.terms[exp]
            mono = "*".join(f"a{i+1}^{k}" if k > 1 else f"a{i+1}"
                            for i, k in enumerate(exp) if k)
            bits.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(bits)


def monomials_up_to(n: int, degree: int) -> List[Exponent]:
    """All exponent tuples in n variables with total degree <= degree,
    ordered by (total degree, lexicographic)."""
    out: List[Exponent] = []

    def rec(prefix: List[int], remaining: int, pos: int):
        if pos == n:
            out.append(tuple(prefix))
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, pos + 1)

    rec([], degree, 0)
    out.sort(key=lambda e: (sum(e), e))
    return out


class InterpolationError(ValueError):
    pass


def poly_interpolate(samples: Iterable[Tuple[Sequence[int], Fraction]],
                     degree_bound: int) -> APoly:
    """Reconstruct the unique polynomial of total degree <= degree_bound
    through the given exact samples.

    The sample set must determine the polynomial (a principal lattice
    ``sum(a_i - 1) <= degree_bound`` does); extra samples are allowed and are
    checked for consistency.  Raises :class:`InterpolationError` when the
    system is underdetermined (naming a variable direction with no pivot) or
    when the samples are incompatible with the degree bound.
    """
    samples = [(tuple(p), Fraction(v)) for p, v in samples]
    if not samples:
        raise InterpolationError("no samples given")
    n = len(samples[0][0])
    if any(len(p) != n for p, _ in samples):
        raise InterpolationError("samples have mixed dimensions")
    monos = monomials_up_to(n, degree_bound)
    ncols = len(monos)

    # Dense exact Gaussian elimination on the (samples x monomials) system.
    rows = []
    for point, value in samples:
        row = [Fraction(1)] * ncols
        for j, exp in enumerate(monos):
            v = Fraction(1)
            for x, e in zip(point, exp):
                if e:
                    v *= Fraction(x) ** e
            row[j] = v
        rows.append(row + [value])

    pivots: List[int] = []
    r = 0
    for col in range(ncols):
        pivot = None
        for i in range(r, len(rows)):
            if rows[i][col]:
                pivot = i
                break
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        pv = rows[r][col]
        rows[r] = [x / pv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][col]:
                f = rows[i][col]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        pivots.append(col)
        r += 1

    # Inconsistency: a zero row with nonzero rhs.
    for i in range(r, len(rows)):
        if rows[i][-1]:
            raise InterpolationError(
                "samples are inconsistent with total degree "
                f"<= {degree_bound}")
    if r < ncols:
        missing = next(j for j in range(ncols) if j not in pivots)
        exp = monos[missing]
        direction = next((i for i, e in enumerate(exp) if e), 0)
        raise InterpolationError(
            f"insufficient samples: monomial {exp} undetermined "
            f"(deficient in variable a{direction + 1})")

    coeffs: Dict[Exponent, Fraction] = {}
    for i, col in enumerate(pivots):
        if rows[i][-1]:
            coeffs[monos[col]] = rows[i][-1]
    return APoly(n, coeffs)


class ULaurent:
    """Laurent polynomial in u with coefficients in an additive monoid.

    Stored as ``{exponent: coefficient}``; zero (falsy) coefficients are
    dropped on every operation, so ``bool(x)`` is a structural zero test.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Dict[int, object] | None = None):
        self.coeffs: Dict[int, object] = {}
        if coeffs:
            for k, c in coeffs.items():
                if c:
                    self.coeffs[int(k)] = c

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __eq__(self, other) -> bool:
        if isinstance(other, ULaurent):
            return self.coeffs == other.coeffs
        return NotImplemented

    def __add__(self, other: "ULaurent") -> "ULaurent":
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            if k in out:
                s = out[k] + c
                if s:
                    out[k] = s
                else:
                    del out[k]
            else:
                out[k] = c
        res = ULaurent()
        res.coeffs = out
        return res

    def __neg__(self) -> "ULaurent":
        return ULaurent({k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other: "ULaurent") -> "ULaurent":
        return self + (-other)

    def __mul__(self, other) -> "ULaurent":
        if isinstance(other, ULaurent):
            out: Dict[int, object] = {}
            for k1, c1 in self.coeffs.items():
                for k2, c2 in other.coeffs.items():
                    k = k1 + k2
                    p = c1 * c2
                    if not p:
                        continue
                    if k in out:
                        s = out[k] + p
                        if s:
                            out[k] = s
                        else:
                            del out[k]
                    else:
                        out[k] = p
            res = ULaurent()
            res.coeffs = out
            return res
        return self.map(lambda c: c * other)

    __rmul__ = __mul__

    def map(self, f) -> "ULaurent":
        return ULaurent({k: f(c) for k, c in self.coeffs.items()})

    def shift(self, d: int) -> "ULaurent":
        """Multiply by u^d."""
        return ULaurent({k + d: c for k, c in self.coeffs.items()})

    def coefficient(self, k: int):
        return self.coeffs.get(k)

    def support(self) -> List[int]:
        return sorted(self.coeffs)

    def min_exponent(self):
        return min(self.coeffs) if self.coeffs else None

    def __repr__(self) -> str:
        if not self.coeffs:
            return "0"
        return " + ".join(f"({self.coeffs[k]})*u^{k}" for k in sorted(self.coeffs))


def laurent_negative_part(x: ULaurent) -> ULaurent:
    """The sub-sum over strictly negative u-exponents."""
    return ULaurent({k: c for k, c in x.coeffs.items() if k < 0})


def laurent_flip_u(x: ULaurent) -> ULaurent:
    """Substitute u -> -u: the coefficient at u^k picks up (-1)^k."""
    return ULaurent({k: (c if k % 2 == 0 else -c) for k, c in x.coeffs.items()})


def bernoulli(n: int) -> Fraction:
    """Bernoulli number B_n (convention B_1 = -1/2), exact."""
    if n < 0:
        raise ValueError("n must be >= 0")
    B: List[Fraction] = []
    from math import comb
    for m in range(n + 1):
        if m == 0:
            B.append(Fraction(1))
            continue
        s = Fraction(0)
        for k in range(m):
            s += comb(m + 1, k) * B[k]
        B.append(-s / (m + 1))
    return B[n]


def double_factorial(n: int) -> int:
    """n!! with the convention (-1)!! = 1."""
    if n <= 0:
        return 1
    out = 1
    while n > 0:
        out *= n
        n -= 2
    return out


def next_prime(n: int) -> int:
    """Smallest prime strictly greater than n (trial division; small inputs)."""
    c = n + 1
    if c <= 2:
        return 2
    if c % 2 == 0:
        c += 1
    while True:
        is_p = True
        d = 3
        while d * d <= c:
            if c % d == 0:
                is_p = False
                break
            d += 2
        if is_p:
            return c
        c += 2


def primes_above(threshold: int, count: int, skip: int = 0) -> List[int]:
    """`count` consecutive primes > threshold, optionally skipping the first
    `skip` of them (used for independent sampling schedules)."""
    out: List[int] = []
    p = threshold
    for _ in range(skip + count):
        p = next_prime(p)
        out.append(p)
    return out[skip:]
