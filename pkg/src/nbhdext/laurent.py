"""Exact multivariate Laurent polynomials over the rationals.

A polynomial is a map from integer exponent vectors to nonzero rational
coefficients, tagged with an ordered tuple of variable names.  All
arithmetic is exact; nothing in this package touches floating point.
The canonical term order is graded lexicographic (total degree first,
ties broken on the exponent tuple), used for serialization and for every
choice of basis downstream, so results are byte-stable across runs.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import NonInvertibleSubstitution, ParseError

Exponent = Tuple[int, ...]


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions and "p/q" strings to an exact rational."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"bad rational literal {value!r}") from exc
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


def format_fraction(c: Fraction) -> str:
    return str(c)


def grlex_key(exps: Exponent) -> Tuple[int, Exponent]:
    return (sum(exps), exps)


class LaurentPoly:
    """Sparse exact Laurent polynomial.

    Instances are treated as immutable: every operation returns a new
    polynomial and nothing mutates ``terms`` after construction.  Zero
    coefficients are never stored; the zero polynomial has no terms.
    """

    __slots__ = ("vars", "terms")

    def __init__(self, vars: Sequence[str], terms: Optional[Mapping[Exponent, object]] = None):
        self.vars: Tuple[str, ...] = tuple(vars)
        n = len(self.vars)
        clean: Dict[Exponent, Fraction] = {}
        if terms:
            for exps, coeff in terms.items():
                c = as_fraction(coeff)
                if c == 0:
                    continue
                e = tuple(int(x) for x in exps)
                if len(e) != n:
                    raise ValueError(f"exponent vector {e} has wrong length for {self.vars}")
                clean[e] = c
        self.terms = clean

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, vars: Sequence[str]) -> "LaurentPoly":
        return cls(vars)

    @classmethod
    def const(cls, vars: Sequence[str], c) -> "LaurentPoly":
        return cls(vars, {(0,) * len(vars): as_fraction(c)})

    @classmethod
    def variable(cls, vars: Sequence[str], name: str) -> "LaurentPoly":
        vars = tuple(vars)
        idx = vars.index(name)
        e = [0] * len(vars)
        e[idx] = 1
        return cls(vars, {tuple(e): Fraction(1)})

    @classmethod
    def monomial(cls, vars: Sequence[str], exps: Sequence[int], coeff=1) -> "LaurentPoly":
        return cls(vars, {tuple(exps): as_fraction(coeff)})

    # -- predicates and access ----------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def coeff(self, exps: Sequence[int]) -> Fraction:
        return self.terms.get(tuple(exps), Fraction(0))

    def constant_coeff(self) -> Fraction:
        return self.terms.get((0,) * len(self.vars), Fraction(0))

    def sorted_terms(self) -> List[Tuple[Exponent, Fraction]]:
        return sorted(self.terms.items(), key=lambda kv: grlex_key(kv[0]))

    def total_degree(self) -> Optional[int]:
        """Max total degree over terms; None for the zero polynomial."""
        if not self.terms:
            return None
        return max(sum(e) for e in self.terms)

    # -- arithmetic ----------------------------------------------------

    def _check_same_ring(self, other: "LaurentPoly") -> None:
        if self.vars != other.vars:
            raise ValueError(f"variable mismatch: {self.vars} vs {other.vars}")

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = LaurentPoly.const(self.vars, other)
        self._check_same_ring(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e, Fraction(0)) + c
            if s == 0:
                out.pop(e, None)
            else:
                out[e] = s
        return LaurentPoly(self.vars, out)

    __radd__ = __add__

    def __neg__(self):
        return LaurentPoly(self.vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = LaurentPoly.const(self.vars, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = as_fraction(other)
            if c == 0:
                return LaurentPoly.zero(self.vars)
            return LaurentPoly(self.vars, {e: cc * c for e, cc in self.terms.items()})
        self._check_same_ring(other)
        out: Dict[Exponent, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = out.get(e, Fraction(0)) + c1 * c2
                if s == 0:
                    out.pop(e, None)
                else:
                    out[e] = s
        return LaurentPoly(self.vars, out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("exponent must be an integer")
        if n < 0:
            return self.inverse_monomial() ** (-n)
        result = LaurentPoly.const(self.vars, 1)
        base = self
        k = n
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    def inverse_monomial(self) -> "LaurentPoly":
        """Invert a single-term polynomial; anything else has no Laurent inverse."""
        if len(self.terms) != 1:
            raise NonInvertibleSubstitution(
                f"{self} is not a unit monomial and cannot be inverted"
            )
        ((e, c),) = self.terms.items()
        return LaurentPoly(self.vars, {tuple(-x for x in e): Fraction(1) / c})

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = LaurentPoly.const(self.vars, other)
        if not isinstance(other, LaurentPoly):
            return NotImplemented
        return self.vars == other.vars and self.terms == other.terms

    __hash__ = None  # mutable dict inside; equality is structural

    # -- calculus ------------------------------------------------------

    def diff(self, name: str) -> "LaurentPoly":
        idx = self.vars.index(name)
        out: Dict[Exponent, Fraction] = {}
        for e, c in self.terms.items():
            k = e[idx]
            if k == 0:
                continue
            e2 = list(e)
            e2[idx] = k - 1
            e2 = tuple(e2)
            s = out.get(e2, Fraction(0)) + c * k
            if s == 0:
                out.pop(e2, None)
            else:
                out[e2] = s
        return LaurentPoly(self.vars, out)

    # -- substitution ----------------------------------------------------

    def subst(self, mapping: Mapping[str, "LaurentPoly"]) -> "LaurentPoly":
        """Substitute variables by polynomials in the same ring.

        Variables absent from ``mapping`` are kept.  A negative power of a
        substituted variable requires its image to be a unit monomial.
        """
        images = {}
        for name in self.vars:
            if name in mapping:
                img = mapping[name]
                self._check_same_ring(img)
                images[name] = img
            else:
                images[name] = LaurentPoly.variable(self.vars, name)
        return self.subst_into(images, self.vars)

    def subst_into(
        self, images: Mapping[str, "LaurentPoly"], target_vars: Sequence[str]
    ) -> "LaurentPoly":
        """Substitute every variable by a polynomial over ``target_vars``."""
        target_vars = tuple(target_vars)
        out = LaurentPoly.zero(target_vars)
        power_cache: Dict[Tuple[str, int], LaurentPoly] = {}
        for e, c in self.sorted_terms():
            term = LaurentPoly.const(target_vars, c)
            for name, k in zip(self.vars, e):
                if k == 0:
                    continue
                key = (name, k)
                if key not in power_cache:
                    if name not in images:
                        raise ValueError(f"no image supplied for variable {name!r}")
                    power_cache[key] = images[name] ** k
                term = term * power_cache[key]
            out = out + term
        return out

    # -- grouped-degree utilities (used by truncated rings) -------------

    def group_degree(self, idxs: Sequence[int], exps: Exponent) -> int:
        return sum(exps[i] for i in idxs)

    def truncate_group(self, idxs: Sequence[int], max_deg: int) -> "LaurentPoly":
        """Drop terms whose total degree in the indexed variables exceeds max_deg."""
        idxs = tuple(idxs)
        kept = {
            e: c for e, c in self.terms.items() if sum(e[i] for i in idxs) <= max_deg
        }
        if len(kept) == len(self.terms):
            return self
        return LaurentPoly(self.vars, kept)

    def part_group(self, idxs: Sequence[int], deg: int) -> "LaurentPoly":
        """The slice of terms of exact total degree ``deg`` in the indexed variables."""
        idxs = tuple(idxs)
        return LaurentPoly(
            self.vars,
            {e: c for e, c in self.terms.items() if sum(e[i] for i in idxs) == deg},
        )

    def min_group_degree(self, idxs: Sequence[int]) -> Optional[int]:
        if not self.terms:
            return None
        idxs = tuple(idxs)
        return min(sum(e[i] for i in idxs) for e in self.terms)

    # -- serialization ---------------------------------------------------

    def to_json_terms(self) -> List[List[object]]:
        return [[list(e), format_fraction(c)] for e, c in self.sorted_terms()]

    @classmethod
    def from_json_terms(cls, vars: Sequence[str], data: Iterable) -> "LaurentPoly":
        terms: Dict[Exponent, Fraction] = {}
        for item in data:
            try:
                exps, coeff = item
                e = tuple(int(x) for x in exps)
            except (TypeError, ValueError) as exc:
                raise ParseError(f"malformed polynomial term {item!r}") from exc
            if len(e) != len(tuple(vars)):
                raise ParseError(
                    f"exponent vector {list(e)} has length {len(e)}, expected {len(tuple(vars))}"
                )
            if e in terms:
                raise ParseError(f"duplicate exponent vector {list(e)}")
            terms[e] = as_fraction(coeff)
        return cls(vars, terms)

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.sorted_terms():
            factors = []
            for name, k in zip(self.vars, e):
                if k == 0:
                    continue
                factors.append(name if k == 1 else f"{name}^{k}")
            mono = "*".join(factors)
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append(f"-{mono}")
            else:
                parts.append(f"{c}*{mono}")
        out = " + ".join(parts)
        return out.replace("+ -", "- ")

    def __repr__(self):
        return f"LaurentPoly({self.vars!r}, {dict(self.sorted_terms())!r})"


def monomial_window(bounds: Sequence[Tuple[int, int]]) -> List[Exponent]:
    """All exponent vectors in a per-variable box, in canonical graded-lex order.

    ``bounds`` lists an inclusive (min, max) per variable; the result has
    size prod(max - min + 1).
    """
    for lo, hi in bounds:
        if lo > hi:
            raise ValueError(f"empty window bound ({lo}, {hi})")
    vectors: List[Exponent] = [()]
    for lo, hi in bounds:
        vectors = [v + (k,) for v in vectors for k in range(lo, hi + 1)]
    vectors.sort(key=grlex_key)
    return vectors
