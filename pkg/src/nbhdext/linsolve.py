"""Matrices of Laurent polynomials and exact linear solving over Q.

The solver runs fraction-free Gaussian elimination (Bareiss) on an
integer-cleared copy of the system, so intermediate entries stay integral
and every division is exact.  Inconsistency is a value, not an error:
callers distinguish "no solution in this window" from genuine failures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Callable, List, Optional, Sequence, Tuple

from .errors import NonInvertibleSubstitution
from .laurent import LaurentPoly, as_fraction

MulFn = Callable[[LaurentPoly, LaurentPoly], LaurentPoly]


def _plain_mul(a: LaurentPoly, b: LaurentPoly) -> LaurentPoly:
    return a * b


class PolyMatrix:
    """Dense matrix with LaurentPoly entries sharing one variable list."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, entries: Sequence[Sequence[LaurentPoly]]):
        self.entries = [list(row) for row in entries]
        self.rows = len(self.entries)
        self.cols = len(self.entries[0]) if self.rows else 0
        for row in self.entries:
            if len(row) != self.cols:
                raise ValueError("ragged matrix")

    @classmethod
    def zero(cls, rows: int, cols: int, vars: Sequence[str]) -> "PolyMatrix":
        z = LaurentPoly.zero(vars)
        return cls([[z for _ in range(cols)] for _ in range(rows)])

    @classmethod
    def identity(cls, n: int, vars: Sequence[str]) -> "PolyMatrix":
        one = LaurentPoly.const(vars, 1)
        z = LaurentPoly.zero(vars)
        return cls([[one if i == j else z for j in range(n)] for i in range(n)])

    @classmethod
    def from_scalar_rows(cls, vars: Sequence[str], rows: Sequence[Sequence[object]]) -> "PolyMatrix":
        return cls([[LaurentPoly.const(vars, as_fraction(x)) for x in row] for row in rows])

    def vars(self) -> Tuple[str, ...]:
        if self.rows == 0 or self.cols == 0:
            raise ValueError("empty matrix has no variable list")
        return self.entries[0][0].vars

    def __getitem__(self, rc: Tuple[int, int]) -> LaurentPoly:
        r, c = rc
        return self.entries[r][c]

    def __add__(self, other: "PolyMatrix") -> "PolyMatrix":
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ValueError("shape mismatch")
        return PolyMatrix(
            [
                [self.entries[i][j] + other.entries[i][j] for j in range(self.cols)]
                for i in range(self.rows)
            ]
        )

    def __sub__(self, other: "PolyMatrix") -> "PolyMatrix":
        return self + other.map(lambda p: -p)

    def __neg__(self) -> "PolyMatrix":
        return self.map(lambda p: -p)

    def map(self, fn: Callable[[LaurentPoly], LaurentPoly]) -> "PolyMatrix":
        return PolyMatrix([[fn(p) for p in row] for row in self.entries])

    def scale(self, s, mul: MulFn = _plain_mul) -> "PolyMatrix":
        if isinstance(s, LaurentPoly):
            return self.map(lambda p: mul(s, p))
        return self.map(lambda p: p * s)

    def matmul(self, other: "PolyMatrix", mul: MulFn = _plain_mul) -> "PolyMatrix":
        if self.cols != other.rows:
            raise ValueError("shape mismatch in matmul")
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = None
                for k in range(self.cols):
                    term = mul(self.entries[i][k], other.entries[k][j])
                    acc = term if acc is None else acc + term
                row.append(acc)
            out.append(row)
        return PolyMatrix(out)

    def transpose(self) -> "PolyMatrix":
        return PolyMatrix(
            [[self.entries[i][j] for i in range(self.rows)] for j in range(self.cols)]
        )

    def trace(self) -> LaurentPoly:
        if self.rows != self.cols:
            raise ValueError("trace of a non-square matrix")
        acc = LaurentPoly.zero(self.vars())
        for i in range(self.rows):
            acc = acc + self.entries[i][i]
        return acc

    def commutator(self, other: "PolyMatrix", mul: MulFn = _plain_mul) -> "PolyMatrix":
        return self.matmul(other, mul) - other.matmul(self, mul)

    def det(self, mul: MulFn = _plain_mul) -> LaurentPoly:
        """Determinant by cofactor expansion; fine for the small ranks used here."""
        if self.rows != self.cols:
            raise ValueError("determinant of a non-square matrix")
        n = self.rows
        if n == 0:
            raise ValueError("empty matrix")
        if n == 1:
            return self.entries[0][0]
        acc = LaurentPoly.zero(self.vars())
        for j in range(n):
            minor = PolyMatrix(
                [
                    [self.entries[i][jj] for jj in range(n) if jj != j]
                    for i in range(1, n)
                ]
            )
            term = mul(self.entries[0][j], minor.det(mul))
            acc = acc + term if j % 2 == 0 else acc - term
        return acc

    def inverse_unit_det(self, mul: MulFn = _plain_mul) -> "PolyMatrix":
        """Inverse via adjugate; requires the determinant to be a unit monomial."""
        d = self.det(mul)
        if not d.is_monomial():
            raise NonInvertibleSubstitution(
                f"matrix determinant {d} is not a unit monomial"
            )
        dinv = d.inverse_monomial()
        n = self.rows
        if n == 1:
            return PolyMatrix([[dinv]])
        adj = []
        for i in range(n):
            row = []
            for j in range(n):
                minor = PolyMatrix(
                    [
                        [self.entries[ii][jj] for jj in range(n) if jj != i]
                        for ii in range(n)
                        if ii != j
                    ]
                )
                cof = minor.det(mul)
                if (i + j) % 2 == 1:
                    cof = -cof
                row.append(mul(cof, dinv))
            adj.append(row)
        return PolyMatrix(adj)

    def __eq__(self, other):
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and all(
                self.entries[i][j] == other.entries[i][j]
                for i in range(self.rows)
                for j in range(self.cols)
            )
        )

    __hash__ = None

    def is_zero(self) -> bool:
        return all(p.is_zero() for row in self.entries for p in row)

    def __repr__(self):
        body = "; ".join(", ".join(str(p) for p in row) for row in self.entries)
        return f"PolyMatrix[{body}]"


# -- exact linear systems over Q ------------------------------------------


@dataclass
class ExactLinearSystem:
    """A Q-linear system with an explicit, ordered unknown basis.

    ``basis`` carries opaque labels (one per column) so callers can map a
    solution vector back to cochain coefficients deterministically.
    """

    basis: List[object]
    matrix: List[List[Fraction]]
    rhs: List[Fraction]

    def __post_init__(self):
        width = len(self.basis)
        for row in self.matrix:
            if len(row) != width:
                raise ValueError("matrix row width does not match the unknown basis")
        if len(self.rhs) != len(self.matrix):
            raise ValueError("rhs length does not match the number of constraints")


@dataclass
class Solution:
    consistent: bool
    particular: Optional[List[Fraction]]
    nullspace: List[List[Fraction]] = field(default_factory=list)


def _clear_row(row: Sequence[Fraction]) -> List[int]:
    denom = 1
    for x in row:
        denom = denom * x.denominator // gcd(denom, x.denominator)
    return [int(x * denom) for x in row]


def _bareiss_echelon(
    mat: List[List[int]],
) -> Tuple[List[List[int]], List[int]]:
    """Fraction-free row echelon form; returns (matrix, pivot column per row)."""
    rows = len(mat)
    cols = len(mat[0]) if rows else 0
    piv_cols: List[int] = []
    r = 0
    prev = 1
    for c in range(cols):
        pivot_row = None
        for rr in range(r, rows):
            if mat[rr][c] != 0:
                pivot_row = rr
                break
        if pivot_row is None:
            continue
        if pivot_row != r:
            mat[r], mat[pivot_row] = mat[pivot_row], mat[r]
        p = mat[r][c]
        for rr in range(r + 1, rows):
            f = mat[rr][c]
            # Bareiss update: exact integer division by the previous pivot
            for cc in range(cols):
                mat[rr][cc] = (mat[rr][cc] * p - f * mat[r][cc]) // prev
        prev = p
        piv_cols.append(c)
        r += 1
        if r == rows:
            break
    return mat, piv_cols


def solve_exact(sys: ExactLinearSystem) -> Solution:
    """Solve A x = b exactly over Q.

    Returns one particular solution (free unknowns set to zero) when the
    system is consistent, plus a basis of the kernel of A.  Deterministic
    given the basis order: pivots are chosen scanning columns left to
    right and rows top down.
    """
    n_unknowns = len(sys.basis)
    n_rows = len(sys.matrix)
    aug = [
        _clear_row(list(row) + [b]) for row, b in zip(sys.matrix, sys.rhs)
    ]
    if not aug:
        return Solution(True, [Fraction(0)] * n_unknowns, _identity_nullspace(n_unknowns))
    ech, piv_cols = _bareiss_echelon([row[:] for row in aug])

    rank = len([c for c in piv_cols if c < n_unknowns])
    consistent = all(c < n_unknowns for c in piv_cols)

    free_cols = [c for c in range(n_unknowns) if c not in piv_cols]

    def back_substitute(rhs_col: List[Fraction], assign: dict) -> List[Fraction]:
        x = [Fraction(0)] * n_unknowns
        for c, v in assign.items():
            x[c] = v
        for r in range(rank - 1, -1, -1):
            c = piv_cols[r]
            s = rhs_col[r]
            for cc in range(c + 1, n_unknowns):
                if ech[r][cc]:
                    s -= ech[r][cc] * x[cc]
            x[c] = Fraction(s, ech[r][c])
        return x

    particular: Optional[List[Fraction]] = None
    if consistent:
        particular = back_substitute(
            [Fraction(ech[r][n_unknowns]) for r in range(rank)],
            {c: Fraction(0) for c in free_cols},
        )

    nullspace: List[List[Fraction]] = []
    zeros = [Fraction(0)] * rank
    for f in free_cols:
        assign = {c: Fraction(0) for c in free_cols}
        assign[f] = Fraction(1)
        vec = back_substitute(list(zeros), assign)
        nullspace.append(vec)

    return Solution(consistent, particular, nullspace)


def _identity_nullspace(n: int) -> List[List[Fraction]]:
    return [
        [Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)
    ]


def matrix_rank(rows: Sequence[Sequence[Fraction]]) -> int:
    """Exact rank of a rational matrix (fraction-free elimination)."""
    cleared = [_clear_row(list(r)) for r in rows if any(x != 0 for x in r)]
    if not cleared:
        return 0
    _, piv = _bareiss_echelon(cleared)
    return len(piv)
