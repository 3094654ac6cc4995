"""Cech cochains on a cover nerve and the order-one/two obstruction calculus.

Every value on a simplex is stored in the frame of its smallest chart
index; transports to other frames happen lazily through the linear
(conormal) part of the chart transitions, with bundle-valued data
conjugated through the transition matrices.  All assembly is canonical:
simplices, matrix entries and monomials are always walked in sorted
order, so reports are byte-stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iproduct
from typing import Dict, List, Optional, Sequence, Tuple

from . import cohomology
from .errors import FrameMismatch, NotClosed, NotFlat, NotOLinear
from .filtered import (
    ChartRing,
    FilteredAutomorphism,
    PairDerivation,
    bracket,
    leibniz_extend,
)
from .laurent import Exponent, LaurentPoly, grlex_key, monomial_window
from .linsolve import ExactLinearSystem, PolyMatrix, matrix_rank, solve_exact

Pair = Tuple[int, int]
Triple = Tuple[int, int, int]

# value type tags for cochains
SYM_END = "sym_end"        # Sym^v con (x) End E : PolyMatrix with degree-v entries
SYM_SCALAR = "sym_scalar"  # Sym^v con            : LaurentPoly of degree v
SYM_VEC = "sym_vec"        # Sym^v con (x) E      : tuple of e polys
FORM_END = "form_end"      # Omega^1 (x) End E    : tuple over du_b of PolyMatrix
HOMFORM_SYM = "homform_sym"  # Hom(Omega^1, Sym^s): tuple over du_b of polys


@dataclass
class CoverNerve:
    """Charts, overlaps and triples with their intersection rings.

    ``pair_rings[(i, j)]`` holds the ring of U_ij in each of the two chart
    coordinate systems; triples carry the ring in the smallest chart's
    coordinates.  The index set is totally ordered; a triple (i, j, h) is
    always stored with i < j < h.
    """

    chart_rings: List[ChartRing]
    pair_rings: Dict[Pair, Dict[int, ChartRing]]
    triple_rings: Dict[Triple, ChartRing]

    @property
    def n(self) -> int:
        return len(self.chart_rings)

    def doubles(self) -> List[Pair]:
        return sorted(self.pair_rings)

    def triples(self) -> List[Triple]:
        return sorted(self.triple_rings)

    def quadruples(self) -> List[Tuple[int, int, int, int]]:
        out = []
        trip = set(self.triple_rings)
        for q in sorted(
            {
                (a, b, c, d)
                for (a, b, c) in trip
                for d in range(self.n)
                if len({a, b, c, d}) == 4
            }
        ):
            a, b, c, d = sorted(q)
            faces = [(b, c, d), (a, c, d), (a, b, d), (a, b, c)]
            if all(f in trip for f in faces):
                out.append((a, b, c, d))
        return sorted(set(out))


@dataclass
class OverlapGeometry:
    """Transport data of one ordered overlap (i < j), stored both ways."""

    i: int
    j: int
    ring_i: ChartRing
    ring_j: ChartRing
    base_ji: Dict[str, LaurentPoly]    # chart-j tangential vars over chart-i coords
    base_ij: Dict[str, LaurentPoly]
    conormal_ji: PolyMatrix            # t^j_a = sum_b C[a][b] t^i_b (over ring_i)
    conormal_ij: PolyMatrix
    phi: FilteredAutomorphism          # unipotent discrepancy in the i-frame
    logphi: PairDerivation

    def jac_ji(self) -> PolyMatrix:
        """du^j_b = sum_c J[b][c] du^i_c over ring_i."""
        return PolyMatrix(
            [
                [self.base_ji[name].diff(cname) for cname in self.ring_i.u_names]
                for name in self.ring_i.u_names  # same names both charts
            ]
        )

    def jac_ij(self) -> PolyMatrix:
        return PolyMatrix(
            [
                [self.base_ij[name].diff(cname) for cname in self.ring_j.u_names]
                for name in self.ring_j.u_names
            ]
        )


@dataclass
class BundleData:
    """Rank, transition matrices and per-chart connection forms."""

    rank: int
    g: Dict[Pair, PolyMatrix]          # chart-i coordinates on U_ij, i < j
    gammas: List[List[PolyMatrix]]     # per chart, per tangential variable
    flat: List[bool]
    g_inv: Dict[Pair, PolyMatrix] = field(default_factory=dict)

    def __post_init__(self):
        for pair, mat in sorted(self.g.items()):
            if pair not in self.g_inv:
                self.g_inv[pair] = mat.inverse_unit_det()


class CechContext:
    """Cover nerve plus transports: the working state of one scenario."""

    def __init__(
        self,
        nerve: CoverNerve,
        pairs: Dict[Pair, OverlapGeometry],
        bundle: BundleData,
        order: int,
    ):
        if order > 2:
            raise NotClosed(
                "lifting beyond order 2 is unsupported: the cochain bracket "
                "calculus used here is exact only through the quadratic terms"
            )
        self.nerve = nerve
        self.pairs = pairs
        self.bundle = bundle
        self.order = order

    # -- elementary transports (j-frame value to i-frame, (i,j) a stored pair) --

    def _geom(self, pair: Pair) -> OverlapGeometry:
        if pair not in self.pairs:
            raise FrameMismatch(f"no transport data for overlap {pair}")
        return self.pairs[pair]

    def scalar_to_low(self, pair: Pair, value: LaurentPoly) -> LaurentPoly:
        g = self._geom(pair)
        images = dict(g.base_ji)
        for a, tname in enumerate(g.ring_i.t_names):
            acc = g.ring_i.zero()
            for b in range(g.ring_i.q):
                acc = acc + g.conormal_ji[a, b] * g.ring_i.t_var(b)
            images[tname] = acc
        return g.ring_i.subst_trunc(value, images, self.order, target=g.ring_i)

    def end_to_low(self, pair: Pair, value: PolyMatrix) -> PolyMatrix:
        g = self._geom(pair)
        moved = value.map(lambda p: self.scalar_to_low(pair, p))
        gm, gi = self.bundle.g[pair], self.bundle.g_inv[pair]
        mul = lambda a, b: g.ring_i.mul(a, b, self.order)
        return gm.matmul(moved, mul).matmul(gi, mul)

    def vec_to_low(self, pair: Pair, value: Sequence[LaurentPoly]) -> Tuple[LaurentPoly, ...]:
        g = self._geom(pair)
        moved = [self.scalar_to_low(pair, p) for p in value]
        gm = self.bundle.g[pair]
        mul = lambda a, b: g.ring_i.mul(a, b, self.order)
        return tuple(
            sum(
                (mul(gm[r, c], moved[c]) for c in range(len(moved))),
                g.ring_i.zero(),
            )
            for r in range(gm.rows)
        )

    def form_end_to_low(
        self, pair: Pair, value: Sequence[PolyMatrix]
    ) -> Tuple[PolyMatrix, ...]:
        g = self._geom(pair)
        ring = g.ring_i
        mul = lambda a, b: ring.mul(a, b, self.order)
        moved = [m.map(lambda p: self.scalar_to_low(pair, p)) for m in value]
        jac = g.jac_ji()
        reindexed = []
        for c in range(ring.p):
            acc = PolyMatrix.zero(self.bundle.rank, self.bundle.rank, ring.names)
            for b in range(ring.p):
                if not jac[b, c].is_zero():
                    acc = acc + moved[b].scale(jac[b, c], mul)
            reindexed.append(acc)
        gm, gi = self.bundle.g[pair], self.bundle.g_inv[pair]
        return tuple(gm.matmul(m, mul).matmul(gi, mul) for m in reindexed)

    def homform_to_low(
        self, pair: Pair, value: Sequence[LaurentPoly]
    ) -> Tuple[LaurentPoly, ...]:
        g = self._geom(pair)
        ring_j, ring_i = g.ring_j, g.ring_i
        jac_back = g.jac_ij()  # du^i_c = sum_b K[c][b] du^j_b over ring_j
        out = []
        for c in range(ring_i.p):
            acc = ring_j.zero()
            for b in range(ring_j.p):
                if not jac_back[c, b].is_zero():
                    acc = acc + ring_j.mul(jac_back[c, b], value[b], self.order)
            out.append(self.scalar_to_low(pair, acc))
        return tuple(out)

    def transport(self, pair: Pair, vtype: str, value):
        if vtype == SYM_SCALAR:
            return self.scalar_to_low(pair, value)
        if vtype == SYM_END:
            return self.end_to_low(pair, value)
        if vtype == SYM_VEC:
            return self.vec_to_low(pair, value)
        if vtype == FORM_END:
            return self.form_end_to_low(pair, value)
        if vtype == HOMFORM_SYM:
            return self.homform_to_low(pair, value)
        raise ValueError(f"unknown value type {vtype!r}")

    # -- derivation transport ---------------------------------------------------

    def derivation_to_low(self, pair: Pair, d: PairDerivation) -> PairDerivation:
        """Conjugate a j-frame pair derivation into the i-frame."""
        g = self._geom(pair)
        ring_i, ring_j = g.ring_i, g.ring_j
        k = self.order
        # chart-i generators expressed in the j-frame
        u_back = {name: g.base_ij[name] for name in ring_j.u_names}
        t_back = {}
        for a, tname in enumerate(ring_j.t_names):
            acc = ring_j.zero()
            for b in range(ring_j.q):
                acc = acc + g.conormal_ij[a, b] * ring_j.t_var(b)
            t_back[tname] = acc
        u_imgs = []
        for b, name in enumerate(ring_i.u_names):
            val = d.apply(u_back[name])
            u_imgs.append(self.scalar_to_low(pair, val))
        t_imgs = []
        for a, tname in enumerate(ring_i.t_names):
            val = d.apply(t_back[tname])
            t_imgs.append(self.scalar_to_low(pair, val))
        module = None
        if d.module is not None:
            module = self.end_to_low(pair, d.module)
        return PairDerivation(
            ring_i,
            min(d.order, k),
            tuple(ring_i.truncate(p, k) for p in u_imgs),
            tuple(ring_i.truncate(p, k) for p in t_imgs),
            module,
            algebra_trunc=min(d.order, k),
        )

    # -- connections and the Atiyah cochain ---------------------------------------

    def connection_in_low(self, pair: Pair) -> List[PolyMatrix]:
        """The high chart's connection transported into the low chart frame."""
        g = self._geom(pair)
        ring = g.ring_i
        mul = lambda a, b: ring.mul(a, b, self.order)
        gamma_high = self.bundle.gammas[g.j]
        moved = [m.map(lambda p: self.scalar_to_low(pair, p)) for m in gamma_high]
        jac = g.jac_ji()
        out = []
        gm, gi = self.bundle.g[pair], self.bundle.g_inv[pair]
        for c in range(ring.p):
            acc = PolyMatrix.zero(self.bundle.rank, self.bundle.rank, ring.names)
            for b in range(ring.p):
                if not jac[b, c].is_zero():
                    acc = acc + moved[b].scale(jac[b, c], mul)
            term = gm.matmul(acc, mul).matmul(gi, mul)
            dg = gm.map(lambda p: p.diff(ring.u_names[c]))
            out.append(term - dg.matmul(gi, mul))
        return out

    def atiyah_value(self, pair: Pair) -> Tuple[PolyMatrix, ...]:
        """nabla_low - nabla_high on the overlap, in the low frame."""
        g = self._geom(pair)
        gamma_low = self.bundle.gammas[g.i]
        gamma_high = self.connection_in_low(pair)
        return tuple(a - b for a, b in zip(gamma_low, gamma_high))

    # -- component extraction ------------------------------------------------------

    def components(self, pair: Pair) -> Dict[str, object]:
        """Tangential-form, conormal and module components of log Phi.

        ``a[s]`` is the degree-s tangential data (one polynomial per du_b);
        ``L[s]`` the conormal data; when the transition carries module
        images, ``m[v]`` is the O-linear residue against the high chart's
        transported connection.
        """
        g = self._geom(pair)
        ring = g.ring_i
        d = g.logphi
        out: Dict[str, object] = {"a": {}, "L": {}, "m": {}}
        for s in range(1, self.order + 1):
            out["a"][s] = tuple(ring.t_part(img, s) for img in d.u_images)
            out["L"][s] = tuple(ring.t_part(img, s + 1) for img in d.t_images)
        if d.module is not None:
            self._check_module_derivation(g, d)
            nabla = self.connection_in_low(pair)
            for v in range(1, self.order + 1):
                mat = d.module.map(lambda p: ring.t_part(p, v))
                for b in range(ring.p):
                    a_vb = ring.t_part(d.u_images[b], v)
                    if not a_vb.is_zero():
                        mat = mat - nabla[b].scale(
                            a_vb, lambda x, y: ring.mul(x, y, self.order)
                        )
                out["m"][v] = mat
        return out

    def _check_module_derivation(self, g: OverlapGeometry, d: PairDerivation) -> None:
        """Supplied module data must raise the conormal degree.

        A transition log whose module matrix has degree-zero content cannot
        pair with a unipotent algebra automorphism, so its O-linear residues
        against the connection would pick up first-order garbage.
        """
        ring = g.ring_i
        for row in d.module.entries:
            for p in row:
                low = ring.t_degree_min(p)
                if low is not None and low < 1:
                    raise NotOLinear(
                        f"module data on overlap ({g.i},{g.j}) has conormal-degree-zero "
                        "content and cannot belong to a unipotent transition"
                    )

    def sphi_operator(self, pair: Pair, degree: int) -> PairDerivation:
        """The connection lift of the degree-s slice of log Phi on this overlap."""
        g = self._geom(pair)
        ring = g.ring_i
        d = g.logphi.component(degree)
        return leibniz_extend(d, self.connection_in_low(pair), self.bundle.rank)

    def transported_sphi(self, low: int, pair: Pair, degree: int) -> PairDerivation:
        """sphi of a higher pair conjugated into the frame of chart ``low``."""
        g = self._geom(pair)
        if g.i == low:
            return self.sphi_operator(pair, degree)
        d = self.derivation_to_low((low, g.i), g.logphi)
        sliced = d.component(degree)
        nabla = self._transport_connection_chain(low, pair)
        return leibniz_extend(sliced, nabla, self.bundle.rank)

    def _transport_connection_chain(self, low: int, pair: Pair) -> List[PolyMatrix]:
        """The high chart's connection of ``pair`` expressed in chart ``low``."""
        inner = self.connection_in_low(pair)  # in frame pair[0]
        step = (low, pair[0])
        g = self._geom(step)
        ring = g.ring_i
        mul = lambda a, b: ring.mul(a, b, self.order)
        moved = [m.map(lambda p: self.scalar_to_low(step, p)) for m in inner]
        jac = g.jac_ji()
        out = []
        gm, gi = self.bundle.g[step], self.bundle.g_inv[step]
        for c in range(ring.p):
            acc = PolyMatrix.zero(self.bundle.rank, self.bundle.rank, ring.names)
            for b in range(ring.p):
                if not jac[b, c].is_zero():
                    acc = acc + moved[b].scale(jac[b, c], mul)
            term = gm.matmul(acc, mul).matmul(gi, mul)
            dg = gm.map(lambda p: p.diff(ring.u_names[c]))
            out.append(term - dg.matmul(gi, mul))
        return out

    # -- value helpers ---------------------------------------------------------------

    def zero_value(self, vtype: str, ring: ChartRing):
        e = self.bundle.rank
        if vtype == SYM_SCALAR:
            return ring.zero()
        if vtype == SYM_END:
            return PolyMatrix.zero(e, e, ring.names)
        if vtype == SYM_VEC:
            return tuple(ring.zero() for _ in range(e))
        if vtype == FORM_END:
            return tuple(PolyMatrix.zero(e, e, ring.names) for _ in range(ring.p))
        if vtype == HOMFORM_SYM:
            return tuple(ring.zero() for _ in range(ring.p))
        raise ValueError(f"unknown value type {vtype!r}")

    def ring_of(self, simplex: Tuple[int, ...]) -> ChartRing:
        if len(simplex) == 1:
            return self.nerve.chart_rings[simplex[0]]
        if len(simplex) == 2:
            return self.nerve.pair_rings[simplex][simplex[0]]
        if len(simplex) == 3:
            return self.nerve.triple_rings[simplex]
        return self.nerve.chart_rings[simplex[0]]


def value_add(a, b):
    if isinstance(a, LaurentPoly):
        return a + b
    if isinstance(a, PolyMatrix):
        return a + b
    return tuple(value_add(x, y) for x, y in zip(a, b))


def value_neg(a):
    if isinstance(a, LaurentPoly):
        return -a
    if isinstance(a, PolyMatrix):
        return -a
    return tuple(value_neg(x) for x in a)


def value_is_zero(a) -> bool:
    if isinstance(a, LaurentPoly):
        return a.is_zero()
    if isinstance(a, PolyMatrix):
        return a.is_zero()
    return all(value_is_zero(x) for x in a)


def value_scale(a, c):
    if isinstance(a, LaurentPoly):
        return a * c
    if isinstance(a, PolyMatrix):
        return a.scale(Fraction(c))
    return tuple(value_scale(x, c) for x in a)


@dataclass
class CechCochain:
    """Degree 0, 1 or 2 assignment of module values to nerve simplices."""

    degree: int
    vtype: str
    sdeg: int
    values: Dict[Tuple[int, ...], object]

    def value(self, ctx: CechContext, simplex: Tuple[int, ...]):
        if simplex in self.values:
            return self.values[simplex]
        return ctx.zero_value(self.vtype, ctx.ring_of(simplex))

    def is_zero(self) -> bool:
        return all(value_is_zero(v) for v in self.values.values())

    def add(self, other: "CechCochain") -> "CechCochain":
        keys = set(self.values) | set(other.values)
        out = {}
        for kk in keys:
            a = self.values.get(kk)
            b = other.values.get(kk)
            if a is None:
                out[kk] = b
            elif b is None:
                out[kk] = a
            else:
                out[kk] = value_add(a, b)
        return CechCochain(self.degree, self.vtype, self.sdeg, out)

    def neg(self) -> "CechCochain":
        return CechCochain(
            self.degree, self.vtype, self.sdeg,
            {kk: value_neg(v) for kk, v in self.values.items()},
        )


def cech_differential(ctx: CechContext, c: CechCochain) -> CechCochain:
    """Alternating sum of restrictions, all transported to the lowest frame."""
    if c.degree == 0:
        out = {}
        for pair in ctx.nerve.doubles():
            i, j = pair
            high = ctx.transport(pair, c.vtype, c.value(ctx, (j,)))
            out[pair] = value_add(high, value_neg(c.value(ctx, (i,))))
        return CechCochain(1, c.vtype, c.sdeg, out)
    if c.degree == 1:
        out = {}
        for tri in ctx.nerve.triples():
            i, j, h = tri
            moved = ctx.transport((i, j), c.vtype, c.value(ctx, (j, h)))
            out[tri] = value_add(
                moved,
                value_add(value_neg(c.value(ctx, (i, h))), c.value(ctx, (i, j))),
            )
        return CechCochain(2, c.vtype, c.sdeg, out)
    if c.degree == 2:
        out = {}
        for quad in ctx.nerve.quadruples():
            i, j, h, l = quad
            moved = ctx.transport((i, j), c.vtype, c.value(ctx, (j, h, l)))
            acc = value_add(moved, value_neg(c.value(ctx, (i, h, l))))
            acc = value_add(acc, c.value(ctx, (i, j, l)))
            acc = value_add(acc, value_neg(c.value(ctx, (i, j, h))))
            out[quad] = acc
        return CechCochain(3, c.vtype, c.sdeg, out)
    raise ValueError("differential implemented for degrees 0..2")


# -- obstruction cochains ---------------------------------------------------------


def atiyah_cocycle(ctx: CechContext) -> CechCochain:
    """Differences of local connections; represents the Atiyah class."""
    values = {pair: ctx.atiyah_value(pair) for pair in ctx.nerve.doubles()}
    return CechCochain(1, FORM_END, 0, values)


def contract(ring: ChartRing, a_val, form_val, order: int) -> PolyMatrix:
    """Pair a Hom(Omega^1, Sym^s) value against an End-valued one-form."""
    e = form_val[0].rows
    acc = PolyMatrix.zero(e, e, ring.names)
    for b in range(ring.p):
        if not a_val[b].is_zero():
            acc = acc + form_val[b].scale(
                a_val[b], lambda x, y: ring.mul(x, y, order)
            )
    return acc


def kodaira_spencer_cochain(ctx: CechContext, degree: int) -> CechCochain:
    """The degree-s tangential components of the transition logarithms."""
    values = {}
    for pair in ctx.nerve.doubles():
        values[pair] = ctx.components(pair)["a"][degree]
    return CechCochain(1, HOMFORM_SYM, degree, values)


def first_order_obstruction(
    ctx: CechContext, a1: CechCochain, at: CechCochain, workers: int = 1
) -> CechCochain:
    """Cup product a^1_ij . At_jh on each triple, in the lowest frame."""

    def evaluate(tri: Triple):
        i, j, h = tri
        ring = ctx.nerve.pair_rings[(i, j)][i]
        at_moved = ctx.transport((i, j), FORM_END, at.value(ctx, (j, h)))
        return contract(ring, a1.value(ctx, (i, j)), at_moved, ctx.order)

    return CechCochain(2, SYM_END, 1, _map_simplices(ctx.nerve.triples(), evaluate, workers))


def second_order_obstruction(
    ctx: CechContext,
    a2: CechCochain,
    at: CechCochain,
    m1: CechCochain,
    workers: int = 1,
) -> CechCochain:
    """Quadratic obstruction given an order-one solution and flat connections."""
    if not all(ctx.bundle.flat):
        raise NotFlat("the order-two formula requires flat local connections")
    half = Fraction(1, 2)

    def evaluate(tri: Triple):
        i, j, h = tri
        ring = ctx.nerve.pair_rings[(i, j)][i]
        mul = lambda a, b: ring.mul(a, b, ctx.order)
        at_moved = ctx.transport((i, j), FORM_END, at.value(ctx, (j, h)))
        acc = contract(ring, a2.value(ctx, (i, j)), at_moved, ctx.order)
        m_ij = m1.value(ctx, (i, j))
        m_jh = ctx.transport((i, j), SYM_END, m1.value(ctx, (j, h)))
        acc = acc + m_ij.commutator(m_jh, mul).scale(half)
        sphi_ij = ctx.sphi_operator((i, j), 1)
        sphi_jh = ctx.transported_sphi(i, (j, h), 1)
        acc = acc + _op_endo_bracket(ctx, ring, sphi_jh, m_ij).scale(half)
        acc = acc + _op_endo_bracket(ctx, ring, sphi_ij, m_jh).scale(half)
        return acc.map(lambda p: ring.t_part(p, 2))

    return CechCochain(2, SYM_END, 2, _map_simplices(ctx.nerve.triples(), evaluate, workers))


def _map_simplices(simplices, evaluate, workers: int) -> Dict:
    """Evaluate per-simplex values, optionally fanned out; order is canonical."""
    if workers > 1 and len(simplices) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, simplices))
    else:
        results = [evaluate(tri) for tri in simplices]
    return dict(zip(simplices, results))


def _op_endo_bracket(
    ctx: CechContext, ring: ChartRing, op: PairDerivation, endo: PolyMatrix
) -> PolyMatrix:
    """Commutator of a split first-order operator with an O-linear value."""
    e = endo.rows
    zero_op = PairDerivation(
        ring,
        ctx.order,
        tuple(ring.zero() for _ in range(ring.p)),
        tuple(ring.zero() for _ in range(ring.q)),
        endo,
        algebra_trunc=ctx.order,
    )
    return bracket(op, zero_op).module


def abelianized_pair(
    ctx: CechContext, a1: CechCochain, a2: CechCochain, at: CechCochain
) -> Tuple[CechCochain, CechCochain]:
    """(a^1 . At, a^2 . Tr At): the two layers of the rank-free obstruction."""
    end_part = first_order_obstruction(ctx, a1, at)
    values = {}
    for tri in ctx.nerve.triples():
        i, j, h = tri
        ring = ctx.nerve.pair_rings[(i, j)][i]
        at_moved = ctx.transport((i, j), FORM_END, at.value(ctx, (j, h)))
        traced = tuple(m.trace() for m in at_moved)
        acc = ring.zero()
        for b in range(ring.p):
            acc = acc + ring.mul(a2.value(ctx, (i, j))[b], traced[b], ctx.order)
        values[tri] = ring.t_part(acc, 2)
    return end_part, CechCochain(2, SYM_SCALAR, 2, values)


# -- solving ------------------------------------------------------------------------


@dataclass
class Solved:
    cochain: CechCochain
    torsor_dim: int
    h1_oracle: Optional[int] = None


@dataclass
class ProvenNonzero:
    class_coordinates: List[Tuple[str, str]]


@dataclass
class UnresolvedWithinWindow:
    window: Tuple[int, int]


def allowed_exponent(ring: ChartRing, w: Exponent) -> bool:
    """Membership of a tangential exponent vector in the chart ring's cone."""
    if all(x >= 0 for x in w):
        return True
    if not ring.inverted:
        return False
    bound = max(-min(w), 1) + 1
    ranges = [range(0, bound + 1)] * len(ring.inverted)
    for combo in iproduct(*ranges):
        shifted = list(w)
        for n_i, inv in zip(combo, ring.inverted):
            for t, ex in enumerate(inv):
                shifted[t] += n_i * ex
        if all(x >= 0 for x in shifted):
            return True
    return False


def _window_exponents(ring: ChartRing, window: Tuple[int, int]) -> List[Exponent]:
    lo, hi = window
    return [
        w
        for w in monomial_window([(lo, hi)] * ring.p)
        if allowed_exponent(ring, w)
    ]


def _unknown_basis(
    ctx: CechContext, vtype: str, sdeg: int, window: Tuple[int, int]
) -> List[Tuple[Pair, int, int, Exponent, Exponent]]:
    e = ctx.bundle.rank
    basis = []
    for pair in ctx.nerve.doubles():
        ring = ctx.nerve.pair_rings[pair][pair[0]]
        t_monos = ring.t_monomials(sdeg)
        u_exps = _window_exponents(ring, window)
        for r in range(e):
            for c in range(e):
                if vtype == SYM_SCALAR and (r, c) != (0, 0):
                    continue
                for tm in t_monos:
                    for ue in u_exps:
                        basis.append((pair, r, c, tm, ue))
    return basis


def _elementary_cochain(
    ctx: CechContext, vtype: str, sdeg: int, key
) -> CechCochain:
    pair, r, c, tm, ue = key
    ring = ctx.nerve.pair_rings[pair][pair[0]]
    mono = ring.monomial(tuple(ue) + tuple(tm))
    if vtype == SYM_SCALAR:
        return CechCochain(1, vtype, sdeg, {pair: mono})
    e = ctx.bundle.rank
    mat = PolyMatrix.zero(e, e, ring.names)
    mat.entries[r][c] = mono
    return CechCochain(1, vtype, sdeg, {pair: mat})


def _coordinates(vtype: str, simplex, value) -> Dict[Tuple, Fraction]:
    """Flatten a cochain value into (simplex, entry, exponent) -> coefficient."""
    out: Dict[Tuple, Fraction] = {}
    if vtype == SYM_SCALAR:
        mats = [((0, 0), value)]
    else:
        mats = [
            ((r, c), value.entries[r][c])
            for r in range(value.rows)
            for c in range(value.cols)
        ]
    for entry, poly in mats:
        for exps, coeff in poly.sorted_terms():
            out[(simplex, entry, exps)] = coeff
    return out


def cochain_coordinates(c: CechCochain) -> Dict[Tuple, Fraction]:
    out: Dict[Tuple, Fraction] = {}
    for simplex in sorted(c.values):
        out.update(_coordinates(c.vtype, simplex, c.values[simplex]))
    return out


def _im_delta0_inside(
    ctx: CechContext,
    vtype: str,
    sdeg: int,
    window: Tuple[int, int],
    column_index: Dict[Tuple, int],
) -> int:
    """Dimension of the window-supported part of the coboundary image.

    Chart 0-cochains from the same window are pushed through delta; images
    that leave the window span are cut by intersecting with it exactly.
    """
    e = ctx.bundle.rank
    cols = []
    for i in range(ctx.nerve.n):
        ring = ctx.nerve.chart_rings[i]
        t_monos = ring.t_monomials(sdeg)
        u_exps = _window_exponents(ring, window)
        for r in range(e):
            for c in range(e):
                if vtype == SYM_SCALAR and (r, c) != (0, 0):
                    continue
                for tm in t_monos:
                    for ue in u_exps:
                        mono = ring.monomial(tuple(ue) + tuple(tm))
                        if vtype == SYM_SCALAR:
                            val = mono
                        else:
                            val = PolyMatrix.zero(e, e, ring.names)
                            val.entries[r][c] = mono
                        c0 = CechCochain(0, vtype, sdeg, {(i,): val})
                        image = cech_differential(ctx, c0)
                        cols.append(cochain_coordinates(image))
    if not cols:
        return 0
    inside_keys = sorted(column_index, key=_coord_sort_key)
    outside_keys = sorted(
        {kk for col in cols for kk in col if kk not in column_index},
        key=_coord_sort_key,
    )
    out_rows = [
        [col.get(kk, Fraction(0)) for col in cols] for kk in outside_keys
    ]
    # kernel of the outside part = combinations landing inside the window span
    sys = ExactLinearSystem(
        basis=list(range(len(cols))),
        matrix=out_rows,
        rhs=[Fraction(0)] * len(out_rows),
    )
    sol = solve_exact(sys)
    inside_vectors = []
    for null_vec in sol.nullspace:
        vec = []
        for kk in inside_keys:
            acc = Fraction(0)
            for col, coeff in zip(cols, null_vec):
                if coeff:
                    acc += coeff * col.get(kk, Fraction(0))
            vec.append(acc)
        inside_vectors.append(vec)
    if not inside_vectors:
        return 0
    return matrix_rank(inside_vectors)


def _coord_sort_key(kk):
    simplex, entry, exps = kk
    return (simplex, entry, grlex_key(exps))


def solve_coboundary(
    ctx: CechContext,
    target: CechCochain,
    window: Tuple[int, int],
    h1_oracle: Optional[int] = None,
    h2_basis_test=None,
):
    """Solve -delta(m) = target for a window-supported 1-cochain m.

    On success the residual is rechecked to be exactly zero and the torsor
    dimension (window kernel of delta modulo window coboundaries) is
    reported.  Failure escalates to a proven-nonzero verdict only when a
    weight pairing certifies the class against a cohomology basis;
    otherwise the window is reported as insufficient.
    """
    vtype, sdeg = target.vtype, target.sdeg
    basis = _unknown_basis(ctx, vtype, sdeg, window)
    columns = []
    for key in basis:
        elem = _elementary_cochain(ctx, vtype, sdeg, key)
        columns.append(cochain_coordinates(cech_differential(ctx, elem)))
    rhs_coords = cochain_coordinates(target.neg())
    row_keys = sorted(
        {kk for col in columns for kk in col} | set(rhs_coords),
        key=_coord_sort_key,
    )
    matrix = [
        [col.get(kk, Fraction(0)) for col in columns] for kk in row_keys
    ]
    rhs = [rhs_coords.get(kk, Fraction(0)) for kk in row_keys]
    sol = solve_exact(ExactLinearSystem(list(range(len(basis))), matrix, rhs))

    if not sol.consistent:
        if h2_basis_test is not None:
            coords = h2_basis_test(target)
            if coords:
                return ProvenNonzero(coords)
        return UnresolvedWithinWindow(window)

    m = _assemble_cochain(ctx, vtype, sdeg, basis, sol.particular)
    residual = cech_differential(ctx, m).add(target)
    if not residual.is_zero():
        raise NotClosed("solver produced a nonzero residual; target is not closed")

    kernel_dim = len(sol.nullspace)
    exact_dim = _im_delta0_inside(ctx, vtype, sdeg, window, _basis_key_index(basis))
    return Solved(m, kernel_dim - exact_dim, h1_oracle)


def _basis_key_index(basis) -> Dict[Tuple, int]:
    index = {}
    for pos, (pair, r, c, tm, ue) in enumerate(basis):
        index[(pair, (r, c), tuple(ue) + tuple(tm))] = pos
    return index


def _assemble_cochain(
    ctx: CechContext, vtype: str, sdeg: int, basis, coefficients
) -> CechCochain:
    values: Dict[Tuple[int, ...], object] = {}
    e = ctx.bundle.rank
    for key, coeff in zip(basis, coefficients):
        if coeff == 0:
            continue
        pair, r, c, tm, ue = key
        ring = ctx.nerve.pair_rings[pair][pair[0]]
        mono = ring.monomial(tuple(ue) + tuple(tm), coeff)
        if vtype == SYM_SCALAR:
            cur = values.get(pair, ring.zero())
            values[pair] = cur + mono
        else:
            cur = values.get(pair)
            if cur is None:
                cur = PolyMatrix.zero(e, e, ring.names)
                values[pair] = cur
            cur.entries[r][c] = cur.entries[r][c] + mono
    return CechCochain(1, vtype, sdeg, values)
