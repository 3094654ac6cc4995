"""Truncated filtered algebras over chart rings and their automorphisms.

A chart carries tangential variables (Laurent exponents allowed where the
chart inverts monomials) and normal variables whose classes span the
conormal slot.  Everything of normal degree above the working order is
truncated away, which makes exp, log and all compositions finite exact
sums.  Automorphisms and derivations are stored through their generator
images; application to arbitrary elements goes through substitution or
the Leibniz rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import NonInvertibleSubstitution, NotAdapted, NotUnipotent
from .laurent import Exponent, LaurentPoly, grlex_key
from .linsolve import PolyMatrix


@dataclass(frozen=True)
class ChartRing:
    """Variables and truncation data of one chart.

    ``inverted`` lists exponent vectors (over the tangential variables
    only) of the monomials the chart inverts.  ``base_trunc`` bounds the
    total tangential degree; it is None on geometric charts and finite on
    formal disks.
    """

    u_names: Tuple[str, ...]
    t_names: Tuple[str, ...]
    inverted: Tuple[Exponent, ...] = ()
    base_trunc: Optional[int] = None

    @property
    def p(self) -> int:
        return len(self.u_names)

    @property
    def q(self) -> int:
        return len(self.t_names)

    @property
    def names(self) -> Tuple[str, ...]:
        return self.u_names + self.t_names

    @property
    def t_idxs(self) -> Tuple[int, ...]:
        return tuple(range(self.p, self.p + self.q))

    @property
    def u_idxs(self) -> Tuple[int, ...]:
        return tuple(range(self.p))

    def compatible(self, other: "ChartRing") -> bool:
        """Same variables and truncation; inverted monomials may differ.

        Arithmetic never consults the inversion data, so values from
        overlapping charts with richer localizations combine freely.
        """
        return (
            self.u_names == other.u_names
            and self.t_names == other.t_names
            and self.base_trunc == other.base_trunc
        )

    # -- element constructors -----------------------------------------

    def zero(self) -> LaurentPoly:
        return LaurentPoly.zero(self.names)

    def one(self) -> LaurentPoly:
        return LaurentPoly.const(self.names, 1)

    def const(self, c) -> LaurentPoly:
        return LaurentPoly.const(self.names, c)

    def u_var(self, b: int) -> LaurentPoly:
        return LaurentPoly.variable(self.names, self.u_names[b])

    def t_var(self, a: int) -> LaurentPoly:
        return LaurentPoly.variable(self.names, self.t_names[a])

    def monomial(self, exps: Sequence[int], coeff=1) -> LaurentPoly:
        return LaurentPoly.monomial(self.names, exps, coeff)

    # -- truncation-aware arithmetic ------------------------------------

    def truncate(self, p: LaurentPoly, t_max: int) -> LaurentPoly:
        out = p.truncate_group(self.t_idxs, t_max)
        if self.base_trunc is not None:
            out = out.truncate_group(self.u_idxs, self.base_trunc)
        return out

    def mul(self, a: LaurentPoly, b: LaurentPoly, t_max: int) -> LaurentPoly:
        return self.truncate(a * b, t_max)

    def t_part(self, p: LaurentPoly, s: int) -> LaurentPoly:
        return p.part_group(self.t_idxs, s)

    def t_degree_min(self, p: LaurentPoly) -> Optional[int]:
        return p.min_group_degree(self.t_idxs)

    def restrict_to_x(self, p: LaurentPoly) -> LaurentPoly:
        return self.t_part(p, 0)

    def t_monomials(self, degree: int) -> List[Exponent]:
        """Exponent vectors over the t-variables of exact total degree, grlex order."""
        vecs: List[Tuple[int, ...]] = [()]
        for _ in range(self.q):
            vecs = [v + (k,) for v in vecs for k in range(degree + 1)]
        out = [v for v in vecs if sum(v) == degree]
        out.sort(key=grlex_key)
        return out

    def t_monomial_poly(self, exps: Exponent) -> LaurentPoly:
        full = (0,) * self.p + tuple(exps)
        return self.monomial(full)

    # -- truncated inversion and substitution ---------------------------

    def invert_trunc(self, p: LaurentPoly, t_max: int) -> LaurentPoly:
        """Invert unit * (1 + nilpotent): the t-degree-0 slice must be a monomial."""
        head = self.restrict_to_x(p)
        if head.is_zero() or not head.is_monomial():
            raise NonInvertibleSubstitution(
                f"t-degree-0 part of {p} is not a unit monomial"
            )
        head_inv = head.inverse_monomial()
        tail = self.truncate(p - head, t_max)
        if tail.is_zero():
            return head_inv
        # (h + n)^-1 = h^-1 * sum (-n h^-1)^i, finite because n raises t-degree
        x = self.mul(-tail, head_inv, t_max)
        acc = self.one()
        power = self.one()
        for _ in range(t_max):
            power = self.mul(power, x, t_max)
            if power.is_zero():
                break
            acc = acc + power
        return self.mul(head_inv, acc, t_max)

    def subst_trunc(
        self,
        p: LaurentPoly,
        images: Mapping[str, LaurentPoly],
        t_max: int,
        target: Optional["ChartRing"] = None,
    ) -> LaurentPoly:
        """Truncated substitution; negative powers use truncated inversion.

        ``images`` must cover every variable occurring in ``p`` with a
        polynomial over ``target`` (default: this ring).
        """
        tgt = target or self
        out = tgt.zero()
        cache: Dict[Tuple[str, int], LaurentPoly] = {}
        for e, c in p.sorted_terms():
            term = tgt.const(c)
            for name, k in zip(p.vars, e):
                if k == 0:
                    continue
                key = (name, k)
                if key not in cache:
                    img = images.get(name)
                    if img is None:
                        raise ValueError(f"no image supplied for variable {name!r}")
                    if k < 0:
                        img = tgt.invert_trunc(img, t_max)
                    cache[key] = tgt.power_trunc(img, abs(k), t_max)
                term = tgt.mul(term, cache[key], t_max)
                if term.is_zero():
                    break
            out = out + term
        return out

    def power_trunc(self, p: LaurentPoly, n: int, t_max: int) -> LaurentPoly:
        acc = self.one()
        for _ in range(n):
            acc = self.mul(acc, p, t_max)
        return acc


# -- automorphisms ----------------------------------------------------------


@dataclass
class FilteredAutomorphism:
    """Unipotent filtered automorphism, stored through generator images.

    ``module`` (optional) is the e x e matrix of the compatible module
    automorphism: column c holds the coefficients of the image of the
    c-th frame section.
    """

    ring: ChartRing
    order: int
    u_images: Tuple[LaurentPoly, ...]
    t_images: Tuple[LaurentPoly, ...]
    module: Optional[PolyMatrix] = None

    @staticmethod
    def identity(ring: ChartRing, order: int, rank: Optional[int] = None) -> "FilteredAutomorphism":
        return FilteredAutomorphism(
            ring,
            order,
            tuple(ring.u_var(b) for b in range(ring.p)),
            tuple(ring.t_var(a) for a in range(ring.q)),
            PolyMatrix.identity(rank, ring.names) if rank else None,
        )

    @property
    def rank(self) -> Optional[int]:
        return self.module.rows if self.module is not None else None

    def image_map(self) -> Dict[str, LaurentPoly]:
        out = {name: img for name, img in zip(self.ring.u_names, self.u_images)}
        out.update({name: img for name, img in zip(self.ring.t_names, self.t_images)})
        return out

    def apply(self, f: LaurentPoly) -> LaurentPoly:
        return self.ring.subst_trunc(f, self.image_map(), self.order)

    def apply_module(self, vec: Sequence[LaurentPoly]) -> List[LaurentPoly]:
        if self.module is None:
            raise ValueError("automorphism carries no module data")
        e = self.module.rows
        out = [self.ring.zero() for _ in range(e)]
        for c in range(e):
            fc = self.apply(vec[c])
            if fc.is_zero():
                continue
            for r in range(e):
                out[r] = out[r] + self.ring.mul(fc, self.module[r, c], self.order)
        return out

    def compose(self, other: "FilteredAutomorphism") -> "FilteredAutomorphism":
        """self after other (left action on elements)."""
        if not self.ring.compatible(other.ring):
            raise ValueError("automorphisms live on different charts")
        k = min(self.order, other.order)
        u_imgs = tuple(self.apply(img) for img in other.u_images)
        t_imgs = tuple(self.apply(img) for img in other.t_images)
        module = None
        if self.module is not None and other.module is not None:
            e = self.module.rows
            cols = []
            for c in range(e):
                col = self.apply_module([other.module[r, c] for r in range(e)])
                cols.append(col)
            module = PolyMatrix([[cols[c][r] for c in range(e)] for r in range(e)])
        return FilteredAutomorphism(self.ring, k, u_imgs, t_imgs, module)

    def unipotency_defects(self) -> List[LaurentPoly]:
        ring = self.ring
        defects = []
        for b in range(ring.p):
            delta = self.u_images[b] - ring.u_var(b)
            if (d := ring.t_degree_min(delta)) is not None and d < 1:
                defects.append(delta)
        for a in range(ring.q):
            delta = self.t_images[a] - ring.t_var(a)
            if (d := ring.t_degree_min(delta)) is not None and d < 2:
                defects.append(delta)
        if self.module is not None:
            e = self.module.rows
            ident = PolyMatrix.identity(e, ring.names)
            for r in range(e):
                for c in range(e):
                    delta = self.module[r, c] - ident[r, c]
                    if (d := ring.t_degree_min(delta)) is not None and d < 1:
                        defects.append(delta)
        return defects

    def is_unipotent(self) -> bool:
        return not self.unipotency_defects()


# -- pair derivations --------------------------------------------------------


@dataclass
class PairDerivation:
    """Derivation of the truncated pair, stored through generator values.

    ``order`` truncates the module side; algebra values are truncated at
    ``algebra_trunc`` (defaults to ``order``; formal disks run it one
    higher so top conormal data survives brackets).
    """

    ring: ChartRing
    order: int
    u_images: Tuple[LaurentPoly, ...]
    t_images: Tuple[LaurentPoly, ...]
    module: Optional[PolyMatrix] = None
    algebra_trunc: Optional[int] = None

    def __post_init__(self):
        if self.algebra_trunc is None:
            self.algebra_trunc = self.order

    @staticmethod
    def zero(ring: ChartRing, order: int, rank: Optional[int] = None,
             algebra_trunc: Optional[int] = None) -> "PairDerivation":
        return PairDerivation(
            ring,
            order,
            tuple(ring.zero() for _ in range(ring.p)),
            tuple(ring.zero() for _ in range(ring.q)),
            PolyMatrix.zero(rank, rank, ring.names) if rank else None,
            algebra_trunc,
        )

    @property
    def rank(self) -> Optional[int]:
        return self.module.rows if self.module is not None else None

    def apply(self, f: LaurentPoly) -> LaurentPoly:
        """Leibniz action on an algebra element via partial derivatives."""
        ring = self.ring
        k = self.algebra_trunc
        out = ring.zero()
        for b, name in enumerate(ring.u_names):
            df = f.diff(name)
            if not df.is_zero() and not self.u_images[b].is_zero():
                out = out + ring.mul(df, self.u_images[b], k)
        for a, name in enumerate(ring.t_names):
            df = f.diff(name)
            if not df.is_zero() and not self.t_images[a].is_zero():
                out = out + ring.mul(df, self.t_images[a], k)
        return out

    def apply_module(self, vec: Sequence[LaurentPoly]) -> List[LaurentPoly]:
        """psi(sum f_c e_c) = sum D(f_c) e_c + f_c psi(e_c), truncated at order."""
        if self.module is None:
            raise ValueError("derivation carries no module data")
        ring = self.ring
        e = self.module.rows
        out = [ring.truncate(self.apply(vec[r]), self.order) for r in range(e)]
        for c in range(e):
            fc = vec[c]
            if fc.is_zero():
                continue
            for r in range(e):
                if not self.module[r, c].is_zero():
                    out[r] = out[r] + ring.mul(fc, self.module[r, c], self.order)
        return out

    # -- linear structure ----------------------------------------------

    def _binary(self, other: "PairDerivation", op) -> "PairDerivation":
        if not self.ring.compatible(other.ring):
            raise ValueError("derivations live on different charts")
        k = min(self.order, other.order)
        at = min(self.algebra_trunc, other.algebra_trunc)
        module = None
        if self.module is not None and other.module is not None:
            module = PolyMatrix(
                [
                    [op(self.module[r, c], other.module[r, c]) for c in range(self.module.cols)]
                    for r in range(self.module.rows)
                ]
            )
        elif self.module is not None or other.module is not None:
            raise ValueError("cannot combine module-valued with algebra-only derivation")
        return PairDerivation(
            self.ring,
            k,
            tuple(op(a, b) for a, b in zip(self.u_images, other.u_images)),
            tuple(op(a, b) for a, b in zip(self.t_images, other.t_images)),
            module,
            at,
        )

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b)

    def scaled(self, c) -> "PairDerivation":
        return PairDerivation(
            self.ring,
            self.order,
            tuple(img * c for img in self.u_images),
            tuple(img * c for img in self.t_images),
            self.module.scale(Fraction(c)) if self.module is not None else None,
            self.algebra_trunc,
        )

    def is_zero(self) -> bool:
        return (
            all(p.is_zero() for p in self.u_images)
            and all(p.is_zero() for p in self.t_images)
            and (self.module is None or self.module.is_zero())
        )

    def __eq__(self, other):
        if not isinstance(other, PairDerivation):
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None

    # -- graded components ----------------------------------------------

    def component(self, s: int) -> "PairDerivation":
        """Slice raising the conormal degree by exactly s."""
        ring = self.ring
        return PairDerivation(
            ring,
            self.order,
            tuple(ring.t_part(img, s) for img in self.u_images),
            tuple(ring.t_part(img, s + 1) for img in self.t_images),
            self.module.map(lambda p: ring.t_part(p, s)) if self.module is not None else None,
            self.algebra_trunc,
        )

    def a_data(self, s: int) -> List[LaurentPoly]:
        """Tangential-form component: value on each du_b, landing in degree s."""
        ring = self.ring
        return [ring.t_part(img, s) for img in self.u_images]

    def raises_t_degree(self) -> bool:
        ring = self.ring
        for img in self.u_images:
            if (d := ring.t_degree_min(img)) is not None and d < 1:
                return False
        for img in self.t_images:
            if (d := ring.t_degree_min(img)) is not None and d < 2:
                return False
        if self.module is not None:
            for row in self.module.entries:
                for p in row:
                    if (d := ring.t_degree_min(p)) is not None and d < 1:
                        return False
        return True


def bracket(x: PairDerivation, y: PairDerivation) -> PairDerivation:
    """Commutator of pair derivations, re-read off the generators."""
    if not x.ring.compatible(y.ring):
        raise ValueError("derivations live on different charts")
    k = min(x.order, y.order)
    at = min(x.algebra_trunc, y.algebra_trunc)
    u_imgs = tuple(
        x.apply(y.u_images[b]) - y.apply(x.u_images[b]) for b in range(x.ring.p)
    )
    t_imgs = tuple(
        x.apply(y.t_images[a]) - y.apply(x.t_images[a]) for a in range(x.ring.q)
    )
    ring = x.ring
    u_imgs = tuple(ring.truncate(p, at) for p in u_imgs)
    t_imgs = tuple(ring.truncate(p, at) for p in t_imgs)
    module = None
    if x.module is not None and y.module is not None:
        e = x.module.rows
        cols = []
        for c in range(e):
            ycol = [y.module[r, c] for r in range(e)]
            xcol = [x.module[r, c] for r in range(e)]
            col = [
                a - b
                for a, b in zip(x.apply_module(ycol), y.apply_module(xcol))
            ]
            cols.append(col)
        module = PolyMatrix([[cols[c][r] for c in range(e)] for r in range(e)])
        module = module.map(lambda p: ring.truncate(p, k))
    elif x.module is not None or y.module is not None:
        raise ValueError("cannot bracket module-valued with algebra-only derivation")
    return PairDerivation(ring, k, u_imgs, t_imgs, module, at)


# -- exp and log -------------------------------------------------------------


def exp_nilpotent(d: PairDerivation) -> FilteredAutomorphism:
    """exp(D) as a finite sum; D must raise the conormal degree."""
    if not d.raises_t_degree():
        raise NotUnipotent("derivation does not raise the conormal degree")
    ring = d.ring
    k = d.order

    def exp_series(seed: LaurentPoly) -> LaurentPoly:
        total = seed
        term = seed
        fact = 1
        for n in range(1, k + 3):
            term = ring.truncate(d.apply(term), k)
            if term.is_zero():
                break
            fact *= n
            total = total + term * Fraction(1, fact)
        else:
            raise NotUnipotent("exp series failed to terminate")
        return total

    u_imgs = tuple(exp_series(ring.u_var(b)) for b in range(ring.p))
    t_imgs = tuple(exp_series(ring.t_var(a)) for a in range(ring.q))
    module = None
    if d.module is not None:
        e = d.module.rows
        cols = []
        for c in range(e):
            seed = [ring.one() if r == c else ring.zero() for r in range(e)]
            total = list(seed)
            term = list(seed)
            fact = 1
            for n in range(1, k + 3):
                term = [ring.truncate(p, k) for p in d.apply_module(term)]
                if all(p.is_zero() for p in term):
                    break
                fact *= n
                total = [t + p * Fraction(1, fact) for t, p in zip(total, term)]
            else:
                raise NotUnipotent("exp series failed to terminate on the module side")
            cols.append(total)
        module = PolyMatrix([[cols[c][r] for c in range(e)] for r in range(e)])
    return FilteredAutomorphism(ring, k, u_imgs, t_imgs, module)


def log_unipotent(phi: FilteredAutomorphism) -> PairDerivation:
    """log of a unipotent automorphism; finite alternating sum."""
    defects = phi.unipotency_defects()
    if defects:
        raise NotUnipotent(f"automorphism is not unipotent: offending parts {defects[:2]}")
    ring = phi.ring
    k = phi.order

    def log_series(seed: LaurentPoly) -> LaurentPoly:
        # sum (-1)^(n+1)/n * (Phi - id)^n applied to the seed
        total = ring.zero()
        term = seed
        for n in range(1, k + 3):
            term = ring.truncate(phi.apply(term) - term, k)
            if term.is_zero():
                break
            total = total + term * Fraction((-1) ** (n + 1), n)
        else:
            raise NotUnipotent("log series failed to terminate")
        return total

    u_imgs = tuple(log_series(ring.u_var(b)) for b in range(ring.p))
    t_imgs = tuple(log_series(ring.t_var(a)) for a in range(ring.q))
    module = None
    if phi.module is not None:
        e = phi.module.rows
        cols = []
        for c in range(e):
            seed = [ring.one() if r == c else ring.zero() for r in range(e)]
            total = [ring.zero() for _ in range(e)]
            term = list(seed)
            for n in range(1, k + 3):
                term = [
                    ring.truncate(p - q, k)
                    for p, q in zip(phi.apply_module(term), term)
                ]
                if all(p.is_zero() for p in term):
                    break
                total = [
                    t + p * Fraction((-1) ** (n + 1), n) for t, p in zip(total, term)
                ]
            else:
                raise NotUnipotent("log series failed to terminate on the module side")
            cols.append(total)
        module = PolyMatrix([[cols[c][r] for c in range(e)] for r in range(e)])
    return PairDerivation(ring, k, u_imgs, t_imgs, module)


def bch2(x: PairDerivation, y: PairDerivation) -> PairDerivation:
    """Degree-<=2 Baker-Campbell-Hausdorff composition of graded derivations.

    Degree 1: x1 + y1.  Degree 2: x2 + y2 + [x1, y1]/2.  Higher grading is
    dropped: the engine never asserts anything above degree 2.
    """
    x1, y1 = x.component(1), y.component(1)
    z = x1 + y1 + (x.component(2) + y.component(2) + bracket(x1, y1).scaled(Fraction(1, 2)))
    return z


def leibniz_extend(
    d: PairDerivation,
    gamma: Optional[Sequence[PolyMatrix]],
    rank: int,
) -> PairDerivation:
    """Fill the module action with the connection lift of the tangential data.

    The image of the c-th frame section is sum_b D(u_b) * Gamma_b[:, c];
    a trivial connection (gamma None) gives the plain Leibniz lift whose
    module matrix vanishes.
    """
    ring = d.ring
    mat = PolyMatrix.zero(rank, rank, ring.names)
    if gamma is not None:
        for b in range(ring.p):
            img = d.u_images[b]
            if img.is_zero():
                continue
            mat = mat + gamma[b].scale(img, lambda a, bb: ring.mul(a, bb, d.order))
    return PairDerivation(ring, d.order, d.u_images, d.t_images, mat, d.algebra_trunc)


# -- chart transitions -------------------------------------------------------


@dataclass
class ChartTransition:
    """Two-way transition data between adapted charts on an overlap.

    ``forward_*`` express the high chart's generators in the low chart's
    coordinates; ``backward_*`` the other way around.  Both directions are
    supplied so nothing ever needs polynomial inversion.
    """

    ring_low: ChartRing
    ring_high: ChartRing
    forward_u: Tuple[LaurentPoly, ...]
    forward_t: Tuple[LaurentPoly, ...]
    backward_u: Tuple[LaurentPoly, ...]
    backward_t: Tuple[LaurentPoly, ...]


@dataclass
class InducedTransition:
    """Linear (conormal) part and unipotent remainder of a chart transition."""

    conormal: PolyMatrix          # q x q over the low ring: high t-classes in low frame
    base_images: Tuple[LaurentPoly, ...]   # high u-vars restricted to X, low coordinates
    unipotent: FilteredAutomorphism        # of the low chart's truncated algebra


def induced_transition(tr: ChartTransition, k: int) -> InducedTransition:
    low, high = tr.ring_low, tr.ring_high
    for a, img in enumerate(tr.forward_t):
        if not low.restrict_to_x(img).is_zero():
            raise NotAdapted(
                f"transition image of normal variable {high.t_names[a]} does not preserve the ideal"
            )
    for a, img in enumerate(tr.backward_t):
        if not high.restrict_to_x(img).is_zero():
            raise NotAdapted(
                f"backward image of normal variable {low.t_names[a]} does not preserve the ideal"
            )

    conormal = PolyMatrix(
        [
            [
                low.restrict_to_x(tr.forward_t[a].diff(low.t_names[b]))
                for b in range(low.q)
            ]
            for a in range(high.q)
        ]
    )
    base_images = tuple(low.restrict_to_x(img) for img in tr.forward_u)

    # linearization of the backward direction, then push through the forward
    # substitution: the composite is the unipotent discrepancy in the low frame
    back_base = tuple(high.restrict_to_x(img) for img in tr.backward_u)
    back_conormal = PolyMatrix(
        [
            [
                high.restrict_to_x(tr.backward_t[a].diff(high.t_names[b]))
                for b in range(high.q)
            ]
            for a in range(low.q)
        ]
    )
    fwd_images = {name: img for name, img in zip(high.u_names, tr.forward_u)}
    fwd_images.update({name: img for name, img in zip(high.t_names, tr.forward_t)})

    u_imgs = tuple(
        high.subst_trunc(back_base[b], fwd_images, k, target=low) for b in range(low.p)
    )
    t_imgs = []
    for a in range(low.q):
        acc = low.zero()
        for b in range(high.q):
            coeff = high.subst_trunc(back_conormal[a, b], fwd_images, k, target=low)
            acc = acc + low.mul(coeff, tr.forward_t[b], k)
        t_imgs.append(acc)
    phi = FilteredAutomorphism(low, k, u_imgs, tuple(t_imgs))
    if not phi.is_unipotent():
        raise NotUnipotent(
            "transition directions are not mutually inverse: discrepancy is not unipotent"
        )
    return InducedTransition(conormal, base_images, phi)


def chart_normalize(
    ring: ChartRing,
    k: int,
    u_images: Optional[Sequence[LaurentPoly]] = None,
    t_images: Optional[Sequence[LaurentPoly]] = None,
) -> FilteredAutomorphism:
    """Normalization of an adapted chart at order k.

    With no alternative images this is the canonical identification
    (t-monomials to their conormal classes), i.e. the identity map.  An
    alternative adapted choice yields its discrepancy against the
    canonical one, which must be unipotent.
    """
    if k < 0:
        raise ValueError("order must be nonnegative")
    u_imgs = tuple(u_images) if u_images is not None else tuple(
        ring.u_var(b) for b in range(ring.p)
    )
    t_imgs = tuple(t_images) if t_images is not None else tuple(
        ring.t_var(a) for a in range(ring.q)
    )
    # conormal generators sit in degree 1, so never truncate them below that
    out = FilteredAutomorphism(
        ring,
        k,
        tuple(ring.truncate(p, k) for p in u_imgs),
        tuple(ring.truncate(p, max(k, 1)) for p in t_imgs),
    )
    if not out.is_unipotent():
        raise NotAdapted("alternative normalization is not adapted to the chart")
    return out


# -- Hochschild splitting defect ---------------------------------------------


@dataclass
class ModuleSplitting:
    """Linear section of the order-(k+1) -> order-k module truncation.

    ``correction`` is a linear map (represented as a callable on
    coefficient vectors) valued in the top conormal degree; the canonical
    multiplicative splitting has correction zero.
    """

    ring: ChartRing
    k_top: int
    rank: int
    correction: Optional[Callable[[List[LaurentPoly]], List[LaurentPoly]]] = None

    def apply(self, vec: Sequence[LaurentPoly]) -> List[LaurentPoly]:
        out = [self.ring.truncate(p, self.k_top) for p in vec]
        if self.correction is not None:
            corr = self.correction(list(out))
            out = [
                a + self.ring.t_part(b, self.k_top) for a, b in zip(out, corr)
            ]
        return out


def hochschild_defect(
    split: ModuleSplitting, x: LaurentPoly, m: Sequence[LaurentPoly]
) -> List[LaurentPoly]:
    """x * Phi(m) - Phi(x * m): the failure of the splitting to be multiplicative.

    Products are taken at the splitting's top order, so the canonical
    (correction-free) splitting has zero defect and the value always lands
    in the top conormal degree.
    """
    ring = split.ring
    k_top = split.k_top
    left = [ring.mul(x, p, k_top) for p in split.apply(m)]
    xm = [ring.mul(x, p, k_top) for p in m]
    right = split.apply(xm)
    return [a - b for a, b in zip(left, right)]
