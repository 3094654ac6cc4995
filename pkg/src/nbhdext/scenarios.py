"""Scenario ingestion, builtin geometries, validation and the run pipeline.

A scenario is a finite presentation of an embedded smooth variety with a
bundle: adapted coordinates per chart, two-way chart transitions per
overlap, bundle transition matrices and local connection forms.  Exact
rationals ride as strings in the JSON; floats are rejected outright.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from . import __version__, cohomology
from .cech import (
    BundleData,
    CechCochain,
    CechContext,
    CoverNerve,
    OverlapGeometry,
    ProvenNonzero,
    Solved,
    UnresolvedWithinWindow,
    SYM_END,
    SYM_SCALAR,
    atiyah_cocycle,
    cech_differential,
    cochain_coordinates,
    first_order_obstruction,
    kodaira_spencer_cochain,
    second_order_obstruction,
    solve_coboundary,
    abelianized_pair,
    _elementary_cochain,
    _unknown_basis,
)
from .errors import NotClosed, ParseError, SchemaVersionError, UnknownScenario
from .filtered import ChartRing, ChartTransition, induced_transition, log_unipotent
from .laurent import Exponent, LaurentPoly, format_fraction
from .linsolve import ExactLinearSystem, PolyMatrix, solve_exact

SCHEMA_VERSION = 1
ENGINE_VERSION = __version__

Pair = Tuple[int, int]


@dataclass
class OverlapSpec:
    pair: Pair
    inverted: Dict[int, Tuple[Exponent, ...]]
    forward_u: Tuple[LaurentPoly, ...]
    forward_t: Tuple[LaurentPoly, ...]
    backward_u: Tuple[LaurentPoly, ...]
    backward_t: Tuple[LaurentPoly, ...]


@dataclass
class TripleSpec:
    simplex: Tuple[int, int, int]
    inverted: Tuple[Exponent, ...]  # in the lowest chart's coordinates


@dataclass
class Scenario:
    """Validated-or-not description of one embedding with a bundle."""

    name: str
    p: int
    q: int
    e: int
    max_order: int
    charts_inverted: List[Tuple[Exponent, ...]]
    overlaps: List[OverlapSpec]
    triples: List[TripleSpec]
    g: Dict[Pair, PolyMatrix]
    gammas: List[List[PolyMatrix]]
    flat: List[bool]
    window: Tuple[int, int] = (-6, 6)

    @property
    def u_names(self) -> Tuple[str, ...]:
        return tuple(f"u{i+1}" for i in range(self.p))

    @property
    def t_names(self) -> Tuple[str, ...]:
        return tuple(f"t{i+1}" for i in range(self.q))

    @property
    def names(self) -> Tuple[str, ...]:
        return self.u_names + self.t_names

    def chart_ring(self, i: int) -> ChartRing:
        return ChartRing(self.u_names, self.t_names, self.charts_inverted[i])

    def overlap_ring(self, spec: OverlapSpec, side: int) -> ChartRing:
        return ChartRing(self.u_names, self.t_names, spec.inverted[side])

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        def poly(p: LaurentPoly):
            return p.to_json_terms()

        def matrix(m: PolyMatrix):
            return [[poly(m.entries[r][c]) for c in range(m.cols)] for r in range(m.rows)]

        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "dims": {"p": self.p, "q": self.q, "e": self.e},
            "max_order": self.max_order,
            "charts": [
                {"inverted": [list(v) for v in inv]} for inv in self.charts_inverted
            ],
            "overlaps": [
                {
                    "pair": list(o.pair),
                    "inverted": {
                        str(side): [list(v) for v in invs]
                        for side, invs in sorted(o.inverted.items())
                    },
                    "forward_u": [poly(x) for x in o.forward_u],
                    "forward_t": [poly(x) for x in o.forward_t],
                    "backward_u": [poly(x) for x in o.backward_u],
                    "backward_t": [poly(x) for x in o.backward_t],
                }
                for o in self.overlaps
            ],
            "triples": [
                {
                    "simplex": list(t.simplex),
                    "inverted": [list(v) for v in t.inverted],
                }
                for t in self.triples
            ],
            "bundle": {
                "rank": self.e,
                "transitions": {
                    f"{i},{j}": matrix(m) for (i, j), m in sorted(self.g.items())
                },
                "connections": [
                    [matrix(m) for m in per_chart] for per_chart in self.gammas
                ],
                "flat": list(self.flat),
            },
            "window": list(self.window),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_json(), sort_keys=True).encode()
        ).hexdigest()


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ParseError(msg)


def scenario_from_json(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ParseError("scenario document must be a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"schema_version {version!r} unsupported; engine speaks {SCHEMA_VERSION}"
        )
    try:
        dims = data["dims"]
        p, q, e = int(dims["p"]), int(dims["q"]), int(dims["e"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad dims block: {exc}") from exc
    _require(p >= 1 and q >= 1 and e >= 1, "dims must be positive")
    names = tuple(f"u{i+1}" for i in range(p)) + tuple(f"t{i+1}" for i in range(q))

    def poly(obj, where: str) -> LaurentPoly:
        try:
            return LaurentPoly.from_json_terms(names, obj)
        except ParseError as exc:
            raise ParseError(f"{where}: {exc}") from exc

    def exps(obj, where: str, width: int) -> Tuple[Exponent, ...]:
        out = []
        for item in obj:
            v = tuple(int(x) for x in item)
            _require(len(v) == width, f"{where}: inverted monomial {item} has wrong arity")
            out.append(v)
        return tuple(out)

    charts = data.get("charts")
    _require(isinstance(charts, list) and charts, "charts must be a nonempty list")
    charts_inverted = [
        exps(c.get("inverted", []), f"charts[{i}]", p) for i, c in enumerate(charts)
    ]

    overlaps = []
    for o in data.get("overlaps", []):
        pair = tuple(int(x) for x in o["pair"])
        _require(len(pair) == 2 and pair[0] < pair[1], f"bad overlap pair {pair}")
        inv = {
            int(side): exps(v, f"overlap {pair} inverted[{side}]", p)
            for side, v in o.get("inverted", {}).items()
        }
        overlaps.append(
            OverlapSpec(
                pair,
                inv,
                tuple(poly(x, f"overlap {pair} forward_u") for x in o["forward_u"]),
                tuple(poly(x, f"overlap {pair} forward_t") for x in o["forward_t"]),
                tuple(poly(x, f"overlap {pair} backward_u") for x in o["backward_u"]),
                tuple(poly(x, f"overlap {pair} backward_t") for x in o["backward_t"]),
            )
        )

    triples = []
    for t in data.get("triples", []):
        simplex = tuple(int(x) for x in t["simplex"])
        _require(len(simplex) == 3 and simplex[0] < simplex[1] < simplex[2],
                 f"bad triple {simplex}")
        triples.append(TripleSpec(simplex, exps(t.get("inverted", []), f"triple {simplex}", p)))

    bundle = data.get("bundle", {})
    _require(int(bundle.get("rank", e)) == e, "bundle rank disagrees with dims.e")
    g = {}
    for key, mat in bundle.get("transitions", {}).items():
        i, j = (int(x) for x in key.split(","))
        g[(i, j)] = PolyMatrix(
            [[poly(cell, f"g[{key}]") for cell in row] for row in mat]
        )
    gammas = []
    for ci, per_chart in enumerate(bundle.get("connections", [])):
        gammas.append(
            [
                PolyMatrix([[poly(cell, f"connection[{ci}]") for cell in row] for row in m])
                for m in per_chart
            ]
        )
    flat = [bool(x) for x in bundle.get("flat", [True] * len(charts))]
    window = tuple(int(x) for x in data.get("window", (-6, 6)))

    return Scenario(
        name=str(data.get("name", "unnamed")),
        p=p,
        q=q,
        e=e,
        max_order=int(data.get("max_order", 2)),
        charts_inverted=charts_inverted,
        overlaps=overlaps,
        triples=triples,
        g=g,
        gammas=gammas,
        flat=flat,
        window=window,
    )


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh, parse_float=_reject_float)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    return scenario_from_json(data)


def _reject_float(text: str):
    raise ParseError(f"float literal {text!r} rejected: the engine is exact-only")


def save_scenario(s: Scenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(s.dumps())


# -- validation ------------------------------------------------------------------


@dataclass
class ValidationEntry:
    check: str
    location: str
    ok: bool
    detail: str = ""


@dataclass
class ValidationLog:
    entries: List[ValidationEntry] = field(default_factory=list)

    def record(self, check: str, location: str, ok: bool, detail: str = "") -> None:
        self.entries.append(ValidationEntry(check, location, ok, detail))

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    def to_json(self) -> list:
        return [
            {"check": e.check, "location": e.location, "ok": e.ok, "detail": e.detail}
            for e in self.entries
        ]


def _overlap_by_pair(s: Scenario) -> Dict[Pair, OverlapSpec]:
    return {o.pair: o for o in s.overlaps}


def validate_scenario(s: Scenario) -> ValidationLog:
    log = ValidationLog()
    k = s.max_order
    by_pair = _overlap_by_pair(s)

    for o in s.overlaps:
        ring_i = s.overlap_ring(o, o.pair[0])
        ring_j = s.overlap_ring(o, o.pair[1])
        loc = f"overlap {o.pair}"
        adapted = all(ring_i.restrict_to_x(img).is_zero() for img in o.forward_t) and all(
            ring_j.restrict_to_x(img).is_zero() for img in o.backward_t
        )
        log.record("adapted", loc, adapted,
                   "" if adapted else "a normal-variable image has a degree-0 part")
        if not adapted:
            continue
        # mutual inverse on generators, both ways, at order k
        fwd = {n: img for n, img in zip(s.names, tuple(o.forward_u) + tuple(o.forward_t))}
        bwd = {n: img for n, img in zip(s.names, tuple(o.backward_u) + tuple(o.backward_t))}
        ok = True
        detail = ""
        for name in s.names:
            round1 = ring_j.subst_trunc(bwd[name], fwd, k, target=ring_i)
            if not (round1 - LaurentPoly.variable(s.names, name)).is_zero():
                ok = False
                detail = f"backward o forward != id on {name}"
                break
            round2 = ring_i.subst_trunc(fwd[name], bwd, k, target=ring_j)
            if not (round2 - LaurentPoly.variable(s.names, name)).is_zero():
                ok = False
                detail = f"forward o backward != id on {name}"
                break
        log.record("transition_inverse", loc, ok, detail)

    for t in s.triples:
        i, j, h = t.simplex
        loc = f"triple {t.simplex}"
        needed = [(i, j), (i, h), (j, h)]
        if any(pr not in by_pair for pr in needed):
            log.record("cocycle", loc, False, "missing overlap data for a face")
            continue
        o_ij, o_ih, o_jh = by_pair[(i, j)], by_pair[(i, h)], by_pair[(j, h)]
        ring_i = ChartRing(s.u_names, s.t_names, t.inverted)
        fwd_ij = {n: img for n, img in zip(s.names, tuple(o_ij.forward_u) + tuple(o_ij.forward_t))}
        ok = True
        detail = ""
        for name, img_jh, img_ih in zip(
            s.names,
            tuple(o_jh.forward_u) + tuple(o_jh.forward_t),
            tuple(o_ih.forward_u) + tuple(o_ih.forward_t),
        ):
            via_j = s.overlap_ring(o_jh, j).subst_trunc(img_jh, fwd_ij, k, target=ring_i)
            if not (via_j - img_ih).is_zero():
                ok = False
                detail = f"chart cocycle fails on generator {name}"
                break
        log.record("cocycle", loc, ok, detail)
        # bundle cocycle g_ih = g_ij . T_i(g_jh); g lives on X, so the
        # transport goes through the base maps at t = 0
        if s.g:
            mul = lambda a, b: ring_i.mul(a, b, k)
            ring_j = s.overlap_ring(o_ij, j)
            base_fwd = {
                n: ring_i.restrict_to_x(img)
                for n, img in zip(s.u_names, o_ij.forward_u)
            }
            base_fwd.update({n: ring_i.zero() for n in s.t_names})
            g_entries_on_x = all(
                s.overlap_ring(o_jh, j).restrict_to_x(poly) == poly
                for row in s.g[(j, h)].entries
                for poly in row
            )
            log.record("bundle_on_base", loc, g_entries_on_x,
                       "" if g_entries_on_x else "a bundle transition has normal-variable terms")
            g_jh_moved = s.g[(j, h)].map(
                lambda poly: s.overlap_ring(o_jh, j).subst_trunc(
                    poly, base_fwd, k, target=ring_i
                )
            )
            lhs = s.g[(i, j)].matmul(g_jh_moved, mul)
            diff = lhs - s.g[(i, h)]
            okg = diff.is_zero()
            log.record("bundle_cocycle", loc, okg,
                       "" if okg else "g_ih != g_ij . g_jh on the triple")

    # connection flatness against the declared flags
    for ci in range(len(s.charts_inverted)):
        ring = s.chart_ring(ci)
        loc = f"chart {ci}"
        if not s.gammas:
            log.record("flatness", loc, True, "no connection data: exterior derivative assumed")
            continue
        gam = s.gammas[ci]
        curv_zero = True
        witness = ""
        for b in range(s.p):
            for c in range(b + 1, s.p):
                term = (
                    gam[c].map(lambda m: m.diff(s.u_names[b]))
                    - gam[b].map(lambda m: m.diff(s.u_names[c]))
                    + gam[b].commutator(gam[c])
                )
                if not term.is_zero():
                    curv_zero = False
                    witness = f"curvature({b},{c}) = {term!r}"
        ok = curv_zero == s.flat[ci]
        log.record("flatness", loc, ok,
                   "" if ok else (witness or "flag says curved but curvature vanishes"))
    return log


# -- context construction ----------------------------------------------------------


def build_context(s: Scenario, order: int) -> CechContext:
    by_pair = _overlap_by_pair(s)
    chart_rings = [s.chart_ring(i) for i in range(len(s.charts_inverted))]
    pair_rings = {
        o.pair: {o.pair[0]: s.overlap_ring(o, o.pair[0]), o.pair[1]: s.overlap_ring(o, o.pair[1])}
        for o in s.overlaps
    }
    triple_rings = {
        t.simplex: ChartRing(s.u_names, s.t_names, t.inverted) for t in s.triples
    }
    nerve = CoverNerve(chart_rings, pair_rings, triple_rings)

    pairs: Dict[Pair, OverlapGeometry] = {}
    for o in s.overlaps:
        ring_i = pair_rings[o.pair][o.pair[0]]
        ring_j = pair_rings[o.pair][o.pair[1]]
        tr = ChartTransition(ring_i, ring_j, o.forward_u, o.forward_t,
                             o.backward_u, o.backward_t)
        fwd = induced_transition(tr, order)
        swapped = ChartTransition(ring_j, ring_i, o.backward_u, o.backward_t,
                                  o.forward_u, o.forward_t)
        bwd = induced_transition(swapped, order)
        phi = fwd.unipotent
        pairs[o.pair] = OverlapGeometry(
            i=o.pair[0],
            j=o.pair[1],
            ring_i=ring_i,
            ring_j=ring_j,
            base_ji={n: img for n, img in zip(s.u_names, fwd.base_images)},
            base_ij={n: img for n, img in zip(s.u_names, bwd.base_images)},
            conormal_ji=fwd.conormal,
            conormal_ij=bwd.conormal,
            phi=phi,
            logphi=log_unipotent(phi),
        )

    gammas = s.gammas or [
        [PolyMatrix.zero(s.e, s.e, s.names) for _ in range(s.p)]
        for _ in range(len(s.charts_inverted))
    ]
    bundle = BundleData(rank=s.e, g=dict(s.g), gammas=gammas, flat=list(s.flat))
    return CechContext(nerve, pairs, bundle, order)


# -- sheaf twist detection (for the cohomology oracle) -------------------------------


def detect_cover(s: Scenario) -> Optional[str]:
    """Recognize the standard projective covers used by the oracle."""
    n_charts = len(s.charts_inverted)
    by_pair = _overlap_by_pair(s)
    if s.p == 1 and n_charts == 2 and (0, 1) in by_pair:
        o = by_pair[(0, 1)]
        ring = s.overlap_ring(o, 0)
        uinv = LaurentPoly.monomial(s.names, (-1,) + (0,) * s.q)
        if (
            ring.restrict_to_x(o.forward_u[0]) == uinv
            and s.overlap_ring(o, 1).restrict_to_x(o.backward_u[0]) == uinv
        ):
            return "p1"
    if s.p == 2 and n_charts == 3 and all(pr in by_pair for pr in [(0, 1), (0, 2), (1, 2)]):
        def mono(*exps):
            return LaurentPoly.monomial(s.names, tuple(exps) + (0,) * s.q)

        o01, o02, o12 = by_pair[(0, 1)], by_pair[(0, 2)], by_pair[(1, 2)]
        base01 = tuple(s.overlap_ring(o01, 0).restrict_to_x(x) for x in o01.forward_u)
        base02 = tuple(s.overlap_ring(o02, 0).restrict_to_x(x) for x in o02.forward_u)
        base12 = tuple(s.overlap_ring(o12, 1).restrict_to_x(x) for x in o12.forward_u)
        if (
            base01 == (mono(-1, 0), mono(-1, 1))
            and base02 == (mono(0, -1), mono(1, -1))
            and base12 == (mono(1, -1), mono(0, -1))
        ):
            return "p2"
    return None


def _monomial_degree(p: LaurentPoly) -> Optional[Exponent]:
    if not p.is_monomial():
        return None
    ((exps, _),) = p.terms.items()
    return exps


def sheaf_twists(
    s: Scenario, ctx: CechContext, sdeg: int, with_end: bool
) -> Optional[List[int]]:
    """Twist decomposition of Sym^sdeg con (x) (End E or O) when diagonal monomial."""
    space = detect_cover(s)
    if space is None:
        return None
    probe = (0, 1)
    geom = ctx.pairs[probe]
    con = geom.conormal_ji
    diag_twists = []
    for a in range(s.q):
        for b in range(s.q):
            exps = _monomial_degree(con[a, b])
            if a == b:
                if exps is None:
                    return None
                diag_twists.append(exps[0])
            elif not con[a, b].is_zero():
                return None
    gmat = ctx.bundle.g[probe]
    g_twists = []
    for r in range(s.e):
        for c in range(s.e):
            exps = _monomial_degree(gmat[r, c])
            if r == c:
                if exps is None:
                    return None
                g_twists.append(exps[0])
            elif not gmat[r, c].is_zero():
                return None
    ring = ctx.nerve.pair_rings[probe][0]
    out = []
    for tm in ring.t_monomials(sdeg):
        con_twist = sum(m * e_ for m, e_ in zip(diag_twists, tm))
        if with_end:
            for r in range(s.e):
                for c in range(s.e):
                    out.append(con_twist + g_twists[r] - g_twists[c])
        else:
            out.append(con_twist)
    return out


def h2_weight_test(s: Scenario, ctx: CechContext, sdeg: int, with_end: bool):
    """Exact pairing of a 2-cochain against the top-cohomology monomial basis.

    On the standard plane cover a coboundary can never reach a monomial
    whose homogeneous weight is negative in every slot, so a nonzero
    coefficient there certifies a nonzero class independently of any
    window.  Returns None when the cover or sheaf is not supported.
    """
    space = detect_cover(s)
    if space != "p2":
        return None
    twists = sheaf_twists(s, ctx, sdeg, with_end)
    if twists is None:
        return None
    geom01 = ctx.pairs[(0, 1)]
    con = geom01.conormal_ji
    gmat = ctx.bundle.g[(0, 1)]

    def test(c2: CechCochain):
        tri = (0, 1, 2)
        if tri not in c2.values:
            return []
        value = c2.values[tri]
        ring = ctx.nerve.triple_rings[tri]
        hits = []
        e = ctx.bundle.rank
        entries = (
            [((0, 0), value)] if c2.vtype == SYM_SCALAR else [
                ((r, c), value.entries[r][c]) for r in range(e) for c in range(e)
            ]
        )
        for (r, c), poly in entries:
            for exps, coeff in poly.sorted_terms():
                u_part, t_part = exps[: s.p], exps[s.p:]
                con_twist = sum(
                    _monomial_degree(con[a, a])[0] * t_part[a] for a in range(s.q)
                )
                d = con_twist
                if c2.vtype != SYM_SCALAR:
                    d += _monomial_degree(gmat[r, r])[0] - _monomial_degree(gmat[c, c])[0]
                w0 = d - u_part[0] - u_part[1]
                if u_part[0] < 0 and u_part[1] < 0 and w0 < 0:
                    hits.append(
                        (f"entry {(r, c)} monomial {list(exps)}", format_fraction(coeff))
                    )
        return hits

    return test


# -- reports ---------------------------------------------------------------------


def _status_json(status) -> dict:
    if isinstance(status, Solved):
        return {
            "kind": "solved",
            "torsor_dim": status.torsor_dim,
            "h1_oracle": status.h1_oracle,
            "cochain": _cochain_json(status.cochain),
        }
    if isinstance(status, ProvenNonzero):
        return {
            "kind": "proven_nonzero",
            "class_coordinates": [list(x) for x in status.class_coordinates],
        }
    return {"kind": "unresolved_within_window", "window": list(status.window)}


def _cochain_json(c: CechCochain) -> dict:
    out = {}
    for simplex in sorted(c.values):
        v = c.values[simplex]
        key = ",".join(str(x) for x in simplex)
        if isinstance(v, LaurentPoly):
            out[key] = v.to_json_terms()
        elif isinstance(v, PolyMatrix):
            out[key] = [
                [v.entries[r][cc].to_json_terms() for cc in range(v.cols)]
                for r in range(v.rows)
            ]
        else:
            out[key] = [
                m.to_json_terms() if isinstance(m, LaurentPoly) else [
                    [m.entries[r][cc].to_json_terms() for cc in range(m.cols)]
                    for r in range(m.rows)
                ]
                for m in v
            ]
    return {"degree": c.degree, "vtype": c.vtype, "sdeg": c.sdeg, "values": out}


@dataclass
class ObstructionReport:
    order: int
    closedness: str
    status: object
    obstruction: CechCochain
    notes: List[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "closedness": self.closedness,
            "status": _status_json(self.status),
            "obstruction": _cochain_json(self.obstruction),
            "notes": list(self.notes),
        }


@dataclass
class ReportBundle:
    scenario_name: str
    scenario_digest: str
    engine_version: str
    window: Tuple[int, int]
    validation: ValidationLog
    reports: List[ObstructionReport]
    abelianized: Optional[dict] = None

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario_name,
            "scenario_digest": self.scenario_digest,
            "engine_version": self.engine_version,
            "window": list(self.window),
            "validation": self.validation.to_json(),
            "reports": [r.to_json() for r in self.reports],
            "abelianized": self.abelianized,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n"


# -- the pipeline -----------------------------------------------------------------


def _closedness_verdict(ctx: CechContext, c2: CechCochain) -> str:
    if not ctx.nerve.quadruples():
        return "vacuous"
    return "verified" if cech_differential(ctx, c2).is_zero() else "FAILED"


def _window_notes(status) -> List[str]:
    if (
        isinstance(status, Solved)
        and status.h1_oracle is not None
        and status.h1_oracle != status.torsor_dim
    ):
        return [
            f"window undercounts the torsor: {status.torsor_dim} of "
            f"{status.h1_oracle} oracle dimensions reachable"
        ]
    return []


def run_pipeline(
    s: Scenario,
    k: int = 2,
    window: Optional[Tuple[int, int]] = None,
    workers: int = 1,
) -> ReportBundle:
    """Validate, extract components, assemble obstructions and solve.

    Orders one and two only; a request beyond that is refused with a
    diagnostic because the quadratic cochain calculus is where exactness
    of this engine ends.
    """
    if k > 2:
        raise NotClosed(
            "order > 2 requested: the engine's cochain bracket calculus is "
            "exact only through the quadratic terms, so higher lifts are refused"
        )
    window = tuple(window or s.window)
    log = validate_scenario(s)
    if not log.ok:
        raise ParseError(
            "scenario failed validation: "
            + "; ".join(
                f"{e.check}@{e.location}: {e.detail}" for e in log.entries if not e.ok
            )
        )
    ctx = build_context(s, max(k, 1))
    at = atiyah_cocycle(ctx)
    reports: List[ObstructionReport] = []

    a1 = kodaira_spencer_cochain(ctx, 1)
    c1 = first_order_obstruction(ctx, a1, at, workers=workers)
    oracle1 = sheaf_twists(s, ctx, 1, with_end=True)
    h1_1 = None
    if oracle1 is not None:
        space = detect_cover(s)
        h1_1 = cohomology.cohomology_dim(space, oracle1)[1]
    status1 = solve_coboundary(
        ctx, c1, window, h1_oracle=h1_1, h2_basis_test=h2_weight_test(s, ctx, 1, True)
    )
    reports.append(
        ObstructionReport(1, _closedness_verdict(ctx, c1), status1, c1,
                          notes=_window_notes(status1))
    )

    if k >= 2:
        if not isinstance(status1, Solved):
            reports.append(
                ObstructionReport(
                    2,
                    "skipped",
                    UnresolvedWithinWindow(window),
                    CechCochain(2, SYM_END, 2, {}),
                    notes=["order one did not resolve, so order two is untested"],
                )
            )
        else:
            a2 = kodaira_spencer_cochain(ctx, 2)
            c2 = second_order_obstruction(ctx, a2, at, status1.cochain, workers=workers)
            oracle2 = sheaf_twists(s, ctx, 2, with_end=True)
            h1_2 = None
            if oracle2 is not None:
                h1_2 = cohomology.cohomology_dim(detect_cover(s), oracle2)[1]
            status2 = solve_coboundary(
                ctx, c2, window, h1_oracle=h1_2,
                h2_basis_test=h2_weight_test(s, ctx, 2, True),
            )
            reports.append(
                ObstructionReport(2, _closedness_verdict(ctx, c2), status2, c2,
                                  notes=_window_notes(status2))
            )

    abelianized = None
    if s.e == 1 and k >= 2:
        abelianized = solve_abelianized(s, ctx, window)

    return ReportBundle(
        scenario_name=s.name,
        scenario_digest=s.digest(),
        engine_version=ENGINE_VERSION,
        window=window,
        validation=log,
        reports=reports,
        abelianized=abelianized,
    )


def solve_abelianized(s: Scenario, ctx: CechContext, window: Tuple[int, int]):
    """Coupled exactness check of the two-layer obstruction pair (rank one).

    Solves for a conormal-degree-one endomorphism cochain together with a
    degree-two scalar cochain whose differential is twisted by the
    degree-one transition components acting on the trace of the first
    unknown.
    """
    at = atiyah_cocycle(ctx)
    a1 = kodaira_spencer_cochain(ctx, 1)
    a2 = kodaira_spencer_cochain(ctx, 2)
    end_target, scalar_target = abelianized_pair(ctx, a1, a2, at)

    basis_end = _unknown_basis(ctx, SYM_END, 1, window)
    basis_sc = _unknown_basis(ctx, SYM_SCALAR, 2, window)
    half = Fraction(1, 2)

    def coupling(m1: CechCochain) -> CechCochain:
        values = {}
        for tri in ctx.nerve.triples():
            i, j, h = tri
            ring = ctx.nerve.triple_rings[tri]
            phi_ij = ctx.pairs[(i, j)].logphi.component(1)
            phi_jh_low = ctx.derivation_to_low((i, j), ctx.pairs[(j, h)].logphi).component(1)
            tr_ij = m1.value(ctx, (i, j)).trace()
            # the trace is conjugation-invariant, so it moves as a scalar
            tr_jh = ctx.scalar_to_low((i, j), m1.value(ctx, (j, h)).trace())
            val = (
                phi_jh_low.apply(tr_ij) * half
                + phi_ij.apply(tr_jh) * half
            )
            values[tri] = ring.t_part(ring.truncate(val, ctx.order), 2)
        return CechCochain(2, SYM_SCALAR, 2, values)

    columns = []
    for key in basis_end:
        elem = _elementary_cochain(ctx, SYM_END, 1, key)
        col = cochain_coordinates(cech_differential(ctx, elem))
        tagged = {("end",) + kk: v for kk, v in col.items()}
        coup = cochain_coordinates(coupling(elem))
        tagged.update({("sc",) + kk: v for kk, v in coup.items()})
        columns.append(tagged)
    for key in basis_sc:
        elem = _elementary_cochain(ctx, SYM_SCALAR, 2, key)
        col = cochain_coordinates(cech_differential(ctx, elem))
        columns.append({("sc",) + kk: v for kk, v in col.items()})

    rhs_coords = {("end",) + kk: v for kk, v in cochain_coordinates(end_target.neg()).items()}
    rhs_coords.update(
        {("sc",) + kk: v for kk, v in cochain_coordinates(scalar_target.neg()).items()}
    )
    row_keys = sorted(
        {kk for col in columns for kk in col} | set(rhs_coords),
        key=lambda kk: (kk[0], kk[1], kk[2], (sum(kk[3]), kk[3])),
    )
    matrix = [[col.get(kk, Fraction(0)) for col in columns] for kk in row_keys]
    rhs = [rhs_coords.get(kk, Fraction(0)) for kk in row_keys]
    sol = solve_exact(
        ExactLinearSystem(list(range(len(columns))), matrix, rhs)
    )
    return {
        "exact": sol.consistent,
        "unknowns": len(columns),
        "constraints": len(row_keys),
    }


# -- builtin generators ---------------------------------------------------------------


def generate_builtin(name: str, d: int = 0, twist: Fraction | int = 0) -> Scenario:
    """Exact adapted-coordinate presentations of the shipped embeddings."""
    twist = Fraction(twist)
    if name == "affine_split":
        return _affine_split(d)
    if name == "line_in_p2":
        return _line_in_p2(d, twist)
    if name == "diagonal_p1xp1":
        return _diagonal_p1xp1(d)
    if name == "hyperplane_p2_in_p3":
        return _hyperplane_p2_in_p3(d, twist)
    if name == "p1_in_line_bundle":
        return _p1_in_line_bundle(int(d), 0)
    raise UnknownScenario(
        f"unknown scenario {name!r}; builtins: affine_split, line_in_p2, "
        "diagonal_p1xp1, hyperplane_p2_in_p3, p1_in_line_bundle"
    )


BUILTIN_NAMES = (
    "affine_split",
    "line_in_p2",
    "diagonal_p1xp1",
    "hyperplane_p2_in_p3",
    "p1_in_line_bundle",
)


def _names(p: int, q: int) -> Tuple[str, ...]:
    return tuple(f"u{i+1}" for i in range(p)) + tuple(f"t{i+1}" for i in range(q))


def _affine_split(d: int) -> Scenario:
    names = _names(1, 1)
    e = 1
    return Scenario(
        name="affine_split",
        p=1,
        q=1,
        e=e,
        max_order=3,
        charts_inverted=[()],
        overlaps=[],
        triples=[],
        g={},
        gammas=[[PolyMatrix.zero(e, e, names)]],
        flat=[True],
        window=(-4, 4),
    )


def _p1_two_chart(name, forward_u, forward_t, backward_u, backward_t, d):
    names = _names(1, 1)
    e = 1
    g01 = PolyMatrix([[LaurentPoly.monomial(names, (d, 0))]])
    return Scenario(
        name=name,
        p=1,
        q=1,
        e=e,
        max_order=3,
        charts_inverted=[(), ()],
        overlaps=[
            OverlapSpec(
                (0, 1),
                {0: ((1,),), 1: ((1,),)},
                (forward_u,),
                (forward_t,),
                (backward_u,),
                (backward_t,),
            )
        ],
        triples=[],
        g={(0, 1): g01},
        gammas=[[PolyMatrix.zero(e, e, names)], [PolyMatrix.zero(e, e, names)]],
        flat=[True, True],
        window=(-6, 6),
    )


def _line_in_p2(d: int, twist: Fraction) -> Scenario:
    names = _names(1, 1)
    c = twist

    def P(terms):
        return LaurentPoly(names, terms)

    if c == 0:
        fwd_u = P({(-1, 0): 1})
        fwd_t = P({(-1, 1): 1})
        bwd_u = P({(-1, 0): 1})
        bwd_t = P({(-1, 1): 1})
    else:
        fwd_u = P({(-1, 0): 1, (-1, 1): c})
        fwd_t = P({(-1, 1): 1})
        bwd_u = P({(-1, 0): 1, (-2, 1): c, (-3, 2): c * c, (-4, 3): c ** 3})
        bwd_t = P({(-1, 1): 1, (-2, 2): c, (-3, 3): c * c})
    s = _p1_two_chart("line_in_p2", fwd_u, fwd_t, bwd_u, bwd_t, d)
    return s


def _diagonal_p1xp1(d: int) -> Scenario:
    names = _names(1, 1)

    def P(terms):
        return LaurentPoly(names, terms)

    series_t = P({(-2, 1): -1, (-3, 2): 1, (-4, 3): -1})
    s = _p1_two_chart(
        "diagonal_p1xp1",
        P({(-1, 0): 1}),
        series_t,
        P({(-1, 0): 1}),
        series_t,
        d,
    )
    return s


def _p1_in_line_bundle(m: int, d: int) -> Scenario:
    names = _names(1, 1)

    def P(terms):
        return LaurentPoly(names, terms)

    s = _p1_two_chart(
        f"p1_in_line_bundle_{m}",
        P({(-1, 0): 1}),
        P({(-m, 1): 1}),
        P({(-1, 0): 1}),
        P({(-m, 1): 1}),
        d,
    )
    # order-two classes live out to u^(-2m+1): keep the window wide enough
    half = max(6, 2 * abs(m))
    s.window = (-half, half)
    return s


def _hyperplane_p2_in_p3(d: int, twist: Fraction) -> Scenario:
    names = _names(2, 1)
    e = 1
    c = twist

    def P(terms):
        return LaurentPoly(names, terms)

    u1i = {(-1, 0, 0): 1}
    # overlap (0,1): chart-1 generators (v1, v2~, s) in chart-0 coordinates,
    # where the twist shifts the second tangential coordinate: v2~ = v2 + c s
    if c == 0:
        f01_u = (P(u1i), P({(-1, 1, 0): 1}))
        b01_u = (P(u1i), P({(-1, 1, 0): 1}))
        b01_t = (P({(-1, 0, 1): 1}),)
    else:
        f01_u = (P(u1i), P({(-1, 1, 0): 1, (-1, 0, 1): c}))
        # backward is exact: u1 = 1/v1, u2 = (v2~ - c s)/v1, t = s/v1
        b01_u = (P(u1i), P({(-1, 1, 0): 1, (-1, 0, 1): -c}))
        b01_t = (P({(-1, 0, 1): 1}),)
    f01_t = (P({(-1, 0, 1): 1}),)

    # overlap (0,2): chart-2 (w1, w2, s') in chart-0 coordinates, untwisted;
    # backward: u1 = w2/w1, u2 = 1/w1, t = s'/w1
    f02_u = (P({(0, -1, 0): 1}), P({(1, -1, 0): 1}))
    f02_t = (P({(0, -1, 1): 1}),)
    b02_u = (P({(-1, 1, 0): 1}), P({(-1, 0, 0): 1}))
    b02_t = (P({(-1, 0, 1): 1}),)

    # overlap (1,2): chart-2 in (possibly twisted) chart-1 coordinates;
    # with the twist, 1/v2 = (v2~ - c s)^(-1) expands as a geometric series
    if c == 0:
        f12_u = (P({(1, -1, 0): 1}), P({(0, -1, 0): 1}))
        f12_t = (P({(0, -1, 1): 1}),)
        b12_u = (P({(1, -1, 0): 1}), P({(0, -1, 0): 1}))
        b12_t = (P({(0, -1, 1): 1}),)
    else:
        inv = {
            (0, -1, 0): Fraction(1),
            (0, -2, 1): c,
            (0, -3, 2): c * c,
            (0, -4, 3): c ** 3,
        }
        shift = lambda dv1, dt: {
            (a + dv1, b, cc + dt): v for (a, b, cc), v in inv.items()
        }
        f12_u = (P(shift(1, 0)), P(inv))
        f12_t = (P(shift(0, 1)),)
        b12_u = (P({(1, -1, 0): 1}), P({(0, -1, 0): 1, (0, -1, 1): c}))
        b12_t = (P({(0, -1, 1): 1}),)

    g01 = PolyMatrix([[P({(d, 0, 0): 1})]])
    g02 = PolyMatrix([[P({(0, d, 0): 1})]])
    g12 = PolyMatrix([[P({(0, d, 0): 1})]])
    zero_conn = [
        PolyMatrix.zero(e, e, names),
        PolyMatrix.zero(e, e, names),
    ]
    return Scenario(
        name="hyperplane_p2_in_p3",
        p=2,
        q=1,
        e=e,
        max_order=3,
        charts_inverted=[(), (), ()],
        overlaps=[
            OverlapSpec((0, 1), {0: ((1, 0),), 1: ((1, 0),)}, f01_u, f01_t, b01_u, b01_t),
            OverlapSpec((0, 2), {0: ((0, 1),), 2: ((1, 0),)}, f02_u, f02_t, b02_u, b02_t),
            OverlapSpec((1, 2), {1: ((0, 1),), 2: ((0, 1),)}, f12_u, f12_t, b12_u, b12_t),
        ],
        triples=[TripleSpec((0, 1, 2), ((1, 0), (0, 1)))],
        g={(0, 1): g01, (0, 2): g02, (1, 2): g12},
        gammas=[list(zero_conn), list(zero_conn), list(zero_conn)],
        flat=[True, True, True],
        window=(-3, 3),
    )
