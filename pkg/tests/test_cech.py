from fractions import Fraction

import pytest

from nbhdext.cech import (
    FORM_END,
    SYM_END,
    SYM_SCALAR,
    CechCochain,
    ProvenNonzero,
    Solved,
    UnresolvedWithinWindow,
    atiyah_cocycle,
    cech_differential,
    first_order_obstruction,
    kodaira_spencer_cochain,
    second_order_obstruction,
    solve_coboundary,
)
from nbhdext.errors import NotOLinear
from nbhdext.filtered import (
    ChartRing,
    FilteredAutomorphism,
    exp_nilpotent,
    log_unipotent,
)
from nbhdext.laurent import LaurentPoly
from nbhdext.linsolve import PolyMatrix
from nbhdext.scenarios import (
    OverlapSpec,
    Scenario,
    TripleSpec,
    build_context,
    generate_builtin,
    h2_weight_test,
    run_pipeline,
    sheaf_twists,
    validate_scenario,
)

F = Fraction


def ctx_for(name, d=0, twist=0, order=2):
    s = generate_builtin(name, d=d, twist=twist)
    return s, build_context(s, order)


# -- differential -----------------------------------------------------------------


def test_delta_of_constant_scalar_zero_cochain():
    s, ctx = ctx_for("line_in_p2", d=1)
    ring0 = ctx.nerve.chart_rings[0]
    c = CechCochain(0, SYM_SCALAR, 0, {(0,): ring0.one(), (1,): ctx.nerve.chart_rings[1].one()})
    d = cech_differential(ctx, c)
    assert d.is_zero()


def test_delta_squared_is_zero_on_random_zero_cochains():
    s, ctx = ctx_for("hyperplane_p2_in_p3", d=2, twist=1)
    ring0 = ctx.nerve.chart_rings[0]
    val = ring0.t_var(0) * ring0.u_var(0) + ring0.t_var(0) * 2
    c = CechCochain(0, SYM_SCALAR, 1, {(0,): val})
    dd = cech_differential(ctx, cech_differential(ctx, c))
    assert dd.is_zero()


def test_delta_squared_end_valued():
    s, ctx = ctx_for("hyperplane_p2_in_p3", d=1, twist=1)
    ring0 = ctx.nerve.chart_rings[0]
    mat = PolyMatrix([[ring0.t_var(0) * ring0.u_var(1)]])
    c = CechCochain(0, SYM_END, 1, {(0,): mat})
    dd = cech_differential(ctx, cech_differential(ctx, c))
    assert dd.is_zero()


def test_extracted_tangential_components_are_delta_closed():
    # the degree-1 additive cocycle condition for the transition logs
    for tw in (0, 1):
        s, ctx = ctx_for("hyperplane_p2_in_p3", d=1, twist=tw)
        a1 = kodaira_spencer_cochain(ctx, 1)
        assert cech_differential(ctx, a1).is_zero()


def test_degree_two_bch_cocycle_condition():
    # log phi_ih = log phi_ij + T log phi_jh + [.,.]/2 in degree 2
    from nbhdext.filtered import bracket

    s, ctx = ctx_for("hyperplane_p2_in_p3", d=1, twist=1)
    i, j, h = 0, 1, 2
    d_ij = ctx.pairs[(i, j)].logphi
    d_ih = ctx.pairs[(i, h)].logphi
    d_jh = ctx.derivation_to_low((i, j), ctx.pairs[(j, h)].logphi)
    lhs = d_ih.component(2)
    x1, y1 = d_ij.component(1), d_jh.component(1)
    rhs = d_ij.component(2) + d_jh.component(2) + bracket(x1, y1).scaled(F(1, 2))
    assert (lhs - rhs).is_zero()


# -- Atiyah cocycle ----------------------------------------------------------------


def test_section_valued_transport():
    # a frame section of O(d) moves by the transition matrix and base change
    s, ctx = ctx_for("line_in_p2", d=2)
    ring = ctx.nerve.pair_rings[(0, 1)][1]
    vec = (ring.u_var(0),)  # the section u * e_1 written in the high frame
    moved = ctx.vec_to_low((0, 1), vec)
    # g_01 = u^2 and the base map sends u to 1/u: expect u^2 * (1/u) = u
    assert moved[0] == ctx.nerve.pair_rings[(0, 1)][0].u_var(0)


def test_atiyah_vanishes_for_globally_flat_trivial_bundle():
    s, ctx = ctx_for("line_in_p2", d=0)
    at = atiyah_cocycle(ctx)
    assert at.is_zero()


def test_atiyah_on_twisted_line_bundle_is_logarithmic():
    # O(d) with exterior-derivative connections: value d * du/u in the overlap
    for d in (1, -2, 3):
        s, ctx = ctx_for("line_in_p2", d=d)
        at = atiyah_cocycle(ctx)
        val = at.values[(0, 1)]
        ring = ctx.nerve.pair_rings[(0, 1)][0]
        expected = LaurentPoly.monomial(ring.names, (-1, 0), d)
        assert val[0][0, 0] == expected


def test_atiyah_trace_detects_nonzero_first_chern():
    s, ctx = ctx_for("line_in_p2", d=2)
    at = atiyah_cocycle(ctx)
    assert not at.values[(0, 1)][0].trace().is_zero()
    assert cech_differential(ctx, at).is_zero()


# -- component extraction -----------------------------------------------------------


def test_extract_components_identity_transition():
    s, ctx = ctx_for("line_in_p2", d=1)
    comp = ctx.components((0, 1))
    assert all(x.is_zero() for x in comp["a"][1])
    assert all(x.is_zero() for x in comp["L"][1])


def test_extract_components_m_residue_vanishes_for_connection_lift():
    # module data built as the pure connection lift must give m = 0
    s, ctx = ctx_for("hyperplane_p2_in_p3", d=2, twist=1)
    pair = (0, 1)
    geom = ctx.pairs[pair]
    d = geom.logphi
    from nbhdext.filtered import leibniz_extend

    lifted = leibniz_extend(d, ctx.connection_in_low(pair), ctx.bundle.rank)
    geom.phi = exp_nilpotent(lifted)
    geom.logphi = lifted
    comp = ctx.components(pair)
    for v, mat in comp["m"].items():
        assert mat.is_zero(), v


def test_extract_components_with_module_data():
    # attach consistent module data to a transition and read the residues
    s, ctx = ctx_for("line_in_p2", d=1)
    pair = (0, 1)
    geom = ctx.pairs[pair]
    ring = geom.ring_i
    d = geom.logphi
    geom.logphi = type(d)(
        d.ring, d.order, d.u_images, d.t_images,
        PolyMatrix([[ring.u_var(0) * ring.t_var(0)]]),
        algebra_trunc=d.algebra_trunc,
    )
    comp = ctx.components(pair)
    assert set(comp["m"]) == {1, 2}
    assert comp["m"][1][0, 0] == ring.u_var(0) * ring.t_var(0)


def test_extract_components_rejects_degree_zero_module_data():
    s, ctx = ctx_for("line_in_p2", d=1)
    pair = (0, 1)
    geom = ctx.pairs[pair]
    ring = geom.ring_i
    d = geom.logphi
    geom.logphi = type(d)(
        d.ring, d.order, d.u_images, d.t_images,
        PolyMatrix([[ring.u_var(0)]]),
        algebra_trunc=d.algebra_trunc,
    )
    with pytest.raises(NotOLinear):
        ctx.components(pair)


# -- first order obstruction ----------------------------------------------------------


def test_first_order_split_embedding_gives_zero():
    s, ctx = ctx_for("hyperplane_p2_in_p3", d=3)
    a1 = kodaira_spencer_cochain(ctx, 1)
    at = atiyah_cocycle(ctx)
    c1 = first_order_obstruction(ctx, a1, at)
    assert c1.is_zero()


def test_first_order_twisted_hyperplane_nonzero_but_exact():
    s, ctx = ctx_for("hyperplane_p2_in_p3", d=2, twist=1)
    a1 = kodaira_spencer_cochain(ctx, 1)
    at = atiyah_cocycle(ctx)
    c1 = first_order_obstruction(ctx, a1, at)
    assert not c1.is_zero()
    status = solve_coboundary(ctx, c1, (-3, 3))
    assert isinstance(status, Solved)
    # exactness is certified by a zero residual inside solve_coboundary


def test_first_order_class_independent_of_connection_choice():
    # perturb the chart-0 connection by a flat constant form: the obstruction
    # cochain moves, but only by a coboundary
    s = generate_builtin("hyperplane_p2_in_p3", d=2, twist=1)
    ctx = build_context(s, 2)
    c_base = first_order_obstruction(ctx, kodaira_spencer_cochain(ctx, 1), atiyah_cocycle(ctx))

    s2 = generate_builtin("hyperplane_p2_in_p3", d=2, twist=1)
    names = s2.names
    const_form = PolyMatrix([[LaurentPoly.const(names, 3)]])
    s2.gammas[1] = [const_form, const_form]
    assert validate_scenario(s2).ok
    ctx2 = build_context(s2, 2)
    c_new = first_order_obstruction(ctx2, kodaira_spencer_cochain(ctx2, 1), atiyah_cocycle(ctx2))
    diff = c_base.add(c_new.neg())
    assert not diff.is_zero()
    status = solve_coboundary(ctx, diff, (-3, 3))
    assert isinstance(status, Solved)


# -- solving and torsor dimensions -----------------------------------------------------


def test_solve_zero_cochain_reports_h1_dimension():
    for m, expected in [(2, 1), (3, 2), (4, 3)]:
        s, ctx = ctx_for("p1_in_line_bundle", d=m)
        zero = CechCochain(2, SYM_END, 1, {})
        status = solve_coboundary(ctx, zero, (-6, 6))
        assert isinstance(status, Solved)
        assert status.torsor_dim == expected
        tw = sheaf_twists(s, ctx, 1, with_end=True)
        assert tw == [-m]


def test_two_chart_cover_always_solvable():
    s, ctx = ctx_for("diagonal_p1xp1", d=2)
    ring = ctx.nerve.pair_rings[(0, 1)][0]
    val = PolyMatrix([[ring.t_var(0) * LaurentPoly.monomial(ring.names, (-1, 0), 7)]])
    # no triples: any would-be degree-2 data is the empty cochain
    c = CechCochain(2, SYM_END, 1, {})
    status = solve_coboundary(ctx, c, (-4, 4))
    assert isinstance(status, Solved)


def test_proven_nonzero_on_negative_plane_twist():
    # conormal O(-3) on the plane: the all-negative weight is untouchable
    s = _p2_in_cubic_bundle()
    assert validate_scenario(s).ok
    ctx = build_context(s, 2)
    ring = ctx.nerve.triple_rings[(0, 1, 2)]
    value = PolyMatrix([[LaurentPoly.monomial(ring.names, (-1, -1, 1))]])
    c = CechCochain(2, SYM_END, 1, {(0, 1, 2): value})
    status = solve_coboundary(
        ctx, c, (-3, 3), h2_basis_test=h2_weight_test(s, ctx, 1, True)
    )
    assert isinstance(status, ProvenNonzero)
    assert status.class_coordinates


def test_unresolved_when_no_certificate():
    s = _p2_in_cubic_bundle()
    ctx = build_context(s, 2)
    ring = ctx.nerve.triple_rings[(0, 1, 2)]
    value = PolyMatrix([[LaurentPoly.monomial(ring.names, (-1, -1, 1))]])
    c = CechCochain(2, SYM_END, 1, {(0, 1, 2): value})
    status = solve_coboundary(ctx, c, (-3, 3), h2_basis_test=None)
    assert isinstance(status, UnresolvedWithinWindow)


def _p2_in_cubic_bundle() -> Scenario:
    """The plane inside the total space of its degree-3 line bundle."""
    base = generate_builtin("hyperplane_p2_in_p3", d=0)
    names = base.names

    def P(terms):
        return LaurentPoly(names, terms)

    # forward and backward exponent patterns of the normal-variable cocycle
    reps = {
        (0, 1): ((-3, 0), (-3, 0)),
        (0, 2): ((0, -3), (-3, 0)),
        (1, 2): ((0, -3), (0, -3)),
    }
    overlaps = []
    for o in base.overlaps:
        fexp, bexp = reps[o.pair]
        fwd_t = (P({(fexp[0], fexp[1], 1): 1}),)
        bwd_t = (P({(bexp[0], bexp[1], 1): 1}),)
        overlaps.append(
            OverlapSpec(o.pair, o.inverted, o.forward_u, fwd_t, o.backward_u, bwd_t)
        )
    return Scenario(
        name="p2_in_cubic_bundle",
        p=2,
        q=1,
        e=1,
        max_order=3,
        charts_inverted=base.charts_inverted,
        overlaps=overlaps,
        triples=base.triples,
        g=base.g,
        gammas=base.gammas,
        flat=base.flat,
        window=(-3, 3),
    )
