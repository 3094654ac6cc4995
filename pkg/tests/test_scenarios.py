import copy
import json
from fractions import Fraction

import pytest

from nbhdext.cech import Solved
from nbhdext.cli import main as cli_main
from nbhdext.errors import NotClosed, ParseError, SchemaVersionError, UnknownScenario
from nbhdext.laurent import LaurentPoly
from nbhdext.linsolve import PolyMatrix
from nbhdext.scenarios import (
    BUILTIN_NAMES,
    generate_builtin,
    load_scenario,
    run_pipeline,
    save_scenario,
    scenario_from_json,
    validate_scenario,
)

F = Fraction


def test_builtin_names_round_trip(tmp_path):
    s = generate_builtin("line_in_p2", d=2)
    path = tmp_path / "line.json"
    save_scenario(s, path.as_posix())
    loaded = load_scenario(path.as_posix())
    assert loaded.dumps() == s.dumps()
    # saving the loaded copy is byte-identical
    path2 = tmp_path / "line2.json"
    save_scenario(loaded, path2.as_posix())
    assert path.read_bytes() == path2.read_bytes()


def test_every_builtin_validates():
    cases = [
        ("affine_split", 0, 0),
        ("line_in_p2", 3, 0),
        ("line_in_p2", -2, 1),
        ("diagonal_p1xp1", 2, 0),
        ("hyperplane_p2_in_p3", 1, 0),
        ("hyperplane_p2_in_p3", -1, 1),
        ("p1_in_line_bundle", 4, 0),
    ]
    for name, d, tw in cases:
        s = generate_builtin(name, d=d, twist=tw)
        log = validate_scenario(s)
        assert log.ok, (name, [e for e in log.entries if not e.ok])


def test_unknown_builtin():
    with pytest.raises(UnknownScenario):
        generate_builtin("moebius_strip")


def test_malformed_exponent_vector_names_the_field():
    doc = generate_builtin("line_in_p2", d=1).to_json()
    doc["overlaps"][0]["forward_u"][0][0][0] = [1]  # wrong arity
    with pytest.raises(ParseError) as err:
        scenario_from_json(doc)
    assert "forward_u" in str(err.value)


def test_floats_rejected(tmp_path):
    doc = generate_builtin("line_in_p2", d=1).to_json()
    text = json.dumps(doc).replace('"schema_version": 1', '"schema_version": 1, "noise": 0.5')
    path = tmp_path / "bad.json"
    path.write_text(text)
    with pytest.raises(ParseError):
        load_scenario(path.as_posix())


def test_schema_version_gate():
    doc = generate_builtin("line_in_p2", d=1).to_json()
    doc["schema_version"] = 99
    with pytest.raises(SchemaVersionError):
        scenario_from_json(doc)


def test_injected_bundle_cocycle_failure_pinpoints_triple():
    s = generate_builtin("hyperplane_p2_in_p3", d=1)
    s.g[(0, 2)] = s.g[(0, 2)].scale(F(3))
    log = validate_scenario(s)
    assert not log.ok
    bad = [e for e in log.entries if not e.ok]
    assert any(e.check == "bundle_cocycle" and "0, 1, 2" in e.location for e in bad)


def test_injected_chart_cocycle_failure():
    s = generate_builtin("hyperplane_p2_in_p3", d=1)
    o = [ov for ov in s.overlaps if ov.pair == (0, 2)][0]
    o.forward_u = (o.forward_u[0] * 2, o.forward_u[1])
    log = validate_scenario(s)
    assert not log.ok
    assert any(e.check in ("cocycle", "transition_inverse") for e in log.entries if not e.ok)


def test_flat_flag_against_curvature():
    s = generate_builtin("hyperplane_p2_in_p3", d=0)
    names = s.names
    u1 = LaurentPoly.variable(names, "u1")
    # nabla = d + u1 du2 has curvature du1 ^ du2
    s.gammas[0] = [
        PolyMatrix([[LaurentPoly.zero(names)]]),
        PolyMatrix([[u1]]),
    ]
    log = validate_scenario(s)
    assert not log.ok
    bad = [e for e in log.entries if not e.ok and e.check == "flatness"]
    assert bad and "curvature" in bad[0].detail


def test_affine_split_trivially_solved():
    s = generate_builtin("affine_split")
    bundle = run_pipeline(s, k=2)
    for r in bundle.reports:
        assert isinstance(r.status, Solved)
        assert r.status.cochain.is_zero()  # m = 0 is admissible
        assert r.status.torsor_dim == 0
    assert bundle.abelianized["exact"]


def test_diagonal_solved_both_orders():
    for d in (-1, 0, 2):
        s = generate_builtin("diagonal_p1xp1", d=d)
        bundle = run_pipeline(s, k=2)
        assert all(isinstance(r.status, Solved) for r in bundle.reports)


def test_line_in_p2_order_one_torsor_matches_oracle():
    for d in (-3, 0, 3):
        s = generate_builtin("line_in_p2", d=d)
        bundle = run_pipeline(s, k=1)
        (r1,) = bundle.reports
        assert isinstance(r1.status, Solved)
        assert r1.status.torsor_dim == 0
        assert r1.status.h1_oracle == 0


def test_order_three_refused():
    s = generate_builtin("line_in_p2", d=1)
    with pytest.raises(NotClosed) as err:
        run_pipeline(s, k=3)
    assert "order" in str(err.value)


def test_pipeline_determinism_across_workers():
    s = generate_builtin("hyperplane_p2_in_p3", d=2, twist=1)
    outputs = [
        run_pipeline(s, k=2, window=(-3, 3), workers=w).dumps() for w in (1, 2, 4)
    ]
    assert outputs[0] == outputs[1] == outputs[2]
    again = run_pipeline(s, k=2, window=(-3, 3)).dumps()
    assert again == outputs[0]


def test_cli_end_to_end(tmp_path, capsys):
    scn = tmp_path / "diag.json"
    assert cli_main(["generate", "diagonal_p1xp1", "-d", "1", "-o", scn.as_posix()]) == 0
    assert cli_main(["validate", scn.as_posix()]) == 0
    out = tmp_path / "report.json"
    assert cli_main(["obstruct", scn.as_posix(), "--order", "2", "--out", out.as_posix()]) == 0
    report = json.loads(out.read_text())
    assert report["reports"][0]["status"]["kind"] == "solved"
    assert cli_main(["cohomology", "--space", "p1", "--twist", "-2"]) == 0
    captured = capsys.readouterr()
    assert "h^1(p1, O(-2)) = 1" in captured.out


def test_cli_reports_are_identical_across_worker_counts(tmp_path):
    scn = tmp_path / "s.json"
    cli_main(["generate", "line_in_p2", "-d", "2", "-o", scn.as_posix()])
    blobs = []
    for w in ("1", "3"):
        out = tmp_path / f"r{w}.json"
        cli_main(["obstruct", scn.as_posix(), "--workers", w, "--out", out.as_posix()])
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1]
