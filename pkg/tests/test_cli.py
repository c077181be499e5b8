"""End to end runs of the command line front end."""

import json
from pathlib import Path

import pytest

from boxsem.cli import main

ROOT = Path(__file__).resolve().parent.parent

MODELS = ["one", "two", "chain3", "sierpinski", "disc2"]


@pytest.fixture(autouse=True)
def _run_from_repo_root(monkeypatch):
    # model names like "two" resolve against the models/ directory
    monkeypatch.chdir(ROOT)


def test_check_corpus_passes(capsys):
    assert main(["check", "corpus/t4.s4"]) == 0
    out = capsys.readouterr().out
    assert out.strip().splitlines()[-1] == "ok: 29 derivations, all replayed"
    assert sum(1 for line in out.splitlines() if line.startswith("PASS")) == 29


def test_check_writes_a_json_report(tmp_path, capsys):
    out_file = tmp_path / "report.json"
    assert main(["check", "corpus/t4.s4", "--out", str(out_file)]) == 0
    capsys.readouterr()
    report = json.loads(out_file.read_text())
    assert report["ok"] and len(report["derivations"]) == 29
    assert {"box-intro", "box-elim", "modal-var"} <= \
        {d["rule"] for d in report["derivations"]}


def test_check_names_the_rule_gap_on_failure(tmp_path, capsys):
    bad = tmp_path / "bad.s4"
    bad.write_text("type A;\ncheck | x : A |- box(x) : Box A;\n")
    assert main(["check", str(bad)]) == 1
    out = capsys.readouterr().out
    assert "rule gap: variable" in out


def test_check_parse_errors_are_bad_input(tmp_path, capsys):
    mangled = tmp_path / "mangled.s4"
    mangled.write_text("type A\ncheck |- a : A;\n")
    assert main(["check", str(mangled)]) == 2
    err = capsys.readouterr().err
    assert "parse error" in err and "2:1" in err


def test_check_missing_file_is_bad_input(tmp_path, capsys):
    assert main(["check", str(tmp_path / "ghost.s4")]) == 2
    capsys.readouterr()


@pytest.mark.parametrize("model", ["one", "two"])
def test_interpret_corpus_in_shipped_comonads(model, capsys):
    assert main(["interpret", "corpus/t4.s4", "--model", model]) == 0
    out = capsys.readouterr().out
    assert f"PASS interpretation in '{model}' (0 near misses)" in out


def test_interpret_reports_the_threading_note(capsys):
    main(["interpret", "corpus/t4.s4", "--model", "two"])
    out = capsys.readouterr().out
    assert "note: eliminator interpreted under a nonempty ordinary zone" in out


def test_interpret_rejects_ill_typed_input(tmp_path, capsys):
    bad = tmp_path / "bad.s4"
    bad.write_text("type A;\ncheck u :: A |- u : Box A;\n")
    assert main(["interpret", str(bad), "--model", "two"]) == 1
    out = capsys.readouterr().out
    assert "FAIL (ill-typed input)" in out


@pytest.mark.parametrize("model", MODELS)
def test_model_laws_pass_for_every_shipped_model(model, capsys):
    assert main(["model", "laws", model]) == 0
    out = capsys.readouterr().out
    assert f"PASS model '{model}'" in out


def test_model_laws_report_sections(tmp_path, capsys):
    out_file = tmp_path / "laws.json"
    assert main(["model", "laws", "two", "--out", str(out_file)]) == 0
    capsys.readouterr()
    report = json.loads(out_file.read_text())
    assert report["ok"]
    assert "comonad" in report["sections"]
    assert report["sections"]["comonad"]["ok"]


def test_universe_report_on_the_arrow_model(capsys):
    assert main(["model", "universe", "two"]) == 0
    out = capsys.readouterr().out
    assert "universe sizes at bound 1: 0: 2, 1: 3" in out
    assert "(3 display maps)" in out
    assert "realignment along monos (14 cases)" in out


def test_universe_report_on_the_point_at_unit_bound(capsys):
    assert main(["model", "universe", "one", "--bound", "1"]) == 0
    out = capsys.readouterr().out
    assert "universe sizes at bound 1: *: 2" in out
    assert "realignment along monos (5 cases)" in out


def test_coalgebra_report_at_bound_two(tmp_path, capsys):
    out_file = tmp_path / "coalg.json"
    assert main(["model", "coalgebras", "two", "--bound", "2",
                 "--out", str(out_file)]) == 0
    out = capsys.readouterr().out
    assert "11 coalgebras on carriers up to 2" in out
    assert "(11 presheaves, 11 coalgebras)" in out
    report = json.loads(out_file.read_text())
    assert report["coalgebras"] == 11 and report["comparison"]["ok"]


def test_enumeration_ceiling_exit_code(monkeypatch, capsys):
    monkeypatch.setenv("BOXSEM_CEILING", "2")
    assert main(["model", "coalgebras", "two"]) == 3
    err = capsys.readouterr().err
    assert "ceiling" in err


def test_ceiling_must_be_an_integer(monkeypatch, capsys):
    monkeypatch.setenv("BOXSEM_CEILING", "banana")
    assert main(["model", "universe", "two"]) == 2
    err = capsys.readouterr().err
    assert "BOXSEM_CEILING" in err


def test_stack_failure_demo_exhibits_two_amalgamations(tmp_path, capsys):
    """Descent for the naive universe fails on the two-point cover, and
    the demo prints the matching family together with both gluings."""
    out_file = tmp_path / "stack.json"
    assert main(["demo", "stack-failure", "--out", str(out_file)]) == 0
    out = capsys.readouterr().out
    assert "sizes: {'Oa': 3, 'Oab': 6, 'Ob': 3, 'Oempty': 2}" in out
    assert "witness cover on Oab" in out
    assert "amalgamations: [4, 5]" in out
    report = json.loads(out_file.read_text())
    assert report["ok"] and report["object"] == "Oab"
    assert len(report["amalgamations"]) >= 2


def test_sheaves_as_coalgebras_demo_counts_agree(capsys):
    assert main(["demo", "sheaves-as-coalgebras"]) == 0
    out = capsys.readouterr().out
    assert "sheaves on the Sierpinski site (values up to 2): 11" in out
    assert "presheaves on the walking arrow (values up to 2): 11" in out
    assert "coalgebras for the points comonad (carriers up to 2): 11" in out
    assert "bijective on 8 isomorphism classes" in out


def test_doctored_composition_table_is_rejected(tmp_path, capsys):
    spec = {"category": {
        "objects": ["x", "y"],
        "identities": {"x": "ix", "y": "iy"},
        "morphisms": [{"name": "f", "src": "x", "dst": "y"},
                      {"name": "g", "src": "y", "dst": "x"}],
        "composition": [["g", "f", "ix"], ["f", "g", "ix"]]}}
    path = tmp_path / "doctored.json"
    path.write_text(json.dumps(spec))
    assert main(["model", "laws", str(path)]) == 2
    err = capsys.readouterr().err
    assert "does not validate" in err


def test_unreadable_model_json_is_bad_input(tmp_path, capsys):
    path = tmp_path / "mangled.json"
    path.write_text("{not json")
    assert main(["model", "laws", str(path)]) == 2
    assert main(["model", "laws", str(tmp_path / "ghost.json")]) == 2
    capsys.readouterr()
