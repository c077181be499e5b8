"""Interpretation of kernel judgments in comonad models."""

from pathlib import Path

import pytest

from boxsem.coalg import KanAdjunction, comonad_from_adjunction, identity_comonad
from boxsem.fincat import Functor
from boxsem.interp import (
    InterpretationGap,
    SemanticTarget,
    beta_substitution_check,
    interpret,
    soundness_harness,
)
from boxsem.natmodel import NaturalModel
from boxsem.s4dtt import (
    BaseType,
    BoxType,
    Judgment,
    LetBox,
    Shut,
    Telescope,
    Var,
    check_module,
    parse,
)
from boxsem.standard import discrete, terminal_category, walking_arrow

CORPUS = (Path(__file__).resolve().parent.parent / "corpus" / "t4.s4").read_text()

THREADING_NOTE = ("eliminator interpreted under a nonempty ordinary zone "
                  "by threading the section through the comprehensions")


@pytest.fixture(scope="module")
def corpus():
    mod = parse(CORPUS)
    check_module(mod)
    return mod


@pytest.fixture(scope="module")
def flagship():
    two = walking_arrow()
    d2 = discrete(2)
    u = Functor("incl", d2, two, {"0": "0", "1": "1"},
                {"id_0": "id_0", "id_1": "id_1"})
    w = comonad_from_adjunction(KanAdjunction(u), bound=1, check=False)
    return SemanticTarget(w, "flagship")


@pytest.fixture(scope="module")
def identity_target():
    ident = identity_comonad(NaturalModel(terminal_category(), 3))
    return SemanticTarget(ident, "identity", default_base_size=3)


def _assert_sound(report, lines):
    assert report["ok"]
    assert report["near_misses"] == 0
    assert [e["line"] for e in report["directives"]] == lines
    for entry in report["directives"]:
        assert entry["defined"], entry
        assert entry["context_ok"], entry
        if entry["kind"] == "check":
            assert entry["section_ok"] and entry["typing_ok"], entry
        else:
            assert entry["syntactic"], entry
            assert entry["semantic_equal"], entry
            assert not entry["near_miss"], entry


def test_corpus_is_sound_in_the_flagship_target(flagship, corpus):
    """Every corpus directive interprets and satisfies its semantic
    clause in the presheaf model induced by the two-point inclusion."""
    report = soundness_harness(flagship, corpus)
    _assert_sound(report, [8, 9, 10, 13, 16, 19, 22, 25, 26, 29, 30, 31])
    assert report["target"] == "flagship"


def test_corpus_is_sound_in_the_identity_target(identity_target, corpus):
    report = soundness_harness(identity_target, corpus)
    _assert_sound(report, [8, 9, 10, 13, 16, 19, 22, 25, 26, 29, 30, 31])


def test_eliminator_threading_is_flagged(flagship, corpus):
    # the corpus eliminates under "| y : Box A", which only works by
    # pushing the scrutinee section through the comprehension chain
    report = soundness_harness(flagship, corpus)
    assert THREADING_NOTE in report["notes"]


def test_context_judgment_yields_a_coalgebra_with_comprehensions(flagship, corpus):
    tele = corpus.directives[1].telescope  # u :: A | x : A
    res = interpret(flagship, corpus.signature, Judgment("context", tele))
    assert res.kind == "context" and res.defined
    ci = res.value
    assert [e.name for e in ci.modal] == ["u"]
    assert [e.name for e in ci.ordinary] == ["x"]
    assert ci.presheaf.validate() == []
    assert ci.to_carrier.source == ci.presheaf


def test_type_judgment_in_the_identity_target(identity_target, corpus):
    """With the identity comonad the box is invisible, so a boxed base
    type keeps the configured three-point fiber everywhere."""
    tele = corpus.directives[1].telescope
    res = interpret(identity_target, corpus.signature,
                    Judgment("type", tele, type=BoxType(BaseType("A"))))
    assert res.kind == "type" and res.defined
    assert set(res.value.fiber.values()) == {3}


def test_constants_denote_sections_over_the_terminal_coalgebra(flagship, corpus):
    directive = corpus.directives[3]  # check |- box(a0) : Box A
    res = interpret(flagship, corpus.signature, directive)
    assert res.defined
    section = res.value
    assert section.validate() == []
    ci = flagship.context(directive.telescope)
    assert section.type == flagship.type_over(ci, directive.type)


def test_modal_variables_interpret_through_the_counit(flagship, corpus):
    directive = corpus.directives[0]  # check u :: A |- u : A
    res = interpret(flagship, corpus.signature, directive)
    assert res.defined and res.value.validate() == []


def test_beta_substitution_lemma_on_corpus_redexes(flagship, corpus):
    """Eliminating a literal box agrees with the syntactic substitution,
    instance by instance, for every redex the corpus contains."""
    seen = 0
    for d in corpus.directives:
        candidates = (getattr(d, "term", None), getattr(d, "left", None),
                      getattr(d, "right", None))
        for tm in candidates:
            if isinstance(tm, LetBox) and isinstance(tm.scrutinee, Shut):
                assert beta_substitution_check(flagship, corpus.signature,
                                               d.telescope, tm, d.type)
                seen += 1
    assert seen == 3


def test_beta_substitution_check_rejects_non_redexes(flagship, corpus):
    directive = corpus.directives[4]  # scrutinee is a variable, not a box
    with pytest.raises(InterpretationGap):
        beta_substitution_check(flagship, corpus.signature,
                                directive.telescope, directive.term,
                                directive.type)


def test_base_sizes_can_be_overridden_per_type(flagship, corpus):
    target = SemanticTarget(flagship.comonad, "wide", base_sizes={"A": 1})
    ci = target.context(Telescope((), ()))
    a = target.type_over(ci, BaseType("A"))
    assert set(a.fiber.values()) == {1}


def test_empty_base_type_is_reported_not_raised(flagship, corpus):
    """A constant over an empty type has no denotation; the entry point
    absorbs the gap into a PartialResult instead of crashing."""
    target = SemanticTarget(flagship.comonad, "empty", base_sizes={"A": 0})
    res = interpret(target, corpus.signature, corpus.directives[3])
    assert not res.defined
    assert "no section" in res.reason
    assert res.value is None


def test_out_of_scope_variable_is_a_gap(flagship, corpus):
    loose = Judgment("term", Telescope((), ()), Var("q"), BaseType("A"))
    res = interpret(flagship, corpus.signature, loose)
    assert res.kind == "term" and not res.defined
    assert "not in the context" in res.reason


def test_harness_failure_entries_carry_the_reason(flagship, corpus):
    target = SemanticTarget(flagship.comonad, "starved", base_sizes={"A": 0})
    report = soundness_harness(target, corpus)
    assert not report["ok"]
    failed = [e for e in report["directives"] if not e.get("defined", True)]
    assert failed and all("reason" in e for e in failed)
