import math
import random

import pytest

import probhier as ph
from probhier.errors import InputError, ModelError

from conftest import fixture_text

CLOSED_FORM = math.sqrt(2) / (math.sqrt(2) + math.sqrt(3))


@pytest.fixture(scope="module")
def full_grammar():
    return ph.parse_grammar(fixture_text("grammar.pcfg"))


@pytest.fixture(scope="module")
def structural_grammar():
    return ph.parse_grammar(fixture_text("grammar_structural.pcfg"))


@pytest.fixture(scope="module")
def treebank5():
    return ph.parse_treebank(fixture_text("corpus5.trees"))


def combo_tree(noun, verb):
    return ph.parse_tree(f"(s (np {noun}) (vp {verb}))")


def test_grammar_shape(full_grammar):
    assert full_grammar.start == "s"
    assert full_grammar.nonterminals == {
        "s", "np", "vp", "np-sing", "np-pl", "vp-sing", "vp-pl"}
    assert len(full_grammar.terminals) == 14
    assert full_grammar.probs is None


def test_grammar_with_probs_normalized(structural_grammar):
    structural_grammar.validate_probs()
    assert structural_grammar.probs[("np", ("np-sing",))] == 0.45


def test_grammar_rejects_mixed_annotation():
    with pytest.raises(InputError, match="every rule"):
        ph.parse_grammar("s -> a b : 1.0\na -> x\nb -> y\n")


def test_grammar_rejects_bad_sum():
    with pytest.raises(InputError, match="sum"):
        ph.parse_grammar("s -> a : 0.7\ns -> b : 0.7\na -> x : 1.0\nb -> y : 1.0")


def test_grammar_rejects_duplicate_rule():
    with pytest.raises(InputError, match="duplicate"):
        ph.parse_grammar("s -> a\ns -> a\na -> x")


def test_grammar_roundtrip(structural_grammar):
    text = ph.serialize_grammar(structural_grammar)
    again = ph.parse_grammar(text)
    assert again.rules == structural_grammar.rules
    assert again.probs == structural_grammar.probs
    assert ph.serialize_grammar(again) == text


def test_tree_parse_and_serialize():
    text = "(s (np (np-sing car)) (vp (vp-sing stops)))"
    tree = ph.parse_tree(text)
    assert tree.label == "s"
    assert ph.serialize_tree(tree) == text


def test_tree_parse_errors():
    with pytest.raises(InputError):
        ph.parse_tree("(s (np)")
    with pytest.raises(InputError):
        ph.parse_tree("(s) trailing")


def test_tree_probability_ranking_values(structural_grammar):
    assert ph.tree_probability(structural_grammar, combo_tree("np-pl", "vp-pl")) == \
        pytest.approx(0.3025, rel=1e-12)
    assert ph.tree_probability(structural_grammar, combo_tree("np-sing", "vp-sing")) == \
        pytest.approx(0.2025, rel=1e-12)
    mixed_a = ph.tree_probability(structural_grammar, combo_tree("np-sing", "vp-pl"))
    mixed_b = ph.tree_probability(structural_grammar, combo_tree("np-pl", "vp-sing"))
    assert mixed_a == pytest.approx(0.2475, rel=1e-12)
    assert mixed_a == mixed_b  # exact tie
    ranked = sorted([
        ph.tree_probability(structural_grammar, combo_tree(n, v))
        for n in ("np-sing", "np-pl") for v in ("vp-sing", "vp-pl")],
        reverse=True)
    assert ranked[0] > ranked[1] == ranked[2] > ranked[3]


def test_bare_start_symbol_tree(structural_grammar):
    assert ph.tree_probability(structural_grammar, ph.parse_tree("(s)")) == 1.0
    assert ph.tree_probability(structural_grammar, ph.Tree("s")) == 1.0


def test_tree_probability_rejects_wrong_root(structural_grammar):
    with pytest.raises(ModelError, match="start symbol"):
        ph.tree_probability(structural_grammar, ph.parse_tree("(np np-sing)"))


def test_tree_probability_rejects_unmatched_node(structural_grammar):
    with pytest.raises(ModelError, match="no rule covers"):
        ph.tree_probability(structural_grammar, ph.parse_tree("(s (np np-sing np-pl) (vp vp-pl))"))


def test_order_independence(structural_grammar):
    rng = random.Random(3)
    tree = combo_tree("np-pl", "vp-sing")
    from probhier.pcfg import tree_rule_counts
    logs = [math.log(structural_grammar.probs[rule]) * n
            for rule, n in tree_rule_counts(tree).items()]
    reference = math.fsum(logs)
    for _ in range(10):
        rng.shuffle(logs)
        assert math.fsum(logs) == reference
    assert ph.log_tree_probability(structural_grammar, tree) == reference


def test_count_training(full_grammar, treebank5):
    fit = ph.train_pcfg(full_grammar, treebank5, estimator="count")
    assert fit.params[("np", ("np-sing",))] == 0.4
    assert fit.params[("np", ("np-pl",))] == 0.6
    assert fit.params[("vp", ("vp-sing",))] == 0.4
    assert fit.params[("s", ("np", "vp"))] == 1.0
    assert fit.params[("np-sing", ("car",))] == 0.5
    assert fit.params[("np-sing", ("bike",))] == 0.0
    trained = full_grammar.with_probs(fit.params)
    trained.validate_probs()


def test_count_training_unexpanded_keeps_init(full_grammar):
    bank = [ph.parse_tree("(s (np np-sing) (vp vp-pl))")]
    fit = ph.train_pcfg(full_grammar, bank, estimator="count")
    assert fit.params[("np-sing", ("car",))] == 0.2  # uniform init, 5 words


def test_count_training_uniform_when_each_rule_once(structural_grammar):
    bank = [combo_tree(n, v) for n in ("np-sing", "np-pl")
            for v in ("vp-sing", "vp-pl")]
    fit = ph.train_pcfg(structural_grammar, bank, estimator="count")
    assert fit.params[("np", ("np-sing",))] == 0.5
    assert fit.params[("vp", ("vp-pl",))] == 0.5


def test_conditional_training_closed_form(structural_grammar):
    agree = [combo_tree("np-sing", "vp-sing"), combo_tree("np-pl", "vp-pl")]
    bank = [agree[0]] * 2 + [agree[1]] * 3
    fit = ph.train_pcfg(structural_grammar, bank, estimator="conditional", support=agree)
    assert fit.converged
    assert fit.params[("np", ("np-sing",))] == pytest.approx(CLOSED_FORM,
                                                             abs=5e-4)
    assert fit.params[("vp", ("vp-sing",))] == pytest.approx(CLOSED_FORM,
                                                             abs=5e-4)
    for earlier, later in zip(fit.objectives, fit.objectives[1:]):
        assert later >= earlier


def test_conditional_training_needs_support(structural_grammar):
    with pytest.raises(ModelError, match="support"):
        ph.train_pcfg(structural_grammar, [combo_tree("np-pl", "vp-pl")],
                      estimator="conditional")


def test_conditional_treebank_outside_support(structural_grammar):
    agree = [combo_tree("np-sing", "vp-sing")]
    with pytest.raises(ModelError, match="support"):
        ph.train_pcfg(structural_grammar, [combo_tree("np-pl", "vp-pl")],
                      estimator="conditional", support=agree)


def test_train_rejects_empty_treebank(full_grammar):
    with pytest.raises(ModelError, match="empty"):
        ph.train_pcfg(full_grammar, [])


def test_train_rejects_invalid_tree(full_grammar):
    with pytest.raises(ModelError, match="no rule covers"):
        ph.train_pcfg(full_grammar, [ph.parse_tree("(s (np car) (vp vp-pl))")])


def test_train_rejects_unknown_estimator(structural_grammar):
    with pytest.raises(ModelError, match="estimator"):
        ph.train_pcfg(structural_grammar, [combo_tree("np-pl", "vp-pl")],
                      estimator="magic")
