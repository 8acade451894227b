from collections import Counter
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from deltaq.expr import BOT, TOP, ProbChoice, contains_bottom, parse, pretty
from deltaq.numeric import Grid
from deltaq.rewrite import (InvalidPath, NotExtractable, RewriteTrace, RuleMismatch,
                            UnknownRule, accumulate_failure, apply_at, auxiliary_rules,
                            distribute_choice, extract_failure, get_rule, normalize,
                            properise, reassoc_left, reassoc_right, rule_catalog, subtree)
from deltaq.semantics import BasicAssignment, DistributionSpec, evaluate

from helpers import (assert_dq_close, random_dq_assignment, random_expr,
                     random_spec_assignment, rule_instance)
from witnesses import REFUTATIONS

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
F = Fraction


def test_catalog_shape():
    rules = rule_catalog()
    assert len(rules) == 25
    assert len({r.id for r in rules}) == 25
    groups = Counter(r.group for r in rules)
    assert groups == {"constant": 14, "reassociation": 2, "distributivity": 6,
                      "failure-accumulation": 3}
    assert not {r.id for r in rules} & {r.id for r in auxiliary_rules()}


def test_rule_laws_are_readable():
    assert get_rule("seq-bot").law == "o ->- bot = bot"
    assert "p' = pq" in get_rule("choice-reassoc-right").law


def test_unknown_rule():
    with pytest.raises(UnknownRule):
        get_rule("no-such-rule")


@pytest.mark.parametrize("rule,text,expected", [
    ("seq-bot", "a ->- bot", "bot"),
    ("bot-seq", "bot ->- a", "bot"),
    ("top-seq", "top ->- a", "a"),
    ("seq-top", "(a /\\ b) ->- top", "(a /\\ b)"),
    ("top-atf", "top /\\ a", "a"),
    ("bot-ftf", "bot \\/ a", "a"),
    ("choice-bot-collapse", "bot <1|3> bot", "bot"),
    ("choice-top-collapse", "top <[0.2]> top", "top"),
    ("choice-bot-left-commute", "(a <[0.9]> bot) ->- b", "((a ->- b) <[0.9]> bot)"),
    ("choice-bot-right-commute", "a ->- (b <[0.9]> bot)", "((a ->- b) <[0.9]> bot)"),
    ("choice-top-left-commute", "(a <[0.9]> top) ->- b", "((a ->- b) <[0.9]> b)"),
    ("choice-top-right-commute", "a ->- (b <[0.9]> top)", "((a ->- b) <[0.9]> a)"),
    ("choice-bot-nest", "bot <[0.5]> (bot <[0.5]> a)", "(bot <[0.75]> a)"),
    ("choice-top-renest", "a <[0.5]> (b <[0.5]> top)", "(b <[0.25]> (a <[2/3]> top))"),
    ("choice-reassoc-left", "a <[0.5]> (b <[0.5]> c)", "((a <[2/3]> b) <[0.75]> c)"),
    ("choice-reassoc-right", "(a <[0.5]> b) <[0.5]> c", "(a <[0.25]> (b <[1/3]> c))"),
    ("dist-seq-left", "a ->- (b <[0.3]> c)", "((a ->- b) <[0.3]> (a ->- c))"),
    ("dist-ftf-right", "(a <[0.3]> b) \\/ c", "((a \\/ c) <[0.3]> (b \\/ c))"),
    ("fail-acc-seq", "(a <[0.9]> bot) ->- (b <[0.8]> bot)", "((a ->- b) <[0.72]> bot)"),
    ("fail-acc-atf", "(a <[0.9]> bot) /\\ (b <[0.8]> bot)", "((a /\\ b) <[0.72]> bot)"),
    ("fail-acc-choice", "(a <[0.9]> bot) <[0.5]> (b <[0.8]> bot)",
     "((a <[9/17]> b) <[0.85]> bot)"),
])
def test_rule_examples(rule, text, expected):
    assert pretty(apply_at(parse(text), rule)) == expected


@pytest.mark.parametrize("rule,text", [
    ("seq-bot", "a ->- b"),
    ("choice-top-collapse", "top <[0.5]> bot"),
    ("dist-seq-left", "a /\\ (b <[0.5]> c)"),
    ("fail-acc-seq", "(a <[0.9]> bot) ->- b"),
])
def test_rule_mismatch(rule, text):
    with pytest.raises(RuleMismatch):
        apply_at(parse(text), rule)


def test_reassociation_coefficients():
    assert reassoc_left(0.5, 0.5) == (F(2, 3), F(3, 4))
    assert reassoc_right(0.5, 0.5) == (F(1, 4), F(1, 3))
    with pytest.raises(ValueError):
        reassoc_right(1, 1)
    with pytest.raises(ValueError):
        reassoc_left(0, 0)


def test_degenerate_reassociation_is_a_mismatch():
    with pytest.raises(RuleMismatch):
        apply_at(parse("(a <[1]> b) <[1]> c"), "choice-reassoc-right")


@pytest.mark.parametrize("p,q", [(F(1, 2), F(1, 2)), (F(1, 3), F(4, 5)), (F(9, 10), F(1, 7))])
def test_reassociation_round_trips(p, q):
    e = ProbChoice.with_prob(parse("a"), ProbChoice.with_prob(parse("b"), parse("c"), q), p)
    there = apply_at(e, "choice-reassoc-left")
    assert apply_at(there, "choice-reassoc-right") == e
    assert apply_at(there, "choice-reassoc-left", direction="rtl") == e


def test_renest_is_an_involution():
    e = parse("a <[0.3]> (b <[0.6]> top)")
    once = apply_at(e, "choice-top-renest")
    assert apply_at(once, "choice-top-renest") == e


def test_right_to_left():
    assert pretty(apply_at(parse("(a ->- b) <[0.4]> (a ->- c)"), "dist-seq-left",
                           direction="rtl")) == "(a ->- (b <[0.4]> c))"
    with pytest.raises(RuleMismatch):
        apply_at(parse("bot"), "seq-bot", direction="rtl")


def test_factoring_needs_a_shared_operand():
    with pytest.raises(RuleMismatch):
        apply_at(parse("(a ->- b) <[0.4]> (c ->- d)"), "dist-seq-left", direction="rtl")


def test_paths():
    e = parse("x /\\ (a ->- top)")
    assert pretty(apply_at(e, "seq-top", "R")) == "(x /\\ a)"
    assert subtree(e, "RL") == parse("a")
    assert subtree(e, "root") == e
    with pytest.raises(InvalidPath):
        apply_at(e, "seq-top", "RLL")
    with pytest.raises(InvalidPath):
        apply_at(e, "seq-top", "up")


@pytest.mark.parametrize("text,side,expected", [
    ("a ->- (b <[0.3]> c)", "right", "((a ->- b) <[0.3]> (a ->- c))"),
    ("(b <[0.3]> c) /\\ a", "left", "((b /\\ a) <[0.3]> (c /\\ a))"),
    ("a \\/ (b <[0.3]> c)", None, "((a \\/ b) <[0.3]> (a \\/ c))"),
])
def test_distribute_choice(text, side, expected):
    assert pretty(distribute_choice(parse(text), side)) == expected


def test_distribute_choice_rejects_other_roots():
    with pytest.raises(RuleMismatch):
        distribute_choice(parse("a <[0.5]> b"))


def test_accumulate_failure():
    assert pretty(accumulate_failure(parse("(a <[0.9]> bot) ->- (b <[0.8]> bot)"))) \
        == "((a ->- b) <[0.72]> bot)"
    out = accumulate_failure(parse("(a <[0.9]> bot) <[0.5]> (b <[0.8]> bot)"))
    assert out.left.p_left == F(45, 85) and out.p_left == F(85, 100)
    with pytest.raises(NotExtractable, match="first-to-finish"):
        accumulate_failure(parse("(a <[0.9]> bot) \\/ (b <[0.8]> bot)"))


def test_properise_rewrites_names_and_assignment():
    grid = Grid(0.1, 50)
    asg = BasicAssignment(grid, {"a": DistributionSpec.point(1, success=0.75),
                                 "b": DistributionSpec.point(2)})
    res = properise(parse("a ->- (a /\\ b)"), asg, ["a"])
    assert pretty(res.expr) == "((a <[0.75]> bot) ->- ((a <[0.75]> bot) /\\ b))"
    assert res.properised == [("a", F(1, 4))]
    assert res.assignment.failure_of("a") == 0
    assert_dq_close(evaluate(res.expr, res.assignment), evaluate(parse("a ->- (a /\\ b)"), asg))
    with pytest.raises(ValueError):
        properise(parse("z"), asg, ["z"])
    with pytest.raises(ValueError):
        properise(parse("a"), asg.with_entries(a=DistributionSpec.point(1, success=0)), ["a"])


def test_cache_normal_form_and_exact_failure():
    e = parse((SCENARIOS / "cache_properised.dq").read_text())
    assert pretty(normalize(e)) == ("((c_hit <[190000000000000000/199999999999999999]> "
                                    "(c_miss ->- main)) <[0.999999999999999995]> bot)")
    ext = extract_failure(e)
    assert ext.failure == F(1, 200000000000000000)
    assert ext.trace.replay() == ProbChoice(ext.core, BOT, 1 - ext.failure, ext.failure)


def test_extract_constants():
    assert extract_failure(parse("bot")).failure == 1
    assert extract_failure(parse("bot")).core == TOP
    assert extract_failure(parse("a ->- b")).failure == 0
    with pytest.raises(NotExtractable):
        extract_failure(parse("(a <[0.9]> bot) \\/ b"))


def test_normalize_leaves_trapped_failure():
    out = normalize(parse("(a <[0.9]> (bot ->- c)) \\/ b"))
    assert pretty(out) == "((a <[0.9]> bot) \\/ b)"


def test_trace_text_and_replay():
    e = parse("(top ->- a) ->- (b <[0.5]> bot)")
    trace = RewriteTrace(e)
    out = normalize(e, trace)
    text = trace.to_text()
    assert text.splitlines()[0] == "1: top-seq @ L :: (top ->- a) => a"
    assert trace.final == out
    again = RewriteTrace.from_text(e, text)
    assert again.final == out
    assert len(again.steps) == len(trace.steps)


def test_trace_text_marks_right_to_left():
    e = parse("(a ->- b) <[0.4]> (a ->- c)")
    trace = RewriteTrace(e)
    apply_at(e, "dist-seq-left", "", "rtl", trace)
    assert ":rtl @ root" in trace.to_text()
    assert RewriteTrace.from_text(e, trace.to_text()).final == trace.final


def test_tampered_trace_is_rejected():
    e = parse("top ->- a")
    with pytest.raises(RuleMismatch):
        RewriteTrace.from_text(e, "1: top-seq @ root :: (top ->- a) => b\n")


@pytest.mark.parametrize("rule", rule_catalog() + auxiliary_rules(), ids=lambda r: r.id)
def test_rules_are_sound_on_small_grids(rule):
    rng = np.random.default_rng(abs(hash(rule.id)) % 2**32)
    grid = Grid(0.25, 64)
    directions = ["ltr", "rtl"] if rule.reversible else ["ltr"]
    for direction in directions:
        for _ in range(10):
            before, after = rule_instance(rng, rule, direction)
            for _ in range(3):
                asg = random_dq_assignment(rng, grid)
                assert_dq_close(evaluate(before, asg), evaluate(after, asg))


def test_normalization_is_sound():
    rng = np.random.default_rng(12)
    grid = Grid(0.25, 64)
    for _ in range(150):
        e = random_expr(rng, 4)
        trace = RewriteTrace(e)
        out = normalize(e, trace)
        assert trace.replay() == out
        asg = random_dq_assignment(rng, grid)
        assert_dq_close(evaluate(e, asg), evaluate(out, asg))


def test_extraction_matches_intangible_mass():
    rng = np.random.default_rng(13)
    grid = Grid(0.25, 64)
    checked = 0
    for _ in range(200):
        e = random_expr(rng, 4, constants=0.0)
        asg = random_spec_assignment(rng, grid)
        prop = properise(e, asg, [n for n in asg.names() if asg.failure_of(n) > 0])
        try:
            ext = extract_failure(prop.expr)
        except NotExtractable:
            continue
        checked += 1
        assert not contains_bottom(ext.core)
        assert float(ext.failure) == pytest.approx(evaluate(e, asg).intangible, abs=1e-12)
    assert checked > 50


@pytest.mark.parametrize("ref", REFUTATIONS, ids=lambda r: r.name)
def test_refuted_laws_are_not_in_the_catalog(ref):
    for rule in rule_catalog() + auxiliary_rules():
        for src, dst in ((ref.lhs, ref.rhs), (ref.rhs, ref.lhs)):
            for direction in (["ltr", "rtl"] if rule.reversible else ["ltr"]):
                try:
                    out, _ = rule.apply(src, direction)
                except RuleMismatch:
                    continue
                assert out != dst, f"{rule.id} proves a refuted law"


def test_top_instance_cannot_separate_ftf_over_seq():
    ref = next(r for r in REFUTATIONS if r.name == "ftf-over-seq")
    asg = ref.assignment.with_entries(o2=DistributionSpec.point(0), o3=DistributionSpec.point(0))
    assert_dq_close(evaluate(ref.lhs, asg), evaluate(ref.rhs, asg))
