import pytest
from fractions import Fraction as F

from lmt.costs import CostKind
from lmt.errors import DuplicateId, MissingBounds, ParseError
from lmt.files import (
    parse_data,
    parse_model,
    parse_problem,
    print_data,
    print_model,
    print_predictions,
    print_problem,
)
from lmt.formulas import Sort
from lmt.learning import Example, ModelWeights

GOOD = """
; a tiny instance
(declare-bool p)
(declare-real x 0 10)
(declare-real y -5 5)
(assert (=> p (> x 3)))
(assert-soft (< (+ x y) 5) :id f1 :weight 1 :cost linear)
(assert-soft (not p) :id f2 :weight 3/2 :cost bool :scale 2)
"""


class TestParseProblem:
    def test_good_instance(self):
        prob = parse_problem(GOOD)
        assert [v.name for v in prob.variables] == ["p", "x", "y"]
        assert prob.variables[0].sort is Sort.BOOL
        assert prob.boxes[prob.variables[1]] == (F(0), F(10))
        assert len(prob.hard) == 1 and len(prob.soft) == 2
        assert prob.soft[0].kind == CostKind.LINEAR
        assert prob.soft[1].weight == F(3, 2) and prob.soft[1].scale == F(2)

    def test_negative_weight_rejected(self):
        text = "(declare-bool p)(assert-soft p :id f :weight -1 :cost bool)"
        with pytest.raises(ParseError):
            parse_problem(text)

    def test_missing_bounds(self):
        with pytest.raises(MissingBounds):
            parse_problem("(declare-real x 0)")

    def test_duplicate_variable(self):
        with pytest.raises(DuplicateId):
            parse_problem("(declare-bool p)(declare-bool p)")

    def test_duplicate_soft_id(self):
        text = """(declare-bool p)
(assert-soft p :id f :weight 1 :cost bool)
(assert-soft (not p) :id f :weight 1 :cost bool)"""
        with pytest.raises(DuplicateId):
            parse_problem(text)

    def test_undeclared_variable(self):
        with pytest.raises(ParseError) as e:
            parse_problem("(assert (> x 3))")
        assert e.value.line == 1

    def test_error_position(self):
        text = "(declare-bool p)\n(assert (nonsense p))"
        with pytest.raises(ParseError) as e:
            parse_problem(text)
        assert e.value.line == 2

    def test_number_formats(self):
        prob = parse_problem(
            "(declare-real x -2.5 7/2)(assert (<= x 1.25))"
        )
        assert prob.boxes[prob.variables[0]] == (F(-5, 2), F(7, 2))
        atom = prob.hard[0]
        assert atom.rhs == F(5, 4)

    def test_linear_cost_fragment_enforced(self):
        text = "(declare-bool p)(assert-soft p :id f :weight 1 :cost linear)"
        with pytest.raises(ParseError):
            parse_problem(text)

    def test_nonlinear_product_rejected(self):
        text = "(declare-real x 0 1)(declare-real y 0 1)(assert (< (* x y) 1))"
        with pytest.raises(ParseError):
            parse_problem(text)

    def test_comments_ignored(self):
        prob = parse_problem("; comment only\n(declare-bool p) ; trailing\n")
        assert len(prob.variables) == 1


class TestRoundTrip:
    def test_problem_round_trip(self):
        prob = parse_problem(GOOD)
        text = print_problem(prob)
        again = parse_problem(text)
        assert again.variables == prob.variables
        assert again.boxes == prob.boxes
        assert again.hard == prob.hard
        assert again.soft == prob.soft
        assert print_problem(again) == text  # printing reaches a fixpoint

    def test_data_round_trip(self):
        prob = parse_problem(GOOD)
        p, x, y = prob.variables
        examples = [
            Example({p: True, x: F(7, 2)}, {y: F(-1, 4)}),
            Example({p: False, x: F(0)}, {y: F(5)}),
        ]
        text = print_data(examples, prob)
        again = parse_data(text, prob)
        assert [(e.evidence, e.gold) for e in again] == [
            (e.evidence, e.gold) for e in examples
        ]

    def test_values_always_exact(self):
        prob = parse_problem("(declare-real x 0 10)")
        (x,) = prob.variables
        text = print_data([Example({}, {x: F(1, 3)})], prob)
        assert "1/3" in text and "0.33" not in text

    def test_predictions_format(self):
        prob = parse_problem(GOOD)
        p, x, y = prob.variables
        text = print_predictions([{y: F(2)}, {y: F(-1, 2)}], prob)
        assert text.splitlines() == [
            "(prediction (= y 2))",
            "(prediction (= y -1/2))",
        ]

    def test_data_sort_mismatch(self):
        prob = parse_problem(GOOD)
        with pytest.raises(ParseError):
            parse_data("(example (given (= p 3)) (gold (= y 0)))", prob)

    def test_random_problem_round_trips(self):
        import random
        from oracles import random_maxsmt_problem, random_omt_problem

        rng = random.Random(321)
        for _ in range(60):
            prob = random_maxsmt_problem(rng) if rng.random() < 0.5 else random_omt_problem(rng)
            text = print_problem(prob)
            again = parse_problem(text)
            assert again.variables == prob.variables
            assert again.boxes == prob.boxes
            assert again.hard == prob.hard
            assert again.soft == prob.soft
            assert print_problem(again) == text


class TestModelFiles:
    def test_round_trip(self):
        model = ModelWeights({"b": F(1, 3), "a": F(2)}, C=F(100), eps=F(1, 1000))
        text = print_model(model)
        assert text.splitlines()[0] == "#C=100"
        assert text.splitlines()[1] == "#eps=1/1000"
        # ids come out sorted
        assert text.splitlines()[2].startswith("a ")
        again = parse_model(text)
        assert again.weights == model.weights
        assert again.C == F(100) and again.eps == F(1, 1000)

    def test_rejects_negative_weight(self):
        with pytest.raises(ParseError):
            parse_model("#C=1\n#eps=1\nf -2\n")

    def test_requires_headers(self):
        with pytest.raises(ParseError):
            parse_model("f 1\n")

    def test_duplicate_id(self):
        with pytest.raises(DuplicateId):
            parse_model("#C=1\n#eps=1\nf 1\nf 2\n")
