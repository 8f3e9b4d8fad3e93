import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plett.interval import Interval, point
from plett.logic import (And, Comparator, LinearAtom, Or, ParseError, atoms, format_formula,
                         normalized_robustness, normalized_robustness_rec, parse,
                         replace_or_with_and, robustness, robustness_interval, signals_of,
                         wc_normalized_robustness, wc_normalized_robustness_rec)
from plett.sim.config import default_properties
from plett.sim.idm import IdmParams

import oracles
from strategies import STATES, boxes, formulas, linear_atoms, states

AFFINE = "2*x1 + 4*x2 > 9 @rhomax(10) @signals(x1, x2)"
DISJ = "(x1 < 1 @rhomax(2000) @signals(x1)) || (x2 > 1000 @rhomax(2000) @signals(x2))"


def test_parse_affine_atom():
    a = parse("2*x1 + 4*x2 > 9", rho_max=1)
    assert isinstance(a, LinearAtom)
    assert a.coef == {"x1": 2, "x2": 4} and a.threshold == 9 and a.comparator is Comparator.GT


def test_parse_negation_flips_comparator():
    a = parse("!(x1 > 1)", rho_max=1)
    assert isinstance(a, LinearAtom) and a.comparator is Comparator.LT and a.threshold == 1


def test_parse_disjunction():
    phi = parse("(x1 < 1) || (x2 > 1000)", rho_max=1)
    assert isinstance(phi, Or)
    assert isinstance(phi.left, LinearAtom) and isinstance(phi.right, LinearAtom)


def test_parse_precedence_and_de_morgan():
    phi = parse("x1 > 0 || x2 > 0 && x3 > 0", rho_max=1)
    assert isinstance(phi, Or) and isinstance(phi.right, And)
    neg = parse("!(x1 > 0 && x2 > 0)", rho_max=1)
    assert isinstance(neg, Or)
    assert all(a.comparator is Comparator.LT for a in atoms(neg))


def test_parse_annotations_and_both_sides():
    a = parse("x_delta - 2*v > 0.5 + v @rhomax(60) @signals(v, x_delta) @id(phi_a)")
    assert a.coef == {"x_delta": 1.0, "v": -3.0}
    assert a.threshold == 0.5 and a.rho_max == 60 and a.name == "phi_a"
    assert a.signals == {"v", "x_delta"}


def test_parse_errors_report_position():
    with pytest.raises(ParseError) as info:
        parse("x1 > 1 &&\n  (x2 >", rho_max=1)
    assert info.value.line == 2
    with pytest.raises(ParseError, match="unknown state"):
        parse("x9 > 1", states=["x1"], rho_max=1)
    with pytest.raises(ParseError, match="rhomax"):
        parse("x1 > 1")
    with pytest.raises(ParseError):
        parse("x1 > 1 @rhomax(0)")
    with pytest.raises(ParseError):
        parse("x1 >> 1", rho_max=1)


def test_robustness_examples():
    assert robustness(parse(AFFINE), {"x1": 3, "x2": 1}) == 1
    assert robustness(parse("x1 < 1", rho_max=1), {"x1": 1.2}) == pytest.approx(-0.2)
    a, b = parse("x1 > 0", rho_max=1), parse("x2 > 0", rho_max=1)
    x = {"x1": 2.0, "x2": -1.0}
    assert robustness(Or(a, b), x) == 2.0 and robustness(And(a, b), x) == -1.0


def test_robustness_missing_state():
    with pytest.raises(KeyError, match="x2"):
        robustness(parse(AFFINE), {"x1": 3})


def test_robustness_interval_examples():
    phi = parse(AFFINE)
    r = robustness_interval(phi, {"x1": Interval(8 / 3, 10 / 3), "x2": Interval(2 / 3, 4 / 3)})
    assert (r.lo, r.hi) == pytest.approx((-1, 3), abs=1e-9)
    d = robustness_interval(phi, {"x1": point(3), "x2": point(1)})
    assert d.lo == d.hi == 1


def test_normalized_examples():
    phi = parse(DISJ)
    x = {"x1": 1.2, "x2": 1500}
    assert normalized_robustness(phi.right, x) == 0.25
    assert normalized_robustness(phi.left, x) == 0
    assert normalized_robustness(phi.right, {"x1": 0, "x2": 3000}) == 1
    assert normalized_robustness_rec(phi, x) == 0.25
    assert normalized_robustness_rec(phi.right, x) == normalized_robustness(phi.right, x)


def test_normalized_not_clamped_above():
    a = parse("x1 > 0 @rhomax(2)")
    assert normalized_robustness(a, {"x1": 5}) == 2.5


def test_wc_normalized_examples():
    a = parse(AFFINE)
    assert wc_normalized_robustness(a, {"x1": point(3), "x2": point(1)}) == pytest.approx(1 / 10)
    box = {"x1": Interval(8 / 3, 10 / 3), "x2": Interval(2 / 3, 4 / 3)}
    assert wc_normalized_robustness(a, box) == 0
    assert wc_normalized_robustness_rec(a, box) == wc_normalized_robustness(a, box)


def test_signals_of_case_study_properties():
    idm = IdmParams()
    phi_a = parse(default_properties("single_lane", idm, 0.0)[0], rho_max=60)
    assert signals_of(phi_a) == {"v", "x_delta"}
    phi_b = parse(default_properties("multilane_critical", idm, 0.0)[0], rho_max=60)
    assert signals_of(phi_b) == {"v", "x_delta", "x_lop", "x_lof"}
    assert signals_of(parse("x1 > 0", rho_max=1)) == set()


def test_replace_or_with_and():
    phi = parse("x1 > 0 || (x2 > 0 && x3 > 0)", rho_max=1)
    q = replace_or_with_and(phi)
    assert isinstance(q, And) and isinstance(q.right, And)
    assert list(atoms(q)) == list(atoms(phi))


@given(formulas(), states)
def test_robustness_matches_oracle(phi, x):
    assert robustness(phi, x) == pytest.approx(oracles.rho(phi, x), abs=1e-9)


def test_normalized_sign_agreement_bulk():
    rng = random.Random(3)

    def rand_formula(depth):
        if depth == 0 or rng.random() < 0.3:
            k = rng.randint(1, 3)
            chosen = rng.sample(STATES, k)
            return LinearAtom(tuple((s, rng.uniform(-5, 5)) for s in chosen), rng.uniform(-10, 10),
                              rng.choice(list(Comparator)), 0.0, rng.uniform(0.1, 50))
        cls = rng.choice([And, Or])
        return cls(rand_formula(depth - 1), rand_formula(depth - 1))

    for _ in range(10_000):
        phi = rand_formula(4)
        x = {s: rng.uniform(-10, 10) for s in STATES}
        assert (normalized_robustness_rec(phi, x) > 0) == (robustness(phi, x) > 0)


@given(formulas(), states)
def test_normalized_sign_agreement_property(phi, x):
    assert (normalized_robustness_rec(phi, x) > 0) == (robustness(phi, x) > 0)


@given(formulas(), boxes())
def test_wc_zero_iff_lower_bound_nonpositive(phi, box):
    assert (wc_normalized_robustness_rec(phi, box) == 0) == (robustness_interval(phi, box).lo <= 0)


@given(linear_atoms(), boxes())
def test_interval_bounds_match_grid_oracle(atom, box):
    lo, hi = oracles.grid_bounds(atom, {s: (iv.lo, iv.hi) for s, iv in box.items()})
    r = robustness_interval(atom, box)
    # an affine function attains its extremes at box corners, which are on the grid
    assert r.lo == pytest.approx(lo, abs=1e-9) and r.hi == pytest.approx(hi, abs=1e-9)


@given(formulas(), boxes(), st.randoms(use_true_random=False))
def test_interval_soundness(phi, box, rnd):
    r = robustness_interval(phi, box)
    for _ in range(20):
        x = {s: rnd.uniform(iv.lo, iv.hi) for s, iv in box.items()}
        v = robustness(phi, x)
        assert r.lo - 1e-9 <= v <= r.hi + 1e-9


@given(formulas(), boxes(), st.floats(0, 3))
def test_monotone_widening(phi, box, grow):
    wider = {s: Interval(iv.lo - grow, iv.hi + grow) for s, iv in box.items()}
    a, b = robustness_interval(phi, box), robustness_interval(phi, wider)
    assert b.lo <= a.lo + 1e-12 and b.hi >= a.hi - 1e-12


@given(formulas(), states)
def test_wc_collapses_on_point_boxes(phi, x):
    box = {s: point(v) for s, v in x.items()}
    assert wc_normalized_robustness_rec(phi, box) == pytest.approx(normalized_robustness_rec(phi, x))


@given(formulas())
def test_format_parse_round_trip(phi):
    assert parse(format_formula(phi)) == phi


def test_evaluation_is_reentrant():
    phi = parse(DISJ)
    x = {"x1": 1.2, "x2": 1500}
    assert [robustness(phi, x) for _ in range(3)] == [500.0] * 3
