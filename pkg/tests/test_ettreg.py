import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from plett.ettreg import (ConfigError, PolicyConfig, PolicyKind, cett, combine_min,
                          default_lambdas, refine_arbitrary, refine_pair, regulate,
                          rho_ett_atom, worst_case_gains, split_from_gains, validate,
                          wc_ett_atom, wc_gains, wc_refine_arbitrary)
from plett.interval import Interval, point
from plett.logic import (And, Comparator, LinearAtom, Or, atom_robustness,
                         atom_robustness_interval, atoms, parse, robustness_interval)

import oracles
from strategies import STATES, boxes, formulas, states

AFFINE = parse("2*x1 + 4*x2 > 9 @rhomax(10) @signals(x1, x2)")
# x1 ranges over [0, 1.5] and x2 over [-1000, 3000], so the atoms peak at 1 and 2000
DISJ = parse("(x1 < 1 @rhomax(1) @signals(x1)) || (x2 > 1000 @rhomax(2000) @signals(x2))")
DISJ_X = {"x1": 1.2, "x2": 1500.0}


def rho_cfg(eps, kind="RHO_ETT"):
    return PolicyConfig(kind, eps=eps)


def test_rho_ett_atom_examples():
    assert rho_ett_atom(AFFINE, {"x1": 3, "x2": 1}, {"x1": 3, "x2": 3}) == {"x1": 1 / 3, "x2": 1 / 3}
    assert rho_ett_atom(DISJ.right, DISJ_X, {"x2": 5}) == {"x2": 100}
    assert rho_ett_atom(DISJ.left, DISJ_X, {"x1": 5}) == {"x1": 0}
    with pytest.raises(ConfigError):
        rho_ett_atom(AFFINE, {"x1": 3, "x2": 1}, {"x1": 3})


def test_refine_pair_disjunction_example():
    d = refine_pair(DISJ, DISJ_X, rho_cfg({"x1": 5, "x2": 5}))
    assert d["x1"] == pytest.approx(0.05) and d["x2"] == pytest.approx(100)


def test_refine_pair_and_and_equal_zeta():
    a = parse("x1 > 0 @rhomax(10) @signals(x1, x2)")
    b = parse("x2 > 1 @rhomax(10) @signals(x2)")
    x = {"x1": 4.0, "x2": 3.0}
    cfg = rho_cfg({"x1": 2, "x2": 4})
    got = refine_pair(And(a, b), x, cfg)
    want = combine_min([rho_ett_atom(a, x, {"x1": 2, "x2": 4}), rho_ett_atom(b, x, {"x2": 4})])
    assert got == want
    x = {"x1": 2.0, "x2": 3.0}  # both atoms at rho 2
    assert refine_pair(Or(a, b), x, cfg) == combine_min(
        [rho_ett_atom(a, x, {"x1": 2, "x2": 4}), rho_ett_atom(b, x, {"x2": 4})])
    with pytest.raises(ValueError):
        refine_pair(a, x, cfg)


def test_refine_arbitrary_single_atom_and_pair():
    x = {"x1": 3, "x2": 1}
    cfg = rho_cfg({"x1": 3, "x2": 3})
    assert refine_arbitrary(AFFINE, x, cfg) == rho_ett_atom(AFFINE, x, {"x1": 3, "x2": 3})
    cfg = rho_cfg({"x1": 5, "x2": 5})
    assert refine_arbitrary(DISJ, DISJ_X, cfg) == refine_pair(DISJ, DISJ_X, cfg)


def _random_atom(rng, name):
    chosen = rng.sample(STATES, rng.randint(1, 3))
    return LinearAtom(tuple((s, rng.choice([-1, 1]) * rng.uniform(0.2, 4)) for s in chosen),
                      rng.uniform(-5, 5), rng.choice(list(Comparator)), 0.0,
                      rng.uniform(1, 30), frozenset(chosen), name)


def test_pair_and_tree_refinement_agree():
    rng = random.Random(5)
    for i in range(1000):
        phi = rng.choice([And, Or])(_random_atom(rng, "a"), _random_atom(rng, "b"))
        eps = {s: rng.uniform(0.5, 20) for s in STATES}
        x = {s: rng.uniform(-5, 5) for s in STATES}
        p, q = refine_pair(phi, x, rho_cfg(eps)), refine_arbitrary(phi, x, rho_cfg(eps))
        assert p.keys() == q.keys()
        for s in p:
            assert p[s] == pytest.approx(q[s], rel=1e-12, abs=1e-12)


def test_six_atom_tree_matches_reference():
    rng = random.Random(7)
    for _ in range(300):
        a = [_random_atom(rng, f"p{i}") for i in range(1, 7)]
        phi = Or(Or(And(a[0], a[1]), a[2]), And(a[3], And(a[4], a[5])))
        x = {s: rng.uniform(-5, 5) for s in STATES}
        eps = {s: rng.uniform(0.5, 20) for s in STATES}
        got = refine_arbitrary(phi, x, rho_cfg(eps))
        want = oracles.tree_refinement_reference(phi, lambda at: oracles.rho(at, x), lambda at, s: eps[s])
        assert got.keys() == want.keys()
        for s in got:
            assert got[s] == pytest.approx(want[s], rel=1e-12, abs=1e-12)


@given(formulas(max_leaves=10), states, st.fixed_dictionaries({s: st.floats(0.1, 50) for s in STATES}))
def test_refine_arbitrary_matches_reference(phi, x, eps):
    got = refine_arbitrary(phi, x, rho_cfg(eps))
    want = oracles.tree_refinement_reference(phi, lambda at: oracles.rho(at, x), lambda at, s: eps[s])
    assert got.keys() == want.keys()
    for s in got:
        assert got[s] == pytest.approx(want[s], rel=1e-9, abs=1e-12)


@given(formulas(max_leaves=10), states, st.fixed_dictionaries({s: st.floats(0.1, 50) for s in STATES}))
def test_refinement_never_below_own_threshold(phi, x, eps):
    got = refine_arbitrary(phi, x, rho_cfg(eps))
    for a in atoms(phi):
        for s, d in rho_ett_atom(a, x, eps).items():
            # the refined value is a min over atoms, so it can only drop via another atom
            own = [max(atom_robustness(b, x), 0) / eps[s] for b in atoms(phi) if s in b.signals]
            assert got[s] >= min(own) - 1e-12


def test_gain_synthesis_epsilon_examples():
    assert worst_case_gains(AFFINE, {"x1": 2, "x2": 2}, 1) == {"x1": 8, "x2": 16}
    got = worst_case_gains(AFFINE, {"x1": 4 / 3, "x2": 4}, 2)
    assert got["x1"] == pytest.approx(2 * 2 * (4 / 3) * 2) and got["x2"] == pytest.approx(2 * 4 * 4 * 2)
    single = parse("-3*x1 > 0 @rhomax(1) @signals(x1)")
    assert worst_case_gains(single, {"x1": 1}, 2.5) == {"x1": 15}
    assert default_lambdas(AFFINE) == {"x1": 2, "x2": 2}


@pytest.mark.parametrize("lambdas, eps_rho", [({"x1": 2, "x2": 3}, 1), ({"x1": 2, "x2": 2}, 0.5),
                                              ({"x1": 1}, 1), ({"x1": -2, "x2": 2 / 3}, 1)])
def test_gain_synthesis_constraints(lambdas, eps_rho):
    with pytest.raises(ConfigError):
        worst_case_gains(AFFINE, lambdas, eps_rho)


def test_gain_synthesis_needs_measured_states():
    with pytest.raises(ConfigError, match="not directly measured"):
        worst_case_gains(parse("x1 + x2 > 0 @rhomax(1) @signals(x1)"), {"x1": 1}, 1)
    with pytest.raises(ConfigError, match="do not measure"):
        worst_case_gains(parse("x1 > 0 @rhomax(1) @signals(x1, x2)"), {"x1": 2, "x2": 2}, 1)


def test_gain_synthesis_round_trip():
    lam, er = split_from_gains(AFFINE, {"x1": 8, "x2": 16})
    assert er == pytest.approx(1) and lam == pytest.approx({"x1": 2, "x2": 2})


def test_wc_ett_atom_examples():
    pt = {"x1": point(3), "x2": point(1)}
    assert wc_ett_atom(AFFINE, pt, {"x1": 2, "x2": 2}, 1) == {"x1": 1 / 8, "x2": 1 / 16}
    assert wc_ett_atom(AFFINE, pt) == {"x1": 1 / 8, "x2": 1 / 16}
    box = {"x1": Interval(2, 3), "x2": Interval(0, 1)}
    assert wc_ett_atom(AFFINE, box) == {"x1": 0, "x2": 0}


def _width_after(atom, center, delta):
    box = {s: Interval(center[s] - delta.get(s, 0), center[s] + delta.get(s, 0)) for s in center}
    return atom_robustness_interval(atom, box).width


@given(st.floats(-5, 5).filter(lambda c: abs(c) > 0.01), st.floats(-5, 5).filter(lambda c: abs(c) > 0.01),
       st.floats(0.1, 10), st.floats(1, 8), states, st.floats(0, 20))
def test_width_identity(a1, a2, lam1, eps_rho, x, rho_lo):
    lam1 = 1 + lam1  # > 1 so that the partner lambda is positive
    lambdas = {"x1": lam1, "x2": lam1 / (lam1 - 1)}
    atom = LinearAtom((("x1", a1), ("x2", a2)), 0.0, Comparator.GT, 0.0, 1.0, frozenset({"x1", "x2"}))
    center = {"x1": x["x1"], "x2": x["x2"]}
    # choose the threshold so that the lower bound on a point box is rho_lo
    atom = LinearAtom(atom.coefficients, a1 * x["x1"] + a2 * x["x2"] - rho_lo, Comparator.GT,
                      0.0, 1.0, atom.signals)
    pt = {s: point(v) for s, v in center.items()}
    lo = atom_robustness_interval(atom, pt).lo
    delta = wc_ett_atom(atom, pt, lambdas, eps_rho)
    assert _width_after(atom, center, delta) == pytest.approx(max(lo, 0) / eps_rho, rel=1e-9, abs=1e-9)


def test_width_identity_example():
    delta = wc_ett_atom(AFFINE, {"x1": point(3), "x2": point(1)})
    assert _width_after(AFFINE, {"x1": 3, "x2": 1}, delta) == pytest.approx(1.0)


def test_wc_refine_single_atom_and_points():
    cfg = PolicyConfig("RHO_ETT_WC", eps_rho=1)
    pt = {"x1": point(3), "x2": point(1)}
    assert wc_refine_arbitrary(AFFINE, pt, cfg) == wc_ett_atom(AFFINE, pt)


def test_wc_or_with_nonpositive_lower_bound():
    # both children nonpositive: beta is 0 and nothing is relaxed
    phi = parse("x1 > 5 @rhomax(10) @signals(x1) || x2 > 5 @rhomax(10) @signals(x2)")
    cfg = PolicyConfig("RHO_ETT_WC", eps_rho=1)
    box = {"x1": Interval(0, 2), "x2": Interval(1, 4)}
    assert robustness_interval(phi, box).lo <= 0
    assert wc_refine_arbitrary(phi, box, cfg) == {"x1": 0, "x2": 0}


@given(formulas(max_leaves=8), boxes(), st.floats(1, 5))
def test_wc_refine_matches_reference(phi, box, eps_rho):
    phi = _measured(phi)
    cfg = PolicyConfig("RHO_ETT_WC", eps_rho=eps_rho)
    gains = wc_gains(phi, cfg)
    got = wc_refine_arbitrary(phi, box, cfg)

    def lower(at):
        lo, _ = oracles.grid_bounds(at, {s: (iv.lo, iv.hi) for s, iv in box.items()}, n=2)
        return lo

    def eps(at, s):
        return 2 * abs(at.coef[s]) * len(at.signals) * eps_rho

    want = oracles.tree_refinement_reference(phi, lower, eps)
    assert got.keys() == want.keys()
    for s in got:
        assert got[s] == pytest.approx(want[s], rel=1e-9, abs=1e-9)
    assert all(gains[id(a)] == {s: eps(a, s) for s in a.signals} for a in atoms(phi))


def _measured(phi):
    # bind every atom to exactly the states it mentions
    if isinstance(phi, LinearAtom):
        return LinearAtom(phi.coefficients, phi.threshold, phi.comparator, phi.offset,
                          phi.rho_max, frozenset(s for s, _ in phi.coefficients), phi.name)
    return type(phi)(_measured(phi.left), _measured(phi.right))


def test_combine_min():
    assert combine_min([{"x": 0.5}, {"x": 0.3}]) == {"x": 0.3}
    assert combine_min([{"x": math.inf}, {"x": 0.3}]) == {"x": 0.3}
    assert combine_min([{"x": math.inf}, {"y": 1.0}]) == {"x": math.inf, "y": 1.0}
    with pytest.raises(ValueError):
        combine_min([])


@given(st.lists(st.fixed_dictionaries({s: st.floats(0, 10) for s in STATES}), min_size=1, max_size=5),
       states)
def test_min_never_widens(assignments, x):
    atom = LinearAtom(tuple((s, 1.5) for s in STATES), 0.0, Comparator.GT, 0.0, 1.0, frozenset(STATES))
    combined = combine_min(assignments)
    for a in assignments:
        assert _width_after(atom, x, combined) <= _width_after(atom, x, a) + 1e-9


def test_cett():
    cfg = PolicyConfig("CETT", delta={"v": 0.16, "x_delta": 0.5})
    assert cett(cfg) == {"v": 0.16, "x_delta": 0.5} == cett(cfg)
    ml = PolicyConfig("CETT", delta={"v": 0.16, "x_delta": 0.5, "x_lop": 0.5, "x_lof": 2.0})
    assert cett(ml)["x_lof"] == 2.0
    with pytest.raises(ConfigError):
        PolicyConfig("CETT", delta={"v": -0.1})
    with pytest.raises(ConfigError):
        cett(PolicyConfig("TT"))


def test_policy_config_errors_and_round_trip():
    with pytest.raises(ConfigError):
        PolicyConfig.from_dict({"kind": "TT", "bogus": 1})
    with pytest.raises(ValueError):
        PolicyConfig("NOPE")
    with pytest.raises(ConfigError):
        PolicyConfig("RHO_ETT", eps={"v": 0})
    with pytest.raises(ConfigError):
        PolicyConfig("TT", eta=-1)
    cfg = PolicyConfig("RHO_ETT_WC", lambdas={"v": 1.5, "x_delta": 3}, eps_rho=2)
    assert PolicyConfig.from_dict(cfg.to_dict()) == cfg


def test_regulate_dispatch():
    x = {"x1": 3, "x2": 1}
    assert regulate(PolicyConfig("TT"), [AFFINE], x) == {"x1": 0, "x2": 0}
    assert regulate(PolicyConfig("RHO_ETT", eps={"x1": 3, "x2": 3}), [AFFINE], x) == {"x1": 1 / 3, "x2": 1 / 3}
    wc = PolicyConfig("RHO_ETT_WC", eps_rho=1)
    with pytest.raises(ValueError):
        regulate(wc, [AFFINE], x)
    pt = {"x1": point(3), "x2": point(1)}
    assert regulate(wc, [AFFINE], x, pt) == {"x1": 1 / 8, "x2": 1 / 16}
    assert regulate(wc, [AFFINE], x, pt, {id(AFFINE): wc_gains(AFFINE, wc)}) == {"x1": 1 / 8, "x2": 1 / 16}


def test_validate():
    with pytest.raises(ConfigError):
        validate(PolicyConfig("RHO_ETT", eps={"x1": 1}), [AFFINE])
    with pytest.raises(ConfigError):
        validate(PolicyConfig("CETT", delta={"x1": 1}), [AFFINE])
    validate(PolicyConfig("RHO_ETT_WC", eps_rho=1), [AFFINE])


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0.1, 10))
def test_threshold_monotone_and_clamped(r1, r2, eps):
    atom = parse("x1 > 0 @rhomax(1) @signals(x1)")
    d1 = rho_ett_atom(atom, {"x1": r1}, {"x1": eps})["x1"]
    d2 = rho_ett_atom(atom, {"x1": r2}, {"x1": eps})["x1"]
    if r1 <= r2:
        assert d1 <= d2
    if r1 <= 0:
        assert d1 == 0
    else:
        assert d1 == pytest.approx(r1 / eps)


def test_threshold_vanishes_with_robustness():
    atom = parse("x1 > 0 @rhomax(1) @signals(x1)")
    vals = [rho_ett_atom(atom, {"x1": 10.0 ** -k}, {"x1": 2})["x1"] for k in range(1, 12)]
    assert vals == sorted(vals, reverse=True) and vals[-1] < 1e-11
