import math

import numpy as np
import pytest

from tflm import spn as spnlib
from tflm.errors import (
    CycleDetected,
    DomainMismatch,
    IncompleteSum,
    NonDecomposableProduct,
    NonPositiveWeight,
    QueryInEvidence,
    SpnError,
)
from tflm.spn import (
    Bernoulli,
    Categorical,
    Gaussian,
    SpnBuilder,
    SpnGraph,
    all_marginals,
    log_evidence,
    log_partition,
    map_state,
    marginal_posterior,
    validate_spn,
)

from oracles import (
    brute_evidence,
    brute_map_score,
    random_spn,
    rel_close,
    selected_tree_score,
)


def three_var_spn():
    b = SpnBuilder()
    a1 = b.product([b.leaf("x1", Bernoulli(0.2)), b.leaf("x2", Bernoulli(0.7)), b.leaf("x3", Bernoulli(0.5))])
    inner = b.sum([b.leaf("x2", Bernoulli(0.1)), b.leaf("x2", Bernoulli(0.9))], [0.3, 0.7])
    a2 = b.product([b.leaf("x1", Bernoulli(0.6)), inner, b.leaf("x3", Bernoulli(0.25))])
    return b.build(b.sum([a1, a2], [0.45, 0.55])), ["x1", "x2", "x3"]


def test_single_leaf_scope():
    b = SpnBuilder()
    spn = b.build(b.leaf("x1", Bernoulli(0.3)))
    assert validate_spn(spn)[spn.root] == frozenset({"x1"})


def test_product_scope():
    b = SpnBuilder()
    root = b.product([b.leaf("x1", Bernoulli(0.3)), b.leaf("x2", Bernoulli(0.5))])
    assert validate_spn(b.build(root))[root] == frozenset({"x1", "x2"})


def test_overlapping_product():
    b = SpnBuilder()
    root = b.product([b.leaf("x1", Bernoulli(0.3)), b.leaf("x1", Bernoulli(0.5))])
    with pytest.raises(NonDecomposableProduct):
        validate_spn(b.build(root))


def test_incomplete_sum():
    b = SpnBuilder()
    root = b.sum([b.leaf("x1", Bernoulli(0.3)), b.leaf("x2", Bernoulli(0.5))], [0.5, 0.5])
    with pytest.raises(IncompleteSum):
        validate_spn(b.build(root))


def test_nonpositive_weight():
    spn = SpnGraph(
        kinds=(spnlib.LEAF, spnlib.LEAF, spnlib.SUM),
        children=((), (), (0, 1)),
        weights=((), (), (0.0, 1.0)),
        leaves=(spnlib.Leaf("x", Bernoulli(0.2)), spnlib.Leaf("x", Bernoulli(0.4)), None),
        root=2,
    )
    with pytest.raises(NonPositiveWeight):
        validate_spn(spn)


def test_cycle():
    spn = SpnGraph(
        kinds=(spnlib.PRODUCT, spnlib.PRODUCT),
        children=((1,), (0,)),
        weights=((), ()),
        leaves=(None, None),
        root=0,
    )
    with pytest.raises(CycleDetected):
        validate_spn(spn)


def test_partition_of_normalized_mixture():
    b = SpnBuilder()
    spn = b.build(b.sum([b.leaf("x", Bernoulli(0.2)), b.leaf("x", Bernoulli(0.9))], [0.4, 0.6]))
    assert log_partition(spn) == pytest.approx(0.0, abs=1e-15)


def test_three_variable_oracles():
    spn, variables = three_var_spn()
    validate_spn(spn)
    z = brute_evidence(spn, variables, {})
    assert rel_close(log_partition(spn), math.log(z))
    ev = {"x2": 1}
    assert rel_close(log_evidence(spn, ev), math.log(brute_evidence(spn, variables, ev)))
    post = marginal_posterior(spn, ev, "x1")
    joint1 = brute_evidence(spn, variables, {"x2": 1, "x1": 1})
    assert post[1] == pytest.approx(joint1 / brute_evidence(spn, variables, ev), abs=1e-12)
    assert sum(post.values()) == pytest.approx(1.0, abs=1e-12)
    state = map_state(spn, ev)
    assert rel_close(state.log_score, brute_map_score(spn, ev))


def test_single_leaf_evidence():
    b = SpnBuilder()
    spn = b.build(b.leaf("x", Bernoulli(0.3)))
    assert log_evidence(spn, {"x": 1}) == pytest.approx(math.log(0.3))


def test_independent_product_evidence():
    b = SpnBuilder()
    spn = b.build(b.product([b.leaf("x1", Bernoulli(0.3)), b.leaf("x2", Bernoulli(0.5))]))
    assert log_evidence(spn, {"x1": 1, "x2": 0}) == pytest.approx(math.log(0.15))


def test_prior_posterior():
    b = SpnBuilder()
    spn = b.build(b.leaf("bug", Bernoulli(0.01)))
    post = marginal_posterior(spn, {}, "bug")
    assert post[1] == pytest.approx(0.01) and post[0] == pytest.approx(0.99)


def test_mixture_of_identical_leaves():
    b = SpnBuilder()
    spn = b.build(b.sum([b.leaf("x", Bernoulli(0.3)), b.leaf("x", Bernoulli(0.3))], [0.5, 0.5]))
    assert marginal_posterior(spn, {}, "x")[1] == pytest.approx(0.3)


def test_query_errors():
    spn, _ = three_var_spn()
    with pytest.raises(QueryInEvidence):
        marginal_posterior(spn, {"x1": 0}, "x1")
    with pytest.raises(DomainMismatch):
        log_evidence(spn, {"x1": 2})


def test_map_prefers_heavier_branch():
    b = SpnBuilder()
    a = b.leaf("x", Bernoulli(0.5))
    c = b.leaf("x", Bernoulli(0.5))
    spn = b.build(b.sum([a, c], [0.4, 0.6]))
    state = map_state(spn, {})
    assert state.choices[spn.root] == 1


def test_map_tie_goes_to_lowest_index():
    b = SpnBuilder()
    spn = b.build(b.sum([b.leaf("x", Bernoulli(0.5)), b.leaf("x", Bernoulli(0.5))], [0.5, 0.5]))
    assert map_state(spn, {}).choices[spn.root] == 0


def test_map_with_full_evidence_matches_single_tree():
    b = SpnBuilder()
    spn = b.build(b.product([b.leaf("x1", Bernoulli(0.3)), b.leaf("x2", Bernoulli(0.8))]))
    ev = {"x1": 0, "x2": 1}
    assert map_state(spn, ev).log_score == pytest.approx(log_evidence(spn, ev))


def test_gaussian_and_categorical_leaves():
    b = SpnBuilder()
    g1 = b.leaf("s", Gaussian(0.4, 0.05))
    g2 = b.leaf("s", Gaussian(0.8, 0.1))
    c1 = b.leaf("r", Categorical((0.2, 0.5, 0.3)))
    c2 = b.leaf("r", Categorical((0.6, 0.2, 0.2)))
    spn = b.build(b.sum([b.product([g1, c1]), b.product([g2, c2])], [0.3, 0.7]))
    validate_spn(spn)
    assert log_partition(spn) == pytest.approx(0.0, abs=1e-12)
    dens = 1 / (0.05 * math.sqrt(2 * math.pi))
    assert log_evidence(spn, {"s": 0.4}) == pytest.approx(
        math.log(0.3 * dens + 0.7 * math.exp(-8) / (0.1 * math.sqrt(2 * math.pi))))
    post = marginal_posterior(spn, {"s": 0.45}, "r")
    assert set(post) == {0, 1, 2}
    assert sum(post.values()) == pytest.approx(1.0)
    with pytest.raises(DomainMismatch):
        marginal_posterior(spn, {}, "s")


def test_zero_probability_evidence():
    b = SpnBuilder()
    spn = b.build(b.product([b.leaf("x", Bernoulli(0.0)), b.leaf("y", Bernoulli(0.5))]))
    assert log_evidence(spn, {"x": 1}) == -math.inf
    with pytest.raises(SpnError):
        marginal_posterior(spn, {"x": 1}, "y")


def test_all_marginals_agree_with_marginal_posterior():
    rng = np.random.default_rng(5)
    for _ in range(30):
        spn, variables = random_spn(rng)
        ev = {v: int(rng.integers(2)) for v in variables if rng.random() < 0.3}
        allm = all_marginals(spn, ev)
        for v in variables:
            if v in ev:
                continue
            one = marginal_posterior(spn, ev, v)
            assert allm[v][1] == pytest.approx(one[1], abs=1e-12)


def test_random_spns_against_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(40):
        spn, variables = random_spn(rng)
        validate_spn(spn)
        assert rel_close(log_partition(spn), math.log(brute_evidence(spn, variables, {})))
        ev = {v: int(rng.integers(2)) for v in variables if rng.random() < 0.4}
        assert rel_close(log_evidence(spn, ev), math.log(brute_evidence(spn, variables, ev)))
        state = map_state(spn, ev)
        assert rel_close(state.log_score, brute_map_score(spn, ev))
        assert rel_close(selected_tree_score(spn, state.choices, ev, state.assignment), state.log_score)


def test_marginal_consistency():
    rng = np.random.default_rng(1)
    for _ in range(20):
        spn, variables = random_spn(rng)
        q = variables[0]
        parts = [log_evidence(spn, {q: v}) for v in (0, 1)]
        assert rel_close(float(np.logaddexp(*parts)), log_evidence(spn, {}))


def test_map_dominates_random_completions():
    rng = np.random.default_rng(4)
    for _ in range(10):
        spn, variables = random_spn(rng)
        best = map_state(spn, {}).log_score
        for _ in range(100):
            choices = {n: int(rng.integers(len(spn.children[n])))
                       for n in range(len(spn)) if spn.kinds[n] == spnlib.SUM}
            x = {v: int(rng.integers(2)) for v in variables}
            assert selected_tree_score(spn, choices, {}, x) <= best + 1e-12


def test_linear_levels():
    rng = np.random.default_rng(2)
    spn, _ = random_spn(rng, n_vars=5)
    plan = spn.plan
    visited = sum(len(s.nodes) if s is not None else 0 for s, _ in plan.levels) + \
        sum(len(p.nodes) if p is not None else 0 for _, p in plan.levels)
    assert visited <= len(spn)


def test_json_dump():
    spn, _ = three_var_spn()
    dump = spn.to_json()
    assert dump["root"] == spn.root
    assert len(dump["nodes"]) == len(spn)
