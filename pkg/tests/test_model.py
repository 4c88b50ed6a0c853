import itertools
import math

import numpy as np
import pytest

from tflm import spn as spnlib
from tflm.errors import (
    BuggyObserved,
    GrammarMismatch,
    IncompleteAssignment,
    MissingDistribution,
    UnnormalizedDistribution,
)
from tflm.grammar import load_grammar, minic_grammar
from tflm.minic import parse_program
from tflm.model import (
    BUGGY,
    SUBCLASS_VAR,
    SUSPICIOUSNESS,
    AttributeDecl,
    LogRegModel,
    buggy_posteriors,
    ground_spn,
    joint_log_prob,
    load_spec,
    map_subclasses,
    save_spec,
    spec_from_dict,
    spec_to_dict,
    tree_nodes,
    validate_spec,
)
from tflm.corpus import loop_context_generator

from oracles import (
    SINGLE_RULE_GRAMMAR,
    example_grammar,
    gaussian_pdf,
    make_tree,
    random_spec,
)

BOTH = (AttributeDecl(BUGGY, "binary"), AttributeDecl(SUSPICIOUSNESS, "real"))
BUGGY_ONLY = (AttributeDecl(BUGGY, "binary"),)


def example_spec():
    """The worked example's parameters, with the rest of the tables filled in."""
    g = example_grammar()
    rng = np.random.default_rng(0)
    spec = random_spec(g, 2, rng, attributes={nt: BOTH for nt in g.nonterminals})
    attr = dict(spec.attr_dist)
    attr[("while_stmt", BUGGY)] = np.array([0.01, 0.2])
    attr[("while_stmt", SUSPICIOUSNESS)] = np.array([[0.4, 0.05], [0.7, 0.1]])
    child = dict(spec.child_dist)
    child[("r1", 0)] = np.array([[0.7, 0.3], [0.5, 0.5]])
    child[("r1", 1)] = np.array([[0.2, 0.8], [0.5, 0.5]])
    rules = dict(spec.rule_dist)
    rules["while_stmt"] = np.array([[1.0], [1.0]])
    return spec.replace(start_dist=np.array([0.4, 0.6]), attr_dist=attr, child_dist=child, rule_dist=rules)


def example_tree():
    return make_tree(("while_stmt", "r1", [
        ("condition", "r2", [("expr", "expr.1", []), ("operator", "operator.1", []), ("expr", "expr.1", [])]),
        ("suite", "suite.1", []),
    ]))


def root_only_spec():
    g = load_grammar("%start while_stmt\n%nonterminals while_stmt\n%terminals EXPR\n"
                     "while_stmt -> 'while' EXPR ':' 'pass'\n")
    spec = random_spec(g, 2, np.random.default_rng(0), attributes={"while_stmt": BOTH})
    return spec.replace(
        start_dist=np.array([0.4, 0.6]),
        attr_dist={("while_stmt", BUGGY): np.array([0.01, 0.3]),
                   ("while_stmt", SUSPICIOUSNESS): np.array([[0.4, 0.05], [0.6, 0.2]])},
    )


def test_example_spec_is_valid():
    validate_spec(example_spec())


def test_unnormalized_start():
    spec = example_spec().replace(start_dist=np.array([0.4, 0.5]))
    with pytest.raises(UnnormalizedDistribution):
        validate_spec(spec)


def test_missing_attribute_table():
    spec = example_spec()
    attr = dict(spec.attr_dist)
    del attr[("while_stmt", BUGGY)]
    with pytest.raises(MissingDistribution):
        validate_spec(spec.replace(attr_dist=attr))


def test_root_only_joint_example():
    spec = root_only_spec()
    tree = make_tree(("while_stmt", "while_stmt.1", []))
    attrs = {(0, BUGGY): 0, (0, SUSPICIOUSNESS): 0.4}
    lp = joint_log_prob(spec, tree, attrs, {0: 0})
    assert gaussian_pdf(0.4, 0.4, 0.05) == pytest.approx(7.97885, abs=1e-5)
    assert lp == pytest.approx(math.log(0.4 * 0.99 * 7.978845608028654), abs=1e-12)


def test_grounded_root_weights():
    g = ground_spn(example_spec(), example_tree())
    spn = g.spn
    assert spn.kinds[spn.root] == spnlib.SUM
    assert tuple(spn.weights[spn.root]) == pytest.approx((0.4, 0.6))


def test_single_node_grounding_size():
    g = load_grammar("%start s\n%nonterminals s\n%terminals X\ns -> X\n")
    spec = random_spec(g, 1, np.random.default_rng(0), attributes={"s": BUGGY_ONLY})
    grounded = ground_spn(spec, make_tree(("s", "s.1", [])))
    assert len(grounded.spn) == 6
    validate_spn_ok(grounded.spn)


def validate_spn_ok(spn):
    spnlib.validate_spn(spn)
    assert spnlib.log_partition(spn) == pytest.approx(0.0, abs=1e-9)


def test_child_distributions_in_grounding():
    spec = example_spec()
    tree = example_tree()
    attrs = {(n.node_id, BUGGY): 0 for n in tree_nodes(tree)[0]}
    attrs.update({(n.node_id, SUSPICIOUSNESS): 0.5 for n in tree_nodes(tree)[0]})
    classes = {n.node_id: 0 for n in tree_nodes(tree)[0]}
    base = joint_log_prob(spec, tree, attrs, classes)
    cond_id = 1
    suite_id = len(tree_nodes(tree)[0]) - 1
    other = dict(classes)
    other[cond_id] = 1
    # switching the condition's subclass swaps pi(condition_1)=0.7 for pi(condition_2)=0.3,
    # plus the condition's own local terms
    delta_local = (joint_log_prob(spec, tree, attrs, other) - base)
    nodes, _ = tree_nodes(tree)
    cond = nodes[cond_id]
    kids = [c.node_id for c in cond.children]
    assert delta_local == pytest.approx(
        math.log(0.3 / 0.7)
        + local_terms(spec, cond, attrs, 1, kids, other) - local_terms(spec, cond, attrs, 0, kids, classes))
    assert nodes[suite_id].symbol == "suite"
    other = dict(classes)
    other[suite_id] = 1
    assert joint_log_prob(spec, tree, attrs, other) - base == pytest.approx(
        math.log(0.8 / 0.2) + local_terms(spec, nodes[suite_id], attrs, 1, [], other)
        - local_terms(spec, nodes[suite_id], attrs, 0, [], classes))


def local_terms(spec, node, attrs, j, kids, classes):
    sym = node.symbol
    p = spec.attr_dist[(sym, BUGGY)][j]
    mean, std = spec.attr_dist[(sym, SUSPICIOUSNESS)][j]
    out = math.log(p if attrs[(node.node_id, BUGGY)] else 1 - p)
    out += math.log(gaussian_pdf(attrs[(node.node_id, SUSPICIOUSNESS)], mean, std))
    rules = [r.id for r in spec.grammar.rules_for(sym)]
    out += math.log(spec.rule_dist[sym][j][rules.index(node.rule)])
    for pos, c in enumerate(node.children):
        out += math.log(spec.child_dist[(node.rule, pos)][j][classes[c.node_id]])
    return out


def test_joint_matches_grounded_evidence():
    rng = np.random.default_rng(3)
    spec = random_spec(minic_grammar(), 2, rng)
    p = parse_program("x = 1;\nwhile (x) {\n  f(x);\n}\n")
    for _ in range(10):
        attrs = {}
        for n in p.nodes:
            attrs[(n.node_id, BUGGY)] = int(rng.integers(2))
            attrs[(n.node_id, SUSPICIOUSNESS)] = float(rng.random())
        classes = {n.node_id: int(rng.integers(2)) for n in p.nodes}
        g = ground_spn(spec, p, selectors=True)
        ev = dict(g.rule_evidence)
        ev.update({g.attr_vars[k]: v for k, v in attrs.items()})
        ev.update({(nid, SUBCLASS_VAR): c for nid, c in classes.items()})
        assert joint_log_prob(spec, p, attrs, classes) == pytest.approx(spnlib.log_evidence(g.spn, ev), abs=1e-9)


def test_impossible_event_is_neg_inf():
    spec = root_only_spec()
    attr = dict(spec.attr_dist)
    attr[("while_stmt", BUGGY)] = np.array([0.0, 0.3])
    spec = spec.replace(attr_dist=attr)
    tree = make_tree(("while_stmt", "while_stmt.1", []))
    assert joint_log_prob(spec, tree, {(0, BUGGY): 1, (0, SUSPICIOUSNESS): 0.4}, {0: 0}) == -math.inf


def test_incomplete_assignment():
    spec = root_only_spec()
    tree = make_tree(("while_stmt", "while_stmt.1", []))
    with pytest.raises(IncompleteAssignment):
        joint_log_prob(spec, tree, {(0, BUGGY): 1}, {0: 0})
    with pytest.raises(IncompleteAssignment):
        joint_log_prob(spec, tree, {(0, BUGGY): 1, (0, SUSPICIOUSNESS): 0.4}, {})


def test_grammar_mismatch():
    spec = root_only_spec()
    with pytest.raises(GrammarMismatch):
        ground_spn(spec, make_tree(("while_stmt", "nonexistent", [])))


def brute_map(spec, tree, attrs):
    nodes, _ = tree_nodes(tree)
    best, arg = -math.inf, None
    ks = [range(spec.subclass_count[n.symbol]) for n in nodes]
    for combo in itertools.product(*ks):
        classes = dict(enumerate(combo))
        lp = joint_log_prob(spec, tree, attrs, classes)
        if lp > best + 1e-12:
            best, arg = lp, classes
    return arg, best


def small_trees():
    p = parse_program("x = 1;")
    q = parse_program("return;")
    single = make_tree(("a", "a.1", [("b", "b.1", []), ("c", "c.1", [("d", "d.1", [])])]))
    return [(minic_grammar(), p), (minic_grammar(), q), (load_grammar(SINGLE_RULE_GRAMMAR), single)]


def test_map_subclasses_matches_brute_force():
    rng = np.random.default_rng(7)
    for trial in range(30):
        grammar, tree = small_trees()[trial % 3]
        spec = random_spec(grammar, 2, rng)
        nodes, _ = tree_nodes(tree)
        attrs = {}
        for n in nodes:
            attrs[(n.node_id, BUGGY)] = int(rng.integers(2))
            attrs[(n.node_id, SUSPICIOUSNESS)] = float(rng.random())
        classes, score = map_subclasses(spec, tree, attrs)
        _, best = brute_map(spec, tree, attrs)
        assert score == pytest.approx(best, abs=1e-9)
        assert joint_log_prob(spec, tree, attrs, classes) == pytest.approx(score, abs=1e-9)


def test_map_with_one_subclass_is_the_unique_assignment():
    spec = random_spec(minic_grammar(), 1, np.random.default_rng(1))
    p = parse_program("x = 1;\ny = 2;")
    attrs = {(n.node_id, a): 0 for n in p.nodes for a in (BUGGY, SUSPICIOUSNESS)}
    classes, score = map_subclasses(spec, p, attrs)
    assert set(classes.values()) == {0}
    assert score == pytest.approx(joint_log_prob(spec, p, attrs, classes))


def test_identical_subclasses_tie_to_first():
    spec = random_spec(minic_grammar(), 2, np.random.default_rng(2))
    same = lambda arr: np.repeat(np.asarray(arr)[:1], len(arr), axis=0)
    spec = spec.replace(
        start_dist=np.array([0.5, 0.5]),
        rule_dist={k: same(v) for k, v in spec.rule_dist.items()},
        child_dist={k: np.full_like(v, 0.5) for k, v in spec.child_dist.items()},
        attr_dist={k: same(v) for k, v in spec.attr_dist.items()},
    )
    p = parse_program("x = 1;\nf();")
    attrs = {(n.node_id, BUGGY): 0 for n in p.nodes}
    attrs.update({(n.node_id, SUSPICIOUSNESS): 0.3 for n in p.nodes})
    classes, _ = map_subclasses(spec, p, attrs)
    assert set(classes.values()) == {0}


def test_prior_posterior_without_suspiciousness():
    g = minic_grammar()
    spec = random_spec(g, 1, np.random.default_rng(0), attributes={nt: BUGGY_ONLY for nt in g.nonterminals})
    spec = spec.replace(attr_dist={k: np.array([0.01]) for k in spec.attr_dist})
    p = parse_program("x = 1;\nwhile (x) { y = 2; }")
    post = buggy_posteriors(spec, p, {})
    assert set(post) == {n.node_id for n in p.nodes}
    assert all(v == pytest.approx(0.01) for v in post.values())


def test_two_subclass_bayes_by_hand():
    spec = root_only_spec()
    tree = make_tree(("while_stmt", "while_stmt.1", []))
    s = 0.5
    w0 = 0.4 * gaussian_pdf(s, 0.4, 0.05)
    w1 = 0.6 * gaussian_pdf(s, 0.6, 0.2)
    expected = (w0 * 0.01 + w1 * 0.3) / (w0 + w1)
    post = buggy_posteriors(spec, tree, {(0, SUSPICIOUSNESS): s})
    assert post[0] == pytest.approx(expected, abs=1e-9)


def brute_posteriors(spec, tree, observed):
    nodes, _ = tree_nodes(tree)
    ks = [range(spec.subclass_count[n.symbol]) for n in nodes]
    num = {n.node_id: 0.0 for n in nodes}
    den = 0.0
    for combo in itertools.product(*ks):
        classes = dict(enumerate(combo))
        for bugs in itertools.product((0, 1), repeat=len(nodes)):
            attrs = dict(observed)
            attrs.update({(i, BUGGY): b for i, b in enumerate(bugs)})
            p = math.exp(joint_log_prob(spec, tree, attrs, classes))
            den += p
            for i, b in enumerate(bugs):
                if b:
                    num[i] += p
    return {i: v / den for i, v in num.items()}


def test_posteriors_match_enumeration():
    rng = np.random.default_rng(11)
    for trial in range(12):
        grammar, tree = small_trees()[trial % 3]
        spec = random_spec(grammar, 2, rng)
        nodes, _ = tree_nodes(tree)
        observed = {(n.node_id, SUSPICIOUSNESS): float(rng.random()) for n in nodes}
        post = buggy_posteriors(spec, tree, observed)
        ref = brute_posteriors(spec, tree, observed)
        for i in ref:
            assert post[i] == pytest.approx(ref[i], abs=1e-9)
            assert 0.0 <= post[i] <= 1.0


def test_single_subclass_posterior_ignores_suspiciousness():
    spec = random_spec(minic_grammar(), 1, np.random.default_rng(4))
    p = parse_program("x = 1;\nreturn x;")
    a = buggy_posteriors(spec, p, {(n.node_id, SUSPICIOUSNESS): 0.1 for n in p.nodes})
    b = buggy_posteriors(spec, p, {(n.node_id, SUSPICIOUSNESS): 0.9 for n in p.nodes})
    assert a == pytest.approx(b, abs=1e-12)


def test_buggy_evidence_rejected():
    spec = root_only_spec()
    tree = make_tree(("while_stmt", "while_stmt.1", []))
    with pytest.raises(BuggyObserved):
        buggy_posteriors(spec, tree, {(0, BUGGY): 1, (0, SUSPICIOUSNESS): 0.3})


def test_joint_model_replaces_buggy_leaf():
    spec = root_only_spec()
    model = LogRegModel((4.0, -2.0))
    spec = spec.replace(attr_joint={("while_stmt", 0): model, ("while_stmt", 1): model})
    tree = make_tree(("while_stmt", "while_stmt.1", []))
    post = buggy_posteriors(spec, tree, {(0, SUSPICIOUSNESS): 0.8})
    assert post[0] == pytest.approx(1 / (1 + math.exp(-(4.0 * 0.8 - 2.0))), abs=1e-12)


def test_context_sensitivity():
    spec = loop_context_generator()
    p = parse_program("x = 1;\nwhile (x < 3) {\n    y = 2;\n}\n")
    assigns = [n.node_id for n in p.nodes if n.symbol == "assign_stmt"]
    observed = {(n.node_id, SUSPICIOUSNESS): 0.5 for n in p.nodes}
    post = buggy_posteriors(spec, p, observed)
    assert post[assigns[0]] != post[assigns[1]]
    assert post[assigns[1]] > post[assigns[0]]


def test_grounding_linear_in_tree_size():
    spec = random_spec(minic_grammar(), 2, np.random.default_rng(0))
    sizes = []
    for n in (10, 20, 40):
        p = parse_program("x = 1;\n" * n)
        sizes.append(len(ground_spn(spec, p).spn))
    assert sizes[1] <= 2 * sizes[0] + 10
    assert sizes[2] <= 2 * sizes[1] + 10


def test_serialization_round_trip(tmp_path):
    spec = random_spec(minic_grammar(), 3, np.random.default_rng(8), joint=True)
    path = tmp_path / "m.json"
    save_spec(spec, path)
    again = load_spec(path)
    assert spec_to_dict(again) == spec_to_dict(spec)
    for key, arr in spec.attr_dist.items():
        assert np.array_equal(again.attr_dist[key], arr)


def test_serialization_rejects_other_grammar():
    spec = random_spec(minic_grammar(), 1, np.random.default_rng(8))
    data = spec_to_dict(spec)
    with pytest.raises(GrammarMismatch):
        spec_from_dict(data, example_grammar())
