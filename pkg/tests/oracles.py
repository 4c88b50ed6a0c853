"""Brute-force reference implementations and random instance generators for the tests."""

from __future__ import annotations

import itertools
import math

import numpy as np

from tflm import spn as spnlib
from tflm.grammar import load_grammar
from tflm.minic import freeze_tree
from tflm.model import BUGGY, SUSPICIOUSNESS, AttributeDecl, LogRegModel, TflmSpec


# -- SPNs --------------------------------------------------------------------------

def random_spn(rng, n_vars=None, max_depth=5, max_leaves=10, share=True):
    """Random valid SPN over binary variables x0..x{n-1}.

    Built top-down: sums copy their scope to every child, products split it.
    With ``share`` a sum child may reuse an earlier sub-network with the
    same scope, so the result is a DAG rather than a tree.
    """
    n_vars = n_vars or int(rng.integers(1, 6))
    b = spnlib.SpnBuilder()
    built: dict[tuple, list[int]] = {}
    leaves = [0]

    def leaf(var):
        leaves[0] += 1
        return b.leaf(f"x{var}", spnlib.Bernoulli(float(rng.uniform(0.05, 0.95))))

    def gen(scope, depth):
        scope = tuple(scope)
        budget = max_leaves - leaves[0]
        if share and scope in built and rng.random() < 0.25:
            return built[scope][int(rng.integers(len(built[scope])))]
        if len(scope) == 1 and (depth >= max_depth - 1 or budget < 3 or rng.random() < 0.5):
            node = leaf(scope[0])
        elif depth >= max_depth - 1 or budget < 2 * len(scope) + 1:
            node = b.product([leaf(v) for v in scope])
        elif len(scope) > 1 and rng.random() < 0.5:
            perm = list(rng.permutation(scope))
            cut = int(rng.integers(1, len(perm)))
            parts = [sorted(perm[:cut]), sorted(perm[cut:])]
            node = b.product([gen(p, depth + 1) for p in parts])
        else:
            n_children = 2 if budget < 4 * len(scope) else int(rng.integers(2, 4))
            kids = [gen(scope, depth + 1) for _ in range(n_children)]
            w = rng.dirichlet(np.ones(n_children))
            node = b.sum(kids, list(w))
        built.setdefault(scope, []).append(node)
        return node

    root = gen(tuple(range(n_vars)), 0)
    return b.build(root), [f"x{i}" for i in range(n_vars)]


def spn_value(spn, node, x):
    """Network polynomial at a complete assignment, by plain recursion."""
    kind = spn.kinds[node]
    if kind == spnlib.LEAF:
        leaf = spn.leaves[node]
        return math.exp(leaf.dist.logpdf(x[leaf.variable]))
    if kind == spnlib.PRODUCT:
        return math.prod(spn_value(spn, c, x) for c in spn.children[node])
    return sum(w * spn_value(spn, c, x) for c, w in zip(spn.children[node], spn.weights[node]))


def completions(variables, evidence):
    free = [v for v in variables if v not in evidence]
    for values in itertools.product((0, 1), repeat=len(free)):
        x = dict(evidence)
        x.update(zip(free, values))
        yield x


def brute_evidence(spn, variables, evidence):
    return sum(spn_value(spn, spn.root, x) for x in completions(variables, evidence))


def induced_trees(spn, node):
    """All induced trees below ``node`` as (weight, leaf node list)."""
    kind = spn.kinds[node]
    if kind == spnlib.LEAF:
        return [(1.0, [node])]
    if kind == spnlib.PRODUCT:
        out = [(1.0, [])]
        for c in spn.children[node]:
            out = [(w1 * w2, l1 + l2) for w1, l1 in out for w2, l2 in induced_trees(spn, c)]
        return out
    out = []
    for c, w in zip(spn.children[node], spn.weights[node]):
        out.extend((w * wt, leaves) for wt, leaves in induced_trees(spn, c))
    return out


def brute_map_score(spn, evidence):
    """max over induced trees and completions, leaves maximized independently."""
    best = 0.0
    for w, leaves in induced_trees(spn, spn.root):
        val = w
        for n in leaves:
            leaf = spn.leaves[n]
            if leaf.variable in evidence:
                val *= math.exp(leaf.dist.logpdf(evidence[leaf.variable]))
            else:
                val *= max(math.exp(leaf.dist.logpdf(v)) for v in (0, 1))
        best = max(best, val)
    return math.log(best) if best > 0 else -math.inf


def selected_tree_score(spn, choices, evidence, assignment):
    """Score of the induced tree picked by ``choices`` under evidence + assignment."""
    x = {**evidence, **assignment}
    total, stack = 0.0, [spn.root]
    while stack:
        node = stack.pop()
        kind = spn.kinds[node]
        if kind == spnlib.LEAF:
            total += spn.leaves[node].dist.logpdf(x[spn.leaves[node].variable])
        elif kind == spnlib.PRODUCT:
            stack.extend(spn.children[node])
        else:
            pos = choices[node]
            total += math.log(spn.weights[node][pos])
            stack.append(spn.children[node][pos])
    return total


def rel_close(a, b, rel=1e-9, abs_=1e-12):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= max(rel * max(abs(a), abs(b)), abs_)


# -- trees and specs ------------------------------------------------------------------

class _Node:
    def __init__(self, symbol, rule, children):
        self.symbol, self.rule, self.children, self.tokens = symbol, rule, children, []


def make_tree(spec_tuple):
    """Build an AstNode tree from nested (symbol, rule_id, [children]) tuples."""
    def build(t):
        sym, rule, kids = t
        return _Node(sym, rule, [build(k) for k in kids])
    root, _, _ = freeze_tree(build(spec_tuple))
    return root


EXAMPLE_GRAMMAR = """
%start while_stmt
%nonterminals while_stmt condition suite expr operator
%terminals NAME
r1: while_stmt -> 'while' condition ':' suite
r2: condition -> expr operator expr
r3: condition -> 'not' condition
suite -> 'pass'
expr -> NAME
operator -> '<'
"""

SINGLE_RULE_GRAMMAR = """
%start a
%nonterminals a b c d
%terminals X
a -> b c
b -> X
c -> d
d -> X
"""


def example_grammar():
    return load_grammar(EXAMPLE_GRAMMAR)


def random_spec(grammar, k, rng, attributes=None, joint=False, zero_prob=0.0):
    """TflmSpec with Dirichlet-random tables; every nonterminal gets k subclasses."""
    if attributes is None:
        attributes = {nt: (AttributeDecl(BUGGY, "binary"), AttributeDecl(SUSPICIOUSNESS, "real"))
                      for nt in sorted(grammar.nonterminals)}
    ks = {nt: k for nt in grammar.nonterminals}

    def dist(shape):
        arr = rng.dirichlet(np.ones(shape[-1]), size=shape[:-1])
        return arr

    attr_dist = {}
    for sym, decls in attributes.items():
        for d in decls:
            if d.kind == "binary":
                p = rng.uniform(0.05, 0.95, size=k)
                if zero_prob and rng.random() < zero_prob:
                    p[int(rng.integers(k))] = float(rng.integers(2))
                attr_dist[(sym, d.name)] = p
            else:
                attr_dist[(sym, d.name)] = np.stack([rng.uniform(0, 1, k), rng.uniform(0.1, 0.5, k)], axis=1)
    joint_models = None
    if joint:
        joint_models = {}
        for sym, decls in attributes.items():
            names = {d.name for d in decls}
            if BUGGY in names and SUSPICIOUSNESS in names:
                for j in range(k):
                    if rng.random() < 0.5:
                        joint_models[(sym, j)] = LogRegModel(tuple(rng.normal(0, 2, 2)), (1.0, 1.0))
    return TflmSpec(
        grammar=grammar,
        attributes=attributes,
        subclass_count=ks,
        start_dist=dist((k,)),
        rule_dist={nt: dist((k, len(grammar.rules_for(nt)))) for nt in grammar.nonterminals},
        child_dist={(r.id, pos): dist((k, k)) for r in grammar.rules
                    for pos in range(len(grammar.child_symbols(r.id)))},
        attr_dist=attr_dist,
        attr_joint=joint_models,
    )


def gaussian_pdf(x, mean, std):
    return math.exp(-0.5 * ((x - mean) / std) ** 2) / (std * math.sqrt(2 * math.pi))
