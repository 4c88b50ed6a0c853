"""Tractable fault-localization models: parameters, grounding and queries.

A model refines every grammar symbol into latent subclasses. Each subclass
carries univariate distributions over the symbol's attributes, a
distribution over the symbol's production rules, and for every rule and
nonterminal child position a distribution over the child's subclasses.
Grounding a model against a parse tree yields an SPN whose MAP state and
marginals answer the learning and localization queries exactly.

Subclass indices are 0-based throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import spn as spnlib
from .errors import (
    BuggyObserved,
    GrammarMismatch,
    IncompleteAssignment,
    MissingDistribution,
    SpecError,
    SubclassCountZero,
    UnknownAttribute,
    UnnormalizedDistribution,
)
from .grammar import Grammar, load_grammar
from .minic import AstNode, ParsedProgram, iter_preorder

BUGGY = "buggy"
SUSPICIOUSNESS = "suspiciousness"
NORM_TOL = 1e-9

RULE_VAR = "@rule"
SUBCLASS_VAR = "@subclass"


@dataclass(frozen=True)
class AttributeDecl:
    name: str
    kind: str  # "binary" | "real"

    def __post_init__(self):
        if self.kind not in ("binary", "real"):
            raise SpecError(f"attribute {self.name!r}: kind must be 'binary' or 'real'")


@dataclass(frozen=True)
class LogRegModel:
    """Logistic model of ``buggy`` given one real feature plus a bias."""

    weights: tuple[float, float]                 # (feature weight, bias)
    class_weights: tuple[float, float] = (1.0, 1.0)
    feature: str = SUSPICIOUSNESS

    def prob(self, x: float) -> float:
        z = self.weights[0] * x + self.weights[1]
        if z >= 0:
            return 1.0 / (1.0 + math.exp(-z))
        e = math.exp(z)
        return e / (1.0 + e)


def default_attributes(grammar: Grammar) -> dict[str, tuple[AttributeDecl, ...]]:
    """Every nonterminal gets a binary ``buggy`` and a real ``suspiciousness``."""
    decls = (AttributeDecl(BUGGY, "binary"), AttributeDecl(SUSPICIOUSNESS, "real"))
    return {nt: decls for nt in sorted(grammar.nonterminals)}


@dataclass(frozen=True, eq=False)
class TflmSpec:
    """Learned model parameters.

    start_dist:  (k_start,)
    rule_dist:   symbol -> (k, n_rules) over ``grammar.rules_for(symbol)``
    child_dist:  (rule_id, position) -> (k_lhs, k_child); position counts
                 nonterminals on the right-hand side from 0
    attr_dist:   (symbol, attr) -> (k,) Bernoulli p for binary attributes,
                 (k, 2) [mean, std] for real ones
    attr_joint:  (symbol, subclass) -> LogRegModel, fitted after EM
    """

    grammar: Grammar
    attributes: dict[str, tuple[AttributeDecl, ...]]
    subclass_count: dict[str, int]
    start_dist: np.ndarray
    rule_dist: dict[str, np.ndarray]
    child_dist: dict[tuple[str, int], np.ndarray]
    attr_dist: dict[tuple[str, str], np.ndarray]
    attr_joint: dict[tuple[str, int], LogRegModel] | None = None
    _attr_kind: dict = field(default=None, repr=False)

    def __post_init__(self):
        kinds = {}
        for sym, decls in self.attributes.items():
            for d in decls:
                kinds[(sym, d.name)] = d.kind
        object.__setattr__(self, "_attr_kind", kinds)

    def attrs_of(self, symbol: str) -> tuple[AttributeDecl, ...]:
        return self.attributes.get(symbol, ())

    def attr_kind(self, symbol: str, attr: str) -> str | None:
        return self._attr_kind.get((symbol, attr))

    def replace(self, **changes) -> "TflmSpec":
        fields = dict(grammar=self.grammar, attributes=self.attributes, subclass_count=self.subclass_count,
                      start_dist=self.start_dist, rule_dist=self.rule_dist, child_dist=self.child_dist,
                      attr_dist=self.attr_dist, attr_joint=self.attr_joint)
        fields.update(changes)
        return TflmSpec(**fields)


def _check_dist(name, arr, shape):
    arr = np.asarray(arr, dtype=float)
    if arr.shape != shape:
        raise MissingDistribution(f"{name}: expected shape {shape}, got {arr.shape}")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise UnnormalizedDistribution(f"{name}: negative or non-finite probability")
    sums = arr.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > NORM_TOL):
        raise UnnormalizedDistribution(f"{name}: sums to {sums} rather than 1")


def validate_spec(spec: TflmSpec) -> None:
    g = spec.grammar
    for sym in g.nonterminals:
        if sym not in spec.subclass_count:
            raise MissingDistribution(f"no subclass count for {sym!r}")
        if spec.subclass_count[sym] < 1:
            raise SubclassCountZero(f"{sym!r} has {spec.subclass_count[sym]} subclasses")
    for sym in spec.attributes:
        if sym not in g.nonterminals:
            raise UnknownAttribute(f"attributes declared for unknown symbol {sym!r}")
    k = spec.subclass_count
    _check_dist("start_dist", spec.start_dist, (k[g.start_symbol],))
    for sym in g.nonterminals:
        if sym not in spec.rule_dist:
            raise MissingDistribution(f"no rule distribution for {sym!r}")
        _check_dist(f"rule_dist[{sym}]", spec.rule_dist[sym], (k[sym], len(g.rules_for(sym))))
    for rule in g.rules:
        for pos, child in enumerate(g.child_symbols(rule.id)):
            key = (rule.id, pos)
            if key not in spec.child_dist:
                raise MissingDistribution(f"no child distribution for rule {rule.id!r} position {pos}")
            _check_dist(f"child_dist[{key}]", spec.child_dist[key], (k[rule.lhs], k[child]))
    for (sym, attr) in spec.attr_dist:
        if spec.attr_kind(sym, attr) is None:
            raise UnknownAttribute(f"distribution for undeclared attribute {sym}.{attr}")
    for sym, decls in spec.attributes.items():
        for d in decls:
            arr = spec.attr_dist.get((sym, d.name))
            if arr is None:
                raise MissingDistribution(f"no distribution for attribute {sym}.{d.name}")
            arr = np.asarray(arr, dtype=float)
            if d.kind == "binary":
                if arr.shape != (k[sym],):
                    raise MissingDistribution(f"{sym}.{d.name}: expected {k[sym]} Bernoulli parameters")
                if np.any((arr < 0) | (arr > 1)) or not np.all(np.isfinite(arr)):
                    raise UnnormalizedDistribution(f"{sym}.{d.name}: Bernoulli parameter outside [0, 1]")
            else:
                if arr.shape != (k[sym], 2):
                    raise MissingDistribution(f"{sym}.{d.name}: expected {k[sym]} (mean, std) pairs")
                if np.any(arr[:, 1] <= 0) or not np.all(np.isfinite(arr)):
                    raise UnnormalizedDistribution(f"{sym}.{d.name}: stddev must be positive and finite")
    for (sym, j), model in (spec.attr_joint or {}).items():
        if spec.attr_kind(sym, BUGGY) != "binary" or not 0 <= j < k.get(sym, 0):
            raise UnknownAttribute(f"joint model for {sym!r} subclass {j} has no buggy attribute to replace")
        if spec.attr_kind(sym, model.feature) != "real":
            raise UnknownAttribute(f"joint model feature {model.feature!r} is not a real attribute of {sym!r}")
        if not all(math.isfinite(w) for w in model.weights):
            raise SpecError(f"joint model for {sym!r} subclass {j} has non-finite weights")


# -- trees -------------------------------------------------------------------

def tree_nodes(tree) -> tuple[list[AstNode], list[int]]:
    """Nodes indexed by node_id and their parent ids (-1 for the root)."""
    if isinstance(tree, ParsedProgram):
        return list(tree.nodes), list(tree.parents)
    nodes = list(iter_preorder(tree))
    parents = [-1] * len(nodes)
    for i, node in enumerate(nodes):
        if node.node_id != i:
            raise GrammarMismatch("tree node ids must be pre-order 0..n-1")
        for c in node.children:
            parents[c.node_id] = i
    return nodes, parents


def _rule_index(spec: TflmSpec, node: AstNode) -> int:
    g = spec.grammar
    if not g.has_rule(node.rule) or g.rule(node.rule).lhs != node.symbol:
        raise GrammarMismatch(f"node {node.node_id}: rule {node.rule!r} is not a {node.symbol!r} rule of the model")
    kids = g.child_symbols(node.rule)
    if [c.symbol for c in node.children] != kids:
        raise GrammarMismatch(f"node {node.node_id}: children do not match rule {node.rule!r}")
    return [r.id for r in g.rules_for(node.symbol)].index(node.rule)


def _log(x) -> float:
    return math.log(x) if x > 0 else -math.inf


def _attr_logpdf(spec, sym, attr, kind, j, value) -> float:
    params = spec.attr_dist[(sym, attr)]
    if kind == "binary":
        p = float(params[j])
        return _log(p) if value == 1 else _log(1.0 - p)
    mean, std = params[j]
    z = (value - mean) / std
    return -0.5 * z * z - math.log(std) - 0.5 * math.log(2 * math.pi)


def joint_log_prob(spec: TflmSpec, tree, attrs: dict, classes: dict) -> float:
    """log P(T, A, C) for a complete attribute and subclass assignment."""
    nodes, _ = tree_nodes(tree)
    total = 0.0
    for node in nodes:
        sym = node.symbol
        if node.node_id not in classes:
            raise IncompleteAssignment(f"no subclass for node {node.node_id}")
        j = classes[node.node_id]
        if not 0 <= j < spec.subclass_count[sym]:
            raise IncompleteAssignment(f"subclass {j} out of range for {sym!r}")
        r = _rule_index(spec, node)
        total += _log(spec.rule_dist[sym][j, r])
        for pos, child in enumerate(node.children):
            if child.node_id not in classes:
                raise IncompleteAssignment(f"no subclass for node {child.node_id}")
            total += _log(spec.child_dist[(node.rule, pos)][j, classes[child.node_id]])
        for d in spec.attrs_of(sym):
            key = (node.node_id, d.name)
            if key not in attrs:
                raise IncompleteAssignment(f"attribute {d.name!r} missing on node {node.node_id}")
            total += _attr_logpdf(spec, sym, d.name, d.kind, j, attrs[key])
    root = nodes[0]
    total += _log(spec.start_dist[classes[root.node_id]])
    return total


# -- grounding ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GroundedModel:
    spn: spnlib.SpnGraph
    attr_vars: dict          # (node_id, attr) -> SPN variable
    rule_evidence: dict      # rule variable -> observed local rule index
    subclass_sums: dict      # node_id -> sum nodes choosing that node's subclass
    sum_subclasses: dict     # sum node -> subclass index of each child position

    def decode(self, choices: dict) -> dict[int, int]:
        classes = {}
        for nid, sums in self.subclass_sums.items():
            for s in sums:
                if s in choices:
                    classes[nid] = self.sum_subclasses[s][choices[s]]
                    break
        return classes


def ground_spn(spec: TflmSpec, tree, joint_features: dict | None = None,
               selectors: bool = False) -> GroundedModel:
    """Compile the model against a parse tree into an SPN.

    Per tree node and subclass the construction emits one product whose
    children are: a sum over the two values of each binary attribute
    (weighted by the subclass's Bernoulli), a Gaussian leaf per real
    attribute, a categorical leaf over the node's rule variable (the rule
    sum with every unused rule zeroed out), and for each nonterminal child
    a sum over that child's subclass products weighted by the child
    distribution. The root gets a sum weighted by the start distribution.

    With ``joint_features`` (observed attribute values) and a fitted joint
    model, each subclass's buggy weights come from the logistic conditional
    instead of the Bernoulli. ``selectors`` adds a one-hot subclass leaf to
    every product so subclass assignments can be fixed as evidence.
    Zero-weight sum children are omitted.
    """
    nodes, _ = tree_nodes(tree)
    b = spnlib.SpnBuilder()
    attr_vars: dict = {}
    rule_evidence: dict = {}
    subclass_sums: dict = {nd.node_id: [] for nd in nodes}
    sum_subclasses: dict = {}
    products: dict[int, list[int]] = {}
    joint = spec.attr_joint if joint_features is not None else None

    def weighted_sum(children, weights, owner=None, labels=None):
        keep = [(c, w, lab) for c, w, lab in zip(children, weights, labels or children) if w > 0]
        sid = b.sum([c for c, _, _ in keep], [w for _, w, _ in keep])
        if owner is not None:
            subclass_sums[owner].append(sid)
            sum_subclasses[sid] = [lab for _, _, lab in keep]
        return sid

    for node in reversed(nodes):
        sym, nid = node.symbol, node.node_id
        r = _rule_index(spec, node)
        k = spec.subclass_count[sym]
        rule_var = (nid, RULE_VAR)
        rule_evidence[rule_var] = r
        indicators: dict[str, tuple[int, int]] = {}
        prods = []
        for j in range(k):
            parts = []
            for d in spec.attrs_of(sym):
                var = (nid, d.name)
                attr_vars[(nid, d.name)] = var
                params = spec.attr_dist[(sym, d.name)]
                if d.kind == "binary":
                    p = float(params[j])
                    model = joint.get((sym, j)) if joint and d.name == BUGGY else None
                    if model is not None and (nid, model.feature) in joint_features:
                        p = model.prob(joint_features[(nid, model.feature)])
                    if d.name not in indicators:
                        indicators[d.name] = (b.leaf(var, spnlib.Bernoulli(0.0)), b.leaf(var, spnlib.Bernoulli(1.0)))
                    parts.append(weighted_sum(indicators[d.name], (1.0 - p, p)))
                else:
                    mean, std = params[j]
                    parts.append(b.leaf(var, spnlib.Gaussian(float(mean), float(std))))
            parts.append(b.leaf(rule_var, spnlib.Categorical(tuple(spec.rule_dist[sym][j]))))
            for pos, child in enumerate(node.children):
                w = spec.child_dist[(node.rule, pos)][j]
                kc = len(products[child.node_id])
                parts.append(weighted_sum(products[child.node_id], w, owner=child.node_id, labels=range(kc)))
            if selectors:
                onehot = [1.0 if i == j else 0.0 for i in range(k)]
                parts.append(b.leaf((nid, SUBCLASS_VAR), spnlib.Categorical(onehot)))
            prods.append(b.product(parts))
        products[nid] = prods
    root = nodes[0]
    top = weighted_sum(products[root.node_id], spec.start_dist, owner=root.node_id,
                       labels=range(len(products[root.node_id])))
    return GroundedModel(b.build(top), attr_vars, rule_evidence, subclass_sums, sum_subclasses)


# -- queries -----------------------------------------------------------------

def map_subclasses(spec: TflmSpec, tree, attrs: dict) -> tuple[dict[int, int], float]:
    """Most probable subclass assignment given the attributes, and its log score."""
    g = ground_spn(spec, tree)
    evidence = dict(g.rule_evidence)
    for key, value in attrs.items():
        if key in g.attr_vars:
            evidence[g.attr_vars[key]] = value
    state = spnlib.map_state(g.spn, evidence)
    return g.decode(state.choices), state.log_score


def buggy_posteriors(spec: TflmSpec, tree, observed: dict) -> dict[int, float]:
    """P(buggy = 1 | observed attributes) for every node carrying ``buggy``."""
    nodes, _ = tree_nodes(tree)
    if any(attr == BUGGY for (_, attr) in observed):
        raise BuggyObserved("buggy must not be supplied as evidence")
    for node in nodes:
        for d in spec.attrs_of(node.symbol):
            if d.kind == "real" and (node.node_id, d.name) not in observed:
                raise SpecError(f"real attribute {d.name!r} of node {node.node_id} must be observed")
    g = ground_spn(spec, tree, joint_features=observed)
    evidence = dict(g.rule_evidence)
    for key, value in observed.items():
        if key in g.attr_vars:
            evidence[g.attr_vars[key]] = value
    targets = [g.attr_vars[(n.node_id, BUGGY)] for n in nodes if (n.node_id, BUGGY) in g.attr_vars]
    marg = spnlib.all_marginals(g.spn, evidence, targets)
    return {var[0]: marg[var][1] for var in targets}


# -- serialization -----------------------------------------------------------

def spec_to_dict(spec: TflmSpec) -> dict:
    g = spec.grammar
    return {
        "format": "tflm-spec/1",
        "grammar_fingerprint": g.fingerprint(),
        "grammar": g.to_text(),
        "attributes": {sym: [[d.name, d.kind] for d in decls] for sym, decls in sorted(spec.attributes.items())},
        "subclass_count": dict(sorted(spec.subclass_count.items())),
        "start_dist": np.asarray(spec.start_dist).tolist(),
        "rule_dist": {sym: {"rules": [r.id for r in g.rules_for(sym)], "probs": np.asarray(v).tolist()}
                      for sym, v in sorted(spec.rule_dist.items())},
        "child_dist": [{"rule": rid, "position": pos, "probs": np.asarray(v).tolist()}
                       for (rid, pos), v in sorted(spec.child_dist.items())],
        "attr_dist": [{"symbol": sym, "attribute": attr, "params": np.asarray(v).tolist()}
                      for (sym, attr), v in sorted(spec.attr_dist.items())],
        "attr_joint": None if spec.attr_joint is None else [
            {"symbol": sym, "subclass": j, "feature": m.feature,
             "weights": list(m.weights), "class_weights": list(m.class_weights)}
            for (sym, j), m in sorted(spec.attr_joint.items())],
    }


def spec_from_dict(data: dict, grammar: Grammar | None = None) -> TflmSpec:
    if data.get("format") != "tflm-spec/1":
        raise SpecError("not a serialized model (format tag missing)")
    if grammar is None:
        grammar = load_grammar(data["grammar"])
    if grammar.fingerprint() != data["grammar_fingerprint"]:
        raise GrammarMismatch("model was trained for a different grammar")
    for sym, entry in data["rule_dist"].items():
        if entry["rules"] != [r.id for r in grammar.rules_for(sym)]:
            raise GrammarMismatch(f"rule order for {sym!r} differs from the grammar")
    joint = None
    if data["attr_joint"] is not None:
        joint = {(e["symbol"], e["subclass"]): LogRegModel(tuple(e["weights"]), tuple(e["class_weights"]), e["feature"])
                 for e in data["attr_joint"]}
    spec = TflmSpec(
        grammar=grammar,
        attributes={sym: tuple(AttributeDecl(n, k) for n, k in decls) for sym, decls in data["attributes"].items()},
        subclass_count={k: int(v) for k, v in data["subclass_count"].items()},
        start_dist=np.array(data["start_dist"], dtype=float),
        rule_dist={sym: np.array(e["probs"], dtype=float) for sym, e in data["rule_dist"].items()},
        child_dist={(e["rule"], e["position"]): np.array(e["probs"], dtype=float) for e in data["child_dist"]},
        attr_dist={(e["symbol"], e["attribute"]): np.array(e["params"], dtype=float) for e in data["attr_dist"]},
        attr_joint=joint,
    )
    validate_spec(spec)
    return spec


def save_spec(spec: TflmSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec_to_dict(spec), fh, indent=1)
        fh.write("\n")


def load_spec(path, grammar: Grammar | None = None) -> TflmSpec:
    with open(path, encoding="utf-8") as fh:
        return spec_from_dict(json.load(fh), grammar)
