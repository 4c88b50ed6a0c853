"""Hard-EM training of TFLM parameters and the post-EM logistic joint model.

The E-step is the grounded SPN's MAP query. Because grounding a model over a
parse tree gives a tree-structured max-product problem, training evaluates
it for a whole corpus at once, one vectorized sweep per tree depth level;
``model.map_subclasses`` answers the same query on the explicit SPN and the
test suite checks that both agree.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCorpus, GrammarMismatch, MissingSubclassLabel
from .grammar import Grammar, minic_grammar
from .model import (
    BUGGY,
    SUSPICIOUSNESS,
    AttributeDecl,
    LogRegModel,
    TflmSpec,
    default_attributes,
    tree_nodes,
)

log = logging.getLogger(__name__)

STD_FLOOR = 0.01


@dataclass(frozen=True)
class TrainingConfig:
    k: int = 1
    em_iterations: int = 100
    smoothing_alpha: float = 1.0
    seed: int = 0
    convergence_epsilon: float = 1e-6
    std_floor: float = STD_FLOOR
    fit_joint: bool = True
    restarts: int = 1            # independent inits (seeds seed, seed+1, ...); best final score wins

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.em_iterations < 1:
            raise ValueError("em_iterations must be positive")
        if self.smoothing_alpha < 0:
            raise ValueError("smoothing_alpha must be non-negative")
        if self.restarts < 1:
            raise ValueError("restarts must be positive")


def _pairs(corpus):
    out = []
    for item in corpus:
        if hasattr(item, "program") and hasattr(item, "attributes"):
            out.append((item.program, item.attributes))
        else:
            program, attrs = item[0], item[1]
            out.append((program, attrs))
    return out


# -- flattened corpus ----------------------------------------------------------

class _Layout:
    """Index tables shared by every corpus under one grammar/attribute set."""

    def __init__(self, grammar: Grammar, attributes, subclass_count):
        self.grammar = grammar
        self.attributes = attributes
        self.subclass_count = subclass_count
        self.symbols = sorted(grammar.nonterminals)
        self.sym_index = {s: i for i, s in enumerate(self.symbols)}
        self.k = np.array([subclass_count[s] for s in self.symbols], dtype=np.int64)
        self.K = int(self.k.max())
        self.rule_local = {}
        self.n_rules = np.zeros(len(self.symbols), dtype=np.int64)
        for s in self.symbols:
            ids = [r.id for r in grammar.rules_for(s)]
            self.n_rules[self.sym_index[s]] = len(ids)
            for i, rid in enumerate(ids):
                self.rule_local[rid] = i
        self.R = int(self.n_rules.max())
        # (rule, position) keys for child distributions
        self.child_keys = [(r.id, pos) for r in grammar.rules for pos in range(len(grammar.child_symbols(r.id)))]
        self.child_key_index = {key: i for i, key in enumerate(self.child_keys)}
        self.child_key_syms = [(self.sym_index[grammar.rule(rid).lhs],
                                self.sym_index[grammar.child_symbols(rid)[pos]]) for rid, pos in self.child_keys]
        names = {}
        for decls in attributes.values():
            for d in decls:
                if names.setdefault(d.name, d.kind) != d.kind:
                    raise ValueError(f"attribute {d.name!r} declared with two kinds")
        self.attr_names = sorted(names)
        self.attr_kind = names
        self.has_attr = np.zeros((len(self.symbols), len(self.attr_names)), dtype=bool)
        for s, decls in attributes.items():
            for d in decls:
                self.has_attr[self.sym_index[s], self.attr_names.index(d.name)] = True


class _Batch:
    def __init__(self, layout: _Layout, pairs, optional=()):
        self.layout = layout
        sym, rule, parent, key, prog = [], [], [], [], []
        depth = []
        values = {a: [] for a in layout.attr_names}
        g = layout.grammar
        offset = 0
        for p, (program, attrs) in enumerate(pairs):
            nodes, parents = tree_nodes(program)
            for node, par in zip(nodes, parents):
                if not g.has_rule(node.rule) or g.rule(node.rule).lhs != node.symbol:
                    raise GrammarMismatch(f"node {node.node_id}: rule {node.rule!r} not in grammar")
                sym.append(layout.sym_index[node.symbol])
                rule.append(layout.rule_local[node.rule])
                parent.append(par + offset if par >= 0 else -1)
                depth.append(node.depth)
                prog.append(p)
                for a in layout.attr_names:
                    values[a].append(attrs.get((node.node_id, a), math.nan))
            for node in nodes:
                if [c.symbol for c in node.children] != g.child_symbols(node.rule):
                    raise GrammarMismatch(f"node {node.node_id}: children do not match {node.rule!r}")
            # child key of each node (its parent's rule and its position)
            keys = [-1] * len(nodes)
            for node in nodes:
                for pos, child in enumerate(node.children):
                    keys[child.node_id] = layout.child_key_index[(node.rule, pos)]
            key.extend(keys)
            offset += len(nodes)
        self.n = offset
        self.n_programs = len(pairs)
        self.sym = np.array(sym, dtype=np.int64)
        self.rule = np.array(rule, dtype=np.int64)
        self.parent = np.array(parent, dtype=np.int64)
        self.key = np.array(key, dtype=np.int64)
        self.prog = np.array(prog, dtype=np.int64)
        self.depth = np.array(depth, dtype=np.int64)
        self.roots = np.flatnonzero(self.parent < 0)
        self.values = {a: np.array(v, dtype=float) for a, v in values.items()}
        # an attribute is present on a node iff its symbol declares it
        self.present = {a: layout.has_attr[self.sym, i] for i, a in enumerate(layout.attr_names)}
        for a in layout.attr_names:
            if a in optional:
                continue
            missing = self.present[a] & np.isnan(self.values[a])
            if missing.any():
                raise ValueError(f"attribute {a!r} unobserved on {int(missing.sum())} training nodes")
        max_depth = int(self.depth.max())
        self.levels = [np.flatnonzero(self.depth == d) for d in range(1, max_depth + 1)]

    def slices(self):
        bounds = np.searchsorted(self.prog, np.arange(self.n_programs + 1))
        return [(int(bounds[i]), int(bounds[i + 1])) for i in range(self.n_programs)]


# -- parameters <-> dense tables ----------------------------------------------

def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _dense_tables(spec: TflmSpec, layout: _Layout):
    S, K, R = len(layout.symbols), layout.K, layout.R
    neg = -np.inf
    rho = np.full((S, K, R), neg)
    for s, i in layout.sym_index.items():
        k, nr = layout.k[i], layout.n_rules[i]
        rho[i, :k, :nr] = _log(spec.rule_dist[s])
    pi = np.full((len(layout.child_keys), K, K), neg)
    for c, key in enumerate(layout.child_keys):
        arr = spec.child_dist[key]
        pi[c, :arr.shape[0], :arr.shape[1]] = _log(arr)
    start = np.full(K, neg)
    start[:len(spec.start_dist)] = _log(spec.start_dist)
    return rho, pi, start


def _local_scores(spec: TflmSpec, batch: _Batch, rho, skip=()) -> np.ndarray:
    layout = batch.layout
    K = layout.K
    score = rho[batch.sym, :, batch.rule].copy()           # (N, K)
    for a in layout.attr_names:
        if a in skip:
            continue
        present = batch.present[a]
        if not present.any():
            continue
        idx = np.flatnonzero(present)
        x = batch.values[a][idx]
        syms = batch.sym[idx]
        term = np.zeros((len(idx), K))
        for s in np.unique(syms):
            rows = syms == s
            params = np.asarray(spec.attr_dist[(layout.symbols[s], a)], dtype=float)
            k = layout.k[s]
            xs = x[rows][:, None]
            if layout.attr_kind[a] == "binary":
                p = params[None, :]
                t = np.where(xs == 1, _log(p), _log(1.0 - p))
            else:
                mean, std = params[:, 0][None, :], params[:, 1][None, :]
                z = (xs - mean) / std
                t = -0.5 * z * z - np.log(std) - 0.5 * math.log(2 * math.pi)
            block = np.full((rows.sum(), K), -np.inf)
            block[:, :k] = t
            term[rows] = block
        score[idx] += term
    return score


def e_step(spec: TflmSpec, batch: _Batch):
    """MAP subclasses for every node; returns (classes, per-program log scores)."""
    rho, pi, start = _dense_tables(spec, batch.layout)
    score = _local_scores(spec, batch, rho)
    best_child = [None] * len(batch.levels)
    for li in range(len(batch.levels) - 1, -1, -1):
        level = batch.levels[li]
        cand = pi[batch.key[level]] + score[level][:, None, :]     # (n, K_parent, K_child)
        arg = cand.argmax(axis=2)
        msg = np.take_along_axis(cand, arg[:, :, None], axis=2)[:, :, 0]
        best_child[li] = arg
        np.add.at(score, batch.parent[level], msg)
    root_cand = start[None, :] + score[batch.roots]
    classes = np.empty(batch.n, dtype=np.int64)
    classes[batch.roots] = root_cand.argmax(axis=1)
    totals = root_cand.max(axis=1)
    for level, arg in zip(batch.levels, best_child):
        classes[level] = arg[np.arange(len(level)), classes[batch.parent[level]]]
    return classes, totals


def completed_log_score(spec: TflmSpec, batch: _Batch, classes: np.ndarray) -> np.ndarray:
    """Per-program log P(T, A, C) for a given full subclass assignment."""
    rho, pi, start = _dense_tables(spec, batch.layout)
    local = _local_scores(spec, batch, rho)
    node = local[np.arange(batch.n), classes]
    child = np.flatnonzero(batch.parent >= 0)
    node[child] += pi[batch.key[child], classes[batch.parent[child]], classes[child]]
    node[batch.roots] += start[classes[batch.roots]]
    return np.bincount(batch.prog, weights=node, minlength=batch.n_programs)


def _m_step(batch: _Batch, classes: np.ndarray, alpha: float, std_floor: float):
    layout = batch.layout
    S, K, R = len(layout.symbols), layout.K, layout.R

    def normalize(counts, width):
        counts = counts[..., :width] + alpha
        tot = counts.sum(axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(tot > 0, counts / np.where(tot > 0, tot, 1), 1.0 / width)
        return out

    start_sym = layout.sym_index[layout.grammar.start_symbol]
    kS = int(layout.k[start_sym])
    start_counts = np.bincount(classes[batch.roots], minlength=K).astype(float)
    start_dist = normalize(start_counts, kS)

    rule_counts = np.zeros((S, K, R))
    np.add.at(rule_counts, (batch.sym, classes, batch.rule), 1.0)
    rule_dist = {}
    for s, i in layout.sym_index.items():
        rule_dist[s] = normalize(rule_counts[i, :layout.k[i]], int(layout.n_rules[i]))

    child = np.flatnonzero(batch.parent >= 0)
    child_counts = np.zeros((len(layout.child_keys), K, K))
    np.add.at(child_counts, (batch.key[child], classes[batch.parent[child]], classes[child]), 1.0)
    child_dist = {}
    for c, key in enumerate(layout.child_keys):
        ps, cs = layout.child_key_syms[c]
        child_dist[key] = normalize(child_counts[c, :layout.k[ps]], int(layout.k[cs]))

    attr_dist = {}
    for a in layout.attr_names:
        present = batch.present[a]
        idx = np.flatnonzero(present)
        x = batch.values[a][idx]
        grp = batch.sym[idx] * K + classes[idx]
        n = np.bincount(grp, minlength=S * K).reshape(S, K)
        if layout.attr_kind[a] == "binary":
            ones = np.bincount(grp, weights=(x == 1).astype(float), minlength=S * K).reshape(S, K)
            denom = n + 2 * alpha
            with np.errstate(invalid="ignore", divide="ignore"):
                p = np.where(denom > 0, (ones + alpha) / np.where(denom > 0, denom, 1), 0.5)
            for s, i in layout.sym_index.items():
                if layout.has_attr[i, layout.attr_names.index(a)]:
                    attr_dist[(s, a)] = p[i, :layout.k[i]].copy()
        else:
            sums = np.bincount(grp, weights=x, minlength=S * K).reshape(S, K)
            with np.errstate(invalid="ignore", divide="ignore"):
                mean = sums / n
            dev = (x - mean.reshape(-1)[grp]) ** 2
            ss = np.bincount(grp, weights=dev, minlength=S * K).reshape(S, K)
            with np.errstate(invalid="ignore", divide="ignore"):
                std = np.sqrt(ss / n)
            # empty subclasses fall back to the symbol's pooled statistics
            sym_n = n.sum(axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                pooled_mean = np.bincount(batch.sym[idx], weights=x, minlength=S) / sym_n
            pdev = (x - pooled_mean[batch.sym[idx]]) ** 2
            with np.errstate(invalid="ignore", divide="ignore"):
                pooled_std = np.sqrt(np.bincount(batch.sym[idx], weights=pdev, minlength=S) / sym_n)
            pooled_mean = np.where(sym_n > 0, pooled_mean, 0.5)
            pooled_std = np.where(sym_n > 0, pooled_std, 0.5)
            mean = np.where(n > 0, mean, pooled_mean[:, None])
            std = np.where(n > 0, std, pooled_std[:, None])
            std = np.maximum(std, std_floor)
            for s, i in layout.sym_index.items():
                if layout.has_attr[i, layout.attr_names.index(a)]:
                    attr_dist[(s, a)] = np.stack([mean[i, :layout.k[i]], std[i, :layout.k[i]]], axis=1)

    return TflmSpec(
        grammar=layout.grammar,
        attributes=layout.attributes,
        subclass_count=dict(layout.subclass_count),
        start_dist=start_dist,
        rule_dist=rule_dist,
        child_dist=child_dist,
        attr_dist=attr_dist,
    )


def _setup(corpus, config: TrainingConfig, grammar=None, attributes=None):
    pairs = _pairs(corpus)
    if not pairs:
        raise EmptyCorpus("training corpus is empty")
    grammar = grammar or minic_grammar()
    attributes = attributes if attributes is not None else default_attributes(grammar)
    layout = _Layout(grammar, attributes, {s: config.k for s in grammar.nonterminals})
    return pairs, layout, _Batch(layout, pairs)


def _classes_array(batch: _Batch, assignments) -> np.ndarray:
    classes = np.empty(batch.n, dtype=np.int64)
    for (start, stop), assign in zip(batch.slices(), assignments):
        for i in range(stop - start):
            if i not in assign:
                raise MissingSubclassLabel(f"node {i} of program {batch.prog[start]} has no subclass")
            classes[start + i] = assign[i]
    k = batch.layout.k[batch.sym]
    if np.any((classes < 0) | (classes >= k)):
        raise MissingSubclassLabel("subclass label out of range")
    return classes


def _assignments(batch: _Batch, classes: np.ndarray) -> list[dict[int, int]]:
    return [dict(enumerate(classes[a:b].tolist())) for a, b in batch.slices()]


def m_step_estimate(corpus, assignments, config: TrainingConfig, grammar=None, attributes=None) -> TflmSpec:
    """Smoothed maximum-likelihood parameters for fixed subclass labels.

    ``assignments`` holds one {node_id: subclass} dict per program.
    """
    _, _, batch = _setup(corpus, config, grammar, attributes)
    classes = _classes_array(batch, assignments)
    return _m_step(batch, classes, config.smoothing_alpha, config.std_floor)


def _random_classes(batch: _Batch, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return (rng.random(batch.n) * batch.layout.k[batch.sym]).astype(np.int64)


def init_params(corpus, config: TrainingConfig, grammar=None, attributes=None) -> TflmSpec:
    """Random (seeded) subclass labels followed by one M-step."""
    _, _, batch = _setup(corpus, config, grammar, attributes)
    return _m_step(batch, _random_classes(batch, config.seed), config.smoothing_alpha, config.std_floor)


@dataclass
class TrainingResult:
    spec: TflmSpec
    trace: list[float]
    assignments: list[dict[int, int]] = field(repr=False)


def hard_em_train(corpus, config: TrainingConfig, grammar=None, attributes=None) -> TrainingResult:
    """Alternate MAP subclass completion with re-estimation.

    ``trace[t]`` is the total completed-data log score of iteration t's
    E-step (new labels scored under the previous parameters). Training stops
    when labels stop changing, when the score gains less than
    ``convergence_epsilon``, or after ``em_iterations`` iterations. With
    ``config.restarts > 1`` the run with the highest final score is kept
    (earliest on ties).
    """
    _, _, batch = _setup(corpus, config, grammar, attributes)
    best = None
    for r in range(config.restarts):
        result = _run_em(batch, config, config.seed + r)
        if best is None or result.trace[-1] > best.trace[-1]:
            best = result
    return best


def _run_em(batch: _Batch, config: TrainingConfig, seed: int) -> TrainingResult:
    classes = _random_classes(batch, seed)
    spec = _m_step(batch, classes, config.smoothing_alpha, config.std_floor)
    trace: list[float] = []
    for it in range(1, config.em_iterations + 1):
        t0 = time.perf_counter()
        new_classes, totals = e_step(spec, batch)
        score = float(totals.sum())
        trace.append(score)
        log.info("em iteration %d  log score %.6f  %.3fs", it, score, time.perf_counter() - t0)
        unchanged = np.array_equal(new_classes, classes)
        stalled = len(trace) > 1 and trace[-1] - trace[-2] < config.convergence_epsilon
        classes = new_classes
        if unchanged or stalled:
            break
        spec = _m_step(batch, classes, config.smoothing_alpha, config.std_floor)
    return TrainingResult(spec, trace, _assignments(batch, classes))


def train(corpus, config: TrainingConfig, grammar=None, attributes=None) -> TrainingResult:
    """Hard EM followed (optionally) by the per-subclass logistic joint model."""
    result = hard_em_train(corpus, config, grammar, attributes)
    if config.fit_joint:
        result.spec = fit_subclass_logreg(result.spec, corpus, result.assignments)
    return result


def _logsumexp(a, axis):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def batch_buggy_posteriors(spec: TflmSpec, corpus) -> list[dict[int, float]]:
    """P(buggy = 1 | every other attribute) per node, for many programs at once.

    Same quantity as ``model.buggy_posteriors`` (the tests check this),
    computed by one upward and one downward sum-product sweep over the
    stacked parse trees. Supplied buggy values are ignored.
    """
    pairs = _pairs(corpus)
    if not pairs:
        return []
    attributes = spec.attributes
    layout = _Layout(spec.grammar, attributes, spec.subclass_count)
    batch = _Batch(layout, pairs, optional=(BUGGY,))
    rho, pi, start = _dense_tables(spec, layout)
    up = _local_scores(spec, batch, rho, skip=(BUGGY,))
    msgs = [None] * len(batch.levels)
    for li in range(len(batch.levels) - 1, -1, -1):
        level = batch.levels[li]
        msg = _logsumexp(pi[batch.key[level]] + up[level][:, None, :], axis=2)   # (n, K_parent)
        msgs[li] = msg
        np.add.at(up, batch.parent[level], msg)
    down = np.full_like(up, -np.inf)
    down[batch.roots] = start[None, :]
    for level, msg in zip(batch.levels, msgs):
        par = batch.parent[level]
        with np.errstate(invalid="ignore"):
            rest = np.where(np.isneginf(msg), -np.inf, down[par] + up[par] - msg)
        down[level] = _logsumexp(rest[:, :, None] + pi[batch.key[level]], axis=1)
    logz = _logsumexp(start[None, :] + up[batch.roots], axis=1)
    post = np.exp(down + up - logz[batch.prog][:, None])                        # (N, K)

    p_buggy = np.zeros_like(post)
    has = batch.present[BUGGY] if BUGGY in batch.present else np.zeros(batch.n, bool)
    for s, i in layout.sym_index.items():
        rows = np.flatnonzero(has & (batch.sym == i))
        if not len(rows):
            continue
        k = layout.k[i]
        p_buggy[rows, :k] = np.asarray(spec.attr_dist[(s, BUGGY)], dtype=float)[None, :]
        for j in range(k):
            model = (spec.attr_joint or {}).get((s, j))
            if model is not None:
                z = model.weights[0] * batch.values[model.feature][rows] + model.weights[1]
                p_buggy[rows, j] = _sigmoid(z)
    prob = np.sum(post * p_buggy, axis=1)
    out = []
    for a, b in batch.slices():
        out.append({i: float(prob[a + i]) for i in range(b - a) if has[a + i]})
    return out


# -- logistic joint model -------------------------------------------------------

L2_PENALTY = 1.0


def balanced_class_weights(y: np.ndarray) -> tuple[float, float]:
    """n_total / (2 * n_class) for classes 0 and 1."""
    n = len(y)
    n1 = float(np.sum(y == 1))
    n0 = n - n1
    return (n / (2 * n0) if n0 else 0.0, n / (2 * n1) if n1 else 0.0)


def logreg_objective(w, x, y, class_weights, l2=L2_PENALTY) -> float:
    """Class-weighted log-likelihood of (feature, bias) weights minus an L2 term."""
    z = w[0] * x + w[1]
    cw = np.where(y == 1, class_weights[1], class_weights[0])
    # log sigmoid(z) and log(1 - sigmoid(z)), computed stably
    ll = np.where(y == 1, -np.logaddexp(0, -z), -np.logaddexp(0, z))
    return float(np.sum(cw * ll) - 0.5 * l2 * (w[0] ** 2 + w[1] ** 2))


def logreg_gradient(w, x, y, class_weights, l2=L2_PENALTY) -> np.ndarray:
    z = w[0] * x + w[1]
    cw = np.where(y == 1, class_weights[1], class_weights[0])
    r = cw * (y - _sigmoid(z))
    return np.array([np.sum(r * x) - l2 * w[0], np.sum(r) - l2 * w[1]])


def _sigmoid(z):
    return np.exp(-np.logaddexp(0, -z))


def fit_logreg(x, y, class_weights=None, l2=L2_PENALTY, max_iter=100, tol=1e-12) -> LogRegModel:
    """Newton's method on the concave penalized objective."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if class_weights is None:
        class_weights = balanced_class_weights(y)
    cw = np.where(y == 1, class_weights[1], class_weights[0])
    w = np.zeros(2)
    for _ in range(max_iter):
        p = _sigmoid(w[0] * x + w[1])
        r = cw * (y - p)
        grad = np.array([np.sum(r * x) - l2 * w[0], np.sum(r) - l2 * w[1]])
        h = cw * p * (1 - p)
        hxx, hxb, hbb = np.sum(h * x * x) + l2, np.sum(h * x), np.sum(h) + l2
        det = hxx * hbb - hxb * hxb
        step = np.array([hbb * grad[0] - hxb * grad[1], hxx * grad[1] - hxb * grad[0]]) / det
        w = w + step
        if np.max(np.abs(step)) < tol:
            break
    return LogRegModel((float(w[0]), float(w[1])), (float(class_weights[0]), float(class_weights[1])))


def fit_subclass_logreg(spec: TflmSpec, corpus, assignments, feature: str = SUSPICIOUSNESS) -> TflmSpec:
    """Fit one logistic model of ``buggy`` per (symbol, subclass) group.

    Groups containing a single class keep their Bernoulli and get no model.
    """
    groups: dict[tuple[str, int], tuple[list, list]] = {}
    for (program, attrs), assign in zip(_pairs(corpus), assignments):
        nodes, _ = tree_nodes(program)
        for node in nodes:
            sym = node.symbol
            if spec.attr_kind(sym, BUGGY) != "binary" or spec.attr_kind(sym, feature) != "real":
                continue
            key = (sym, assign[node.node_id])
            xs, ys = groups.setdefault(key, ([], []))
            xs.append(attrs[(node.node_id, feature)])
            ys.append(attrs[(node.node_id, BUGGY)])
    joint = {}
    for key in sorted(groups):
        xs, ys = groups[key]
        y = np.asarray(ys, dtype=float)
        if y.min() == y.max():
            continue
        model = fit_logreg(np.asarray(xs, dtype=float), y)
        joint[key] = LogRegModel(model.weights, model.class_weights, feature)
    return spec.replace(attr_joint=joint)


__all__ = [
    "AttributeDecl",
    "TrainingConfig",
    "TrainingResult",
    "balanced_class_weights",
    "batch_buggy_posteriors",
    "completed_log_score",
    "e_step",
    "fit_logreg",
    "fit_subclass_logreg",
    "hard_em_train",
    "init_params",
    "logreg_gradient",
    "logreg_objective",
    "m_step_estimate",
    "train",
]
