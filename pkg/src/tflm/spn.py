"""Sum-product networks with exact log-space inference.

Networks are immutable DAGs of weighted sums, products and univariate
leaves. Evaluation is compiled once into height levels so every query is a
single vectorized upward pass (plus a downward pass for all-marginals and
MAP backtracking); each node is touched once per pass.

Sum weights are stored normalized, so ``log_partition`` is 0 for any valid
network; it is kept for generality and for checking that claim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable

import numpy as np

from .errors import (
    CycleDetected,
    DomainMismatch,
    IncompleteSum,
    NonDecomposableProduct,
    NonPositiveWeight,
    QueryInEvidence,
    SpnError,
)

SUM, PRODUCT, LEAF = 0, 1, 2
NEG_INF = -math.inf
_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else NEG_INF


# -- leaf distributions ------------------------------------------------------

@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise SpnError(f"Bernoulli p must lie in [0, 1], got {self.p}")

    domain = "binary"

    def logpdf(self, value) -> float:
        return _log(self.p) if value == 1 else _log(1.0 - self.p)

    def mode(self):
        return 1 if self.p > 0.5 else 0


@dataclass(frozen=True)
class Categorical:
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if not self.probs or min(self.probs) < 0 or abs(sum(self.probs) - 1.0) > 1e-9:
            raise SpnError(f"categorical weights must be non-negative and sum to 1: {self.probs}")

    @property
    def domain(self):
        return ("categorical", len(self.probs))

    def logpdf(self, value) -> float:
        return _log(self.probs[int(value)])

    def mode(self):
        return int(np.argmax(self.probs))


@dataclass(frozen=True)
class Gaussian:
    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise SpnError(f"Gaussian stddev must be positive, got {self.std}")

    domain = "real"

    def logpdf(self, value) -> float:
        z = (value - self.mean) / self.std
        return -0.5 * z * z - math.log(self.std) - _LOG_SQRT_2PI

    def mode(self):
        return self.mean


@dataclass(frozen=True)
class Leaf:
    variable: Hashable
    dist: Bernoulli | Categorical | Gaussian


# -- graph -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpnGraph:
    kinds: tuple[int, ...]
    children: tuple[tuple[int, ...], ...]
    weights: tuple[tuple[float, ...], ...]     # empty tuple for non-sum nodes
    leaves: tuple[Leaf | None, ...]
    root: int
    _plan: "_Plan" = field(default=None, repr=False)

    def __len__(self):
        return len(self.kinds)

    @property
    def variables(self) -> list:
        return self.plan.variables

    @property
    def plan(self) -> "_Plan":
        if self._plan is None:
            object.__setattr__(self, "_plan", _Plan(self))
        return self._plan

    def to_json(self) -> dict:
        """Debug dump; not a stable format."""
        nodes = []
        for i, kind in enumerate(self.kinds):
            if kind == LEAF:
                leaf = self.leaves[i]
                nodes.append({"kind": "leaf", "variable": repr(leaf.variable),
                              "dist": type(leaf.dist).__name__, "params": list(vars(leaf.dist).values())})
            elif kind == SUM:
                nodes.append({"kind": "sum", "children": list(self.children[i]), "weights": list(self.weights[i])})
            else:
                nodes.append({"kind": "product", "children": list(self.children[i])})
        return {"root": self.root, "nodes": nodes}


class SpnBuilder:
    """Incremental constructor; node ids are assigned in creation order."""

    def __init__(self):
        self.kinds: list[int] = []
        self.children: list[tuple[int, ...]] = []
        self.weights: list[tuple[float, ...]] = []
        self.leaves: list[Leaf | None] = []

    def __len__(self):
        return len(self.kinds)

    def _add(self, kind, children=(), weights=(), leaf=None) -> int:
        self.kinds.append(kind)
        self.children.append(tuple(children))
        self.weights.append(tuple(float(w) for w in weights))
        self.leaves.append(leaf)
        return len(self.kinds) - 1

    def leaf(self, variable, dist) -> int:
        return self._add(LEAF, leaf=Leaf(variable, dist))

    def sum(self, children, weights) -> int:
        children, weights = list(children), list(weights)
        if len(children) != len(weights) or not children:
            raise SpnError("sum node needs one weight per child and at least one child")
        return self._add(SUM, children, weights)

    def product(self, children) -> int:
        children = list(children)
        if not children:
            raise SpnError("product node needs at least one child")
        return self._add(PRODUCT, children)

    def build(self, root: int) -> SpnGraph:
        return SpnGraph(tuple(self.kinds), tuple(self.children), tuple(self.weights), tuple(self.leaves), root)


# -- compiled evaluation plan -----------------------------------------------

class _Level:
    __slots__ = ("nodes", "child", "seg", "starts", "logw", "size")

    def __init__(self, nodes, children_of, weights_of=None):
        self.nodes = np.asarray(nodes, dtype=np.int64)
        kids = [children_of[n] for n in nodes]
        counts = np.array([len(k) for k in kids], dtype=np.int64)
        self.child = np.fromiter((c for k in kids for c in k), dtype=np.int64, count=int(counts.sum()))
        self.starts = np.concatenate(([0], np.cumsum(counts)[:-1])).astype(np.int64)
        self.seg = np.repeat(np.arange(len(nodes)), counts)
        self.size = len(self.child)
        if weights_of is not None:
            w = np.fromiter((x for n in nodes for x in weights_of[n]), dtype=float, count=self.size)
            with np.errstate(divide="ignore"):
                self.logw = np.log(w)


def _topological_heights(spn: SpnGraph) -> list[int]:
    n = len(spn.kinds)
    for i, kids in enumerate(spn.children):
        for c in kids:
            if not 0 <= c < n:
                raise SpnError(f"node {i} has unknown child {c}")
    pending = [len(k) for k in spn.children]
    parents: list[list[int]] = [[] for _ in range(n)]
    for i, kids in enumerate(spn.children):
        for c in kids:
            parents[c].append(i)
    height = [0] * n
    ready = [i for i in range(n) if pending[i] == 0]
    done = 0
    while ready:
        i = ready.pop()
        done += 1
        for p in parents[i]:
            if height[i] + 1 > height[p]:
                height[p] = height[i] + 1
            pending[p] -= 1
            if pending[p] == 0:
                ready.append(p)
    if done != n:
        raise CycleDetected("network contains a directed cycle")
    return height


class _Plan:
    def __init__(self, spn: SpnGraph):
        self.n = len(spn.kinds)
        self.root = spn.root
        self.height = height = _topological_heights(spn)
        for i, kind in enumerate(spn.kinds):
            if kind == LEAF and spn.leaves[i] is None:
                raise SpnError(f"leaf node {i} has no distribution")
            if kind != LEAF and not spn.children[i]:
                raise SpnError(f"internal node {i} has no children")
            if kind == SUM and len(spn.weights[i]) != len(spn.children[i]):
                raise SpnError(f"sum node {i}: weight/child count mismatch")

        # variables and their domains
        self.variables: list = []
        self.var_index: dict = {}
        self.var_domain: list = []
        for leaf in spn.leaves:
            if leaf is None:
                continue
            v = leaf.variable
            if v not in self.var_index:
                self.var_index[v] = len(self.variables)
                self.variables.append(v)
                self.var_domain.append(leaf.dist.domain)
            elif self.var_domain[self.var_index[v]] != leaf.dist.domain:
                raise DomainMismatch(f"variable {v!r} has leaves with different domains")

        leaf_ids = [i for i, k in enumerate(spn.kinds) if k == LEAF]
        bern = [i for i in leaf_ids if isinstance(spn.leaves[i].dist, Bernoulli)]
        cat = [i for i in leaf_ids if isinstance(spn.leaves[i].dist, Categorical)]
        gau = [i for i in leaf_ids if isinstance(spn.leaves[i].dist, Gaussian)]

        vi = self.var_index
        self.bern_idx = np.array(bern, dtype=np.int64)
        self.bern_var = np.array([vi[spn.leaves[i].variable] for i in bern], dtype=np.int64)
        p = np.array([spn.leaves[i].dist.p for i in bern], dtype=float)
        with np.errstate(divide="ignore"):
            self.bern_log = np.stack([np.log1p(-p), np.log(p)], axis=1) if bern else np.zeros((0, 2))

        self.cat_idx = np.array(cat, dtype=np.int64)
        self.cat_var = np.array([vi[spn.leaves[i].variable] for i in cat], dtype=np.int64)
        width = max((len(spn.leaves[i].dist.probs) for i in cat), default=1)
        table = np.zeros((len(cat), width))
        for row, i in enumerate(cat):
            probs = spn.leaves[i].dist.probs
            table[row, :len(probs)] = probs
        with np.errstate(divide="ignore"):
            self.cat_log = np.log(table)

        self.gau_idx = np.array(gau, dtype=np.int64)
        self.gau_var = np.array([vi[spn.leaves[i].variable] for i in gau], dtype=np.int64)
        self.gau_mean = np.array([spn.leaves[i].dist.mean for i in gau], dtype=float)
        self.gau_std = np.array([spn.leaves[i].dist.std for i in gau], dtype=float)

        by_height: dict[int, tuple[list, list]] = {}
        for i, kind in enumerate(spn.kinds):
            if kind != LEAF:
                by_height.setdefault(height[i], ([], []))[0 if kind == SUM else 1].append(i)
        self.levels = []
        for h in sorted(by_height):
            sums, prods = by_height[h]
            self.levels.append((
                _Level(sums, spn.children, spn.weights) if sums else None,
                _Level(prods, spn.children) if prods else None,
            ))

    # evidence -> per-variable observation array (NaN = unobserved)
    def observe(self, evidence) -> np.ndarray:
        obs = np.full(len(self.variables), np.nan)
        for var, value in (evidence or {}).items():
            idx = self.var_index.get(var)
            if idx is None:
                raise DomainMismatch(f"evidence variable {var!r} does not occur in the network")
            dom = self.var_domain[idx]
            try:
                fval = float(value)
            except (TypeError, ValueError):
                raise DomainMismatch(f"value {value!r} for {var!r} is not numeric") from None
            if dom == "binary":
                ok = fval in (0.0, 1.0)
            elif dom == "real":
                ok = math.isfinite(fval)
            else:
                ok = fval.is_integer() and 0 <= fval < dom[1]
            if not ok:
                raise DomainMismatch(f"value {value!r} outside the domain of {var!r} ({dom})")
            obs[idx] = fval
        return obs

    def leaf_values(self, obs: np.ndarray, maximize: bool = False) -> np.ndarray:
        v = np.zeros(self.n)
        if len(self.bern_idx):
            x = obs[self.bern_var]
            seen = ~np.isnan(x)
            vals = np.zeros(len(x)) if not maximize else self.bern_log.max(axis=1)
            xi = np.where(seen, x, 0).astype(np.int64)
            vals = np.where(seen, self.bern_log[np.arange(len(x)), xi], vals)
            v[self.bern_idx] = vals
        if len(self.cat_idx):
            x = obs[self.cat_var]
            seen = ~np.isnan(x)
            vals = np.zeros(len(x)) if not maximize else self.cat_log.max(axis=1)
            xi = np.where(seen, x, 0).astype(np.int64)
            vals = np.where(seen, self.cat_log[np.arange(len(x)), xi], vals)
            v[self.cat_idx] = vals
        if len(self.gau_idx):
            x = obs[self.gau_var]
            seen = ~np.isnan(x)
            z = (np.where(seen, x, self.gau_mean) - self.gau_mean) / self.gau_std
            dens = -0.5 * z * z - np.log(self.gau_std) - _LOG_SQRT_2PI
            v[self.gau_idx] = np.where(seen, dens, dens if maximize else 0.0)
        return v

    def upward(self, leafvals: np.ndarray) -> np.ndarray:
        v = leafvals
        with np.errstate(divide="ignore", invalid="ignore"):
            for sums, prods in self.levels:
                if sums is not None:
                    vals = sums.logw + v[sums.child]
                    m = np.maximum.reduceat(vals, sums.starts)
                    shift = np.where(np.isfinite(m), m, 0.0)
                    tot = np.add.reduceat(np.exp(vals - shift[sums.seg]), sums.starts)
                    v[sums.nodes] = np.log(tot) + shift
                if prods is not None:
                    v[prods.nodes] = np.add.reduceat(v[prods.child], prods.starts)
        return v

    def upward_max(self, leafvals: np.ndarray):
        """Max-product pass; returns values and the chosen child of each sum node."""
        v = leafvals
        choice = np.full(self.n, -1, dtype=np.int64)
        for sums, prods in self.levels:
            if sums is not None:
                vals = sums.logw + v[sums.child]
                m = np.maximum.reduceat(vals, sums.starts)
                pos = np.where(vals >= m[sums.seg], np.arange(sums.size), sums.size)
                best = np.minimum.reduceat(pos, sums.starts)
                v[sums.nodes] = m
                choice[sums.nodes] = best - sums.starts      # position within the child list
            if prods is not None:
                v[prods.nodes] = np.add.reduceat(v[prods.child], prods.starts)
        return v, choice

    def downward(self, v: np.ndarray) -> np.ndarray:
        """Log of d(root)/d(node) for every node."""
        g = np.full(self.n, NEG_INF)
        g[self.root] = 0.0
        with np.errstate(invalid="ignore"):
            for sums, prods in reversed(self.levels):
                if prods is not None:
                    cv = v[prods.child]
                    finite = np.isfinite(cv)
                    fin_sum = np.add.reduceat(np.where(finite, cv, 0.0), prods.starts)
                    n_inf = np.add.reduceat((~finite).astype(np.int64), prods.starts)
                    fs, ni = fin_sum[prods.seg], n_inf[prods.seg]
                    others = np.where(finite,
                                      np.where(ni == 0, fs - cv, NEG_INF),
                                      np.where(ni == 1, fs, NEG_INF))
                    contrib = g[prods.nodes][prods.seg] + others
                    np.logaddexp.at(g, prods.child, contrib)
                if sums is not None:
                    contrib = g[sums.nodes][sums.seg] + sums.logw
                    np.logaddexp.at(g, sums.child, contrib)
        return g

    def var_id(self, var) -> int:
        try:
            return self.var_index[var]
        except KeyError:
            raise DomainMismatch(f"variable {var!r} does not occur in the network") from None


# -- public operations -------------------------------------------------------

def validate_spn(spn: SpnGraph) -> dict[int, frozenset]:
    """Check every structural invariant and return each node's scope."""
    plan = spn.plan  # raises CycleDetected / domain conflicts
    order = sorted(range(len(spn.kinds)), key=plan.height.__getitem__)
    bits: list[int] = [0] * len(spn.kinds)
    for i in order:
        kind = spn.kinds[i]
        if kind == LEAF:
            bits[i] = 1 << plan.var_index[spn.leaves[i].variable]
        elif kind == SUM:
            ws = spn.weights[i]
            if any(not w > 0 for w in ws):
                raise NonPositiveWeight(f"sum node {i} has a non-positive weight")
            if abs(math.fsum(ws) - 1.0) > 1e-9:
                raise SpnError(f"sum node {i}: weights sum to {math.fsum(ws)}, not 1")
            scopes = {bits[c] for c in spn.children[i]}
            if len(scopes) != 1:
                raise IncompleteSum(f"sum node {i}: children have different scopes")
            bits[i] = scopes.pop()
        else:
            acc = 0
            for c in spn.children[i]:
                if acc & bits[c]:
                    raise NonDecomposableProduct(f"product node {i}: children share variables")
                acc |= bits[c]
            bits[i] = acc
    variables = plan.variables
    cache: dict[int, frozenset] = {}
    out = {}
    for i, b in enumerate(bits):
        if b not in cache:
            cache[b] = frozenset(variables[k] for k in range(b.bit_length()) if b >> k & 1)
        out[i] = cache[b]
    return out


def log_partition(spn: SpnGraph) -> float:
    plan = spn.plan
    return float(plan.upward(plan.leaf_values(plan.observe(None)))[plan.root])


def log_evidence(spn: SpnGraph, evidence) -> float:
    """Log of the unnormalized evidence value (subtract log_partition to normalize)."""
    plan = spn.plan
    return float(plan.upward(plan.leaf_values(plan.observe(evidence)))[plan.root])


def _query_domain(plan, query):
    dom = plan.var_domain[plan.var_id(query)]
    if dom == "real":
        raise DomainMismatch(f"query variable {query!r} is continuous")
    return [0, 1] if dom == "binary" else list(range(dom[1]))


def marginal_posterior(spn: SpnGraph, evidence, query) -> dict:
    """P(query = v | evidence) for each value v, by one evidence query per value."""
    evidence = dict(evidence or {})
    if query in evidence:
        raise QueryInEvidence(f"{query!r} is already observed")
    values = _query_domain(spn.plan, query)
    logs = np.array([log_evidence(spn, {**evidence, query: v}) for v in values])
    top = logs.max()
    if not np.isfinite(top):
        raise SpnError("evidence has probability zero")
    w = np.exp(logs - top)
    w /= w.sum()
    return {v: float(p) for v, p in zip(values, w)}


def all_marginals(spn: SpnGraph, evidence, variables=None) -> dict:
    """Posterior of every unobserved discrete variable from one up/down sweep.

    Uses the fact that the network polynomial is multilinear in the leaves of
    any single variable: P(x=u, e) is the sum over x's leaves of
    d(root)/d(leaf) * leaf(u). Agrees with ``marginal_posterior``.
    """
    plan = spn.plan
    obs = plan.observe(evidence)
    v = plan.upward(plan.leaf_values(obs))
    if not np.isfinite(v[plan.root]):
        raise SpnError("evidence has probability zero")
    g = plan.downward(v)
    nv = len(plan.variables)
    width = max(2, plan.cat_log.shape[1] if len(plan.cat_idx) else 2)
    acc = np.full((nv, width), NEG_INF)
    with np.errstate(invalid="ignore"):
        if len(plan.bern_idx):
            contrib = g[plan.bern_idx][:, None] + plan.bern_log
            np.logaddexp.at(acc[:, :2], plan.bern_var, contrib)
        if len(plan.cat_idx):
            contrib = g[plan.cat_idx][:, None] + plan.cat_log
            np.logaddexp.at(acc[:, :contrib.shape[1]], plan.cat_var, contrib)
    if variables is None:
        wanted = [i for i in range(nv) if np.isnan(obs[i]) and plan.var_domain[i] != "real"]
    else:
        wanted = []
        for var in variables:
            i = plan.var_id(var)
            if not np.isnan(obs[i]):
                raise QueryInEvidence(f"{var!r} is already observed")
            if plan.var_domain[i] == "real":
                raise DomainMismatch(f"query variable {var!r} is continuous")
            wanted.append(i)
    out = {}
    for i in wanted:
        dom = plan.var_domain[i]
        m = 2 if dom == "binary" else dom[1]
        row = acc[i, :m]
        top = row.max()
        probs = np.exp(row - top)
        probs /= probs.sum()
        out[plan.variables[i]] = {u: float(p) for u, p in enumerate(probs)}
    return out


@dataclass(frozen=True)
class MapState:
    log_score: float
    choices: dict          # sum node -> chosen child position, for sums on the MAP tree
    assignment: dict       # unobserved variable -> MAP value


def map_state(spn: SpnGraph, evidence) -> MapState:
    """Max-product upward pass followed by top-down backtracking.

    Ties go to the lowest child position; unobserved leaves take their mode.
    """
    plan = spn.plan
    obs = plan.observe(evidence)
    v, choice = plan.upward_max(plan.leaf_values(obs, maximize=True))
    selected = np.zeros(plan.n, dtype=bool)
    selected[plan.root] = True
    for sums, prods in reversed(plan.levels):
        if prods is not None:
            on = selected[prods.nodes][prods.seg]
            selected[prods.child[on]] = True
        if sums is not None:
            on_nodes = selected[sums.nodes]
            chosen = sums.child[sums.starts[on_nodes] + choice[sums.nodes[on_nodes]]]
            selected[chosen] = True
    choices = {int(n): int(choice[n]) for n in np.flatnonzero(selected) if spn.kinds[n] == SUM}
    assignment = {}
    for n in np.flatnonzero(selected):
        if spn.kinds[n] == LEAF:
            leaf = spn.leaves[n]
            if np.isnan(obs[plan.var_index[leaf.variable]]):
                assignment[leaf.variable] = leaf.dist.mode()
    return MapState(float(v[plan.root]), choices, assignment)
