"""Annotated program corpora: loading from disk and synthetic generation.

A manifest is a JSON file::

    {"grammar": "minic.grammar" | null,
     "programs": [{"version_id": "v1", "source": "v1.c",
                   "buggy_lines": [4], "coverage": "v1.json"}]}

Paths are resolved relative to the manifest's directory; a null grammar
means the bundled MiniC grammar.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import BuggyLineNotExecutable, DepthExceeded, TflmError
from .grammar import Grammar, load_grammar, minic_grammar
from .minic import ParsedProgram, Token, finest_enclosing_nodes, format_program, parse_program
from .model import BUGGY, SUSPICIOUSNESS, AttributeDecl, TflmSpec, buggy_posteriors, validate_spec
from .spectra import CoverageMatrix, TestRecord, node_suspiciousness, tarantula_scores

MAX_RESAMPLES = 100
SYNTH_TESTS = 20          # failing and passing tests per synthetic program


@dataclass(frozen=True)
class ProgramRecord:
    version_id: str
    source_path: Path
    buggy_lines: frozenset[int]
    coverage_path: Path


class AnnotatedProgram(NamedTuple):
    program: ParsedProgram
    attributes: dict          # (node_id, attribute) -> value
    coverage: CoverageMatrix
    version_id: str = ""
    buggy_lines: frozenset = frozenset()


def annotate(program: ParsedProgram, coverage: CoverageMatrix, buggy_lines) -> dict:
    """Tarantula node suspiciousness plus buggy=1 on the finest nodes of ``buggy_lines``."""
    executable = set(program.executable_lines)
    bad = sorted(set(buggy_lines) - executable)
    if bad:
        raise BuggyLineNotExecutable(f"buggy line(s) {bad} are not executable")
    finest = finest_enclosing_nodes(program)
    buggy_nodes = {finest[ln] for ln in buggy_lines}
    susp = node_suspiciousness(tarantula_scores(coverage, program.executable_lines), program)
    attrs = {}
    for node in program.nodes:
        attrs[(node.node_id, SUSPICIOUSNESS)] = susp[node.node_id]
        attrs[(node.node_id, BUGGY)] = int(node.node_id in buggy_nodes)
    return attrs


def read_manifest(path) -> tuple[Grammar, list[ProgramRecord]]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    data = json.loads(path.read_text(encoding="utf-8"))
    base = path.parent
    grammar = minic_grammar()
    if data.get("grammar"):
        gpath = base / data["grammar"]
        if not gpath.is_file():
            raise FileNotFoundError(f"grammar not found: {gpath}")
        grammar = load_grammar(gpath.read_text(encoding="utf-8"))
    records, seen = [], set()
    for entry in data["programs"]:
        vid = str(entry["version_id"])
        if vid in seen:
            raise TflmError(f"duplicate version_id {vid!r} in {path}")
        seen.add(vid)
        records.append(ProgramRecord(vid, base / entry["source"], frozenset(int(x) for x in entry["buggy_lines"]),
                                     base / entry["coverage"]))
    return grammar, records


def load_record(record: ProgramRecord, grammar: Grammar | None = None) -> AnnotatedProgram:
    for p in (record.source_path, record.coverage_path):
        if not Path(p).is_file():
            raise FileNotFoundError(f"{record.version_id}: file not found: {p}")
    program = parse_program(Path(record.source_path).read_text(encoding="utf-8"), grammar)
    coverage = CoverageMatrix.load(record.coverage_path)
    coverage.check_lines(program.executable_lines)
    attrs = annotate(program, coverage, record.buggy_lines)
    return AnnotatedProgram(program, attrs, coverage, record.version_id, record.buggy_lines)


def load_corpus(manifest_path) -> list[AnnotatedProgram]:
    grammar, records = read_manifest(manifest_path)
    return [load_record(r, grammar) for r in records]


def write_corpus(entries, out_dir, manifest_name: str = "manifest.json") -> Path:
    """Write sources, coverage files and a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    programs = []
    for e in entries:
        src, cov = f"{e.version_id}.mc", f"{e.version_id}.coverage.json"
        (out / src).write_text(e.program.source, encoding="utf-8")
        (out / cov).write_text(json.dumps(e.coverage.to_dict()) + "\n", encoding="utf-8")
        programs.append({"version_id": e.version_id, "source": src,
                         "buggy_lines": sorted(e.buggy_lines), "coverage": cov})
    manifest = out / manifest_name
    manifest.write_text(json.dumps({"grammar": None, "programs": programs}, indent=1) + "\n", encoding="utf-8")
    return manifest


# -- sampling ------------------------------------------------------------------

_NAMES = ("a", "b", "i", "j", "n", "x", "y", "sum", "count", "total", "idx", "tmp")
_FUNCS = ("f", "g", "log", "update", "reset", "push")
_OPS = ("+", "-", "*")
_CMPS = ("<", "<=", ">", "!=", "==")


class SampledNode:
    """Sampled tree node; also usable as input to ``format_program``."""

    __slots__ = ("symbol", "rule", "children", "tokens", "subclass", "attrs")

    def __init__(self, symbol, rule, subclass):
        self.symbol = symbol
        self.rule = rule
        self.subclass = subclass
        self.children = []
        self.tokens = []
        self.attrs = {}


def _expr(rng, symbol):
    a = _NAMES[rng.integers(len(_NAMES))]
    if symbol == "condition":
        rhs = str(rng.integers(0, 10)) if rng.random() < 0.5 else _NAMES[rng.integers(len(_NAMES))]
        return f"{a} {_CMPS[rng.integers(len(_CMPS))]} {rhs}"
    if rng.random() < 0.3:
        return str(rng.integers(0, 100))
    return f"{a} {_OPS[rng.integers(len(_OPS))]} {rng.integers(1, 10)}"


def _terminal_text(rng, kind, node):
    if kind == "IDENT":
        pool = _FUNCS if node.symbol == "call_stmt" else _NAMES
        return pool[rng.integers(len(pool))]
    return _expr(rng, node.symbol)


def _sample_attr(rng, spec: TflmSpec, decl: AttributeDecl, sym: str, j: int):
    params = np.asarray(spec.attr_dist[(sym, decl.name)], dtype=float)
    if decl.kind == "binary":
        return int(rng.random() < params[j])
    mean, std = params[j]
    return float(rng.normal(mean, std))


def sample_tree(spec: TflmSpec, rng: np.random.Generator, max_depth: int, max_nodes: int = 5000) -> SampledNode | None:
    """One top-down draw; None when the tree outgrows ``max_depth`` or ``max_nodes``."""
    g = spec.grammar
    start = np.asarray(spec.start_dist, dtype=float)
    root = SampledNode(g.start_symbol, None, int(rng.choice(len(start), p=start)))
    stack = [(root, 0)]
    count = 0
    while stack:
        node, depth = stack.pop()
        count += 1
        if depth > max_depth or count > max_nodes:
            return None
        sym, j = node.symbol, node.subclass
        rules = g.rules_for(sym)
        probs = np.asarray(spec.rule_dist[sym][j], dtype=float)
        rule = rules[int(rng.choice(len(rules), p=probs))]
        node.rule = rule.id
        for decl in spec.attrs_of(sym):
            node.attrs[decl.name] = _sample_attr(rng, spec, decl, sym, j)
        pos = 0
        for item in rule.rhs:
            if item in g.nonterminals:
                w = np.asarray(spec.child_dist[(rule.id, pos)][j], dtype=float)
                child = SampledNode(item, None, int(rng.choice(len(w), p=w)))
                node.children.append(child)
                pos += 1
            elif item in g.terminals:
                node.tokens.append(Token(item, _terminal_text(rng, item, node), 0, 0))
        for child in reversed(node.children):
            stack.append((child, depth + 1))
    return root


def _preorder(root: SampledNode) -> list[SampledNode]:
    out, stack = [], [root]
    while stack:
        node = stack.pop()
        out.append(node)
        stack.extend(reversed(node.children))
    return out


def _score_table(n: int = SYNTH_TESTS):
    """All (failed, passed) count pairs with their Tarantula score at TF = TP = n."""
    pairs = [(0, 0)] + [(f, p) for f in range(1, n + 1) for p in range(n + 1)]
    scores = np.array([0.0 if f == 0 else f / (f + p) for f, p in pairs])
    return pairs, scores


_TABLE = _score_table()


def counts_for_score(target: float) -> tuple[int, int]:
    """Nearest representable Tarantula score with TF = TP = 20; fewest covering tests on ties."""
    pairs, scores = _TABLE
    gap = np.abs(scores - target)
    best = np.flatnonzero(gap <= gap.min() + 1e-12)
    return min((pairs[i] for i in best), key=lambda fp: (fp[0] + fp[1], fp))


def build_coverage(line_scores: dict[int, float], rng: np.random.Generator, n: int = SYNTH_TESTS) -> CoverageMatrix:
    """Coverage over n failing and n passing tests inducing the given Tarantula scores."""
    fail_cov = [set() for _ in range(n)]
    pass_cov = [set() for _ in range(n)]
    for line, s in sorted(line_scores.items()):
        f, p = counts_for_score(min(max(s, 0.0), 1.0))
        for t in rng.choice(n, size=f, replace=False):
            fail_cov[t].add(line)
        for t in rng.choice(n, size=p, replace=False):
            pass_cov[t].add(line)
    tests = [TestRecord(f"fail{i}", "fail", frozenset(c)) for i, c in enumerate(fail_cov)]
    tests += [TestRecord(f"pass{i}", "pass", frozenset(c)) for i, c in enumerate(pass_cov)]
    return CoverageMatrix(tuple(tests))


@dataclass
class SyntheticCorpus:
    entries: list[AnnotatedProgram]
    posteriors: list[dict[int, float]]              # generator P(buggy=1 | sampled real attributes)
    subclasses: list[dict[int, int]] = field(repr=False)
    sampled: list[dict] = field(repr=False)         # (node_id, attr) -> sampled value

    def __len__(self):
        return len(self.entries)


def generate_synthetic_corpus(generator_spec: TflmSpec, program_count: int, max_depth: int, seed: int,
                              min_buggy_lines: int = 0, with_posteriors: bool = True) -> SyntheticCorpus:
    """Sample programs, attributes and coverage from a generator model.

    Real attributes are clamped to [0, 1]. Buggy lines are the executable
    lines whose finest enclosing node drew buggy = 1; coverage is built so
    each line's Tarantula score is the nearest representable value to the
    suspiciousness drawn for that node. Drafts with no executable line or
    fewer than ``min_buggy_lines`` buggy lines are redrawn like over-deep
    ones; after 100 failed draws for one program DepthExceeded is raised.
    """
    validate_spec(generator_spec)
    oracle_spec = generator_spec.replace(attr_joint=None)
    master = np.random.default_rng(seed)
    entries, posteriors, subclasses, sampled_all = [], [], [], []
    for index in range(program_count):
        rng = np.random.default_rng(master.integers(2 ** 63))
        for _ in range(MAX_RESAMPLES):
            root = sample_tree(generator_spec, rng, max_depth)
            if root is None:
                continue
            source = format_program(root)
            program = parse_program(source + "\n" if source and not source.endswith("\n") else source,
                                    generator_spec.grammar)
            nodes = _preorder(root)
            if [(n.symbol, n.rule) for n in nodes] != [(n.symbol, n.rule) for n in program.nodes]:
                raise TflmError("pretty-printed program does not re-parse to the sampled tree")
            if not program.executable_lines:
                continue
            finest = finest_enclosing_nodes(program)
            buggy_lines = frozenset(ln for ln, nid in finest.items() if nodes[nid].attrs.get(BUGGY) == 1)
            if len(buggy_lines) < min_buggy_lines:
                continue
            break
        else:
            raise DepthExceeded(f"program {index}: no acceptable tree within depth {max_depth} "
                                f"after {MAX_RESAMPLES} draws")
        sampled = {}
        for nid, node in enumerate(nodes):
            for name, value in node.attrs.items():
                kind = generator_spec.attr_kind(node.symbol, name)
                sampled[(nid, name)] = min(max(value, 0.0), 1.0) if kind == "real" else value
        line_scores = {ln: sampled.get((nid, SUSPICIOUSNESS), 0.0) for ln, nid in finest.items()}
        coverage = build_coverage(line_scores, rng)
        vid = f"v{index + 1:03d}"
        attrs = annotate(program, coverage, buggy_lines)
        entries.append(AnnotatedProgram(program, attrs, coverage, vid, buggy_lines))
        subclasses.append({nid: n.subclass for nid, n in enumerate(nodes)})
        sampled_all.append(sampled)
        if with_posteriors:
            observed = {k: v for k, v in sampled.items() if generator_spec.attr_kind(nodes[k[0]].symbol, k[1]) == "real"}
            posteriors.append(buggy_posteriors(oracle_spec, program, observed))
    return SyntheticCorpus(entries, posteriors, subclasses, sampled_all)


# -- a context-sensitive generator ------------------------------------------------

def loop_context_generator(grammar: Grammar | None = None, loop_bug_rate: float = 0.3,
                           base_bug_rate: float = 0.0, susp_shift: float = 0.05,
                           susp_std: float = 0.2) -> TflmSpec:
    """Two-subclass generator whose bugs concentrate in loop bodies.

    Subclass 0 marks code outside any loop and subclass 1 code inside one;
    loop bodies switch to subclass 1 and every other child inherits its
    parent's subclass. Assignments inside loops are buggy with probability
    ``loop_bug_rate``, other statements with ``base_bug_rate`` and compound
    nodes never. Suspiciousness is Gaussian with std ``susp_std`` and means
    0.5 -/+ ``susp_shift`` / 2 outside/inside loops; with the default small
    shift coverage says little about where the bug is.
    """
    g = grammar or minic_grammar()
    k = 2
    inherit = np.eye(2)
    to_loop = np.array([[0.0, 1.0], [0.0, 1.0]])

    stmt_probs = {
        # class 0: top level; class 1: inside a loop
        "stmt.if": (0.10, 0.08),
        "stmt.if_else": (0.05, 0.04),
        "stmt.while": (0.14, 0.03),
        "stmt.for": (0.06, 0.02),
        "stmt.block": (0.02, 0.02),
        "stmt.assign": (0.40, 0.50),
        "stmt.return": (0.06, 0.03),
        "stmt.break": (0.0, 0.05),
        "stmt.continue": (0.0, 0.04),
        "stmt.call": (0.17, 0.19),
    }
    fixed_rules = {
        "stmt_list": {"stmt_list.more": (0.75, 0.55), "stmt_list.last": (0.25, 0.45)},
        "block": {"block.full": (0.95, 0.95), "block.empty": (0.05, 0.05)},
        "return_stmt": {"return_stmt.value": (0.8, 0.8), "return_stmt.bare": (0.2, 0.2)},
        "call_stmt": {"call_stmt.args": (0.7, 0.7), "call_stmt.noargs": (0.3, 0.3)},
        "stmt": stmt_probs,
    }
    rule_dist = {}
    for sym in sorted(g.nonterminals):
        rules = g.rules_for(sym)
        if sym in fixed_rules:
            table = fixed_rules[sym]
            rule_dist[sym] = np.array([[table[r.id][j] for r in rules] for j in range(k)])
        else:
            rule_dist[sym] = np.full((k, len(rules)), 1.0 / len(rules))
        rule_dist[sym] = rule_dist[sym] / rule_dist[sym].sum(axis=1, keepdims=True)

    child_dist = {}
    for rule in g.rules:
        for pos, child in enumerate(g.child_symbols(rule.id)):
            loop_body = rule.lhs in ("while_stmt", "for_stmt") and child == "block"
            child_dist[(rule.id, pos)] = (to_loop if loop_body else inherit).copy()

    bug = {"assign_stmt": (base_bug_rate, loop_bug_rate), "condition": (base_bug_rate, base_bug_rate),
           "return_stmt": (base_bug_rate, base_bug_rate), "call_stmt": (base_bug_rate, base_bug_rate),
           "break_stmt": (base_bug_rate, base_bug_rate), "continue_stmt": (base_bug_rate, base_bug_rate)}
    attributes = {nt: (AttributeDecl(BUGGY, "binary"), AttributeDecl(SUSPICIOUSNESS, "real"))
                  for nt in sorted(g.nonterminals)}
    attr_dist = {}
    for sym in sorted(g.nonterminals):
        attr_dist[(sym, BUGGY)] = np.array(bug.get(sym, (0.0, 0.0)), dtype=float)
        attr_dist[(sym, SUSPICIOUSNESS)] = np.array([[0.5 - susp_shift / 2, susp_std],
                                                     [0.5 + susp_shift / 2, susp_std]])
    spec = TflmSpec(
        grammar=g,
        attributes=attributes,
        subclass_count={s: k for s in g.nonterminals},
        start_dist=np.array([1.0, 0.0]),
        rule_dist=rule_dist,
        child_dist=child_dist,
        attr_dist=attr_dist,
    )
    validate_spec(spec)
    return spec


__all__ = [
    "AnnotatedProgram",
    "ProgramRecord",
    "SampledNode",
    "SyntheticCorpus",
    "annotate",
    "build_coverage",
    "counts_for_score",
    "generate_synthetic_corpus",
    "load_corpus",
    "load_record",
    "loop_context_generator",
    "read_manifest",
    "sample_tree",
    "write_corpus",
]
