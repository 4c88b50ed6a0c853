"""Context-free grammars in the toolkit's plain-text definition format.

A definition file holds one production per line::

    %start program
    %nonterminals program stmt_list stmt ...
    %terminals IDENT EXPR
    stmt_list.more: stmt_list -> stmt stmt_list

Quoted symbols (``'if'``) are literal terminals. Bare names must be declared
with ``%nonterminals`` or ``%terminals``; when ``%nonterminals`` is omitted the
left-hand sides are taken as the nonterminal set. Rule ids are optional and
default to ``<lhs>.<n>``.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from importlib import resources

from .errors import DuplicateRuleId, GrammarError, NoRuleForNonterminal, UnknownSymbol

_RULE_RE = re.compile(r"^(?:(?P<id>[\w.\-]+)\s*:\s*)?(?P<lhs>\w+)\s*->\s*(?P<rhs>.*)$")


@dataclass(frozen=True)
class ProductionRule:
    id: str
    lhs: str
    rhs: tuple[str, ...]

    def nonterminal_positions(self, nonterminals) -> list[int]:
        return [i for i, s in enumerate(self.rhs) if s in nonterminals]

    def __str__(self):
        return f"{self.lhs} -> {' '.join(self.rhs)}"


@dataclass(frozen=True)
class Grammar:
    nonterminals: frozenset[str]
    terminals: frozenset[str]
    rules: tuple[ProductionRule, ...]
    start_symbol: str
    # derived lookups, filled in __post_init__
    _by_id: dict = field(default=None, repr=False, compare=False)
    _by_lhs: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        by_id = {r.id: r for r in self.rules}
        by_lhs: dict[str, list[ProductionRule]] = {nt: [] for nt in self.nonterminals}
        for r in self.rules:
            by_lhs[r.lhs].append(r)
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_by_lhs", {k: tuple(v) for k, v in by_lhs.items()})

    def rule(self, rule_id: str) -> ProductionRule:
        return self._by_id[rule_id]

    def has_rule(self, rule_id: str) -> bool:
        return rule_id in self._by_id

    def rules_for(self, symbol: str) -> tuple[ProductionRule, ...]:
        return self._by_lhs[symbol]

    def child_symbols(self, rule_id: str) -> list[str]:
        """Nonterminals on the rule's right-hand side, in order."""
        return [s for s in self._by_id[rule_id].rhs if s in self.nonterminals]

    def to_text(self) -> str:
        """Canonical definition text; ``load_grammar(g.to_text()) == g``."""
        lines = [
            f"%start {self.start_symbol}",
            "%nonterminals " + " ".join(sorted(self.nonterminals)),
        ]
        declared = sorted(t for t in self.terminals if not _is_literal(t))
        if declared:
            lines.append("%terminals " + " ".join(declared))
        for r in self.rules:
            lines.append(f"{r.id}: {r.lhs} -> {' '.join(r.rhs)}")
        return "\n".join(lines) + "\n"

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


def _is_literal(sym: str) -> bool:
    return len(sym) >= 2 and sym[0] == sym[-1] == "'"


def load_grammar(definition_text: str) -> Grammar:
    """Parse and validate a grammar definition."""
    start = None
    declared_nt: list[str] | None = None
    declared_t: set[str] = set()
    raw_rules: list[tuple[str | None, str, list[str], int]] = []

    for lineno, raw in enumerate(definition_text.splitlines(), 1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("%"):
            directive, _, rest = line.partition(" ")
            names = rest.split()
            if directive == "%start":
                if len(names) != 1:
                    raise GrammarError(f"line {lineno}: %start takes one symbol")
                start = names[0]
            elif directive == "%nonterminals":
                declared_nt = (declared_nt or []) + names
            elif directive == "%terminals":
                declared_t.update(names)
            else:
                raise GrammarError(f"line {lineno}: unknown directive {directive}")
            continue
        m = _RULE_RE.match(line)
        if m is None:
            raise GrammarError(f"line {lineno}: cannot parse rule {line!r}")
        rhs = _split_rhs(m.group("rhs"), lineno)
        if not rhs:
            raise GrammarError(f"line {lineno}: empty right-hand side")
        raw_rules.append((m.group("id"), m.group("lhs"), rhs, lineno))

    if not raw_rules:
        raise GrammarError("grammar has no rules")

    if declared_nt is None:
        nonterminals = {lhs for _, lhs, _, _ in raw_rules}
    else:
        nonterminals = set(declared_nt)
    terminals = set(declared_t)

    rules = []
    seen_ids = set()
    counters: dict[str, int] = {}
    for rid, lhs, rhs, lineno in raw_rules:
        if lhs not in nonterminals:
            raise UnknownSymbol(f"line {lineno}: undeclared left-hand side {lhs!r}")
        if rid is None:
            counters[lhs] = counters.get(lhs, 0) + 1
            rid = f"{lhs}.{counters[lhs]}"
        if rid in seen_ids:
            raise DuplicateRuleId(f"line {lineno}: duplicate rule id {rid!r}")
        seen_ids.add(rid)
        for sym in rhs:
            if _is_literal(sym):
                terminals.add(sym)
            elif sym not in nonterminals and sym not in terminals:
                raise UnknownSymbol(f"line {lineno}: rule {rid!r} references unknown symbol {sym!r}")
        rules.append(ProductionRule(rid, lhs, tuple(rhs)))

    overlap = nonterminals & terminals
    if overlap:
        raise GrammarError(f"symbols declared as both terminal and nonterminal: {sorted(overlap)}")
    lhs_set = {r.lhs for r in rules}
    for nt in sorted(nonterminals):
        if nt not in lhs_set:
            raise NoRuleForNonterminal(f"nonterminal {nt!r} has no rules")

    if start is None:
        start = rules[0].lhs
    if start not in nonterminals:
        raise UnknownSymbol(f"start symbol {start!r} is not a nonterminal")

    return Grammar(frozenset(nonterminals), frozenset(terminals), tuple(rules), start)


def _strip_comment(raw: str) -> str:
    # '#' starts a comment unless it sits inside a quoted literal
    in_quote = False
    for i, ch in enumerate(raw):
        if ch == "'":
            in_quote = not in_quote
        elif ch == "#" and not in_quote:
            return raw[:i].strip()
    return raw.strip()


def _split_rhs(text: str, lineno: int) -> list[str]:
    out = []
    for m in re.finditer(r"'[^']*'|\S+", text):
        tok = m.group(0)
        if tok.startswith("'") and (len(tok) < 3 or not tok.endswith("'")):
            raise GrammarError(f"line {lineno}: bad literal {tok!r}")
        out.append(tok)
    return out


def minic_grammar_text() -> str:
    return resources.files("tflm").joinpath("data/minic.grammar").read_text(encoding="utf-8")


_MINIC = None


def minic_grammar() -> Grammar:
    """The built-in MiniC grammar (loaded once)."""
    global _MINIC
    if _MINIC is None:
        _MINIC = load_grammar(minic_grammar_text())
    return _MINIC
