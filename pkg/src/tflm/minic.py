"""MiniC front end: lexer, recursive-descent parser and line/node mapping.

MiniC is a statement-level C subset. Expressions are folded into a single
``EXPR`` token, so every nonterminal in a parse tree is a statement, a block,
a statement list or a loop/branch condition.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import EmptyProgram, GrammarError, MiniCSyntaxError
from .grammar import Grammar, minic_grammar

KEYWORDS = frozenset({"if", "else", "while", "for", "return", "break", "continue"})

STATEMENT_SYMBOLS = frozenset({
    "if_stmt", "if_else_stmt", "while_stmt", "for_stmt", "block",
    "assign_stmt", "return_stmt", "break_stmt", "continue_stmt", "call_stmt",
})

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<name>[A-Za-z_]\w*)
  | (?P<op>==|!=|<=|>=|&&|\|\||\+\+|--|[-+*/%<>!=(){};,\[\]&|^~?:.])
""", re.VERBOSE | re.DOTALL)

# tokens allowed inside a folded expression
_EXPR_KINDS = frozenset({"NAME", "NUMBER", "STRING"})
_EXPR_OPS = frozenset("== != <= >= && || ++ -- + - * / % < > ! [ ] & | ^ ~ ? : . ,".split())


@dataclass(frozen=True)
class Token:
    kind: str          # "'if'"-style literal, or NAME / NUMBER / STRING / IDENT / EXPR
    text: str
    line: int
    col: int
    parts: tuple = ()  # raw tokens folded into an EXPR

    def lines(self):
        if self.parts:
            return {p.line for p in self.parts}
        return {self.line}


def tokenize(source: str) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise MiniCSyntaxError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "comment":
            newlines = text.count("\n")
            if newlines:
                line += newlines
                line_start = pos + text.rfind("\n") + 1
        elif kind == "name":
            tokens.append(Token(f"'{text}'" if text in KEYWORDS else "NAME", text, line, col))
        elif kind == "op":
            tokens.append(Token(f"'{text}'", text, line, col))
        elif kind != "ws":
            tokens.append(Token(kind.upper(), text, line, col))
        pos = m.end()
    return tokens


@dataclass(frozen=True, eq=False)
class AstNode:
    symbol: str
    rule: str
    children: tuple["AstNode", ...]
    span: tuple[int, int]
    node_id: int
    depth: int = 0
    tokens: tuple[Token, ...] = ()   # terminals consumed directly by this node, in rhs order

    def contains(self, line: int) -> bool:
        return self.span[0] <= line <= self.span[1]


def iter_preorder(root: AstNode):
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


@dataclass(frozen=True, eq=False)
class ParsedProgram:
    tree: AstNode
    source: str
    executable_lines: tuple[int, ...]
    nodes: tuple[AstNode, ...] = field(repr=False, default=())   # indexed by node_id
    parents: tuple[int, ...] = field(repr=False, default=())     # -1 for the root

    def structure(self):
        """Hashable (symbol, rule, span, node_id, parent) listing, for comparisons."""
        return tuple((n.symbol, n.rule, n.span, n.node_id, self.parents[n.node_id]) for n in self.nodes)


class _Raw:
    """Mutable node used while parsing, frozen into AstNode afterwards."""

    __slots__ = ("symbol", "rule", "children", "tokens")

    def __init__(self, symbol, rule, children, tokens):
        self.symbol = symbol
        self.rule = rule
        self.children = children
        self.tokens = tokens


class _Parser:
    def __init__(self, tokens: list[Token], grammar: Grammar):
        self.toks = tokens
        self.pos = 0
        self.grammar = grammar
        self._ids = {(r.lhs, r.rhs): r.id for r in grammar.rules}

    # -- helpers -------------------------------------------------------
    def rule(self, lhs, *rhs):
        try:
            return self._ids[(lhs, rhs)]
        except KeyError:
            raise GrammarError(f"grammar lacks MiniC rule {lhs} -> {' '.join(rhs)}") from None

    def peek(self, offset=0):
        i = self.pos + offset
        return self.toks[i] if i < len(self.toks) else None

    def at(self, kind, offset=0):
        t = self.peek(offset)
        return t is not None and t.kind == kind

    def error(self, message):
        t = self.peek()
        if t is None:
            last = self.toks[-1]
            raise MiniCSyntaxError(f"{message}, found end of input", last.line, last.col + len(last.text))
        raise MiniCSyntaxError(f"{message}, found {t.text!r}", t.line, t.col)

    def expect(self, kind):
        t = self.peek()
        if t is None or t.kind != kind:
            self.error(f"expected {kind}")
        self.pos += 1
        return t

    def ident(self):
        t = self.peek()
        if t is None or t.kind != "NAME":
            self.error("expected identifier")
        self.pos += 1
        return Token("IDENT", t.text, t.line, t.col)

    def expr(self):
        """Fold a balanced run of expression tokens into one EXPR token."""
        parts = []
        depth = 0
        while True:
            t = self.peek()
            if t is None:
                break
            if t.kind == "'('":
                depth += 1
            elif t.kind == "')'":
                if depth == 0:
                    break
                depth -= 1
            elif t.kind in _EXPR_KINDS or t.text in _EXPR_OPS or (t.kind == "'='" and depth > 0):
                pass
            else:
                break
            parts.append(t)
            self.pos += 1
        if not parts:
            self.error("expected expression")
        if depth != 0:
            self.error("unbalanced parenthesis in expression")
        text = " ".join(p.text for p in parts)
        return Token("EXPR", text, parts[0].line, parts[0].col, tuple(parts))

    # -- grammar -------------------------------------------------------
    def program(self):
        body = self.stmt_list()
        if self.peek() is not None:
            self.error("expected statement")
        return _Raw("program", self.rule("program", "stmt_list"), [body], [])

    def stmt_list(self):
        stmts = [self.stmt()]
        while self.peek() is not None and not self.at("'}'"):
            stmts.append(self.stmt())
        node = _Raw("stmt_list", self.rule("stmt_list", "stmt"), [stmts[-1]], [])
        more = self.rule("stmt_list", "stmt", "stmt_list")
        for s in reversed(stmts[:-1]):
            node = _Raw("stmt_list", more, [s, node], [])
        return node

    def stmt(self):
        t = self.peek()
        if t is None:
            self.error("expected statement")
        k = t.kind
        if k == "'if'":
            inner = self.if_stmt()
        elif k == "'while'":
            inner = self.while_stmt()
        elif k == "'for'":
            inner = self.for_stmt()
        elif k == "'{'":
            inner = self.block()
        elif k == "'return'":
            inner = self.return_stmt()
        elif k == "'break'":
            inner = self.simple("break_stmt", "'break'")
        elif k == "'continue'":
            inner = self.simple("continue_stmt", "'continue'")
        elif k == "NAME" and self.at("'('", 1):
            inner = self.call_stmt()
        elif k == "NAME":
            inner = self.assign_stmt()
        else:
            self.error("expected statement")
        return _Raw("stmt", self.rule("stmt", inner.symbol), [inner], [])

    def condition(self):
        e = self.expr()
        return _Raw("condition", self.rule("condition", "EXPR"), [], [e])

    def if_stmt(self):
        kw = self.expect("'if'")
        lp = self.expect("'('")
        cond = self.condition()
        rp = self.expect("')'")
        then = self.block()
        if self.at("'else'"):
            el = self.expect("'else'")
            other = self.block()
            rid = self.rule("if_else_stmt", "'if'", "'('", "condition", "')'", "block", "'else'", "block")
            return _Raw("if_else_stmt", rid, [cond, then, other], [kw, lp, rp, el])
        rid = self.rule("if_stmt", "'if'", "'('", "condition", "')'", "block")
        return _Raw("if_stmt", rid, [cond, then], [kw, lp, rp])

    def while_stmt(self):
        kw = self.expect("'while'")
        lp = self.expect("'('")
        cond = self.condition()
        rp = self.expect("')'")
        body = self.block()
        rid = self.rule("while_stmt", "'while'", "'('", "condition", "')'", "block")
        return _Raw("while_stmt", rid, [cond, body], [kw, lp, rp])

    def for_stmt(self):
        kw = self.expect("'for'")
        lp = self.expect("'('")
        init = self.assign_stmt()
        cond = self.condition()
        semi = self.expect("';'")
        name = self.ident()
        eq = self.expect("'='")
        step = self.expr()
        rp = self.expect("')'")
        body = self.block()
        rid = self.rule("for_stmt", "'for'", "'('", "assign_stmt", "condition", "';'",
                        "IDENT", "'='", "EXPR", "')'", "block")
        return _Raw("for_stmt", rid, [init, cond, body], [kw, lp, semi, name, eq, step, rp])

    def block(self):
        lb = self.expect("'{'")
        if self.at("'}'"):
            rb = self.expect("'}'")
            return _Raw("block", self.rule("block", "'{'", "'}'"), [], [lb, rb])
        body = self.stmt_list()
        rb = self.expect("'}'")
        return _Raw("block", self.rule("block", "'{'", "stmt_list", "'}'"), [body], [lb, rb])

    def assign_stmt(self):
        name = self.ident()
        eq = self.expect("'='")
        value = self.expr()
        semi = self.expect("';'")
        rid = self.rule("assign_stmt", "IDENT", "'='", "EXPR", "';'")
        return _Raw("assign_stmt", rid, [], [name, eq, value, semi])

    def return_stmt(self):
        kw = self.expect("'return'")
        if self.at("';'"):
            semi = self.expect("';'")
            return _Raw("return_stmt", self.rule("return_stmt", "'return'", "';'"), [], [kw, semi])
        value = self.expr()
        semi = self.expect("';'")
        return _Raw("return_stmt", self.rule("return_stmt", "'return'", "EXPR", "';'"), [], [kw, value, semi])

    def simple(self, symbol, keyword):
        kw = self.expect(keyword)
        semi = self.expect("';'")
        return _Raw(symbol, self.rule(symbol, keyword, "';'"), [], [kw, semi])

    def call_stmt(self):
        name = self.ident()
        lp = self.expect("'('")
        if self.at("')'"):
            rp = self.expect("')'")
            semi = self.expect("';'")
            rid = self.rule("call_stmt", "IDENT", "'('", "')'", "';'")
            return _Raw("call_stmt", rid, [], [name, lp, rp, semi])
        args = self.expr()
        rp = self.expect("')'")
        semi = self.expect("';'")
        rid = self.rule("call_stmt", "IDENT", "'('", "EXPR", "')'", "';'")
        return _Raw("call_stmt", rid, [], [name, lp, args, rp, semi])


def freeze_tree(raw_root) -> tuple[AstNode, list[AstNode], list[int]]:
    """Assign pre-order ids, depths and spans; returns (root, nodes, parents).

    ``raw_root`` may be any object with ``symbol``, ``rule``, ``children`` and
    ``tokens`` attributes. Iterative, so deep statement chains are fine.
    """
    order = []          # (raw, depth, parent_id) in pre-order
    stack = [(raw_root, 0, -1)]
    while stack:
        raw, depth, parent = stack.pop()
        nid = len(order)
        order.append((raw, depth, parent))
        for child in reversed(raw.children):
            stack.append((child, depth + 1, nid))

    n = len(order)
    children_ids: list[list[int]] = [[] for _ in range(n)]
    for nid, (_, _, parent) in enumerate(order):
        if parent >= 0:
            children_ids[parent].append(nid)

    built: list[AstNode | None] = [None] * n
    for nid in range(n - 1, -1, -1):
        raw, depth, _ = order[nid]
        kids = tuple(built[c] for c in children_ids[nid])
        lines = [ln for t in raw.tokens for ln in t.lines()]
        lines += [k.span[0] for k in kids] + [k.span[1] for k in kids]
        span = (min(lines), max(lines)) if lines else (0, 0)
        built[nid] = AstNode(raw.symbol, raw.rule, kids, span, nid, depth, tuple(raw.tokens))
    parents = [p for _, _, p in order]
    return built[0], built, parents


def parse_program(source: str, grammar: Grammar | None = None) -> ParsedProgram:
    """Parse MiniC source into its unique parse tree.

    Raises EmptyProgram when the source holds no tokens and MiniCSyntaxError
    (a SyntaxError) with 1-based line/column on malformed input.
    """
    grammar = grammar or minic_grammar()
    tokens = tokenize(source)
    if not tokens:
        raise EmptyProgram("program contains no statements")
    raw = _Parser(tokens, grammar).program()
    root, nodes, parents = freeze_tree(raw)
    return ParsedProgram(root, source, _executable_lines(nodes), tuple(nodes), tuple(parents))


def _executable_lines(nodes) -> tuple[int, ...]:
    stmt_spans = [n.span for n in nodes if n.symbol in STATEMENT_SYMBOLS]
    lines = set()
    for node in nodes:
        for t in node.tokens:
            if t.kind in ("'{'", "'}'"):
                continue
            lines.update(t.lines())
    return tuple(sorted(ln for ln in lines if any(a <= ln <= b for a, b in stmt_spans)))


def finest_enclosing_nodes(program: ParsedProgram) -> dict[int, int]:
    """Map each executable line to the deepest node whose span contains it.

    Equal-depth candidates resolve to the lowest node_id, i.e. the leftmost
    node in source order (a ``while`` header line maps to its condition
    rather than to the body block opened on the same line).
    """
    wanted = set(program.executable_lines)
    best: dict[int, tuple[int, int]] = {}
    for node in program.nodes:
        a, b = node.span
        for line in range(a, b + 1):
            if line not in wanted:
                continue
            cur = best.get(line)
            if cur is None or node.depth > cur[0]:
                best[line] = (node.depth, node.node_id)
    return {line: nid for line, (_, nid) in sorted(best.items())}


def format_program(root, indent: str = "    ") -> str:
    """Pretty-print a MiniC tree with one statement per line.

    ``root`` is any tree whose nodes expose ``symbol``, ``children`` and
    ``tokens`` (IDENT/EXPR tokens supply identifier and expression text).
    """
    out: list[str] = []

    def texts(node, kind):
        return [t.text for t in node.tokens if t.kind == kind]

    def stmt_list(node, level):
        while True:
            emit_stmt(node.children[0], level)
            if len(node.children) == 1:
                return
            node = node.children[1]

    def block_body(block, level):
        if block.children:
            stmt_list(block.children[0], level + 1)

    def emit_stmt(stmt, level):
        node = stmt.children[0]
        pad = indent * level
        sym = node.symbol
        if sym == "assign_stmt":
            out.append(f"{pad}{texts(node, 'IDENT')[0]} = {texts(node, 'EXPR')[0]};")
        elif sym == "call_stmt":
            args = texts(node, "EXPR")
            out.append(f"{pad}{texts(node, 'IDENT')[0]}({args[0] if args else ''});")
        elif sym == "return_stmt":
            value = texts(node, "EXPR")
            out.append(f"{pad}return {value[0]};" if value else f"{pad}return;")
        elif sym == "break_stmt":
            out.append(f"{pad}break;")
        elif sym == "continue_stmt":
            out.append(f"{pad}continue;")
        elif sym == "block":
            out.append(f"{pad}{{")
            block_body(node, level)
            out.append(f"{pad}}}")
        elif sym in ("if_stmt", "while_stmt"):
            cond, body = node.children
            kw = "if" if sym == "if_stmt" else "while"
            out.append(f"{pad}{kw} ({texts(cond, 'EXPR')[0]}) {{")
            block_body(body, level)
            out.append(f"{pad}}}")
        elif sym == "if_else_stmt":
            cond, then, other = node.children
            out.append(f"{pad}if ({texts(cond, 'EXPR')[0]}) {{")
            block_body(then, level)
            out.append(f"{pad}}} else {{")
            block_body(other, level)
            out.append(f"{pad}}}")
        elif sym == "for_stmt":
            init, cond, body = node.children
            init_text = f"{texts(init, 'IDENT')[0]} = {texts(init, 'EXPR')[0]};"
            step = f"{texts(node, 'IDENT')[0]} = {texts(node, 'EXPR')[0]}"
            out.append(f"{pad}for ({init_text} {texts(cond, 'EXPR')[0]}; {step}) {{")
            block_body(body, level)
            out.append(f"{pad}}}")
        else:
            raise ValueError(f"not a MiniC statement: {sym}")

    stmt_list(root.children[0], 0)
    return "\n".join(out) + "\n"
