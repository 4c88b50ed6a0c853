"""
From source and test outcomes to line suspiciousness
====================================================

Parse a small MiniC program, see which parse-tree node stands for each
executable line, then score the lines from a toy coverage matrix.
"""

from tflm.minic import finest_enclosing_nodes, parse_program
from tflm.spectra import CoverageMatrix, TestRecord, node_suspiciousness, sbi_scores, tarantula_scores

source = """\
total = 0;
i = 0;
while (i < n) {
    if (a[i] > 0) {
        total = total + a[i];
    }
    i = i + 2;
}
return total;
"""

program = parse_program(source)
print(f"{len(program.nodes)} nodes, executable lines {program.executable_lines}")

# %%
# Each executable line is represented by the deepest node whose span holds it.
finest = finest_enclosing_nodes(program)
for line, nid in finest.items():
    node = program.nodes[nid]
    print(f"line {line:2d} -> node {nid:3d} {node.symbol:<12} span {node.span}")

# %%
# The bug is the stride on line 7. Tests that hit odd-indexed positive values fail.
tests = [
    TestRecord("empty", "pass", frozenset({1, 2, 3, 9})),
    TestRecord("one", "pass", frozenset({1, 2, 3, 4, 5, 7, 9})),
    TestRecord("odd_positive", "fail", frozenset({1, 2, 3, 4, 5, 7, 9})),
    TestRecord("all_negative", "pass", frozenset({1, 2, 3, 4, 7, 9})),
    TestRecord("pairs", "fail", frozenset({1, 2, 3, 4, 5, 7, 9})),
]
coverage = CoverageMatrix(tuple(tests))

tar = tarantula_scores(coverage, program.executable_lines)
sbi = sbi_scores(coverage, program.executable_lines)
print("\nline  tarantula  sbi")
for line in program.executable_lines:
    print(f"{line:4d}  {tar[line]:9.3f}  {sbi[line]:.3f}")

# %%
# Coverage points at line 5, the accumulation, and ranks the real culprit level with line 4.
# A node inherits the highest score among the lines it spans.
susp = node_suspiciousness(tar, program)
loop = next(n for n in program.nodes if n.symbol == "while_stmt")
print(f"\nwhile_stmt spans {loop.span}, suspiciousness {susp[loop.node_id]:.3f}")
