"""
A two-subclass model and its queries
=====================================

Hand-build a small model over the MiniC grammar where assignments behave
differently inside loops, then ask it for a MAP subclass labelling and for
per-node bug probabilities.
"""

import numpy as np

from tflm.corpus import loop_context_generator
from tflm.minic import finest_enclosing_nodes, parse_program
from tflm.model import BUGGY, SUSPICIOUSNESS, buggy_posteriors, ground_spn, joint_log_prob, map_subclasses
from tflm import spn

# subclass 0 = outside loops, 1 = inside; assignments in loops are buggy 30% of the time
model = loop_context_generator(susp_shift=0.3, susp_std=0.15)
print("P(buggy) for assign_stmt per subclass:", model.attr_dist[("assign_stmt", BUGGY)])

source = """\
x = 0;
while (x < 10) {
    y = x * 2;
    f(y);
}
z = x + 1;
"""
program = parse_program(source)

# %%
# Grounding compiles the model against this tree into a sum-product network.
grounded = ground_spn(model, program)
print(f"grounded network: {len(grounded.spn)} nodes, log Z = {spn.log_partition(grounded.spn):.2e}")

# %%
# Bug posteriors given only suspiciousness. Everything gets the same mild score
# so the difference comes from where each statement sits.
observed = {(n.node_id, SUSPICIOUSNESS): 0.5 for n in program.nodes}
post = buggy_posteriors(model, program, observed)
for line, nid in finest_enclosing_nodes(program).items():
    print(f"line {line}: {program.nodes[nid].symbol:<12} P(buggy) = {post[nid]:.3f}")

# %%
# MAP labelling with a complete attribute assignment: the loop body comes out as subclass 1.
attrs = dict(observed)
attrs.update({(n.node_id, BUGGY): 0 for n in program.nodes})
classes, score = map_subclasses(model, program, attrs)
print("\nsubclass per node:", [classes[n.node_id] for n in program.nodes])
print(f"MAP log score {score:.4f}, joint log prob of that labelling {joint_log_prob(model, program, attrs, classes):.4f}")

# swapping every label to 0 can only score lower
flat = {nid: 0 for nid in classes}
print(f"all-zero labelling: {joint_log_prob(model, program, attrs, flat):.4f}")
assert np.isclose(score, joint_log_prob(model, program, attrs, classes))
