"""Which graphs make selection correctable by privileged information?

A selection mechanism over features X, privileged Z, response Y and
selection indicator S is worth the two-stage treatment exactly when

    X and Y dependent,  Y and S dependent (also given X),  Y indep S | (X, Z).

This script enumerates every acyclic directed mixed graph over the four
vertices matching that pattern, under the configurable domain conventions,
and prints a few of them.

Run:  python demos/graph_enumeration.py
"""

from pmar.graphs import enumerate_pmar_admgs, format_graph, is_pmar_pattern, m_separated

print("pattern-matching graph counts per enumeration convention:")
for label, kwargs in [
    ("coexisting directed+bidirected edges allowed, S may have children", {}),
    ("one edge kind per pair", {"coexisting_edges": False}),
    ("one edge kind per pair, S forced sink", {"coexisting_edges": False, "require_s_sink": True}),
    ("one edge kind per pair, no bidirected at S", {"coexisting_edges": False, "bidirected_at_s": False}),
]:
    graphs = enumerate_pmar_admgs(**kwargs)
    print(f"  {len(graphs):4d}  {label}")

graphs = enumerate_pmar_admgs(coexisting_edges=False)
print(f"\nfirst three of the {len(graphs)} one-edge-per-pair graphs:\n")
for g in graphs[:3]:
    print(format_graph(g))

# the textbook case: X and Z each drive both the response and the selection
from pmar.graphs import Admg

fig_1c = Admg(directed=frozenset({("X", "Y"), ("X", "S"), ("Z", "Y"), ("Z", "S")}))
print("the classic privilegedly-ignorable graph:")
print(format_graph(fig_1c))
print("pattern holds:", is_pmar_pattern(fig_1c))
print("Y sep S | {X}:   ", m_separated(fig_1c, {"Y"}, {"S"}, {"X"}))
print("Y sep S | {X,Z}: ", m_separated(fig_1c, {"Y"}, {"S"}, {"X", "Z"}))
