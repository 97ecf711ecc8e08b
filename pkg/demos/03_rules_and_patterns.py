"""Grow variable-order transition rules and assemble movement patterns.

Two commuter streams share the hub B but split by origin: people arriving
from A continue to X, people arriving from C continue to Y.  A first-order
model at B can only say 50/50; the growth test notices that the origin
carries information and keeps the order-2 contexts.

Run: python demos/03_rules_and_patterns.py
"""

import numpy as np

from honflow import (
    ClusterPath,
    TimeWindow,
    assemble_global_patterns,
    grow_rules,
    local_patterns,
)

rng = np.random.default_rng(2)
corpus = []
for _ in range(120):
    corpus.append(ClusterPath(("A", "B", "X"), (8, 8, 9)))
    corpus.append(ClusterPath(("C", "B", "Y"), (8, 8, 9)))
# a trickle of counter-traffic so the split is strong but not perfect
for _ in range(12):
    corpus.append(ClusterPath(("A", "B", "Y"), (8, 8, 9)))

day = TimeWindow.whole_day()
rules = grow_rules(corpus, day)
print("accepted rules (order >= 2):")
for r in sorted(rules, key=lambda r: (-r.order, r.context, r.next)):
    if r.order >= 2:
        context = ",".join(r.context)
        print(f"  next={r.next} given [{context}]  p={r.probability:.3f}  n={r.support}")

print("\nfirst-order view of the hub (what a plain OD matrix would say):")
for r in sorted(rules, key=lambda r: r.next):
    if r.context == ("B",):
        print(f"  B -> {r.next}  p={r.probability:.3f}")

patterns = assemble_global_patterns(rules, corpus, day)
print("\nglobal patterns by flow:")
for p in patterns:
    print(f"  {' -> '.join(p.path)}  flow={p.flow}  mode={p.mode}  "
          f"entropy_rate={p.entropy_rate:.3f}")

picked = local_patterns(corpus, ["A"], day)
print("\npatterns through the selection {A}:")
for p in picked:
    print(f"  {' -> '.join(p.path)}  flow={p.flow}")
