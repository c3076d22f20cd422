# %% [markdown]
# # Queries against a brute-force scan
#
# The oracle module answers the same questions by scanning every point.
# It shares no code with the query module, so agreement means something.

# %%
import time

import numpy as np

from pkdtree import Box, GenSpec, PkdTree, brute_knn, brute_range_count, generate
from pkdtree.query import QueryStats

pts = generate(GenSpec("varden", 100_000, 2, seed=4))
tree = PkdTree(pts)
rng = np.random.default_rng(4)
queries = pts[rng.integers(0, len(pts), 200)] + rng.integers(-500, 500, (200, 2))

# %% [markdown]
# Distances must match exactly; ties among equidistant points may pick
# different points, so we compare distance lists.

# %%
t0 = time.perf_counter()
for q in queries:
    assert [d for d, _ in tree.knn(q, 10)] == [d for d, _ in brute_knn(pts, q, 10)]
print(f"200 kNN queries agree ({time.perf_counter() - t0:.2f}s including the scans)")

# %% [markdown]
# How much of the tree does one query touch?  Pruning on the distance to
# each subtree's box is what keeps it small.

# %%
for prune in (True, False):
    st = QueryStats()
    tree.knn(queries[0], 10, prune=prune, stats=st)
    print(f"prune={prune}: nodes={st.nodes} leaves={st.leaves}")

# %%
for half in (10**3, 10**5, 10**7):
    c = queries[1]
    box = Box(c - half, c + half)
    print(f"half-width {half:>9}: tree {tree.range_count(box):>6}  scan {brute_range_count(pts, box):>6}")
