# %% [markdown]
# # Quickstart
#
# Build a kd-tree over a few hundred thousand points, look at its shape,
# then ask it a couple of questions.

# %%
import numpy as np

from pkdtree import Box, GenSpec, PkdTree, check_tree, generate

pts = generate(GenSpec("uniform", 200_000, 3, seed=1))
pts[:3]

# %% [markdown]
# Coordinates are 64-bit integers in `[0, 10^9]` by default.  Building
# samples splitters for six levels at a time, distributes the points into
# 64 buckets and recurses on each bucket.

# %%
tree = PkdTree(pts)
print("points:", len(tree), " height:", tree.height)
print("violations:", check_tree(tree.root, tree.cfg))

# %% [markdown]
# Nearest neighbours come back as `(squared distance, point)` pairs in
# ascending order.

# %%
q = np.array([500_000_000] * 3)
for d2, p in tree.knn(q, 5):
    print(f"{d2:>16}  {p}")

# %% [markdown]
# Range queries take a closed box.  Counting never touches points in
# subtrees that lie entirely inside the box.

# %%
box = Box(q - 50_000_000, q + 50_000_000)
print("count:", tree.range_count(box))
print("first reported:", tree.range_report(box)[:3])
