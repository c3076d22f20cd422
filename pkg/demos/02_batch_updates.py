# %% [markdown]
# # Batch updates
#
# Inserts and deletes arrive in batches.  A batch walks down the tree; a
# subtree that would end up too lopsided is rebuilt from scratch together
# with its share of the batch, everything else is updated in place.

# %%
from collections import Counter

import numpy as np

from pkdtree import GenSpec, PkdTree, check_tree, generate

base = generate(GenSpec("varden", 100_000, 3, seed=2))
tree = PkdTree(base)
shadow = Counter(map(tuple, base.tolist()))

# %% [markdown]
# Varden data is a random walk that rarely jumps, so consecutive points
# pile up in a few dense clusters.  Feeding the next stretch of the walk as
# a batch hammers one corner of the tree.

# %%
more = generate(GenSpec("varden", 50_000, 3, seed=3))
for i in range(10):
    batch = more[i * 5000 : (i + 1) * 5000]
    st = tree.insert(batch)
    shadow.update(map(tuple, batch.tolist()))
    print(f"insert {i}: rebuilds={st.rebuilds:3d} rebuilt points={st.rebuild_points:7d} height={tree.height}")

# %% [markdown]
# Deleting works on multiplicities: each copy in the batch removes at most
# one stored copy, and points that are not stored are ignored.

# %%
rng = np.random.default_rng(0)
victims = base[rng.choice(len(base), 30_000, replace=False)]
st = tree.delete(np.concatenate([victims, victims[:100]]))
for p in map(tuple, victims.tolist()):
    shadow[p] -= 1
shadow += Counter()
print("discarded copies:", st.discarded)

# %%
print("multiset intact:", Counter(map(tuple, tree.points().tolist())) == shadow)
print("violations:", check_tree(tree.root, tree.cfg))
s = tree.stats
print(f"lifetime: {s.rebuilds} rebuilds over {s.rebuild_points} points, {s.leaf_rebuilds} leaf splits")
