# %% [markdown]
# # How much rebuilding does alpha buy?
#
# `alpha` is the allowed slack around a perfect half/half split.  Tight
# balance means frequent rebuilds; `alpha = 0.5` never rebuilds for
# balance at all, only leaves that overflow get split.
#
# The full experiment (`pkd bench sweep-alpha`) inserts 10^6 Varden points
# in 1000 batches.  Here we run a fifth of it so it finishes in seconds.

# %%
from pkdtree.bench import cmd_sweep_alpha

alphas = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5]
recs = cmd_sweep_alpha(alphas, dist="varden", batches=200, batch_size=1000, seed=0)

# %%
print(f"{'alpha':>6} {'rebuilt / final':>16} {'height':>7} {'seconds':>8}")
for r in recs:
    print(f"{r.alpha:>6} {r.extra['rebuild_ratio']:>16.2f} {r.extra['height']:>7} {r.wall_ns / 1e9:>8.2f}")

# %% [markdown]
# Rebuild volume falls as `alpha` grows while the height creeps up, which
# is the trade the parameter controls.  The default of 0.3 sits where both
# are moderate.
