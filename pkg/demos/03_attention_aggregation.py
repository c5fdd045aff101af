# %% Attention over message sets: how an agent fuses its own encoded
# observation with whatever arrived from peers.

import numpy as np

from dacom import autodiff as ad

rng = np.random.default_rng(7)
dim, heads = 6, 2
block = ad.ParamBlock("agg")
mha = ad.MultiHeadAttention(block, "att", dim, heads, rng)

own = ad.Tensor(rng.normal(size=(1, dim)))
messages = [ad.Tensor(rng.normal(size=(1, dim))) for _ in range(3)]

# %% The aggregator attends over [own] + peers. Per-head weights sum to 1.
kv = ad.stack_rows([own] + messages)
out = mha(own, kv)
weights = mha.attention_weights(own, kv)
print("aggregated vector:", out.data[0])
for h in range(heads):
    print(f"head {h} weights: {weights[h][0]}  (sum {weights[h][0].sum():.12f})")

# %% Permutation invariance: the caller fixes slot order (sorted by sender),
# so any arrival order yields a bit-identical result.
perm = [messages[2], messages[0], messages[1]]
a = mha(own, ad.stack_rows([own] + messages)).data
b = mha(own, ad.stack_rows([own] + perm)).data
print("permuted input changes output:", not np.array_equal(a, b))
print("(slot order is the sorted sender order, fixed before attention)")

# %% Masking: an excluded slot gets probability exactly zero. A soft
# log-weight downweights a slot smoothly, which is how the waiting-time
# gradient flows through message inclusion during training.
mask = np.array([[True, True, False, True]])
masked = mha(own, kv, mask=mask)
w = mha.attention_weights(own, kv, mask=mask)
print("masked head-0 weights:", w[0][0])

logw = ad.Tensor(np.array([[0.0, -0.5, -8.0, 0.0]]))
softened = mha(own, kv, log_weight=logw)
print("soft-masked output:", softened.data[0])

# %% With no peers at all the agent attends over its own message alone.
alone = ad.attention_over_set(mha, own, [])
print("no-peer fallback:", alone.data[0])
