"""
Decoder graph features and biased causal attention
===================================================

While the decoder grows a graph, every step sees node degrees and shortest
path distances of the graph so far. These are embedded into a small
``d_h2``-wide bias tensor and folded into causal attention.
"""
from __future__ import annotations

import numpy as np

from nagkit.attnref import attn_masked, attn_reduced, fd_check, memory_report
from nagkit.gentoken import from_text
from nagkit.stepfeat import build_series_incremental, pack_bias

# %% Features of a growing three-membered ring
seq = from_text("<bos> A:C A:C E:1:1 A:C E:1:1 E:2:1 <eos>")
for frame in build_series_incremental(seq):
    print("step", frame.step, "degree", frame.degree.tolist(), "spd", frame.spd.tolist())

# %% Pack the features into the reduced bias tensor
rng = np.random.default_rng(0)
d_h, d_h2, d_max = 8, 2, 15
series = build_series_incremental(seq)
D2 = pack_bias(series, rng.standard_normal((d_max, d_h2)), rng.standard_normal((d_max + 2, d_h2)))
n = D2.shape[0]
Q, K, V = (rng.standard_normal((n, d_h)) for _ in range(3))
U = rng.standard_normal((d_h, d_h2))
print("plain  :", attn_masked(Q, K, V)[-1].round(3))
print("biased :", attn_reduced(Q, K, V, U, D2)[-1].round(3))

# %% Analytic gradients agree with central differences
inputs = {"Q": Q, "K": K, "V": V, "U": U, "D2": D2}
print("max relative gradient error:", fd_check(attn_reduced, inputs, h=1e-6))

# %% Peak auxiliary memory: the full-width bias costs about d_h / d_h2 times more
for row in memory_report(256, 32, 4):
    print(row.csv())
