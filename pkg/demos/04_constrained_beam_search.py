"""
Grammar-constrained beam search
===============================

Any scorer that maps (context, prefix) to log-probabilities over the token
vocabulary can drive decoding. Illegal tokens are masked at every step, so
every finished hypothesis decodes to a molecule.
"""
from __future__ import annotations

from nagkit.beam import DecodeConfig, TeacherScorer, Vocabulary, beam_decode, sample_walks, uniform_scorer
from nagkit.gentoken import from_text, is_valid

vocab = Vocabulary(elements=("C", "N", "O"), max_hcount=3, max_gap=6, charges=())

# %% A teacher scorer puts almost all mass on one target: beam search recovers it
target = from_text("<bos> A:C H:3 A:C E:1:1 A:O E:1:2 A:N H:2 E:2:1 <eos>")
best = beam_decode(TeacherScorer(target, vocab), None, DecodeConfig(beam_size=5))[0]
print(best.canonical, round(best.log_score, 4))

# %% With a flat scorer the beam returns distinct molecules, deduplicated by canonical SMILES
for cand in beam_decode(uniform_scorer(vocab), None, DecodeConfig(beam_size=5, max_len=12)):
    print(cand.canonical, round(cand.log_score, 3))

# %% Random walks: always valid with the mask, mostly invalid without it
masked = sample_walks(uniform_scorer(vocab), None, 2000, seed=0, max_len=32)
raw = sample_walks(uniform_scorer(vocab), None, 2000, seed=0, masked=False, max_len=32)
print("valid with mask   :", sum(map(is_valid, masked)) / len(masked))
print("valid without mask:", sum(map(is_valid, raw)) / len(raw))
