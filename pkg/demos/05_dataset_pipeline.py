"""
From reaction lines to training examples and metrics
====================================================

Ingest mapped reactions, build order-augmented training examples, and score
a ranked prediction list with top-k, largest-fragment and validity metrics.
"""
from __future__ import annotations

import io

from nagkit.dataset import augment_corpus, class_stats, evaluate, ingest_lines, write_audit

# %% Ingestion drops lines that cannot be used and keeps an audit trail
lines = [
    "[CH3:1][C:2](=[O:3])[O:5][CH3:6].[NH3:4]>>[CH3:1][C:2](=[O:3])[NH2:4]\t2",
    "[CH3:1][CH2:2][OH:3]>[Cr]>[CH3:1][CH:2]=[O:3]\t9",
    "[cH:1]1[cH:2][cH:3][cH:4][cH:5][c:6]1[Br:7]>>[cH:1]1[cH:2][cH:3][cH:4][cH:5][cH:6]1\t4",
    "not a reaction",
]
result = ingest_lines(lines)
buf = io.StringIO()
write_audit(result.rejected, buf)
print(buf.getvalue())
print(class_stats(result.records).fractions)

# %% Three randomly ordered copies per reaction
for ex in augment_corpus(result.records, copies=3, seed=0):
    print(ex.to_json()["product_smiles"], "|", ex.to_json()["tokens"])

# %% Metrics on ranked predictions
predictions = [["CCO", "CC(=O)OC.N"], ["C=O", "CCO"], ["c1ccccc1Br"]]
truths = ["COC(C)=O.N", "CCO", "Brc1ccccc1"]
print(evaluate(predictions, truths, ks=(1, 2)).to_json())
