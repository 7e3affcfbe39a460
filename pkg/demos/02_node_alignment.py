"""
Aligning the reactant order to the product order
================================================

Atom maps tie product atoms to reactant atoms. Shared atoms are generated
first and in the product's order, so shuffling the product input shuffles
the target in the same way.
"""
from __future__ import annotations

from nagkit.align import make_training_pair, match_shared
from nagkit.dataset import parse_reaction
from nagkit.gentoken import serialize, to_text
from nagkit.molgraph import strip, write_smiles

# %% An amide formation: methyl ester plus ammonia gives acetamide
rec = parse_reaction("[CH3:1][C:2](=[O:3])[O:5][CH3:6].[NH3:4]>>[CH3:1][C:2](=[O:3])[NH2:4]")
match = match_shared(rec.product, rec.reactants)
print("shared product->reactant atoms:", match.shared)

# %% Two different product orders give two different, but consistent, targets
for seed in (0, 1):
    pair = make_training_pair(rec.product, rec.reactants, seed)
    print("product :", write_smiles(strip(rec.product), pair.product_order))
    print("target  :", to_text(serialize(strip(rec.reactants), pair.reactant_order)))
