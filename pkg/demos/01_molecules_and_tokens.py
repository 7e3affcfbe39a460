"""
Molecules, node orders and generation tokens
============================================

Parse a SMILES string, look at it under a few node orders, and turn it into
the token stream a node-by-node decoder would emit.
"""
from __future__ import annotations

from nagkit.gentoken import deserialize, legal_next_tokens, serialize, to_text
from nagkit.molgraph import canonical_order, canonical_smiles, parse_smiles, random_order, write_smiles

# %% Parsing: atoms carry element, charge, hydrogen count, atom map and aromaticity
m = parse_smiles("CC(=O)Nc1ccccc1")
for i, atom in enumerate(m.atoms):
    print(i, atom.symbol, "H", atom.hydrogen_count)

# %% The same graph written under different node orders
print("canonical:", canonical_smiles(m))
for seed in range(3):
    order = random_order(m, seed)
    print(f"seed {seed}:", write_smiles(m, order))

# %% Serialize under the canonical order: atom, optional charge/H count, then edges back to earlier nodes
tokens = serialize(m, canonical_order(m))
print(to_text(tokens))

# %% Decoding the stream gives back an identical molecule
back = deserialize(tokens)
assert canonical_smiles(back) == canonical_smiles(m)

# %% The grammar tells a decoder what may come next after any prefix
print(legal_next_tokens(tokens[:3]))
