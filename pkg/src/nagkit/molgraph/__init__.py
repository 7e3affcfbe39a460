from nagkit.molgraph.canon import (
    canonical_order,
    canonical_ranks,
    canonical_smiles,
    is_dfs_order,
    random_order,
)
from nagkit.molgraph.encode import AtomRow, EncoderInput, encoder_inputs
from nagkit.molgraph.graph import (
    Atom,
    Bond,
    BondOrder,
    Molecule,
    NodeOrder,
    default_hydrogens,
    implicit_hydrogens,
    relabel,
    strip,
)
from nagkit.molgraph.smiles import STANDARD, STRICT_KEKULIZED, SmilesError, parse_smiles, write_smiles

__all__ = [
    "Atom",
    "AtomRow",
    "Bond",
    "BondOrder",
    "EncoderInput",
    "Molecule",
    "NodeOrder",
    "STANDARD",
    "STRICT_KEKULIZED",
    "SmilesError",
    "canonical_order",
    "canonical_ranks",
    "canonical_smiles",
    "default_hydrogens",
    "encoder_inputs",
    "implicit_hydrogens",
    "is_dfs_order",
    "parse_smiles",
    "random_order",
    "relabel",
    "strip",
    "write_smiles",
]
