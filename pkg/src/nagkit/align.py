"""Product-reactant node alignment.

Given an ordered product, the reactant order is fixed as follows: atoms
shared with the product (equal nonzero atom maps) come first, in product
order; atoms only present in the reactant follow, discovered by a DFS that
starts from the shared atoms in position order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from nagkit.molgraph import (
    Molecule,
    NodeOrder,
    canonical_ranks,
    canonical_smiles,
    random_order,
    strip,
    write_smiles,
)

log = logging.getLogger(__name__)


class DuplicateAtomMapError(ValueError):
    pass


@dataclass(frozen=True)
class SharedMatch:
    shared: dict[int, int]
    unmatched_product: tuple[int, ...] = ()  # mapped product atoms absent from the reactant
    unmapped_product: tuple[int, ...] = ()   # product atoms with atom_map 0

    @property
    def warnings(self) -> list[str]:
        out = []
        if self.unmapped_product:
            out.append(f"{len(self.unmapped_product)} unmapped product atom(s) treated as non-shared")
        if self.unmatched_product:
            out.append(f"{len(self.unmatched_product)} product atom map(s) missing from the reactant")
        return out


@dataclass(frozen=True)
class AlignedPair:
    product: Molecule
    product_order: NodeOrder
    reactant: Molecule
    reactant_order: NodeOrder
    shared: dict[int, int] = field(hash=False)

    def to_json(self) -> dict:
        return {
            "product_smiles": write_smiles(self.product, self.product_order),
            "reactant_smiles": write_smiles(self.reactant, self.reactant_order),
            "product_order": list(self.product_order.permutation),
            "reactant_order": list(self.reactant_order.permutation),
            "shared": [[p, r] for p, r in sorted(self.shared.items())],
        }


def _map_index(m: Molecule, side: str) -> dict[int, int]:
    index: dict[int, int] = {}
    for i, atom in enumerate(m.atoms):
        if atom.atom_map:
            if atom.atom_map in index:
                raise DuplicateAtomMapError(f"atom map {atom.atom_map} appears twice in the {side}")
            index[atom.atom_map] = i
    return index


def match_shared(product: Molecule, reactant: Molecule) -> SharedMatch:
    """Pair product and reactant atoms carrying equal nonzero atom maps."""
    pmap = _map_index(product, "product")
    rmap = _map_index(reactant, "reactant")
    shared = {p: rmap[k] for k, p in pmap.items() if k in rmap}
    unmatched = tuple(sorted(p for k, p in pmap.items() if k not in rmap))
    unmapped = tuple(i for i, a in enumerate(product.atoms) if not a.atom_map)
    match = SharedMatch(shared, unmatched, unmapped)
    for msg in match.warnings:
        log.warning(msg)
    return match


def _atom_key(atom, rank: int) -> tuple:
    return (atom.element, atom.formal_charge, atom.hydrogen_count, atom.atom_map, rank)


def derive_reactant_order(product: Molecule, product_order: NodeOrder, reactant: Molecule) -> AlignedPair:
    """Reactant order induced by an ordered product.

    Shared atoms take positions ``0..s-1`` in ascending product position.
    Non-shared atoms are appended by a DFS seeded from the shared atoms (in
    position order), choosing neighbours by ascending
    (element, charge, hydrogen_count, atom_map, canonical rank).  Fragments
    with no shared atom come last, by ascending canonical SMILES, each in its
    canonical order.
    """
    product_order.check(product)
    shared = match_shared(product, reactant).shared
    n = len(reactant.atoms)

    seq = [shared[p] for p in sorted(shared, key=product_order.permutation.__getitem__)]
    visited = [False] * n
    for r in seq:
        visited[r] = True

    ranks = canonical_ranks(reactant)
    atoms = reactant.atoms

    def key(v: int) -> tuple:
        return _atom_key(atoms[v], ranks[v])

    def expand(start: int) -> None:
        visited[start] = True
        seq.append(start)
        stack = [iter(sorted(reactant.adjacency[start], key=key))]
        while stack:
            for v in stack[-1]:
                if not visited[v]:
                    visited[v] = True
                    seq.append(v)
                    stack.append(iter(sorted(reactant.adjacency[v], key=key)))
                    break
            else:
                stack.pop()

    for r in list(seq[: len(shared)]):
        for v in sorted(reactant.adjacency[r], key=key):
            if not visited[v]:
                expand(v)

    leftover = [i for i in range(n) if not visited[i]]
    if leftover:
        rest = reactant.subgraph(leftover)
        frags = []
        for comp in rest.components():
            sub = rest.subgraph(comp)
            local = canonical_ranks(sub)
            inner = sorted(range(len(comp)), key=local.__getitem__)
            frags.append((canonical_smiles(sub), [leftover[comp[i]] for i in inner]))
        frags.sort(key=lambda f: f[0])
        for _, atoms_in_order in frags:
            seq.extend(atoms_in_order)

    return AlignedPair(product, product_order, reactant, NodeOrder.from_sequence(seq), dict(shared))


def make_training_pair(product: Molecule, reactant: Molecule, seed: int) -> AlignedPair:
    """Random product order (seeded) plus the aligned reactant order."""
    return derive_reactant_order(product, random_order(product, seed), reactant)


def reactant_identity(m: Molecule) -> str:
    """Canonical SMILES without maps or stereo, the form recovered from generated tokens."""
    return canonical_smiles(strip(m))
