"""Canonical and randomized atom orders.

Canonical ranks come from Morgan-style iterative refinement: atoms start
from the invariant (element, aromatic, charge, hydrogen_count, degree,
atom_map, stereo_tag) and are re-ranked by their sorted neighbour
(rank, bond order) lists until the partition is stable.  Remaining ties
are broken by individualizing each member of the first tied class in turn
and keeping the branch whose written SMILES is lexicographically smallest.
Members that are twins (swapping them is an automorphism) are explored
only once.
"""

from __future__ import annotations

import logging
import random
from functools import lru_cache

from nagkit.molgraph.graph import Molecule, NodeOrder
from nagkit.molgraph.smiles import write_smiles

log = logging.getLogger(__name__)

MAX_LEAVES = 4096


def _dense(keys: list) -> list[int]:
    lookup = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [lookup[k] for k in keys]


def _initial_ranks(m: Molecule) -> list[int]:
    keys = []
    for i, a in enumerate(m.atoms):
        bond_orders = tuple(sorted(int(m.bond_between(i, j).order) for j in m.adjacency[i]))
        keys.append(
            (a.element, a.aromatic, a.formal_charge, a.hydrogen_count, m.degree(i),
             a.atom_map, a.stereo_tag or "", bond_orders)
        )
    return _dense(keys)


def _refine(m: Molecule, ranks: list[int], edge_label: list[dict[int, tuple]]) -> list[int]:
    classes = len(set(ranks))
    while True:
        keys = [
            (ranks[i], tuple(sorted((ranks[j], edge_label[i][j]) for j in m.adjacency[i])))
            for i in range(len(ranks))
        ]
        new = _dense(keys)
        new_classes = len(set(new))
        if new_classes == classes:
            return new
        ranks, classes = new, new_classes


def _dfs_sequence(m: Molecule, ranks: list[int]) -> list[int]:
    """DFS preorder rooted at the lowest-rank atom, neighbours by ascending rank."""
    n = len(ranks)
    root = min(range(n), key=ranks.__getitem__)
    seen = [False] * n
    seen[root] = True
    seq = [root]
    stack = [iter(sorted(m.adjacency[root], key=ranks.__getitem__))]
    while stack:
        for v in stack[-1]:
            if not seen[v]:
                seen[v] = True
                seq.append(v)
                stack.append(iter(sorted(m.adjacency[v], key=ranks.__getitem__)))
                break
        else:
            stack.pop()
    return seq


def _twins(m: Molecule, u: int, v: int, edge_label: list[dict[int, tuple]]) -> bool:
    if m.atoms[u] != m.atoms[v]:
        return False
    nu = {j: edge_label[u][j] for j in m.adjacency[u] if j != v}
    nv = {j: edge_label[v][j] for j in m.adjacency[v] if j != u}
    return nu == nv


def _canonical_connected(m: Molecule) -> tuple[str, list[int]]:
    """Canonical (smiles, atom sequence) for a connected molecule."""
    n = len(m.atoms)
    if n == 1:
        return write_smiles(m, NodeOrder((0,))), [0]
    edge_label = [dict() for _ in range(n)]
    for b in m.bonds:
        label = (int(b.order), b.stereo_tag or "")
        edge_label[b.a][b.b] = label
        edge_label[b.b][b.a] = label

    best: list = [None, None]
    leaves = 0

    def search(ranks: list[int]) -> None:
        nonlocal leaves
        if leaves >= MAX_LEAVES:
            return
        counts: dict[int, int] = {}
        for r in ranks:
            counts[r] = counts.get(r, 0) + 1
        tied = [r for r, c in counts.items() if c > 1]
        if not tied:
            leaves += 1
            seq = _dfs_sequence(m, ranks)
            text = write_smiles(m, NodeOrder.from_sequence(seq))
            if best[0] is None or text < best[0]:
                best[0], best[1] = text, seq
            return
        target = min(tied)
        members = [i for i in range(n) if ranks[i] == target]
        explored: list[int] = []
        for v in members:
            if any(_twins(m, u, v, edge_label) for u in explored):
                continue
            explored.append(v)
            split = _dense([(r, 0 if i == v else 1) for i, r in enumerate(ranks)])
            search(_refine(m, split, edge_label))

    search(_refine(m, _initial_ranks(m), edge_label))
    if leaves >= MAX_LEAVES:
        log.warning("canonical search truncated after %d leaves", MAX_LEAVES)
    return best[0], best[1]


@lru_cache(maxsize=65536)
def _canonical_fragments(m: Molecule) -> tuple[tuple[str, tuple[int, ...]], ...]:
    frags = []
    for comp in m.components():
        sub = m.subgraph(comp)
        text, seq = _canonical_connected(sub)
        frags.append((text, tuple(comp[i] for i in seq)))
    frags.sort(key=lambda f: f[0])
    return tuple(frags)


def canonical_order(m: Molecule) -> NodeOrder:
    """Relabel-invariant atom order.

    Fragments are laid out contiguously in ascending canonical-SMILES order;
    inside a fragment the order is the DFS emission order of its canonical
    SMILES, so ``write_smiles(m, canonical_order(m)) == canonical_smiles(m)``.
    """
    if not m.atoms:
        return NodeOrder(())
    seq: list[int] = []
    for _, atoms in _canonical_fragments(m):
        seq.extend(atoms)
    return NodeOrder.from_sequence(seq)


def canonical_smiles(m: Molecule) -> str:
    return ".".join(text for text, _ in _canonical_fragments(m))


def canonical_ranks(m: Molecule) -> tuple[int, ...]:
    """Position of each atom under :func:`canonical_order`."""
    return canonical_order(m).permutation


def random_order(m: Molecule, seed: int) -> NodeOrder:
    """Seeded random DFS emission order: random fragment order, roots and neighbour shuffles."""
    if not m.atoms:
        raise ValueError("random_order of an empty molecule")
    rng = random.Random(seed)
    comps = m.components()
    rng.shuffle(comps)
    seen = [False] * len(m.atoms)
    seq: list[int] = []
    for comp in comps:
        root = rng.choice(comp)
        seen[root] = True
        seq.append(root)
        nbrs = list(m.adjacency[root])
        rng.shuffle(nbrs)
        stack = [iter(nbrs)]
        while stack:
            for v in stack[-1]:
                if not seen[v]:
                    seen[v] = True
                    seq.append(v)
                    nbrs = list(m.adjacency[v])
                    rng.shuffle(nbrs)
                    stack.append(iter(nbrs))
                    break
            else:
                stack.pop()
    return NodeOrder.from_sequence(seq)


def is_dfs_order(m: Molecule, order: NodeOrder) -> bool:
    """True when ``order`` equals the preorder of the ascending-position DFS it induces."""
    order.check(m)
    pos = order.permutation
    seq = order.sequence
    seen = [False] * len(seq)
    replay: list[int] = []
    for root in seq:
        if seen[root]:
            continue
        seen[root] = True
        replay.append(root)
        stack = [iter(sorted(m.adjacency[root], key=pos.__getitem__))]
        while stack:
            for v in stack[-1]:
                if not seen[v]:
                    seen[v] = True
                    replay.append(v)
                    stack.append(iter(sorted(m.adjacency[v], key=pos.__getitem__)))
                    break
            else:
                stack.pop()
    return tuple(replay) == seq
