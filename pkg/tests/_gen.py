"""Random molecule and mapped-reaction generators plus a small handwritten corpus."""

from __future__ import annotations

import random

import networkx as nx

from nagkit.molgraph import Atom, Bond, BondOrder, Molecule, default_hydrogens, relabel

_CHAIN_ELEMENTS = ("C", "C", "C", "C", "N", "O", "S", "F", "Cl", "Br", "P")
_RING_ELEMENTS = ("c", "c", "c", "c", "n")


def _fragment(rng: random.Random, n: int, offset: int, aromatic: bool) -> tuple[list[dict], list[tuple]]:
    atoms: list[dict] = []
    bonds: list[tuple] = []
    start = 0
    if aromatic and n >= 5:
        size = rng.choice((5, 6)) if n >= 6 else 5
        for k in range(size):
            sym = rng.choice(_RING_ELEMENTS)
            atoms.append({"element": sym.upper(), "aromatic": True})
            if k:
                bonds.append((offset + k - 1, offset + k, BondOrder.AROMATIC))
        bonds.append((offset, offset + size - 1, BondOrder.AROMATIC))
        start = size
    for k in range(start, n):
        atoms.append({"element": rng.choice(_CHAIN_ELEMENTS), "aromatic": False})
        if k:
            parent = rng.randrange(k)
            order = rng.choices((BondOrder.SINGLE, BondOrder.DOUBLE, BondOrder.TRIPLE), (8, 2, 1))[0]
            bonds.append((offset + parent, offset + k, order))
    # a few extra ring closures between chain atoms
    existing = {frozenset(b[:2]) for b in bonds}
    for _ in range(rng.choice((0, 0, 1, 1, 2))):
        if n - start < 3:
            break
        a, b = rng.sample(range(start, n), 2)
        key = frozenset((offset + a, offset + b))
        if key not in existing:
            existing.add(key)
            bonds.append((offset + a, offset + b, BondOrder.SINGLE))
    return atoms, bonds


def random_molecule(rng: random.Random, n_max: int = 12, *, n_min: int = 1, fragments: int = 1,
                    aromatic: float = 0.3, charged: float = 0.1, odd_h: float = 0.1,
                    stereo: float = 0.0, maps: bool = False) -> Molecule:
    """A random molecule with per-fragment sizes in [n_min, n_max].

    Hydrogen counts follow the default-valence model except on a fraction
    ``odd_h`` of atoms, which get a random count (written as bracket atoms).
    """
    specs: list[dict] = []
    raw_bonds: list[tuple] = []
    for _ in range(fragments):
        n = rng.randint(n_min, n_max)
        atoms, bonds = _fragment(rng, n, len(specs), rng.random() < aromatic)
        specs += atoms
        raw_bonds += bonds
    stereo_atoms = {"@", "@@"}
    bonds = []
    for a, b, order in raw_bonds:
        tag = None
        if order is BondOrder.SINGLE and rng.random() < stereo:
            tag = rng.choice(("/", "\\"))
        bonds.append(Bond(a, b, order, tag))
    atoms = []
    for s in specs:
        charge = rng.choice((-1, 1, 2)) if rng.random() < charged else 0
        tag = rng.choice(sorted(stereo_atoms)) if rng.random() < stereo else None
        atoms.append(Atom(s["element"], charge, 0, 0, s["aromatic"], tag))
    draft = Molecule(tuple(atoms), tuple(bonds))
    final = []
    for i, a in enumerate(draft.atoms):
        h = rng.randint(0, 3) if rng.random() < odd_h else default_hydrogens(draft, i)
        final.append(Atom(a.element, a.formal_charge, h, 0, a.aromatic, a.stereo_tag))
    if maps:
        labels = rng.sample(range(1, 4 * len(final) + 1), len(final))
        final = [Atom(a.element, a.formal_charge, a.hydrogen_count, m, a.aromatic, a.stereo_tag)
                 for a, m in zip(final, labels)]
    return Molecule(tuple(final), tuple(bonds))


def shuffled(m: Molecule, rng: random.Random) -> tuple[Molecule, list[int]]:
    perm = list(range(len(m.atoms)))
    rng.shuffle(perm)
    return relabel(m, perm), perm


def random_reaction(rng: random.Random, n_max: int = 10) -> tuple[Molecule, Molecule]:
    """(product, reactant): a mapped multi-fragment reactant and a product built from part of it.

    The product joins the first two fragments with a new bond, drops a few
    reactant atoms (leaving groups, whole reagent fragments) and is returned
    under a random relabeling.  Occasionally one product atom loses its map.
    """
    fragments = rng.choice((1, 2, 2, 3))
    reactant = random_molecule(rng, n_max, n_min=2, fragments=fragments, maps=True, odd_h=0.0)
    comps = reactant.components()
    keep = set(range(len(reactant.atoms)))
    if len(comps) >= 3 and rng.random() < 0.7:
        keep -= set(comps[-1])  # reagent-like fragment not in the product
    for comp in comps[:2]:
        leaves = [v for v in comp if reactant.degree(v) == 1 and len(comp) > 2]
        if leaves and rng.random() < 0.6:
            keep.discard(rng.choice(leaves))
    kept = sorted(keep)
    # keep the product connected-ish: bond the two leading fragments when both survive
    g = nx.Graph()
    g.add_nodes_from(kept)
    g.add_edges_from((b.a, b.b) for b in reactant.bonds if b.a in keep and b.b in keep)
    parts = [sorted(c) for c in nx.connected_components(g)]
    new_bonds = [(rng.choice(parts[k]), rng.choice(parts[k + 1])) for k in range(min(len(parts) - 1, 2))]
    idx = {old: new for new, old in enumerate(kept)}
    atoms = [reactant.atoms[i] for i in kept]
    touched = {v for pair in new_bonds for v in pair}
    atoms = [
        Atom(a.element, a.formal_charge, max(a.hydrogen_count - (old in touched), 0), a.atom_map, a.aromatic)
        for old, a in zip(kept, atoms)
    ]
    if rng.random() < 0.1 and len(atoms) > 1:
        k = rng.randrange(len(atoms))
        a = atoms[k]
        atoms[k] = Atom(a.element, a.formal_charge, a.hydrogen_count, 0, a.aromatic)
    bonds = [Bond(idx[b.a], idx[b.b], b.order) for b in reactant.bonds if b.a in keep and b.b in keep]
    bonds += [Bond(idx[a], idx[b], BondOrder.SINGLE) for a, b in new_bonds]
    product, _ = shuffled(Molecule(tuple(atoms), tuple(bonds)), rng)
    return product, reactant


def to_nx(m: Molecule) -> nx.Graph:
    g = nx.Graph()
    for i, a in enumerate(m.atoms):
        g.add_node(i, label=(a.element, a.aromatic, a.formal_charge, a.hydrogen_count, a.atom_map, a.stereo_tag))
    for b in m.bonds:
        g.add_edge(b.a, b.b, label=(int(b.order), b.stereo_tag))
    return g


def isomorphic(a: Molecule, b: Molecule) -> bool:
    match = nx.algorithms.isomorphism.categorical_node_match("label", None)
    ematch = nx.algorithms.isomorphism.categorical_edge_match("label", None)
    return nx.is_isomorphic(to_nx(a), to_nx(b), node_match=match, edge_match=ematch)


# Atom-mapped reactions in the usual reactants>>product layout, with class labels.
CORPUS = [
    ("[CH3:1][C:2](=[O:3])[OH:4].[NH2:5][c:6]1[cH:7][cH:8][cH:9][cH:10][cH:11]1"
     ">>[CH3:1][C:2](=[O:3])[NH:5][c:6]1[cH:7][cH:8][cH:9][cH:10][cH:11]1", 2),
    ("[CH3:1][C:2]([CH3:3])([CH3:4])[O:5][C:6](=[O:7])[NH:8][CH2:9][CH2:10][OH:11]"
     ">>[NH2:8][CH2:9][CH2:10][OH:11]", 6),
    ("[CH3:1][O:2][C:3](=[O:4])[c:5]1[cH:6][cH:7][cH:8][cH:9][cH:10]1"
     ">>[OH:2][C:3](=[O:4])[c:5]1[cH:6][cH:7][cH:8][cH:9][cH:10]1", 6),
    ("[Br:1][c:2]1[cH:3][cH:4][cH:5][cH:6][cH:7]1.[OH:8][B:9]([OH:10])[c:11]1[cH:12][cH:13][cH:14][cH:15][cH:16]1"
     ">>[c:2]1([c:11]2[cH:12][cH:13][cH:14][cH:15][cH:16]2)[cH:3][cH:4][cH:5][cH:6][cH:7]1", 3),
    ("[CH3:1][NH2:2].[Cl:3][CH2:4][c:5]1[cH:6][cH:7][cH:8][cH:9][cH:10]1"
     ">>[CH3:1][NH:2][CH2:4][c:5]1[cH:6][cH:7][cH:8][cH:9][cH:10]1", 1),
    ("[O-:1][N+:2](=[O:3])[c:4]1[cH:5][cH:6][cH:7][cH:8][cH:9]1>>[NH2:2][c:4]1[cH:5][cH:6][cH:7][cH:8][cH:9]1", 7),
    ("[CH3:1][CH2:2][OH:3]>>[CH3:1][CH:2]=[O:3]", 8),
    ("[NH2:1][CH2:2][CH2:3][OH:4].[CH3:5][C:6]([CH3:7])([CH3:8])[O:9][C:10](=[O:11])[O:12][C:13](=[O:14])"
     "[O:15][C:16]([CH3:17])([CH3:18])[CH3:19]"
     ">>[CH3:5][C:6]([CH3:7])([CH3:8])[O:9][C:10](=[O:11])[NH:1][CH2:2][CH2:3][OH:4]", 5),
    ("[NH2:1][c:2]1[cH:3][cH:4][cH:5][cH:6][c:7]1[NH2:8].[CH:9](=[O:10])[OH:11]"
     ">>[nH:1]1[cH:9][n:8][c:7]2[cH:6][cH:5][cH:4][cH:3][c:2]12", 4),
    ("[CH3:1][C:2](=[O:3])[OH:4].[Cl:5][S:6](=[O:7])[Cl:8]>>[CH3:1][C:2](=[O:3])[Cl:5]", 9),
    ("[cH:1]1[cH:2][cH:3][cH:4][cH:5][cH:6]1.[Br:7][Br:8]>>[Br:7][c:1]1[cH:2][cH:3][cH:4][cH:5][cH:6]1", 10),
    ("[CH3:1][C@H:2]([NH2:3])[C:4](=[O:5])[OH:6].[CH3:7][OH:8]"
     ">>[CH3:1][C@H:2]([NH2:3])[C:4](=[O:5])[O:8][CH3:7]", 2),
    ("[CH3:1][I:2].[N:3]1([CH3:4])[CH2:5][CH2:6][CH2:7][CH2:8]1"
     ">>[CH3:1][N+:3]1([CH3:4])[CH2:5][CH2:6][CH2:7][CH2:8]1", 1),
    ("[CH3:1]/[CH:2]=[CH:3]/[C:4](=[O:5])[OH:6].[CH3:7][OH:8]"
     ">>[CH3:1]/[CH:2]=[CH:3]/[C:4](=[O:5])[O:8][CH3:7]", 2),
    ("[CH3:1][CH2:2][OH:3]>[Cr]>[CH3:1][CH:2]=[O:3]", 8),
    ("[C:1]%10[CH2:2][CH2:3][CH2:4][CH2:5][CH:6]%10[OH:7].[CH3:8][C:9](=[O:10])[Cl:11]"
     ">>[CH2:1]1[CH2:2][CH2:3][CH2:4][CH2:5][CH:6]1[O:7][C:9](=[O:10])[CH3:8]", 2),
]


# Ten-product metric fixture (tests/data/eval_fixture.jsonl); values worked out by hand.
# full-match hit ranks:    1, 2, 3, 2, -, -, 3, -, 2, 6
# largest-fragment ranks:  1, 2, 3, 1, 1, -, 3, 1, 2, 6   (CC.OO and CC.NN tie on size, "CC" wins)
# emitted slots per k:     9 / 20 / 23 / 28, two of them unreadable (product 7)
EVAL_EXPECTED = {
    "top_k_accuracy": {1: 1 / 10, 3: 6 / 10, 5: 6 / 10, 10: 7 / 10},
    "top_k_maxfrag": {1: 4 / 10, 3: 8 / 10, 5: 8 / 10, 10: 9 / 10},
    "top_k_validity": {1: 8 / 9, 3: 18 / 20, 5: 21 / 23, 10: 26 / 28},
    "per_class": {
        1: {1: 1 / 2, 3: 1.0, 5: 1.0, 10: 1.0},
        2: {1: 0.0, 3: 1.0, 5: 1.0, 10: 1.0},
        3: {1: 0.0, 3: 0.0, 5: 0.0, 10: 0.0},
        4: {1: 0.0, 3: 1 / 2, 5: 1 / 2, 10: 1 / 2},
        5: {1: 0.0, 3: 1 / 2, 5: 1 / 2, 10: 1.0},
    },
}


def load_eval_fixture():
    import json
    from pathlib import Path

    rows = [json.loads(line) for line in (Path(__file__).parent / "data" / "eval_fixture.jsonl").read_text().splitlines()]
    return [r["predictions"] for r in rows], [r["truth"] for r in rows], [r["class"] for r in rows]
