"""Atom / bond / molecule data model and the implicit-hydrogen valence model."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Iterable, Sequence

MIN_CHARGE = -4
MAX_CHARGE = 4


class BondOrder(IntEnum):
    """Bond order codes; the integer value doubles as the edge-matrix / token code."""

    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4

    @property
    def valence(self) -> float:
        return 1.5 if self is BondOrder.AROMATIC else float(self.value)


# Daylight default valences for the organic subset.
DEFAULT_VALENCE: dict[str, tuple[int, ...]] = {
    "B": (3,),
    "C": (4,),
    "N": (3, 5),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}
ORGANIC_SUBSET = frozenset(DEFAULT_VALENCE)
AROMATIC_ORGANIC = frozenset({"B", "C", "N", "O", "P", "S"})

# valence electrons for the isoelectronic rule used on charged atoms
_VALENCE_ELECTRONS = {"B": 3, "C": 4, "N": 5, "O": 6, "P": 5, "S": 6, "F": 7, "Cl": 7, "Br": 7, "I": 7}

ELEMENTS = frozenset(
    """H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn
    Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba La Ce Pr
    Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po At Rn Fr
    Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr""".split()
)
# elements that may be written lowercase (aromatic) inside brackets
AROMATIC_ELEMENTS = frozenset({"B", "C", "N", "O", "P", "S", "Se", "As", "Te"})


@dataclass(frozen=True, slots=True)
class Atom:
    element: str
    formal_charge: int = 0
    hydrogen_count: int = 0
    atom_map: int = 0
    aromatic: bool = False
    stereo_tag: str | None = None

    def __post_init__(self) -> None:
        if self.element not in ELEMENTS:
            raise ValueError(f"unknown element {self.element!r}")
        if not MIN_CHARGE <= self.formal_charge <= MAX_CHARGE:
            raise ValueError(f"formal charge {self.formal_charge} outside [{MIN_CHARGE}, {MAX_CHARGE}]")
        if self.hydrogen_count < 0:
            raise ValueError("hydrogen_count must be non-negative")
        if self.atom_map < 0:
            raise ValueError("atom_map must be non-negative")

    @property
    def symbol(self) -> str:
        """Element symbol in SMILES case (lowercase when aromatic)."""
        return self.element.lower() if self.aromatic else self.element


@dataclass(frozen=True, slots=True)
class Bond:
    """Undirected bond.  ``stereo_tag`` keeps a ``/`` or ``\\`` marker verbatim."""

    a: int
    b: int
    order: BondOrder = BondOrder.SINGLE
    stereo_tag: str | None = None

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValueError(f"self-loop on atom {self.a}")
        object.__setattr__(self, "order", BondOrder(self.order))

    @property
    def endpoints(self) -> frozenset[int]:
        return frozenset((self.a, self.b))

    def other(self, i: int) -> int:
        return self.b if i == self.a else self.a


@dataclass(frozen=True)
class Molecule:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...] = ()
    adjacency: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    _bond_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "bonds", tuple(self.bonds))
        n = len(self.atoms)
        nbrs: list[list[int]] = [[] for _ in range(n)]
        index: dict[tuple[int, int], Bond] = {}
        for bond in self.bonds:
            if not (0 <= bond.a < n and 0 <= bond.b < n):
                raise ValueError(f"bond {bond.a}-{bond.b} references a missing atom")
            key = (min(bond.a, bond.b), max(bond.a, bond.b))
            if key in index:
                raise ValueError(f"duplicate bond between atoms {key[0]} and {key[1]}")
            index[key] = bond
            nbrs[bond.a].append(bond.b)
            nbrs[bond.b].append(bond.a)
        object.__setattr__(self, "adjacency", tuple(tuple(sorted(x)) for x in nbrs))
        object.__setattr__(self, "_bond_index", index)

    def __len__(self) -> int:
        return len(self.atoms)

    def bond_between(self, i: int, j: int) -> Bond | None:
        return self._bond_index.get((min(i, j), max(i, j)))

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def bond_valence(self, i: int) -> float:
        return sum(self._bond_index[(min(i, j), max(i, j))].order.valence for j in self.adjacency[i])

    def components(self) -> list[list[int]]:
        """Connected components, each a sorted list of atom indices, ordered by smallest index."""
        seen = [False] * len(self.atoms)
        out = []
        for start in range(len(self.atoms)):
            if seen[start]:
                continue
            seen[start] = True
            stack, comp = [start], []
            while stack:
                u = stack.pop()
                comp.append(u)
                for v in self.adjacency[u]:
                    if not seen[v]:
                        seen[v] = True
                        stack.append(v)
            out.append(sorted(comp))
        return out

    def edge_set(self) -> frozenset[tuple[int, int, int, str | None]]:
        return frozenset((min(b.a, b.b), max(b.a, b.b), int(b.order), b.stereo_tag) for b in self.bonds)

    def same_graph(self, other: Molecule) -> bool:
        """Identical atoms at identical indices and identical bonds, regardless of bond listing order."""
        return self.atoms == other.atoms and self.edge_set() == other.edge_set()

    def heavy_atom_count(self) -> int:
        return sum(1 for a in self.atoms if a.element != "H")

    def subgraph(self, indices: Sequence[int]) -> Molecule:
        """Induced subgraph; atoms renumbered in the given order."""
        remap = {old: new for new, old in enumerate(indices)}
        bonds = [
            Bond(remap[b.a], remap[b.b], b.order, b.stereo_tag)
            for b in self.bonds
            if b.a in remap and b.b in remap
        ]
        return Molecule(tuple(self.atoms[i] for i in indices), tuple(bonds))


@dataclass(frozen=True)
class NodeOrder:
    """``permutation[atom_index]`` is the 0-based position of that atom."""

    permutation: tuple[int, ...]

    def __post_init__(self) -> None:
        perm = tuple(int(p) for p in self.permutation)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError("NodeOrder is not a permutation")
        object.__setattr__(self, "permutation", perm)

    @classmethod
    def identity(cls, n: int) -> NodeOrder:
        return cls(tuple(range(n)))

    @classmethod
    def from_sequence(cls, atoms_in_order: Iterable[int]) -> NodeOrder:
        """Build from the list of atom indices sorted by position."""
        seq = list(atoms_in_order)
        if sorted(seq) != list(range(len(seq))):
            raise ValueError("NodeOrder is not a permutation")
        perm = [0] * len(seq)
        for pos, atom in enumerate(seq):
            perm[atom] = pos
        return cls(tuple(perm))

    def __len__(self) -> int:
        return len(self.permutation)

    def __getitem__(self, atom: int) -> int:
        return self.permutation[atom]

    @property
    def sequence(self) -> tuple[int, ...]:
        """Atom indices sorted by position."""
        seq = [0] * len(self.permutation)
        for atom, pos in enumerate(self.permutation):
            seq[pos] = atom
        return tuple(seq)

    def check(self, m: Molecule) -> None:
        if len(self.permutation) != len(m.atoms):
            raise ValueError(f"order covers {len(self.permutation)} atoms, molecule has {len(m.atoms)}")


def implicit_hydrogens(element: str, bond_valence: float, aromatic: bool = False, charge: int = 0) -> int:
    """Implicit hydrogen count under the default-valence model.

    For aromatic atoms ``bond_valence`` must count aromatic bonds as 1; a
    single shared aromatic contribution is added and only the lowest valence
    is considered.
    Charged atoms use the isoelectronic valence (N+ behaves like C, O- like F).
    Returns 0 for elements outside the organic subset.
    """
    if element not in DEFAULT_VALENCE:
        return 0
    if charge:
        electrons = _VALENCE_ELECTRONS[element] - charge
        if electrons <= 0 or electrons >= 8:
            return 0
        allowed: tuple[int, ...] = (electrons if electrons <= 4 else 8 - electrons,)
    else:
        allowed = DEFAULT_VALENCE[element]
    if aromatic:
        used = int(bond_valence) + 1
        allowed = allowed[:1]
    else:
        used = int(round(bond_valence))
    for v in allowed:
        if v >= used:
            return v - used
    return 0


def aromatic_bond_sum(m: Molecule, i: int) -> int:
    """Bond sum with aromatic bonds counted as 1."""
    total = 0
    for j in m.adjacency[i]:
        order = m.bond_between(i, j).order
        total += 1 if order is BondOrder.AROMATIC else int(order)
    return total


def default_hydrogens(m: Molecule, i: int) -> int:
    """Implicit hydrogens the valence model assigns to atom ``i`` given its bonds."""
    atom = m.atoms[i]
    if atom.aromatic:
        return implicit_hydrogens(atom.element, aromatic_bond_sum(m, i), True, atom.formal_charge)
    return implicit_hydrogens(atom.element, m.bond_valence(i), False, atom.formal_charge)


def relabel(m: Molecule, perm: Sequence[int]) -> Molecule:
    """Renumber atoms: old atom ``i`` becomes new atom ``perm[i]``."""
    n = len(m.atoms)
    if sorted(perm) != list(range(n)):
        raise ValueError("relabel expects a permutation")
    atoms: list[Atom | None] = [None] * n
    for old, new in enumerate(perm):
        atoms[new] = m.atoms[old]
    bonds = [Bond(perm[b.a], perm[b.b], b.order, b.stereo_tag) for b in m.bonds]
    return Molecule(tuple(atoms), tuple(bonds))


def strip(m: Molecule, maps: bool = True, stereo: bool = True) -> Molecule:
    """Copy of ``m`` without atom maps and/or stereo annotations."""
    atoms = tuple(
        replace(a, atom_map=0 if maps else a.atom_map, stereo_tag=None if stereo else a.stereo_tag)
        for a in m.atoms
    )
    bonds = m.bonds if not stereo else tuple(Bond(b.a, b.b, b.order) for b in m.bonds)
    return Molecule(atoms, bonds)
