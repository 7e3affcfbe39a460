"""SMILES reader and order-driven writer.

Dialect: organic subset, bracket atoms (no isotopes), ring closures
including ``%nn``, branches, dot-separated fragments and lowercase aromatic
atoms.  Stereo markers (``@``, ``@@``, ``/``, ``\\``) are kept verbatim as
opaque tags and never interpreted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from nagkit.molgraph.graph import (
    AROMATIC_ELEMENTS,
    AROMATIC_ORGANIC,
    ELEMENTS,
    MAX_CHARGE,
    MIN_CHARGE,
    ORGANIC_SUBSET,
    Atom,
    Bond,
    BondOrder,
    Molecule,
    NodeOrder,
    default_hydrogens,
)

STANDARD = "standard"
STRICT_KEKULIZED = "strict-kekulized"

_BOND_SYMBOLS = {
    "-": BondOrder.SINGLE,
    "=": BondOrder.DOUBLE,
    "#": BondOrder.TRIPLE,
    ":": BondOrder.AROMATIC,
    "/": BondOrder.SINGLE,
    "\\": BondOrder.SINGLE,
}
_BOND_TEXT = {BondOrder.DOUBLE: "=", BondOrder.TRIPLE: "#"}

_CHIRAL_RE = re.compile(r"@(?:@|TH[12]|AL[12]|SP[123]|TB\d{1,2}|OH\d{1,2})?")


class SmilesError(ValueError):
    """Raised for SMILES text that cannot be read."""

    def __init__(self, message: str, text: str = "", position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position} in {text!r})"
        super().__init__(message)
        self.position = position


@dataclass
class _PendingBond:
    order: BondOrder | None
    stereo: str | None
    position: int


def _bracket_atom(body: str, text: str, pos: int, mode: str) -> Atom:
    i = 0
    if body[:1].isdigit():
        raise SmilesError("isotope labels are not supported", text, pos)
    # element symbol
    if body[:2] in ("se", "as", "te"):
        element, aromatic, i = body[:2].capitalize(), True, 2
    elif body[:1].islower():
        element, aromatic, i = body[:1].upper(), True, 1
    elif body[:2] in ELEMENTS and len(body) > 1 and body[1].islower():
        element, aromatic, i = body[:2], False, 2
    elif body[:1] in ELEMENTS:
        element, aromatic, i = body[:1], False, 1
    else:
        raise SmilesError(f"unknown element in [{body}]", text, pos)
    if aromatic and element not in AROMATIC_ELEMENTS:
        raise SmilesError(f"unknown aromatic element in [{body}]", text, pos)
    if aromatic and mode == STRICT_KEKULIZED:
        raise SmilesError("aromatic atom in strict-kekulized mode", text, pos)

    stereo = None
    m = _CHIRAL_RE.match(body, i)
    if m:
        stereo = m.group(0)
        i = m.end()

    hcount = 0
    if body[i:i + 1] == "H":
        i += 1
        j = i
        while j < len(body) and body[j].isdigit():
            j += 1
        hcount = int(body[i:j]) if j > i else 1
        i = j

    charge = 0
    if body[i:i + 1] in ("+", "-"):
        sign = 1 if body[i] == "+" else -1
        j = i + 1
        if j < len(body) and body[j].isdigit():
            k = j
            while k < len(body) and body[k].isdigit():
                k += 1
            charge = sign * int(body[j:k])
            i = k
        else:
            while j < len(body) and body[j] == body[i]:
                j += 1
            charge = sign * (j - i)
            i = j
        if not MIN_CHARGE <= charge <= MAX_CHARGE:
            raise SmilesError(f"charge {charge:+d} outside [{MIN_CHARGE}, {MAX_CHARGE}]", text, pos)

    amap = 0
    if body[i:i + 1] == ":":
        j = i + 1
        k = j
        while k < len(body) and body[k].isdigit():
            k += 1
        if k == j:
            raise SmilesError("empty atom map number", text, pos)
        amap = int(body[j:k])
        i = k

    if i != len(body):
        raise SmilesError(f"invalid bracket atom [{body}]", text, pos)
    return Atom(element, charge, hcount, amap, aromatic, stereo)


def parse_smiles(text: str, mode: str = STANDARD) -> Molecule:
    """Parse a (possibly dot-separated) SMILES string.

    Organic-subset atoms get hydrogens from the default-valence model once
    the whole graph is known; bracket atoms take their ``H`` count literally.
    """
    if mode not in (STANDARD, STRICT_KEKULIZED):
        raise ValueError(f"unknown parse mode {mode!r}")
    text = text.strip()
    if not text:
        raise SmilesError("empty SMILES")

    atoms: list[Atom] = []
    implicit: list[bool] = []
    bonds: dict[tuple[int, int], Bond] = {}
    ring_open: dict[int, tuple[int, _PendingBond | None]] = {}
    branch_stack: list[int | None] = []
    prev: int | None = None
    pending: _PendingBond | None = None

    def connect(a: int, b: int, bond: _PendingBond | None, pos: int) -> None:
        key = (min(a, b), max(a, b))
        if a == b:
            raise SmilesError("ring closure onto the same atom", text, pos)
        if key in bonds:
            raise SmilesError(f"duplicate bond between atoms {a} and {b}", text, pos)
        if bond is None or bond.order is None:
            both_aromatic = atoms[a].aromatic and atoms[b].aromatic
            order = BondOrder.AROMATIC if both_aromatic else BondOrder.SINGLE
            stereo = None
        else:
            order, stereo = bond.order, bond.stereo
        bonds[key] = Bond(a, b, order, stereo)

    def add_atom(atom: Atom, is_implicit: bool, pos: int) -> None:
        nonlocal prev, pending
        atoms.append(atom)
        implicit.append(is_implicit)
        idx = len(atoms) - 1
        if prev is not None:
            connect(prev, idx, pending, pos)
        elif pending is not None:
            raise SmilesError("bond symbol without a preceding atom", text, pending.position)
        pending = None
        prev = idx

    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "[":
            close = text.find("]", i)
            if close < 0:
                raise SmilesError("unclosed bracket atom", text, i)
            add_atom(_bracket_atom(text[i + 1:close], text, i, mode), False, i)
            i = close + 1
        elif text.startswith(("Cl", "Br"), i):
            add_atom(Atom(text[i:i + 2]), True, i)
            i += 2
        elif ch in "BCNOPSFI":
            add_atom(Atom(ch), True, i)
            i += 1
        elif ch in "bcnops":
            if mode == STRICT_KEKULIZED:
                raise SmilesError("aromatic atom in strict-kekulized mode", text, i)
            add_atom(Atom(ch.upper(), aromatic=True), True, i)
            i += 1
        elif ch in _BOND_SYMBOLS:
            if pending is not None:
                raise SmilesError("two consecutive bond symbols", text, i)
            if ch == ":" and mode == STRICT_KEKULIZED:
                raise SmilesError("aromatic bond in strict-kekulized mode", text, i)
            stereo = ch if ch in "/\\" else None
            pending = _PendingBond(_BOND_SYMBOLS[ch], stereo, i)
            i += 1
        elif ch == "(":
            if prev is None:
                raise SmilesError("branch without a preceding atom", text, i)
            branch_stack.append(prev)
            i += 1
        elif ch == ")":
            if not branch_stack:
                raise SmilesError("unbalanced ')'", text, i)
            if pending is not None:
                raise SmilesError("dangling bond symbol before ')'", text, i)
            prev = branch_stack.pop()
            i += 1
        elif ch.isdigit() or ch == "%":
            if ch == "%":
                if not text[i + 1:i + 3].isdigit() or len(text[i + 1:i + 3]) != 2:
                    raise SmilesError("'%' must be followed by two digits", text, i)
                label, width = int(text[i + 1:i + 3]), 3
            else:
                label, width = int(ch), 1
            if prev is None:
                raise SmilesError(f"ring closure {label} without a preceding atom", text, i)
            if label in ring_open:
                other, opened = ring_open.pop(label)
                bond = pending or opened
                if pending and opened and (pending.order, pending.stereo) != (opened.order, opened.stereo):
                    raise SmilesError(f"conflicting bond symbols on ring closure {label}", text, i)
                connect(other, prev, bond, i)
            else:
                ring_open[label] = (prev, pending)
            pending = None
            i += width
        elif ch == ".":
            if branch_stack:
                raise SmilesError("'.' inside a branch", text, i)
            if pending is not None:
                raise SmilesError("dangling bond symbol before '.'", text, i)
            prev = None
            i += 1
        elif ch == "$":
            raise SmilesError("quadruple bonds are not supported", text, i)
        elif ch.isalpha() or ch == "*":
            raise SmilesError(f"unknown element {ch!r}", text, i)
        else:
            raise SmilesError(f"unexpected character {ch!r}", text, i)

    if ring_open:
        label = min(ring_open)
        raise SmilesError(f"unclosed ring closure {label}")
    if branch_stack:
        raise SmilesError("unclosed branch '('")
    if pending is not None:
        raise SmilesError("dangling bond symbol at end of SMILES")

    mol = Molecule(tuple(atoms), tuple(bonds.values()))
    if any(implicit):
        fixed = list(mol.atoms)
        for idx, is_implicit in enumerate(implicit):
            if is_implicit:
                fixed[idx] = Atom(
                    fixed[idx].element,
                    hydrogen_count=default_hydrogens(mol, idx),
                    aromatic=fixed[idx].aromatic,
                )
        mol = Molecule(tuple(fixed), mol.bonds)
    return mol


def _atom_text(m: Molecule, i: int) -> str:
    atom = m.atoms[i]
    bare_ok = (
        atom.element in ORGANIC_SUBSET
        and (not atom.aromatic or atom.element in AROMATIC_ORGANIC)
        and atom.formal_charge == 0
        and atom.atom_map == 0
        and atom.stereo_tag is None
        and atom.hydrogen_count == default_hydrogens(m, i)
    )
    if bare_ok:
        return atom.symbol
    parts = ["[", atom.symbol]
    if atom.stereo_tag:
        parts.append(atom.stereo_tag)
    if atom.hydrogen_count:
        parts.append("H" if atom.hydrogen_count == 1 else f"H{atom.hydrogen_count}")
    if atom.formal_charge:
        sign = "+" if atom.formal_charge > 0 else "-"
        mag = abs(atom.formal_charge)
        parts.append(sign if mag == 1 else f"{sign}{mag}")
    if atom.atom_map:
        parts.append(f":{atom.atom_map}")
    parts.append("]")
    return "".join(parts)


def _bond_text(m: Molecule, a: int, b: int) -> str:
    bond = m.bond_between(a, b)
    if bond.stereo_tag:
        return bond.stereo_tag
    both_aromatic = m.atoms[a].aromatic and m.atoms[b].aromatic
    if bond.order is BondOrder.SINGLE:
        return "-" if both_aromatic else ""
    if bond.order is BondOrder.AROMATIC:
        return "" if both_aromatic else ":"
    return _BOND_TEXT[bond.order]


def _ring_label(d: int) -> str:
    return str(d) if d < 10 else f"%{d:02d}"


def write_smiles(m: Molecule, order: NodeOrder) -> str:
    """Write ``m`` so that the traversal follows ``order``.

    Each connected component is rooted at its lowest-position atom and
    components are emitted by ascending root position.  Neighbours are
    visited in ascending position, so when ``order`` is itself a DFS
    emission order the written atoms appear exactly in position order.
    """
    order.check(m)
    n = len(m.atoms)
    if n == 0:
        return ""
    pos = order.permutation
    sorted_nbrs = [sorted(m.adjacency[u], key=pos.__getitem__) for u in range(n)]

    # DFS tree and preorder (iterative to avoid recursion limits)
    visited = [False] * n
    children: list[list[int]] = [[] for _ in range(n)]
    preorder_index = [0] * n
    roots: list[int] = []
    counter = 0
    for root in order.sequence:
        if visited[root]:
            continue
        roots.append(root)
        visited[root] = True
        preorder_index[root] = counter
        counter += 1
        stack = [(root, iter(sorted_nbrs[root]))]
        while stack:
            u, it = stack[-1]
            for v in it:
                if not visited[v]:
                    visited[v] = True
                    preorder_index[v] = counter
                    counter += 1
                    children[u].append(v)
                    stack.append((v, iter(sorted_nbrs[v])))
                    break
            else:
                stack.pop()

    tree = set()
    for u in range(n):
        for v in children[u]:
            tree.add((min(u, v), max(u, v)))
    ring_partners: list[list[int]] = [[] for _ in range(n)]
    for bond in m.bonds:
        key = (min(bond.a, bond.b), max(bond.a, bond.b))
        if key not in tree:
            ring_partners[bond.a].append(bond.b)
            ring_partners[bond.b].append(bond.a)
    for u in range(n):
        ring_partners[u].sort(key=preorder_index.__getitem__)

    out: list[str] = []
    open_digits: dict[tuple[int, int], int] = {}
    in_use: set[int] = set()

    def emit_atom(u: int) -> None:
        out.append(_atom_text(m, u))
        closed_here = set()
        for w in ring_partners[u]:
            if preorder_index[w] < preorder_index[u]:
                d = open_digits.pop((w, u))
                in_use.discard(d)
                closed_here.add(d)
                out.append(_ring_label(d))
        for w in ring_partners[u]:
            if preorder_index[w] > preorder_index[u]:
                d = 1
                while d in in_use or d in closed_here:
                    d += 1
                if d > 99:
                    raise ValueError("more than 99 simultaneous ring closures")
                in_use.add(d)
                open_digits[(u, w)] = d
                out.append(_bond_text(m, u, w) + _ring_label(d))

    # iterative emission: ("atom", u, parent) pushes; ")" markers close branches
    for k, root in enumerate(roots):
        if k:
            out.append(".")
        stack: list[tuple] = [("atom", root, None, False)]
        while stack:
            item = stack.pop()
            if item[0] == "close":
                out.append(")")
                continue
            _, u, parent, branched = item
            if branched:
                out.append("(")
            if parent is not None:
                out.append(_bond_text(m, parent, u))
            emit_atom(u)
            kids = children[u]
            # push in reverse so the smallest-position child is emitted first
            for idx in range(len(kids) - 1, -1, -1):
                is_branch = idx < len(kids) - 1
                if is_branch:
                    stack.append(("close",))
                stack.append(("atom", kids[idx], u, is_branch))
    return "".join(out)
