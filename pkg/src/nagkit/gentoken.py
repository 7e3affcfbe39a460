"""Auto-regressive node-by-node token grammar.

Each node is emitted as ``ATOM`` then an optional ``CHARGE`` (skipped when
zero), an optional ``HCOUNT`` (skipped when zero) and its edges to earlier
nodes.  An edge token carries the gap ``i - j`` from the current node ``i``
to the earlier node ``j``; edges to larger positions come first, so gaps
strictly increase inside one node's run.  The next ``ATOM`` closes a run.

Text form, one sequence per line::

    <bos> A:C H:3 A:O E:1:1 A:C H:3 E:1:1 <eos>
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

from nagkit.molgraph import Atom, Bond, BondOrder, Molecule, NodeOrder, default_hydrogens
from nagkit.molgraph.graph import AROMATIC_ELEMENTS, ELEMENTS, MAX_CHARGE, MIN_CHARGE

MAX_SEQ_LEN = 512

EXPLICIT = "explicit"
INFERRED = "inferred"


class Kind(IntEnum):
    BOS = 0
    ATOM = 1
    CHARGE = 2
    HCOUNT = 3
    EDGE = 4
    EOS = 5


class GrammarError(ValueError):
    pass


class SequenceTooLongError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class Token:
    kind: Kind
    element: str = ""       # ATOM: SMILES-case symbol, lowercase when aromatic
    value: int = 0          # CHARGE: charge, HCOUNT: count, EDGE: gap
    bond: int = 0           # EDGE: BondOrder code

    def __str__(self) -> str:
        k = self.kind
        if k is Kind.BOS:
            return "<bos>"
        if k is Kind.EOS:
            return "<eos>"
        if k is Kind.ATOM:
            return f"A:{self.element}"
        if k is Kind.CHARGE:
            return f"C:{self.value:+d}"
        if k is Kind.HCOUNT:
            return f"H:{self.value}"
        return f"E:{self.value}:{self.bond}"


TokenSeq = tuple[Token, ...]

BOS = Token(Kind.BOS)
EOS = Token(Kind.EOS)


def atom_token(symbol: str) -> Token:
    return Token(Kind.ATOM, element=symbol)


def charge_token(c: int) -> Token:
    if c == 0 or not MIN_CHARGE <= c <= MAX_CHARGE:
        raise GrammarError(f"charge token value {c} outside [{MIN_CHARGE}, {MAX_CHARGE}] minus 0")
    return Token(Kind.CHARGE, value=c)


def hcount_token(h: int) -> Token:
    if h < 1:
        raise GrammarError("hydrogen token needs a count >= 1")
    return Token(Kind.HCOUNT, value=h)


def edge_token(gap: int, bond: int) -> Token:
    if gap < 1:
        raise GrammarError("edge gap must be >= 1")
    if bond not in (1, 2, 3, 4):
        raise GrammarError(f"unknown bond code {bond}")
    return Token(Kind.EDGE, value=gap, bond=int(bond))


def _check_symbol(symbol: str) -> tuple[str, bool]:
    if symbol and symbol[0].islower():
        element = symbol.capitalize()
        if element not in AROMATIC_ELEMENTS:
            raise GrammarError(f"unknown aromatic element {symbol!r}")
        return element, True
    if symbol not in ELEMENTS:
        raise GrammarError(f"unknown element {symbol!r}")
    return symbol, False


def parse_token(text: str) -> Token:
    if text == "<bos>":
        return BOS
    if text == "<eos>":
        return EOS
    head, _, rest = text.partition(":")
    try:
        if head == "A" and rest:
            _check_symbol(rest)
            return atom_token(rest)
        if head == "C":
            return charge_token(int(rest))
        if head == "H":
            return hcount_token(int(rest))
        if head == "E":
            gap, _, bond = rest.partition(":")
            return edge_token(int(gap), int(bond))
    except ValueError as exc:
        raise GrammarError(f"bad token {text!r}: {exc}") from None
    raise GrammarError(f"bad token {text!r}")


def to_text(seq: Iterable[Token]) -> str:
    return " ".join(str(t) for t in seq)


def from_text(line: str) -> TokenSeq:
    return tuple(parse_token(t) for t in line.split())


def serialize(reactant: Molecule, order: NodeOrder, max_len: int = MAX_SEQ_LEN) -> TokenSeq:
    """Token stream for ``reactant`` generated in ``order``."""
    order.check(reactant)
    pos = order.permutation
    out = [BOS]
    for i, a in enumerate(order.sequence):
        atom = reactant.atoms[a]
        out.append(atom_token(atom.symbol))
        if atom.formal_charge:
            out.append(charge_token(atom.formal_charge))
        if atom.hydrogen_count:
            out.append(hcount_token(atom.hydrogen_count))
        earlier = [(i - pos[b], int(reactant.bond_between(a, b).order)) for b in reactant.adjacency[a] if pos[b] < i]
        for gap, bond in sorted(earlier):
            out.append(edge_token(gap, bond))
    out.append(EOS)
    if len(out) > max_len:
        raise SequenceTooLongError(f"{len(out)} tokens exceed the maximum sequence length {max_len}")
    return tuple(out)


@dataclass(frozen=True, slots=True)
class FollowSet:
    """Legal next tokens: allowed kinds plus the admissible edge-gap range ``[min_gap, max_gap]``."""

    kinds: frozenset
    min_gap: int = 1
    max_gap: int = 0

    def allows(self, token: Token) -> bool:
        if token.kind not in self.kinds:
            return False
        if token.kind is Kind.EDGE:
            return self.min_gap <= token.value <= self.max_gap
        return True


_NO_FOLLOW = FollowSet(frozenset())


def follow_from_state(last: Kind, node: int, last_gap: int) -> FollowSet:
    """Follow set from the LL(1) state (last kind, 1-based node index, last gap)."""
    if last is Kind.BOS:
        return FollowSet(frozenset({Kind.ATOM}))
    if last is Kind.EOS:
        return _NO_FOLLOW
    if last is Kind.ATOM:
        kinds = {Kind.CHARGE, Kind.HCOUNT, Kind.ATOM, Kind.EOS}
        lo = 1
    elif last is Kind.CHARGE:
        kinds = {Kind.HCOUNT, Kind.ATOM, Kind.EOS}
        lo = 1
    elif last is Kind.HCOUNT:
        kinds = {Kind.ATOM, Kind.EOS}
        lo = 1
    else:
        kinds = {Kind.ATOM, Kind.EOS}
        lo = last_gap + 1
    hi = node - 1
    if lo <= hi:
        kinds.add(Kind.EDGE)
    return FollowSet(frozenset(kinds), lo, hi)


def grammar_state(prefix: Sequence[Token]) -> tuple[Kind, int, int]:
    """Validate ``prefix`` and return its (last kind, node index, last gap) state."""
    if not prefix:
        raise GrammarError("empty prefix; sequences start with <bos>")
    if prefix[0].kind is not Kind.BOS:
        raise GrammarError("sequence must start with <bos>")
    last, node, gap = Kind.BOS, 0, 0
    for k, tok in enumerate(prefix[1:], start=1):
        follow = follow_from_state(last, node, gap)
        if not follow.allows(tok):
            raise GrammarError(_explain(tok, last, node, gap, k))
        if tok.kind is Kind.ATOM:
            node += 1
            gap = 0
        elif tok.kind is Kind.EDGE:
            gap = tok.value
        last = tok.kind
    return last, node, gap


def _explain(tok: Token, last: Kind, node: int, gap: int, k: int) -> str:
    where = f"token {k} ({tok})"
    if last is Kind.EOS:
        return f"{where}: tokens after <eos>"
    if tok.kind is Kind.BOS:
        return f"{where}: <bos> inside a sequence"
    if node == 0 and tok.kind is not Kind.ATOM:
        return f"{where}: {tok.kind.name} before the first ATOM"
    if tok.kind is Kind.EDGE:
        if tok.value >= node:
            return f"{where}: edge gap {tok.value} reaches before the first node (current node {node})"
        if tok.value == gap and last is Kind.EDGE:
            return f"{where}: duplicate edge to node {node - tok.value}"
        return f"{where}: edge gaps must strictly increase (previous {gap})"
    return f"{where}: {tok.kind.name} may not follow {last.name}"


def legal_next_tokens(prefix: Sequence[Token]) -> FollowSet:
    """Exact follow set of a grammar-consistent prefix."""
    return follow_from_state(*grammar_state(prefix))


def iter_nodes(seq: Sequence[Token]):
    """Validate a complete stream and yield ``(symbol, charge, hcount_or_None, [(gap, bond), ...])`` per node."""
    last, _, _ = grammar_state(seq)
    if last is not Kind.EOS:
        raise GrammarError("missing <eos>")
    node = None
    for tok in seq[1:-1]:
        if tok.kind is Kind.ATOM:
            if node is not None:
                yield node
            node = [tok.element, 0, None, []]
        elif tok.kind is Kind.CHARGE:
            node[1] = tok.value
        elif tok.kind is Kind.HCOUNT:
            node[2] = tok.value
        else:
            node[3].append((tok.value, tok.bond))
    if node is not None:
        yield node


def deserialize(seq: Sequence[Token], h_mode: str = EXPLICIT) -> Molecule:
    """Rebuild the molecule; atom ``i`` is the ``i``-th generated node.

    ``explicit``: missing HCOUNT means zero hydrogens.  ``inferred``: missing
    HCOUNT is filled from the default-valence model.
    """
    if h_mode not in (EXPLICIT, INFERRED):
        raise ValueError(f"unknown h_mode {h_mode!r}")
    atoms: list[tuple[str, bool, int, int | None]] = []
    bonds: list[Bond] = []
    for i, (symbol, charge, hcount, edges) in enumerate(iter_nodes(seq)):
        element, aromatic = _check_symbol(symbol)
        atoms.append((element, aromatic, charge, hcount))
        for gap, bond in edges:
            bonds.append(Bond(i - gap, i, BondOrder(bond)))
    if not atoms:
        raise GrammarError("sequence contains no atoms")
    draft = Molecule(tuple(Atom(e, c, h or 0, 0, ar) for e, ar, c, h in atoms), tuple(bonds))
    if h_mode == EXPLICIT or all(h is not None for *_, h in atoms):
        return draft
    filled = tuple(
        a if h is not None else Atom(a.element, a.formal_charge, default_hydrogens(draft, i), 0, a.aromatic)
        for i, (a, (*_, h)) in enumerate(zip(draft.atoms, atoms))
    )
    return Molecule(filled, draft.bonds)


def is_valid(seq: Sequence[Token]) -> bool:
    try:
        deserialize(seq)
    except (GrammarError, ValueError):
        return False
    return True
