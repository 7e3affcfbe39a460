"""Position-ordered encoder inputs (atom rows, bond-code matrix, positions, coordinates)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from nagkit.molgraph.graph import Molecule, NodeOrder


class AtomRow(NamedTuple):
    element: str
    charge: int
    hydrogen_count: int
    degree: int


@dataclass(frozen=True)
class EncoderInput:
    atom_rows: tuple[AtomRow, ...]
    edge_matrix: np.ndarray  # n x n int8, 0 = no bond, else BondOrder code
    positions: NodeOrder
    coords: np.ndarray | None = None

    def to_json(self) -> dict:
        out = {
            "atoms": [list(row) for row in self.atom_rows],
            "edges": self.edge_matrix.tolist(),
            "positions": list(self.positions.permutation),
        }
        if self.coords is not None:
            out["coords"] = self.coords.tolist()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> EncoderInput:
        coords = obj.get("coords")
        return cls(
            tuple(AtomRow(*row) for row in obj["atoms"]),
            np.asarray(obj["edges"], dtype=np.int8),
            NodeOrder(tuple(obj["positions"])),
            None if coords is None else np.asarray(coords, dtype=float),
        )


def encoder_inputs(m: Molecule, order: NodeOrder, coords=None) -> EncoderInput:
    """Arrange atom features, bond codes and coordinates by position.

    ``coords`` (n x 3, indexed by atom) is passed through, reordered to match.
    """
    order.check(m)
    n = len(m.atoms)
    seq = order.sequence
    rows = tuple(
        AtomRow(m.atoms[a].symbol, m.atoms[a].formal_charge, m.atoms[a].hydrogen_count, m.degree(a))
        for a in seq
    )
    edges = np.zeros((n, n), dtype=np.int8)
    pos = order.permutation
    for b in m.bonds:
        edges[pos[b.a], pos[b.b]] = edges[pos[b.b], pos[b.a]] = int(b.order)
    xyz = None
    if coords is not None:
        xyz = np.asarray(coords, dtype=float)
        if xyz.shape != (n, 3):
            raise ValueError(f"coords shape {xyz.shape} does not match {n} atoms")
        xyz = xyz[list(seq)]
    return EncoderInput(rows, edges, order, xyz)
