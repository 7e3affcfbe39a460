"""Time-varying decoder graph features: per-step degrees and shortest paths."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from nagkit.gentoken import Token, iter_nodes

D_MAX = 15
INF_CODE = D_MAX + 1
_INF = np.iinfo(np.int32).max // 4


@dataclass(frozen=True)
class StepFeatureFrame:
    step: int
    degree: np.ndarray  # (step,) int
    spd: np.ndarray     # (step, step) int, capped at D_MAX, INF_CODE when disconnected

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StepFeatureFrame):
            return NotImplemented
        return (
            self.step == other.step
            and np.array_equal(self.degree, other.degree)
            and np.array_equal(self.spd, other.spd)
        )

    def to_json(self) -> dict:
        return {"step": self.step, "degree": self.degree.tolist(), "spd": self.spd.tolist()}


FeatureSeries = list[StepFeatureFrame]


def _node_edges(seq: Sequence[Token]) -> list[list[int]]:
    """Earlier-neighbour indices of every node, taken from a grammar-valid stream."""
    return [[i - gap for gap, _ in edges] for i, (*_, edges) in enumerate(iter_nodes(seq))]


def _cap(dist: np.ndarray, d_max: int) -> np.ndarray:
    out = np.minimum(dist, d_max)
    out[dist >= _INF] = d_max + 1
    return out.astype(np.int32)


def build_series_incremental(seq: Sequence[Token], d_max: int = D_MAX) -> FeatureSeries:
    """Grow the graph one node at a time, updating distances in O(i^2) per step."""
    node_edges = _node_edges(seq)
    n = len(node_edges)
    dist = np.full((n, n), _INF, dtype=np.int64)
    degree = np.zeros(n, dtype=np.int64)
    frames = []
    for i, nbrs in enumerate(node_edges):
        dist[i, i] = 0
        if nbrs:
            # distance from the new node = 1 + best distance through any neighbour
            via = dist[nbrs, :i].min(axis=0) + 1
            row = np.minimum(via, _INF)
            dist[i, :i] = row
            dist[:i, i] = row
            degree[nbrs] += 1
            degree[i] = len(nbrs)
            block = dist[:i, :i]
            np.minimum(block, row[:, None] + row[None, :], out=block)
        k = i + 1
        frames.append(StepFeatureFrame(k, degree[:k].copy(), _cap(dist[:k, :k], d_max)))
    return frames


def build_series_bruteforce(seq: Sequence[Token], d_max: int = D_MAX) -> FeatureSeries:
    """Recompute every frame from scratch with all-pairs BFS."""
    node_edges = _node_edges(seq)
    frames = []
    for k in range(1, len(node_edges) + 1):
        adj: list[list[int]] = [[] for _ in range(k)]
        for i in range(k):
            for j in node_edges[i]:
                adj[i].append(j)
                adj[j].append(i)
        spd = np.full((k, k), d_max + 1, dtype=np.int32)
        for s in range(k):
            seen = {s: 0}
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for v in adj[u]:
                    if v not in seen:
                        seen[v] = seen[u] + 1
                        queue.append(v)
            for t, d in seen.items():
                spd[s, t] = min(d, d_max)
        degree = np.array([len(a) for a in adj], dtype=np.int64)
        frames.append(StepFeatureFrame(k, degree, spd))
    return frames


def step_codes(series: FeatureSeries, d_max: int = D_MAX) -> tuple[np.ndarray, np.ndarray]:
    """Per-row lookup codes for the bias tensor, as uint8 ``(n, n)`` arrays.

    Row ``i`` uses frame ``i`` (the graph after node ``i``): column ``j <= i``
    holds ``min(degree_j, d_max - 1)`` and the distance code of ``(i, j)``.
    Entries above the diagonal are 0.
    """
    n = len(series)
    deg = np.zeros((n, n), dtype=np.uint8)
    spd = np.zeros((n, n), dtype=np.uint8)
    for i, frame in enumerate(series):
        deg[i, : i + 1] = np.minimum(frame.degree, d_max - 1)
        spd[i, : i + 1] = frame.spd[i]
    return deg, spd


def pack_codes(deg_codes: np.ndarray, spd_codes: np.ndarray, degree_table: np.ndarray,
               spd_table: np.ndarray) -> np.ndarray:
    """Gather-and-add the two embedding tables; upper triangle zero-filled."""
    out = degree_table[deg_codes]
    out += spd_table[spd_codes]
    for i in range(out.shape[0] - 1):
        out[i, i + 1:] = 0
    return out


def pack_bias(series: FeatureSeries, degree_table: np.ndarray, spd_table: np.ndarray,
              d_max: int = D_MAX) -> np.ndarray:
    """Reduced bias tensor ``D2`` of shape ``(n, n, d_h2)``.

    ``degree_table`` is ``(d_max, d_h2)`` and ``spd_table`` is ``(d_max + 2, d_h2)``.
    """
    degree_table = np.asarray(degree_table)
    spd_table = np.asarray(spd_table)
    if degree_table.ndim != 2 or degree_table.shape[0] != d_max:
        raise ValueError(f"degree_table must be ({d_max}, d_h2), got {degree_table.shape}")
    if spd_table.ndim != 2 or spd_table.shape != (d_max + 2, degree_table.shape[1]):
        raise ValueError(f"spd_table must be ({d_max + 2}, {degree_table.shape[1]}), got {spd_table.shape}")
    deg, spd = step_codes(series, d_max)
    return pack_codes(deg, spd, degree_table, spd_table)


def dump_series_jsonl(series: FeatureSeries, fp: IO[str]) -> None:
    for frame in series:
        fp.write(json.dumps(frame.to_json()) + "\n")
