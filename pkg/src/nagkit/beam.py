"""Grammar-constrained beam search over a pluggable next-token scorer."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol, Sequence

import numpy as np

from nagkit.gentoken import (
    BOS,
    EOS,
    MAX_SEQ_LEN,
    FollowSet,
    GrammarError,
    Kind,
    Token,
    TokenSeq,
    atom_token,
    charge_token,
    deserialize,
    edge_token,
    hcount_token,
    parse_token,
    to_text,
)
from nagkit.molgraph import Molecule, canonical_smiles

log = logging.getLogger(__name__)

DEFAULT_ELEMENTS = (
    "C", "N", "O", "S", "F", "Cl", "Br", "I", "P", "B", "Si", "Se", "Sn", "H",
    "Li", "Na", "K", "Mg", "Zn", "Cu", "Pd", "Mn", "Fe", "Cr", "Al", "Ag", "Ti", "Cs",
    "c", "n", "o", "s", "p", "se", "b",
)


class ScorerError(RuntimeError):
    pass


class Vocabulary:
    """Finite token vocabulary; ids are laid out BOS, EOS, atoms, charges, hcounts, edges (gap-major)."""

    def __init__(self, elements: Sequence[str] = DEFAULT_ELEMENTS, max_hcount: int = 4,
                 max_gap: int = 64, charges: Sequence[int] = (-4, -3, -2, -1, 1, 2, 3, 4),
                 bonds: Sequence[int] = (1, 2, 3, 4)):
        tokens = [BOS, EOS]
        tokens += [atom_token(e) for e in elements]
        tokens += [charge_token(c) for c in charges]
        tokens += [hcount_token(h) for h in range(1, max_hcount + 1)]
        tokens += [edge_token(g, b) for g in range(1, max_gap + 1) for b in bonds]
        self.tokens: tuple[Token, ...] = tuple(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.kind_of = np.array([int(t.kind) for t in self.tokens], dtype=np.int8)
        self.gap_of = np.array([t.value if t.kind is Kind.EDGE else 0 for t in self.tokens], dtype=np.int64)
        self.max_gap = max_gap
        self.bos_id, self.eos_id = 0, 1
        # kinds admissible after each last-kind (edge gaps handled separately)
        table = np.zeros((len(Kind), len(Kind)), dtype=bool)
        table[Kind.BOS, Kind.ATOM] = True
        for last, nxt in (
            (Kind.ATOM, (Kind.CHARGE, Kind.HCOUNT, Kind.ATOM, Kind.EOS, Kind.EDGE)),
            (Kind.CHARGE, (Kind.HCOUNT, Kind.ATOM, Kind.EOS, Kind.EDGE)),
            (Kind.HCOUNT, (Kind.ATOM, Kind.EOS, Kind.EDGE)),
            (Kind.EDGE, (Kind.ATOM, Kind.EOS, Kind.EDGE)),
        ):
            table[last, list(nxt)] = True
        self._kind_table = table

    def __len__(self) -> int:
        return len(self.tokens)

    def id(self, token: Token) -> int:
        try:
            return self.index[token]
        except KeyError:
            raise KeyError(f"token {token} is not in the vocabulary") from None

    def encode(self, seq: Sequence[Token]) -> list[int]:
        return [self.id(t) for t in seq]

    def mask(self, follow: FollowSet) -> np.ndarray:
        """Boolean mask of vocabulary entries allowed by ``follow``."""
        return np.array([follow.allows(t) for t in self.tokens], dtype=bool)

    def mask_states(self, last: np.ndarray, node: np.ndarray, last_gap: np.ndarray) -> np.ndarray:
        """Vectorized masks for a batch of grammar states, shape ``(B, V)``."""
        allowed = self._kind_table[last][:, self.kind_of]
        lo = np.where(last == Kind.EDGE, last_gap + 1, 1)
        hi = node - 1
        is_edge = self.kind_of == Kind.EDGE
        gap_ok = (self.gap_of[None, :] >= lo[:, None]) & (self.gap_of[None, :] <= hi[:, None])
        return allowed & (~is_edge[None, :] | gap_ok)

    def advance(self, last: np.ndarray, node: np.ndarray, last_gap: np.ndarray, ids: np.ndarray):
        """Grammar state after appending token ``ids``."""
        kind = self.kind_of[ids]
        node = node + (kind == Kind.ATOM)
        last_gap = np.where(kind == Kind.EDGE, self.gap_of[ids], np.where(kind == Kind.ATOM, 0, last_gap))
        return kind.astype(np.int64), node, last_gap


class Scorer(Protocol):
    vocab: Vocabulary

    def __call__(self, ctx: Any, prefix: Sequence[Token]) -> np.ndarray: ...


def score_batch(scorer, ctx, prefixes: Sequence[Sequence[Token]]) -> np.ndarray:
    batch = getattr(scorer, "score_batch", None)
    if batch is not None:
        return batch(ctx, prefixes)
    return np.stack([scorer(ctx, p) for p in prefixes]) if prefixes else np.zeros((0, len(scorer.vocab)))


class UniformScorer:
    """Uniform log-probability over the full vocabulary."""

    def __init__(self, vocab: Vocabulary | None = None):
        self.vocab = vocab or Vocabulary()
        self._row = np.full(len(self.vocab), -math.log(len(self.vocab)))

    def __call__(self, ctx, prefix):
        return self._row.copy()

    def score_batch(self, ctx, prefixes):
        return np.broadcast_to(self._row, (len(prefixes), len(self._row)))


def uniform_scorer(vocab: Vocabulary | None = None) -> UniformScorer:
    return UniformScorer(vocab)


class TeacherScorer:
    """Puts probability ``1 - eps`` on the next token of a fixed target sequence."""

    def __init__(self, target: Sequence[Token], vocab: Vocabulary, eps: float = 1e-6):
        self.vocab = vocab
        self.target = tuple(target)
        self._target_ids = vocab.encode(self.target)
        v = len(vocab)
        self._hit, self._miss = math.log1p(-eps), math.log(eps / (v - 1))
        self._uniform = np.full(v, -math.log(v))

    def __call__(self, ctx, prefix):
        k = len(prefix)
        if k < len(self.target) and tuple(prefix) == self.target[:k]:
            row = np.full(len(self.vocab), self._miss)
            row[self._target_ids[k]] = self._hit
            return row
        return self._uniform.copy()


class TableScorer:
    """Table-driven scorer keyed by the text form of the token prefix.

    File layout (JSON)::

        {"default": -20.0, "table": {"<bos>": {"A:C": -0.1, ...}, "<bos> A:C": {...}}}

    Tokens absent from a row get ``default``; prefixes absent from the table
    get a uniform row.
    """

    def __init__(self, table: dict[str, dict[str, float]], vocab: Vocabulary, default: float = -20.0):
        self.vocab = vocab
        self.default = float(default)
        self._rows: dict[str, np.ndarray] = {}
        for prefix, entries in table.items():
            row = np.full(len(vocab), self.default)
            for tok_text, logp in entries.items():
                row[vocab.id(parse_token(tok_text))] = float(logp)
            self._rows[prefix] = row
        self._uniform = np.full(len(vocab), -math.log(len(vocab)))

    @classmethod
    def from_file(cls, path: str | Path, vocab: Vocabulary | None = None) -> TableScorer:
        obj = json.loads(Path(path).read_text())
        return cls(obj.get("table", {}), vocab or Vocabulary(), obj.get("default", -20.0))

    def __call__(self, ctx, prefix):
        return self._rows.get(to_text(prefix), self._uniform).copy()


@dataclass(frozen=True)
class DecodeConfig:
    beam_size: int = 10
    length_penalty: float = 0.0
    temperature: float = 1.0
    max_len: int = MAX_SEQ_LEN

    def __post_init__(self) -> None:
        if self.beam_size < 1:
            raise ValueError("beam_size must be positive")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.max_len < 3:
            raise ValueError("max_len must allow at least <bos> ATOM <eos>")


@dataclass(frozen=True)
class Candidate:
    seq: TokenSeq
    log_score: float
    molecule: Molecule = field(compare=False, repr=False)
    canonical: str = ""


@dataclass
class DecodeTrace:
    """Per-step instrumentation: worst kept and best pruned (adjusted) scores."""

    kept_min: list[float] = field(default_factory=list)
    pruned_max: list[float] = field(default_factory=list)
    dropped_max_len: int = 0
    invalid: int = 0
    finished: list[tuple[TokenSeq, float]] = field(default_factory=list)


def length_penalty(length: int, alpha: float) -> float:
    """GNMT length penalty ((5 + len) / 6) ** alpha; 1 when alpha = 0."""
    return ((5.0 + length) / 6.0) ** alpha if alpha else 1.0


def step_log_probs(raw: np.ndarray, mask: np.ndarray | None, temperature: float) -> np.ndarray:
    """Mask illegal tokens to -inf, scale by 1/T and renormalize over the legal set (row-wise)."""
    logits = np.array(raw, dtype=np.float64)
    if mask is not None:
        logits[~mask] = -np.inf
    logits /= temperature
    finite = np.isfinite(logits)
    if not finite.any(axis=-1).all():
        raise ScorerError("scorer returned no finite score on any legal token")
    logits[~finite] = -np.inf
    top = logits.max(axis=-1, keepdims=True)
    lse = top + np.log(np.exp(logits - top).sum(axis=-1, keepdims=True))
    return logits - lse


def beam_decode(scorer, ctx, cfg: DecodeConfig = DecodeConfig(), *, masked: bool = True,
                trace: DecodeTrace | None = None) -> list[Candidate]:
    """Beam search restricted to grammar-legal tokens.

    Candidates are ranked by cumulative log score divided by the length
    penalty; ties break on the lexicographic token-id sequence.  Finished
    hypotheses are deduplicated by canonical SMILES keeping the best, and at
    most ``beam_size`` candidates are returned, best first.  With
    ``masked=False`` the grammar mask is skipped (debugging only).
    """
    vocab: Vocabulary = scorer.vocab
    alpha = cfg.length_penalty
    live_ids: list[tuple[int, ...]] = [(vocab.bos_id,)]
    live_tokens: list[tuple[Token, ...]] = [(BOS,)]
    live_score = np.zeros(1)
    state = (np.array([Kind.BOS], dtype=np.int64), np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64))
    finished: list[tuple[float, tuple[int, ...], TokenSeq, float]] = []

    for length in range(2, cfg.max_len + 1):
        if not live_ids:
            break
        raw = score_batch(scorer, ctx, live_tokens)
        mask = vocab.mask_states(*state) if masked else None
        step = step_log_probs(raw, mask, cfg.temperature)
        total = live_score[:, None] + step
        parent, tok = np.nonzero(np.isfinite(total))
        scores = total[parent, tok]
        adjusted = scores / length_penalty(length, alpha)
        # lexicographic order of parents (all live prefixes share one length)
        parent_rank = np.empty(len(live_ids), dtype=np.int64)
        parent_rank[sorted(range(len(live_ids)), key=live_ids.__getitem__)] = np.arange(len(live_ids))
        order = np.lexsort((tok, parent_rank[parent], -adjusted))
        keep, pruned = order[: cfg.beam_size], order[cfg.beam_size:]
        if trace is not None and len(keep):
            trace.kept_min.append(float(adjusted[keep[-1]]))
            trace.pruned_max.append(float(adjusted[pruned[0]]) if len(pruned) else -math.inf)

        new_ids, new_tokens, new_scores, new_parent, new_tok = [], [], [], [], []
        for k in keep:
            p, t = int(parent[k]), int(tok[k])
            ids = live_ids[p] + (t,)
            toks = live_tokens[p] + (vocab.tokens[t],)
            if t == vocab.eos_id:
                finished.append((float(adjusted[k]), ids, toks, float(scores[k])))
            elif length == cfg.max_len:
                if trace is not None:
                    trace.dropped_max_len += 1
                log.debug("hypothesis dropped at max_len=%d without <eos>", cfg.max_len)
            else:
                new_ids.append(ids)
                new_tokens.append(toks)
                new_scores.append(scores[k])
                new_parent.append(p)
                new_tok.append(t)
        if new_ids:
            sel_parent = np.array(new_parent)
            state = vocab.advance(state[0][sel_parent], state[1][sel_parent], state[2][sel_parent],
                                  np.array(new_tok))
        live_ids, live_tokens, live_score = new_ids, new_tokens, np.array(new_scores)

        if alpha == 0 and len(finished) >= cfg.beam_size and live_ids:
            kth = sorted((f[0] for f in finished), reverse=True)[cfg.beam_size - 1]
            if live_score.max() < kth:
                break

    finished.sort(key=lambda f: (-f[0], f[1]))
    out: list[Candidate] = []
    seen: set[str] = set()
    for adj, _, toks, raw_score in finished:
        if trace is not None:
            trace.finished.append((toks, adj))
        try:
            mol = deserialize(toks)
        except (GrammarError, ValueError):
            if trace is not None:
                trace.invalid += 1
            continue
        canon = canonical_smiles(mol)
        if canon in seen:
            continue
        seen.add(canon)
        out.append(Candidate(toks, adj, mol, canon))
        if len(out) == cfg.beam_size:
            break
    return out


def greedy_decode(scorer, ctx, max_len: int = MAX_SEQ_LEN, temperature: float = 1.0) -> TokenSeq:
    """Argmax decoding under the grammar mask (ties to the lowest token id)."""
    from nagkit.gentoken import legal_next_tokens

    vocab: Vocabulary = scorer.vocab
    seq: list[Token] = [BOS]
    while len(seq) < max_len:
        mask = vocab.mask(legal_next_tokens(seq))
        step = step_log_probs(scorer(ctx, seq)[None, :], mask[None, :], temperature)[0]
        seq.append(vocab.tokens[int(np.argmax(step))])
        if seq[-1] == EOS:
            return tuple(seq)
    raise ScorerError(f"greedy decoding reached max_len={max_len} without <eos>")


def sample_walks(scorer, ctx, count: int, seed: int, *, masked: bool = True, max_len: int = 64,
                 temperature: float = 1.0, batch: int = 4096) -> list[TokenSeq]:
    """Ancestral samples from the scorer, ``batch`` walks at a time.

    With ``masked=True`` every step is restricted to grammar-legal tokens and
    the last slot before ``max_len`` admits only ``<eos>``, so each walk is a
    complete sequence.  Unmasked walks stop at ``<eos>`` or ``max_len``.
    """
    if max_len < 3:
        raise ValueError("max_len must allow at least <bos> ATOM <eos>")
    vocab: Vocabulary = scorer.vocab
    rng = np.random.default_rng(seed)
    eos_only = np.zeros(len(vocab), dtype=bool)
    eos_only[vocab.eos_id] = True
    out: list[TokenSeq] = []
    while len(out) < count:
        b = min(batch, count - len(out))
        prefixes: list[list[Token]] = [[BOS] for _ in range(b)]
        last = np.full(b, int(Kind.BOS), dtype=np.int64)
        node = np.zeros(b, dtype=np.int64)
        gap = np.zeros(b, dtype=np.int64)
        active = np.arange(b)
        for length in range(2, max_len + 1):
            if not len(active):
                break
            raw = score_batch(scorer, ctx, [prefixes[i] for i in active])
            mask = None
            if masked:
                mask = vocab.mask_states(last[active], node[active], gap[active])
                if length == max_len:
                    mask = mask & eos_only
            logp = step_log_probs(raw, mask, temperature)
            choice = np.argmax(logp + rng.gumbel(size=logp.shape), axis=1)
            for i, t in zip(active, choice):
                prefixes[i].append(vocab.tokens[t])
            last[active], node[active], gap[active] = vocab.advance(last[active], node[active], gap[active], choice)
            active = active[choice != vocab.eos_id]
        out.extend(tuple(p) for p in prefixes)
    return out
