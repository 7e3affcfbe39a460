"""Reaction-file ingestion, augmented example generation and evaluation metrics."""

from __future__ import annotations

import csv
import io
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from nagkit.align import DuplicateAtomMapError, make_training_pair, match_shared
from nagkit.gentoken import Token, deserialize, from_text, serialize, to_text
from nagkit.molgraph import (
    EncoderInput,
    Molecule,
    NodeOrder,
    SmilesError,
    canonical_smiles,
    encoder_inputs,
    parse_smiles,
    strip,
    write_smiles,
)

DEFAULT_KS = (1, 3, 5, 10)


class RejectReason(str, Enum):
    MALFORMED_ARROW = "malformed-arrow"
    PARSE_FAILURE = "parse-failure"
    EMPTY_REACTANTS = "empty-reactants"
    EMPTY_PRODUCT = "empty-product"
    DUPLICATE_MAP = "duplicate-atom-map"
    NO_SHARED_MAPS = "no-shared-atom-maps"


class ReactionParseError(ValueError):
    def __init__(self, reason: RejectReason, detail: str = ""):
        super().__init__(f"{reason.value}: {detail}" if detail else reason.value)
        self.reason = reason
        self.detail = detail


@dataclass(frozen=True)
class ReactionRecord:
    reactants: Molecule
    product: Molecule
    reaction_class: int | None
    raw_line: str
    reactants_smiles: str = ""
    product_smiles: str = ""


_CLASS_RE = re.compile(r"^(?:<?RX_?)?(\d+)>?$", re.IGNORECASE)


def parse_reaction(rxn: str, reaction_class: int | None = None, raw_line: str | None = None) -> ReactionRecord:
    """Parse ``REACTANTS>>PRODUCT`` or ``REACTANTS>REAGENTS>PRODUCT``; reagents are dropped."""
    parts = rxn.split(">")
    if len(parts) != 3:
        raise ReactionParseError(RejectReason.MALFORMED_ARROW, rxn)
    left, _, right = (p.strip() for p in parts)
    if not left:
        raise ReactionParseError(RejectReason.EMPTY_REACTANTS)
    if not right:
        raise ReactionParseError(RejectReason.EMPTY_PRODUCT)
    try:
        reactants = parse_smiles(left)
        product = parse_smiles(right)
    except (SmilesError, ValueError) as exc:
        raise ReactionParseError(RejectReason.PARSE_FAILURE, str(exc)) from None
    return ReactionRecord(reactants, product, reaction_class, rxn if raw_line is None else raw_line, left, right)


def parse_reaction_line(line: str) -> ReactionRecord:
    """Parse one text line: a reaction SMILES with an optional class-label column.

    Columns may be separated by tabs, commas or spaces; the column holding
    ``>`` is the reaction, a column such as ``3``, ``RX_3`` or ``<RX_3>`` is
    the class label, and a CXSMILES ``|...|`` suffix is ignored.
    """
    raw = line.rstrip("\r\n")
    fields = [f for f in re.split(r"[\t, ]+", raw.strip()) if f]
    rxn = None
    label = None
    for f in fields:
        if ">" in f and rxn is None and not _CLASS_RE.match(f):
            rxn = f
        elif f.startswith("|"):
            continue
        elif label is None and (m := _CLASS_RE.match(f)):
            label = int(m.group(1))
    if rxn is None:
        raise ReactionParseError(RejectReason.MALFORMED_ARROW, raw)
    return parse_reaction(rxn, label, raw)


def check_mappable(rec: ReactionRecord) -> None:
    """Reject duplicate atom maps and reactions with no shared atom map."""
    try:
        match = match_shared(rec.product, rec.reactants)
    except DuplicateAtomMapError as exc:
        raise ReactionParseError(RejectReason.DUPLICATE_MAP, str(exc)) from None
    if not match.shared:
        raise ReactionParseError(RejectReason.NO_SHARED_MAPS)


@dataclass
class Rejection:
    line_no: int
    reason: RejectReason
    detail: str
    raw_line: str


@dataclass
class IngestResult:
    records: list[ReactionRecord] = field(default_factory=list)
    rejected: list[Rejection] = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.records) + len(self.rejected)


def _iter_csv_rows(text: str) -> Iterator[tuple[int, str, int | None, str]]:
    reader = csv.DictReader(io.StringIO(text))
    fields = reader.fieldnames or []
    rxn_col = next(f for f in fields if ">" in f or "rxn" in f.lower() or "reaction" in f.lower())
    class_col = next((f for f in fields if "class" in f.lower()), None)
    for k, row in enumerate(reader, start=2):
        label = None
        if class_col and row.get(class_col):
            m = _CLASS_RE.match(row[class_col].strip())
            label = int(m.group(1)) if m else None
        raw = ",".join(row[f] or "" for f in fields)
        yield k, row[rxn_col].strip(), label, raw


def ingest_lines(lines: Iterable[str], *, require_shared: bool = True) -> IngestResult:
    result = IngestResult()
    for k, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = parse_reaction_line(line)
            if require_shared:
                check_mappable(rec)
        except ReactionParseError as exc:
            result.rejected.append(Rejection(k, exc.reason, exc.detail, line.rstrip("\r\n")))
            continue
        result.records.append(rec)
    return result


def read_reactions(path: str | Path, *, require_shared: bool = True) -> IngestResult:
    """Ingest a reaction file: plain lines (optional class column) or a CSV with a header row.

    A CSV is recognised by a first line naming a reaction column (for
    example ``id,class,reactants>reagents>production``).
    """
    text = Path(path).read_text(encoding="utf-8")
    first = text.split("\n", 1)[0].lower()
    if "," in first and ("reactants>" in first or "rxn" in first or "reaction" in first):
        result = IngestResult()
        for k, rxn, label, raw in _iter_csv_rows(text):
            try:
                rec = parse_reaction(rxn, label, raw)
                if require_shared:
                    check_mappable(rec)
            except ReactionParseError as exc:
                result.rejected.append(Rejection(k, exc.reason, exc.detail, raw))
                continue
            result.records.append(rec)
        return result
    return ingest_lines(text.splitlines(), require_shared=require_shared)


def write_audit(rejected: Sequence[Rejection], fp) -> None:
    """Sidecar listing removed lines; the filter approximates the published cleaning."""
    fp.write("# removed reactions (parse failure, empty side, duplicate or no shared atom maps)\n")
    fp.write("# approximation of the 'incorrect reaction' filter; not the original cleaning rules\n")
    for r in rejected:
        fp.write(f"{r.line_no}\t{r.reason.value}\t{r.raw_line}\n")


@dataclass(frozen=True)
class TrainingExample:
    product_smiles: str
    product_order: NodeOrder
    tokens: tuple[Token, ...]
    encoder: EncoderInput = field(compare=False, repr=False)

    def to_json(self) -> dict:
        return {
            "product_smiles": self.product_smiles,
            "product_order": list(self.product_order.permutation),
            "tokens": to_text(self.tokens),
        }


def example_seed(seed: int, record_index: int, copy: int) -> int:
    """Independent 64-bit seed per (record, copy)."""
    state = np.random.SeedSequence(entropy=seed, spawn_key=(record_index, copy)).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def make_example(rec: ReactionRecord, seed: int) -> TrainingExample:
    pair = make_training_pair(rec.product, rec.reactants, seed)
    product = strip(rec.product)
    return TrainingExample(
        write_smiles(product, pair.product_order),
        pair.product_order,
        serialize(strip(rec.reactants), pair.reactant_order),
        encoder_inputs(product, pair.product_order),
    )


def augment_corpus(records: Sequence[ReactionRecord], copies: int, seed: int) -> Iterator[TrainingExample]:
    """``copies`` aligned (encoder input, target tokens) examples per record."""
    if copies < 1:
        raise ValueError("copies must be >= 1")
    for i, rec in enumerate(records):
        for c in range(copies):
            yield make_example(rec, example_seed(seed, i, c))


# --------------------------------------------------------------------------- metrics


def _prediction_molecule(pred) -> Molecule | None:
    try:
        if isinstance(pred, Molecule):
            return pred
        if isinstance(pred, str):
            if pred.lstrip().startswith("<bos>"):
                return deserialize(from_text(pred))
            return parse_smiles(pred)
        return deserialize(tuple(pred))
    except (ValueError, KeyError, TypeError):
        return None


def canonical_key(pred) -> str | None:
    """Map-free canonical SMILES of a prediction (SMILES text, token text or tokens); None if unreadable."""
    m = _prediction_molecule(pred)
    return None if m is None else canonical_smiles(strip(m, maps=True, stereo=False))


def largest_fragment_key(pred) -> str | None:
    """Canonical SMILES of the fragment with most heavy atoms; ties go to the smallest SMILES."""
    m = _prediction_molecule(pred)
    if m is None:
        return None
    m = strip(m, maps=True, stereo=False)
    best = None
    for comp in m.components():
        sub = m.subgraph(comp)
        key = (-sub.heavy_atom_count(), canonical_smiles(sub))
        if best is None or key < best:
            best = key
    return best[1] if best else None


def _hit_ranks(predictions, truths, key) -> list[int | None]:
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths differ in length")
    ranks = []
    for preds, truth in zip(predictions, truths):
        target = key(truth)
        rank = None
        if target is not None:
            for r, p in enumerate(preds, start=1):
                if key(p) == target:
                    rank = r
                    break
        ranks.append(rank)
    return ranks


def _accuracy(ranks: Sequence[int | None], ks: Sequence[int]) -> dict[int, float]:
    n = len(ranks)
    return {k: (sum(1 for r in ranks if r is not None and r <= k) / n if n else 0.0) for k in ks}


def eval_topk(predictions, truths, ks: Sequence[int] = DEFAULT_KS) -> dict[int, float]:
    """Fraction of products whose truth appears (canonically, all fragments) within the top k."""
    return _accuracy(_hit_ranks(predictions, truths, canonical_key), ks)


def eval_maxfrag(predictions, truths, ks: Sequence[int] = DEFAULT_KS) -> dict[int, float]:
    """Top-k accuracy on the largest reactant fragment only."""
    return _accuracy(_hit_ranks(predictions, truths, largest_fragment_key), ks)


def eval_validity(predictions, ks: Sequence[int] = DEFAULT_KS) -> dict[int, float]:
    """Over all emitted (product, rank <= k) slots, the fraction that parse or deserialize.

    A k with no emitted slots scores 0.0.
    """
    out = {}
    for k in ks:
        slots = [p for preds in predictions for p in list(preds)[:k]]
        out[k] = sum(1 for p in slots if _prediction_molecule(p) is not None) / len(slots) if slots else 0.0
    return out


@dataclass
class EvalReport:
    top_k_accuracy: dict[int, float]
    top_k_maxfrag: dict[int, float]
    top_k_validity: dict[int, float]
    per_class: dict[int, dict[int, float]] = field(default_factory=dict)

    def to_json(self) -> dict:
        def keyed(d):
            return {str(k): v for k, v in d.items()}

        return {
            "top_k_accuracy": keyed(self.top_k_accuracy),
            "top_k_maxfrag": keyed(self.top_k_maxfrag),
            "top_k_validity": keyed(self.top_k_validity),
            "per_class": {str(c): keyed(v) for c, v in sorted(self.per_class.items())},
        }


def evaluate(predictions, truths, ks: Sequence[int] = DEFAULT_KS,
             classes: Sequence[int | None] | None = None) -> EvalReport:
    ranks = _hit_ranks(predictions, truths, canonical_key)
    per_class: dict[int, dict[int, float]] = {}
    if classes is not None:
        for c in sorted({c for c in classes if c is not None}):
            per_class[c] = _accuracy([r for r, cc in zip(ranks, classes) if cc == c], ks)
    return EvalReport(
        _accuracy(ranks, ks),
        eval_maxfrag(predictions, truths, ks),
        eval_validity(predictions, ks),
        per_class,
    )


@dataclass
class ClassStats:
    fractions: dict[int, float]
    counts: dict[int, int]
    excluded: int
    split_sizes: dict[str, int]

    def to_json(self) -> dict:
        return {
            "fractions": {str(k): v for k, v in sorted(self.fractions.items())},
            "counts": {str(k): v for k, v in sorted(self.counts.items())},
            "excluded_unlabeled": self.excluded,
            "split_sizes": self.split_sizes,
        }


def class_stats(records: Sequence[ReactionRecord] | Mapping[str, Sequence[ReactionRecord]]) -> ClassStats:
    """Reaction-class distribution over all given records, plus per-split sizes."""
    splits = dict(records) if isinstance(records, Mapping) else {"all": records}
    counts: Counter[int] = Counter()
    excluded = 0
    for recs in splits.values():
        for r in recs:
            if r.reaction_class is None:
                excluded += 1
            else:
                counts[r.reaction_class] += 1
    total = sum(counts.values())
    fractions = {c: n / total for c, n in sorted(counts.items())} if total else {}
    return ClassStats(fractions, dict(sorted(counts.items())), excluded, {k: len(v) for k, v in splits.items()})
