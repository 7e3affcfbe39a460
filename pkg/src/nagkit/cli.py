"""Command-line pipeline: augment, encode, decode, align, validate, stats, eval, attn-bench.

Configuration precedence: command-line flags > ``NAGKIT_*`` environment
variables > ``--config`` JSON file > built-in defaults.  Logs go to stderr,
data to stdout or ``--out``.  Exit codes: 0 success, 1 data errors, 2 usage
errors.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from itertools import islice
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

log = logging.getLogger("nagkit")

COMMANDS = ("augment", "encode", "decode", "align", "validate", "stats", "eval", "attn-bench")
ENV_PREFIX = "NAGKIT_"


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    command: str = ""
    inputs: list[str] = field(default_factory=list)
    out: str | None = None
    audit: str | None = None
    seed: int = 0
    copies: int = 1
    beam_size: int = 10
    length_penalty: float = 0.0
    temperature: float = 1.0
    max_len: int = 512
    h_mode: str = "explicit"
    order: str = "canonical"
    d_max: int = 15
    n: int = 256
    d_h: int = 32
    d_h2: int = 4
    ks: tuple[int, ...] = (1, 3, 5, 10)
    workers: int = 1


_TUNABLE = [f for f in dataclasses.fields(CliConfig) if f.name not in ("command", "inputs")]


def _coerce(name: str, value):
    """Convert a raw env/file value to the field's type, raising UsageError on mismatch."""
    default = getattr(CliConfig(), name)
    try:
        if name == "ks":
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            out = tuple(int(v) for v in value)
            if not out or min(out) < 1:
                raise ValueError
            return out
        if name in ("out", "audit"):
            return None if value is None else str(value)
        if isinstance(default, bool):
            raise ValueError
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            if isinstance(value, bool):
                raise ValueError
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if not isinstance(value, str):
            raise ValueError
        return value
    except (TypeError, ValueError):
        raise UsageError(f"bad value for {name}: {value!r}") from None


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nagkit", description=__doc__.splitlines()[0],
                                argument_default=argparse.SUPPRESS)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("inputs", nargs="*", help="input file(s); '-' or none reads stdin")
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--out", "-o", help="output path (default stdout)")
    p.add_argument("--audit", help="sidecar file listing rejected reactions")
    p.add_argument("--seed", type=int, help="base seed for random node orders (default 0)")
    p.add_argument("--copies", type=int, help="augmented copies per reaction (default 1)")
    p.add_argument("--beam-size", dest="beam_size", type=int, help="beam width (default 10)")
    p.add_argument("--length-penalty", dest="length_penalty", type=float,
                   help="length normalisation exponent alpha (default 0)")
    p.add_argument("--temperature", type=float, help="softmax temperature (default 1)")
    p.add_argument("--max-len", dest="max_len", type=int, help="longest token stream, incl. <bos>/<eos> (default 512)")
    p.add_argument("--h-mode", dest="h_mode", choices=("explicit", "inferred"),
                   help="hydrogen counts from tokens or from default valences")
    p.add_argument("--order", choices=("canonical", "random"), help="node order used by encode")
    p.add_argument("--d-max", dest="d_max", type=int, help="distance cap for step features (default 15)")
    p.add_argument("--n", type=int, help="attn-bench sequence length (default 256)")
    p.add_argument("--d-h", dest="d_h", type=int, help="attn-bench head width (default 32)")
    p.add_argument("--d-h2", dest="d_h2", type=int, help="attn-bench reduced bias width (default 4)")
    p.add_argument("--k", dest="ks", type=lambda s: _coerce("ks", s), help="comma-separated k values for eval")
    p.add_argument("--workers", type=int, help="worker processes for augment/align/validate")
    p.add_argument("--verbose", "-v", action="store_true", help="log progress and the effective config")
    return p


def load_config(argv: Sequence[str] | None = None, env: dict[str, str] | None = None) -> CliConfig:
    """Merge flags, ``NAGKIT_*`` environment and an optional JSON config file over defaults."""
    env = os.environ if env is None else env
    ns = vars(_parser().parse_args(argv))
    cfg = CliConfig(command=ns.pop("command"), inputs=list(ns.pop("inputs", [])))
    ns.pop("verbose", None)
    config_path = ns.pop("config", None) or env.get(ENV_PREFIX + "CONFIG")

    layers: list[dict] = []
    if config_path:
        try:
            data = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {config_path}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        known = {f.name for f in _TUNABLE}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        layers.append({k: _coerce(k, v) for k, v in data.items()})
    layers.append({f.name: _coerce(f.name, env[ENV_PREFIX + f.name.upper()])
                   for f in _TUNABLE if ENV_PREFIX + f.name.upper() in env})
    layers.append(ns)
    for layer in layers:
        for k, v in layer.items():
            setattr(cfg, k, v)
    if cfg.beam_size < 1 or cfg.temperature <= 0 or cfg.copies < 1 or cfg.workers < 1:
        raise UsageError("beam_size, copies and workers must be >= 1 and temperature > 0")
    return cfg


# --------------------------------------------------------------------------- helpers


def _read_lines(paths: Sequence[str]) -> Iterator[str]:
    if not paths or paths == ["-"]:
        yield from sys.stdin
        return
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            yield from fh


@contextlib.contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _ordered_map(fn: Callable, items: Iterable, workers: int, chunk: int = 512) -> Iterator:
    """Map preserving input order; bounded memory via fixed-size chunks."""
    if workers <= 1:
        yield from map(fn, items)
        return
    it = iter(items)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        while batch := list(islice(it, chunk * workers)):
            yield from pool.map(fn, batch, chunksize=chunk)


def _augment_one(item, copies: int, seed: int):
    from nagkit.dataset import ReactionParseError, check_mappable, example_seed, make_example, parse_reaction_line

    k, line = item
    try:
        rec = parse_reaction_line(line)
        check_mappable(rec)
        return [json.dumps(make_example(rec, example_seed(seed, k, c)).to_json()) for c in range(copies)], None
    except ReactionParseError as exc:
        return None, (exc.reason.value, exc.detail)
    except ValueError as exc:
        return None, ("serialize-failure", str(exc))


def _align_one(item, seed: int):
    from nagkit.align import make_training_pair
    from nagkit.dataset import ReactionParseError, check_mappable, example_seed, parse_reaction_line

    k, line = item
    try:
        rec = parse_reaction_line(line)
        check_mappable(rec)
        return json.dumps(make_training_pair(rec.product, rec.reactants, example_seed(seed, k, 0)).to_json()), None
    except ReactionParseError as exc:
        return None, (exc.reason.value, exc.detail)


def _validate_one(line: str, h_mode: str):
    from nagkit.gentoken import deserialize, from_text

    try:
        deserialize(from_text(line), h_mode)
        return None
    except ValueError as exc:
        return str(exc)


def _nonblank(lines: Iterable[str]) -> Iterator[tuple[int, str]]:
    """(reaction index, line) over non-blank lines; the index feeds per-record seeds."""
    k = 0
    for line in lines:
        if line.strip():
            yield k, line.rstrip("\r\n")
            k += 1


# --------------------------------------------------------------------------- commands


def _cmd_augment(cfg: CliConfig) -> int:
    rejected = []
    n_out = 0
    fn = partial(_augment_one, copies=cfg.copies, seed=cfg.seed)
    items = list(_nonblank(_read_lines(cfg.inputs)))
    with _output(cfg.out) as out:
        for (k, line), (rows, err) in zip(items, _ordered_map(fn, items, cfg.workers)):
            if err:
                rejected.append((k, err, line))
                log.warning("reaction %d rejected: %s %s", k, *err)
                continue
            for row in rows:
                out.write(row + "\n")
                n_out += 1
    if cfg.audit:
        with open(cfg.audit, "w", encoding="utf-8") as fh:
            fh.write("# removed reactions (parse failure, empty side, duplicate or no shared atom maps)\n")
            fh.write("# approximation of the 'incorrect reaction' filter; not the original cleaning rules\n")
            for k, (reason, _), line in rejected:
                fh.write(f"{k}\t{reason}\t{line}\n")
    log.info("augment: %d examples, %d reactions rejected", n_out, len(rejected))
    return 0


def _cmd_align(cfg: CliConfig) -> int:
    fn = partial(_align_one, seed=cfg.seed)
    items = list(_nonblank(_read_lines(cfg.inputs)))
    failures = 0
    with _output(cfg.out) as out:
        for (k, _), (row, err) in zip(items, _ordered_map(fn, items, cfg.workers)):
            if err:
                failures += 1
                log.error("reaction %d: %s %s", k, *err)
                continue
            out.write(row + "\n")
    return 1 if failures else 0


def _cmd_encode(cfg: CliConfig) -> int:
    from nagkit.molgraph import SmilesError, canonical_order, encoder_inputs, parse_smiles, random_order

    failures = 0
    with _output(cfg.out) as out:
        for k, line in _nonblank(_read_lines(cfg.inputs)):
            try:
                m = parse_smiles(line.split()[0])
            except SmilesError as exc:
                failures += 1
                log.error("line %d: %s", k + 1, exc)
                continue
            order = random_order(m, cfg.seed) if cfg.order == "random" else canonical_order(m)
            out.write(json.dumps(encoder_inputs(m, order).to_json()) + "\n")
    return 1 if failures else 0


def _cmd_validate(cfg: CliConfig) -> int:
    fn = partial(_validate_one, h_mode=cfg.h_mode)
    items = [line for _, line in _nonblank(_read_lines(cfg.inputs))]
    invalid = 0
    for k, err in enumerate(_ordered_map(fn, items, cfg.workers), start=1):
        if err:
            invalid += 1
            log.error("line %d: %s", k, err)
    with _output(cfg.out) as out:
        out.write(json.dumps({"lines": len(items), "invalid": invalid}) + "\n")
    return 1 if invalid else 0


def _cmd_decode(cfg: CliConfig) -> int:
    from nagkit.beam import DecodeConfig, TableScorer, Vocabulary, beam_decode, uniform_scorer
    from nagkit.gentoken import to_text
    from nagkit.molgraph import SmilesError, canonical_order, encoder_inputs, parse_smiles

    dcfg = DecodeConfig(cfg.beam_size, cfg.length_penalty, cfg.temperature, cfg.max_len)
    vocab = Vocabulary()
    base = Path(cfg.inputs[0]).parent if cfg.inputs and cfg.inputs != ["-"] else Path(".")
    scorers: dict[str, object] = {}
    failures = 0
    with _output(cfg.out) as out:
        for k, line in _nonblank(_read_lines(cfg.inputs)):
            try:
                req = json.loads(line)
                product = parse_smiles(req["product_smiles"])
                scores_file = req.get("scores_file")
                if scores_file:
                    path = str(base / scores_file)
                    if path not in scorers:
                        scorers[path] = TableScorer.from_file(path, vocab)
                    scorer = scorers[path]
                else:
                    scorer = uniform_scorer(vocab)
                ctx = encoder_inputs(product, canonical_order(product))
                cands = beam_decode(scorer, ctx, dcfg)
            except (json.JSONDecodeError, KeyError, SmilesError, OSError, ValueError) as exc:
                failures += 1
                log.error("request %d: %s", k + 1, exc)
                continue
            for rank, c in enumerate(cands, start=1):
                out.write(json.dumps({
                    "product_index": k, "rank": rank, "canonical_smiles": c.canonical,
                    "log_score": c.log_score, "tokens": to_text(c.seq),
                }) + "\n")
    return 1 if failures else 0


def _cmd_stats(cfg: CliConfig) -> int:
    from nagkit.dataset import class_stats, read_reactions

    if not cfg.inputs:
        raise UsageError("stats needs at least one input file")
    splits = {}
    rejected = 0
    for path in cfg.inputs:
        result = read_reactions(path, require_shared=False)
        splits[Path(path).stem] = result.records
        rejected += len(result.rejected)
        for r in result.rejected:
            log.warning("%s:%d rejected: %s", path, r.line_no, r.reason.value)
    stats = class_stats(splits)
    with _output(cfg.out) as out:
        out.write(json.dumps({**stats.to_json(), "rejected": rejected}, indent=2) + "\n")
    return 0


def _cmd_eval(cfg: CliConfig) -> int:
    from nagkit.dataset import evaluate

    preds, truths, classes = [], [], []
    for k, line in _nonblank(_read_lines(cfg.inputs)):
        try:
            row = json.loads(line)
            preds.append(list(row.get("predictions", [])))
            truths.append(row["truth"])
            classes.append(row.get("class"))
        except (json.JSONDecodeError, KeyError) as exc:
            log.error("line %d: %s", k + 1, exc)
            return 1
    report = evaluate(preds, truths, cfg.ks, classes if any(c is not None for c in classes) else None)
    with _output(cfg.out) as out:
        out.write(json.dumps(report.to_json(), indent=2) + "\n")
    return 0


def _cmd_attn_bench(cfg: CliConfig) -> int:
    from nagkit.attnref import CSV_HEADER, memory_report

    rows = memory_report(cfg.n, cfg.d_h, cfg.d_h2, seed=cfg.seed, d_max=cfg.d_max)
    with _output(cfg.out) as out:
        out.write(CSV_HEADER + "\n")
        for r in rows:
            out.write(r.csv() + "\n")
    return 0


_DISPATCH = {
    "augment": _cmd_augment,
    "encode": _cmd_encode,
    "decode": _cmd_decode,
    "align": _cmd_align,
    "validate": _cmd_validate,
    "stats": _cmd_stats,
    "eval": _cmd_eval,
    "attn-bench": _cmd_attn_bench,
}


def run(cfg: CliConfig) -> int:
    return _DISPATCH[cfg.command](cfg)


@contextlib.contextmanager
def _stderr_logging(level: int):
    """Route package logs to the current stderr for the duration of one command."""
    pkg = logging.getLogger("nagkit")
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    saved = pkg.level, pkg.propagate
    pkg.addHandler(handler)
    pkg.setLevel(level)
    pkg.propagate = False
    try:
        yield
    finally:
        pkg.removeHandler(handler)
        pkg.setLevel(saved[0])
        pkg.propagate = saved[1]


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    with _stderr_logging(logging.INFO if ("-v" in argv or "--verbose" in argv) else logging.WARNING):
        return _main(argv)


def _main(argv: list[str]) -> int:
    try:
        cfg = load_config(argv)
    except UsageError as exc:
        print(f"nagkit: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)
    log.info("effective config: %s", json.dumps(dataclasses.asdict(cfg)))
    try:
        return run(cfg)
    except UsageError as exc:
        print(f"nagkit: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"nagkit: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
