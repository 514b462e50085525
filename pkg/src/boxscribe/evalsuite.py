"""Deterministic relation extraction and the four automatic metrics.

A learned extractor would be overkill at this scale: the matcher pairs
entity mentions with same-sentence numbers and types the pair by exact
lookup in the game's table, plus a fixed keyword lexicon for valueless
events ("homered" and friends, carrying the dummy value -1).  Numeric
relations are therefore table-supported by construction; only event
relations can be hallucinated, which is what relation-generation precision
ends up measuring.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from typing import Mapping, Sequence

from .dataio import (
    DUMMY_VALUE,
    GameInstance,
    Record,
    is_number_token,
    split_sentences,
)

__all__ = [
    "Relation",
    "EvalReport",
    "EVENT_LEXICON",
    "extract_relations",
    "relation_supported",
    "rg_metric",
    "cs_metric",
    "co_metric",
    "damerau_levenshtein",
    "bleu",
    "evaluate_corpus",
    "format_report_table",
    "ablation_harness",
]

# keyword adjoining an entity mention -> event record type (value is -1)
EVENT_LEXICON = {
    "homered": "home-run-batter",
    "doubled": "double-batter",
    "tripled": "triple-batter",
    "singled": "single-batter",
}


@dataclass(frozen=True)
class Relation:
    entity: str
    value: str
    type: str

    def __post_init__(self) -> None:
        if not self.entity or not self.type:
            raise ValueError("relation entity and type must be non-empty")


def _mention_sequences(entities: Sequence[str]) -> dict[tuple[str, ...], str]:
    """Token sequences that count as a full mention of each entity."""
    seqs: dict[tuple[str, ...], str] = {}
    for ent in entities:
        seqs[tuple(ent.split())] = ent
    return seqs


def _surname_index(entities: Sequence[str]) -> dict[str, str]:
    """Last name -> entity, only where unambiguous across the table."""
    index: dict[str, list[str]] = {}
    for ent in entities:
        parts = ent.split()
        if len(parts) > 1:
            index.setdefault(parts[-1], []).append(ent)
    return {name: ents[0] for name, ents in index.items() if len(ents) == 1}


def _find_mentions(
    sentence: list[tuple[int, str]],
    full_seqs: dict[tuple[str, ...], str],
    surnames: dict[str, str],
    max_len: int,
) -> list[tuple[int, int, str]]:
    """Greedy longest-match scan; returns (start, end, entity) triples."""
    mentions: list[tuple[int, int, str]] = []
    i = 0
    toks = [t for _, t in sentence]
    while i < len(toks):
        matched = False
        for ln in range(min(max_len, len(toks) - i), 0, -1):
            ent = full_seqs.get(tuple(toks[i:i + ln]))
            if ent is not None:
                mentions.append((sentence[i][0], sentence[i + ln - 1][0], ent))
                i += ln
                matched = True
                break
        if matched:
            continue
        ent = surnames.get(toks[i])
        if ent is not None:
            mentions.append((sentence[i][0], sentence[i][0], ent))
        i += 1
    return mentions


def extract_relations(summary: Sequence[str], records: Sequence[Record]) -> list[Relation]:
    """Scan a token stream for (entity, value, type) relations.

    Entity mentions (full name or unambiguous surname) pair with numeric
    tokens in the same sentence; the pair is emitted once per record type
    the table holds for it.  An event keyword immediately following a
    mention emits (entity, -1, event-type) with no table check.  Output is
    ordered by first textual occurrence and deduplicated; it does not
    depend on the order of `records`.
    """
    entities = sorted({r.entity for r in records})
    full_seqs = _mention_sequences(entities)
    surnames = _surname_index(entities)
    max_mention = max((len(s) for s in full_seqs), default=1)

    by_pair: dict[tuple[str, str], list[str]] = {}
    for r in records:
        types = by_pair.setdefault((r.entity, r.value), [])
        if r.type not in types:
            types.append(r.type)
    for types in by_pair.values():
        types.sort()

    candidates: list[tuple[tuple, Relation]] = []
    position = 0
    for sent in split_sentences(list(summary)):
        indexed = [(position + i, tok) for i, tok in enumerate(sent)]
        position += len(sent)
        mentions = _find_mentions(indexed, full_seqs, surnames, max_mention)
        mention_end = {end: ent for _, end, ent in mentions}
        numbers = [(pos, tok) for pos, tok in indexed if is_number_token(tok)]
        for start, _, ent in mentions:
            for num_pos, num_tok in numbers:
                for rtype in by_pair.get((ent, num_tok), ()):
                    key = (num_pos, start, rtype)
                    candidates.append((key, Relation(ent, num_tok, rtype)))
        for pos, tok in indexed:
            event_type = EVENT_LEXICON.get(tok)
            if event_type is None:
                continue
            ent = mention_end.get(pos - 1)
            if ent is not None:
                candidates.append(((pos, pos, event_type), Relation(ent, DUMMY_VALUE, event_type)))

    candidates.sort(key=lambda c: c[0])
    seen: set[Relation] = set()
    out: list[Relation] = []
    for _, rel in candidates:
        if rel not in seen:
            seen.add(rel)
            out.append(rel)
    return out


def relation_supported(rel: Relation, records: Sequence[Record]) -> bool:
    return any(
        r.entity == rel.entity and r.value == rel.value and r.type == rel.type
        for r in records)


def rg_metric(relations: Sequence[Relation], records: Sequence[Record]) -> tuple[int, float]:
    """Relation count and the fraction supported by the table.

    Zero extractions scores precision 1.0 by convention (nothing asserted,
    nothing wrong); corpus aggregation flags how often that fired.
    """
    if not relations:
        return 0, 1.0
    supported = sum(relation_supported(r, records) for r in relations)
    return len(relations), supported / len(relations)


def cs_metric(candidate: Sequence[Relation], gold: Sequence[Relation]) -> tuple[float, float]:
    """Set precision/recall of candidate relations against gold relations.

    Empty candidate (gold) sets score precision (recall) 1.0: there is
    nothing to get wrong (nothing to miss).
    """
    cset, gset = set(candidate), set(gold)
    matched = len(cset & gset)
    precision = 1.0 if not cset else matched / len(cset)
    recall = 1.0 if not gset else matched / len(gset)
    return precision, recall


def damerau_levenshtein(a: Sequence, b: Sequence) -> int:
    """Edit distance counting insert, delete, substitute and adjacent
    transposition (optimal string alignment: no substring edited twice)."""
    la, lb = len(a), len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la
    prev2 = [0] * (lb + 1)
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        cur = [i] + [0] * lb
        for j in range(1, lb + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                cur[j] = min(cur[j], prev2[j - 2] + 1)
        prev2, prev = prev, cur
    return prev[lb]


def co_metric(candidate: Sequence[Relation], gold: Sequence[Relation]) -> float:
    """Ordering score in [0, 100]: 100 * (1 - DLD / max(len, 1)). Higher is better."""
    denom = max(len(candidate), len(gold), 1)
    return 100.0 * (1.0 - damerau_levenshtein(list(candidate), list(gold)) / denom)


# ---------------------------------------------------------------------------
# BLEU

_BLEU_FLOOR = 1e-9


def _ngram_counts(tokens: Sequence[str], n: int) -> dict[tuple[str, ...], int]:
    counts: dict[tuple[str, ...], int] = {}
    for i in range(len(tokens) - n + 1):
        key = tuple(tokens[i:i + n])
        counts[key] = counts.get(key, 0) + 1
    return counts


def bleu(candidates: Sequence[Sequence[str]], references: Sequence[Sequence[str]], max_n: int = 4) -> float:
    """Corpus-level BLEU in [0, 100] with uniform n-gram weights.

    Clipped modified precision per order, standard brevity penalty.  Orders
    with no candidate n-grams at all are skipped (weights renormalized over
    the rest); a zero match count at a used order is floored at 1e-9 to
    keep the geometric mean defined, except that zero unigram matches score
    exactly 0.
    """
    if not candidates or len(candidates) != len(references):
        raise ValueError("bleu requires equal, non-empty candidate and reference corpora")
    matches = [0] * (max_n + 1)
    totals = [0] * (max_n + 1)
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        cand = list(cand)
        ref = list(ref)
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            c_counts = _ngram_counts(cand, n)
            r_counts = _ngram_counts(ref, n)
            totals[n] += max(len(cand) - n + 1, 0)
            matches[n] += sum(min(c, r_counts.get(g, 0)) for g, c in c_counts.items())
    if totals[1] == 0 or matches[1] == 0:
        return 0.0
    log_sum = 0.0
    used = 0
    for n in range(1, max_n + 1):
        if totals[n] == 0:
            continue
        p = matches[n] / totals[n] if matches[n] > 0 else _BLEU_FLOOR / totals[n]
        log_sum += math.log(p)
        used += 1
    geo = math.exp(log_sum / used)
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / max(cand_len, 1))
    return 100.0 * bp * geo


# ---------------------------------------------------------------------------
# corpus evaluation

@dataclass
class EvalReport:
    rg_count: float
    rg_precision: float
    cs_precision: float
    cs_recall: float
    co_dld: float
    bleu: float
    n_instances: int = 0
    rg_zero_extractions: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def row(self) -> list[str]:
        return [
            f"{self.rg_count:.2f}",
            f"{100.0 * self.rg_precision:.2f}",
            f"{100.0 * self.cs_precision:.2f}",
            f"{100.0 * self.cs_recall:.2f}",
            f"{self.co_dld:.2f}",
            f"{self.bleu:.2f}",
        ]


def evaluate_corpus(
    candidates: Mapping[str, Sequence[str]],
    games: Sequence[GameInstance],
) -> EvalReport:
    """Score candidate summaries (id -> tokens) against gold games.

    RG precision is micro-averaged (total supported / total extracted); CS
    precision/recall and CO are macro-averaged per game; BLEU is corpus
    level against the gold summaries.
    """
    total_extracted = 0
    total_supported = 0
    zero_extractions = 0
    cs_p: list[float] = []
    cs_r: list[float] = []
    co: list[float] = []
    cand_corpus: list[list[str]] = []
    ref_corpus: list[list[str]] = []
    for game in games:
        cand_tokens = list(candidates.get(game.game_id, []))
        cand_rels = extract_relations(cand_tokens, game.records)
        gold_rels = extract_relations(game.summary, game.records)
        total_extracted += len(cand_rels)
        total_supported += sum(relation_supported(r, game.records) for r in cand_rels)
        if not cand_rels:
            zero_extractions += 1
        p, r = cs_metric(cand_rels, gold_rels)
        cs_p.append(p)
        cs_r.append(r)
        co.append(co_metric(cand_rels, gold_rels))
        cand_corpus.append(cand_tokens)
        ref_corpus.append(list(game.summary))
    n = len(games)
    if n == 0:
        raise ValueError("evaluate_corpus requires at least one game")
    return EvalReport(
        rg_count=total_extracted / n,
        rg_precision=1.0 if total_extracted == 0 else total_supported / total_extracted,
        cs_precision=sum(cs_p) / n,
        cs_recall=sum(cs_r) / n,
        co_dld=sum(co) / n,
        bleu=bleu(cand_corpus, ref_corpus),
        n_instances=n,
        rg_zero_extractions=zero_extractions,
    )


_TABLE_COLUMNS = ("RG#", "RG P%", "CS P%", "CS R%", "CO", "BLEU")


def format_report_table(rows: Sequence[tuple[str, EvalReport]]) -> str:
    """Aligned plain-text table, one labeled row per report."""
    label_w = max([len(lbl) for lbl, _ in rows] + [6])
    header = "system".ljust(label_w) + "".join(c.rjust(9) for c in _TABLE_COLUMNS)
    lines = [header]
    for label, rep in rows:
        lines.append(label.ljust(label_w) + "".join(v.rjust(9) for v in rep.row()))
    return "\n".join(lines)


ABLATION_MODES = ("edcc", "hier", "dyn", "gate")


def ablation_harness(dataset, model_config, train_config, eval_split: str = "train",
                     max_len: int = 120, out_dir=None):
    """Train and evaluate the four model variants with shared hyperparameters.

    Returns [(mode, EvalReport)] ordered edcc, +Hier, +Dyn, +Gate.  All
    non-mode settings (dims, seed, schedule) are shared; greedy decoding is
    used so differences come from the model, not the search.
    """
    from dataclasses import replace
    from .model import Model
    from .decoder import greedy_decode
    from .training import train

    results = []
    for mode in ABLATION_MODES:
        cfg = replace(model_config, variant=mode)
        model = Model.build(cfg, dataset)
        train(model, dataset, train_config,
              out_dir=None if out_dir is None else f"{out_dir}/{mode}")
        games = getattr(dataset, eval_split)
        gens = {}
        for game in games:
            encoded = model.encode(game.records)
            tokens = greedy_decode(model, encoded, max_len=max_len)
            gens[game.game_id] = [t for t in tokens if t != model.vocab.token_of(model.vocab.eos_id)]
        results.append((mode, evaluate_corpus(gens, games)))
    return results
