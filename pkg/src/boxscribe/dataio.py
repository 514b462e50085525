"""Record schema, dataset ingestion, tokenization and vocabularies.

Two on-disk layouts are supported: the nested box-score/line-score JSON
array used by public score-table corpora (read-only), and a flat native
JSONL format (one game per line: id, records as feature tuples, summary
tokens) used everywhere else in this repo because it diffs and streams
well.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "DataError",
    "RecordSchema",
    "RW4",
    "MLB6",
    "Record",
    "GameInstance",
    "Vocabulary",
    "Dataset",
    "tokenize_summary",
    "build_vocab",
    "load_rotowire_json",
    "load_jsonl",
    "save_jsonl",
    "entity_groups",
    "DUMMY_VALUE",
]

DUMMY_VALUE = "-1"

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<s>", "</s>"
RESERVED = (PAD, UNK, BOS, EOS)


class DataError(ValueError):
    """Malformed or schema-violating input data."""


@dataclass(frozen=True)
class RecordSchema:
    """Fixed-arity record layout; feature roles are positional."""

    feature_count: int
    roles: tuple[str, ...]
    name: str

    def __post_init__(self) -> None:
        if self.feature_count not in (4, 6):
            raise DataError(f"feature count must be 4 or 6, got {self.feature_count}")
        if len(self.roles) != self.feature_count:
            raise DataError("one role name per feature required")


RW4 = RecordSchema(4, ("value", "entity", "type", "side"), "rw4")
MLB6 = RecordSchema(6, ("value", "entity", "type", "side", "inning", "play"), "mlb6")

SCHEMAS = {"rw4": RW4, "mlb6": MLB6}

VALUE, ENTITY, TYPE, SIDE, INNING, PLAY = range(6)


@dataclass(frozen=True)
class Record:
    """One feature tuple from a game's tables."""

    features: tuple[str, ...]

    @property
    def value(self) -> str:
        return self.features[VALUE]

    @property
    def entity(self) -> str:
        return self.features[ENTITY]

    @property
    def type(self) -> str:
        return self.features[TYPE]

    @property
    def side(self) -> str:
        return self.features[SIDE]

    def validate(self, schema: RecordSchema) -> None:
        if len(self.features) != schema.feature_count:
            raise DataError(
                f"record has {len(self.features)} features, schema {schema.name} requires "
                f"{schema.feature_count}")
        if not self.entity:
            raise DataError("record entity feature is empty")


@dataclass
class GameInstance:
    """A game's records (home box, away box, then plays in time order) and its summary."""

    game_id: str
    records: list[Record]
    summary: list[str]

    def to_json(self) -> dict:
        return {
            "id": self.game_id,
            "records": [list(r.features) for r in self.records],
            "summary": list(self.summary),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GameInstance":
        return cls(
            game_id=str(obj["id"]),
            records=[Record(tuple(str(f) for f in feats)) for feats in obj["records"]],
            summary=[str(t) for t in obj["summary"]],
        )


def entity_groups(records: Sequence[Record]) -> dict[str, list[int]]:
    """Partition record indices by the entity feature, in first-appearance order."""
    groups: dict[str, list[int]] = {}
    for j, rec in enumerate(records):
        groups.setdefault(rec.entity, []).append(j)
    return groups


@dataclass
class Dataset:
    schema: RecordSchema
    train: list[GameInstance] = field(default_factory=list)
    dev: list[GameInstance] = field(default_factory=list)
    test: list[GameInstance] = field(default_factory=list)

    def splits(self) -> dict[str, list[GameInstance]]:
        return {"train": self.train, "dev": self.dev, "test": self.test}

    def validate(self) -> None:
        ids: set[str] = set()
        for name, games in self.splits().items():
            for g in games:
                if g.game_id in ids:
                    raise DataError(f"game id {g.game_id!r} appears in more than one split")
                ids.add(g.game_id)
                for r in g.records:
                    r.validate(self.schema)


# ---------------------------------------------------------------------------
# tokenization

_QUOTE_MARKS = ('"', "“", "”", "``", "''")
_TOKEN_RE = re.compile(r"-+|[.,!?;:()]|[^\s\-.,!?;:()]+")
_NUMBER_RE = re.compile(r"^\d+(\.\d+)?$")
_SENT_END = {".", "!", "?"}


def _has_quote(token: str) -> bool:
    return any(mark in token for mark in _QUOTE_MARKS)


def is_number_token(tok: str) -> bool:
    return bool(_NUMBER_RE.match(tok))


def tokenize_summary(text: str) -> list[str]:
    """Tokenize a raw summary.

    Whitespace/punctuation tokenization with hyphen runs kept as their own
    tokens ("7--for--9" -> 7 / -- / for / -- / 9).  Sentences containing a
    double-quote character are dropped, as is anything from a trailing
    "Game notes" section onward.
    """
    notes = text.find("Game notes")
    if notes >= 0:
        text = text[:notes]
    tokens = _TOKEN_RE.findall(text)

    out: list[str] = []
    sentence: list[str] = []
    has_quote = False
    for tok in tokens:
        if _has_quote(tok):
            has_quote = True
            continue
        sentence.append(tok)
        if tok in _SENT_END:
            if not has_quote:
                out.extend(sentence)
            sentence = []
            has_quote = False
    if sentence and not has_quote:
        out.extend(sentence)
    return out


def split_sentences(tokens: Sequence[str]) -> list[list[str]]:
    """Group a token stream into sentences on ./!/? tokens."""
    sents: list[list[str]] = []
    cur: list[str] = []
    for tok in tokens:
        cur.append(tok)
        if tok in _SENT_END:
            sents.append(cur)
            cur = []
    if cur:
        sents.append(cur)
    return sents


# ---------------------------------------------------------------------------
# vocabularies

class Vocabulary:
    """Token/id bijection with fixed reserved ids 0..3 (pad, unk, bos, eos)."""

    def __init__(self, tokens: Iterable[str], counts: dict[str, int] | None = None) -> None:
        self._tokens: list[str] = list(RESERVED)
        self._ids: dict[str, int] = {t: i for i, t in enumerate(self._tokens)}
        self.counts = dict(counts or {})
        for tok in tokens:
            if tok in self._ids:
                raise DataError(f"duplicate or reserved token in vocabulary: {tok!r}")
            self._ids[tok] = len(self._tokens)
            self._tokens.append(tok)

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def unk_id(self) -> int:
        return 1

    @property
    def bos_id(self) -> int:
        return 2

    @property
    def eos_id(self) -> int:
        return 3

    def id_of(self, token: str) -> int:
        return self._ids.get(token, self.unk_id)

    def token_of(self, idx: int) -> str:
        return self._tokens[idx]

    def tokens(self) -> list[str]:
        return list(self._tokens)

    def save_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i, tok in enumerate(self._tokens):
                fh.write(f"{tok}\t{i}\t{self.counts.get(tok, 0)}\n")

    @classmethod
    def load_tsv(cls, path) -> "Vocabulary":
        tokens: list[str] = []
        counts: dict[str, int] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                tok, idx, cnt = line.rstrip("\n").split("\t")
                if int(idx) >= len(RESERVED):
                    tokens.append(tok)
                    counts[tok] = int(cnt)
        return cls(tokens, counts)


def _counted_vocab(counter: dict[str, int], min_count: int) -> Vocabulary:
    kept = sorted(
        (tok for tok, c in counter.items() if c >= min_count),
        key=lambda tok: (-counter[tok], tok),
    )
    return Vocabulary(kept, counter)


def build_vocab(dataset: Dataset, min_count: int = 1) -> tuple[Vocabulary, dict[str, Vocabulary]]:
    """Build the output vocabulary and one vocabulary per feature role.

    Only the train split counts.  Ids are deterministic: sorted by count
    descending then token ascending, after the four reserved slots.
    Feature-role vocabularies keep every symbol (records must always embed).
    """
    if not dataset.train:
        raise DataError("cannot build vocabularies from an empty train split")
    word_counts: dict[str, int] = {}
    role_counts: dict[str, dict[str, int]] = {role: {} for role in dataset.schema.roles}
    for game in dataset.train:
        for tok in game.summary:
            word_counts[tok] = word_counts.get(tok, 0) + 1
        for rec in game.records:
            for role, feat in zip(dataset.schema.roles, rec.features):
                role_counts[role][feat] = role_counts[role].get(feat, 0) + 1
    vocab = _counted_vocab(word_counts, min_count)
    role_vocabs = {role: _counted_vocab(counts, 1) for role, counts in role_counts.items()}
    return vocab, role_vocabs


# ---------------------------------------------------------------------------
# native JSONL format

def save_jsonl(games: Sequence[GameInstance], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for g in games:
            fh.write(json.dumps(g.to_json(), sort_keys=True) + "\n")


def load_jsonl(path, schema: RecordSchema) -> list[GameInstance]:
    games: list[GameInstance] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: bad JSON: {e}") from e
            game = GameInstance.from_json(obj)
            for r in game.records:
                r.validate(schema)
            games.append(game)
    return games


def load_split_dir(path, schema: RecordSchema) -> Dataset:
    """Load train/dev/test JSONL files from a directory (missing files are empty splits)."""
    base = Path(path)
    ds = Dataset(schema=schema)
    for split in ("train", "dev", "test"):
        f = base / f"{split}.jsonl"
        if f.exists():
            setattr(ds, split, load_jsonl(f, schema))
    ds.validate()
    return ds


def save_split_dir(dataset: Dataset, path) -> None:
    base = Path(path)
    base.mkdir(parents=True, exist_ok=True)
    for split, games in dataset.splits().items():
        save_jsonl(games, base / f"{split}.jsonl")


# ---------------------------------------------------------------------------
# nested box-score JSON ingestion

_NAME_KEYS = {"PLAYER_NAME", "FIRST_NAME", "SECOND_NAME", "TEAM_CITY"}
_LINE_NAME_KEYS = {"TEAM-NAME", "TEAM-CITY"}
HOME, AWAY = "HOME", "AWAY"


def _team_records(line: dict, side: str, schema: RecordSchema) -> list[Record]:
    name = line.get("TEAM-NAME")
    if name is None:
        raise DataError(f"line score missing TEAM-NAME for {side} team")
    recs = []
    for key in line:
        if key in _LINE_NAME_KEYS:
            continue
        value = str(line[key])
        if value == "N/A" or value == "":
            continue
        feats = [value, str(name), key, side]
        if schema.feature_count == 6:
            feats += [DUMMY_VALUE, DUMMY_VALUE]
        recs.append(Record(tuple(feats)))
    return recs


def _player_records(box: dict, home_city: str, schema: RecordSchema) -> tuple[list[Record], list[Record]]:
    names = box.get("PLAYER_NAME")
    if names is None:
        raise DataError("box score missing PLAYER_NAME")
    cities = box.get("TEAM_CITY", {})
    home_recs: list[Record] = []
    away_recs: list[Record] = []
    for idx in sorted(names, key=lambda s: int(s)):
        entity = str(names[idx])
        side = HOME if cities.get(idx) == home_city else AWAY
        bucket = home_recs if side == HOME else away_recs
        for key in box:
            if key in _NAME_KEYS:
                continue
            cell = box[key].get(idx)
            if cell is None or str(cell) in ("N/A", ""):
                continue
            feats = [str(cell), entity, key, side]
            if schema.feature_count == 6:
                feats += [DUMMY_VALUE, DUMMY_VALUE]
            bucket.append(Record(tuple(feats)))
    return home_recs, away_recs


def _play_records(plays: list, schema: RecordSchema) -> list[Record]:
    recs: list[Record] = []
    for play_idx, play in enumerate(plays):
        inning = str(play.get("inning", DUMMY_VALUE))
        side = str(play.get("side", HOME))
        for key, cell in play.items():
            if key in ("inning", "side", "entity"):
                continue
            entity = str(play.get("entity", ""))
            if not entity:
                raise DataError(f"play {play_idx} has no entity")
            recs.append(Record((str(cell), entity, key, side, inning, str(play_idx))))
    return recs


def load_rotowire_json(path, schema: RecordSchema = RW4) -> list[GameInstance]:
    """Ingest a nested box-score/line-score JSON array of games.

    Every non-empty (entity, type, value) cell becomes one record; player
    side comes from comparing TEAM_CITY against the home city.  Games with
    a play-by-play list (six-feature schema) get event records ordered by
    play index after the box rows.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            games_json = json.load(fh)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: bad JSON: {e}") from e
    if not isinstance(games_json, list):
        raise DataError(f"{path}: expected a JSON array of games")

    games: list[GameInstance] = []
    for gi, obj in enumerate(games_json):
        try:
            home_city = str(obj.get("home_city", ""))
            records = _team_records(obj["home_line"], HOME, schema)
            home_players, away_players = _player_records(obj["box_score"], home_city, schema)
            records += home_players
            records += _team_records(obj["vis_line"], AWAY, schema)
            records += away_players
            if schema.feature_count == 6 and "play_by_play" in obj:
                records += _play_records(obj["play_by_play"], schema)
            summary = obj.get("summary")
            if summary is None:
                raise DataError("missing summary")
            if isinstance(summary, str):
                summary = tokenize_summary(summary)
            game_id = str(obj.get("id", gi))
            games.append(GameInstance(game_id, records, [str(t) for t in summary]))
        except KeyError as e:
            raise DataError(f"game {gi}: missing required field {e}") from e
        except DataError as e:
            raise DataError(f"game {gi}: {e}") from e
    return games
