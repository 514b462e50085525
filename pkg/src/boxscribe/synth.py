"""Seeded synthetic game corpus for desk-scale experiments.

Each game is a small stat table (two teams, a handful of players) plus a
summary produced by a fixed grammar that verbalizes a random subset of the
records with nominal coreference: full name on first mention, surname
afterwards.  The grammar only ever verbalizes facts that are in the table
and keeps one entity per sentence, so the relation matcher recovers every
verbalized fact with precision 1.0; that makes the metric arithmetic
testable end to end.
"""
from __future__ import annotations

import numpy as np

from .dataio import Dataset, GameInstance, Record, RW4
from .evalsuite import EVENT_LEXICON

__all__ = ["synth_games", "TEAM_SCORE_TYPE"]

FIRST_NAMES = (
    "Alice", "Brett", "Carla", "Dmitri", "Elena", "Felix",
    "Grace", "Hiro", "Imani", "Jonas", "Katya", "Luis",
)
LAST_NAMES = (
    "Abbott", "Bishop", "Castillo", "Dawson", "Ellery", "Fontaine",
    "Garland", "Holloway", "Ibarra", "Jennings", "Keating", "Lombardi",
)
TEAM_NAMES = ("Falcons", "Comets", "Harbors", "Monarchs", "Pioneers", "Rangers")

# type strings double as the noun the grammar uses, so every number the
# grammar writes sits next to a token the table can type it with
STAT_TYPES = ("hits", "runs", "walks", "steals", "doubles", "assists", "errors", "saves")
TEAM_SCORE_TYPE = "team-runs"

_EVENT_VERBS = tuple(sorted(EVENT_LEXICON))  # keyword -> type via the matcher lexicon

_OPEN_VERBS = ("defeated", "beat", "downed")
_STAT_FRAMES = ("finished with", "posted", "added")


def _stat_phrase(parts: list[tuple[str, str]]) -> list[str]:
    out: list[str] = []
    for i, (value, noun) in enumerate(parts):
        if i > 0:
            out.append("and" if i == len(parts) - 1 else ",")
        out.extend((value, noun))
    return out


def _mention(entity: str, mentioned: set[str]) -> list[str]:
    if entity in mentioned:
        return [entity.split()[-1]]
    mentioned.add(entity)
    return entity.split()


def _make_game(rng: np.random.Generator, game_id: str, n_entities: int, n_types: int) -> GameInstance:
    teams = list(rng.choice(TEAM_NAMES, size=2, replace=False))
    lasts = rng.choice(LAST_NAMES, size=n_entities, replace=False)
    firsts = rng.choice(FIRST_NAMES, size=n_entities, replace=True)
    players = [f"{f} {l}" for f, l in zip(firsts, lasts)]
    types = list(STAT_TYPES[:n_types])

    scores = rng.choice(np.arange(2, 20), size=2, replace=False)
    sides = ["HOME" if i % 2 == 0 else "AWAY" for i in range(n_entities)]

    stat_values: dict[str, dict[str, int]] = {}
    for player in players:
        vals = rng.choice(np.arange(0, 20), size=n_types, replace=False)
        stat_values[player] = {t: int(v) for t, v in zip(types, vals)}

    events: dict[str, str] = {}
    for player in players:
        if rng.random() < 0.35:
            verb = str(rng.choice(_EVENT_VERBS))
            events[player] = verb

    records: list[Record] = []
    for side_idx, side in enumerate(("HOME", "AWAY")):
        records.append(Record((str(int(scores[side_idx])), teams[side_idx], TEAM_SCORE_TYPE, side)))
        for player, pside in zip(players, sides):
            if pside == side:
                for t in types:
                    records.append(Record((str(stat_values[player][t]), player, t, side)))
    for player, pside in zip(players, sides):
        if player in events:
            records.append(Record(("-1", player, EVENT_LEXICON[events[player]], pside)))

    # summary: opening about the winner, then player sentences in random order
    mentioned: set[str] = set()
    winner, loser = (0, 1) if scores[0] > scores[1] else (1, 0)
    tokens: list[str] = ["The", teams[winner], str(rng.choice(_OPEN_VERBS)), "the", teams[loser],
                         str(int(scores[winner])), "-", str(int(scores[loser])), "."]
    mentioned.update(teams)

    order = list(rng.permutation(n_entities))
    for idx in order:
        player = players[idx]
        if rng.random() < 0.15:
            continue  # this player goes unmentioned
        n_stats = int(rng.integers(1, min(3, n_types) + 1))
        chosen = list(rng.choice(types, size=n_stats, replace=False))
        parts = [(str(stat_values[player][t]), t) for t in chosen]
        tokens += _mention(player, mentioned)
        tokens.append(str(rng.choice(_STAT_FRAMES)).split()[0])
        if tokens[-1] == "finished":
            tokens.append("with")
        tokens += _stat_phrase(parts)
        tokens.append(".")
        if player in events and rng.random() < 0.8:
            tokens += _mention(player, mentioned)
            tokens.append(events[player])
            tokens.append(".")
    return GameInstance(game_id, records, tokens)


def synth_games(seed: int, n_games: int, n_entities: int = 4, n_types: int = 3) -> Dataset:
    """Generate a deterministic synthetic dataset (splits roughly 80/10/10).

    Same seed and sizes give a byte-identical dataset.
    """
    if n_entities < 2 or n_types < 2:
        raise ValueError("need at least 2 entities and 2 types")
    if n_entities > len(LAST_NAMES):
        raise ValueError(f"at most {len(LAST_NAMES)} entities supported")
    if n_types > len(STAT_TYPES):
        raise ValueError(f"at most {len(STAT_TYPES)} stat types supported")
    rng = np.random.default_rng([seed, 9241])
    games = [
        _make_game(rng, f"synth-{seed}-{i:04d}", n_entities, n_types)
        for i in range(n_games)
    ]
    if n_games < 3:
        return Dataset(schema=RW4, train=games)
    n_hold = max(1, n_games // 10)
    train = games[: n_games - 2 * n_hold]
    dev = games[n_games - 2 * n_hold: n_games - n_hold]
    test = games[n_games - n_hold:]
    return Dataset(schema=RW4, train=train, dev=dev, test=test)
