import json

import pytest

from boxscribe import dataio as dio


class TestTokenizer:
    def test_hyphen_separation(self):
        assert dio.tokenize_summary("went 7--for--9") == ["went", "7", "--", "for", "--", "9"]

    def test_quoted_sentence_removed(self):
        assert dio.tokenize_summary('He said "we won" today.') == []

    def test_three_sentence_fixture(self):
        text = 'Smith scored 12 points. Coach said "great effort" after. The Hawks won 99 - 91.'
        # hand tokenization of the two unquoted sentences
        assert dio.tokenize_summary(text) == [
            "Smith", "scored", "12", "points", ".",
            "The", "Hawks", "won", "99", "-", "91", ".",
        ]

    def test_game_notes_dropped(self):
        text = "The Hawks won. Game notes : injury report follows."
        assert dio.tokenize_summary(text) == ["The", "Hawks", "won", "."]

    def test_apostrophes_are_not_quotes(self):
        assert dio.tokenize_summary("O'Hearn homered.") == ["O'Hearn", "homered", "."]

    def test_empty_output_allowed(self):
        assert dio.tokenize_summary("") == []


class TestVocabulary:
    def test_tiny_corpus_min_count_one(self):
        ds = dio.Dataset(schema=dio.RW4, train=[
            dio.GameInstance("g0", [dio.Record(("1", "e", "t", "HOME"))], ["a", "a", "b"]),
        ])
        vocab, roles = dio.build_vocab(ds, min_count=1)
        assert len(vocab) == 2 + 4
        assert vocab.id_of("a") == 4 and vocab.id_of("b") == 5
        assert set(roles) == {"value", "entity", "type", "side"}

    def test_threshold_maps_to_unknown(self):
        ds = dio.Dataset(schema=dio.RW4, train=[
            dio.GameInstance("g0", [dio.Record(("1", "e", "t", "HOME"))], ["a", "a", "b"]),
        ])
        vocab, _ = dio.build_vocab(ds, min_count=2)
        assert len(vocab) == 1 + 4
        assert vocab.id_of("b") == vocab.unk_id

    def test_reserved_ids_fixed(self):
        vocab = dio.Vocabulary(["x"])
        assert (vocab.pad_id, vocab.unk_id, vocab.bos_id, vocab.eos_id) == (0, 1, 2, 3)

    def test_id_assignment_deterministic(self):
        counts = {"z": 3, "a": 3, "m": 1}
        v = dio._counted_vocab(counts, 1)
        # count desc, then token asc
        assert [v.token_of(i) for i in range(4, 7)] == ["a", "z", "m"]

    def test_tsv_round_trip(self, tmp_path):
        v = dio.Vocabulary(["alpha", "beta"], {"alpha": 5, "beta": 2})
        path = tmp_path / "v.tsv"
        v.save_tsv(path)
        v2 = dio.Vocabulary.load_tsv(path)
        assert v2.tokens() == v.tokens()
        assert v2.counts == {"alpha": 5, "beta": 2}


def figure_style_game() -> dict:
    """Nested box/line JSON for one game, two batters per side."""
    return {
        "home_city": "Kansas City",
        "home_line": {"TEAM-NAME": "Royals", "TEAM-CITY": "Kansas City", "TEAM-R": "9", "TEAM-H": "14"},
        "vis_line": {"TEAM-NAME": "Orioles", "TEAM-CITY": "Baltimore", "TEAM-R": "2", "TEAM-H": "4"},
        "box_score": {
            "PLAYER_NAME": {"0": "C. Mullins", "1": "W. Merrifield"},
            "TEAM_CITY": {"0": "Baltimore", "1": "Kansas City"},
            "AB": {"0": "4", "1": "2"},
            "R": {"0": "2", "1": "3"},
            "H": {"0": "2", "1": "2"},
            "RBI": {"0": "1", "1": "1"},
        },
        "summary": ["Mullins", "homered", "."],
    }


class TestRotowireIngestion:
    def test_batter_row_becomes_records_per_cell(self, tmp_path):
        path = tmp_path / "games.json"
        path.write_text(json.dumps([figure_style_game()]))
        games = dio.load_rotowire_json(path)
        mullins = [r for r in games[0].records if r.entity == "C. Mullins"]
        assert {(r.type, r.value) for r in mullins} == {
            ("AB", "4"), ("R", "2"), ("H", "2"), ("RBI", "1")}
        assert all(r.side == "AWAY" for r in mullins)

    def test_home_rows_before_away_rows(self, tmp_path):
        path = tmp_path / "games.json"
        path.write_text(json.dumps([figure_style_game()]))
        games = dio.load_rotowire_json(path)
        sides = [r.side for r in games[0].records]
        assert sides == sorted(sides, key=lambda s: 0 if s == "HOME" else 1)

    def test_empty_array_gives_empty_dataset(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("[]")
        assert dio.load_rotowire_json(path) == []

    def test_record_count_matches_hand_count(self, tmp_path):
        g = figure_style_game()
        # hand count: 2 line cells per team + 4 cells per batter x 2 batters = 12
        path = tmp_path / "games.json"
        path.write_text(json.dumps([g, g]))
        games = dio.load_rotowire_json(path)
        assert len(games) == 2
        assert all(len(game.records) == 12 for game in games)

    def test_malformed_json_reports_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[{not json")
        with pytest.raises(dio.DataError):
            dio.load_rotowire_json(path)

    def test_missing_field_is_schema_error(self, tmp_path):
        g = figure_style_game()
        del g["box_score"]
        path = tmp_path / "games.json"
        path.write_text(json.dumps([g]))
        with pytest.raises(dio.DataError) as exc:
            dio.load_rotowire_json(path)
        assert "game 0" in str(exc.value)


class TestNativeJsonl:
    def test_round_trip_is_lossless(self, tmp_path):
        games = [
            dio.GameInstance(
                "g1",
                [dio.Record(("3", "Alice Abbott", "hits", "HOME")),
                 dio.Record(("-1", "Alice Abbott", "home-run-batter", "HOME"))],
                ["Alice", "Abbott", "homered", "."],
            ),
            dio.GameInstance("g2", [dio.Record(("7", "Falcons", "team-runs", "AWAY"))], ["ok", "."]),
        ]
        path = tmp_path / "games.jsonl"
        dio.save_jsonl(games, path)
        loaded = dio.load_jsonl(path, dio.RW4)
        assert [g.to_json() for g in loaded] == [g.to_json() for g in games]
        # byte-level stability of re-serialization
        path2 = tmp_path / "again.jsonl"
        dio.save_jsonl(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_entity_groups_partition(self):
        records = [
            dio.Record(("1", "a", "t", "HOME")),
            dio.Record(("2", "b", "t", "HOME")),
            dio.Record(("3", "a", "u", "HOME")),
        ]
        groups = dio.entity_groups(records)
        flat = sorted(j for idxs in groups.values() for j in idxs)
        assert flat == [0, 1, 2]
        assert groups["a"] == [0, 2]

    def test_disjoint_split_ids_enforced(self):
        g = dio.GameInstance("dup", [dio.Record(("1", "e", "t", "HOME"))], ["x"])
        ds = dio.Dataset(schema=dio.RW4, train=[g], dev=[g])
        with pytest.raises(dio.DataError):
            ds.validate()

    def test_schema_arity_enforced(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps({"id": "g", "records": [["1", "e", "t"]], "summary": ["x"]}) + "\n")
        with pytest.raises(dio.DataError):
            dio.load_jsonl(path, dio.RW4)
