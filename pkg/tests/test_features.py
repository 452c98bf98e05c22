import json

import pytest

from aia.errors import InsufficientMatches, SlotNotFound
from aia.features import (
    build_distilled,
    build_match_features,
    build_match_matrix,
    build_player_features,
    build_player_matrix,
    extract_chat_features,
    load_hero_table,
    load_lexicons,
    load_wheel_catalog,
)
from aia.ingest import PlayerRecord, parse_match
from aia.matrix import load_matrix, save_matrix

from conftest import build_match_doc, make_match

HAND_LABELED_CHAT = [
    # slot 0 typed global; tallies worked out by hand in the assertions below
    {"slot": 0, "time": 5, "type": "chat", "channel": "global", "key": "gg wp"},
    {"slot": 0, "time": 30, "type": "chat", "channel": "global", "key": "?"},
    {"slot": 0, "time": 100, "type": "chat", "channel": "global", "key": "noob team REPORT mid"},
    {"slot": 0, "time": 305, "type": "chat", "channel": "global", "key": "ez ez haha"},
    {"slot": 0, "time": 400, "type": "chat", "channel": "global", "key": "what?! really??"},
    # another slot's message must not bleed into slot 0 counts
    {"slot": 1, "time": 302, "type": "chat", "channel": "global", "key": "ez mid"},
    # slot 0 wheels, sounds, sprays
    {"slot": 0, "time": 50, "type": "chatwheel", "channel": "global", "key": "w_haha"},
    {"slot": 0, "time": 60, "type": "chatwheel", "channel": "team", "key": "w_push_now"},
    {"slot": 0, "time": 70, "type": "chatwheel_hero", "channel": "team", "key": "hw_cm_thanks"},
    {"slot": 0, "time": 75, "type": "sound", "channel": "global", "key": "s_x"},
    {"slot": 0, "time": 76, "type": "spray", "channel": "global", "key": "sp_y"},
]

KILL_OBJECTIVES = [{"type": "kill", "slot": 0, "time": 300},
                   {"type": "kill", "slot": 4, "time": 600}]


@pytest.fixture()
def chat_match():
    return make_match(chat=HAND_LABELED_CHAT, objectives=KILL_OBJECTIVES,
                      all_word_counts={"gg": 1, "wp": 1, "ez": 3, "mid": 2})


def test_chat_features_match_hand_tally(chat_match, feature_ctx):
    feats = extract_chat_features(chat_match, 0, feature_ctx.lexicons,
                                  wheel_catalog=feature_ctx.wheel_catalog)
    assert feats.category_counts == {
        "laugh": 1,          # haha
        "slang": 1,          # mid
        "bad_behavior": 2,   # noob, report
        "good_behavior": 2,  # gg, wp
        "provocative": 2,    # ez twice
    }
    assert feats.question_only_msgs == 1
    assert feats.question_marks == 4       # "?" plus "what?! really??"
    assert feats.exclamation_marks == 1
    assert feats.capital_letters == 6      # REPORT
    assert feats.early_game_msgs == 2      # t=5 and t=30, window 90s
    assert feats.after_kill_msgs == 1      # t=305 within 10s of own kill at 300
    assert feats.wheel_global_msgs == 1
    assert feats.wheel_team_msgs == 2
    assert feats.wheel_counts[("global", "laugh")] == 1
    assert feats.wheel_counts[("team", "tactical")] == 1
    assert feats.wheel_counts[("team", "good_behavior")] == 1
    assert feats.sound_count == 1
    assert feats.spray_count == 1


def test_question_only_variants(feature_ctx):
    chat = [
        {"slot": 0, "time": 10, "type": "chat", "channel": "global", "key": "???"},
        {"slot": 0, "time": 11, "type": "chat", "channel": "global", "key": " ? "},
        {"slot": 0, "time": 12, "type": "chat", "channel": "global", "key": "why?"},
    ]
    match = make_match(chat=chat)
    feats = extract_chat_features(match, 0, feature_ctx.lexicons)
    assert feats.question_only_msgs == 2
    assert feats.question_marks == 5


def test_empty_chat_all_zero(feature_ctx):
    match = make_match()
    feats = extract_chat_features(match, 0, feature_ctx.lexicons)
    assert all(v == 0 for v in feats.category_counts.values())
    assert feats.question_only_msgs == 0
    assert feats.wheel_global_msgs == 0
    assert feats.wheel_team_msgs == 0
    assert feats.sound_count == 0 and feats.spray_count == 0


def test_wheel_channel_split_sums_to_total(feature_ctx):
    # Property over seeded random chat logs: per-channel wheel totals always
    # add up to the number of wheel messages the slot sent.
    import numpy as np

    rng = np.random.default_rng(77)
    wheel_ids = list(feature_ctx.wheel_catalog) + ["w_unknown_1", "hw_unknown_2"]
    for _ in range(25):
        chat = []
        n_wheel = 0
        for _ in range(int(rng.integers(0, 40))):
            kind = rng.choice(["chat", "chatwheel", "chatwheel_hero", "sound", "spray"])
            channel = "global"
            if kind in ("chatwheel", "chatwheel_hero"):
                channel = str(rng.choice(["global", "team"]))
                n_wheel += 1
            chat.append({"slot": 0, "time": float(rng.integers(0, 2000)),
                         "type": str(kind), "channel": channel,
                         "key": str(rng.choice(wheel_ids))})
        match = make_match(chat=chat)
        feats = extract_chat_features(match, 0, feature_ctx.lexicons,
                                      wheel_catalog=feature_ctx.wheel_catalog)
        assert feats.wheel_global_msgs + feats.wheel_team_msgs == n_wheel


def test_chat_slot_not_found(chat_match, feature_ctx):
    with pytest.raises(SlotNotFound):
        extract_chat_features(chat_match, 42, feature_ctx.lexicons)


# ---------------------------------------------------------------------------
# Per-match rows
# ---------------------------------------------------------------------------


def test_outcome_follows_side(feature_ctx):
    match = make_match(radiant_win=True)
    radiant_row = build_match_features(match, 0, feature_ctx)
    dire_row = build_match_features(match, 128, feature_ctx)
    assert radiant_row["won"] is True
    assert dire_row["won"] is False


def test_kda_division_guard(feature_ctx):
    players = [
        {"player_slot": 0, "hero_id": 1, "account_id": 100, "kills": 0,
         "deaths": 0, "assists": 0, "denies": 0, "last_hits": 0,
         "isRadiant": True, "word_counts": {}},
        {"player_slot": 128, "hero_id": 2, "account_id": 101, "kills": 4,
         "deaths": 2, "assists": 6, "denies": 0, "last_hits": 0,
         "isRadiant": False, "word_counts": {}},
    ]
    match = make_match(players=players)
    row0 = build_match_features(match, 0, feature_ctx)
    row1 = build_match_features(match, 128, feature_ctx)
    assert row0["kda"] == 0.0                  # (0+0)/max(0,1)
    assert row1["kda"] == (4 + 6) / 2


def test_cosmetics_price_sums_own_slot_only(feature_ctx):
    match = make_match(cosmetics=[
        {"item_id": 1, "owner_slot": 0, "price": 2.5},
        {"item_id": 2, "owner_slot": 0, "price": 1.0},
        {"item_id": 3, "owner_slot": 128, "price": 99.0},
    ])
    row = build_match_features(match, 0, feature_ctx)
    assert row["cosmetics_price"] == 3.5


def test_match_row_golden_values(chat_match, feature_ctx):
    """Frozen spot-check of one full row (values verified by hand)."""
    row = build_match_features(chat_match, 0, feature_ctx)
    assert row["won"] is True
    assert row["duration_s"] == 1800.0
    assert row["kills"] == 0.0 and row["deaths"] == 1.0 and row["assists"] == 2.0
    assert row["kda"] == 2.0
    assert row["kill_participation"] == pytest.approx(2 / 25)
    assert row["team_score"] == 25.0 and row["enemy_score"] == 30.0
    assert row["kills_per_min"] == 0.0
    assert row["deaths_per_min"] == pytest.approx(1 / 30)
    assert row["first_blood_time"] == 95.0
    assert row["game_mode"] == "2" and row["lobby_type"] == "7"
    assert row["skill"] == "2"
    # 1577000000 = 2019-12-22 07:33:20 UTC, a Sunday
    assert row["start_hour"] == 7.0
    assert row["day_of_week"] == "sun"
    assert row["all_word_total"] == 7.0
    assert row["chat_msgs"] == 5.0
    assert row["chat_rank_in_match"] == 1.0   # most talkative slot
    assert row["hero_msg_count"] == 1.0
    assert row["hero_gender"] == "male"       # hero 1
    assert row["hero_attr"] == "agi"
    assert row["chat_provocative_count"] == 2.0
    assert row["wheel_team_tactical"] == 1.0


def test_chat_rank_averages_ties(feature_ctx):
    match = make_match(chat=[
        {"slot": 0, "time": 1, "type": "chat", "channel": "global", "key": "a"},
        {"slot": 0, "time": 2, "type": "chat", "channel": "global", "key": "b"},
        {"slot": 128, "time": 3, "type": "chat", "channel": "global", "key": "c"},
    ])
    row_quiet = build_match_features(match, 1, feature_ctx)
    # slots with zero messages share ranks 3..10 -> mean 6.5
    assert row_quiet["chat_rank_in_match"] == 6.5


# ---------------------------------------------------------------------------
# Per-player rows
# ---------------------------------------------------------------------------


def player_with_matches(handle, docs):
    matches = [parse_match(json.dumps(d).encode()) for d in docs]
    record = PlayerRecord(handle=handle, rank_tier=44, has_plus=True,
                          match_ids=tuple(m.match_id for m in matches))
    return record, matches


def test_all_win_player(feature_ctx):
    docs = [build_match_doc(match_id=i, radiant_win=True) for i in range(1, 7)]
    record, matches = player_with_matches(100, docs)  # account 100 is slot 0
    row = build_player_features(record, matches, feature_ctx)
    assert row["win_rate"] == 1.0
    assert row["matches_count"] == 6.0


def test_thursday_only_player(feature_ctx):
    # 1576715000 = 2019-12-19 UTC, a Thursday; add whole days in multiples of 7
    docs = [build_match_doc(match_id=i, start_time=1_576_715_000 + i * 7 * 86400)
            for i in range(1, 6)]
    record, matches = player_with_matches(100, docs)
    row = build_player_features(record, matches, feature_ctx)
    assert row["day_frac_thu"] == 1.0
    assert sum(row[f"day_frac_{d}"] for d in
               ("mon", "tue", "wed", "thu", "fri", "sat", "sun")) == pytest.approx(1.0, abs=1e-9)


def test_day_fractions_always_sum_to_one(feature_ctx):
    import numpy as np

    rng = np.random.default_rng(3)
    docs = [build_match_doc(match_id=i,
                            start_time=int(1_570_000_000 + rng.integers(0, 10 ** 7)))
            for i in range(1, 12)]
    record, matches = player_with_matches(100, docs)
    row = build_player_features(record, matches, feature_ctx)
    total = sum(row[f"day_frac_{d}"] for d in
                ("mon", "tue", "wed", "thu", "fri", "sat", "sun"))
    assert total == pytest.approx(1.0, abs=1e-9)
    total_hours = sum(row[f"hour_frac_{h:02d}"] for h in range(24))
    assert total_hours == pytest.approx(1.0, abs=1e-9)


def test_ranked_unranked_split(feature_ctx):
    ranked = [build_match_doc(match_id=i, lobby_type=7, radiant_win=True)
              for i in range(1, 5)]
    normal = [build_match_doc(match_id=i, lobby_type=0, radiant_win=False)
              for i in range(5, 9)]
    record, matches = player_with_matches(100, ranked + normal)
    row = build_player_features(record, matches, feature_ctx)
    assert row["ranked_win_rate"] == 1.0
    assert row["normal_win_rate"] == 0.0
    assert row["win_rate"] == 0.5


def test_insufficient_matches(feature_ctx):
    docs = [build_match_doc(match_id=i) for i in range(1, 4)]
    record, matches = player_with_matches(100, docs)
    with pytest.raises(InsufficientMatches):
        build_player_features(record, matches, feature_ctx)


def test_hero_summary(feature_ctx):
    def with_hero(mid, hero_id):
        doc = build_match_doc(match_id=mid)
        doc["players"][0]["hero_id"] = hero_id
        return doc

    # hero 5 (female, int) three times; hero 1 (male) twice
    docs = [with_hero(1, 5), with_hero(2, 5), with_hero(3, 5),
            with_hero(4, 1), with_hero(5, 1)]
    record, matches = player_with_matches(100, docs)
    row = build_player_features(record, matches, feature_ctx)
    assert row["hero_pool_size"] == 2.0
    assert row["top_hero_share"] == pytest.approx(3 / 5)
    assert row["hero_gender_ratio"] == pytest.approx(3 / 5)
    assert row["most_played_hero_gender"] == "female"
    assert row["most_played_hero_attr"] == "int"


# ---------------------------------------------------------------------------
# Matrices, distillation, persistence
# ---------------------------------------------------------------------------


def corpus(n_players=6, matches_per_player=8):
    """Tiny corpus: each player owns their own matches (slot 0)."""
    players = []
    matches = {}
    mid = 1
    for handle in range(200, 200 + n_players):
        ids = []
        for _ in range(matches_per_player):
            doc = build_match_doc(match_id=mid)
            doc["players"][0]["account_id"] = handle
            matches[mid] = parse_match(json.dumps(doc).encode())
            ids.append(mid)
            mid += 1
        players.append(PlayerRecord(handle=handle, rank_tier=None,
                                    has_plus=False, match_ids=tuple(ids)))
    return players, matches


def test_match_matrix_shape_and_owner_alignment(feature_ctx):
    players, matches = corpus()
    m, aug = build_match_matrix(players, matches, feature_ctx)
    assert m.variant == "M"
    assert m.n_rows == 6 * 8
    assert set(m.row_owner) == {p.handle for p in players}
    assert len(aug.values) == m.n_rows
    naive_names = {c.name for c in m.columns}
    assert "chat_slang_count" not in naive_names  # expert columns stay out of M


def test_distilled_under_cap_keeps_all_rows(feature_ctx):
    players, matches = corpus(n_players=3, matches_per_player=12)
    m, aug = build_match_matrix(players, matches, feature_ctx)
    variants = build_distilled(m, aug, max_per_player=30, n_variants=3, seed=5)
    for v in variants:
        assert v.n_rows == m.n_rows
        assert v.variant == "M_bar"


def test_distilled_caps_and_varies(feature_ctx):
    players, matches = corpus(n_players=2, matches_per_player=40)
    m, aug = build_match_matrix(players, matches, feature_ctx)
    variants = build_distilled(m, aug, max_per_player=30, n_variants=4, seed=5)
    subsets = []
    for v in variants:
        per_owner = {}
        for owner in v.row_owner:
            per_owner[owner] = per_owner.get(owner, 0) + 1
        assert all(count == 30 for count in per_owner.values())
        subsets.append(tuple(v.row_match))
    assert len(set(subsets)) > 1  # different variants sample different rows


def test_distilled_columns_superset_and_row_projection(feature_ctx):
    players, matches = corpus(n_players=2, matches_per_player=6)
    m, aug = build_match_matrix(players, matches, feature_ctx)
    v = build_distilled(m, aug, n_variants=1, seed=9)[0]
    m_names = [c.name for c in m.columns]
    v_names = [c.name for c in v.columns]
    assert set(v_names) >= set(m_names)
    projected = v.project(m_names)
    by_key = {(o, mt): row for o, mt, row in
              zip(m.row_owner, m.row_match, m.rows)}
    for owner, mt, row in zip(projected.row_owner, projected.row_match,
                              projected.rows):
        assert row == by_key[(owner, mt)]


def test_distilled_deterministic(feature_ctx):
    players, matches = corpus(n_players=2, matches_per_player=35)
    m, aug = build_match_matrix(players, matches, feature_ctx)
    a = build_distilled(m, aug, n_variants=2, seed=11)
    b = build_distilled(m, aug, n_variants=2, seed=11)
    for va, vb in zip(a, b):
        assert va.rows == vb.rows
        assert va.row_match == vb.row_match


def test_player_matrix_and_column_hash_stability(feature_ctx):
    players, matches = corpus()
    p1 = build_player_matrix(players, matches, feature_ctx)
    p2 = build_player_matrix(players, matches, feature_ctx)
    assert p1.rows == p2.rows
    assert p1.column_hash() == p2.column_hash()
    assert p1.n_rows == len(players)
    assert len(p1.columns) >= 40


def test_matrix_save_load_round_trip(tmp_path, feature_ctx):
    players, matches = corpus(n_players=3, matches_per_player=6)
    m, aug = build_match_matrix(players, matches, feature_ctx)
    path = tmp_path / "m.csv"
    save_matrix(m, path)
    loaded = load_matrix(path)
    assert loaded.rows == m.rows
    assert loaded.row_owner == m.row_owner
    assert loaded.row_match == m.row_match
    assert [c.name for c in loaded.columns] == [c.name for c in m.columns]
    # byte-stable on re-save
    save_matrix(loaded, tmp_path / "m2.csv")
    assert (tmp_path / "m.csv").read_bytes() == (tmp_path / "m2.csv").read_bytes()


def test_static_tables_load():
    lexicons = load_lexicons()
    assert {lx.category for lx in lexicons} == {
        "laugh", "slang", "bad_behavior", "good_behavior", "provocative"}
    assert all(lx.words for lx in lexicons)
    heroes = load_hero_table()
    assert heroes[5]["gender"] == "female"
    wheels = load_wheel_catalog()
    assert wheels["w_haha"] == "laugh"
