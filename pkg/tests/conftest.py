import json

import pytest

from aia.features import FeatureContext
from aia.ingest import parse_match


def build_match_doc(match_id=1, *, duration=1800, start_time=1_577_000_000,
                    radiant_win=True, players=None, chat=None, cosmetics=None,
                    objectives=None, all_word_counts=None, **extra):
    """Canonical 10-player match document; override what a test cares about."""
    if players is None:
        players = [
            {"player_slot": s if s < 5 else s + 123, "hero_id": 1 + s,
             "account_id": 100 + s, "kills": s, "deaths": 1, "assists": 2,
             "denies": 3, "last_hits": 10 * s, "isRadiant": s < 5,
             "word_counts": {}}
            for s in range(10)
        ]
    doc = {
        "match_id": match_id,
        "duration": duration,
        "start_time": start_time,
        "game_mode": 2,
        "lobby_type": 7,
        "region": 3,
        "patch": 43,
        "skill": 2,
        "radiant_win": radiant_win,
        "radiant_score": 25,
        "dire_score": 30,
        "tower_status_radiant": 1983,
        "tower_status_dire": 0,
        "barracks_status_radiant": 63,
        "barracks_status_dire": 0,
        "first_blood_time": 95,
        "human_players": len(players),
        "players": players,
        "chat": chat or [],
        "cosmetics": cosmetics or [],
        "objectives": objectives or [],
        "all_word_counts": all_word_counts or {},
    }
    doc.update(extra)
    return doc


def make_match(**kwargs):
    return parse_match(json.dumps(build_match_doc(**kwargs)).encode())


@pytest.fixture(scope="session")
def feature_ctx():
    return FeatureContext.default()
