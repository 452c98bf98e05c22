"""Telemetry ingestion: fetch, parse, and filter public match data.

The wire format is the OpenDota JSON schema. Raw payloads are cached on
disk (one file per entity) so full pipeline runs work offline from
committed fixtures; the synthetic generator emits the same layout.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from .errors import NotFound, RateLimited, SchemaError

DEFAULT_BASE_URL = "https://api.opendota.com/api"

CHAT_KINDS = ("typed_text", "chatwheel_general", "chatwheel_hero", "sound", "spray")
CHAT_CHANNELS = ("global", "team")

# Source "type" strings -> canonical chat kinds.
_CHAT_TYPE_MAP = {
    "chat": "typed_text",
    "chatwheel": "chatwheel_general",
    "chatwheel_hero": "chatwheel_hero",
    "sound": "sound",
    "spray": "spray",
}
_CHAT_TYPE_INV = {v: k for k, v in _CHAT_TYPE_MAP.items()}


# ---------------------------------------------------------------------------
# Typed records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChatMessage:
    sender_slot: int
    time_s: float
    kind: str      # one of CHAT_KINDS
    channel: str   # one of CHAT_CHANNELS
    text_or_id: str


@dataclass(frozen=True)
class MatchPlayerSlot:
    handle: Optional[int]
    slot: int
    hero_id: int
    kills: int
    deaths: int
    assists: int
    denies: int
    last_hits: int
    is_radiant: bool
    word_counts: dict = field(default_factory=dict)


@dataclass
class MatchRecord:
    match_id: int
    duration_s: int
    start_time: int
    game_mode: int
    lobby_type: int
    region: int
    patch: int
    skill: Optional[int]
    radiant_win: bool
    radiant_score: int
    dire_score: int
    tower_status_radiant: int
    tower_status_dire: int
    barracks_status_radiant: int
    barracks_status_dire: int
    first_blood_time: int
    human_players: int
    throw: Optional[float]
    comeback: Optional[float]
    loss: Optional[float]
    win: Optional[float]
    chat: list[ChatMessage] = field(default_factory=list)
    cosmetics: list[dict] = field(default_factory=list)
    players: list[MatchPlayerSlot] = field(default_factory=list)
    objectives: list[dict] = field(default_factory=list)
    teamfights: list[dict] = field(default_factory=list)
    picks_bans: list[dict] = field(default_factory=list)
    draft_timings: list[dict] = field(default_factory=list)
    gold_adv: list[float] = field(default_factory=list)
    xp_adv: list[float] = field(default_factory=list)
    word_counts: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)  # unknown source fields, preserved

    @property
    def unknown_field_count(self) -> int:
        return len(self.extras)

    def slot_record(self, slot: int) -> MatchPlayerSlot:
        for p in self.players:
            if p.slot == slot:
                return p
        from .errors import SlotNotFound

        raise SlotNotFound(f"slot {slot} not in match {self.match_id}")


@dataclass(frozen=True)
class PlayerRecord:
    handle: int
    rank_tier: Optional[int]
    has_plus: bool
    match_ids: tuple[int, ...]


@dataclass
class FilterReport:
    invalid_labels: int = 0
    not_visible: int = 0
    inactive: int = 0
    retained: int = 0


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _require(doc: dict, key: str, kind, path: str):
    if key not in doc or doc[key] is None:
        raise SchemaError(f"missing required field {key!r}", path=f"{path}.{key}")
    value = doc[key]
    if kind is bool:
        if not isinstance(value, bool):
            raise SchemaError(f"expected boolean, got {type(value).__name__}",
                              path=f"{path}.{key}")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"expected number, got {type(value).__name__}",
                              path=f"{path}.{key}")
        return int(value)
    return value


def _optional_num(doc: dict, key: str):
    value = doc.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError("expected number or null", path=f"$.{key}")
    return float(value)


def _parse_chat_entry(entry: dict, index: int) -> ChatMessage:
    path = f"$.chat[{index}]"
    raw_type = entry.get("type", "chat")
    kind = _CHAT_TYPE_MAP.get(raw_type)
    if kind is None:
        raise SchemaError(f"unknown chat type {raw_type!r}", path=path)
    channel = entry.get("channel", "global")
    if channel not in CHAT_CHANNELS:
        raise SchemaError(f"unknown chat channel {channel!r}", path=path)
    if kind == "typed_text" and channel != "global":
        # Team text is never public; only the global channel can appear.
        raise SchemaError("typed text must be on the global channel", path=path)
    return ChatMessage(
        sender_slot=int(entry.get("slot", 0)),
        time_s=float(entry.get("time", 0.0)),
        kind=kind,
        channel=channel,
        text_or_id=str(entry.get("key", "")),
    )


def _parse_player_slot(entry: dict, index: int) -> MatchPlayerSlot:
    path = f"$.players[{index}]"
    slot = _require(entry, "player_slot", int, path)
    counts = {}
    for key in ("kills", "deaths", "assists", "denies", "last_hits"):
        value = int(entry.get(key, 0) or 0)
        if value < 0:
            raise SchemaError(f"{key} must be >= 0", path=f"{path}.{key}")
        counts[key] = value
    is_radiant = entry.get("isRadiant")
    if is_radiant is None:
        is_radiant = slot < 128
    account = entry.get("account_id")
    return MatchPlayerSlot(
        handle=int(account) if account is not None else None,
        slot=slot,
        hero_id=int(entry.get("hero_id", 0) or 0),
        is_radiant=bool(is_radiant),
        word_counts=dict(entry.get("word_counts") or {}),
        **counts,
    )


_MATCH_KNOWN_FIELDS = {
    "match_id", "duration", "start_time", "game_mode", "lobby_type", "region",
    "patch", "skill", "radiant_win", "radiant_score", "dire_score",
    "tower_status_radiant", "tower_status_dire", "barracks_status_radiant",
    "barracks_status_dire", "first_blood_time", "human_players", "throw",
    "comeback", "loss", "win", "chat", "cosmetics", "players", "objectives",
    "teamfights", "picks_bans", "draft_timings", "radiant_gold_adv",
    "radiant_xp_adv", "all_word_counts",
}


def parse_match(payload: bytes | str) -> MatchRecord:
    """Deserialize one match document into a MatchRecord.

    All schema fields map losslessly; unknown fields are kept in `extras`
    (and counted) so later feature work can still reach them. The first
    invariant violation raises SchemaError with its JSON path.
    """
    try:
        doc = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not a JSON document: {exc}", path="$") from exc
    if not isinstance(doc, dict):
        raise SchemaError("top-level value must be an object", path="$")

    duration = _require(doc, "duration", int, "$")
    if duration < 0:
        raise SchemaError("duration must be >= 0", path="$.duration")

    players_raw = doc.get("players") or []
    if not 1 <= len(players_raw) <= 10:
        raise SchemaError(f"expected 1..10 players, got {len(players_raw)}",
                          path="$.players")
    players = [_parse_player_slot(p, i) for i, p in enumerate(players_raw)]
    seen_handles = [p.handle for p in players if p.handle is not None]
    if len(seen_handles) != len(set(seen_handles)):
        raise SchemaError("a handle appears in more than one slot", path="$.players")

    for key in ("radiant_score", "dire_score"):
        if int(doc.get(key, 0) or 0) < 0:
            raise SchemaError(f"{key} must be >= 0", path=f"$.{key}")

    chat = [_parse_chat_entry(c, i) for i, c in enumerate(doc.get("chat") or [])]

    cosmetics = []
    for i, item in enumerate(doc.get("cosmetics") or []):
        price = float(item.get("price", 0.0) or 0.0)
        if price < 0:
            raise SchemaError("price must be >= 0", path=f"$.cosmetics[{i}].price")
        cosmetics.append({
            "item_id": int(item.get("item_id", 0) or 0),
            "owner_slot": int(item.get("owner_slot", 0) or 0),
            "price": price,
        })

    extras = {k: doc[k] for k in doc if k not in _MATCH_KNOWN_FIELDS}

    return MatchRecord(
        match_id=_require(doc, "match_id", int, "$"),
        duration_s=duration,
        start_time=int(doc.get("start_time", 0) or 0),
        game_mode=int(doc.get("game_mode", 0) or 0),
        lobby_type=int(doc.get("lobby_type", 0) or 0),
        region=int(doc.get("region", 0) or 0),
        patch=int(doc.get("patch", 0) or 0),
        skill=int(doc["skill"]) if doc.get("skill") is not None else None,
        radiant_win=bool(_require(doc, "radiant_win", bool, "$")),
        radiant_score=int(doc.get("radiant_score", 0) or 0),
        dire_score=int(doc.get("dire_score", 0) or 0),
        tower_status_radiant=int(doc.get("tower_status_radiant", 0) or 0),
        tower_status_dire=int(doc.get("tower_status_dire", 0) or 0),
        barracks_status_radiant=int(doc.get("barracks_status_radiant", 0) or 0),
        barracks_status_dire=int(doc.get("barracks_status_dire", 0) or 0),
        first_blood_time=int(doc.get("first_blood_time", 0) or 0),
        human_players=int(doc.get("human_players", len(players)) or len(players)),
        throw=_optional_num(doc, "throw"),
        comeback=_optional_num(doc, "comeback"),
        loss=_optional_num(doc, "loss"),
        win=_optional_num(doc, "win"),
        chat=chat,
        cosmetics=cosmetics,
        players=players,
        objectives=list(doc.get("objectives") or []),
        teamfights=list(doc.get("teamfights") or []),
        picks_bans=list(doc.get("picks_bans") or []),
        draft_timings=list(doc.get("draft_timings") or []),
        gold_adv=[float(v) for v in doc.get("radiant_gold_adv") or []],
        xp_adv=[float(v) for v in doc.get("radiant_xp_adv") or []],
        word_counts=dict(doc.get("all_word_counts") or {}),
        extras=extras,
    )


def serialize_match(record: MatchRecord) -> bytes:
    """Inverse of parse_match at the typed-record level."""
    doc: dict[str, Any] = {
        "match_id": record.match_id,
        "duration": record.duration_s,
        "start_time": record.start_time,
        "game_mode": record.game_mode,
        "lobby_type": record.lobby_type,
        "region": record.region,
        "patch": record.patch,
        "skill": record.skill,
        "radiant_win": record.radiant_win,
        "radiant_score": record.radiant_score,
        "dire_score": record.dire_score,
        "tower_status_radiant": record.tower_status_radiant,
        "tower_status_dire": record.tower_status_dire,
        "barracks_status_radiant": record.barracks_status_radiant,
        "barracks_status_dire": record.barracks_status_dire,
        "first_blood_time": record.first_blood_time,
        "human_players": record.human_players,
        "throw": record.throw,
        "comeback": record.comeback,
        "loss": record.loss,
        "win": record.win,
        "chat": [{
            "slot": m.sender_slot,
            "time": m.time_s,
            "type": _CHAT_TYPE_INV[m.kind],
            "channel": m.channel,
            "key": m.text_or_id,
        } for m in record.chat],
        "cosmetics": record.cosmetics,
        "players": [{
            "account_id": p.handle,
            "player_slot": p.slot,
            "hero_id": p.hero_id,
            "kills": p.kills,
            "deaths": p.deaths,
            "assists": p.assists,
            "denies": p.denies,
            "last_hits": p.last_hits,
            "isRadiant": p.is_radiant,
            "word_counts": p.word_counts,
        } for p in record.players],
        "objectives": record.objectives,
        "teamfights": record.teamfights,
        "picks_bans": record.picks_bans,
        "draft_timings": record.draft_timings,
        "radiant_gold_adv": record.gold_adv,
        "radiant_xp_adv": record.xp_adv,
        "all_word_counts": record.word_counts,
    }
    doc.update(record.extras)
    return json.dumps(doc, sort_keys=True).encode("utf-8")


def parse_player(doc: dict, handle: int) -> PlayerRecord:
    """Build a PlayerRecord from the cached player document."""
    profile = doc.get("profile") or {}
    matches = doc.get("matches") or []
    seen: list[int] = []
    for i, entry in enumerate(matches):
        if "match_id" not in entry:
            raise SchemaError("match entry lacks match_id", path=f"$.matches[{i}]")
        mid = int(entry["match_id"])
        if mid not in seen:
            seen.append(mid)
    rank_tier = profile.get("rank_tier")
    return PlayerRecord(
        handle=handle,
        rank_tier=int(rank_tier) if rank_tier is not None else None,
        has_plus=bool(profile.get("plus", False)),
        match_ids=tuple(seen),
    )


# ---------------------------------------------------------------------------
# Disk cache helpers (shared with the synthetic generator)
# ---------------------------------------------------------------------------


def player_cache_path(cache_dir: str | Path, handle: int) -> Path:
    return Path(cache_dir) / "players" / f"{handle}.json"


def match_cache_path(cache_dir: str | Path, match_id: int) -> Path:
    return Path(cache_dir) / "matches" / f"{match_id}.json"


def atomic_write(path: Path, data: bytes) -> None:
    """Write-temp-then-rename so readers never see partial files."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def load_cached_match(cache_dir: str | Path, match_id: int) -> MatchRecord:
    path = match_cache_path(cache_dir, match_id)
    if not path.exists():
        raise NotFound(f"match {match_id} not in cache {cache_dir}")
    return parse_match(path.read_bytes())


def load_cached_player(cache_dir: str | Path, handle: int) -> PlayerRecord:
    path = player_cache_path(cache_dir, handle)
    if not path.exists():
        raise NotFound(f"player {handle} not in cache {cache_dir}")
    return parse_player(json.loads(path.read_text(encoding="utf-8")), handle)


def iter_cached_players(cache_dir: str | Path) -> list[int]:
    root = Path(cache_dir) / "players"
    if not root.exists():
        return []
    return sorted(int(p.stem) for p in root.glob("*.json"))


# ---------------------------------------------------------------------------
# Network client
# ---------------------------------------------------------------------------


class TokenBucket:
    """Token bucket; acquire() blocks until a token is available.

    A lock serializes concurrent callers, so one client behaves as a single
    logical session regardless of caller threading.
    """

    def __init__(self, rate_per_s: float, capacity: float = 1.0,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self.rate = rate_per_s
        self.capacity = capacity
        self._clock = clock
        self._sleep = sleep
        self._tokens = capacity
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            self._tokens = min(self.capacity,
                               self._tokens + (now - self._last) * self.rate)
            self._last = now
            if self._tokens < 1.0:
                wait = (1.0 - self._tokens) / self.rate
                self._sleep(wait)
                self._tokens = 1.0
                self._last = self._clock()
            self._tokens -= 1.0


@dataclass
class TransportResponse:
    status: int
    headers: dict
    body: bytes


def _requests_transport(url: str, params: dict) -> TransportResponse:
    import requests

    resp = requests.get(url, params=params, timeout=30)
    return TransportResponse(resp.status_code, dict(resp.headers), resp.content)


class TelemetryClient:
    """Rate-limited HTTP client over the player/matches APIs with a disk cache.

    One logical session: concurrent callers are serialized by the limiter.
    A custom `transport` callable makes the client fully testable offline.
    """

    def __init__(self, cache_dir: str | Path, base_url: str = DEFAULT_BASE_URL,
                 rate_per_s: float = 1.0, offline: bool = False,
                 transport: Callable[[str, dict], TransportResponse] | None = None,
                 max_retries: int = 4, backoff_base_s: float = 1.0,
                 sleep: Callable[[float], None] = time.sleep,
                 clock: Callable[[], float] = time.monotonic):
        self.cache_dir = Path(cache_dir)
        self.base_url = base_url.rstrip("/")
        self.offline = offline
        self.transport = transport or _requests_transport
        self.max_retries = max_retries
        self.backoff_base_s = backoff_base_s
        self._sleep = sleep
        self._bucket = TokenBucket(rate_per_s, clock=clock, sleep=sleep)

    def _get(self, path: str, params: dict | None = None) -> bytes:
        url = f"{self.base_url}/{path.lstrip('/')}"
        params = params or {}
        last_retry_after: float | None = None
        for attempt in range(self.max_retries + 1):
            self._bucket.acquire()
            resp = self.transport(url, params)
            if resp.status == 200:
                return resp.body
            if resp.status == 404:
                raise NotFound(f"{path}: no public data")
            if resp.status == 429 or resp.status >= 500:
                retry_after = resp.headers.get("Retry-After")
                if retry_after is not None:
                    last_retry_after = float(retry_after)
                    wait = last_retry_after
                else:
                    wait = self.backoff_base_s * (2 ** attempt)
                if attempt < self.max_retries:
                    self._sleep(wait)
                    continue
                raise RateLimited(f"{path}: gave up after {attempt + 1} attempts",
                                  retry_after=last_retry_after)
            raise SchemaError(f"unexpected HTTP status {resp.status}", path=path)
        raise RateLimited(f"{path}: retries exhausted", retry_after=last_retry_after)

    def fetch_player(self, handle: int, window_days: int = 30) -> PlayerRecord:
        """Player profile plus match ids within the trailing window."""
        if handle <= 0:
            raise SchemaError("handle must be a positive integer", path="$.handle")
        if window_days <= 0:
            raise SchemaError("window_days must be > 0", path="$.window_days")
        path = player_cache_path(self.cache_dir, handle)
        if path.exists():
            doc = json.loads(path.read_text(encoding="utf-8"))
            if doc.get("window_days") == window_days:
                return parse_player(doc, handle)
        if self.offline:
            raise NotFound(f"player {handle} not cached and client is offline")
        profile_raw = self._get(f"players/{handle}")
        matches_raw = self._get(f"players/{handle}/matches", {"date": window_days})
        try:
            profile = json.loads(profile_raw)
            matches = json.loads(matches_raw)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"unparseable player payload: {exc}") from exc
        doc = {"window_days": window_days, "profile": profile, "matches": matches}
        record = parse_player(doc, handle)  # validate before caching
        atomic_write(path, json.dumps(doc, sort_keys=True).encode("utf-8"))
        return record

    def fetch_match(self, match_id: int) -> MatchRecord:
        """One fully parsed match; the raw payload lands in the cache bit-exact."""
        if match_id <= 0:
            raise SchemaError("match id must be > 0", path="$.match_id")
        path = match_cache_path(self.cache_dir, match_id)
        if path.exists():
            return parse_match(path.read_bytes())
        if self.offline:
            raise NotFound(f"match {match_id} not cached and client is offline")
        raw = self._get(f"matches/{match_id}")
        record = parse_match(raw)  # validate before caching
        atomic_write(path, raw)
        return record


# ---------------------------------------------------------------------------
# Eligibility filters
# ---------------------------------------------------------------------------


def filter_players(records, min_matches: int = 5):
    """Drop ineligible players and account for every removal.

    `records` is a list of (PlayerRecord, AttributeLabels-or-None) pairs.
    Removal categories, applied in order per record: invalid labels, no
    public match data, fewer than `min_matches` matches in the window.
    """
    report = FilterReport()
    kept = []
    for record, labels in records:
        if labels is None:
            report.invalid_labels += 1
            continue
        if len(record.match_ids) == 0:
            report.not_visible += 1
            continue
        if len(record.match_ids) < min_matches:
            report.inactive += 1
            continue
        kept.append((record, labels))
    report.retained = len(kept)
    return kept, report
