"""Synthetic population generator with planted attribute/feature relationships.

Every protocol and statistic can be exercised without real survey data:
the generator emits raw telemetry in the same JSON schema (and cache
layout) as ingestion, labels with configurable priors, and a manifest
recording every planted dependence.

Planting mechanics. Numeric effects target an exact player-level Spearman
rho through a latent monotone link: the player's latent value is the
attribute's class code plus Gaussian noise whose scale is solved from the
closed-form population grade correlation (rank statistics depend only on
ranks, so any monotone link suffices). Rate effects tilt chat content
mixes or wheel-usage rates (strong, not exactly calibrated; realized
strengths land in the manifest consumer's court). Categorical effects make
a categorical feature reveal the class with a configured probability.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .attributes import ATTRIBUTE_SCHEMA, AttributeLabels, RawSurveyRow
from .errors import ConfigError
from .features import LEXICON_CATEGORIES, load_hero_table, load_lexicons, load_wheel_catalog
from .ingest import MatchRecord, PlayerRecord, atomic_write, match_cache_path, parse_match, player_cache_path

# Class distribution defaults drawn from the reference population survey.
TABLE1_PRIORS: dict[str, tuple[float, ...]] = {
    "gender": (0.0496, 0.9504),
    "age_bin": (0.1343, 0.5372, 0.3285),
    "occupation": (0.5744, 0.4256),
    "purchase_habits": (0.1054, 0.6116, 0.2830),
    "openness": (0.1922, 0.2438, 0.5640),
    "conscientiousness": (0.3946, 0.2397, 0.3657),
    "extraversion": (0.4731, 0.2107, 0.3162),
    "agreeableness": (0.2087, 0.1942, 0.5971),
    "neuroticism": (0.5351, 0.1921, 0.2727),
}

# Raw per-match synthesis channels: name -> (base, spread, integer, floor).
NUMERIC_CHANNELS: dict[str, tuple[float, float, bool, float]] = {
    "kills": (30.0, 8.0, True, 0.0),
    "deaths": (20.0, 6.0, True, 0.0),
    "assists": (25.0, 7.0, True, 0.0),
    "denies": (40.0, 10.0, True, 0.0),
    "last_hits": (200.0, 40.0, True, 0.0),
    "duration_s": (2400.0, 400.0, True, 600.0),
    "first_blood_time": (300.0, 80.0, True, 0.0),
    "cosmetics_price": (20.0, 6.0, False, 0.0),
}

# Chat-mix channels tilt the content of a fixed-size message budget; wheel
# and hero-wheel channels tilt usage rates directly.
MIX_CHANNELS = tuple(f"chat_{cat}_count" for cat in LEXICON_CATEGORIES)
RATE_CHANNELS = ("wheel_global_msgs", "wheel_team_msgs", "hero_msg_count")

NEUTRAL_VOCAB = ("ok", "go", "sure", "yes", "no", "wait", "here", "come",
                 "care", "now")


@dataclass(frozen=True)
class NumericEffect:
    """Exact player-level Spearman target on a numeric channel."""

    feature: str
    attribute: str
    rho: float


@dataclass(frozen=True)
class RateEffect:
    """Multiplicative tilt of a chat mix or wheel rate per grade-coded class."""

    feature: str
    attribute: str
    slope: float


@dataclass(frozen=True)
class CategoricalEffect:
    """Categorical feature reveals the class with probability `strength`."""

    feature: str  # "hero_gender" | "has_plus"
    attribute: str
    strength: float


@dataclass
class SynthConfig:
    n_players: int = 50
    matches_range: tuple[int, int] = (5, 120)
    priors: dict[str, tuple[float, ...]] = field(
        default_factory=lambda: dict(TABLE1_PRIORS))
    numeric_effects: tuple[NumericEffect, ...] = ()
    rate_effects: tuple[RateEffect, ...] = ()
    categorical_effects: tuple[CategoricalEffect, ...] = ()
    noise_level: float = 0.5     # attribute-code noise inside every latent
    match_noise: float = 1.0     # per-match noise, in class-code units
    messages_per_match: float = 4.0
    seed: int = 0

    def validate(self) -> None:
        if self.n_players < 1:
            raise ConfigError("n_players must be >= 1")
        lo, hi = self.matches_range
        if not 1 <= lo <= hi:
            raise ConfigError(f"bad matches_range {self.matches_range}")
        for attr, probs in self.priors.items():
            if attr not in ATTRIBUTE_SCHEMA:
                raise ConfigError(f"unknown attribute {attr!r}")
            if len(probs) != len(ATTRIBUTE_SCHEMA[attr]):
                raise ConfigError(f"prior arity mismatch for {attr!r}")
            # Published distributions carry rounding error (one row sums to
            # 99.99%); tolerate it and renormalize at draw time.
            if abs(sum(probs) - 1.0) > 1e-3:
                raise ConfigError(f"priors for {attr!r} must sum to 1")
        for eff in self.numeric_effects:
            if eff.feature not in NUMERIC_CHANNELS:
                raise ConfigError(f"unknown numeric channel {eff.feature!r}")
            if not -1.0 < eff.rho < 1.0 or eff.rho == 0.0:
                raise ConfigError(f"rho must be in (-1, 1) and nonzero: {eff.rho}")
        for eff in self.rate_effects:
            if eff.feature not in MIX_CHANNELS + RATE_CHANNELS:
                raise ConfigError(f"unknown rate channel {eff.feature!r}")
        for eff in self.categorical_effects:
            if eff.feature not in ("hero_gender", "has_plus"):
                raise ConfigError(f"unknown categorical channel {eff.feature!r}")
            if not 0.0 <= eff.strength <= 1.0:
                raise ConfigError("strength must lie in [0, 1]")

    def to_json_dict(self) -> dict:
        return {
            "n_players": self.n_players,
            "matches_range": list(self.matches_range),
            "priors": {k: list(v) for k, v in self.priors.items()},
            "numeric_effects": [vars(e) for e in self.numeric_effects],
            "rate_effects": [vars(e) for e in self.rate_effects],
            "categorical_effects": [vars(e) for e in self.categorical_effects],
            "noise_level": self.noise_level,
            "match_noise": self.match_noise,
            "messages_per_match": self.messages_per_match,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SynthConfig":
        return cls(
            n_players=int(doc.get("n_players", 50)),
            matches_range=tuple(doc.get("matches_range", (5, 120))),
            priors={k: tuple(v) for k, v in doc.get(
                "priors", {k: list(v) for k, v in TABLE1_PRIORS.items()}).items()},
            numeric_effects=tuple(NumericEffect(**e)
                                  for e in doc.get("numeric_effects", ())),
            rate_effects=tuple(RateEffect(**e) for e in doc.get("rate_effects", ())),
            categorical_effects=tuple(CategoricalEffect(**e)
                                      for e in doc.get("categorical_effects", ())),
            noise_level=float(doc.get("noise_level", 0.5)),
            match_noise=float(doc.get("match_noise", 1.0)),
            messages_per_match=float(doc.get("messages_per_match", 4.0)),
            seed=int(doc.get("seed", 0)),
        )


# ---------------------------------------------------------------------------
# Noise calibration: population grade correlation of (code + sigma*Z, code)
# ---------------------------------------------------------------------------


def _normalized(priors: Sequence[float]) -> list[float]:
    total = float(sum(priors))
    return [p / total for p in priors]


def _grades(priors: Sequence[float]) -> list[float]:
    grades = []
    acc = 0.0
    for p in _normalized(priors):
        grades.append(acc + p / 2.0)
        acc += p
    return grades


def grade_correlation(sigma: float, priors: Sequence[float]) -> float:
    """Population Spearman between x = code + sigma*Z and the binned code.

    Uses average-rank grades for the discrete side; x is continuous, so its
    grade F(x) is uniform. All expectations reduce to normal CDFs.
    """
    priors = _normalized(priors)
    grades = _grades(priors)
    eg = sum(p * g for p, g in zip(priors, grades))
    var_g = sum(p * g * g for p, g in zip(priors, grades)) - eg * eg
    if var_g <= 0.0:
        raise ConfigError("degenerate priors: single class")
    # E[F(x) | a=k] = sum_j pi_j Phi((k - j) / (sigma * sqrt(2))), and
    # Phi(u) = erfc(-u / sqrt(2)) / 2, so the erfc argument carries 2*sigma.
    s = 2.0 * max(sigma, 1e-12)
    efg = 0.0
    for k, (pk, gk) in enumerate(zip(priors, grades)):
        inner = sum(pj * 0.5 * math.erfc(-((k - j) / s))
                    for j, pj in enumerate(priors))
        efg += pk * gk * inner
    return (efg - 0.5 * eg) / math.sqrt(var_g / 12.0)


def max_plantable_rho(priors: Sequence[float]) -> float:
    """Supremum of the grade correlation as the noise vanishes."""
    return grade_correlation(0.0, priors)


def calibrate_sigma(priors: Sequence[float], target_rho: float) -> float:
    """Noise scale whose grade correlation hits |target_rho| (bisection)."""
    target = abs(target_rho)
    ceiling = max_plantable_rho(priors)
    if target >= ceiling - 1e-9:
        raise ConfigError(
            f"target rho {target_rho} unreachable for these priors "
            f"(max {ceiling:.4f})")
    lo, hi = 1e-9, 1.0
    while grade_correlation(hi, priors) > target:
        hi *= 2.0
        if hi > 1e6:
            raise ConfigError("calibration failed to bracket the target")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if grade_correlation(mid, priors) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _log_uniform_weights(lo: int, hi: int) -> np.ndarray:
    values = np.arange(lo, hi + 1, dtype=float)
    weights = 1.0 / values
    return weights / weights.sum()


def _expected_inverse_matches(lo: int, hi: int) -> float:
    values = np.arange(lo, hi + 1, dtype=float)
    weights = _log_uniform_weights(lo, hi)
    return float((weights / values).sum())


def _grade_z(priors: Sequence[float], code: int) -> float:
    """Grade-based class coordinate in (-1, 1); bounded even for rare classes."""
    return 2.0 * _grades(priors)[code] - 1.0


# ---------------------------------------------------------------------------
# Population assembly
# ---------------------------------------------------------------------------


@dataclass
class SynthPopulation:
    players: list[PlayerRecord]
    matches: dict[int, MatchRecord]
    labels: dict[int, AttributeLabels]
    survey_rows: list[RawSurveyRow]
    manifest: dict


_AGE_RANGES = {"13-18": (13, 18), "19-24": (19, 24), "25-38": (25, 38)}
_BIG5_RANGES = {"low": (0, 33), "medium": (34, 66), "high": (67, 100)}
_WINDOW_END = 1_578_000_000  # fixed so corpora are reproducible


def _survey_row_for(handle: int, labels: AttributeLabels,
                    rng: np.random.Generator) -> RawSurveyRow:
    """Raw survey values that bin back to exactly these labels."""
    age_lo, age_hi = _AGE_RANGES[labels.age_bin]
    big5 = []
    for trait in ("openness", "conscientiousness", "extraversion",
                  "agreeableness", "neuroticism"):
        lo, hi = _BIG5_RANGES[getattr(labels, trait)]
        big5.append(int(rng.integers(lo, hi + 1)))
    purchase_code = {"never": 0, "rarely": 1, "regularly": 2}[labels.purchase_habits]
    if purchase_code == 2:
        purchase_code = int(rng.integers(2, 4))
    return RawSurveyRow(
        handle=handle,
        raw_gender=labels.gender,
        raw_age=int(rng.integers(age_lo, age_hi + 1)),
        raw_employment=labels.occupation == "yes",
        raw_purchase_frequency=purchase_code,
        big5_scores=tuple(big5),
        country="XX",
    )


def sample_labels(priors: dict[str, tuple[float, ...]], n: int,
                  seed: int = 0) -> list[AttributeLabels]:
    """Draw n label sets from the priors (no telemetry attached)."""
    rng = np.random.default_rng(seed)
    return [_draw_labels(priors, rng)[0] for _ in range(n)]


def _draw_labels(priors: dict[str, tuple[float, ...]],
                 rng: np.random.Generator) -> tuple[AttributeLabels, dict[str, int]]:
    values = {}
    codes = {}
    for attr, classes in ATTRIBUTE_SCHEMA.items():
        code = int(rng.choice(len(classes), p=_normalized(priors[attr])))
        codes[attr] = code
        values[attr] = classes[code]
    return AttributeLabels(**values), codes


def _message_text(category: Optional[str], lexicon_words: dict[str, tuple[str, ...]],
                  rng: np.random.Generator) -> str:
    vocab = lexicon_words[category] if category else NEUTRAL_VOCAB
    n_tokens = int(rng.integers(1, 4))
    return " ".join(str(rng.choice(vocab)) for _ in range(n_tokens))


def generate_population(config: SynthConfig) -> SynthPopulation:
    """Build the full synthetic corpus for a config; bit-identical per config."""
    config.validate()
    root = np.random.SeedSequence(config.seed)
    seqs = root.spawn(config.n_players + 1)
    rng0 = np.random.default_rng(seqs[0])

    lexicons = {lx.category: lx.words for lx in load_lexicons()}
    hero_table = load_hero_table()
    hero_ids = sorted(hero_table)
    female_pool = [h for h in hero_ids if hero_table[h]["gender"] == "female"]
    male_pool = [h for h in hero_ids if hero_table[h]["gender"] == "male"]
    wheel_catalog = load_wheel_catalog()
    general_wheels = sorted(w for w in wheel_catalog if w.startswith("w_"))
    hero_wheels = sorted(w for w in wheel_catalog if w.startswith("hw_"))

    e_inv_m = _expected_inverse_matches(*config.matches_range)
    sigma_table: dict[tuple[str, str], float] = {}
    channel_plants: dict[str, dict] = {}
    for eff in config.numeric_effects:
        priors = config.priors[eff.attribute]
        sigma_total = calibrate_sigma(priors, eff.rho)
        adj = sigma_total ** 2 - config.match_noise ** 2 * e_inv_m
        if adj <= 0.0:
            raise ConfigError(
                f"match_noise {config.match_noise} too large for target rho "
                f"{eff.rho} on {eff.feature}/{eff.attribute}")
        sigma_latent = math.sqrt(adj)
        sigma_table[(eff.feature, eff.attribute)] = sigma_latent
        codes_arr = np.arange(len(priors), dtype=float)
        probs = np.asarray(priors)
        code_mean = float(codes_arr @ probs)
        code_var = float((codes_arr ** 2) @ probs - code_mean ** 2)
        sign = 1.0 if eff.rho >= 0 else -1.0
        # Per-match values are re-centered and re-scaled so channel outputs
        # keep a stable marginal spread (rank statistics are scale-free).
        channel_plants[eff.feature] = {
            "attribute": eff.attribute,
            "sigma": sigma_latent,
            "sign": sign,
            "center": sign * code_mean,
            "scale": math.sqrt(code_var + adj + config.match_noise ** 2),
        }

    mix_effects = {e.feature: e for e in config.rate_effects
                   if e.feature in MIX_CHANNELS}
    rate_effects = {e.feature: e for e in config.rate_effects
                    if e.feature in RATE_CHANNELS}
    cat_effects = {e.feature: e for e in config.categorical_effects}

    m_lo, m_hi = config.matches_range
    match_weights = _log_uniform_weights(m_lo, m_hi)
    match_values = np.arange(m_lo, m_hi + 1)

    # Global draws happen up front so per-player work only touches its own
    # derived generator (parallel-friendly, identical either way).
    drawn = [_draw_labels(config.priors, rng0) for _ in range(config.n_players)]
    n_matches_all = [int(v) for v in rng0.choice(
        match_values, size=config.n_players, p=match_weights)]

    players: list[PlayerRecord] = []
    matches: dict[int, MatchRecord] = {}
    labels: dict[int, AttributeLabels] = {}
    survey_rows: list[RawSurveyRow] = []
    next_match_id = 10_000

    for p in range(config.n_players):
        handle = 1_000 + p
        rng = np.random.default_rng(seqs[p + 1])
        player_labels, codes = drawn[p]
        labels[handle] = player_labels
        survey_rows.append(_survey_row_for(handle, player_labels, rng))

        # Per-player latents for planted numeric channels.
        latents: dict[str, float] = {}
        for name, plant in channel_plants.items():
            code = codes[plant["attribute"]]
            latents[name] = (plant["sign"] * code
                             + plant["sigma"] * rng.standard_normal())

        # Per-player tilt coordinates for mix/rate channels.
        zs: dict[str, float] = {}
        for name, eff in {**mix_effects, **rate_effects}.items():
            z = _grade_z(config.priors[eff.attribute], codes[eff.attribute])
            zs[name] = eff.slope * (z + config.noise_level * 0.3
                                    * rng.standard_normal())

        # Categorical channels.
        has_plus = bool(rng.random() < 0.3)
        if "has_plus" in cat_effects:
            eff = cat_effects["has_plus"]
            if rng.random() < eff.strength:
                positive = ATTRIBUTE_SCHEMA[eff.attribute].index(
                    getattr(player_labels, eff.attribute)) == len(
                        ATTRIBUTE_SCHEMA[eff.attribute]) - 1
                has_plus = positive

        n_matches = n_matches_all[p]
        start_times = sorted(
            int(_WINDOW_END - rng.integers(0, 30 * 86400))
            for _ in range(n_matches))

        mix_base = {cat: 1.0 for cat in LEXICON_CATEGORIES}
        mix_base["neutral"] = 4.0
        for name, eff in mix_effects.items():
            cat = name[len("chat_"):-len("_count")]
            mix_base[cat] = math.exp(zs[name])
        mix_names = list(mix_base)
        mix_probs = np.array([mix_base[c] for c in mix_names])
        mix_probs = mix_probs / mix_probs.sum()

        match_ids = []
        for start_time in start_times:
            match_id = next_match_id
            next_match_id += 1
            match_ids.append(match_id)
            matches[match_id] = _synth_match(
                match_id, start_time, handle, latents, channel_plants, zs, rng,
                config, lexicons, mix_names, mix_probs,
                female_pool, male_pool, hero_ids, general_wheels, hero_wheels,
                cat_effects, player_labels)

        rank_tier = int(rng.integers(10, 80))
        players.append(PlayerRecord(handle=handle, rank_tier=rank_tier,
                                    has_plus=has_plus,
                                    match_ids=tuple(match_ids)))

    manifest = {
        "config": config.to_json_dict(),
        "sigma_table": {f"{f}|{a}": s for (f, a), s in sigma_table.items()},
        "expected_inverse_matches": e_inv_m,
        "n_matches": len(matches),
        "attribute_counts": {
            attr: {cls: sum(1 for lab in labels.values()
                            if getattr(lab, attr) == cls)
                   for cls in ATTRIBUTE_SCHEMA[attr]}
            for attr in ATTRIBUTE_SCHEMA
        },
    }
    return SynthPopulation(players=players, matches=matches, labels=labels,
                           survey_rows=survey_rows, manifest=manifest)


def _channel_value(name: str, latents: dict[str, float],
                   channel_plants: dict[str, dict], config: SynthConfig,
                   rng: np.random.Generator) -> float:
    base, spread, integer, floor = NUMERIC_CHANNELS[name]
    plant = channel_plants.get(name)
    if plant is not None:
        x = latents[name] + config.match_noise * rng.standard_normal()
        unit = (x - plant["center"]) / plant["scale"]
    else:
        unit = rng.standard_normal()
    value = max(floor, base + spread * unit)
    return float(round(value)) if integer else float(value)


def _synth_match(match_id, start_time, handle, latents, channel_plants, zs, rng,
                 config, lexicons, mix_names, mix_probs, female_pool,
                 male_pool, hero_ids, general_wheels, hero_wheels,
                 cat_effects, player_labels) -> MatchRecord:
    position = int(rng.integers(0, 10))
    slot = position if position < 5 else position + 123
    is_radiant = position < 5

    def channel(name):
        return _channel_value(name, latents, channel_plants, config, rng)

    duration = channel("duration_s")
    kills = channel("kills")
    deaths = channel("deaths")
    assists = channel("assists")
    denies = channel("denies")
    last_hits = channel("last_hits")
    price = channel("cosmetics_price")
    first_blood = channel("first_blood_time")

    # Hero pick, optionally biased toward gender-matched heroes.
    pool = hero_ids
    if "hero_gender" in cat_effects:
        eff = cat_effects["hero_gender"]
        if rng.random() < eff.strength:
            pool = female_pool if player_labels.gender == "female" else male_pool
    hero_id = int(rng.choice(pool))

    # Own chat: fixed message budget, planted content mix.
    n_msgs = int(rng.poisson(config.messages_per_match))
    chat = []
    my_words: dict[str, int] = {}
    all_words: dict[str, int] = {}
    for _ in range(n_msgs):
        cat = str(rng.choice(mix_names, p=mix_probs))
        text = _message_text(None if cat == "neutral" else cat, lexicons, rng)
        chat.append({"slot": slot, "time": float(rng.integers(0, int(duration))),
                     "type": "chat", "channel": "global", "key": text})
        for token in text.split():
            my_words[token] = my_words.get(token, 0) + 1
            all_words[token] = all_words.get(token, 0) + 1

    # Wheel usage, sounds, sprays.
    for channel_name, channel, ids in (
            ("wheel_global_msgs", "global", general_wheels),
            ("wheel_team_msgs", "team", general_wheels)):
        base_rate = 0.6
        rate = base_rate * math.exp(zs.get(channel_name, 0.0))
        for _ in range(int(rng.poisson(rate))):
            chat.append({"slot": slot, "time": float(rng.integers(0, int(duration))),
                         "type": "chatwheel", "channel": channel,
                         "key": str(rng.choice(ids))})
    hero_rate = 0.4 * math.exp(zs.get("hero_msg_count", 0.0))
    for _ in range(int(rng.poisson(hero_rate))):
        chat.append({"slot": slot, "time": float(rng.integers(0, int(duration))),
                     "type": "chatwheel_hero", "channel": "team",
                     "key": str(rng.choice(hero_wheels))})
    for kind in ("sound", "spray"):
        for _ in range(int(rng.poisson(0.2))):
            chat.append({"slot": slot, "time": float(rng.integers(0, int(duration))),
                         "type": kind, "channel": "global", "key": f"{kind}_x"})

    # Other nine slots: anonymous filler with a little neutral chatter.
    players_doc = []
    for s in range(10):
        other_slot = s if s < 5 else s + 123
        if other_slot == slot:
            players_doc.append({
                "player_slot": slot, "account_id": handle, "hero_id": hero_id,
                "kills": int(kills), "deaths": int(deaths), "assists": int(assists),
                "denies": int(denies), "last_hits": int(last_hits),
                "isRadiant": is_radiant, "word_counts": my_words,
            })
            continue
        players_doc.append({
            "player_slot": other_slot, "account_id": None,
            "hero_id": int(rng.choice(hero_ids)),
            "kills": int(rng.integers(0, 15)), "deaths": int(rng.integers(0, 15)),
            "assists": int(rng.integers(0, 20)), "denies": int(rng.integers(0, 10)),
            "last_hits": int(rng.integers(0, 300)), "isRadiant": s < 5,
            "word_counts": {},
        })
        if rng.random() < 0.5:
            text = _message_text(None, lexicons, rng)
            chat.append({"slot": other_slot,
                         "time": float(rng.integers(0, int(duration))),
                         "type": "chat", "channel": "global", "key": text})
            for token in text.split():
                all_words[token] = all_words.get(token, 0) + 1

    chat.sort(key=lambda m: (m["time"], m["slot"], m["key"]))

    objectives = [{"type": "kill", "slot": slot,
                   "time": int(rng.integers(0, int(duration)))}
                  for _ in range(min(int(kills), 4))]

    radiant_score = int(rng.integers(10, 60))
    dire_score = int(rng.integers(10, 60))
    doc = {
        "match_id": match_id,
        "duration": int(duration),
        "start_time": int(start_time),
        "game_mode": int(rng.choice([1, 2, 22])),
        "lobby_type": int(rng.choice([0, 7], p=[0.4, 0.6])),
        "region": int(rng.choice([1, 3, 8])),
        "patch": int(rng.choice([42, 43])),
        "skill": int(rng.choice([1, 2, 3])),
        "radiant_win": bool(rng.random() < 0.5),
        "radiant_score": radiant_score,
        "dire_score": dire_score,
        "tower_status_radiant": int(rng.integers(0, 2047)),
        "tower_status_dire": int(rng.integers(0, 2047)),
        "barracks_status_radiant": int(rng.integers(0, 63)),
        "barracks_status_dire": int(rng.integers(0, 63)),
        "first_blood_time": int(first_blood),
        "human_players": 10,
        "throw": float(round(rng.uniform(0, 3000), 1)),
        "comeback": float(round(rng.uniform(0, 3000), 1)),
        "loss": float(round(rng.uniform(0, 3000), 1)),
        "win": float(round(rng.uniform(0, 3000), 1)),
        "chat": chat,
        "cosmetics": ([{"item_id": int(rng.integers(1, 500)),
                        "owner_slot": slot, "price": round(price, 2)}]
                      if price > 0 else []),
        "players": players_doc,
        "objectives": objectives,
        "teamfights": [],
        "picks_bans": [],
        "draft_timings": [],
        "radiant_gold_adv": [float(v) for v in
                             np.round(rng.normal(0, 500, 3), 1)],
        "radiant_xp_adv": [float(v) for v in
                           np.round(rng.normal(0, 500, 3), 1)],
        "all_word_counts": all_words,
    }
    # Round-trip through the parser so every corpus obeys ingest invariants.
    return parse_match(json.dumps(doc).encode("utf-8"))


# ---------------------------------------------------------------------------
# Cache emission (same layout as ingestion) and survey output
# ---------------------------------------------------------------------------


def write_population_cache(population: SynthPopulation, cache_dir: str | Path,
                           window_days: int = 30) -> None:
    from .ingest import serialize_match

    cache_dir = Path(cache_dir)
    for player in population.players:
        doc = {
            "window_days": window_days,
            "profile": {"profile": {"account_id": player.handle},
                        "rank_tier": player.rank_tier, "plus": player.has_plus},
            "matches": [{"match_id": mid} for mid in player.match_ids],
        }
        atomic_write(player_cache_path(cache_dir, player.handle),
                     json.dumps(doc, sort_keys=True).encode("utf-8"))
    for match_id, record in population.matches.items():
        atomic_write(match_cache_path(cache_dir, match_id),
                     serialize_match(record))
    manifest_path = cache_dir / "manifest.json"
    atomic_write(manifest_path,
                 (json.dumps(population.manifest, indent=2, sort_keys=True)
                  + "\n").encode("utf-8"))


def write_survey_csv(population: SynthPopulation, path: str | Path) -> None:
    import csv

    from .attributes import SURVEY_COLUMNS

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SURVEY_COLUMNS)
        for row in population.survey_rows:
            writer.writerow([
                row.handle, row.raw_gender, row.raw_age,
                "yes" if row.raw_employment else "no",
                row.raw_purchase_frequency,
                *row.big5_scores, row.country,
            ])


# ---------------------------------------------------------------------------
# The committed regression fixture
# ---------------------------------------------------------------------------

FIXTURE_PRIORS: dict[str, tuple[float, ...]] = {
    "gender": (0.12, 0.88),
    "age_bin": (0.30, 0.40, 0.30),
    "occupation": (0.50, 0.50),
    "purchase_habits": (0.20, 0.50, 0.30),
    "openness": (0.34, 0.33, 0.33),
    "conscientiousness": (0.34, 0.33, 0.33),
    "extraversion": (0.34, 0.33, 0.33),
    "agreeableness": (0.34, 0.33, 0.33),
    "neuroticism": (0.34, 0.33, 0.33),
}

# Strong planted signals for protocol exercises. The one-match comparison
# leans on occupation, whose signal lives only in expert (augmentation)
# columns; age carries both aggregate and chat signal for the targeted
# "very young" subgroup.
FIXTURE_CONFIG = SynthConfig(
    n_players=50,
    matches_range=(8, 30),
    priors=FIXTURE_PRIORS,
    numeric_effects=(
        NumericEffect("kills", "age_bin", -0.70),
        NumericEffect("cosmetics_price", "purchase_habits", 0.75),
        NumericEffect("denies", "conscientiousness", 0.60),
        NumericEffect("deaths", "neuroticism", 0.55),
    ),
    rate_effects=(
        RateEffect("wheel_team_msgs", "occupation", 2.0),
        RateEffect("hero_msg_count", "occupation", 1.8),
        RateEffect("chat_slang_count", "age_bin", -3.5),
        RateEffect("chat_provocative_count", "age_bin", -3.0),
        RateEffect("wheel_global_msgs", "extraversion", 1.2),
    ),
    messages_per_match=6.0,
    categorical_effects=(
        CategoricalEffect("hero_gender", "gender", 0.8),
        CategoricalEffect("has_plus", "occupation", 0.7),
    ),
    noise_level=0.3,
    match_noise=0.9,
    seed=20_201_217,
)


def regression_fixture() -> SynthPopulation:
    """The frozen 50-player corpus used by golden-file and protocol tests."""
    return generate_population(FIXTURE_CONFIG)


# Reference class counts at n=484: the published percentages rounded onto
# whole players (every attribute lands within 0.01 points of its source).
_REFERENCE_COUNTS: dict[str, tuple[int, ...]] = {
    "gender": (24, 460),
    "age_bin": (65, 260, 159),
    "occupation": (278, 206),
    "purchase_habits": (51, 296, 137),
    "openness": (93, 118, 273),
    "conscientiousness": (191, 116, 177),
    "extraversion": (229, 102, 153),
    "agreeableness": (101, 94, 289),
    "neuroticism": (259, 93, 132),
}


def table1_reference_labels(seed: int = 484) -> list[AttributeLabels]:
    """A deterministic 484-row label set with the reference class counts.

    Attributes are shuffled independently; this is a distribution stand-in,
    not a joint-dependence model.
    """
    rng = np.random.default_rng(seed)
    columns: dict[str, list[str]] = {}
    for attr, counts in _REFERENCE_COUNTS.items():
        values: list[str] = []
        for cls, count in zip(ATTRIBUTE_SCHEMA[attr], counts):
            values.extend([cls] * count)
        order = rng.permutation(len(values))
        columns[attr] = [values[i] for i in order]
    return [AttributeLabels(**{attr: columns[attr][i] for attr in ATTRIBUTE_SCHEMA})
            for i in range(484)]
