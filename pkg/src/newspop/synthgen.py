"""Synthetic news + social corpora with a planted news -> popularity link.

Per entity and day a bursty process draws the news volume ``V``. News is
published in the morning (hours 0-11), so for ``t_p >= 12`` the count of
news before ``t_p`` equals ``V``. The daily social level is::

    L = baseline + scale * (lam * V + (1 - lam) * V')

where ``V'`` is an independent draw of the same volume process plus a
uniform [0, 1) jitter (so noisy levels rarely tie), and hourly
mentions are ``round(L * diurnal[h])``. With ``lam = 1`` the label at
``t_p = 12`` is a deterministic, monotone function of the news count;
with ``lam = 0`` the news carries no information about popularity.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .backtest import date_range
from .labeling import fit_threshold
from .mentions import TP_GRID

FIRST_NAMES = ("Ana", "Rui", "Marta", "Tiago", "Ines", "Jorge", "Paula", "Nuno", "Sofia", "Bruno")
LAST_NAMES = ("Costa", "Moreira", "Almeida", "Ferraz", "Lobo", "Serrano", "Pinheiro", "Queiroz", "Valente", "Barros")
SYLLABLES = ("ba", "ko", "ri", "mu", "ta", "le", "no", "vi", "sa", "de", "po", "gu", "fe", "ji", "ra", "zo")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_entities: int = 3
    start: dt.date = dt.date(2013, 1, 1)
    months: int = 30
    signal_strength: float = 1.0
    base_news: float = 2.0
    burst_prob: float = 0.08
    burst_mean: float = 5.0
    burst_decay: float = 0.5
    vocab_size: int = 300
    n_text_topics: int = 6
    title_words: tuple[int, int] = (4, 7)
    n_sources: int = 12
    n_tags: int = 25
    n_cooccurring: int = 30
    lexicon_per_polarity: int = 12
    lexicon_rate: float = 0.3
    lexicon_signal: float = 0.0
    baseline_mentions: float = 40.0
    mention_scale: float = 25.0

    def __post_init__(self):
        if not 0.0 <= self.signal_strength <= 1.0:
            raise ValueError("signal_strength must lie in [0, 1]")
        if self.months < 26:
            raise ValueError("synthetic corpora need at least 26 months (24 training + 2 test)")
        if self.start.day != 1:
            raise ValueError("start must be the first day of a month")

    @property
    def end(self) -> dt.date:
        m = self.start.year * 12 + self.start.month - 1 + self.months
        return dt.date(m // 12, m % 12 + 1, 1) - dt.timedelta(days=1)


# hour weights of news publication (hours 0-11) and of social activity (0-23)
NEWS_HOURS = np.array([1, 1, 1, 1, 2, 3, 5, 8, 9, 8, 6, 5], dtype=float)
DIURNAL = np.array([2, 1, 1, 1, 1, 2, 3, 4, 5, 5, 5, 5, 6, 6, 5, 5, 5, 5, 6, 7, 7, 6, 4, 3], dtype=float)
NEWS_HOURS /= NEWS_HOURS.sum()
DIURNAL /= DIURNAL.sum()


@dataclass
class SynthCorpus:
    news_jsonl: str
    social_csv: str
    registry_json: str
    lexicon_csv: str
    manifest_json: str

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, text in (
            ("news.jsonl", self.news_jsonl),
            ("social.csv", self.social_csv),
            ("registry.json", self.registry_json),
            ("lexicon.csv", self.lexicon_csv),
            ("manifest.json", self.manifest_json),
        ):
            p = out / name
            p.write_text(text, encoding="utf-8")
            paths[name] = p
        return paths


def _words(rng: np.random.Generator, n: int, taken: set[str]) -> list[str]:
    out = []
    while len(out) < n:
        w = "".join(rng.choice(SYLLABLES, size=int(rng.integers(2, 4))))
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


def volume_process(rng: np.random.Generator, n_days: int, cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """Daily news counts and the underlying burst level."""
    level = np.zeros(n_days)
    burst = 0.0
    for d in range(n_days):
        burst *= cfg.burst_decay
        if rng.random() < cfg.burst_prob:
            burst += rng.exponential(cfg.burst_mean)
        level[d] = burst
    return rng.poisson(cfg.base_news + level), level


def hourly_mentions(daily_level: float) -> np.ndarray:
    return np.rint(daily_level * DIURNAL).astype(np.int64)


def generate(cfg: SynthConfig = SynthConfig()) -> SynthCorpus:
    rng = np.random.default_rng(cfg.seed)
    days = date_range(cfg.start, cfg.end)
    n_days = len(days)
    taken: set[str] = set()

    vocab = _words(rng, cfg.vocab_size, taken)
    lex_terms = {p: _words(rng, cfg.lexicon_per_polarity, taken) for p in ("positive", "negative", "neutral")}
    sources = [f"Outlet {i:02d}" for i in range(cfg.n_sources)]
    tag_pool = [" ".join(_words(rng, 2, taken)) for _ in range(cfg.n_tags)]
    cooc = [f"x{i:03d}" for i in range(cfg.n_cooccurring)]

    # topic-word distributions over the shared vocabulary
    ranks = np.arange(1, cfg.vocab_size + 1, dtype=float)
    topics = []
    for _ in range(cfg.n_text_topics):
        perm = rng.permutation(cfg.vocab_size)
        weights = np.empty(cfg.vocab_size)
        weights[perm] = 1.0 / ranks
        topics.append(weights / weights.sum())

    names = [(FIRST_NAMES[i % len(FIRST_NAMES)], LAST_NAMES[(3 * i + 1) % len(LAST_NAMES)]) for i in range(cfg.n_entities)]
    registry = [
        {"id": f"e{i + 1}", "canonical": f"{first} {last}", "surface_forms": [f"{first} {last}", last]}
        for i, (first, last) in enumerate(names)
    ]

    news_lines: list[tuple[str, str]] = []
    social_rows: list[tuple[str, str, int, int]] = []
    truth: dict[str, dict] = {}
    lam = cfg.signal_strength
    for ent in registry:
        eid = ent["id"]
        erng = np.random.default_rng([cfg.seed, int(eid[1:])])
        volume, burst = volume_process(erng, n_days, cfg)
        nrng = np.random.default_rng([cfg.seed, int(eid[1:]), 7])
        noise, _ = volume_process(nrng, n_days, cfg)
        # continuous jitter keeps the noise-driven popularity free of heavy ties
        noise = noise + nrng.random(n_days)
        mix = erng.dirichlet(np.full(cfg.n_text_topics, 0.5))
        levels = cfg.baseline_mentions + cfg.mention_scale * (lam * volume + (1 - lam) * noise)
        n = 0
        for d, day in enumerate(days):
            for _ in range(int(volume[d])):
                n += 1
                hour = int(erng.choice(12, p=NEWS_HOURS))
                ts = dt.datetime(day.year, day.month, day.day, hour, int(erng.integers(60)), int(erng.integers(60)))
                topic = topics[int(erng.choice(cfg.n_text_topics, p=mix))]
                words = list(erng.choice(vocab, size=int(erng.integers(cfg.title_words[0], cfg.title_words[1] + 1)), p=topic))
                if erng.random() < cfg.lexicon_rate:
                    pol = ("positive", "negative", "neutral")[int(erng.integers(3))]
                    words.insert(int(erng.integers(len(words) + 1)), str(erng.choice(lex_terms[pol])))
                if cfg.lexicon_signal > 0 and burst[d] > cfg.burst_mean / 2 and erng.random() < cfg.lexicon_signal:
                    words.insert(int(erng.integers(len(words) + 1)), str(erng.choice(lex_terms["negative"])))
                in_title = erng.random() < 0.8
                form = ent["surface_forms"][int(erng.integers(2))]
                if in_title:
                    words.insert(int(erng.integers(len(words) + 1)), form)
                title = " ".join(words)
                body_words = list(erng.choice(vocab, size=int(erng.integers(20, 120)), p=topic))
                body = " ".join(body_words)
                if not in_title:
                    body = f"{form} {body}"
                others = [str(c) for c in erng.choice(cooc, size=int(erng.integers(0, 3)), replace=False)]
                tags = [str(t) for t in erng.choice(tag_pool, size=int(erng.integers(1, 3)), replace=False)]
                rec = {
                    "id": f"{eid}-{n:06d}",
                    "timestamp": ts.strftime("%Y-%m-%dT%H:%M:%SZ"),
                    "source": str(erng.choice(sources)),
                    "title": title,
                    "body": body,
                    "tags": tags,
                    "entities": [eid, *others],
                    "title_entities": [eid] if in_title else [],
                }
                news_lines.append((rec["timestamp"], json.dumps(rec, sort_keys=True, ensure_ascii=False)))
            for h, c in enumerate(hourly_mentions(levels[d])):
                if c:
                    social_rows.append((eid, day.isoformat(), h, int(c)))

        # oracle labels at k = 0.5 from the planted signal alone
        expected_noise = float(noise.mean())
        per_tp = {}
        for t_p in TP_GRID:
            if t_p == 0:
                signal = np.concatenate([[0], volume[:-1]])
            else:
                # all news is published before noon
                signal = volume if t_p >= 12 else None
            realized = np.array([hourly_mentions(levels[d])[t_p:].sum() for d in range(n_days)])
            delta = fit_threshold(realized, 0.5).delta
            if signal is None:
                per_tp[str(t_p)] = {"delta": delta, "bayes_label": None}
                continue
            lvl = cfg.baseline_mentions + cfg.mention_scale * (lam * signal + (1 - lam) * expected_noise)
            expected = np.array([hourly_mentions(x)[t_p:].sum() for x in lvl])
            per_tp[str(t_p)] = {"delta": delta, "bayes_label": (expected > delta).astype(int).tolist()}
        truth[eid] = {
            "volume": volume.astype(int).tolist(),
            "noise_volume": [round(float(x), 6) for x in noise],
            "daily_level": [round(float(x), 6) for x in levels],
            "k_0.5": per_tp,
        }

    news_lines.sort()
    news_jsonl = "".join(line + "\n" for _, line in news_lines)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["entity_id", "date", "hour", "count"])
    w.writerows(sorted(social_rows))
    social_csv = buf.getvalue()

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["term", "polarity"])
    for pol in ("positive", "negative", "neutral"):
        for term in lex_terms[pol]:
            w.writerow([term, pol])
    lexicon_csv = buf.getvalue()

    params = asdict(cfg)
    params["start"] = cfg.start.isoformat()
    params["end"] = cfg.end.isoformat()
    params["title_words"] = list(cfg.title_words)
    manifest = {"config": params, "days": [d.isoformat() for d in days], "entities": truth}
    return SynthCorpus(
        news_jsonl=news_jsonl,
        social_csv=social_csv,
        registry_json=json.dumps(registry, indent=2, sort_keys=True) + "\n",
        lexicon_csv=lexicon_csv,
        manifest_json=json.dumps(manifest, sort_keys=True) + "\n",
    )
