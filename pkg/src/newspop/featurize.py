"""The 72-column news feature vector for one (entity, day, t_p).

Column layout (frozen; ``FEATURE_NAMES`` is the source of truth)::

    signal     0..13   news, news_prev, news_prev_total, news_titles,
                       avg_content, sources, weekday_mon..weekday_sun,
                       is_weekend
    textual   14..33   tfidf_title_0..9, lda_title_0..9
    sentiment 34..49   pos, neg, neu, ratio, diff, subjectivity,
                       tfidf_subj_0..9
    semantic  50..71   entities, tags, tfidf_entity_0..9, tfidf_tag_0..9

All fitted pieces live in a :class:`FeatureContext` built from training
days only.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import CorpusIndex, NewsDoc
from .mentions import feature_span, news_feature_interval
from .topics import LdaConfig, LdaModel, fit_lda, infer_theta
from .vectorize import (
    LATENT_DIM,
    MAX_TERMS,
    DailyDoc,
    SvdProjector,
    TfidfModel,
    fit_svd,
    fit_tfidf,
    project,
    tfidf_matrix,
    tfidf_vector,
    unigrams,
)

WEEKDAYS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")
POLARITIES = ("positive", "negative", "neutral")

FEATURE_NAMES: tuple[str, ...] = (
    ("news", "news_prev", "news_prev_total", "news_titles", "avg_content", "sources")
    + tuple(f"weekday_{d}" for d in WEEKDAYS)
    + ("is_weekend",)
    + tuple(f"tfidf_title_{i}" for i in range(LATENT_DIM))
    + tuple(f"lda_title_{i}" for i in range(LATENT_DIM))
    + ("pos", "neg", "neu", "ratio", "diff", "subjectivity")
    + tuple(f"tfidf_subj_{i}" for i in range(LATENT_DIM))
    + ("entities", "tags")
    + tuple(f"tfidf_entity_{i}" for i in range(LATENT_DIM))
    + tuple(f"tfidf_tag_{i}" for i in range(LATENT_DIM))
)
N_FEATURES = len(FEATURE_NAMES)

GROUPS: dict[str, slice] = {
    "signal": slice(0, 14),
    "textual": slice(14, 34),
    "sentiment": slice(34, 50),
    "semantic": slice(50, 72),
}
GROUP_NAMES = tuple(GROUPS)


def group_columns(groups: Iterable[str]) -> np.ndarray:
    """Sorted column indices for a set of feature groups."""
    groups = set(groups)
    unknown = groups - set(GROUPS)
    if unknown:
        raise ValueError(f"unknown feature groups: {sorted(unknown)}")
    if not groups:
        raise ValueError("at least one feature group is required")
    return np.concatenate([np.arange(N_FEATURES)[GROUPS[g]] for g in GROUP_NAMES if g in groups])


class SentimentLexicon(dict):
    """term -> polarity, terms lowercased."""

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "SentimentLexicon":
        lex = cls()
        for term, pol in pairs:
            term = term.strip().lower()
            pol = pol.strip().lower()
            if pol not in POLARITIES:
                raise ValueError(f"bad polarity {pol!r} for term {term!r}")
            if not term:
                raise ValueError("empty lexicon term")
            if term in lex and lex[term] != pol:
                raise ValueError(f"term {term!r} listed with two polarities")
            lex[term] = pol
        return lex


def load_lexicon(path: str | Path) -> SentimentLexicon:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["term", "polarity"]:
            raise ValueError(f"lexicon header must be 'term,polarity', got {reader.fieldnames}")
        return SentimentLexicon.from_pairs((row["term"], row["polarity"]) for row in reader)


@dataclass(frozen=True)
class FeatureConfig:
    max_terms: int = MAX_TERMS
    latent_dim: int = LATENT_DIM
    svd_seed: int = 0
    lda: LdaConfig = field(default_factory=LdaConfig)


@dataclass(frozen=True)
class TextPipeline:
    tfidf: TfidfModel
    svd: SvdProjector

    def latent(self, tokens: Sequence[str]) -> np.ndarray:
        return project(tfidf_vector(tokens, self.tfidf), self.svd)


@dataclass(frozen=True)
class FeatureContext:
    titles: TextPipeline
    lda: LdaModel | None
    subjective: TextPipeline
    entities: TextPipeline
    tags: TextPipeline
    lexicon: SentimentLexicon
    n_topics: int = 10


@dataclass(frozen=True)
class DayNews:
    """The news of one entity inside the feature interval of ``(day, t_p)``."""

    entity_id: str
    day: dt.date
    t_p: int
    news: tuple[NewsDoc, ...]

    @property
    def daily_doc(self) -> DailyDoc:
        return DailyDoc(self.entity_id, self.day, tuple(d.title for d in self.news))


def collect_news(index: CorpusIndex, entity_id: str, day: dt.date, t_p: int) -> DayNews:
    start, end = news_feature_interval(day, t_p)
    docs = index.docs_between(entity_id, start, end + dt.timedelta(seconds=1))
    return DayNews(entity_id, day, t_p, tuple(docs))


def signal_features(index: CorpusIndex, entity_id: str, day: dt.date, t_p: int) -> np.ndarray:
    fday, end_hour = feature_span(day, t_p)
    prev = fday - dt.timedelta(days=1)
    news = collect_news(index, entity_id, day, t_p).news
    out = np.zeros(14)
    out[0] = len(news)
    out[1] = index.count(entity_id, prev, 0, end_hour)
    out[2] = index.count(entity_id, prev, 0, 24)
    out[3] = sum(1 for d in news if entity_id in d.title_entity_ids)
    out[4] = float(np.mean([len(d.body) for d in news])) if news else 0.0
    out[5] = len({d.source for d in news})
    out[6 + day.weekday()] = 1.0
    out[13] = 1.0 if day.weekday() >= 5 else 0.0
    return out


def subjective_terms(tokens: Sequence[str], lexicon: Mapping[str, str]) -> list[str]:
    return [t for t in tokens if t in lexicon]


def textual_features(daily_doc: DailyDoc, ctx: FeatureContext) -> np.ndarray:
    tokens = daily_doc.tokens()
    latent = ctx.titles.latent(tokens)
    if ctx.lda is None:
        theta = np.full(ctx.n_topics, 1.0 / ctx.n_topics)
    else:
        theta = infer_theta(tokens, ctx.lda)
    return np.concatenate([latent, theta])


def sentiment_counts(words: Sequence[str], lexicon: Mapping[str, str]) -> np.ndarray:
    """pos, neg, neu, (pos+1)/(neg+1), pos-neg, subjective share of all words."""
    pos = sum(1 for w in words if lexicon.get(w) == "positive")
    neg = sum(1 for w in words if lexicon.get(w) == "negative")
    neu = sum(1 for w in words if lexicon.get(w) == "neutral")
    subjectivity = (pos + neg + neu) / len(words) if words else 0.0
    return np.array([pos, neg, neu, (pos + 1) / (neg + 1), pos - neg, subjectivity], dtype=np.float64)


def sentiment_features(daily_doc: DailyDoc, ctx: FeatureContext) -> np.ndarray:
    words = unigrams(daily_doc.text)
    counts = sentiment_counts(words, ctx.lexicon)
    latent = ctx.subjective.latent(subjective_terms(words, ctx.lexicon))
    return np.concatenate([counts, latent])


def entity_tokens(news: Iterable[NewsDoc]) -> list[str]:
    return [e for d in news for e in d.entity_ids]


def tag_tokens(news: Iterable[NewsDoc]) -> list[str]:
    return [t.strip().lower() for d in news for t in d.tags if t.strip()]


def semantic_features(news: Sequence[NewsDoc], ctx: FeatureContext) -> np.ndarray:
    ents = entity_tokens(news)
    tags = tag_tokens(news)
    head = np.array([len(set(ents)), len(set(tags))], dtype=np.float64)
    return np.concatenate([head, ctx.entities.latent(ents), ctx.tags.latent(tags)])


def assemble(
    entity_id: str, day: dt.date, t_p: int, index: CorpusIndex, ctx: FeatureContext
) -> np.ndarray:
    day_news = collect_news(index, entity_id, day, t_p)
    doc = day_news.daily_doc
    x = np.concatenate(
        [
            signal_features(index, entity_id, day, t_p),
            textual_features(doc, ctx),
            sentiment_features(doc, ctx),
            semantic_features(day_news.news, ctx),
        ]
    )
    assert x.shape == (N_FEATURES,)
    return x


def feature_matrix(
    entity_id: str, days: Sequence[dt.date], t_p: int, index: CorpusIndex, ctx: FeatureContext
) -> np.ndarray:
    if not days:
        return np.zeros((0, N_FEATURES))
    return np.vstack([assemble(entity_id, d, t_p, index, ctx) for d in days])


def _fit_pipeline(docs: Sequence[Sequence[str]], config: FeatureConfig) -> TextPipeline:
    tfidf = fit_tfidf(docs, config.max_terms)
    svd = fit_svd(tfidf_matrix(docs, tfidf), rank=config.latent_dim, seed=config.svd_seed)
    return TextPipeline(tfidf, svd)


def fit_context(
    index: CorpusIndex,
    entity_id: str,
    train_days: Sequence[dt.date],
    t_p: int,
    lexicon: SentimentLexicon,
    config: FeatureConfig = FeatureConfig(),
) -> FeatureContext:
    """Fit every vocabulary, IDF table, SVD and topic model on the training days."""
    if not train_days:
        raise ValueError("fit_context needs at least one training day")
    title_docs, subj_docs, ent_docs, tag_docs = [], [], [], []
    for day in train_days:
        day_news = collect_news(index, entity_id, day, t_p)
        doc = day_news.daily_doc
        title_docs.append(doc.tokens())
        subj_docs.append(subjective_terms(unigrams(doc.text), lexicon))
        ent_docs.append(entity_tokens(day_news.news))
        tag_docs.append(tag_tokens(day_news.news))
    titles = _fit_pipeline(title_docs, config)
    lda = None
    if len(titles.tfidf):
        try:
            lda = fit_lda(title_docs, config.lda, vocabulary=titles.tfidf.vocabulary)
        except ValueError:
            lda = None
    return FeatureContext(
        titles=titles,
        lda=lda,
        subjective=_fit_pipeline(subj_docs, config),
        entities=_fit_pipeline(ent_docs, config),
        tags=_fit_pipeline(tag_docs, config),
        lexicon=lexicon,
        n_topics=config.lda.n_topics,
    )


def write_feature_csv(path: str | Path, rows: Iterable[tuple[str, dt.date, np.ndarray]], extra: Sequence[str] = ()) -> None:
    """One row per (entity, day): ``entity,date,<extra...>,<72 feature columns>``.

    ``rows`` yields ``(entity, day, vector)`` or ``(entity, day, vector, extras)``.
    """
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["entity", "date", *extra, *FEATURE_NAMES])
        for row in rows:
            entity, day, vec = row[:3]
            extras = list(row[3]) if len(row) > 3 else []
            w.writerow([entity, day.isoformat(), *extras, *(repr(float(v)) for v in vec)])
