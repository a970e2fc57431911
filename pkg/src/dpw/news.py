"""News engine: near-duplicate clustering, extractive summaries, and the
personalized feed.

Clustering is single-linkage over cosine similarity of term-frequency
vectors (normalized title+body); items connected by pairwise similarity at
or above the threshold share a cluster. Summaries pick whole sentences by
content-word frequency. Feed ranking mixes topic overlap with the reader's
history, teammate suggestions, recency decay, and favorited sources.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from importlib import resources
from typing import Iterable, Mapping, Optional, Sequence

from . import domain
from .errors import NotFoundError, ValidationError
from .store import Store

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)
# sentence boundary: terminal punctuation, whitespace, then an uppercase start
_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+(?=[A-ZÀ-Þ])")


def load_stopwords() -> frozenset[str]:
    text = resources.files("dpw").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    return frozenset(line.strip().lower() for line in text.splitlines() if line.strip())


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def term_frequencies(text: str) -> Counter:
    return Counter(tokenize(text))


def cosine_similarity(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    dot = sum(count * b[term] for term, count in a.items())
    norm = math.sqrt(sum(c * c for c in a.values())) * math.sqrt(sum(c * c for c in b.values()))
    return dot / norm if norm else 0.0


def split_sentences(text: str) -> list[str]:
    stripped = text.strip()
    if not stripped:
        return []
    return [part for part in (_SENTENCE_BREAK.split(stripped)) if part.strip()]


def summarize(item: domain.NewsItem, k: int, stopwords: Optional[frozenset[str]] = None) -> list[str]:
    """Top-k sentences by summed content-word frequency, emitted in document
    order; ties go to the earlier sentence."""
    if k < 1:
        raise ValidationError("summary length must be >= 1", k=k)
    if stopwords is None:
        stopwords = load_stopwords()
    sentences = split_sentences(item.body)
    if not sentences:
        return []
    frequencies = Counter(t for t in tokenize(item.body) if t not in stopwords)
    scored = []
    for position, sentence in enumerate(sentences):
        score = sum(frequencies[t] for t in tokenize(sentence) if t not in stopwords)
        scored.append((-score, position, sentence))
    scored.sort()
    chosen = sorted(position for _, position, _ in scored[:k])
    return [sentences[position] for position in chosen]


@dataclass(frozen=True)
class NewsCluster:
    """A deduplicated story. topics and newest_published_at are derived from
    the members so ranking needs no second lookup."""

    cluster_id: str
    member_ids: tuple[str, ...]
    representative_id: str
    summary: tuple[str, ...]
    topics: frozenset[str] = frozenset()
    newest_published_at: Optional[datetime] = None
    source_ids: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.member_ids:
            raise ValidationError("cluster needs at least one member", cluster=self.cluster_id)
        if self.representative_id not in self.member_ids:
            raise ValidationError("representative must be a member", cluster=self.cluster_id)


def cluster_news(
    items: Sequence[domain.NewsItem],
    sim_threshold: float,
    summary_sentences: int = 3,
    stopwords: Optional[frozenset[str]] = None,
) -> list[NewsCluster]:
    """Partition items into clusters; a pair lands together iff linked by a
    chain of similarities >= sim_threshold. The earliest item (ties by id)
    represents the cluster and supplies the summary."""
    if not items:
        raise ValidationError("cluster_news needs at least one item")
    if not 0.0 <= sim_threshold <= 1.0:
        raise ValidationError("similarity threshold must be in [0,1]", threshold=sim_threshold)
    ids = [item.id for item in items]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate news ids in input")
    if stopwords is None:
        stopwords = load_stopwords()

    vectors = [term_frequencies(f"{item.title} {item.body}") for item in items]
    parent = list(range(len(items)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            if cosine_similarity(vectors[i], vectors[j]) >= sim_threshold:
                union(i, j)

    groups: dict[int, list[domain.NewsItem]] = {}
    for index, item in enumerate(items):
        groups.setdefault(find(index), []).append(item)

    clusters = []
    for members in groups.values():
        members.sort(key=lambda m: (m.published_at, m.id))
        representative = members[0]
        topics: frozenset[str] = frozenset().union(*(m.topics for m in members))
        clusters.append(
            NewsCluster(
                cluster_id=f"nc-{representative.id}",
                member_ids=tuple(m.id for m in members),
                representative_id=representative.id,
                summary=tuple(summarize(representative, summary_sentences, stopwords)),
                topics=topics,
                newest_published_at=max(m.published_at for m in members),
                source_ids=frozenset(m.source_id for m in members),
            )
        )
    clusters.sort(key=lambda c: c.cluster_id)
    return clusters


class FeedReason(str, Enum):
    TOPIC_MATCH = "TOPIC_MATCH"
    TEAM_SUGGESTED = "TEAM_SUGGESTED"
    RECENCY = "RECENCY"
    FAVORITE_SOURCE = "FAVORITE_SOURCE"


@dataclass(frozen=True)
class FeedWeights:
    w_topic: float = 1.0
    w_team: float = 0.5
    w_recency: float = 1.0
    w_favorite: float = 0.5
    half_life_days: float = 7.0

    def __post_init__(self) -> None:
        weights = (self.w_topic, self.w_team, self.w_recency, self.w_favorite)
        if any(w < 0 for w in weights):
            raise ValidationError("feed weights must be >= 0")
        if all(w == 0 for w in weights):
            raise ValidationError("at least one feed weight must be positive")
        if self.half_life_days <= 0:
            raise ValidationError("recency half-life must be > 0")


@dataclass(frozen=True)
class FeedEntry:
    cluster_id: str
    score: float
    reasons: tuple[FeedReason, ...]


def history_topics(user: domain.User, clusters_by_id: Mapping[str, NewsCluster]) -> frozenset[str]:
    """Distinct topics of every cluster the user has read; reads that no
    longer resolve (re-clustered ids) contribute nothing."""
    topics: set[str] = set()
    for event in user.reading_history:
        cluster = clusters_by_id.get(event.cluster_id)
        if cluster is not None:
            topics |= cluster.topics
    return frozenset(topics)


def rank_feed(
    user: domain.User,
    clusters: Sequence[NewsCluster],
    now: datetime,
    weights: FeedWeights,
    suggestions: Iterable[domain.Suggestion] = (),
) -> list[FeedEntry]:
    """Score = wTopic * topic overlap with reading history
            + wTeam   * [a teammate suggested the cluster]
            + wRecency* exp(-ageDays / halfLife)
            + wFavorite*[a member comes from a favorited source];
    ordered by score desc, ties newest first, then cluster id."""
    clusters_by_id = {c.cluster_id: c for c in clusters}
    read_topics = history_topics(user, clusters_by_id)
    suggested = {
        s.cluster_id
        for s in suggestions
        if s.team_id == user.team_id and s.by_user_id != user.id
    }
    favorite_sources = {ref.split(":", 1)[1] for ref in user.favorites if ref.startswith("source:")}

    entries = []
    for cluster in clusters:
        overlap = len(read_topics & cluster.topics)
        is_suggested = cluster.cluster_id in suggested
        newest = cluster.newest_published_at or now
        age_days = max((now - newest).total_seconds(), 0.0) / 86400.0
        recency = math.exp(-age_days / weights.half_life_days)
        has_favorite_source = bool(cluster.source_ids & favorite_sources)

        score = 0.0
        reasons = []
        if weights.w_topic * overlap > 0:
            reasons.append(FeedReason.TOPIC_MATCH)
        score += weights.w_topic * overlap
        if weights.w_team > 0 and is_suggested:
            reasons.append(FeedReason.TEAM_SUGGESTED)
        score += weights.w_team * (1.0 if is_suggested else 0.0)
        if weights.w_recency * recency > 0:
            reasons.append(FeedReason.RECENCY)
        score += weights.w_recency * recency
        if weights.w_favorite > 0 and has_favorite_source:
            reasons.append(FeedReason.FAVORITE_SOURCE)
        score += weights.w_favorite * (1.0 if has_favorite_source else 0.0)

        entries.append((score, newest, cluster.cluster_id, tuple(reasons)))

    entries.sort(key=lambda e: (-e[0], -(e[1].timestamp()), e[2]))
    return [FeedEntry(cluster_id=cid, score=score, reasons=reasons) for score, _, cid, reasons in entries]


def record_read(
    store: Store, user_id: str, cluster_id: str, at: datetime, clusters: Sequence[NewsCluster]
) -> domain.User:
    """Append one read event; the next ranking sees the cluster's topics."""
    if cluster_id not in {c.cluster_id for c in clusters}:
        raise NotFoundError(f"unknown news cluster {cluster_id!r}", cluster=cluster_id)
    user = store.require("user", user_id)
    updated = domain.User(
        id=user.id,
        name=user.name,
        team_id=user.team_id,
        favorites=user.favorites,
        reading_history=user.reading_history + (domain.ReadEvent(cluster_id=cluster_id, at=at),),
        layout=user.layout,
    )
    store.replace_user(updated)
    return updated


def suggest_cluster(
    store: Store, user_id: str, cluster_id: str, at: datetime, clusters: Sequence[NewsCluster]
) -> domain.Suggestion:
    """Mark a cluster as relevant for the suggester's whole team. One row
    per (user, cluster): repeating the action refreshes, not duplicates."""
    if cluster_id not in {c.cluster_id for c in clusters}:
        raise NotFoundError(f"unknown news cluster {cluster_id!r}", cluster=cluster_id)
    user = store.require("user", user_id)
    suggestion = domain.Suggestion(
        id=f"sg-{user_id}-{cluster_id}",
        team_id=user.team_id,
        cluster_id=cluster_id,
        by_user_id=user_id,
        at=at,
    )
    store.upsert("suggestion", suggestion)
    return suggestion


@dataclass(frozen=True)
class PisConfig:
    sim_threshold: float = 0.6
    summary_sentences: int = 3
    weights: FeedWeights = field(default_factory=FeedWeights)


class NewsEngine:
    """Store-facing façade; clustering is recomputed only when the store
    revision moves."""

    def __init__(self, store: Store, config: Optional[PisConfig] = None) -> None:
        self.store = store
        self.config = config or PisConfig()
        self._stopwords = load_stopwords()
        self._cache: Optional[tuple[int, list[NewsCluster]]] = None

    def clusters(self) -> list[NewsCluster]:
        revision = self.store.revision
        if self._cache is not None and self._cache[0] == revision:
            return self._cache[1]
        items = self.store.list("news_item")
        built = (
            cluster_news(items, self.config.sim_threshold, self.config.summary_sentences, self._stopwords)
            if items
            else []
        )
        self._cache = (revision, built)
        return built

    def feed(self, user_id: str, now: datetime) -> list[FeedEntry]:
        user = self.store.require("user", user_id)
        return rank_feed(user, self.clusters(), now, self.config.weights, self.store.list("suggestion"))

    def read(self, user_id: str, cluster_id: str, at: datetime) -> domain.User:
        return record_read(self.store, user_id, cluster_id, at, self.clusters())

    def suggest(self, user_id: str, cluster_id: str, at: datetime) -> domain.Suggestion:
        return suggest_cluster(self.store, user_id, cluster_id, at, self.clusters())
