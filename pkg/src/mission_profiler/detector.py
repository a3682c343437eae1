"""On-mission profile detection.

Each profile's mean topic vector, normalized by the corpus-wide topic
average, yields a topic label (its predominant narrative). Profiles in a
diversity group sharing a label form clusters; clusters that are both
large enough and anchored on a sufficiently toxic topic are designated
on-mission. Friend and retweet overlap within clusters is reported as
supporting evidence, alongside the spacing of each profile's top three
topic weights.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .ingest import ProfileMetadata
from .topics import TopicAggregate, TopicCatalog

EPSILON = 1e-12
ON_MISSION = "on_mission"
NOT_ON_MISSION = "not_on_mission"

DEFAULT_MIN_CLUSTER = 3
DEFAULT_TOX_PERCENTILE = 75.0


@dataclass(frozen=True)
class NormalizedTPV:
    profile_id: str
    ntpv: np.ndarray


@dataclass(frozen=True)
class TopicLabelAssignment:
    profile_id: str
    topic_label: int
    label_category: str
    label_median_toxicity: float | None


@dataclass
class OverlapEvidence:
    friend_overlap: float | None
    shared_retweet_ratio: float | None
    pair_shared_friend_counts: list[int] | None


@dataclass
class Cluster:
    cluster_id: str
    topic_label: int
    members: list[str]
    topic_median_toxicity: float | None
    on_mission: bool
    overlap: OverlapEvidence | None = None


@dataclass
class MissionDesignation:
    profile_id: str
    label: str  # on_mission | not_on_mission
    cluster_id: str | None
    evidence: dict = field(default_factory=dict)


@dataclass
class AgreementReport:
    kappa: float
    n_items: int
    n_raters: int
    n_categories: int


def global_topic_average(
    tpvs, n_profiles: int, per_tweet_mean: bool = False
) -> np.ndarray:
    """Elementwise sum of all tweet topic vectors over the profile count.

    per_tweet_mean=True divides by the tweet count instead, removing the
    dependence on tweets-per-profile.
    """
    tpvs = list(tpvs)
    if not tpvs:
        raise ValueError("no topic vectors")
    if n_profiles < 1:
        raise ValueError("profile count must be >= 1")
    total = np.sum(np.stack(tpvs), axis=0)
    denom = len(tpvs) if per_tweet_mean else n_profiles
    avg = total / denom
    zeros = avg == 0.0
    if np.any(zeros):
        warnings.warn(
            f"{int(zeros.sum())} topics have zero global average; floored to {EPSILON}",
            stacklevel=2,
        )
        avg = np.where(zeros, EPSILON, avg)
    return avg


def profile_mean_tpv(profile_tpvs) -> np.ndarray:
    vectors = list(profile_tpvs)
    if not vectors:
        raise ValueError("profile has no topic vectors")
    return np.mean(np.stack(vectors), axis=0)


def ntpv(profile_tpvs, global_avg: np.ndarray, profile_id: str = "") -> NormalizedTPV:
    """Profile mean topic vector divided elementwise by the global average."""
    mean = profile_mean_tpv(profile_tpvs)
    return NormalizedTPV(profile_id=profile_id, ntpv=mean / global_avg)


def assign_topic_labels(
    ntpvs: dict[str, NormalizedTPV],
    catalog: TopicCatalog,
    aggregates: dict[int, TopicAggregate],
) -> dict[str, TopicLabelAssignment]:
    labels = {}
    for profile_id in sorted(ntpvs):
        topic = int(np.argmax(ntpvs[profile_id].ntpv))
        agg = aggregates.get(topic)
        labels[profile_id] = TopicLabelAssignment(
            profile_id=profile_id,
            topic_label=topic,
            label_category=catalog.category(topic),
            label_median_toxicity=agg.median_toxicity if agg else None,
        )
    return labels


def toxicity_threshold(
    aggregates: dict[int, TopicAggregate],
    tox_gate: tuple[str, float] = ("percentile", DEFAULT_TOX_PERCENTILE),
) -> float:
    """Resolve the toxicity gate to an absolute threshold.

    ("percentile", p) takes the p-th percentile of all non-null topic
    median toxicities; ("absolute", x) uses x directly.
    """
    kind, value = tox_gate
    if kind == "absolute":
        return float(value)
    if kind != "percentile":
        raise ValueError(f"unknown toxicity gate {kind!r}")
    medians = [a.median_toxicity for a in aggregates.values() if a.median_toxicity is not None]
    if not medians:
        raise ValueError("no topic has a median toxicity; cannot derive a percentile gate")
    return float(np.percentile(medians, value))


def top3_gap(weights: np.ndarray) -> tuple[float, float] | None:
    """Gaps between the top-1/top-2 and top-2/top-3 weights, or None if
    fewer than three topics carry mass."""
    w = np.asarray(weights, dtype=float)
    if int(np.count_nonzero(w)) < 3:
        return None
    top = np.sort(w)[::-1][:3]
    return float(top[0] - top[1]), float(top[1] - top[2])


def overlap_evidence(
    members: list[str], metadata: dict[str, ProfileMetadata | None]
) -> OverlapEvidence:
    """Friendship and retweet overlap within a cluster.

    friend_overlap is the fraction of member pairs connected as friends
    (either direction); shared_retweet_ratio is the fraction of members
    sharing at least one retweeted id with another member. Both are None
    when no member carries the underlying data.
    """
    friends = {
        m: set(meta.friends_ids)
        for m in members
        if (meta := metadata.get(m)) is not None and meta.friends_ids is not None
    }
    retweets = {
        m: set(meta.retweeted_ids)
        for m in members
        if (meta := metadata.get(m)) is not None and meta.retweeted_ids is not None
    }

    friend_overlap = None
    pair_shared: list[int] | None = None
    if friends:
        pairs = 0
        connected = 0
        pair_shared = []
        ordered = sorted(members)
        for i, a in enumerate(ordered):
            for b in ordered[i + 1:]:
                if a not in friends and b not in friends:
                    continue
                pairs += 1
                if b in friends.get(a, ()) or a in friends.get(b, ()):
                    connected += 1
                if a in friends and b in friends:
                    pair_shared.append(len(friends[a] & friends[b]))
        friend_overlap = connected / pairs if pairs else None

    shared_retweet_ratio = None
    if retweets:
        sharing = 0
        for m in members:
            mine = retweets.get(m)
            if mine is None:
                continue
            others = set().union(*(retweets[o] for o in retweets if o != m)) if len(retweets) > 1 else set()
            if mine & others:
                sharing += 1
        shared_retweet_ratio = sharing / len(members)

    return OverlapEvidence(friend_overlap, shared_retweet_ratio, pair_shared)


def detect_clusters(
    group: list[str],
    labels: dict[str, TopicLabelAssignment],
    aggregates: dict[int, TopicAggregate],
    min_cluster: int = DEFAULT_MIN_CLUSTER,
    tox_gate: tuple[str, float] = ("percentile", DEFAULT_TOX_PERCENTILE),
    metadata: dict[str, ProfileMetadata | None] | None = None,
    ntpvs: dict[str, NormalizedTPV] | None = None,
) -> tuple[list[Cluster], dict[str, MissionDesignation]]:
    """Group profiles by shared topic label and designate on-mission members.

    A cluster is on-mission when it has at least min_cluster members and
    its label topic's median toxicity clears the gate; every profile in
    the group receives exactly one designation.
    """
    if not group:
        raise ValueError("empty profile group")
    threshold = toxicity_threshold(aggregates, tox_gate)

    by_label: dict[int, list[str]] = {}
    for profile_id in sorted(group):
        if profile_id not in labels:
            raise KeyError(f"profile {profile_id} has no topic label")
        by_label.setdefault(labels[profile_id].topic_label, []).append(profile_id)

    clusters: list[Cluster] = []
    designations: dict[str, MissionDesignation] = {}
    ordered = sorted(by_label.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    for topic_label, members in ordered:
        tox = aggregates[topic_label].median_toxicity if topic_label in aggregates else None
        on_mission = len(members) >= min_cluster and tox is not None and tox >= threshold
        cluster = Cluster(
            cluster_id=f"t{topic_label}",
            topic_label=topic_label,
            members=members,
            topic_median_toxicity=tox,
            on_mission=on_mission,
        )
        if metadata is not None:
            cluster.overlap = overlap_evidence(members, metadata)
        clusters.append(cluster)
        for profile_id in members:
            gaps = None
            if ntpvs is not None and profile_id in ntpvs:
                gaps = top3_gap(ntpvs[profile_id].ntpv)
            designations[profile_id] = MissionDesignation(
                profile_id=profile_id,
                label=ON_MISSION if on_mission else NOT_ON_MISSION,
                cluster_id=cluster.cluster_id,
                evidence={
                    "cluster_size": len(members),
                    "topic_median_tox": tox,
                    "friend_overlap": cluster.overlap.friend_overlap if cluster.overlap else None,
                    "shared_retweet_ratio": cluster.overlap.shared_retweet_ratio if cluster.overlap else None,
                    "top3_gaps": list(gaps) if gaps else None,
                },
            )
    return clusters, designations


def fleiss_kappa(ratings: list[list]) -> AgreementReport:
    """Chance-corrected agreement for a fixed rater count per item.

    ratings is an items x raters matrix of category labels. Kappa is 1 on
    unanimous matrices and near 0 for independent uniform raters.
    """
    if not ratings:
        raise ValueError("no rating rows")
    n_raters = len(ratings[0])
    if n_raters < 2:
        raise ValueError("need at least 2 raters")
    if any(len(row) != n_raters for row in ratings):
        raise ValueError("every item must be rated by the same number of raters")

    categories = sorted({str(c) for row in ratings for c in row})
    cat_index = {c: i for i, c in enumerate(categories)}
    n_items = len(ratings)
    counts = np.zeros((n_items, len(categories)), dtype=float)
    for i, row in enumerate(ratings):
        for cell in row:
            counts[i, cat_index[str(cell)]] += 1

    p_item = ((counts ** 2).sum(axis=1) - n_raters) / (n_raters * (n_raters - 1))
    p_bar = float(p_item.mean())
    p_cat = counts.sum(axis=0) / (n_items * n_raters)
    p_expected = float((p_cat ** 2).sum())
    if p_expected >= 1.0:
        kappa = 1.0  # single observed category: agreement is trivially perfect
    else:
        kappa = (p_bar - p_expected) / (1.0 - p_expected)
    return AgreementReport(
        kappa=float(kappa),
        n_items=n_items,
        n_raters=n_raters,
        n_categories=len(categories),
    )
