"""Category probability vectors, Shannon entropy, and entropy-group binning.

Each profile's tweets (those covered by topic vectors) distribute over the
eight thematic categories; the entropy of that distribution places the
profile in one of eight diversity groups. Group boundaries sit at the
entropy of half-integer category counts: a profile spread evenly over k
categories has entropy ln(k), so bins split at ln(1.5), ln(2.5), ...,
ln(7.5).
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .ingest import ProfileTimeline
from .topics import CATEGORIES, TopicCatalog

GROUP_NAMES = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII")
GROUP_BOUNDARIES = tuple(math.log(k + 0.5) for k in range(1, 8))
MAX_ENTROPY = math.log(len(CATEGORIES))
_H_TOLERANCE = 1e-9


class DiversityError(ValueError):
    pass


@dataclass(frozen=True)
class CategoryProbabilityVector:
    profile_id: str
    cp: tuple[float, ...]  # indexed like CATEGORIES, sums to 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.cp, dtype=float)


@dataclass(frozen=True)
class DiversityProfile:
    profile_id: str
    cpv: CategoryProbabilityVector
    entropy_H: float
    group: str


def category_counts(
    timeline: ProfileTimeline, catalog: TopicCatalog, assignments: dict[str, int]
) -> dict[str, int]:
    """Tweet counts per category over the profile's TPV-covered tweets."""
    counts = {c: 0 for c in CATEGORIES}
    for tweet in timeline.tweets:
        topic = assignments.get(tweet.tweet_id)
        if topic is None:
            continue
        counts[catalog.category(topic)] += 1
    return counts


def category_probability(
    timeline: ProfileTimeline, catalog: TopicCatalog, assignments: dict[str, int]
) -> CategoryProbabilityVector:
    counts = category_counts(timeline, catalog, assignments)
    total = sum(counts.values())
    if total == 0:
        raise DiversityError(f"profile {timeline.profile_id} has no TPV-covered tweets")
    return CategoryProbabilityVector(
        profile_id=timeline.profile_id,
        cp=tuple(counts[c] / total for c in CATEGORIES),
    )


def shannon_entropy(cpv: CategoryProbabilityVector | np.ndarray) -> float:
    """Natural-log entropy of the category distribution, with 0*ln(0) = 0."""
    p = cpv.as_array() if isinstance(cpv, CategoryProbabilityVector) else np.asarray(cpv, float)
    nonzero = p[p > 0]
    return float(-(nonzero * np.log(nonzero)).sum())


def assign_group(entropy_H: float) -> str:
    """Entropy-interval group: bins left-closed, top bin closed at ln(8)."""
    if entropy_H < -_H_TOLERANCE or entropy_H > MAX_ENTROPY + _H_TOLERANCE:
        raise DiversityError(f"entropy {entropy_H} outside [0, ln 8]")
    h = min(max(entropy_H, 0.0), MAX_ENTROPY)
    return GROUP_NAMES[bisect_right(GROUP_BOUNDARIES, h)]


def diversity_profile(
    timeline: ProfileTimeline, catalog: TopicCatalog, assignments: dict[str, int]
) -> DiversityProfile:
    cpv = category_probability(timeline, catalog, assignments)
    h = shannon_entropy(cpv)
    return DiversityProfile(
        profile_id=timeline.profile_id, cpv=cpv, entropy_H=h, group=assign_group(h)
    )


def group_partition(
    profiles: dict[str, DiversityProfile],
) -> tuple[dict[str, list[str]], list[tuple[str, float]]]:
    """Disjoint cover of profiles by group, plus sorted (group, H) CDF rows."""
    partition: dict[str, list[str]] = {g: [] for g in GROUP_NAMES}
    for profile_id in sorted(profiles):
        partition[profiles[profile_id].group].append(profile_id)
    cdf_rows: list[tuple[str, float]] = []
    for group in GROUP_NAMES:
        values = sorted(profiles[p].entropy_H for p in partition[group])
        cdf_rows.extend((group, h) for h in values)
    return partition, cdf_rows
