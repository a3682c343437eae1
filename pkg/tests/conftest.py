import json

import pytest

from mission_profiler.ingest import ProfileTimeline, Tweet
from mission_profiler import synth
from mission_profiler.util import canonical_dumps

BASE_TS = 1_600_000_000


def make_tweet(tweet_id, profile_id="p1", text="hello world", ts=BASE_TS,
               is_retweet=False, hashtags=(), urls=(), mentions=0):
    from mission_profiler.ingest import normalize_tweet

    return Tweet(
        tweet_id=str(tweet_id),
        profile_id=profile_id,
        text_raw=text,
        text_norm=normalize_tweet(text),
        timestamp=ts,
        is_retweet=is_retweet,
        hashtags=tuple(hashtags),
        urls=tuple(urls),
        mentions_count=mentions,
    )


def make_timeline(profile_id, texts=None, tweets=None, metadata=None, start_ts=BASE_TS, step=3600):
    if tweets is None:
        tweets = [
            make_tweet(f"{profile_id}-{i}", profile_id, text, start_ts + i * step)
            for i, text in enumerate(texts or [])
        ]
    return ProfileTimeline(profile_id=profile_id, tweets=tuple(tweets), metadata=metadata)


def write_tweet_lines(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(canonical_dumps(row) + "\n")


def tweet_row(tweet_id, profile_id, text="ten tokens of text a b c d e f g", ts=BASE_TS, **kw):
    row = {
        "tweet_id": str(tweet_id),
        "profile_id": profile_id,
        "text": text,
        "created_at": ts,
        "is_retweet": False,
        "hashtags": [],
        "urls": [],
        "mentions": 0,
    }
    row.update(kw)
    return row


@pytest.fixture(scope="session")
def acceptance_bundle(tmp_path_factory):
    """Seed-42 synthetic bundle: 100 on-mission + 100 genuine profiles."""
    out = tmp_path_factory.mktemp("bundle42")
    specs = synth.default_specs(n_on_mission=100, n_genuine=100)
    bundle = synth.generate(specs, K=20, seed=42)
    paths = synth.write_bundle(bundle, out)
    config = {
        "tweets": str(paths["tweets"]),
        "profiles": str(paths["profiles"]),
        "tpvs": str(paths["tpvs"]),
        "K": 20,
        "toxicity_backend": "file",
        "toxicity_path": str(paths["toxicity"]),
        "labels": str(paths["labels"]),
        "detect_group": "VII",
        "seed": 42,
    }
    config_path = out / "config.json"
    config_path.write_text(json.dumps(config, indent=1))
    return {"bundle": bundle, "paths": paths, "config": config, "config_path": config_path, "dir": out}
