"""End-to-end pipeline: ingest -> score -> topics -> group -> metrics ->
detect -> classify -> report.

Stages write under out_dir/<stage>/ with a manifest recording the config
hash and input content hashes; a rerun with matching hashes reuses the
cached outputs, and resuming into an out dir written by a different
config aborts rather than mixing artifacts. Every output file embeds the
config hash. All randomness derives from the single top-level seed.
"""
from __future__ import annotations

import csv
import json
import math
import os
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import classifier, detector, diversity, features, metrics, scores, topics
from .ingest import Corpus, load_corpus, load_timelines, save_corpus
from .util import canonical_dumps, derive_seed, read_json, sha256_file, sha256_text, write_json

STAGES = (
    "ingest", "score", "topics", "group", "metrics", "detect", "features",
    "classify", "report",
)

EXIT_CODES = {
    "config": 2,
    "stale-cache": 3,
    "lock": 4,
    "ingest": 10,
    "score": 11,
    "topics": 12,
    "group": 13,
    "metrics": 14,
    "detect": 15,
    "features": 16,
    "classify": 17,
    "report": 18,
}


class PipelineError(Exception):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage {stage}: {message}")

    @property
    def exit_code(self) -> int:
        return EXIT_CODES.get(self.stage, 1)


class StaleCacheError(PipelineError):
    def __init__(self, stage: str, message: str):
        super().__init__(stage, message)
        self.stage = "stale-cache"


def parse_tox_gate(gate: str) -> tuple[str, float]:
    """Parse 'pNN' (percentile) or 'abs:X' (absolute) gate syntax."""
    try:
        if gate.startswith("abs:"):
            return ("absolute", float(gate[4:]))
        if gate.startswith("p"):
            return ("percentile", float(gate[1:]))
    except ValueError:
        pass
    raise PipelineError("config", f"bad tox gate {gate!r}; expected pNN or abs:X")


@dataclass
class RunConfig:
    tweets: str
    profiles: str | None = None
    tpvs: str | None = None
    use_baseline_topics: bool = False
    catalog: str | None = None
    K: int = 200
    toxicity_backend: str = "file"  # none | mock | file | http
    toxicity_path: str | None = None
    mock_toxicity_value: float = 0.5
    bot_backend: str = "none"  # none | mock | file
    bot_path: str | None = None
    labels: str | None = None  # ground-truth labels; falls back to designations
    detect_group: str = "VIII"
    min_cluster: int = 3
    tox_gate: str = "p75"  # p<percentile> or abs:<value>
    sample_n: int = 100
    seed: int = 42
    strict: bool = False

    def validate(self) -> None:
        if not Path(self.tweets).exists():
            raise PipelineError("config", f"tweets file not found: {self.tweets}")
        if self.profiles and not Path(self.profiles).exists():
            raise PipelineError("config", f"profiles file not found: {self.profiles}")
        if not self.use_baseline_topics:
            if not self.tpvs:
                raise PipelineError("config", "either tpvs or use_baseline_topics is required")
            if not Path(self.tpvs).exists():
                raise PipelineError("config", f"tpv file not found: {self.tpvs}")
        if self.catalog and not Path(self.catalog).exists():
            raise PipelineError("config", f"catalog file not found: {self.catalog}")
        if self.toxicity_backend not in ("none", "mock", "file", "http"):
            raise PipelineError("config", f"unknown toxicity backend {self.toxicity_backend!r}")
        if self.toxicity_backend == "file" and not self.toxicity_path:
            raise PipelineError("config", "toxicity_backend 'file' needs toxicity_path")
        if self.bot_backend not in ("none", "mock", "file"):
            raise PipelineError("config", f"unknown bot backend {self.bot_backend!r}")
        if self.detect_group not in diversity.GROUP_NAMES:
            raise PipelineError("config", f"unknown entropy group {self.detect_group!r}")
        self.parse_tox_gate()

    def parse_tox_gate(self) -> tuple[str, float]:
        return parse_tox_gate(self.tox_gate)

    def as_dict(self) -> dict:
        return dict(self.__dict__)

    def config_hash(self) -> str:
        return sha256_text(canonical_dumps(self.as_dict()))

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        payload = read_json(path)
        try:
            return cls(**payload)
        except TypeError as exc:
            raise PipelineError("config", f"bad config file: {exc}") from exc


class Pipeline:
    def __init__(self, config: RunConfig, out_dir: str | Path):
        config.validate()
        self.config = config
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.hash = config.config_hash()
        self.warnings: list[str] = []

    # -- stage cache plumbing ------------------------------------------------

    def _stage_dir(self, stage: str) -> Path:
        d = self.out / stage
        d.mkdir(exist_ok=True)
        return d

    def _manifest_path(self, stage: str) -> Path:
        return self._stage_dir(stage) / "manifest.json"

    def _cached(self, stage: str, inputs: dict[str, str]) -> bool:
        path = self._manifest_path(stage)
        if not path.exists():
            return False
        manifest = read_json(path)
        if manifest.get("config_hash") != self.hash:
            raise StaleCacheError(
                stage,
                "out dir holds artifacts from a different config; use a fresh out dir",
            )
        if manifest.get("inputs") != inputs:
            return False
        return all((self._stage_dir(stage) / name).exists() for name in manifest.get("outputs", []))

    def _write_manifest(self, stage: str, inputs: dict[str, str], outputs: list[str], extra: dict | None = None) -> None:
        payload = {
            "stage": stage,
            "config_hash": self.hash,
            "inputs": inputs,
            "outputs": sorted(outputs),
        }
        if extra:
            payload.update(extra)
        write_json(self._manifest_path(stage), payload)

    def _input_hashes(self, paths: dict[str, str | Path]) -> dict[str, str]:
        return {name: sha256_file(p) for name, p in sorted(paths.items())}

    def _warn(self, stage: str, message: str) -> None:
        self.warnings.append(f"{stage}: {message}")
        warnings.warn(f"{stage}: {message}", stacklevel=3)

    # -- stages ----------------------------------------------------------------

    def run(self) -> dict:
        """Execute all stages; returns the report payload."""
        lock = self.out / ".lock"
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise PipelineError("lock", f"another run holds {lock} (remove if stale)")
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            corpus_path = self.stage_ingest()
            tox_path, bot_path = self.stage_score(corpus_path)
            tpv_path, catalog_path, agg_path = self.stage_topics(corpus_path, tox_path)
            groups_path = self.stage_group(corpus_path, tpv_path, catalog_path)
            metrics_path = self.stage_metrics(corpus_path, tox_path)
            detect_path = self.stage_detect(corpus_path, tpv_path, catalog_path, agg_path, groups_path)
            features_path = self.stage_features(corpus_path, tpv_path, catalog_path, tox_path, metrics_path)
            classify_paths = self.stage_classify(features_path, detect_path, groups_path)
            return self.stage_report(
                corpus_path, tox_path, bot_path, tpv_path, groups_path,
                metrics_path, detect_path, classify_paths,
            )
        finally:
            lock.unlink(missing_ok=True)

    def stage_ingest(self) -> Path:
        stage = "ingest"
        out_path = self._stage_dir(stage) / "corpus.bin"
        inputs = {"tweets": self.config.tweets}
        if self.config.profiles:
            inputs["profiles"] = self.config.profiles
        hashes = self._input_hashes(inputs)
        if self._cached(stage, hashes):
            return out_path
        try:
            corpus = load_timelines(self.config.tweets, self.config.profiles, strict=self.config.strict)
        except Exception as exc:
            raise PipelineError(stage, str(exc)) from exc
        if not corpus.profiles:
            self._warn(stage, "corpus is empty after filtering")
        save_corpus(corpus, out_path)
        self._write_manifest(stage, hashes, ["corpus.bin"], {"stats": corpus.ingest_stats.as_dict()})
        return out_path

    def stage_score(self, corpus_path: Path) -> tuple[Path, Path | None]:
        stage = "score"
        cfg = self.config
        out_tox = self._stage_dir(stage) / "toxicity_cache.jsonl"
        out_bots = self._stage_dir(stage) / "bot_cache.jsonl"
        inputs = {"corpus": corpus_path}
        if cfg.toxicity_backend == "file":
            inputs["toxicity_source"] = cfg.toxicity_path
        if cfg.bot_backend == "file" and cfg.bot_path:
            inputs["bot_source"] = cfg.bot_path
        hashes = self._input_hashes(inputs)
        if self._cached(stage, hashes):
            return out_tox, (out_bots if out_bots.exists() else None)
        corpus = load_corpus(corpus_path)
        cache = scores.ScoreCache()
        try:
            if cfg.toxicity_backend == "file":
                cache = _load_score_source(cfg.toxicity_path)
            if cfg.toxicity_backend == "mock":
                scores.score_toxicity(
                    corpus, scores.MockToxicityClient(cfg.mock_toxicity_value),
                    cache=cache, backoff_base=0.0,
                )
            elif cfg.toxicity_backend == "http":
                scores.score_toxicity(corpus, scores.HTTPToxicityClient(), cache=cache)
        except scores.BackendUnavailable as exc:
            cache.save(out_tox)  # keep the partial cache for resumption
            raise PipelineError(stage, f"backend unavailable: {exc}") from exc
        except (OSError, ValueError) as exc:
            raise PipelineError(stage, str(exc)) from exc
        unscored = sum(1 for t in corpus.all_tweets() if t.tweet_id not in cache.toxicity)
        if unscored:
            self._warn(stage, f"{unscored} tweets have no toxicity score")
        cache.save(out_tox)
        outputs = ["toxicity_cache.jsonl"]

        bot_path: Path | None = None
        if cfg.bot_backend != "none":
            bot_cache = scores.ScoreCache()
            if cfg.bot_backend == "file" and cfg.bot_path:
                bot_cache = _load_score_source(cfg.bot_path)
            elif cfg.bot_backend == "mock":
                scores.score_bots(corpus, scores.MockBotClient(), cache=bot_cache)
            bot_cache.save(out_bots)
            outputs.append("bot_cache.jsonl")
            bot_path = out_bots
        self._write_manifest(stage, hashes, outputs)
        return out_tox, bot_path

    def stage_topics(self, corpus_path: Path, tox_path: Path) -> tuple[Path, Path, Path]:
        stage = "topics"
        cfg = self.config
        d = self._stage_dir(stage)
        out_tpv, out_catalog, out_agg = d / "tpvs.jsonl", d / "catalog.tsv", d / "aggregates.json"
        inputs = {"corpus": corpus_path, "toxicity": tox_path}
        if cfg.tpvs:
            inputs["tpvs"] = cfg.tpvs
        if cfg.catalog:
            inputs["catalog"] = cfg.catalog
        hashes = self._input_hashes(inputs)
        if self._cached(stage, hashes):
            return out_tpv, out_catalog, out_agg
        corpus = load_corpus(corpus_path)
        try:
            if cfg.use_baseline_topics:
                tpvs = topics.baseline_topic_assigner(
                    corpus, cfg.K, derive_seed(cfg.seed, "topics", "baseline")
                )
            else:
                tpvs = topics.load_tpvs(cfg.tpvs, cfg.K)
            catalog = topics.TopicCatalog.load(cfg.catalog) if cfg.catalog else topics.TopicCatalog.demo(cfg.K)
            if catalog.K != cfg.K:
                raise topics.CatalogError(f"catalog has K={catalog.K}, config has K={cfg.K}")
        except (topics.TPVError, topics.CatalogError, OSError) as exc:
            raise PipelineError(stage, str(exc)) from exc
        known_ids = {t.tweet_id for t in corpus.all_tweets()}
        orphans = [tid for tid in tpvs if tid not in known_ids]
        if orphans:
            self._warn(stage, f"{len(orphans)} topic vectors reference unknown tweets")
        covered = sum(1 for tid in known_ids if tid in tpvs)
        if covered == 0:
            self._warn(stage, "no tweet in the corpus has a topic vector")
        topics.save_tpvs(tpvs, out_tpv)
        catalog.save(out_catalog)
        cache = scores.ScoreCache.load(tox_path)
        assignments = topics.assign_dominant_topics({k: v for k, v in tpvs.items() if k in known_ids})
        aggs = topics.topic_aggregates(assignments, cache, cfg.K)
        write_json(out_agg, {
            "config_hash": self.hash,
            "aggregates": [
                {"topic": a.topic, "tweet_count": a.tweet_count, "median_toxicity": a.median_toxicity}
                for a in aggs.values()
            ],
        })
        self._write_manifest(stage, hashes, ["tpvs.jsonl", "catalog.tsv", "aggregates.json"])
        return out_tpv, out_catalog, out_agg

    def stage_group(self, corpus_path: Path, tpv_path: Path, catalog_path: Path) -> Path:
        stage = "group"
        d = self._stage_dir(stage)
        out_groups, out_cdf = d / "groups.json", d / "entropy_cdf.csv"
        hashes = self._input_hashes({"corpus": corpus_path, "tpvs": tpv_path, "catalog": catalog_path})
        if self._cached(stage, hashes):
            return out_groups
        corpus = load_corpus(corpus_path)
        catalog = topics.TopicCatalog.load(catalog_path)
        tpvs = topics.load_tpvs(tpv_path, catalog.K)
        assignments = topics.assign_dominant_topics(tpvs)
        profiles: dict[str, diversity.DiversityProfile] = {}
        uncovered = 0
        for profile_id in sorted(corpus.profiles):
            try:
                profiles[profile_id] = diversity.diversity_profile(
                    corpus.profiles[profile_id], catalog, assignments
                )
            except diversity.DiversityError:
                uncovered += 1
        if uncovered:
            self._warn(stage, f"{uncovered} profiles have no TPV-covered tweets and were left ungrouped")
        partition, cdf_rows = diversity.group_partition(profiles)
        write_json(out_groups, {
            "config_hash": self.hash,
            "groups": partition,
            "entropy": {p: profiles[p].entropy_H for p in sorted(profiles)},
            "cpv": {p: list(profiles[p].cpv.cp) for p in sorted(profiles)},
        })
        _write_csv(out_cdf, self.hash, ["group", "H"], [(g, repr(h)) for g, h in cdf_rows])
        self._write_manifest(stage, hashes, ["groups.json", "entropy_cdf.csv"])
        return out_groups

    def stage_metrics(self, corpus_path: Path, tox_path: Path) -> Path:
        stage = "metrics"
        out_path = self._stage_dir(stage) / "metrics.jsonl"
        hashes = self._input_hashes({"corpus": corpus_path, "toxicity": tox_path})
        if self._cached(stage, hashes):
            return out_path
        corpus = load_corpus(corpus_path)
        cache = scores.ScoreCache.load(tox_path)
        rows = []
        for profile_id in sorted(corpus.profiles):
            bundle = metrics.compute_metric_bundle(corpus.profiles[profile_id], cache)
            rows.append(metrics.bundle_to_dict(bundle))
        n_no_tox = sum(1 for r in rows if r["toxicity_median"] is None)
        if n_no_tox:
            self._warn(stage, f"{n_no_tox} profiles have no scored tweets; toxicity metrics are null")
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(canonical_dumps({"config_hash": self.hash}) + "\n")
            for row in rows:
                fh.write(canonical_dumps(row) + "\n")
        self._write_manifest(stage, hashes, ["metrics.jsonl"])
        return out_path

    def stage_detect(
        self, corpus_path: Path, tpv_path: Path, catalog_path: Path,
        agg_path: Path, groups_path: Path,
    ) -> Path:
        stage = "detect"
        out_path = self._stage_dir(stage) / "designations.json"
        hashes = self._input_hashes({
            "corpus": corpus_path, "tpvs": tpv_path, "catalog": catalog_path,
            "aggregates": agg_path, "groups": groups_path,
        })
        if self._cached(stage, hashes):
            return out_path
        corpus = load_corpus(corpus_path)
        catalog = topics.TopicCatalog.load(catalog_path)
        tpvs = topics.load_tpvs(tpv_path, catalog.K)
        groups = read_json(groups_path)["groups"]
        members = groups.get(self.config.detect_group, [])
        aggs = _load_aggregates(agg_path)

        payload: dict = {
            "config_hash": self.hash,
            "group": self.config.detect_group,
            "designations": [],
            "clusters": [],
        }
        if not members:
            self._warn(stage, f"entropy group {self.config.detect_group} is empty; nothing to designate")
        else:
            try:
                global_avg = detector.global_topic_average(tpvs.values(), len(corpus.profiles))
                ntpvs = {}
                for profile_id in members:
                    vectors = [
                        tpvs[t.tweet_id]
                        for t in corpus.profiles[profile_id].tweets
                        if t.tweet_id in tpvs
                    ]
                    ntpvs[profile_id] = detector.ntpv(vectors, global_avg, profile_id)
                labels = detector.assign_topic_labels(ntpvs, catalog, aggs)
                metadata = {p: corpus.profiles[p].metadata for p in members}
                clusters, designations = detector.detect_clusters(
                    members, labels, aggs,
                    min_cluster=self.config.min_cluster,
                    tox_gate=self.config.parse_tox_gate(),
                    metadata=metadata,
                    ntpvs=ntpvs,
                )
            except (ValueError, KeyError) as exc:
                raise PipelineError(stage, str(exc)) from exc
            payload["designations"] = [
                {
                    "profile_id": d.profile_id,
                    "label": d.label,
                    "cluster_id": d.cluster_id,
                    "evidence": d.evidence,
                    "topic_label": labels[d.profile_id].topic_label,
                    "topic_category": labels[d.profile_id].label_category,
                }
                for d in (designations[p] for p in sorted(designations))
            ]
            payload["clusters"] = [
                {
                    "cluster_id": c.cluster_id,
                    "topic_label": c.topic_label,
                    "size": len(c.members),
                    "pct_of_group": 100.0 * len(c.members) / len(members),
                    "topic_median_toxicity": c.topic_median_toxicity,
                    "category": catalog.category(c.topic_label),
                    "on_mission": c.on_mission,
                    "friend_overlap": c.overlap.friend_overlap if c.overlap else None,
                    "shared_retweet_ratio": c.overlap.shared_retweet_ratio if c.overlap else None,
                }
                for c in clusters
            ]
        write_json(out_path, payload)
        self._write_manifest(stage, hashes, ["designations.json"])
        return out_path

    def stage_features(
        self, corpus_path: Path, tpv_path: Path, catalog_path: Path,
        tox_path: Path, metrics_path: Path,
    ) -> Path:
        stage = "features"
        out_path = self._stage_dir(stage) / "features.jsonl"
        hashes = self._input_hashes({
            "corpus": corpus_path, "tpvs": tpv_path, "catalog": catalog_path,
            "toxicity": tox_path, "metrics": metrics_path,
        })
        if self._cached(stage, hashes):
            return out_path
        corpus = load_corpus(corpus_path)
        catalog = topics.TopicCatalog.load(catalog_path)
        tpvs = topics.load_tpvs(tpv_path, catalog.K)
        cache = scores.ScoreCache.load(tox_path)
        assignments = topics.assign_dominant_topics(tpvs)
        vectors = []
        for profile_id in sorted(corpus.profiles):
            timeline = corpus.profiles[profile_id]
            bundle = metrics.compute_metric_bundle(timeline, cache)
            counts = diversity.category_counts(timeline, catalog, assignments)
            vectors.append(features.extract_features(profile_id, bundle, counts, timeline.metadata))
        features.save_features(vectors, out_path)
        self._write_manifest(stage, hashes, ["features.jsonl"])
        return out_path

    def stage_classify(self, features_path: Path, detect_path: Path, groups_path: Path) -> dict[str, Path]:
        stage = "classify"
        cfg = self.config
        d = self._stage_dir(stage)
        out = {
            "eval": d / "eval.json",
            "ablation": d / "ablation.json",
            "wild": d / "wild.json",
            "model_svm": d / "model_linear_svm.json",
            "model_tree": d / "model_decision_tree.json",
            "model_forest": d / "model_random_forest.json",
        }
        inputs = {"features": features_path, "detect": detect_path, "groups": groups_path}
        if cfg.labels:
            inputs["labels"] = cfg.labels
        hashes = self._input_hashes(inputs)
        if self._cached(stage, hashes):
            return out
        vectors = features.load_features(features_path)
        ids, X, _mask = features.feature_matrix(vectors)
        index_of = {pid: i for i, pid in enumerate(ids)}

        labels = load_labels_csv(cfg.labels) if cfg.labels else _labels_from_designations(detect_path)
        labeled = [(pid, y) for pid, y in sorted(labels.items()) if pid in index_of]
        skip_reason = None
        if len(labeled) < 5:
            skip_reason = f"only {len(labeled)} labeled profiles"
        elif len({y for _, y in labeled}) < 2:
            skip_reason = "labels contain a single class"
        if skip_reason:
            self._warn(stage, f"classifier skipped: {skip_reason}")
            write_json(out["eval"], {"config_hash": self.hash, "skipped": skip_reason})
            write_json(out["ablation"], {"config_hash": self.hash, "skipped": skip_reason})
            write_json(out["wild"], {"config_hash": self.hash, "skipped": skip_reason})
            self._write_manifest(stage, hashes, ["eval.json", "ablation.json", "wild.json"])
            return out

        rows = [index_of[pid] for pid, _ in labeled]
        X_lab = X[rows]
        y_lab = np.asarray([y for _, y in labeled], dtype=int)
        seed = derive_seed(cfg.seed, "classify")
        try:
            train_idx, test_idx = classifier.split_80_20(y_lab, seed)
            evals = {}
            for kind in classifier.MODEL_KINDS:
                model = classifier.train(kind, X_lab[train_idx], y_lab[train_idx], seed)
                report = classifier.evaluate(model.predict(X_lab[test_idx]), y_lab[test_idx])
                evals[kind] = report.as_dict()
                model.save(out[f"model_{kind.split('_')[-1]}"], extra={"config_hash": self.hash})
            ablation_table = classifier.ablation(X_lab, y_lab, seed)
        except ValueError as exc:
            raise PipelineError(stage, str(exc)) from exc
        write_json(out["eval"], {"config_hash": self.hash, "models": evals,
                                 "n_train": len(train_idx), "n_test": len(test_idx)})
        write_json(out["ablation"], {"config_hash": self.hash, "table": ablation_table})

        # flag the remaining entropy groups with the all-features linear SVM
        groups = read_json(groups_path)["groups"]
        svm_model = classifier.TrainedModel.load(out["model_svm"])
        wild_groups = {}
        for group_name, members in groups.items():
            if group_name == cfg.detect_group:
                continue
            member_rows = [index_of[p] for p in members if p in index_of]
            wild_groups[group_name] = (
                [ids[i] for i in member_rows],
                X[member_rows] if member_rows else np.zeros((0, features.N_FEATURES)),
            )
        wild = classifier.flag_in_wild(svm_model, wild_groups, cfg.sample_n, derive_seed(cfg.seed, "wild"))
        wild["config_hash"] = self.hash
        write_json(out["wild"], wild)
        self._write_manifest(stage, hashes, [p.name for p in out.values()])
        return out

    def stage_report(
        self, corpus_path: Path, tox_path: Path, bot_path: Path | None,
        tpv_path: Path, groups_path: Path, metrics_path: Path,
        detect_path: Path, classify_paths: dict[str, Path],
    ) -> dict:
        stage = "report"
        d = self._stage_dir(stage)
        plots = d / "plots"
        plots.mkdir(exist_ok=True)
        input_paths = {
            "corpus": corpus_path, "toxicity": tox_path, "tpvs": tpv_path,
            "groups": groups_path, "metrics": metrics_path, "detect": detect_path,
        }
        if bot_path is not None and bot_path.exists():
            input_paths["bots"] = bot_path
        for name, p in classify_paths.items():
            if p.exists():
                input_paths[f"classify_{name}"] = p
        hashes = self._input_hashes(input_paths)
        if self._cached(stage, hashes):
            return read_json(d / "report.json")
        corpus = load_corpus(corpus_path)
        group_data = read_json(groups_path)
        metric_rows = _load_metrics(metrics_path)
        detect_data = read_json(detect_path)
        eval_data = read_json(classify_paths["eval"]) if classify_paths["eval"].exists() else {}
        ablation_data = read_json(classify_paths["ablation"]) if classify_paths["ablation"].exists() else {}
        wild_data = read_json(classify_paths["wild"]) if classify_paths["wild"].exists() else {}

        partition: dict[str, list[str]] = group_data["groups"]
        report = {
            "config_hash": self.hash,
            "config": self.config.as_dict(),
            "ingest_stats": corpus.ingest_stats.as_dict(),
            "group_sizes": {g: len(members) for g, members in partition.items()},
            "lexical_table": _lexical_table(partition, metric_rows),
            "profile_table": _profile_table(partition, corpus),
            "cluster_table": detect_data.get("clusters", []),
            "designation_counts": _designation_counts(detect_data),
            "eval": eval_data.get("models", {}),
            "ablation_table": ablation_data.get("table", {}),
            "wild_table": wild_data.get("table", []),
            "warnings": self.warnings,
        }
        if bot_path is not None and bot_path.exists():
            report["botometer_table"] = _botometer_table(partition, bot_path)
        write_json(d / "report.json", report)
        self._export_plot_data(plots, partition, group_data, metric_rows, detect_data, corpus)
        write_json(d / "run_config.json", {"config_hash": self.hash, "config": self.config.as_dict()})
        self._write_manifest(stage, hashes, ["report.json", "run_config.json"])
        return report

    def _export_plot_data(self, plots: Path, partition, group_data, metric_rows, detect_data, corpus: Corpus) -> None:
        """One CSV per figure shape: sorted values for CDFs, five-number
        summaries for boxplots, binned counts for histograms."""
        by_id = {row["profile_id"]: row for row in metric_rows}
        entropy = group_data["entropy"]

        cdf_rows = []
        for group in diversity.GROUP_NAMES:
            values = sorted(entropy[p] for p in partition.get(group, []))
            cdf_rows.extend((group, repr(v)) for v in values)
        _write_csv(plots / "fig_entropy_cdf.csv", self.hash, ["group", "H"], cdf_rows)

        for name, key in [
            ("fig_toxicity_median_box.csv", "toxicity_median"),
            ("fig_toxicity_gini_box.csv", "toxicity_gini"),
        ]:
            rows = []
            for group in diversity.GROUP_NAMES:
                values = [by_id[p][key] for p in partition.get(group, []) if by_id[p][key] is not None]
                if values:
                    rows.append((group, *[repr(float(q)) for q in _five_number(values)]))
            _write_csv(plots / name, self.hash, ["group", "min", "q1", "median", "q3", "max"], rows)

        for name, key in [
            ("fig_tweets_cdf.csv", "n_tweets"),
            ("fig_unique_tweets_cdf.csv", "n_unique"),
            ("fig_hashtags_total_cdf.csv", "total_hashtags"),
            ("fig_hashtags_unique_cdf.csv", "unique_hashtags"),
            ("fig_hashtags_ratio_cdf.csv", "hashtags_per_tweet"),
            ("fig_burstiness_cdf.csv", "burstiness"),
        ]:
            rows = []
            for group in diversity.GROUP_NAMES:
                values = sorted(
                    by_id[p][key] for p in partition.get(group, []) if by_id[p][key] is not None
                )
                rows.extend((group, repr(float(v))) for v in values)
            _write_csv(plots / name, self.hash, ["group", "value"], rows)

        hist_rows = []
        for group in diversity.GROUP_NAMES:
            agg: dict[int, int] = {}
            for p in partition.get(group, []):
                for gap, count in by_id[p]["delta_days_hist"].items():
                    agg[int(gap)] = agg.get(int(gap), 0) + count
            hist_rows.extend((group, gap, count) for gap, count in sorted(agg.items()))
        _write_csv(plots / "fig_time_delta_hist.csv", self.hash, ["group", "day_gap", "count"], hist_rows)

        gap_rows = []
        for des in detect_data.get("designations", []):
            gaps = des["evidence"].get("top3_gaps")
            if gaps:
                gap_rows.append((des["label"], repr(float(gaps[0])), repr(float(gaps[1]))))
        gap_rows.sort()
        _write_csv(plots / "fig_top3_gaps_cdf.csv", self.hash, ["designation", "gap12", "gap23"], gap_rows)

        year_rows = []
        for group in diversity.GROUP_NAMES:
            years: dict[int, int] = {}
            for p in partition.get(group, []):
                year = by_id[p]["creation_year"]
                if year is not None:
                    years[year] = years.get(year, 0) + 1
            year_rows.extend((group, year, count) for year, count in sorted(years.items()))
        _write_csv(plots / "fig_profile_age_bars.csv", self.hash, ["group", "year", "count"], year_rows)


# -- helpers -------------------------------------------------------------------


def _write_csv(path: Path, config_hash: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _five_number(values) -> tuple[float, float, float, float, float]:
    arr = np.asarray(sorted(values), dtype=float)
    return (
        float(arr.min()),
        float(np.percentile(arr, 25)),
        float(np.percentile(arr, 50)),
        float(np.percentile(arr, 75)),
        float(arr.max()),
    )


def _load_score_source(path: str) -> scores.ScoreCache:
    """Accept either our score-cache format or a plain precomputed table."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    if first.lstrip().startswith("{") and scores.CACHE_FORMAT in first:
        return scores.ScoreCache.load(path)
    cache, rejects = scores.load_precomputed_scores(path)
    if rejects:
        rows = ", ".join(str(r[0]) for r in rejects[:5])
        raise ValueError(f"{len(rejects)} invalid score rows (rows {rows})")
    return cache


def _load_aggregates(path: Path) -> dict[int, topics.TopicAggregate]:
    payload = read_json(path)
    return {
        int(a["topic"]): topics.TopicAggregate(
            topic=int(a["topic"]),
            tweet_count=int(a["tweet_count"]),
            median_toxicity=a["median_toxicity"],
        )
        for a in payload["aggregates"]
    }


def load_labels_csv(path: str) -> dict[str, int]:
    """profile_id,label CSV; on_mission (or 1/true) is the positive class."""
    labels: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0] == "profile_id":
                continue
            value = row[1].strip().lower()
            labels[row[0]] = 1 if value in ("on_mission", "1", "true") else 0
    return labels


def _labels_from_designations(detect_path: Path) -> dict[str, int]:
    payload = read_json(detect_path)
    return {
        d["profile_id"]: 1 if d["label"] == detector.ON_MISSION else 0
        for d in payload.get("designations", [])
    }


def _load_metrics(path: Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        fh.readline()  # header with config hash
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


_LEXICAL_KEYS = (
    "flesch_kincaid_grade", "flesch_ease", "linsear_write", "ari",
    "lexical_diversity_mtld", "chars_per_tweet", "words_per_tweet",
)


def _lexical_table(partition: dict[str, list[str]], metric_rows: list[dict]) -> dict:
    """Average lexical metrics per group, for groups II..VIII (group I is
    reported in sizes but excluded from comparative tables)."""
    by_id = {row["profile_id"]: row for row in metric_rows}
    table: dict[str, dict] = {}
    for group in diversity.GROUP_NAMES[1:]:
        members = partition.get(group, [])
        column = {}
        for key in _LEXICAL_KEYS:
            values = [by_id[p][key] for p in members if by_id[p][key] is not None]
            column[key] = sum(values) / len(values) if values else None
        column["n_profiles"] = len(members)
        table[group] = column
    return table


def _profile_table(partition: dict[str, list[str]], corpus: Corpus) -> dict:
    table: dict[str, dict] = {}
    for group in diversity.GROUP_NAMES[1:]:
        members = partition.get(group, [])
        metas = [corpus.profiles[p].metadata for p in members if corpus.profiles[p].metadata]
        if not metas:
            table[group] = {"n_profiles": len(members)}
            continue
        n = len(metas)
        followers = sum(m.followers for m in metas) / n
        following = sum(m.following for m in metas) / n
        table[group] = {
            "n_profiles": len(members),
            "followers": followers,
            "following": following,
            "followers_following_ratio": followers / following if following else None,
            "listed": sum(m.listed for m in metas) / n,
            "statuses": sum(m.statuses for m in metas) / n,
            "favourites": sum(m.favourites for m in metas) / n,
            "pct_protected": 100.0 * sum(m.protected for m in metas) / n,
            "pct_verified": 100.0 * sum(m.verified for m in metas) / n,
            "pct_has_location": 100.0 * sum(m.has_location for m in metas) / n,
        }
    return table


def _botometer_table(partition: dict[str, list[str]], bot_path: Path) -> dict:
    cache = scores.ScoreCache.load(bot_path)
    table: dict[str, dict] = {}

    def clean(value: float) -> float | None:
        return None if math.isnan(value) else value

    for group in diversity.GROUP_NAMES[1:]:
        members = partition.get(group, [])
        if not members:
            continue
        summary = scores.bot_score_summary(members, cache)
        table[group] = {
            "overall_mean": clean(summary.overall_mean),
            "overall_std": clean(summary.overall_std),
            "spammer_mean": clean(summary.spammer_mean),
            "spammer_std": clean(summary.spammer_std),
            "n_scored": summary.n_scored,
            "n_missing": summary.n_missing,
        }
    return table


def _designation_counts(detect_data: dict) -> dict:
    counts = {detector.ON_MISSION: 0, detector.NOT_ON_MISSION: 0}
    for d in detect_data.get("designations", []):
        counts[d["label"]] += 1
    return counts


def run_pipeline(config: RunConfig, out_dir: str | Path) -> dict:
    return Pipeline(config, out_dir).run()
