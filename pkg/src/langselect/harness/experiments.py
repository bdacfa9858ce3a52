"""Experiment orchestration: specs, the corpus store, the scoring oracle
(build training set -> pretrain -> fine-tune -> evaluate), seed
aggregation, and the parallel matrix runner.

Every score is a deterministic function of (spec, seed), so results are
identical regardless of caching, worker count or scheduling order.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from ..corpus import (
    Dataset,
    LanguageCode,
    dedup_dev,
    load_labeled_tsv,
    load_unlabeled_text,
    sample_per_language,
    strip_labels,
)
from ..errors import HarnessError
from ..metrics import confusion, weighted_f1
from ..selection import MULTILINGUAL, ZEROSHOT
from ..textmodel import (
    AdaptationStats,
    LearnerConfig,
    config_with_seed,
    fine_tune,
    predict_texts,
    pretrain,
)
from .cache import ScoreCache
from .config import HarnessConfig

logger = logging.getLogger(__name__)

ADAPTATIONS = ("none", "tapt", "lapt", "lapt+tapt")
EVAL_SPLITS = ("devstar", "dev", "test")


class CorpusStore:
    """Loaded datasets organized by language and split.

    ``devstar`` splits are derived lazily from train/dev overlap removal
    and cached. Datasets are immutable, so the store is safe for
    concurrent reads once populated.
    """

    def __init__(self, metadata: dict[str, LanguageCode] | None = None):
        self._metadata: dict[str, LanguageCode] = dict(metadata or {})
        self._splits: dict[str, dict[str, Dataset]] = {}
        self._lapt: dict[str, Dataset] = {}

    def add(self, dataset: Dataset) -> None:
        code = dataset.language.code
        self._metadata.setdefault(code, dataset.language)
        self._splits.setdefault(code, {})[dataset.split] = dataset

    def add_lapt(self, dataset: Dataset) -> None:
        self._metadata.setdefault(dataset.language.code, dataset.language)
        self._lapt[dataset.language.code] = dataset

    def language(self, code: str) -> LanguageCode:
        try:
            return self._metadata[code]
        except KeyError:
            raise HarnessError(f"unknown language {code!r}") from None

    def languages(self) -> list[LanguageCode]:
        return [self._metadata[code] for code in sorted(self._metadata)]

    def split(self, code: str, split: str) -> Dataset | None:
        if split == "devstar":
            return self.devstar(code)
        return self._splits.get(code, {}).get(split)

    def train(self, code: str) -> Dataset:
        ds = self._splits.get(code, {}).get("train")
        if ds is None:
            raise HarnessError(f"no train split loaded for language {code!r}")
        return ds

    def devstar(self, code: str) -> Dataset | None:
        splits = self._splits.get(code, {})
        if "devstar" not in splits:
            train, dev = splits.get("train"), splits.get("dev")
            if train is None or dev is None:
                return None
            splits["devstar"] = dedup_dev(train, dev)
        return splits["devstar"]

    def lapt_corpus(self, code: str) -> Dataset:
        ds = self._lapt.get(code)
        if ds is None:
            raise HarnessError(f"no LAPT corpus configured for language {code!r}")
        return ds

    def eval_dataset(self, code: str, split: str) -> Dataset:
        ds = self.split(code, split)
        if ds is None or not len(ds):
            raise HarnessError(f"no {split} split available for language {code!r}")
        return ds

    def has_train(self, code: str) -> bool:
        return "train" in self._splits.get(code, {})

    def has_eval(self, code: str, split: str) -> bool:
        try:
            self.eval_dataset(code, split)
            return True
        except HarnessError:
            return False

    @classmethod
    def from_config(cls, cfg: HarnessConfig) -> "CorpusStore":
        store = cls({lf.language.code: lf.language for lf in cfg.languages})
        for lf in cfg.languages:
            code = lf.language.code
            for split, path in (("train", lf.train), ("dev", lf.dev), ("test", lf.test)):
                if path is not None:
                    store.add(load_labeled_tsv(path, lf.language, split))
            if lf.lapt_corpus is not None:
                store.add_lapt(load_unlabeled_text(lf.lapt_corpus, lf.language))
        return store

    @classmethod
    def from_datasets(
        cls, datasets: Iterable[Dataset], lapt: Iterable[Dataset] = ()
    ) -> "CorpusStore":
        store = cls()
        for ds in datasets:
            store.add(ds)
        for ds in lapt:
            store.add_lapt(ds)
        return store


def _learner_digest_payload(config: LearnerConfig) -> dict:
    # The experiment seed is what varies between runs; the config's own
    # seed field is excluded so it cannot split cache cells.
    return {
        "ngram_min": config.ngram_min,
        "ngram_max": config.ngram_max,
        "hash_buckets": config.hash_buckets,
        "l2_lambda": config.l2_lambda,
        "learning_rate": config.learning_rate,
        "lr_decay": config.lr_decay,
        "batch_size": config.batch_size,
        "epochs": config.epochs,
    }


@dataclass(frozen=True)
class ExperimentSpec:
    """One training/evaluation cell: which languages train the model, how
    it adapts, and which target split is scored."""

    target: str
    sources: tuple[str, ...]
    mode: str = MULTILINGUAL
    adaptation: str = "none"
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    seed: int = 0
    sample_cap: int | None = None
    eval_split: str = "devstar"

    def __post_init__(self) -> None:
        if not self.sources:
            raise HarnessError("spec needs at least one source language")
        ordered = tuple(sorted(self.sources))
        if len(set(ordered)) != len(ordered):
            raise HarnessError(f"duplicate sources in spec: {self.sources}")
        object.__setattr__(self, "sources", ordered)
        if self.mode not in (MULTILINGUAL, ZEROSHOT):
            raise HarnessError(f"unknown mode {self.mode!r}")
        if self.adaptation not in ADAPTATIONS:
            raise HarnessError(f"unknown adaptation {self.adaptation!r}, expected one of {ADAPTATIONS}")
        if self.eval_split not in EVAL_SPLITS:
            raise HarnessError(f"unknown eval split {self.eval_split!r}")
        if self.mode == ZEROSHOT and self.target in ordered:
            raise HarnessError(
                f"zero-shot spec must not train on the target language {self.target!r}"
            )
        if self.sample_cap is not None and self.sample_cap < 1:
            raise HarnessError(f"sample_cap must be >= 1, got {self.sample_cap}")

    def _payload(self, include_seed: bool) -> dict:
        payload = {
            "target": self.target,
            "sources": list(self.sources),
            "mode": self.mode,
            "adaptation": self.adaptation,
            "learner": _learner_digest_payload(self.learner),
            "sample_cap": self.sample_cap,
            "eval_split": self.eval_split,
        }
        if include_seed:
            payload["seed"] = self.seed
        return payload

    def key(self) -> str:
        """Stable hash over every field, including the seed."""
        blob = json.dumps(self._payload(include_seed=True), sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:24]

    def cell_key(self) -> str:
        """Stable hash over every field except the seed; groups the per-seed
        runs of one experiment cell."""
        blob = json.dumps(self._payload(include_seed=False), sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:24]

    def describe(self) -> str:
        cap = f" cap={self.sample_cap}" if self.sample_cap is not None else ""
        return (
            f"target={self.target} sources={','.join(self.sources)} mode={self.mode} "
            f"adaptation={self.adaptation} seed={self.seed} eval={self.eval_split}{cap}"
        )


def build_training_set(spec: ExperimentSpec, store: CorpusStore) -> list[Dataset]:
    """Training datasets for a spec: the (optionally capped) train splits
    of its source languages, sorted by language code, rows in file order."""
    sets = [store.train(code) for code in spec.sources]
    if spec.sample_cap is not None:
        sets = sample_per_language(sets, spec.sample_cap, seed=spec.seed)
    return sets


def adaptation_stats(spec: ExperimentSpec, store: CorpusStore) -> AdaptationStats:
    """Adaptation statistics for a spec.

    TAPT pretrains on the unlabeled task texts (train and dev splits,
    labels stripped) of the spec's languages plus the target; LAPT
    pretrains on the target's configured external corpus; lapt+tapt
    merges the two document-frequency tables.
    """
    if spec.adaptation == "none":
        return AdaptationStats.uniform()
    tapt = lapt = None
    if spec.adaptation in ("tapt", "lapt+tapt"):
        langs = sorted(set(spec.sources) | {spec.target})
        corpora = []
        for code in langs:
            for split in ("train", "dev"):
                ds = store.split(code, split)
                if ds is not None and len(ds):
                    corpora.append(strip_labels(ds))
        tapt = pretrain(corpora, tag=f"tapt:{'+'.join(langs)}", config=spec.learner)
    if spec.adaptation in ("lapt", "lapt+tapt"):
        corpus = store.lapt_corpus(spec.target)
        lapt = pretrain([corpus], tag=f"lapt:{spec.target}", config=spec.learner)
    if tapt is not None and lapt is not None:
        return lapt.merged(tapt, tag=f"lapt+tapt:{spec.target}")
    return tapt if tapt is not None else lapt  # type: ignore[return-value]


def score_experiment(
    spec: ExperimentSpec, store: CorpusStore, cache: ScoreCache | None = None
) -> tuple[float, int]:
    """Weighted F1 of one spec at one seed (cached when a cache is given).

    Returns (score, evaluation support).
    """
    cell_key = spec.cell_key()
    if cache is not None:
        hit = cache.get(cell_key, spec.seed)
        if hit is not None:
            return hit
    try:
        train_sets = build_training_set(spec, store)
        stats = adaptation_stats(spec, store)
        config = config_with_seed(spec.learner, spec.seed)
        model = fine_tune(stats, train_sets, config)
        eval_ds = store.eval_dataset(spec.target, spec.eval_split)
        predictions = predict_texts(model, eval_ds.texts())
        gold = [ex.label for ex in eval_ds]
        score = weighted_f1(confusion(gold, [label for label, _ in predictions]))
    except HarnessError:
        raise
    except Exception as e:
        raise HarnessError(f"experiment failed ({spec.describe()}): {e}") from e
    support = len(eval_ds)
    if cache is not None:
        cache.put(cell_key, spec.seed, score, support)
    return score, support


@dataclass(frozen=True)
class CellScore:
    """Per-seed scores of one cell plus their mean and population std."""

    per_seed: dict[int, float]
    mean: float
    std: float
    support: int


def score_cell(
    spec: ExperimentSpec, seeds: Sequence[int], store: CorpusStore, cache: ScoreCache | None = None
) -> CellScore:
    """Score a cell for every seed and aggregate."""
    per_seed: dict[int, float] = {}
    support = 0
    for seed in seeds:
        per_seed[seed], support = score_experiment(replace(spec, seed=seed), store, cache)
    return _aggregate(per_seed, support)


def _aggregate(per_seed: dict[int, float], support: int) -> CellScore:
    values = list(per_seed.values())
    mean = sum(values) / len(values)
    std = math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
    return CellScore(per_seed=per_seed, mean=mean, std=std, support=support)


@dataclass
class MatrixOracle:
    """The scoring oracle used by selection: delegates each cell to
    ``score_experiment`` with this oracle's fixed mode/adaptation."""

    store: CorpusStore
    learner: LearnerConfig
    mode: str = MULTILINGUAL
    adaptation: str = "none"
    eval_split: str = "devstar"
    cache: ScoreCache | None = None

    def score(
        self, target: str, sources: tuple[str, ...], seed: int, sample_cap: int | None
    ) -> float:
        if self.mode == ZEROSHOT and target in sources:
            raise HarnessError(
                f"zero-shot oracle asked to train on the target language {target!r}"
            )
        spec = ExperimentSpec(
            target=target,
            sources=sources,
            mode=self.mode,
            adaptation=self.adaptation,
            learner=self.learner,
            seed=seed,
            sample_cap=sample_cap,
            eval_split=self.eval_split,
        )
        return score_experiment(spec, self.store, self.cache)[0]


@dataclass(frozen=True)
class PlanCell:
    """One (target, source set, cap) cell of a selection plan."""

    target: str
    sources: tuple[str, ...]
    sample_cap: int | None


def enumerate_plan(
    targets: Sequence[str],
    candidates_by_target: dict[str, tuple[str, ...]],
    strategy: str,
    mode: str,
    baseline_samples_per_language: int,
) -> list[PlanCell]:
    """All cells one selection strategy will request, for cache prewarming.

    Mirrors the cells forward_select/backward_select evaluate, so a matrix
    run followed by selection needs no additional training.
    """
    cells: list[PlanCell] = []
    for target in targets:
        cands = candidates_by_target[target]
        if strategy == "forward":
            if mode == MULTILINGUAL:
                cells.append(PlanCell(target, (target,), None))
                cells.extend(PlanCell(target, tuple(sorted((target, c))), None) for c in cands)
            else:
                cells.append(PlanCell(target, tuple(sorted(cands)), None))
                cells.extend(PlanCell(target, (c,), None) for c in cands)
        elif strategy == "backward":
            cap = baseline_samples_per_language
            full = tuple(sorted((target, *cands))) if mode == MULTILINGUAL else tuple(sorted(cands))
            cells.append(PlanCell(target, full, cap))
            cells.extend(
                PlanCell(target, tuple(s for s in full if s != c), cap) for c in cands
            )
        else:
            raise HarnessError(f"unknown strategy {strategy!r}")
    return cells


@dataclass(frozen=True)
class MatrixEntry:
    """Aggregated scores of one cell, as stored in a ScoreMatrix."""

    target: str
    sources: tuple[str, ...]
    mode: str
    adaptation: str
    sample_cap: int | None
    eval_split: str
    per_seed: dict[int, float]
    mean: float
    std: float
    support: int

    def __post_init__(self) -> None:
        values = list(self.per_seed.values())
        if not values:
            raise HarnessError("matrix entry without per-seed scores")
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise HarnessError(f"score outside [0, 1] in entry for target {self.target!r}")
        if abs(self.mean - sum(values) / len(values)) > 1e-12:
            raise HarnessError(f"entry mean inconsistent with per-seed scores for {self.target!r}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MatrixEntry):
            return NotImplemented
        return (
            self.target == other.target
            and self.sources == other.sources
            and self.mode == other.mode
            and self.adaptation == other.adaptation
            and self.sample_cap == other.sample_cap
            and self.eval_split == other.eval_split
            and self.per_seed == other.per_seed
            and self.mean == other.mean
            and self.std == other.std
            and self.support == other.support
        )


@dataclass
class ScoreMatrix:
    """Cell key -> aggregated entry for a full experiment grid."""

    entries: dict[str, MatrixEntry]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScoreMatrix):
            return NotImplemented
        return self.entries == other.entries

    def to_jsonl(self) -> str:
        lines = []
        for key in sorted(self.entries):
            e = self.entries[key]
            lines.append(
                json.dumps(
                    {
                        "key": key,
                        "target": e.target,
                        "sources": list(e.sources),
                        "mode": e.mode,
                        "adaptation": e.adaptation,
                        "sample_cap": e.sample_cap,
                        "eval_split": e.eval_split,
                        "per_seed": {str(seed): score for seed, score in sorted(e.per_seed.items())},
                        "mean": e.mean,
                        "std": e.std,
                        "support": e.support,
                    },
                    sort_keys=True,
                )
            )
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_jsonl(cls, text: str) -> "ScoreMatrix":
        entries: dict[str, MatrixEntry] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                entries[doc["key"]] = MatrixEntry(
                    target=doc["target"],
                    sources=tuple(doc["sources"]),
                    mode=doc["mode"],
                    adaptation=doc["adaptation"],
                    sample_cap=doc["sample_cap"],
                    eval_split=doc["eval_split"],
                    per_seed={int(seed): float(score) for seed, score in doc["per_seed"].items()},
                    mean=float(doc["mean"]),
                    std=float(doc["std"]),
                    support=int(doc["support"]),
                )
            except (KeyError, ValueError, json.JSONDecodeError) as e:
                raise HarnessError(f"bad matrix jsonl at line {lineno}: {e}") from None
        return cls(entries=entries)

    def find(
        self, target: str, sources: Sequence[str], adaptation: str | None = None
    ) -> MatrixEntry | None:
        """First entry matching a target and source set (and adaptation if given)."""
        wanted = tuple(sorted(sources))
        for key in sorted(self.entries):
            e = self.entries[key]
            if e.target == target and e.sources == wanted:
                if adaptation is None or e.adaptation == adaptation:
                    return e
        return None


def run_matrix(
    cells: Sequence[PlanCell],
    store: CorpusStore,
    *,
    seeds: Sequence[int],
    learner: LearnerConfig,
    mode: str = MULTILINGUAL,
    adaptation: str = "none",
    eval_split: str = "devstar",
    cache: ScoreCache | None = None,
    parallelism: int = 1,
) -> ScoreMatrix:
    """Execute every uncached (cell, seed) job and assemble the matrix.

    Jobs are independent; up to ``parallelism`` run concurrently. If any
    job fails, the remaining in-flight jobs are drained and a single
    error reporting all failed specs is raised, so a matrix is never
    silently partial.
    """
    if parallelism < 1:
        raise HarnessError(f"parallelism must be >= 1, got {parallelism}")
    specs: dict[tuple[str, int], ExperimentSpec] = {}
    for cell in cells:
        for seed in seeds:
            spec = ExperimentSpec(
                target=cell.target,
                sources=cell.sources,
                mode=mode,
                adaptation=adaptation,
                learner=learner,
                seed=seed,
                sample_cap=cell.sample_cap,
                eval_split=eval_split,
            )
            specs.setdefault((spec.cell_key(), seed), spec)

    pending = [
        spec
        for (key, seed), spec in sorted(specs.items())
        if cache is None or cache.get(key, seed) is None
    ]
    results: dict[tuple[str, int], tuple[float, int]] = {}
    failures: list[str] = []
    if pending:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = {
                pool.submit(score_experiment, spec, store, cache): spec for spec in pending
            }
            for future in as_completed(futures):
                spec = futures[future]
                try:
                    results[(spec.cell_key(), spec.seed)] = future.result()
                except Exception as e:
                    failures.append(f"{spec.describe()}: {e}")
    if failures:
        raise HarnessError(
            "matrix run failed for %d cell(s):\n%s" % (len(failures), "\n".join(sorted(failures)))
        )

    entries: dict[str, MatrixEntry] = {}
    grouped: dict[str, ExperimentSpec] = {}
    per_cell: dict[str, dict[int, tuple[float, int]]] = {}
    for (key, seed), spec in specs.items():
        value = results.get((key, seed))
        if value is None and cache is not None:
            value = cache.get(key, seed)
        if value is None:
            raise HarnessError(f"missing score for {spec.describe()}")
        per_cell.setdefault(key, {})[seed] = value
        grouped[key] = spec
    for key, seed_scores in per_cell.items():
        spec = grouped[key]
        agg = _aggregate({s: v[0] for s, v in seed_scores.items()}, next(iter(seed_scores.values()))[1])
        entries[key] = MatrixEntry(
            target=spec.target,
            sources=spec.sources,
            mode=spec.mode,
            adaptation=spec.adaptation,
            sample_cap=spec.sample_cap,
            eval_split=spec.eval_split,
            per_seed=agg.per_seed,
            mean=agg.mean,
            std=agg.std,
            support=agg.support,
        )
    return ScoreMatrix(entries=entries)
