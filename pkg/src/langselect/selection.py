"""Forward and backward source-language selection.

Both strategies score candidate source languages for a target language
through a scoring oracle (train on the union of the named languages,
evaluate weighted F1 on the target's held-out split) and keep the
candidates whose transfer gain clears a threshold:

* forward, multilingual: baseline is the target-only score; a candidate
  is positive when the bilingual {target, candidate} score beats the
  baseline by more than the threshold.
* forward, zero-shot: baseline is the complete candidate set; candidates
  are ranked by their single-source score and marked positive when not
  more than the threshold below the baseline.
* backward: baseline is the full set (size-controlled by per-language
  sample caps); a candidate is positive when removing it drops the score
  by more than the threshold.

The threshold is relative by default (score > baseline * (1 + t)); an
absolute-points reading is available via ``absolute_threshold``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

from .corpus import LanguageCode
from .errors import SelectionError

FORWARD = "forward"
BACKWARD = "backward"
MULTILINGUAL = "multilingual"
ZEROSHOT = "zeroshot"


class ScoreOracle(Protocol):
    """Scores one experiment cell: train on ``sources``, evaluate on the
    target's evaluation split. Must be deterministic given the seed, and
    safe to call concurrently for distinct cells."""

    def score(
        self, target: str, sources: tuple[str, ...], seed: int, sample_cap: int | None
    ) -> float: ...


@dataclass(frozen=True)
class SelectionConfig:
    threshold: float = 0.05
    baseline_samples_per_language: int = 500
    top_k: int | None = None
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    mode: str = MULTILINGUAL
    absolute_threshold: bool = False

    def __post_init__(self) -> None:
        if self.threshold <= 0:
            raise SelectionError(f"threshold must be positive, got {self.threshold}")
        if self.top_k is not None and self.top_k < 1:
            raise SelectionError(f"top_k must be >= 1, got {self.top_k}")
        if not self.seeds:
            raise SelectionError("seeds must be non-empty")
        if self.mode not in (MULTILINGUAL, ZEROSHOT):
            raise SelectionError(f"unknown mode {self.mode!r}")
        if self.baseline_samples_per_language < 1:
            raise SelectionError("baseline_samples_per_language must be >= 1")


@dataclass(frozen=True)
class SelectionTask:
    """A target language and its candidate source languages."""

    target: LanguageCode
    candidates: tuple[LanguageCode, ...]

    def __post_init__(self) -> None:
        if not self.candidates:
            raise SelectionError(f"target {self.target.code}: no candidate source languages")
        codes = [c.code for c in self.candidates]
        if len(set(codes)) != len(codes):
            raise SelectionError(f"target {self.target.code}: duplicate candidates")
        if self.target.code in codes:
            raise SelectionError(f"target {self.target.code} must not appear among candidates")


@dataclass(frozen=True)
class SelectionResult:
    """Ranked positive sources for one target.

    ``positive_sources`` pairs each positive language with its gain:
    score minus baseline for forward selection, baseline minus
    leave-one-out score (the drop) for backward. ``ranking`` lists every
    candidate best-first with the raw cell score that judged it.
    """

    target: LanguageCode
    strategy: str
    mode: str
    baseline_score: float
    positive_sources: tuple[tuple[LanguageCode, float], ...]
    ranking: tuple[tuple[LanguageCode, float], ...]

    def positive_codes(self) -> tuple[str, ...]:
        return tuple(lang.code for lang, _ in self.positive_sources)

    def to_row(self) -> str:
        """Report row: ``target<TAB>strategy<TAB>baseline<TAB>src(gain)...``."""
        cells = [self.target.code, self.strategy, f"{self.baseline_score:.4f}"]
        cells.extend(f"{lang.code}({gain:+.4f})" for lang, gain in self.positive_sources)
        return "\t".join(cells)


def _mean_cell(
    oracle: ScoreOracle,
    target: LanguageCode,
    sources: Sequence[LanguageCode],
    cfg: SelectionConfig,
    sample_cap: int | None,
) -> float:
    codes = tuple(sorted(lang.code for lang in sources))
    total = 0.0
    for seed in cfg.seeds:
        try:
            total += oracle.score(target.code, codes, seed=seed, sample_cap=sample_cap)
        except SelectionError:
            raise
        except Exception as e:
            raise SelectionError(
                f"oracle failed for cell target={target.code} sources={codes}: {e}"
            ) from e
    return total / len(cfg.seeds)


def _rank(pairs: list[tuple[LanguageCode, float]], descending: bool) -> list[tuple[LanguageCode, float]]:
    sign = -1.0 if descending else 1.0
    return sorted(pairs, key=lambda p: (sign * p[1], p[0].code))


def _truncate(
    positives: list[tuple[LanguageCode, float]], top_k: int | None
) -> tuple[tuple[LanguageCode, float], ...]:
    if top_k is not None:
        positives = positives[:top_k]
    return tuple(positives)


def forward_select(
    task: SelectionTask, oracle: ScoreOracle, cfg: SelectionConfig
) -> SelectionResult:
    """Forward selection: grow from the minimal set, keep candidates whose
    addition clears the gain threshold."""
    if cfg.mode == MULTILINGUAL:
        baseline = _mean_cell(oracle, task.target, (task.target,), cfg, None)
        cutoff = baseline + cfg.threshold if cfg.absolute_threshold else baseline * (1 + cfg.threshold)
        scored = [
            (cand, _mean_cell(oracle, task.target, (task.target, cand), cfg, None))
            for cand in task.candidates
        ]
        positives = [(cand, score - baseline) for cand, score in scored if score > cutoff]
    else:
        baseline = _mean_cell(oracle, task.target, task.candidates, cfg, None)
        cutoff = baseline - cfg.threshold if cfg.absolute_threshold else baseline * (1 - cfg.threshold)
        scored = [
            (cand, _mean_cell(oracle, task.target, (cand,), cfg, None))
            for cand in task.candidates
        ]
        positives = [(cand, score - baseline) for cand, score in scored if score >= cutoff]
    return SelectionResult(
        target=task.target,
        strategy=FORWARD,
        mode=cfg.mode,
        baseline_score=baseline,
        positive_sources=_truncate(_rank(positives, descending=True), cfg.top_k),
        ranking=tuple(_rank(scored, descending=True)),
    )


def backward_select(
    task: SelectionTask, oracle: ScoreOracle, cfg: SelectionConfig
) -> SelectionResult:
    """Backward selection: start from the full set, keep candidates whose
    removal drops the score by more than the threshold.

    All sets (baseline and leave-one-out) are built from per-language
    subsamples capped at ``baseline_samples_per_language`` so comparisons
    are size-controlled.
    """
    cap = cfg.baseline_samples_per_language
    if cfg.mode == MULTILINGUAL:
        full: tuple[LanguageCode, ...] = (task.target, *task.candidates)
    else:
        full = task.candidates
    baseline = _mean_cell(oracle, task.target, full, cfg, cap)
    cutoff = baseline - cfg.threshold if cfg.absolute_threshold else baseline * (1 - cfg.threshold)
    scored = []
    for cand in task.candidates:
        rest = tuple(lang for lang in full if lang.code != cand.code)
        scored.append((cand, _mean_cell(oracle, task.target, rest, cfg, cap)))
    positives = [(cand, baseline - score) for cand, score in scored if score < cutoff]
    return SelectionResult(
        target=task.target,
        strategy=BACKWARD,
        mode=cfg.mode,
        baseline_score=baseline,
        positive_sources=_truncate(_rank(positives, descending=True), cfg.top_k),
        ranking=tuple(_rank(scored, descending=False)),
    )


def run_all_targets(
    languages: Sequence[LanguageCode],
    oracle: ScoreOracle,
    cfg: SelectionConfig,
    strategy: str = FORWARD,
) -> dict[str, SelectionResult]:
    """Run one selection strategy with every language as the target.

    Over N languages this touches exactly N*N distinct (target, source
    set) cells per seed: N-1 pair or leave-one-out cells plus one
    baseline cell for each of the N targets.
    """
    if len(languages) < 2:
        raise SelectionError("run_all_targets requires at least 2 languages")
    if strategy not in (FORWARD, BACKWARD):
        raise SelectionError(f"unknown strategy {strategy!r}")
    select = forward_select if strategy == FORWARD else backward_select
    out: dict[str, SelectionResult] = {}
    for target in sorted(languages, key=lambda lang: lang.code):
        candidates = tuple(
            lang for lang in sorted(languages, key=lambda l: l.code) if lang.code != target.code
        )
        out[target.code] = select(SelectionTask(target=target, candidates=candidates), oracle, cfg)
    return out


def group_by_family(
    languages: Sequence[LanguageCode],
    metadata: Mapping[str, LanguageCode] | None = None,
    mode: str = MULTILINGUAL,
) -> dict[str, tuple[LanguageCode, ...]]:
    """Family-grouping baseline: each target's source set is every language
    sharing its top-level family (itself included in multilingual mode)."""
    resolved = []
    for lang in languages:
        meta = metadata.get(lang.code, lang) if metadata else lang
        if not meta.top_family:
            raise SelectionError(f"language {lang.code!r} has no family metadata")
        resolved.append(meta)
    out: dict[str, tuple[LanguageCode, ...]] = {}
    for target in resolved:
        group = [
            lang
            for lang in resolved
            if lang.top_family == target.top_family
            and (mode == MULTILINGUAL or lang.code != target.code)
        ]
        out[target.code] = tuple(sorted(group, key=lambda lang: lang.code))
    return out
