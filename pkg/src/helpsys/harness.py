"""Evaluation harness: splits, metrics, sweeps, model comparison, pipeline.

Everything here is glue over the other modules. Retrieval metrics score a
lookup as correct only when the returned response id equals the gold id;
an answered-but-different response counts against precision. The shared
answer_query() function is the single code path behind both the CLI `query`
subcommand and the HTTP service, so their outputs agree field for field.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass

import numpy as np

from . import models, retrieval, textnorm
from .models import Classifier, LabeledQuery, ModelKind, TrainConfig
from .pos_mapper import (
    ActionLexicon,
    ActionSkillTable,
    SkillLexicon,
    default_action_lexicon,
    default_action_skill_table,
    default_skill_lexicon,
    map_query,
)
from .retrieval import IndexedQuery, QueryIndex, build_index, decide_response

__all__ = [
    "DatasetSplit",
    "split_dataset",
    "RetrievalReport",
    "evaluate_retrieval",
    "evaluate_pos_baseline",
    "build_query_index",
    "SweepRow",
    "SweepReport",
    "threshold_sweep",
    "parse_grid",
    "DEFAULT_SWEEP_GRID",
    "ComparisonReport",
    "run_comparison",
    "format_comparison",
    "QueryPipeline",
    "load_pipeline",
    "answer_query",
    "load_config",
    "CONFIG_ENV_VAR",
]

CONFIG_ENV_VAR = "HELPSYS_CONFIG"

DEFAULT_SWEEP_GRID: tuple[float, ...] = (0.60, 0.65, 0.70, 0.75, 0.80, 0.82, 0.83, 0.85)


# ---------------------------------------------------------------------------
# dataset splitting


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[LabeledQuery, ...]
    validation: tuple[LabeledQuery, ...]
    test: tuple[LabeledQuery, ...]
    fractions: tuple[float, float, float]
    seed: int


def split_dataset(
    data: list[LabeledQuery],
    fractions: tuple[float, float, float] = (0.80, 0.05, 0.15),
    seed: int = 0,
) -> DatasetSplit:
    """Seeded shuffle then contiguous slices; rounding remainders go to train."""
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError("fractions must be three positive values")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    if len(data) < 3:
        raise ValueError("need at least 3 items to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(data))
    shuffled = [data[i] for i in order]
    n = len(data)
    n_val = int(n * fractions[1])
    n_test = int(n * fractions[2])
    n_train = n - n_val - n_test
    return DatasetSplit(
        train=tuple(shuffled[:n_train]),
        validation=tuple(shuffled[n_train : n_train + n_val]),
        test=tuple(shuffled[n_train + n_val :]),
        fractions=tuple(fractions),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# retrieval and baseline evaluation


@dataclass(frozen=True)
class RetrievalReport:
    threshold: float
    precision: float
    recall: float
    f1: float
    answered: int
    correct: int
    total: int


def _report(threshold: float, outcomes: list[tuple[str, str | None]]) -> RetrievalReport:
    total = len(outcomes)
    answered = sum(1 for _, got in outcomes if got is not None)
    correct = sum(1 for gold, got in outcomes if got is not None and got == gold)
    precision = correct / answered if answered else 0.0
    recall = correct / total if total else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return RetrievalReport(
        threshold=threshold,
        precision=precision,
        recall=recall,
        f1=f1,
        answered=answered,
        correct=correct,
        total=total,
    )


def _help_rows(rows) -> list[LabeledQuery]:
    return [r for r in rows if r.is_help]


def build_query_index(
    model: Classifier, rows, leaf_size: int = retrieval.DEFAULT_LEAF_SIZE
) -> QueryIndex:
    """Index the help rows' sentence vectors; duplicate texts indexed once."""
    entries: list[IndexedQuery] = []
    seen: set[str] = set()
    for row in _help_rows(rows):
        if row.text in seen:
            continue
        seen.add(row.text)
        entries.append(
            IndexedQuery(
                query_text=row.text,
                vector=model.sentence_vector(row.text),
                response_id=row.response_id,
            )
        )
    return build_index(entries, leaf_size=leaf_size)


def evaluate_retrieval(
    index: QueryIndex,
    model: Classifier,
    rows,
    threshold: float = 0.75,
    k: int = 1,
) -> RetrievalReport:
    """Score response fetching over the help rows of an evaluation set."""
    outcomes: list[tuple[str, str | None]] = []
    for row in _help_rows(rows):
        found = index.knn(model.sentence_vector(row.text), k=k)
        outcomes.append((row.response_id, decide_response(found, threshold)))
    return _report(threshold, outcomes)


def evaluate_pos_baseline(
    rows,
    norm_cfg=None,
    actions: ActionLexicon | None = None,
    skills: SkillLexicon | None = None,
    table: ActionSkillTable | None = None,
) -> RetrievalReport:
    """Score the rule-based baseline over the help rows of an evaluation set."""
    norm_cfg = norm_cfg or textnorm.default_config()
    actions = actions or default_action_lexicon()
    skills = skills or default_skill_lexicon()
    table = table or default_action_skill_table()
    outcomes: list[tuple[str, str | None]] = []
    for row in _help_rows(rows):
        tokens = textnorm.normalize(row.text, norm_cfg).content(norm_cfg.unk_token)
        result = map_query(tokens, actions, skills, table)
        outcomes.append((row.response_id, result.response_id))
    return _report(threshold=-1.0, outcomes=outcomes)


# ---------------------------------------------------------------------------
# threshold sweep


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    precision: float
    recall: float
    f1: float
    answered: int
    correct: int


@dataclass(frozen=True)
class SweepReport:
    rows: tuple[SweepRow, ...]
    best_threshold: float
    best_f1: float
    total: int

    def to_dict(self) -> dict:
        return {
            "rows": [vars(r) for r in self.rows],
            "best_threshold": self.best_threshold,
            "best_f1": self.best_f1,
            "total": self.total,
        }


def parse_grid(spec: str) -> list[float]:
    """Either 'start:stop:step' (inclusive endpoints) or comma-separated values."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError("grid range must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        values = []
        t = start
        while t <= stop + 1e-9:
            values.append(round(t, 10))
            t += step
        return values
    return [float(p) for p in spec.split(",") if p.strip()]


def threshold_sweep(
    index: QueryIndex,
    model: Classifier,
    rows,
    grid=DEFAULT_SWEEP_GRID,
    k: int = 1,
) -> SweepReport:
    """P/R/F1 of response fetching at each threshold in an ascending grid.

    Neighbours are computed once per query; each threshold then re-applies
    the same answer rule the online path uses.
    """
    grid = [float(t) for t in grid]
    if not grid:
        raise ValueError("empty threshold grid")
    if any(t < -1.0 or t > 1.0 for t in grid):
        raise ValueError("grid values must lie in [-1, 1]")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be sorted ascending without repeats")
    help_rows = _help_rows(rows)
    if not help_rows:
        raise ValueError("empty evaluation set")
    found_per_row = [
        (row.response_id, index.knn(model.sentence_vector(row.text), k=k))
        for row in help_rows
    ]
    sweep_rows: list[SweepRow] = []
    for t in grid:
        outcomes = [(gold, decide_response(found, t)) for gold, found in found_per_row]
        r = _report(t, outcomes)
        sweep_rows.append(
            SweepRow(
                threshold=t,
                precision=r.precision,
                recall=r.recall,
                f1=r.f1,
                answered=r.answered,
                correct=r.correct,
            )
        )
    # raising the threshold can only shrink the answered set
    for earlier, later in zip(sweep_rows, sweep_rows[1:]):
        assert later.recall <= earlier.recall + 1e-12, "recall must be non-increasing in threshold"
    best = max(range(len(sweep_rows)), key=lambda i: (sweep_rows[i].f1, -i))
    return SweepReport(
        rows=tuple(sweep_rows),
        best_threshold=sweep_rows[best].threshold,
        best_f1=sweep_rows[best].f1,
        total=len(help_rows),
    )


# ---------------------------------------------------------------------------
# model comparison


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[dict, ...]  # kind, precision, recall, f1, best_epoch, epochs_run

    def ordering(self) -> list[str]:
        return [r["kind"] for r in sorted(self.rows, key=lambda r: -r["f1"])]

    def to_dict(self) -> dict:
        return {"rows": list(self.rows), "ordering": self.ordering()}


def run_comparison(
    split: DatasetSplit,
    kinds: list[ModelKind],
    cfg: TrainConfig,
    norm_cfg=None,
) -> tuple[ComparisonReport, dict[str, Classifier]]:
    """Train each architecture with identical data/config/seed, score on test."""
    rows: list[dict] = []
    trained: dict[str, Classifier] = {}
    for kind in kinds:
        model, history = models.train(
            list(split.train), list(split.validation), kind, cfg, norm_cfg
        )
        precision, recall, f1 = models.evaluate(model, list(split.test))
        rows.append(
            {
                "kind": kind.value,
                "precision": precision,
                "recall": recall,
                "f1": f1,
                "best_epoch": model.best_epoch,
                "epochs_run": len(history),
            }
        )
        trained[kind.value] = model
    return ComparisonReport(rows=tuple(rows)), trained


def format_comparison(report: ComparisonReport) -> str:
    header = f"{'Model':<10} {'Precision':>9} {'Recall':>9} {'F1 Score':>9}"
    lines = [header, "-" * len(header)]
    for row in report.rows:
        lines.append(
            f"{row['kind']:<10} {row['precision']:>9.3f} {row['recall']:>9.3f} {row['f1']:>9.3f}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# the online pipeline shared by CLI and service


@dataclass
class QueryPipeline:
    model: Classifier
    index: QueryIndex
    responses: dict[str, str]
    actions: ActionLexicon
    skills: SkillLexicon
    table: ActionSkillTable


def load_pipeline(model_path: str, index_path: str) -> QueryPipeline:
    model = models.load_model(model_path)
    index, responses = retrieval.load_index(index_path)
    return QueryPipeline(
        model=model,
        index=index,
        responses=responses,
        actions=default_action_lexicon(),
        skills=default_skill_lexicon(),
        table=default_action_skill_table(),
    )


def answer_query(
    pipeline: QueryPipeline,
    text: str,
    threshold: float = 0.75,
    k: int = 1,
) -> dict:
    """Normalize, classify, and (for help queries) retrieve a response.

    Returns the wire-format dict: normalized_tokens, is_help, p_help, match,
    pos_baseline. match is null unless the classifier says help AND the
    nearest cached query clears the threshold with a plurality response.
    """
    if not text.strip():
        raise ValueError("text must be non-empty")
    model = pipeline.model
    normalized = textnorm.normalize(text, model.norm_cfg)
    tokens = normalized.content(model.norm_cfg.unk_token)
    p_help = float(model.predict_tokens(normalized.tokens))
    is_help = p_help >= 0.5
    match = None
    pos_baseline = None
    if is_help:
        result = retrieval.fetch_response(
            pipeline.index,
            pipeline.responses,
            text,
            encoder=model.sentence_vector,
            threshold=threshold,
            k=k,
        )
        if result.response is not None:
            match = {
                "matched_query": result.matched_query,
                "similarity": result.similarity,
                "response_id": result.response.response_id,
                "response_text": result.response.response_text,
            }
        pos = map_query(tokens, pipeline.actions, pipeline.skills, pipeline.table)
        pos_baseline = {
            "action": pos.action,
            "skill": pos.skill,
            "response_id": pos.response_id,
        }
    return {
        "normalized_tokens": list(tokens),
        "is_help": is_help,
        "p_help": p_help,
        "match": match,
        "pos_baseline": pos_baseline,
    }


def timed_answer_query(
    pipeline: QueryPipeline, text: str, threshold: float = 0.75, k: int = 1
) -> dict:
    """answer_query plus wall-clock latency_ms, the service's response shape."""
    start = time.perf_counter()
    body = answer_query(pipeline, text, threshold=threshold, k=k)
    body["latency_ms"] = (time.perf_counter() - start) * 1000.0
    return body


# ---------------------------------------------------------------------------
# configuration


def load_config(path: str | None = None) -> tuple[TrainConfig, object | None]:
    """JSON config with optional 'train' and 'norm' sections.

    Falls back to the HELPSYS_CONFIG environment variable when no path is
    given; returns defaults when neither is set.
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        return TrainConfig(), None
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    train_cfg = TrainConfig.from_dict(data.get("train", {}))
    norm_cfg = None
    if "norm" in data:
        norm_cfg = models._norm_cfg_from_dict(data["norm"])
    return train_cfg, norm_cfg
