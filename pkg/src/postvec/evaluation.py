"""Ranked prediction and retrieval-style metrics.

Every example gets a full ranking of the label set by descending
posterior (ties broken by ascending label index, so rankings are
deterministic). From the rankings:

    precision@1   fraction of examples whose top label is gold
    recall@10     mean over examples of |gold among top k| / |gold|,
                  with k = min(10, L)
    mean rank     mean 1-based rank of gold labels; averaged over
                  (example, gold tag) pairs by default, or per example
                  first with mode="example"

Reports carry only ranking-derived quantities, so batched and unbatched
evaluation of the same model produce equal reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import layers, objective
from .errors import ConfigError

RECALL_CUTOFF = 10


def rank(posterior_row: np.ndarray) -> np.ndarray:
    """Label indices by descending posterior; stable under ties."""
    row = np.asarray(posterior_row)
    return np.argsort(-row, kind="stable")


@dataclass(frozen=True)
class ExampleResult:
    example_id: int
    top_label: int
    gold_ranks: tuple[int, ...]     # 1-based rank of each gold label


@dataclass
class EvalReport:
    precision_at_1: float
    recall_at_10: float
    mean_rank: float
    n_evaluated: int
    n_dropped: int
    per_example: tuple[ExampleResult, ...]

    def as_record(self) -> dict:
        return {
            "precision_at_1": self.precision_at_1,
            "recall_at_10": self.recall_at_10,
            "mean_rank": self.mean_rank,
            "n_evaluated": self.n_evaluated,
            "n_dropped": self.n_dropped,
        }


def metrics(rankings: Sequence[np.ndarray], gold_sets: Sequence[Sequence[int]],
            n_dropped: int = 0, mean_rank_mode: str = "pair",
            example_ids: Sequence[int] | None = None) -> EvalReport:
    if len(rankings) != len(gold_sets) or not rankings:
        raise ConfigError("need one nonempty gold set per ranking")
    if mean_rank_mode not in ("pair", "example"):
        raise ConfigError(f"unknown mean rank mode {mean_rank_mode!r}")
    if example_ids is None:
        example_ids = range(len(rankings))

    n_labels = len(rankings[0])
    cutoff = min(RECALL_CUTOFF, n_labels)
    hits_at_1 = 0
    recall_sum = 0.0
    rank_values = []
    per_example = []
    for ex_id, order, gold in zip(example_ids, rankings, gold_sets):
        assert len(gold) > 0, "empty gold set should have been dropped upstream"
        inverse = np.empty(n_labels, dtype=np.int64)
        inverse[order] = np.arange(n_labels)
        gold_ranks = tuple(sorted(int(inverse[g]) + 1 for g in gold))
        hits_at_1 += 1 if int(order[0]) in set(gold) else 0
        recall_sum += sum(1 for rk in gold_ranks if rk <= cutoff) / len(gold)
        if mean_rank_mode == "pair":
            rank_values.extend(gold_ranks)
        else:
            rank_values.append(sum(gold_ranks) / len(gold_ranks))
        per_example.append(ExampleResult(example_id=int(ex_id),
                                         top_label=int(order[0]),
                                         gold_ranks=gold_ranks))
    n = len(rankings)
    return EvalReport(
        precision_at_1=hits_at_1 / n,
        recall_at_10=recall_sum / n,
        mean_rank=float(np.mean(rank_values)),
        n_evaluated=n,
        n_dropped=n_dropped,
        per_example=tuple(per_example),
    )


def evaluate(model, examples, batch_size: int = 256, n_dropped: int = 0,
             mean_rank_mode: str = "pair", dump=None, dump_k: int = 10) -> EvalReport:
    """Score a dataset; deterministic and invariant to the batch size.

    ``dump`` may be a writable text stream receiving one top-``dump_k``
    ranked list per example.
    """
    if not examples:
        raise ConfigError("cannot evaluate an empty dataset")
    for i, ex in enumerate(examples):
        if max(ex.tag_ids) >= model.n_labels:
            raise ConfigError(
                f"example {i} carries label id {max(ex.tag_ids)} but the model "
                f"has only {model.n_labels} labels (symbol/label table mismatch?)"
            )
    seqs = []
    for i, ex in enumerate(examples):
        s = model.encode_text(ex.text)
        if s.size == 0:
            raise ConfigError(f"example {i} encodes to an empty sequence")
        seqs.append(s)

    rankings = []
    for start in range(0, len(seqs), batch_size):
        chunk = seqs[start:start + batch_size]
        e, _ = layers.encode_batch(model.encoder, chunk)
        probs = objective.posteriors(model.softmax, e)
        for row_i, row in enumerate(probs):
            order = rank(row)
            rankings.append(order)
            if dump is not None:
                top = ((model.label_names[j], row[j]) for j in order[:dump_k])
                dump.write(" ".join(f"{name}:{p:.12g}" for name, p in top) + "\n")
    return metrics(rankings, [ex.tag_ids for ex in examples], n_dropped=n_dropped,
                   mean_rank_mode=mean_rank_mode)
