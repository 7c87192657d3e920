"""Retrieval and segmentation evaluation metrics.

Retrieval metrics take a ranking (a sequence of image ids, or anything with
an ``image_ids`` attribute such as :class:`~recnn.retrieval.RankedList`) and
the set of ids relevant to that query. Ranks are 1-based throughout.

ANMRR follows the MPEG-7 definition: with ``NG`` relevant items and window
``K = min(4*NG, 2*GTM)`` (``GTM`` the largest ``NG`` over all queries), a
relevant item ranked beyond ``K`` is charged rank ``1.25*K``; then

    AVR  = mean rank of the NG relevant items
    MRR  = AVR - 0.5 - NG/2
    NMRR = MRR / (1.25*K - 0.5 - NG/2)

and ANMRR is the mean NMRR over queries (0 is perfect, 1 is worst).
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

DEFAULT_K = (5, 10, 20, 50)
RECALL_LEVELS = tuple(i / 10 for i in range(11))


def _ids(ranked) -> Sequence:
    return getattr(ranked, "image_ids", ranked)


def relevance_flags(ranked, relevant) -> np.ndarray:
    return np.fromiter((i in relevant for i in _ids(ranked)), dtype=bool)


def precision_at_k(ranked, relevant, k: int) -> float:
    """Fraction of the top ``k`` that is relevant; short lists still divide by ``k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return float(relevance_flags(ranked, relevant)[:k].sum()) / k


def average_precision(ranked, relevant) -> float:
    """Mean of the precision at each relevant item's rank, over all NG relevant items.

    Relevant items missing from the ranking contribute zero.
    """
    if not relevant:
        raise ValueError("relevant set must be non-empty")
    flags = relevance_flags(ranked, relevant)
    hit_ranks = np.flatnonzero(flags) + 1
    precisions = np.arange(1, hit_ranks.size + 1) / hit_ranks
    return float(precisions.sum()) / len(relevant)


def anmrr_window(ng: int, gtm: int, k_rule: str = "mpeg7") -> int:
    if k_rule == "mpeg7":
        return min(4 * ng, 2 * gtm)
    if k_rule == "2ng":
        return 2 * ng
    raise ValueError(f"unknown ANMRR K rule {k_rule!r}")


def nmrr(ranked, relevant, gtm: int, k_rule: str = "mpeg7") -> float:
    ng = len(relevant)
    if ng < 1:
        raise ValueError("relevant set must be non-empty")
    k = anmrr_window(ng, gtm, k_rule)
    position = {image_id: r for r, image_id in enumerate(_ids(ranked), start=1)}
    penalty = 1.25 * k
    ranks = [position.get(i, np.inf) for i in relevant]
    ranks = [r if r <= k else penalty for r in ranks]
    avr = sum(ranks) / ng
    mrr = avr - 0.5 - 0.5 * ng
    denom = penalty - 0.5 - 0.5 * ng
    assert denom > 0, "ANMRR denominator vanished"
    return mrr / denom


def anmrr(rankings, relevant_sets, k_rule: str = "mpeg7") -> float:
    relevant_sets = list(relevant_sets)
    gtm = max(len(s) for s in relevant_sets)
    return float(np.mean([nmrr(r, s, gtm, k_rule) for r, s in zip(rankings, relevant_sets, strict=True)]))


def interpolated_precision(ranked, relevant) -> np.ndarray:
    """Precision at recall 0.0, 0.1, ..., 1.0, interpolated as the max precision at any recall >= r.

    Recall levels never reached get precision 0.
    """
    ng = len(relevant)
    if ng < 1:
        raise ValueError("relevant set must be non-empty")
    hit_ranks = np.flatnonzero(relevance_flags(ranked, relevant)) + 1
    hits = np.arange(1, hit_ranks.size + 1)
    precisions = hits / hit_ranks
    out = np.zeros(len(RECALL_LEVELS))
    for level in range(len(RECALL_LEVELS)):
        # recall hits/ng >= level/10, compared in integers to avoid 0.1-step rounding
        reached = 10 * hits >= level * ng
        if reached.any():
            out[level] = precisions[reached].max()
    return out


def interpolated_pr(rankings, relevant_sets) -> tuple[np.ndarray, np.ndarray]:
    """Query-averaged 11-point interpolated precision-recall curve as ``(recalls, precisions)``."""
    curves = [interpolated_precision(r, s) for r, s in zip(rankings, relevant_sets, strict=True)]
    return np.array(RECALL_LEVELS), np.mean(curves, axis=0)


@dataclass
class MetricsReport:
    scheme: str
    anmrr: float
    map: float
    p_at: dict[int, float]
    pr_curve: list[tuple[float, float]] = field(default_factory=list)
    num_queries: int = 0


def evaluate_rankings(
    rankings,
    relevant_sets,
    scheme: str = "",
    k_list=DEFAULT_K,
    k_rule: str = "mpeg7",
) -> MetricsReport:
    """Average every retrieval metric over a set of queries."""
    rankings = list(rankings)
    relevant_sets = list(relevant_sets)
    if not rankings or len(rankings) != len(relevant_sets):
        raise ValueError("need one relevant set per ranking and at least one query")
    p_at = {
        k: float(np.mean([precision_at_k(r, s, k) for r, s in zip(rankings, relevant_sets)])) for k in k_list
    }
    mean_ap = float(np.mean([average_precision(r, s) for r, s in zip(rankings, relevant_sets)]))
    recalls, precisions = interpolated_pr(rankings, relevant_sets)
    return MetricsReport(
        scheme=scheme,
        anmrr=anmrr(rankings, relevant_sets, k_rule),
        map=mean_ap,
        p_at=p_at,
        pr_curve=[(float(r), float(p)) for r, p in zip(recalls, precisions)],
        num_queries=len(rankings),
    )


# -- segmentation ------------------------------------------------------------


def confusion_matrix(pred: np.ndarray, gt: np.ndarray, ignore: int = 255) -> np.ndarray:
    """``n[i, j]`` = pixels of ground-truth class ``i`` predicted as ``j``.

    Ground-truth ignore pixels are dropped. The matrix has one row and column
    per class id up to the largest non-ignore value in either map; a
    predicted ignore value is counted in no column.
    """
    pred = np.asarray(getattr(pred, "labels", pred)).astype(np.int64)
    gt = np.asarray(getattr(gt, "labels", gt)).astype(np.int64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    keep = gt != ignore
    if not keep.any():
        raise ValueError("ground truth has no labelled pixels")
    p, g = pred[keep], gt[keep]
    valid_pred = p[p != ignore]
    n = int(max(g.max(), valid_pred.max() if valid_pred.size else 0)) + 1
    # route predicted-ignore to an overflow column, then drop it
    p = np.where(p == ignore, n, p)
    counts = np.bincount(g * (n + 1) + p, minlength=n * (n + 1)).reshape(n, n + 1)
    return counts[:, :n]


def seg_metrics_from_confusion(n: np.ndarray, totals: np.ndarray | None = None) -> tuple[float, float, float]:
    """Pixel accuracy, mean accuracy and mean IU, averaged over classes present in ground truth.

    ``totals`` are per-class ground-truth pixel counts; by default the row
    sums of ``n``.
    """
    n = np.asarray(n, dtype=np.float64)
    t = n.sum(axis=1) if totals is None else np.asarray(totals, dtype=np.float64)
    tp = np.diag(n)
    present = t > 0
    pixel_acc = tp.sum() / t.sum()
    mean_acc = np.mean(tp[present] / t[present])
    union = t + n.sum(axis=0) - tp
    mean_iu = np.mean(tp[present] / union[present])
    return float(pixel_acc), float(mean_acc), float(mean_iu)


def seg_metrics(pred, gt, ignore: int = 255) -> tuple[float, float, float]:
    pred_arr = np.asarray(getattr(pred, "labels", pred)).astype(np.int64)
    gt_arr = np.asarray(getattr(gt, "labels", gt)).astype(np.int64)
    n = confusion_matrix(pred_arr, gt_arr, ignore)
    # a pixel predicted as ignore is still part of its gt class total
    totals = np.bincount(gt_arr[gt_arr != ignore], minlength=n.shape[0])[: n.shape[0]]
    return seg_metrics_from_confusion(n, totals)
