"""Token- and name-level scoring, agreement, and significance."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .labels import OUTSIDE_ID, NameSpan

MCNEMAR_CRITICAL_05 = 3.841  # chi-square, 1 degree of freedom


@dataclass(frozen=True)
class PrfReport:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def __add__(self, other: "PrfReport") -> "PrfReport":
        return PrfReport(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def row(self) -> str:
        return f"{self.precision:.4f},{self.recall:.4f},{self.f1:.4f},{self.tp},{self.fp},{self.fn}"


def token_prf(
    pred: Sequence[str], gold: Sequence[str], mode: str = "span-only"
) -> PrfReport:
    """Per-token scoring over class identifiers.

    ``span-only`` counts a hit whenever both sides mark a name token;
    ``fine-grained`` requires the exact class, counting a class mismatch on
    a name token once as a false positive and once as a false negative.
    """
    if len(pred) != len(gold):
        raise ValueError("prediction and gold lengths differ")
    if mode not in ("span-only", "fine-grained"):
        raise ValueError(f"unknown mode: {mode}")
    tp = fp = fn = 0
    for p, g in zip(pred, gold):
        p_name, g_name = p != OUTSIDE_ID, g != OUTSIDE_ID
        if mode == "span-only":
            if p_name and g_name:
                tp += 1
            elif p_name:
                fp += 1
            elif g_name:
                fn += 1
        else:
            if p_name and g_name:
                if p == g:
                    tp += 1
                else:
                    fp += 1
                    fn += 1
            elif p_name:
                fp += 1
            elif g_name:
                fn += 1
    return PrfReport(tp, fp, fn)


def name_prf(
    pred: Sequence[NameSpan], gold: Sequence[NameSpan], strict_forms: bool = False
) -> PrfReport:
    """Exact span matching; ``strict_forms`` additionally requires the
    per-token forms to agree."""

    def key(span: NameSpan):
        if strict_forms:
            return (span.start_token, span.end_token, span.forms)
        return (span.start_token, span.end_token)

    pred_keys = Counter(key(s) for s in pred)
    gold_keys = Counter(key(s) for s in gold)
    tp = sum(min(pred_keys[k], gold_keys[k]) for k in pred_keys)
    return PrfReport(tp, len(pred) - tp, len(gold) - tp)


def cohen_kappa(ann_a: Sequence, ann_b: Sequence) -> float:
    """Chance-corrected agreement between two categorical sequences."""
    if len(ann_a) != len(ann_b):
        raise ValueError("annotation lengths differ")
    if not ann_a:
        raise ValueError("cannot compute agreement on empty input")
    n = len(ann_a)
    observed = sum(a == b for a, b in zip(ann_a, ann_b)) / n
    counts_a = Counter(ann_a)
    counts_b = Counter(ann_b)
    expected = sum(counts_a[c] * counts_b.get(c, 0) for c in counts_a) / (n * n)
    if expected == 1.0:
        return 1.0 if observed == 1.0 else 0.0
    return (observed - expected) / (1.0 - expected)


def mcnemar(b: int, c: int) -> tuple[float, bool]:
    """Continuity-corrected McNemar statistic over discordant counts.

    ``b`` and ``c`` count the items each system got right where the other
    went wrong; returns the statistic and significance at the 0.05 level.
    """
    if b < 0 or c < 0:
        raise ValueError("discordant counts must be non-negative")
    if b + c == 0:
        raise ValueError("no discordant pairs; the test is undefined")
    statistic = (abs(b - c) - 1) ** 2 / (b + c)
    return statistic, statistic > MCNEMAR_CRITICAL_05
