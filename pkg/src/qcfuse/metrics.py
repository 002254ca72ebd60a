"""Fidelity metrics comparing a policy run against the full-computation oracle."""

from __future__ import annotations

import numpy as np

from qcfuse.model import PAD_ID

KL_FLOOR = 1e-12


def softmax64(logits: np.ndarray) -> np.ndarray:
    x = np.asarray(logits, dtype=np.float64)
    x = x - x.max()
    e = np.exp(x)
    return e / e.sum()


def logit_divergence(full_logits: np.ndarray, policy_logits: np.ndarray) -> tuple[float, float]:
    """(max abs logit difference, KL(softmax_full || softmax_policy))."""
    diff = float(np.abs(np.asarray(full_logits, np.float64) -
                        np.asarray(policy_logits, np.float64)).max())
    p = np.maximum(softmax64(full_logits), KL_FLOOR)
    q = np.maximum(softmax64(policy_logits), KL_FLOOR)
    kl = float(np.sum(p * np.log(p / q)))
    return diff, max(kl, 0.0)


def token_match_rate(reference: list[int], candidate: list[int], horizon: int = 32) -> float:
    """Fraction of the first ``horizon`` greedy tokens that agree.

    Sequences shorter than the horizon (early EOS) are padded with PAD, so
    two runs that stop at the same point still count as a full match.
    """
    a = list(reference)[:horizon] + [PAD_ID] * max(0, horizon - len(reference))
    b = list(candidate)[:horizon] + [PAD_ID] * max(0, horizon - len(candidate))
    return sum(1 for x, y in zip(a, b) if x == y) / horizon


def selection_overlap(selected, oracle_top) -> float:
    """|selected ∩ oracle| / N; both empty counts as perfect agreement."""
    sel = set(int(i) for i in selected)
    ora = set(int(i) for i in oracle_top)
    if not sel and not ora:
        return 1.0
    if not sel or not ora:
        return 0.0
    return len(sel & ora) / len(sel)
