"""Novelty, surprise, and Aha detection math.

Pure functions over vectors and token log-likelihoods:

  cosine_similarity(a, b)            dot(a, b) / (|a| |b|)
  novelty_score(candidate, priors)   1 - max cosine against prior candidates
  surprise_score(scored)             mean per-token negative log-likelihood (nats)
  detect_aha(novelty, surprise, th)  strict conjunction against both thresholds

Log-likelihoods are natural logs throughout; conversion to other bases is
presentation only. An empty prior set yields novelty 1.0 by convention (the
first candidate has nothing to resemble).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .domain import AhaThresholds
from .errors import ScideaError

from .gateway import ScoredContinuation

Vector = Sequence[float]


def _as_array(v: Vector, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ScideaError("DIMENSION_MISMATCH", f"{name} must be a non-empty 1-d vector", vector=name)
    return arr


def cosine_similarity(a: Vector, b: Vector) -> float:
    """Cosine of the angle between two equal-dimension non-zero vectors."""
    va = _as_array(a, "a")
    vb = _as_array(b, "b")
    if va.shape != vb.shape:
        raise ScideaError(
            "DIMENSION_MISMATCH",
            f"vectors differ in dimension: {va.size} vs {vb.size}",
            left=va.size,
            right=vb.size,
        )
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ScideaError("ZERO_VECTOR", "cosine similarity is undefined for all-zero vectors")
    return float(np.dot(va, vb) / (na * nb))


def novelty_score(candidate_vec: Vector, prior_vecs: Sequence[Vector]) -> float:
    """1 minus the maximum cosine similarity against prior candidates.

    Empty prior set returns 1.0: the first idea is maximally novel among
    generated ideas. No clamping is applied; negative cosines honestly push
    novelty above 1.
    """
    if not prior_vecs:
        return 1.0
    best = max(cosine_similarity(candidate_vec, prior) for prior in prior_vecs)
    return 1.0 - best


def surprise_score(scored: ScoredContinuation) -> float:
    """Mean per-token negative log-likelihood in nats.

    Length-normalized so one threshold is comparable across idea lengths;
    use surprise_sum for the raw (length-sensitive) total.
    """
    if not scored.tokens:
        raise ScideaError("EMPTY_CONTINUATION", "cannot score an empty continuation")
    return -sum(scored.logprobs) / len(scored.tokens)


def surprise_sum(scored: ScoredContinuation) -> float:
    """Un-normalized total negative log-likelihood, exposed for auditing."""
    if not scored.tokens:
        raise ScideaError("EMPTY_CONTINUATION", "cannot score an empty continuation")
    return -sum(scored.logprobs)


def detect_aha(novelty: float, surprise: float, thresholds: AhaThresholds) -> bool:
    """Strict conjunction: both scores must exceed their thresholds.

    Boundary values do not qualify: novelty == theta_n or surprise == theta_s
    is not an Aha moment.
    """
    for name, value in (("novelty", novelty), ("surprise", surprise)):
        if not math.isfinite(value):
            raise ScideaError("OUT_OF_RANGE", f"{name} must be finite, got {value}", field=name)
    return novelty > thresholds.theta_n and surprise > thresholds.theta_s
