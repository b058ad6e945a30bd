"""Certification of sampled approximations and audits of the score bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatchError
from .leverage import ScoreTrace, online_ridge_scores, score_sum_bound
from .linalg import Certificate, psd_sandwich_margins
from .samplers import BSSSampler, log_d
from .streams import as_stream

__all__ = [
    "Certificate",
    "ScoreAudit",
    "CountEstimate",
    "certify",
    "row_count_comparator",
    "audit_score_bound",
    "bss_count_comparator",
    "expected_count_bss",
]


def row_count_comparator(d: int, spectral_norm_sq: float, eps: float, delta: float) -> float:
    """``d ln d ln(eps ||A||^2 / delta) / eps^2``, dropping the last factor
    when its argument is at most ``e``."""
    base = d * log_d(d) / eps**2
    arg = eps * spectral_norm_sq / delta
    return base * math.log(arg) if arg > math.e else base


def certify(a_rows, kept_rows, eps: float, delta: float) -> Certificate:
    """Certify that the rescaled ``kept_rows`` approximate ``a_rows`` spectrally.

    ``kept_rows`` are the rows as emitted by a sampler, i.e. already multiplied
    by their ``1/sqrt(p)`` weights.
    """
    a = as_stream(a_rows).to_array()
    if a.shape[0] == 0:
        raise ValueError("cannot certify against an empty matrix")
    d = a.shape[1]
    kept = np.asarray(kept_rows, dtype=np.float64)
    if kept.size == 0:
        kept = np.zeros((0, d))
    if kept.ndim != 2 or kept.shape[1] != d:
        raise DimensionMismatchError(f"kept rows have shape {kept.shape}, expected (*, {d})")
    gram = a.T @ a
    cert = psd_sandwich_margins(gram, kept.T @ kept, eps, delta)
    snorm = float(np.linalg.eigvalsh(gram)[-1])
    return replace(
        cert,
        kept_rows=kept.shape[0],
        bound_rows=row_count_comparator(d, snorm, eps, delta),
    )


@dataclass(frozen=True)
class ScoreAudit:
    total: float
    bound: float
    slack_ratio: float
    holds: bool


def audit_score_bound(trace: ScoreTrace, d: int | None = None) -> ScoreAudit:
    """Compare the sum of online scores with ``2 d ln(1 + ||A||^2 / lam)``."""
    d = trace.d if d is None else d
    total = trace.total
    bound = score_sum_bound(d, trace.spectral_norm_sq, trace.lam)
    ratio = total / bound if bound > 0 else (0.0 if total == 0 else math.inf)
    return ScoreAudit(total=total, bound=bound, slack_ratio=ratio, holds=total <= bound)


@dataclass(frozen=True)
class CountEstimate:
    mean: float
    ci_low: float
    ci_high: float
    comparator: float
    counts: tuple[int, ...]


def bss_count_comparator(a, eps: float, delta: float) -> float:
    """``(8 / eps^2) * sum(l_i)`` with online ridge scores at ``2 delta / eps``."""
    return 8.0 / eps**2 * online_ridge_scores(a, 2.0 * delta / eps).total


def expected_count_bss(stream, eps: float, delta: float, trials: int, seed: int = 0) -> CountEstimate:
    """Monte-Carlo mean of the BSS sample size with a 95% normal interval.

    Trial ``t`` uses seed ``seed + t``.
    """
    if trials < 2:
        raise ValueError(f"need at least 2 trials, got {trials}")
    a = as_stream(stream).to_array()
    d = a.shape[1]
    counts = []
    for t in range(trials):
        sampler = BSSSampler(d, eps, delta, seed=seed + t)
        sampler.run(a)
        counts.append(sampler.out.count)
    arr = np.asarray(counts, dtype=np.float64)
    mean = float(arr.mean())
    half = 1.96 * float(arr.std(ddof=1)) / math.sqrt(trials)
    return CountEstimate(
        mean=mean,
        ci_low=mean - half,
        ci_high=mean + half,
        comparator=bss_count_comparator(a, eps, delta),
        counts=tuple(counts),
    )
