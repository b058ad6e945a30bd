"""Exact ridge leverage scores: online (prefix) and offline (full matrix)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .linalg import PSDState
from .streams import as_stream


@dataclass
class ScoreTrace:
    scores: np.ndarray
    lam: float
    spectral_norm_sq: float
    d: int

    @property
    def total(self) -> float:
        return float(np.sum(self.scores))


def _check_lambda(lam: float) -> None:
    if not (math.isfinite(lam) and lam > 0):
        raise ValueError(f"ridge parameter must be positive and finite, got {lam}")


def _spectral_norm_sq(gram: np.ndarray) -> float:
    return max(float(la.eigvalsh(gram, check_finite=False)[-1]), 0.0)


def _online(stream, lam: float, inclusive: bool) -> ScoreTrace:
    _check_lambda(lam)
    stream = as_stream(stream)
    state = PSDState(stream.d, lam)
    scores = []
    for row in stream:
        if inclusive:
            state.absorb_row(row)
            scores.append(state.ridge_quadratic(row))
        else:
            scores.append(min(state.ridge_quadratic(row), 1.0))
            state.absorb_row(row)
    return ScoreTrace(
        scores=np.asarray(scores, dtype=np.float64),
        lam=lam,
        spectral_norm_sq=_spectral_norm_sq(state.gram),
        d=stream.d,
    )


def online_ridge_scores(stream, lam: float) -> ScoreTrace:
    """``l_i = min(a_i^T (A_{i-1}^T A_{i-1} + lam I)^{-1} a_i, 1)`` against the
    exact prefix of the stream.

    >>> import numpy as np
    >>> online_ridge_scores(np.ones((3, 1)), 1.0).scores
    array([1.        , 0.5       , 0.33333333])
    """
    return _online(stream, lam, inclusive=False)


def online_ridge_scores_inclusive(stream, lam: float) -> ScoreTrace:
    """Variant with the current row already in the prefix Gram. Never exceeds
    :func:`online_ridge_scores` and needs no clamp (it is always below 1)."""
    return _online(stream, lam, inclusive=True)


def offline_ridge_scores(rows, lam: float) -> ScoreTrace:
    """``a_i^T (A^T A + lam I)^{-1} a_i`` for every row of the full matrix."""
    _check_lambda(lam)
    a = as_stream(rows).to_array()
    d = a.shape[1]
    gram = a.T @ a
    factor = la.cho_factor(gram + lam * np.eye(d), lower=True, check_finite=False)
    solved = la.cho_solve(factor, a.T, check_finite=False)
    scores = np.maximum(np.einsum("ij,ji->i", a, solved), 0.0)
    return ScoreTrace(scores=scores, lam=lam, spectral_norm_sq=_spectral_norm_sq(gram), d=d)


def score_sum_bound(d: int, spectral_norm_sq: float, lam: float) -> float:
    """Deterministic ceiling ``2 d ln(1 + ||A||_2^2 / lam)`` on the online scores."""
    _check_lambda(lam)
    return 2.0 * d * math.log1p(spectral_norm_sq / lam)
