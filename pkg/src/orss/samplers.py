"""Online row samplers.

Each sampler consumes rows one at a time and returns an irrevocable
:class:`SampleDecision`. A kept row is emitted rescaled by ``1/sqrt(p)``.

* :class:`OnlineSampler` scores each row against the sample kept so far.
* :class:`SlimSampler` scores rows with a private constant-accuracy
  :class:`OnlineSampler` and streams its own sample straight to a sink.
* :class:`BSSSampler` keeps the sample between two moving barriers and never
  fails to produce a valid approximation.

All samplers draw exactly one uniform variate per row, so two samplers that
share a seed and compute the same probabilities make the same decisions.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Callable, Iterable

import numpy as np

from .errors import DimensionMismatchError, InvariantViolation
from .leverage import offline_ridge_scores
from .linalg import MaintainedInverse, PSDState, as_row
from .streams import as_stream

ALGORITHMS = ("online", "slim", "bss", "offline")

Sink = Callable[[np.ndarray, float], None]


@dataclass(frozen=True)
class SampleDecision:
    kept: bool
    probability: float
    rescale: float
    score_used: float


@dataclass
class SamplerStats:
    kept: int
    n: int
    d: int
    sum_scores: float
    peak_memory_rows: int
    seconds: float

    def as_dict(self) -> dict:
        return asdict(self)


def log_d(d: int) -> float:
    # c = 8 log(d) / eps^2 would vanish at d = 1
    return max(math.log(d), 1.0)


def oversampling(d: int, eps: float) -> float:
    return 8.0 * log_d(d) / eps**2


def _check_params(eps: float, delta: float) -> None:
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not (math.isfinite(delta) and delta > 0):
        raise ValueError(f"delta must be positive, got {delta}")


def _spawn(seed, k: int) -> list[np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in ss.spawn(k)]


class _RowBuffer:
    """Collects emitted rows and weights, or forwards them to a sink."""

    def __init__(self, d: int, sink: Sink | None):
        self.d = d
        self.sink = sink
        self.rows: list[np.ndarray] = []
        self.weights: list[float] = []
        self.count = 0

    def emit(self, row: np.ndarray, rescale: float) -> None:
        self.count += 1
        out = row * rescale
        if self.sink is not None:
            self.sink(out, rescale)
        else:
            self.rows.append(out)
            self.weights.append(rescale)

    def array(self) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, self.d))
        return np.vstack(self.rows)


class _Sampler:
    def __init__(self, d: int, sink: Sink | None):
        if d < 1:
            raise ValueError(f"dimension must be positive, got {d}")
        self.d = d
        self.n = 0
        self.sum_scores = 0.0
        self.out = _RowBuffer(d, sink)
        self._t0 = time.perf_counter()

    def _decide(self, row: np.ndarray, p: float, score: float) -> SampleDecision:
        u = self.rng.random()
        self.n += 1
        self.sum_scores += score
        if u < p:
            rescale = 1.0 / math.sqrt(p)
            self.out.emit(row, rescale)
            return SampleDecision(True, p, rescale, score)
        return SampleDecision(False, p, 0.0, score)

    @property
    def kept_rows(self) -> np.ndarray:
        """Kept rows, already rescaled (empty when a sink consumed them)."""
        return self.out.array()

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.out.weights)

    @property
    def peak_memory_rows(self) -> int:
        return self.out.count

    def run(self, rows: Iterable) -> list[SampleDecision]:
        return [self.step(r) for r in rows]

    def finish(self) -> SamplerStats:
        return SamplerStats(
            kept=self.out.count,
            n=self.n,
            d=self.d,
            sum_scores=self.sum_scores,
            peak_memory_rows=self.peak_memory_rows,
            seconds=time.perf_counter() - self._t0,
        )


class OnlineSampler(_Sampler):
    """Sampling by approximate online ridge leverage scores.

    Row ``a`` is scored as ``min((1 + eps) a^T (G~ + lam I)^{-1} a, 1)`` where
    ``G~`` is the Gram matrix of the rescaled sample so far and
    ``lam = delta / eps``; it is kept with probability ``min(c * score, 1)``,
    ``c = 8 log(d) / eps^2``.
    """

    def __init__(self, d: int, eps: float, delta: float, seed=None, sink: Sink | None = None):
        _check_params(eps, delta)
        super().__init__(d, sink)
        self.eps = eps
        self.delta = delta
        self.lam = delta / eps
        self.c = oversampling(d, eps)
        self.rng, self.sketch_rng = _spawn(seed, 2)
        self.kept_state = PSDState(d, self.lam)

    def score(self, row: np.ndarray) -> float:
        return min((1.0 + self.eps) * self.kept_state.ridge_quadratic(row), 1.0)

    def _commit(self, row: np.ndarray, score: float) -> SampleDecision:
        p = min(self.c * score, 1.0)
        decision = self._decide(row, p, score)
        if decision.kept:
            self.kept_state.absorb_row(row, 1.0 / p)
        return decision

    def step(self, row) -> SampleDecision:
        row = as_row(row, self.d, index=self.n)
        return self._commit(row, self.score(row))

    def step_block(self, rows, sketch_dim: int, orthonormal: bool | None = None) -> list[SampleDecision]:
        """Score a whole block against the sample as it stood at the block
        boundary (via a random sketch), then decide each row in order."""
        block = np.vstack([as_row(r, self.d, index=self.n + i) for i, r in enumerate(rows)])
        quad = sketched_quadratics(
            self.kept_state.inv, block, sketch_dim, self.sketch_rng, orthonormal=orthonormal
        )
        scores = np.minimum((1.0 + self.eps) * quad, 1.0)
        return [self._commit(row, float(s)) for row, s in zip(block, scores)]


def sketched_quadratics(
    inv: np.ndarray,
    rows: np.ndarray,
    sketch_dim: int,
    rng: np.random.Generator,
    orthonormal: bool | None = None,
) -> np.ndarray:
    """Estimate ``r^T inv r`` for every row ``r`` with a random sign sketch.

    With ``inv = F F^T`` the estimate is ``||S F^T r||^2``. ``S`` is a
    ``sketch_dim x d`` Rademacher matrix scaled by ``1/sqrt(sketch_dim)``; when
    ``orthonormal`` (default: ``sketch_dim >= d``) its columns are
    orthonormalized so the sketch is an exact isometry.
    """
    if sketch_dim < 1:
        raise ValueError(f"sketch_dim must be >= 1, got {sketch_dim}")
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    d = inv.shape[0]
    if rows.shape[1] != d:
        raise DimensionMismatchError(f"rows have {rows.shape[1]} columns, expected {d}")
    if orthonormal is None:
        orthonormal = sketch_dim >= d
    if orthonormal and sketch_dim < d:
        raise ValueError("an orthonormal sketch needs sketch_dim >= d")

    signs = rng.choice((-1.0, 1.0), size=(sketch_dim, d))
    if orthonormal:
        sketch, _ = np.linalg.qr(signs)
    else:
        sketch = signs / math.sqrt(sketch_dim)
    factor = np.linalg.cholesky(inv)
    projected = rows @ factor @ sketch.T
    return np.einsum("ij,ij->i", projected, projected)


def batch_scores(state: OnlineSampler, rows, sketch_dim: int, rng=None, orthonormal=None) -> np.ndarray:
    """Keep-probabilities for a block of rows from the sampler's current sample.

    Does not advance the sampler.
    """
    rng = np.random.default_rng(rng)
    block = np.vstack([as_row(r, state.d) for r in rows])
    quad = sketched_quadratics(state.kept_state.inv, block, sketch_dim, rng, orthonormal)
    return np.minimum(state.c * np.minimum((1.0 + state.eps) * quad, 1.0), 1.0)


class SlimSampler(_Sampler):
    """Low-memory variant: scores come from an independent
    ``OnlineSampler(eps=1/2, delta=delta/(2 eps))`` whose sample is the only
    state kept in memory; the outer sample goes to ``sink`` as it is drawn
    (or is buffered when no sink is given).
    """

    def __init__(self, d: int, eps: float, delta: float, seed=None, sink: Sink | None = None):
        _check_params(eps, delta)
        super().__init__(d, sink)
        self.eps = eps
        self.delta = delta
        self.lam = delta / eps
        self.c = oversampling(d, eps)
        inner_seed, outer_seed = np.random.SeedSequence(seed).spawn(2)
        self.rng = np.random.default_rng(outer_seed)
        self.inner = OnlineSampler(d, 0.5, delta / (2.0 * eps), seed=inner_seed)
        self._peak_inner = 0

    def step(self, row) -> SampleDecision:
        row = as_row(row, self.d, index=self.n)
        score = self.inner.step(row).score_used
        self._peak_inner = max(self._peak_inner, self.inner.out.count)
        return self._decide(row, min(self.c * score, 1.0), score)

    @property
    def peak_memory_rows(self) -> int:
        return self._peak_inner


class BSSSampler(_Sampler):
    """Randomized online barrier sampling.

    Maintains ``X_U = B_U - G~`` and ``X_L = G~ - B_L`` (both start at
    ``delta * I``) with their inverses. Row ``a`` is kept with probability
    ``min(c_U a^T X_U^{-1} a + c_L a^T X_L^{-1} a, 1)``; afterwards the barriers
    advance by ``(1 + eps) a a^T`` and ``(1 - eps) a a^T``. Both gap updates
    share the direction ``a`` and are applied as one net rank-one update each.

    With ``probe_gaps`` the smallest eigenvalue of both gap matrices is checked
    after every row and its running minimum kept in ``min_gap_eigenvalue``.
    """

    def __init__(
        self,
        d: int,
        eps: float,
        delta: float,
        seed=None,
        sink: Sink | None = None,
        probe_gaps: bool = False,
    ):
        _check_params(eps, delta)
        super().__init__(d, sink)
        self.eps = eps
        self.delta = delta
        self.c_upper = 2.0 / eps + 1.0
        self.c_lower = 2.0 / eps - 1.0
        self.rng = _spawn(seed, 1)[0]
        self.upper = MaintainedInverse(delta * np.eye(d))
        self.lower = MaintainedInverse(delta * np.eye(d))
        self.probe_gaps = probe_gaps
        self.min_gap_eigenvalue = float(delta)

    def step(self, row) -> SampleDecision:
        row = as_row(row, self.d, index=self.n)
        score = self.c_upper * self.upper.quadratic(row) + self.c_lower * self.lower.quadratic(row)
        p = min(score, 1.0)
        decision = self._decide(row, p, score)
        if p > 0.0:
            gained = 1.0 / p if decision.kept else 0.0
            self.upper.update(row, (1.0 + self.eps) - gained)
            self.lower.update(row, gained - (1.0 - self.eps))
        if self.probe_gaps:
            lo = min(self.upper.min_eigenvalue(), self.lower.min_eigenvalue())
            self.min_gap_eigenvalue = min(self.min_gap_eigenvalue, lo)
            if not lo > 0.0:
                raise InvariantViolation(f"gap matrix lost definiteness at row {self.n - 1}: {lo:g}")
        return decision


@dataclass
class SampleRun:
    rows: np.ndarray
    weights: np.ndarray
    stats: SamplerStats
    decisions: list[SampleDecision]


def make_sampler(algorithm: str, d: int, eps: float, delta: float, seed=None, sink=None, **kw):
    classes = {"online": OnlineSampler, "slim": SlimSampler, "bss": BSSSampler}
    if algorithm not in classes:
        raise ValueError(f"unknown streaming algorithm {algorithm!r}")
    return classes[algorithm](d, eps, delta, seed=seed, sink=sink, **kw)


def _run_offline(stream, eps, delta, seed, sink) -> SampleRun:
    _check_params(eps, delta)
    t0 = time.perf_counter()
    a = stream.to_array()
    d = stream.d
    scores = offline_ridge_scores(a, delta / eps).scores if a.shape[0] else np.zeros(0)
    c = oversampling(d, eps)
    rng = _spawn(seed, 1)[0]
    out = _RowBuffer(d, sink)
    decisions = []
    for row, score in zip(a, scores):
        p = min(c * float(score), 1.0)
        if rng.random() < p:
            rescale = 1.0 / math.sqrt(p)
            out.emit(row, rescale)
            decisions.append(SampleDecision(True, p, rescale, float(score)))
        else:
            decisions.append(SampleDecision(False, p, 0.0, float(score)))
    stats = SamplerStats(
        kept=out.count,
        n=a.shape[0],
        d=d,
        sum_scores=float(np.sum(scores)),
        peak_memory_rows=a.shape[0],
        seconds=time.perf_counter() - t0,
    )
    return SampleRun(out.array(), np.asarray(out.weights), stats, decisions)


def run_sampler(
    algorithm: str,
    stream,
    eps: float,
    delta: float,
    seed=None,
    batch_size: int | None = None,
    sketch_dim: int | None = None,
    sink: Sink | None = None,
    **kw,
) -> SampleRun:
    """Drive one sampler over ``stream``.

    ``algorithm`` is one of ``online``, ``slim``, ``bss`` or ``offline`` (the
    latter samples independently by exact ridge scores of the full matrix).
    ``batch_size``/``sketch_dim`` switch the online sampler to block scoring.
    """
    stream = as_stream(stream)
    if algorithm == "offline":
        return _run_offline(stream, eps, delta, seed, sink)
    sampler = make_sampler(algorithm, stream.d, eps, delta, seed=seed, sink=sink, **kw)
    if batch_size is not None:
        if algorithm != "online":
            raise ValueError("block scoring is only defined for the online sampler")
        if batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {batch_size}")
        decisions = []
        block: list[np.ndarray] = []
        for row in stream:
            block.append(row)
            if len(block) == batch_size:
                decisions += sampler.step_block(block, sketch_dim or stream.d)
                block = []
        if block:
            decisions += sampler.step_block(block, sketch_dim or stream.d)
    else:
        decisions = sampler.run(stream)
    return SampleRun(sampler.kept_rows, sampler.weights, sampler.finish(), decisions)
