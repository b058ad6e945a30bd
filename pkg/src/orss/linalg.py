"""Dense symmetric bookkeeping for streamed rows.

Everything here is O(d^2) per row: the inverse of a symmetric positive
definite matrix is carried along under rank-one updates with the
Sherman-Morrison formula and refreshed from scratch every ``4 * d`` updates
so that roundoff cannot accumulate without bound.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import DimensionMismatchError, InvariantViolation


def as_row(v, dim: int, index: int | None = None) -> np.ndarray:
    """Return ``v`` as a finite float64 vector of length ``dim`` or raise."""
    row = np.asarray(v, dtype=np.float64)
    where = "" if index is None else f" at row {index}"
    if row.ndim != 1 or row.shape[0] != dim:
        raise DimensionMismatchError(
            f"expected a vector of length {dim}{where}, got shape {row.shape}"
        )
    if not np.all(np.isfinite(row)):
        raise ValueError(f"non-finite entries in row{where}")
    return row


def _symmetrize(m: np.ndarray) -> np.ndarray:
    m += m.T
    m *= 0.5
    return m


def _spd_inverse(m: np.ndarray) -> np.ndarray:
    try:
        factor = la.cho_factor(m, lower=True, check_finite=False)
    except la.LinAlgError as exc:
        raise InvariantViolation("matrix lost positive definiteness") from exc
    inv = la.cho_solve(factor, np.eye(m.shape[0]), check_finite=False)
    return _symmetrize(inv)


class MaintainedInverse:
    """A symmetric positive definite matrix together with its inverse.

    ``update(u, scale)`` applies ``matrix += scale * u u^T`` for a signed
    ``scale``; a subtraction that would leave the matrix indefinite raises
    :class:`InvariantViolation`.
    """

    def __init__(self, matrix: np.ndarray):
        matrix = np.array(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatchError(f"expected a square matrix, got {matrix.shape}")
        self.dim = matrix.shape[0]
        self.matrix = _symmetrize(matrix)
        self.inv = _spd_inverse(self.matrix)
        self.updates_since_refresh = 0

    def quadratic(self, v: np.ndarray) -> float:
        """``v^T matrix^{-1} v``, clamped at zero against roundoff."""
        return max(float(v @ self.inv @ v), 0.0)

    def update(self, u: np.ndarray, scale: float) -> None:
        if scale == 0.0:
            return
        w = self.inv @ u
        denom = 1.0 + scale * float(u @ w)
        if not denom > 0.0:
            raise InvariantViolation(
                f"rank-one update with scale {scale:g} would make the matrix indefinite "
                f"(1 + scale * u^T X^-1 u = {denom:g})"
            )
        self.matrix += scale * np.outer(u, u)
        self.inv -= (scale / denom) * np.outer(w, w)
        _symmetrize(self.inv)
        self.updates_since_refresh += 1
        if self.updates_since_refresh >= 4 * self.dim:
            self.refresh()

    def refresh(self) -> None:
        """Recompute the inverse from the explicit matrix."""
        _symmetrize(self.matrix)
        self.inv = _spd_inverse(self.matrix)
        self.updates_since_refresh = 0

    def min_eigenvalue(self) -> float:
        return float(la.eigvalsh(self.matrix, check_finite=False)[0])

    def inverse_residual(self) -> float:
        """``||inv @ matrix - I||_F / sqrt(d)``."""
        resid = self.inv @ self.matrix - np.eye(self.dim)
        return float(np.linalg.norm(resid) / np.sqrt(self.dim))


class PSDState(MaintainedInverse):
    """Running Gram matrix of absorbed rows plus the inverse of ``gram + lam*I``.

    >>> s = PSDState(2, lam=1.0)
    >>> s.ridge_quadratic([1.0, 0.0])
    1.0
    >>> _ = s.absorb_row([1.0, 0.0])
    >>> s.ridge_quadratic([1.0, 0.0])
    0.5
    """

    def __init__(self, dim: int, lam: float):
        if dim < 1:
            raise ValueError(f"dimension must be positive, got {dim}")
        if not (np.isfinite(lam) and lam > 0):
            raise ValueError(f"ridge parameter must be positive and finite, got {lam}")
        super().__init__(lam * np.eye(dim))
        self.lam = float(lam)
        self.gram = np.zeros((dim, dim))
        self.count = 0

    def copy(self) -> PSDState:
        other = PSDState.__new__(PSDState)
        other.__dict__.update(self.__dict__)
        other.matrix = self.matrix.copy()
        other.inv = self.inv.copy()
        other.gram = self.gram.copy()
        return other

    def ridge_quadratic(self, v) -> float:
        """``v^T (gram + lam I)^{-1} v`` from the maintained inverse."""
        return self.quadratic(as_row(v, self.dim))

    def absorb_row(self, v, scale: float = 1.0) -> PSDState:
        """Add ``scale * v v^T`` to the Gram matrix. Returns ``self``."""
        if not (np.isfinite(scale) and scale >= 0):
            raise ValueError(f"absorb scale must be finite and >= 0, got {scale}")
        row = as_row(v, self.dim)
        self.count += 1
        if scale == 0.0 or not row.any():
            return self
        self.gram += scale * np.outer(row, row)
        self.update(row, scale)
        return self

    def refresh(self) -> None:
        # rebuild from gram so that the ridge term never drifts
        self.matrix = _symmetrize(self.gram) + self.lam * np.eye(self.dim)
        self.inv = _spd_inverse(self.matrix)
        self.updates_since_refresh = 0

    def det_ratio_after(self, v, scale: float = 1.0) -> float:
        """Factor by which ``det(gram + lam I)`` grows if ``scale * v v^T`` is absorbed."""
        return 1.0 + scale * self.ridge_quadratic(v)


@dataclass(frozen=True)
class Certificate:
    """Outcome of the two-sided spectral check.

    ``min_eig``/``max_eig`` are the extreme eigenvalues of
    ``(G + lam I)^{-1/2} (G~ + lam I) (G + lam I)^{-1/2}`` with ``lam = delta/eps``;
    they lie in ``[1-eps, 1+eps]`` exactly when
    ``(1-eps) G - delta I <= G~ <= (1+eps) G + delta I``.
    """

    min_eig: float
    max_eig: float
    eps: float
    delta: float
    passed: bool
    kept_rows: int = 0
    bound_rows: float = float("nan")

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "min_eig": self.min_eig,
            "max_eig": self.max_eig,
            "eps": self.eps,
            "delta": self.delta,
            "kept_rows": self.kept_rows,
            "bound_rows": self.bound_rows,
        }


def certificate_tolerance(eps: float) -> float:
    return 1e-9 * (2.0 + eps)


def _check_symmetric(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {m.shape}")
    scale = max(float(np.abs(m).max(initial=0.0)), 1.0)
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-10 * scale):
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (m + m.T)


def psd_sandwich_margins(exact_gram, approx_gram, eps: float, delta: float) -> Certificate:
    """Check ``(1-eps) G - delta I <= G~ <= (1+eps) G + delta I`` by whitening.

    ``exact_gram`` is ``A^T A`` and ``approx_gram`` is the candidate
    ``A~^T A~``.
    """
    g = _check_symmetric(exact_gram, "exact_gram")
    gt = _check_symmetric(approx_gram, "approx_gram")
    if g.shape != gt.shape:
        raise DimensionMismatchError(f"gram shapes differ: {g.shape} vs {gt.shape}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    lam = delta / eps
    if not lam > 0:
        raise ValueError(f"ridge delta/eps must be positive, got {lam}")

    d = g.shape[0]
    w, v = la.eigh(g + lam * np.eye(d), check_finite=False)
    whiten = (v / np.sqrt(w)) @ v.T
    ratio = whiten @ (gt + lam * np.eye(d)) @ whiten
    eigs = la.eigvalsh(0.5 * (ratio + ratio.T), check_finite=False)
    lo, hi = float(eigs[0]), float(eigs[-1])
    tol = certificate_tolerance(eps)
    passed = lo >= 1.0 - eps - tol and hi <= 1.0 + eps + tol
    return Certificate(min_eig=lo, max_eig=hi, eps=eps, delta=delta, passed=passed)
