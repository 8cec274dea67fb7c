"""Conditional independence tests.

A tester is any object with a ``num_nodes`` attribute and a
``test(i, j, cond) -> p`` method returning an observed significance level in
``[0, 1]``.  :class:`FisherZ` works on continuous data, :class:`DSeparationOracle`
answers from a known DAG, and :class:`PValueCache` memoises either.
"""

from __future__ import annotations

import logging
import math
import threading
from typing import Iterable, Protocol

import numpy as np

from .graph import Dag, d_separated

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.01
RHO_CLIP = 1.0 - 1e-12


class DegenerateColumnError(ValueError):
    """A data column has zero variance."""


class SingularMatrixError(np.linalg.LinAlgError):
    """A correlation submatrix could not be inverted."""


class InsufficientSamplesError(ValueError):
    pass


class CITester(Protocol):
    num_nodes: int

    def test(self, i: int, j: int, cond: Iterable[int]) -> float: ...


def check_alpha(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(alpha)


def correlation_matrix(data: np.ndarray) -> np.ndarray:
    """Pearson correlation matrix of the columns of ``data``."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("need a 2-D array with at least two rows")
    centred = data - data.mean(axis=0)
    sd = np.sqrt((centred**2).sum(axis=0))
    bad = np.flatnonzero(sd == 0)
    if bad.size:
        raise DegenerateColumnError(f"zero-variance column(s): {bad.tolist()}")
    z = centred / sd
    corr = z.T @ z
    corr = (corr + corr.T) / 2
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0)


def partial_correlation(corr: np.ndarray, i: int, j: int, cond: Iterable[int] = ()) -> float:
    """Partial correlation of ``i`` and ``j`` given ``cond``.

    Computed from the inverse ``P`` of the correlation submatrix over
    ``[i, j, *cond]`` as ``-P[0, 1] / sqrt(P[0, 0] P[1, 1])``.

    Raises
    ------
    SingularMatrixError
        If the submatrix is numerically singular.
    """
    cond = list(cond)
    if i in cond or j in cond:
        raise ValueError("i and j must not be in the conditioning set")
    if not cond:
        return float(corr[i, j])
    idx = [i, j, *cond]
    sub = corr[np.ix_(idx, idx)]
    try:
        prec = np.linalg.inv(sub)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"correlation submatrix over {idx} is singular") from exc
    if not np.all(np.isfinite(prec)) or np.linalg.cond(sub) > 1e12:
        raise SingularMatrixError(f"correlation submatrix over {idx} is ill-conditioned")
    denom = prec[0, 0] * prec[1, 1]
    if denom <= 0:
        raise SingularMatrixError(f"correlation submatrix over {idx} is not positive definite")
    return float(np.clip(-prec[0, 1] / math.sqrt(denom), -1.0, 1.0))


def _pinv_partial_correlation(corr: np.ndarray, i: int, j: int, cond: list[int]) -> float:
    idx = [i, j, *cond]
    prec = np.linalg.pinv(corr[np.ix_(idx, idx)])
    denom = prec[0, 0] * prec[1, 1]
    if denom <= 0:
        return 1.0
    return float(np.clip(-prec[0, 1] / math.sqrt(denom), -1.0, 1.0))


def fisher_z_pvalue(rho: float, n_samples: int, cond_size: int) -> float:
    """Two-sided p-value of Fisher's z test for a (partial) correlation."""
    dof = n_samples - cond_size - 3
    if dof <= 0:
        raise InsufficientSamplesError(
            f"need n_samples - |S| - 3 > 0 (n_samples={n_samples}, |S|={cond_size})"
        )
    # atanh(r) = 0.5 ln((1 + r) / (1 - r)); only |r| matters for the two-sided test
    z = math.atanh(min(abs(rho), RHO_CLIP))
    stat = math.sqrt(dof) * z
    # 2 * (1 - Phi(stat)) written via erfc to keep precision in the tail
    return min(1.0, math.erfc(stat / math.sqrt(2.0)))


class FisherZ:
    """Fisher-z partial-correlation test on a data matrix.

    Parameters
    ----------
    data : array of shape (n_samples, n_vars)
    on_singular : {"pinv", "raise"}
        Collinear conditioning sets (common with label-encoded discrete data
        holding deterministic relations) either fall back to a pseudo-inverse
        or raise :class:`SingularMatrixError`.  Fallbacks are counted in
        ``singular_count`` and logged.
    """

    def __init__(self, data: np.ndarray, on_singular: str = "pinv"):
        if on_singular not in ("pinv", "raise"):
            raise ValueError("on_singular must be 'pinv' or 'raise'")
        data = np.asarray(data, dtype=float)
        self.corr = correlation_matrix(data)
        self.n_samples = data.shape[0]
        self.num_nodes = data.shape[1]
        self.on_singular = on_singular
        self.singular_count = 0

    def test(self, i: int, j: int, cond: Iterable[int] = ()) -> float:
        a, b = (i, j) if i < j else (j, i)
        cond = sorted(cond)
        try:
            rho = partial_correlation(self.corr, a, b, cond)
        except SingularMatrixError:
            if self.on_singular == "raise":
                raise
            self.singular_count += 1
            logger.debug("singular correlation submatrix for (%d, %d | %s); using pinv", a, b, cond)
            rho = _pinv_partial_correlation(self.corr, a, b, cond)
        return fisher_z_pvalue(rho, self.n_samples, len(cond))


class DSeparationOracle:
    """Perfect test: 1.0 when ``cond`` d-separates the pair in ``truth``, else 0.0."""

    def __init__(self, truth: Dag):
        self.truth = truth
        self.num_nodes = truth.num_nodes

    def test(self, i: int, j: int, cond: Iterable[int] = ()) -> float:
        return 1.0 if d_separated(self.truth, i, j, cond) else 0.0


def oracle_cit(truth: Dag) -> DSeparationOracle:
    return DSeparationOracle(truth)


def cache_key(i: int, j: int, cond: Iterable[int]) -> tuple[int, int, tuple[int, ...]]:
    a, b = (i, j) if i < j else (j, i)
    return a, b, tuple(sorted(cond))


class PValueCache:
    """Memoising wrapper around a tester.

    ``num_tests`` counts calls that reached the wrapped tester.  Reads are
    lock-free; insertion is serialised, and since results are deterministic a
    racing duplicate write stores the same value.
    """

    def __init__(self, tester: CITester):
        self.tester = tester
        self.num_nodes = tester.num_nodes
        self._values: dict[tuple[int, int, tuple[int, ...]], float] = {}
        self._lock = threading.Lock()
        self.num_tests = 0

    def test(self, i: int, j: int, cond: Iterable[int] = ()) -> float:
        key = cache_key(i, j, cond)
        p = self._values.get(key)
        if p is None:
            p = float(self.tester.test(key[0], key[1], key[2]))
            with self._lock:
                if key not in self._values:
                    self._values[key] = p
                    self.num_tests += 1
        return p

    def __contains__(self, key: tuple[int, int, Iterable[int]]) -> bool:
        return cache_key(*key) in self._values

    def __len__(self) -> int:
        return len(self._values)
