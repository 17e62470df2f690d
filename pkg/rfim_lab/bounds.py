"""
bounds.py - Deterministic utilities behind the decay arguments

comp_decay_stretch
    For a non-increasing sequence p_1 >= p_2 >= ... in [0, 1] with
    p_k >= k^-alpha, finds n in [sqrt(k), k] such that

        p_n <= p_j <= p_n (n / j)^(2 alpha)     for all 1 <= j <= n

    by descending from k: k_m is the largest j < k_{m-1} violating the
    right-hand inequality relative to k_{m-1}; the last k_m is n.

min_integral_value
    For a symmetric density w, non-increasing in |x|, and p in (0, 1]:

        min { int f  :  0 <= f <= 1,  int f w = 1 - p }  =  2 q,
        int_{|x| > q} w = p

    with the indicator of [-q, q] attaining it. For the standard Gaussian
    q = chi^-1(p).

Usage:
    from rfim_lab.bounds import comp_decay_stretch, min_integral_value

    stretch = comp_decay_stretch(m_values, alpha=0.05, k=len(m_values))
    q, minimum = min_integral_value(p=0.3)
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize

from rfim_lab.disorder import chi_inverse
from rfim_lab.errors import DomainError, PreconditionError

QUANTILE_TOL = 1e-10


@dataclass(frozen=True)
class StretchResult:
    """
    Output of the descending construction.

    Attributes:
        n: End of the comparable stretch, sqrt(k) <= n <= k.
        k: Starting index.
        alpha: Decay exponent.
        steps: Number of descents taken (0 means n = k).
    """
    n: int
    k: int
    alpha: float
    steps: int = 0


def _as_sequence(p: Sequence[float], k: int) -> np.ndarray:
    values = np.asarray(p, dtype=float)
    if values.ndim != 1 or len(values) < k:
        raise DomainError(f"sequence needs at least k = {k} entries, got {values.size}")
    values = values[:k]
    if np.any(values < 0) or np.any(values > 1):
        raise DomainError("sequence values must lie in [0, 1]")
    if np.any(np.diff(values) > 0):
        raise DomainError("sequence must be non-increasing")
    return values


def _stretch_violations(values: np.ndarray, n: int, alpha: float) -> np.ndarray:
    """Indices j < n (1-based) with p_j > p_n (n / j)^(2 alpha)."""
    j = np.arange(1, n, dtype=float)
    return np.nonzero(values[: n - 1] > values[n - 1] * (n / j) ** (2.0 * alpha))[0] + 1


def comp_decay_stretch(p: Sequence[float], alpha: float, k: int) -> StretchResult:
    """
    Locate a stretch of comparable values in a slowly decaying sequence.

    Args:
        p: p_1, p_2, ... (p[0] is p_1); only the first k entries are used.
        alpha: Exponent, > 0.
        k: Starting index, >= 1.

    Returns:
        StretchResult: n with sqrt(k) <= n <= k satisfying the two-sided inequality.

    Raises:
        DomainError: alpha <= 0, k < 1, values outside [0, 1] or not non-increasing.
        PreconditionError: p_k < k^-alpha.
    """
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    values = _as_sequence(p, k)
    if values[k - 1] < k ** (-alpha):
        raise PreconditionError(
            f"p_k = {values[k - 1]:.6g} is below k^-alpha = {k ** (-alpha):.6g}"
        )
    n, steps = k, 0
    while n > 1:
        violating = _stretch_violations(values, n, alpha)
        if violating.size == 0:
            break
        n = int(violating[-1])
        steps += 1
    return StretchResult(n=n, k=k, alpha=alpha, steps=steps)


def stretch_holds(p: Sequence[float], alpha: float, n: int) -> bool:
    """Check p_n <= p_j <= p_n (n/j)^(2 alpha) for every 1 <= j <= n by direct scan."""
    values = np.asarray(p, dtype=float)[:n]
    j = np.arange(1, n + 1, dtype=float)
    upper = values[n - 1] * (n / j) ** (2.0 * alpha)
    return bool(np.all(values >= values[n - 1]) and np.all(values <= upper))


# =============================================================================
# Variational minimum
# =============================================================================


def _tail_mass(w: Callable[[float], float], q: float) -> float:
    """int_{|x| > q} w for a symmetric density."""
    inner, _ = integrate.quad(w, 0.0, q, limit=200)
    return max(0.0, 1.0 - 2.0 * inner)


def min_integral_value(
    p: float,
    w: Optional[Callable[[float], float]] = None,
    tol: float = QUANTILE_TOL,
) -> Tuple[float, float]:
    """
    Solve the tail equation int_{|x|>q} w = p and return (q, 2q).

    Args:
        p: Tail mass in (0, 1].
        w: Symmetric unimodal density; None for the standard Gaussian.
        tol: Bisection tolerance on q.

    Returns:
        (q, minimum value 2q)

    Raises:
        DomainError: p outside (0, 1], or w does not integrate to 1.
    """
    if not 0.0 < p <= 1.0:
        raise DomainError(f"p must lie in (0, 1], got {p}")
    if p == 1.0:
        return 0.0, 0.0
    if w is None:
        q = chi_inverse(p)
        return q, 2.0 * q
    half, _ = integrate.quad(w, 0.0, np.inf, limit=200)
    if abs(2.0 * half - 1.0) > 1e-6:
        raise DomainError(f"density integrates to {2.0 * half:.8g}, expected 1")
    upper = 1.0
    while _tail_mass(w, upper) > p:
        upper *= 2.0
        if upper > 1e12:
            raise DomainError("tail equation has no finite solution")
    q = optimize.bisect(lambda x: _tail_mass(w, x) - p, 0.0, upper, xtol=tol)
    return q, 2.0 * q


def greedy_grid_minimum(weights: np.ndarray, dx: float, target: float) -> Tuple[float, np.ndarray]:
    """
    Discretized form of the variational problem.

    Minimizes sum(f) dx over 0 <= f <= 1 subject to sum(f w) dx = target by
    filling the cells with the largest w first; the linear program is a
    fractional knapsack, so the greedy fill is optimal.

    Returns:
        (objective, f)
    """
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(-weights, kind="stable")
    f = np.zeros_like(weights)
    remaining = target
    for i in order:
        gain = weights[i] * dx
        if gain <= 0 or remaining <= 0:
            break
        take = min(1.0, remaining / gain)
        f[i] = take
        remaining -= take * gain
    if remaining > 1e-12 * max(1.0, target):
        raise DomainError("target mass exceeds the total weight on the grid")
    return float(f.sum() * dx), f


def indicator_constraint(q: float, w: Optional[Callable[[float], float]] = None) -> float:
    """int 1[-q, q] w, which equals 1 - p at the solution of the tail equation."""
    if w is None:
        return float(math.erf(q / math.sqrt(2.0)))
    inner, _ = integrate.quad(w, -q, q, limit=200)
    return float(inner)
