"""Bessel functions in log space, positive zeros of J_alpha and the
Mittag-Leffler ratio I_{alpha+1}/I_alpha.

``log_bessel_i`` is evaluated by the power series for moderate arguments and
by the Hankel large-argument expansion beyond ``SERIES_SWITCH``; both branches
are numba-compiled scalar kernels so the Coulomb-gas sampler can call them from
compiled code.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import optimize, special

from .exceptions import DomainError

SERIES_SWITCH = 30.0

_LOG_2PI = math.log(2.0 * math.pi)


@njit(cache=True)
def _log_iv_series(alpha, x):
    # Sum the ascending series outward from its largest term.
    half = 0.5 * x
    q = half * half
    kstar = int(0.5 * (math.sqrt(alpha * alpha + 4.0 * q) - alpha))
    log_peak = (2.0 * kstar + alpha) * math.log(half) - math.lgamma(kstar + 1.0) - math.lgamma(kstar + alpha + 1.0)
    total = 1.0
    term = 1.0
    k = kstar
    while True:
        term *= q / ((k + 1.0) * (k + alpha + 1.0))
        total += term
        k += 1
        if term < 1e-18 * total:
            break
    term = 1.0
    k = kstar
    while k > 0:
        term *= (k * (k + alpha)) / q
        total += term
        k -= 1
        if term < 1e-18 * total:
            break
    return log_peak + math.log(total)


@njit(cache=True)
def _log_iv_asymptotic(alpha, x):
    mu = 4.0 * alpha * alpha
    total = 1.0
    term = 1.0
    prev = math.inf
    k = 1
    while k < 200:
        term *= -(mu - (2.0 * k - 1.0) ** 2) / (k * 8.0 * x)
        if abs(term) >= prev:
            break
        total += term
        prev = abs(term)
        if prev < 1e-17:
            break
        k += 1
    return x - 0.5 * (_LOG_2PI + math.log(x)) + math.log(total)


@njit(cache=True)
def log_iv_scalar(alpha, x):
    """log I_alpha(x) for scalar alpha >= 0, x >= 0 (no validation)."""
    if x == 0.0:
        if alpha == 0.0:
            return 0.0
        return -math.inf
    if x > SERIES_SWITCH and x > 2.0 * alpha * alpha:
        return _log_iv_asymptotic(alpha, x)
    return _log_iv_series(alpha, x)


@njit(cache=True)
def _log_iv_array(alpha, x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = log_iv_scalar(alpha, x[i])
    return out


def _check_order(alpha):
    alpha = float(alpha)
    if not np.isfinite(alpha) or alpha < 0:
        raise DomainError(f"Bessel order must be finite and non-negative, got {alpha}")
    return alpha


def _as_nonnegative(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"{name} must be non-negative")
    return arr


def log_bessel_i(alpha, x):
    """Natural logarithm of the modified Bessel function I_alpha(x).

    Parameters
    ----------
    alpha : float
        Non-negative order.
    x : float or array_like
        Non-negative arguments.

    Returns
    -------
    float or ndarray
        ``log I_alpha(x)``; ``-inf`` exactly when ``x == 0`` and ``alpha > 0``.
    """
    alpha = _check_order(alpha)
    arr = _as_nonnegative(x)
    out = _log_iv_array(alpha, np.ascontiguousarray(arr.ravel())).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def bessel_j(alpha, x):
    """Bessel function of the first kind J_alpha(x) for x >= 0."""
    alpha = _check_order(alpha)
    arr = _as_nonnegative(x)
    out = special.jv(alpha, arr)
    return float(out) if np.ndim(out) == 0 else out


def _bessel_j_prime(alpha, x):
    # d/dx J_a = (a/x) J_a - J_{a+1}
    return (alpha / x) * special.jv(alpha, x) - special.jv(alpha + 1.0, x)


def mcmahon_guess(alpha, k):
    """McMahon asymptotic approximation of the k-th (0-based) positive zero."""
    k = np.asarray(k, dtype=float)
    mu = 4.0 * alpha * alpha
    beta = (k + 1.0 + 0.5 * alpha - 0.25) * np.pi
    e = 8.0 * beta
    return (
        beta
        - (mu - 1.0) / e
        - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * e**3)
        - 32.0 * (mu - 1.0) * (83.0 * mu**2 - 982.0 * mu + 3779.0) / (15.0 * e**5)
    )


def _low_zeros(alpha, upper):
    """All zeros of J_alpha in (0, upper] by grid scan and Brent refinement."""
    grid = np.arange(0.05, upper + 0.05, 0.05)
    vals = special.jv(alpha, grid)
    idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    return np.array(
        [optimize.brentq(lambda t: special.jv(alpha, t), grid[i], grid[i + 1], xtol=1e-14, rtol=1e-15) for i in idx]
    )


def _newton_zeros(alpha, ks, iterations=8):
    z = mcmahon_guess(alpha, ks)
    for _ in range(iterations):
        step = special.jv(alpha, z) / _bessel_j_prime(alpha, z)
        z = z - step
        if np.all(np.abs(step) < 1e-15 * z):
            break
    return z


def _compute_zeros(alpha, count):
    upper = max(40.0, 3.0 * alpha + 40.0)
    low = _low_zeros(alpha, upper)
    if low.size >= count:
        return low[:count].copy()
    ks = np.arange(low.size, count)
    high = _newton_zeros(alpha, ks)
    guess = mcmahon_guess(alpha, ks)
    prev = np.concatenate([low[-1:], high[:-1]]) if low.size else np.concatenate([[0.0], high[:-1]])
    bad = (np.abs(high - guess) > 0.5) | (high <= prev) | ~np.isfinite(high)
    for i in np.nonzero(bad)[0]:
        # bisection fallback on a bracket around the McMahon estimate
        lo, hi = guess[i] - 1.0, guess[i] + 1.0
        high[i] = optimize.brentq(lambda t: special.jv(alpha, t), lo, hi, xtol=1e-14, rtol=1e-15)
    return np.concatenate([low, high])


@dataclass(frozen=True)
class ZeroTable:
    """The first ``count`` positive zeros of J_alpha, strictly increasing."""

    alpha: float
    zeros: np.ndarray

    @property
    def count(self):
        return int(self.zeros.size)


_ZERO_CACHE: dict[float, np.ndarray] = {}
_ZERO_LOCK = threading.Lock()


def clear_zero_cache():
    """Drop all tabulated zeros (used to time cold computations)."""
    with _ZERO_LOCK:
        _ZERO_CACHE.clear()


def zero_table(alpha, count):
    """Return a cached :class:`ZeroTable` with the first ``count`` zeros."""
    alpha = _check_order(alpha)
    count = int(count)
    if count < 1:
        raise DomainError("count must be >= 1")
    cached = _ZERO_CACHE.get(alpha)
    if cached is None or cached.size < count:
        with _ZERO_LOCK:
            cached = _ZERO_CACHE.get(alpha)
            if cached is None or cached.size < count:
                size = max(count, 2 * cached.size if cached is not None else 0, 64)
                cached = _compute_zeros(alpha, size)
                cached.setflags(write=False)
                _ZERO_CACHE[alpha] = cached
    return ZeroTable(alpha, cached[:count])


def bessel_zero(alpha, k):
    """The k-th (0-based) positive zero j_{alpha,k} of J_alpha."""
    k = int(k)
    if k < 0:
        raise DomainError("zero index must be >= 0")
    return float(zero_table(alpha, k + 1).zeros[k])


def zero_tail_shift(table):
    """Offset c with j_{alpha,k} ~ pi*k + c fitted on the last tabulated zero."""
    last = table.count - 1
    return float(table.zeros[last] - np.pi * last)


def reciprocal_square_zero_sum(alpha, count=10_000):
    """sum_k 1/j_{alpha,k}^2 from ``count`` zeros plus a fitted tail.

    The tail sum_{k >= K} (pi*k + c)^{-2} is evaluated exactly through the
    trigamma function.

    Returns
    -------
    total, partial, tail : float
    """
    table = zero_table(alpha, count)
    partial = math.fsum(1.0 / table.zeros**2)
    c = zero_tail_shift(table)
    tail = float(special.polygamma(1, count + c / np.pi)) / np.pi**2
    return partial + tail, partial, tail


def ml_ratio(alpha, x, terms, tail=True, return_bound=False):
    """Truncated Mittag-Leffler expansion of I_{alpha+1}(x)/I_alpha(x).

    Computes ``2x * sum_{k<terms} 1/(x^2 + j_{alpha,k}^2)``. With ``tail`` the
    remainder is estimated by the midpoint-rule integral of the summand with
    zeros extrapolated as ``pi*k + c``.

    Parameters
    ----------
    alpha : float
    x : float or array_like
        Non-negative arguments.
    terms : int
        Number of tabulated zeros used, ``>= 1``.
    tail : bool, default=True
    return_bound : bool, default=False
        Also return an estimate of the absolute error of the returned value.
    """
    alpha = _check_order(alpha)
    terms = int(terms)
    if terms < 1:
        raise DomainError("terms must be >= 1")
    arr = _as_nonnegative(x)
    flat = arr.ravel()
    table = zero_table(alpha, terms)
    j2 = table.zeros**2
    value = np.empty(flat.shape)
    chunk = max(1, 4_000_000 // j2.size)
    for start in range(0, flat.size, chunk):
        xs = flat[start:start + chunk, None]
        # summed from the smallest terms up
        value[start:start + chunk] = 2.0 * flat[start:start + chunk] * np.sum((1.0 / (xs * xs + j2))[:, ::-1], axis=1)
    c = zero_tail_shift(table)
    t0 = np.pi * (terms - 0.5) + c
    if tail:
        value = value + (2.0 / np.pi) * np.arctan2(flat, t0)
        # midpoint-rule error ~ |f'|/24, plus the first McMahon correction
        # the linear zero model misses; both doubled for safety
        quad = 4.0 * np.pi * flat * t0 / (flat**2 + t0**2) ** 2 / 24.0
        shift = abs(4.0 * alpha * alpha - 1.0) / (8.0 * t0)
        bound = 2.0 * (quad + 2.0 * flat * shift / (np.pi * (flat**2 + t0**2)))
    else:
        bound = (2.0 / np.pi) * np.arctan2(flat, t0 - np.pi)
    value = value.reshape(arr.shape)
    bound = bound.reshape(arr.shape)
    if arr.ndim == 0:
        value, bound = float(value), float(bound)
    return (value, bound) if return_bound else value


def ml_ratio_adaptive(alpha, x, rtol=1e-7, start=64, max_terms=1 << 20):
    """Mittag-Leffler ratio with the term count doubled until the error
    estimate falls below ``rtol`` relative to the value.

    Returns
    -------
    value : ndarray
    terms : int
        Number of zeros finally used.
    """
    arr = np.atleast_1d(_as_nonnegative(x))
    terms = int(start)
    while True:
        value, bound = ml_ratio(alpha, arr, terms, tail=True, return_bound=True)
        ok = (bound <= rtol * np.abs(value)) | (arr == 0)
        if np.all(ok) or terms >= max_terms:
            return value, terms
        terms *= 2


def bessel_i_ratio(alpha, x):
    """Direct I_{alpha+1}(x)/I_alpha(x) from the log-space Bessel evaluation."""
    arr = _as_nonnegative(x)
    with np.errstate(invalid="ignore"):
        out = np.exp(log_bessel_i(alpha + 1.0, arr) - log_bessel_i(alpha, arr))
    out = np.where(arr == 0, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out
