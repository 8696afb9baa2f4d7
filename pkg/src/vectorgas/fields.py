"""Model parameters and external fields.

The finite-N field ``v_n`` is the negative log of the Bessel-type weight
``x^{alpha/2} I_alpha(2N sqrt(a x)) exp(-N x)`` divided by N, evaluated in log
space throughout: the weight itself overflows/underflows for N of order 100.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from .exceptions import AdmissibilityError, DomainError
from .special import log_iv_scalar

GROWTH_PROBES = (1e2, 1e3, 1e4, 1e5)
GROWTH_MARGIN = 1e-3


@dataclass(frozen=True)
class ModelParams:
    """Perturbation strength ``a``, order ``alpha`` and matrix size ``N``.

    The two-type gas additionally needs ``N`` even (``N // 2`` lattice
    particles); see :meth:`require_even`.
    """

    a: float
    alpha: float
    N: int

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a > 0):
            raise DomainError(f"a must be positive, got {self.a}")
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise DomainError(f"alpha must be non-negative, got {self.alpha}")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "N", int(self.N))

    @property
    def M(self):
        """Row count N + alpha of the matrix model (None for non-integral alpha)."""
        return self.N + int(self.alpha) if float(self.alpha).is_integer() else None

    @property
    def n_lattice_particles(self):
        return self.N // 2

    def require_even(self):
        if self.N % 2:
            raise DomainError(f"the two-type gas needs an even N, got {self.N}")
        return self


@njit(cache=True)
def v_n_scalar(a, alpha, n, x):
    if x == 0.0:
        return 0.0 if alpha == 0.0 else math.inf
    log_w = 0.5 * alpha * math.log(x) + log_iv_scalar(alpha, 2.0 * n * math.sqrt(a * x)) - n * x
    return -log_w / n


@njit(cache=True)
def _v_n_array(a, alpha, n, x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = v_n_scalar(a, alpha, n, x[i])
    return out


def _nonnegative(x):
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("field arguments must be non-negative")
    return arr


def _scalar_or_array(out):
    return float(out) if np.ndim(out) == 0 else out


def v_n(p, x):
    """Finite-N external field ``-(1/N) log w_{alpha,N}(x)``."""
    arr = _nonnegative(x)
    out = _v_n_array(p.a, p.alpha, float(p.N), np.ascontiguousarray(arr.ravel())).reshape(arr.shape)
    return _scalar_or_array(out)


def q_field(a, x):
    """Limiting field ``x - 2 sqrt(a x)``; minimal value ``-a`` at ``x = a``."""
    arr = _nonnegative(x)
    return _scalar_or_array(arr - 2.0 * np.sqrt(a * arr))


def script_v(a, x, n=None, alpha=0.0):
    """Compactified field on the upper half circle, in the line coordinate.

    ``x = np.inf`` denotes the point at infinity, where the value is ``+inf``.
    With ``n`` the finite-N field ``v_n`` replaces ``x - 2 sqrt(a x)``.
    """
    arr = _nonnegative(x)
    finite = np.isfinite(arr)
    xs = np.where(finite, arr, 0.0)
    base = v_n(ModelParams(a, alpha, n), xs) if n is not None else xs - 2.0 * np.sqrt(a * xs)
    out = np.where(finite, base - 0.75 * np.log1p(xs * xs), np.inf)
    return _scalar_or_array(out)


def growth_proxy(potential, a, x):
    """``(V(x) - 2 sqrt(a x)) / (2 log x)``, whose liminf must exceed 1."""
    x = np.asarray(x, dtype=float)
    return (np.asarray(potential(x), dtype=float) - 2.0 * np.sqrt(a * x)) / (2.0 * np.log(x))


@dataclass(frozen=True)
class FieldSpec:
    """An admissible external field ``V(x) - 2 sqrt(a x)`` on the half line."""

    kind: str
    a: float
    potential: Callable = field(repr=False)
    growth_margin: float = math.inf

    def __call__(self, x):
        """Effective field ``V(x) - 2 sqrt(a x)``."""
        arr = _nonnegative(x)
        return _scalar_or_array(np.asarray(self.potential(arr), dtype=float) - 2.0 * np.sqrt(self.a * arr))


def _identity(x):
    return np.asarray(x, dtype=float)


def make_field(kind="wishart", evaluator=None, a=1.0):
    """Build a :class:`FieldSpec`.

    ``kind="wishart"`` gives ``V(x) = x``. ``kind="custom"`` takes a vectorised
    ``evaluator`` for V and rejects it with :class:`AdmissibilityError` unless
    the growth proxy exceeds ``1 + GROWTH_MARGIN`` at every probe point.
    """
    if not a >= 0 or not np.isfinite(a):
        raise DomainError(f"a must be non-negative, got {a}")
    if kind == "wishart":
        return FieldSpec("wishart", float(a), _identity)
    if kind != "custom":
        raise DomainError(f"unknown field kind {kind!r}")
    if evaluator is None:
        raise DomainError("custom fields need an evaluator")
    probes = np.array(GROWTH_PROBES)
    proxy = growth_proxy(evaluator, a, probes)
    if not np.all(np.isfinite(proxy)) or np.any(proxy <= 1.0 + GROWTH_MARGIN):
        raise AdmissibilityError(f"growth condition fails: proxy {proxy.tolist()} at x={probes.tolist()}")
    return FieldSpec("custom", float(a), evaluator, float(np.min(proxy)))
