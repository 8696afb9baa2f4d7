"""Exact small-N eigenvalue densities used as ground truth.

Two independent routes to the joint eigenvalue density for N = 2 and N = 4:

* ``mop_density``: Vandermonde times the block determinant built from the
  weights ``w_alpha`` and ``w_{alpha+1}``;
* ``gas_marginal_density``: the lattice particles of the two-type gas summed
  out explicitly over the Bessel-zero lattice.

Their ratio is constant in ``x``. All weights are handled in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np
from scipy import integrate, special

from .exceptions import DomainError
from .measures import lattice_points
from .special import bessel_i_ratio, log_bessel_i, ml_ratio, ml_ratio_adaptive, zero_table, zero_tail_shift


@dataclass(frozen=True)
class OracleEval:
    """Unnormalized density ``value`` at ordered ``x`` with the absolute
    error bound of the lattice truncation (0 for closed forms)."""

    x: tuple
    value: float
    truncation_bound: float
    log_value: float


def log_weight(p, x, shift=0):
    """``log w_{alpha + shift, N}(x)``."""
    x = np.asarray(x, dtype=float)
    alpha = p.alpha + shift
    with np.errstate(divide="ignore", invalid="ignore"):
        power = np.where(x == 0, 0.0 if alpha == 0 else -np.inf, 0.5 * alpha * np.log(x))
        return power + log_bessel_i(alpha, 2.0 * p.N * np.sqrt(p.a * x)) - p.N * x


def weight_ratio(p, x):
    """``w_{alpha+1,N}(x) / w_{alpha,N}(x) = sqrt(x) I_{alpha+1}(y) / I_alpha(y)``."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(x) * bessel_i_ratio(p.alpha, 2.0 * p.N * np.sqrt(p.a * x))


def _ordered(x, p):
    x = np.asarray(x, dtype=float).ravel()
    if p.N not in (2, 4) or x.size != p.N:
        raise DomainError("the oracle supports N in {2, 4} with N coordinates")
    if np.any(x <= 0) or np.any(np.diff(x) < 0):
        raise DomainError("x must be positive and non-decreasing")
    return x


def _zero(x):
    return OracleEval(tuple(x), 0.0, 0.0, -math.inf)


def _check_size(x, p):
    x = np.asarray(x, dtype=float).ravel()
    if x.size not in (2, 4) or x.size != p.N:
        raise DomainError("the oracle supports N in {2, 4}")
    return x


def signed_determinant(x, p):
    """``(sign, log|det|)`` of the block weight determinant at ``x`` in the
    given order; alternating, so swapping two coordinates flips the sign."""
    x = _check_size(x, p)
    half = x.size // 2
    # factor w_alpha out of each column; rows 1, x, .. then r, x r, ..
    r = weight_ratio(p, x)
    powers = np.vstack([x**i for i in range(half)])
    s, ld = np.linalg.slogdet(np.vstack([powers, powers * r]))
    if s == 0:
        return 0.0, -math.inf
    return float(s), float(ld) + float(np.sum(log_weight(p, x)))


def signed_mop(x, p):
    """``(sign, log|value|)`` of Vandermonde times the block determinant.

    Both factors alternate, so the product is symmetric in the coordinates.
    """
    x = _check_size(x, p)
    iu = np.triu_indices(x.size, 1)
    vdm = x[iu[1]] - x[iu[0]]
    if np.any(vdm == 0):
        return 0.0, -math.inf
    s, ld = signed_determinant(x, p)
    if s == 0:
        return 0.0, -math.inf
    return float(np.prod(np.sign(vdm))) * s, float(np.sum(np.log(np.abs(vdm)))) + ld


def orientation(n):
    """Sign turning the blocked row order (powers times w_alpha, then powers
    times w_{alpha+1}) into the interleaved order, which is positive on
    increasing arguments."""
    half = n // 2
    return -1.0 if (half * (half - 1) // 2) % 2 else 1.0


def mop_density(x, p):
    """MOP-ensemble density (unnormalized) at non-decreasing positive ``x``;
    repeated coordinates give 0."""
    x = _ordered(x, p)
    if np.any(np.diff(x) == 0):
        return _zero(x)
    sign, log_val = signed_mop(x, p)
    return OracleEval(tuple(x), orientation(p.N) * sign * math.exp(log_val), 0.0, log_val)


def _reciprocal_tail(p, K, power):
    # sum_{k >= K} |a_k|^{-power}, zeros extrapolated as pi k + c
    table = zero_table(p.alpha, K)
    c = zero_tail_shift(table)
    scale = (2.0 * math.sqrt(p.a) * p.N) ** (2 * power)
    # sum_{k>=K} (pi k + c)^{-2 power} = pi^{-2 power} * Hurwitz zeta
    return scale * float(special.zeta(2 * power, K + c / math.pi)) / math.pi ** (2 * power)


def gas_marginal_density(x, p, K=4096):
    """Gas density with the lattice particles summed out.

    ``K`` lattice points are summed exactly; the remainder is replaced by its
    leading large-``|a_k|`` behaviour and the next order is reported as
    ``truncation_bound``.
    """
    x = _ordered(x, p)
    K = int(K)
    if K < 2:
        raise DomainError("need at least two lattice terms")
    if np.any(np.diff(x) == 0):
        return _zero(x)
    lat = lattice_points(p, K).points
    absu = -lat
    iu = np.triu_indices(x.size, 1)
    log_vdm2 = 2.0 * float(np.sum(np.log(x[iu[1]] - x[iu[0]])))
    log_pref = log_vdm2 + float(np.sum(log_weight(p, x))) - p.n_lattice_particles * math.log(p.N)
    tail1 = _reciprocal_tail(p, K, 1)
    tail2 = _reciprocal_tail(p, K, 2)
    tail3 = _reciprocal_tail(p, K, 3)
    # s_k = |u_k| / prod_i (x_i - u_k)
    log_s = np.log(absu) - np.sum(np.log(x[:, None] + absu[None, :]), axis=0)
    s = np.exp(log_s)
    # slowly convergent sums behave like sum 1/|u| - (sum x) sum 1/|u|^2 + ...
    lead_tail = tail1 - x.sum() * tail2
    lead_bound = x.sum() ** 2 * tail3
    if p.N == 2:
        total = math.fsum(s[::-1]) + lead_tail
        bound = lead_bound
    else:
        # sum over pairs i < j of s_i s_j (u_i - u_j)^2 = S0 S2 - S1^2
        s0 = math.fsum(s[::-1])
        s1 = math.fsum((s * lat)[::-1])
        s2 = math.fsum((s * lat * lat)[::-1]) + lead_tail
        total = s0 * s2 - s1 * s1
        bound = s0 * lead_bound + s2 * tail3 + 2.0 * abs(s1) * tail2
    log_val = log_pref + math.log(total)
    return OracleEval(tuple(x), math.exp(log_val), math.exp(log_pref) * bound, log_val)


def ratio_table(p, points=200, K=4096, seed=0, upper=None):
    """Ratios ``gas_marginal_density / mop_density`` at random ordered points.

    Returns
    -------
    x : ndarray, shape (points, N)
    ratio : ndarray, shape (points,)
    cv : float
        Coefficient of variation of the ratios.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    upper = 2.0 * (1.0 + math.sqrt(p.a)) ** 2 if upper is None else upper
    xs = np.sort(rng.uniform(0.05, upper, (points, p.N)), axis=1)
    ratios = np.array([math.exp(gas_marginal_density(x, p, K).log_value - mop_density(x, p).log_value) for x in xs])
    return xs, ratios, float(np.std(ratios) / np.mean(ratios))


# ----------------------------------------------------------------- Nikishin


def nikishin_lattice_side(p, x, terms=None, rtol=1e-9):
    """``(x / sqrt(a)) (1/N) sum_k 1/(x - a_k)`` via the Mittag-Leffler
    expansion in ``y = 2N sqrt(a x)``.

    With ``terms=None`` the number of zeros is doubled until the tail error
    estimate is below ``rtol``; returns ``(value, terms_used)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0):
        raise DomainError("x must be non-negative")
    y = 2.0 * p.N * np.sqrt(p.a * x)
    if terms is None:
        ml, used = ml_ratio_adaptive(p.alpha, y, rtol=rtol)
    else:
        ml, used = ml_ratio(p.alpha, y, int(terms)), int(terms)
    return np.sqrt(x) * ml, used


def nikishin_check(p, x, terms=None, rtol=1e-9):
    """Relative error between the lattice side and ``w_{alpha+1}/w_alpha``.

    Returns
    -------
    rel_err : ndarray
    terms : int
    """
    lhs, used = nikishin_lattice_side(p, x, terms, rtol)
    rhs = weight_ratio(p, np.atleast_1d(x))
    return np.abs(lhs - rhs) / np.abs(rhs), used


# ------------------------------------------------- normalized N = 2 marginal


def pooled_marginal_cdf(p, upper=None, step=None):
    """CDF of the one-point marginal (both particles pooled) for N = 2.

    The MOP density is tabulated on a uniform grid and normalized by 2-D
    trapezoidal quadrature over ``0 < x1 < x2 < upper``.

    Returns
    -------
    grid, cdf : ndarray
    """
    if p.N != 2:
        raise DomainError("the pooled marginal is implemented for N = 2")
    upper = 6.0 * (1.0 + math.sqrt(p.a)) ** 2 / 2.0 + 4.0 if upper is None else upper
    step = upper / 4000 if step is None else step
    t = np.arange(0.0, upper + 0.5 * step, step)
    lw0 = log_weight(p, t)
    lw1 = log_weight(p, t, shift=1)
    ref = np.max(lw0[np.isfinite(lw0)])
    w0 = np.exp(lw0 - ref)
    w1 = np.exp(lw1 - ref)
    # density on x1 = t[i], x2 = t[j]; symmetric in its arguments
    dens = (t[None, :] - t[:, None]) * (np.outer(w0, w1) - np.outer(w1, w0))
    dens = np.abs(dens)
    # pooled one-point density: integrate the symmetric density over the other coordinate
    rho = integrate.trapezoid(dens, t, axis=1)
    cdf = integrate.cumulative_trapezoid(rho, t, initial=0.0)
    return t, cdf / cdf[-1]
