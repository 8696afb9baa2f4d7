"""Logarithmic energies and the two-measure rate functional.

Grid measures are piecewise uniform, so every energy is an exact double
integral of ``-log|x - y|`` over pairs of cells. Well separated cells use the
moment expansion of ``log|D + s - t|`` (no cancellation); nearby cells use
the closed-form second antiderivative ``u^2 log|u| / 2 - 3 u^2 / 4``.

The compactified functional works on the circle of diameter 1 with the
Euclidean kernel. Its singular part is integrated through the preimage cells
and the smooth remainder ``-log(|T(x) - T(y)| / |x - y|)`` by Gauss-Legendre
quadrature evaluated from the circle points themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .exceptions import DomainError
from .measures import EmpiricalMeasure, GridMeasure, SphereMeasure, stereo_map

_SERIES_TERMS = 14
_FAR_RATIO = 0.25
_POLE = np.array([0.0, 1.0])


@dataclass(frozen=True)
class EnergyReport:
    """Components of the rate functional; ``total = self_mu - cross + self_nu + field_term``."""

    self_mu: float
    self_nu: float
    cross: float
    field_term: float
    total: float

    @classmethod
    def assemble(cls, self_mu, self_nu, cross, field_term):
        positive = (self_mu, self_nu, field_term)
        if any(v == math.inf for v in positive):
            total = math.inf
        elif cross == math.inf:
            total = -math.inf
        else:
            total = self_mu - cross + self_nu + field_term
        return cls(float(self_mu), float(self_nu), float(cross), float(field_term), float(total))

    def as_dict(self):
        return {k: getattr(self, k) for k in ("self_mu", "self_nu", "cross", "field_term", "total")}


# --------------------------------------------------------------- kernels


def _antideriv2(u):
    # second antiderivative of log|u|
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 0.5 * u * u * np.log(np.abs(u)) - 0.75 * u * u
    return np.where(u == 0, 0.0, out)


def _antideriv1(u):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = u * np.log(np.abs(u)) - u
    return np.where(u == 0, 0.0, out)


def _series(D, p, q):
    # E log|D + s - t| with s ~ U(-p D, p D), t ~ U(-q D, q D); returns -E log
    out = -np.log(D)
    p2, q2 = p * p, q * q
    for k in range(1, _SERIES_TERMS + 1):
        moment = np.zeros_like(D)
        for j in range(k + 1):
            moment += comb(2 * k, 2 * j) * p2**j / (2 * j + 1) * q2 ** (k - j) / (2 * (k - j) + 1)
        out += moment / (2 * k)
    return out


def cell_log_kernel(lo1, hi1, lo2, hi2):
    """Mean of ``-log|x - y|`` for independent uniform x on ``[lo1, hi1]`` and
    y on ``[lo2, hi2]``. Degenerate intervals are point masses; coincident
    points give ``+inf``. Arguments broadcast.
    """
    lo1, hi1, lo2, hi2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (lo1, hi1, lo2, hi2)))
    h1, h2 = hi1 - lo1, hi2 - lo2
    D = np.abs(0.5 * (lo1 + hi1) - 0.5 * (lo2 + hi2))
    out = np.empty(D.shape)
    far = (0.5 * (h1 + h2) <= _FAR_RATIO * D) & (D > 0)
    if np.any(far):
        Df = D[far]
        out[far] = _series(Df, 0.5 * h1[far] / Df, 0.5 * h2[far] / Df)
    near = ~far
    cells = near & (h1 > 0) & (h2 > 0)
    if np.any(cells):
        a1, b1, a2, b2 = lo1[cells], hi1[cells], lo2[cells], hi2[cells]
        s = _antideriv2(b1 - a2) - _antideriv2(a1 - a2) - _antideriv2(b1 - b2) + _antideriv2(a1 - b2)
        out[cells] = -s / (h1[cells] * h2[cells])
    first = near & (h1 > 0) & (h2 == 0)
    if np.any(first):
        pt = lo2[first]
        out[first] = -(_antideriv1(hi1[first] - pt) - _antideriv1(lo1[first] - pt)) / h1[first]
    second = near & (h1 == 0) & (h2 > 0)
    if np.any(second):
        pt = lo1[second]
        out[second] = -(_antideriv1(hi2[second] - pt) - _antideriv1(lo2[second] - pt)) / h2[second]
    points = near & (h1 == 0) & (h2 == 0)
    if np.any(points):
        with np.errstate(divide="ignore"):
            out[points] = -np.log(D[points])
    return out


def _cells(m):
    """Lower/upper ends and weights; atoms are degenerate cells."""
    if isinstance(m, GridMeasure):
        return m.lo, m.hi, m.weights, False
    if isinstance(m, EmpiricalMeasure):
        return m.atoms, m.atoms, m.weights, True
    raise DomainError(f"expected a grid or empirical measure, got {type(m).__name__}")


def kernel_matrix(m1, m2=None):
    """Matrix of cell-pair kernels between two line measures."""
    lo1, hi1, _, _ = _cells(m1)
    lo2, hi2, _, _ = _cells(m1 if m2 is None else m2)
    return cell_log_kernel(lo1[:, None], hi1[:, None], lo2[None, :], hi2[None, :])


def _fixed_sum(mat, w1, w2):
    # deterministic reduction order independent of BLAS threading
    return math.fsum((w1[:, None] * mat * w2[None, :]).ravel())


def log_energy(m):
    """Logarithmic self-energy of a grid or empirical measure.

    Empirical measures exclude the diagonal ``i == j``; coincident atoms give
    ``+inf``. Grid measures include the exact uniform-cell self term
    ``w^2 (3/2 - log width)``.
    """
    lo, hi, w, atomic = _cells(m)
    if w.size == 0:
        return 0.0
    mat = kernel_matrix(m)
    if atomic:
        np.fill_diagonal(mat, 0.0)
        if np.any(np.isinf(mat)):
            return math.inf
    return _fixed_sum(mat, w, w)


def mutual_energy(m1, m2):
    """``int int log(1/|x - y|) dm1 dm2``; ``+inf`` for overlapping atoms."""
    _, _, w1, _ = _cells(m1)
    _, _, w2, _ = _cells(m2)
    mat = kernel_matrix(m1, m2)
    pos = (w1[:, None] * w2[None, :]) > 0
    if np.any(np.isinf(mat) & pos):
        return math.inf
    return _fixed_sum(np.where(pos, mat, 0.0), w1, w2)


def field_integral(m, a):
    """``int (x - 2 sqrt(a x)) dm`` exactly for grid and empirical measures."""
    lo, hi, w, atomic = _cells(m)
    if np.any(lo < 0):
        raise DomainError("the field lives on the non-negative half line")
    if atomic:
        vals = lo - 2.0 * np.sqrt(a * lo)
    else:
        h = hi - lo
        mean_x = 0.5 * (lo + hi)
        mean_sqrt = (2.0 / 3.0) * (hi**1.5 - lo**1.5) / h
        vals = mean_x - 2.0 * math.sqrt(a) * mean_sqrt
    return math.fsum(w * vals)


def rate_line(mu, nu, a):
    """Rate functional on the half lines.

    Parameters
    ----------
    mu : GridMeasure or EmpiricalMeasure
        Supported in ``[0, inf)``, nominal mass 1.
    nu : GridMeasure or EmpiricalMeasure
        Supported in ``(-inf, 0]``, nominal mass 1/2 (zero mass is allowed).
    a : float
        Field strength.
    """
    if a < 0:
        raise DomainError("a must be non-negative")
    lo_mu = _cells(mu)[0]
    hi_nu = _cells(nu)[1]
    if np.any(lo_mu < 0):
        raise DomainError("mu must live on [0, inf)")
    if np.any(hi_nu > 0):
        raise DomainError("nu must live on (-inf, 0]")
    self_mu = log_energy(mu)
    self_nu = log_energy(nu) if nu.mass > 0 else 0.0
    cross = mutual_energy(mu, nu) if nu.mass > 0 else 0.0
    return EnergyReport.assemble(self_mu, self_nu, cross, field_integral(mu, a))


# --------------------------------------------------------- circle version


@dataclass(frozen=True)
class _Elements:
    lo: np.ndarray
    hi: np.ndarray
    weights: np.ndarray
    points: np.ndarray
    diffuse: bool
    pole: float


def _elements(s):
    if not isinstance(s, SphereMeasure):
        raise DomainError("expected a SphereMeasure")
    if s.cell_edges is not None:
        lo, hi = s.cell_edges[:-1], s.cell_edges[1:]
        diffuse = True
    else:
        z = s.points
        with np.errstate(divide="ignore"):
            x = z[:, 0] / (1.0 - z[:, 1])
        lo = hi = x
        diffuse = False
    return _Elements(lo, hi, s.weights, s.points, diffuse, s.mass_at_infinity)


def _nodes(lo, hi, order):
    t, w = np.polynomial.legendre.leggauss(order)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return mid[:, None] + half[:, None] * t[None, :], 0.5 * w


def _unit_speed(x):
    # |dT/dx| from the derivative of both coordinates
    d = (1.0 + x * x) ** 2
    return np.hypot((1.0 - x * x) / d, 2.0 * x / d)


def _smooth_correction(x1, x2, chunk=512):
    """Mean over node pairs of -log(|T(x) - T(y)| / |x - y|)."""
    n1, g1 = x1.shape
    n2, g2 = x2.shape
    _, wq1 = _nodes(np.zeros(1), np.ones(1), g1)
    _, wq2 = _nodes(np.zeros(1), np.ones(1), g2)
    z2 = stereo_map(x2.ravel())
    out = np.empty((n1, n2))
    for start in range(0, n1, chunk):
        xs = x1[start:start + chunk].ravel()
        z1 = stereo_map(xs)
        chord = np.hypot(z1[:, None, 0] - z2[None, :, 0], z1[:, None, 1] - z2[None, :, 1])
        line = np.abs(xs[:, None] - x2.ravel()[None, :])
        same = line == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            g = -np.log(chord / line)
        if np.any(same):
            speed = np.broadcast_to(_unit_speed(xs)[:, None], g.shape)
            g[same] = -np.log(speed[same])
        g = g.reshape(-1, g1, n2, g2)
        out[start:start + chunk] = np.einsum("igjh,g,h->ij", g, wq1, wq2)
    return out


def _sphere_kernel(e1, e2, order):
    line = cell_log_kernel(e1.lo[:, None], e1.hi[:, None], e2.lo[None, :], e2.hi[None, :])
    g1 = order if e1.diffuse else 1
    g2 = order if e2.diffuse else 1
    x1 = _nodes(e1.lo, e1.hi, g1)[0] if e1.diffuse else e1.lo[:, None]
    x2 = _nodes(e2.lo, e2.hi, g2)[0] if e2.diffuse else e2.lo[:, None]
    return line + _smooth_correction(x1, x2)


def _pole_kernel(e, order):
    """Mean of -log|z - (0, 1)| over each element."""
    if e.diffuse:
        x, wq = _nodes(e.lo, e.hi, order)
        z = stereo_map(x)
        d = np.hypot(z[..., 0] - _POLE[0], z[..., 1] - _POLE[1])
        return -(np.log(d) * wq).sum(axis=1)
    d = np.hypot(e.points[:, 0] - _POLE[0], e.points[:, 1] - _POLE[1])
    return -np.log(d)


def _sphere_self(e, order):
    total = 0.0
    if e.weights.size:
        mat = _sphere_kernel(e, e, order)
        if not e.diffuse:
            np.fill_diagonal(mat, 0.0)
            if np.any(np.isinf(mat)):
                return math.inf
        total = _fixed_sum(mat, e.weights, e.weights)
    if e.pole > 0:
        if e.diffuse:
            return math.inf
        total += 2.0 * e.pole * math.fsum(e.weights * _pole_kernel(e, order))
    return total


def _sphere_cross(e1, e2, order):
    if e1.pole > 0 and e2.pole > 0:
        return math.inf
    total = 0.0
    if e1.weights.size and e2.weights.size:
        mat = _sphere_kernel(e1, e2, order)
        if np.any(np.isinf(mat)):
            return math.inf
        total = _fixed_sum(mat, e1.weights, e2.weights)
    if e1.pole > 0:
        total += e1.pole * math.fsum(e2.weights * _pole_kernel(e2, order))
    if e2.pole > 0:
        total += e2.pole * math.fsum(e1.weights * _pole_kernel(e1, order))
    return total


def _compact_field(z, a):
    # x - 2 sqrt(a x) + (3/4) log(1 - |z|^2), with x read off the circle point
    x = z[..., 0] / (1.0 - z[..., 1])
    return x - 2.0 * np.sqrt(a * x) + 0.75 * np.log1p(-(z[..., 0] ** 2 + z[..., 1] ** 2))


def _sphere_field(e, a, order):
    if e.pole > 0:
        return math.inf
    if not e.weights.size:
        return 0.0
    if not e.diffuse:
        return math.fsum(e.weights * _compact_field(e.points, a))
    # integrate in t = sqrt(x) so the square-root cusp at 0 is resolved
    t, wq = _nodes(np.sqrt(e.lo), np.sqrt(e.hi), order)
    vals = _compact_field(stereo_map(t * t), a)
    dt = (np.sqrt(e.hi) - np.sqrt(e.lo))[:, None]
    means = (vals * 2.0 * t * wq * dt).sum(axis=1) / (e.hi - e.lo)
    return math.fsum(e.weights * means)


def rate_sphere(mu_s, nu_s, a, order=8):
    """Rate functional on the compactifying circle.

    Uses the Euclidean kernel ``-log|z - w|`` and the compactified field
    ``x - 2 sqrt(a x) - (3/4) log(1 + x^2)``; mass of ``mu_s`` at the pole
    (0, 1) makes the value ``+inf``.

    Parameters
    ----------
    order : int, default=8
        Gauss-Legendre nodes per cell for the smooth parts.
    """
    e_mu, e_nu = _elements(mu_s), _elements(nu_s)
    if e_mu.weights.size and np.any(e_mu.lo < 0):
        raise DomainError("mu must live on the upper-right arc")
    if e_nu.weights.size and np.any(e_nu.hi > 0):
        raise DomainError("nu must live on the upper-left arc")
    field_term = _sphere_field(e_mu, a, order)
    self_mu = _sphere_self(e_mu, order)
    has_nu = nu_s.mass > 0
    self_nu = _sphere_self(e_nu, order) if has_nu else 0.0
    cross = _sphere_cross(e_mu, e_nu, order) if has_nu else 0.0
    return EnergyReport.assemble(self_mu, self_nu, cross, field_term)
