"""Measure containers and the operations acting on them.

Grid measures are piecewise uniform: cell ``i`` spreads ``weights[i]``
uniformly over ``[edges[i], edges[i+1]]`` and is reported at its midpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize, sparse

from .exceptions import DomainError, MassMismatchError, SingularPointError, TruncationError
from .fields import ModelParams
from .special import zero_table

MASS_RTOL = 1e-12


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Non-negative weights on the cells of a strictly increasing grid.

    Parameters
    ----------
    edges : array_like, shape (n + 1,)
        Strictly increasing cell boundaries.
    weights : array_like, shape (n,)
        Non-negative cell masses.
    mass : float, optional
        Declared total mass; checked against ``weights.sum()``.
    """

    edges: np.ndarray
    weights: np.ndarray
    mass: float = None

    def __post_init__(self):
        edges, weights = _frozen(self.edges), _frozen(self.weights)
        if edges.ndim != 1 or weights.ndim != 1 or edges.size != weights.size + 1:
            raise DomainError("need len(edges) == len(weights) + 1")
        if weights.size == 0:
            raise DomainError("a grid measure needs at least one cell")
        if not np.all(np.isfinite(edges)) or np.any(np.diff(edges) <= 0):
            raise DomainError("edges must be finite and strictly increasing")
        if np.any(~np.isfinite(weights)) or np.any(weights < 0):
            raise DomainError("weights must be finite and non-negative")
        total = math.fsum(weights)
        mass = total if self.mass is None else float(self.mass)
        if abs(total - mass) > MASS_RTOL * max(1.0, mass):
            raise MassMismatchError(f"weights sum to {total}, declared mass {mass}")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "mass", mass)

    @property
    def points(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def lo(self):
        return self.edges[:-1]

    @property
    def hi(self):
        return self.edges[1:]

    def __len__(self):
        return self.weights.size

    def with_weights(self, weights, mass=None):
        return GridMeasure(self.edges, weights, mass)

    def scaled(self, factor):
        return GridMeasure(self.edges, self.weights * factor, self.mass * factor)

    def cdf(self, x):
        """Cumulative mass of ``(-inf, x]``."""
        x = np.asarray(x, dtype=float)
        frac = np.clip((x[..., None] - self.lo) / self.widths, 0.0, 1.0)
        return (frac * self.weights).sum(axis=-1)

    def moment(self, k=1):
        """Exact k-th moment of the piecewise-uniform measure."""
        lo, hi = self.lo, self.hi
        cell = (hi ** (k + 1) - lo ** (k + 1)) / ((k + 1) * (hi - lo))
        return float(np.dot(self.weights, cell))

    @classmethod
    def uniform(cls, lo, hi, n, mass=1.0):
        edges = np.linspace(lo, hi, n + 1)
        return cls(edges, np.full(n, mass / n), mass)

    @classmethod
    def from_cdf(cls, edges, cdf, mass=None):
        """Cell masses from a cumulative distribution function."""
        edges = np.asarray(edges, dtype=float)
        w = np.diff(np.asarray(cdf(edges), dtype=float))
        w = np.clip(w, 0.0, None)
        if mass is not None:
            w = w * (float(mass) / math.fsum(w))
        return cls(edges, w, mass)


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Equal-mass atoms: ``atom_mass`` at each entry of ``atoms``."""

    atoms: np.ndarray
    atom_mass: float

    def __post_init__(self):
        atoms = _frozen(np.ravel(self.atoms))
        if atoms.size == 0 or not np.all(np.isfinite(atoms)):
            raise DomainError("atoms must be a non-empty finite array")
        if not self.atom_mass > 0:
            raise DomainError("atom_mass must be positive")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "atom_mass", float(self.atom_mass))

    @property
    def mass(self):
        return self.atom_mass * self.atoms.size

    @property
    def points(self):
        return self.atoms

    @property
    def weights(self):
        return np.full(self.atoms.size, self.atom_mass)

    def __len__(self):
        return self.atoms.size

    def moment(self, k=1):
        return float(self.atom_mass * np.sum(self.atoms**k))

    @classmethod
    def normalized(cls, atoms, mass=1.0):
        atoms = np.ravel(atoms)
        return cls(atoms, mass / atoms.size)


# ---------------------------------------------------------------- lattice


@dataclass(frozen=True, eq=False)
class Lattice:
    """First ``count`` points ``-(j_{alpha,k} / (2 sqrt(a) N))^2`` of the
    negative lattice, strictly decreasing in ``k``."""

    params: ModelParams
    points: np.ndarray

    @property
    def count(self):
        return int(self.points.size)

    def __len__(self):
        return self.count


def lattice_points(params, K):
    """Return the :class:`Lattice` holding the first ``K`` points."""
    if K < 1:
        raise DomainError("lattice size must be >= 1")
    zeros = zero_table(params.alpha, int(K)).zeros
    return Lattice(params, _frozen(-((zeros / (2.0 * math.sqrt(params.a) * params.N)) ** 2)))


def default_lattice_size(params, window):
    """Lattice length covering ``[-window, 0]`` with margin."""
    return int(math.ceil(4.0 * math.sqrt(params.a * window) * params.N / math.pi)) + 64


# ------------------------------------------------------------- constraint


@dataclass(frozen=True)
class ConstraintMeasure:
    """The upper constraint with density ``(sqrt(a)/pi) |x|^{-1/2}`` on x < 0."""

    a: float

    def density(self, x):
        return sigma_density(self.a, x)

    def mass_between(self, lo, hi):
        """Mass of ``[lo, hi]`` for ``lo <= hi <= 0``, in closed form."""
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        return 2.0 * math.sqrt(self.a) / math.pi * (np.sqrt(-lo) - np.sqrt(-np.minimum(hi, 0.0)))

    def cell_caps(self, edges):
        edges = np.asarray(edges, dtype=float)
        return self.mass_between(edges[:-1], edges[1:])


def sigma_density(a, x):
    """Constraint density ``(sqrt(a)/pi) |x|^{-1/2}`` for ``x < 0``."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr == 0):
        raise SingularPointError("constraint density is unbounded at the origin")
    if np.any(arr > 0):
        raise DomainError("constraint density lives on the negative half line")
    out = math.sqrt(a) / math.pi / np.sqrt(-arr)
    return float(out) if out.ndim == 0 else out


def sigma_mass(a, b):
    """``sigma([b, 0])`` for ``b <= 0``."""
    return 2.0 * math.sqrt(a) / math.pi * math.sqrt(-b)


def sigma_n_mass(params, b):
    """``sigma_N([b, 0]) = #{k : a_{k,N} >= b} / N``."""
    if b > 0:
        raise DomainError("b must be <= 0")
    threshold = 2.0 * math.sqrt(params.a * -b) * params.N
    K = int(math.ceil(threshold / math.pi)) + 64
    while True:
        zeros = zero_table(params.alpha, K).zeros
        if zeros[-1] > threshold:
            break
        K *= 2
    return np.count_nonzero(zeros <= threshold) / params.N


# ------------------------------------------------------- compactification


def stereo_map(x):
    """Inverse stereographic projection onto the circle of diameter 1
    centred at (0, 1/2); returns an array of shape ``x.shape + (2,)``."""
    x = np.asarray(x, dtype=float)
    d = 1.0 + x * x
    return np.stack([x / d, x * x / d], axis=-1)


def stereo_inverse(z):
    """Line coordinate of circle points other than the pole (0, 1)."""
    z = np.asarray(z, dtype=float)
    X, Y = z[..., 0], z[..., 1]
    # x = X / (1 - Y) = Y / X; the second form avoids cancellation for |x| > 1
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(Y > 0.5, Y / X, X / (1.0 - Y))


def circle_angle(z):
    """Angle ``theta`` with ``z = (sin(theta)/2, (1 - cos(theta))/2)``."""
    z = np.asarray(z, dtype=float)
    return np.arctan2(2.0 * z[..., 0], 1.0 - 2.0 * z[..., 1])


@dataclass(frozen=True, eq=False)
class SphereMeasure:
    """Measure on the compactifying circle.

    ``points`` are finite atoms (images of line points); the pole carries
    ``mass_at_infinity``. When ``cell_edges`` is set (line coordinates of the
    preimage cells) atom ``i`` stands for the image of the uniform measure on
    ``[cell_edges[i], cell_edges[i+1]]``.
    """

    points: np.ndarray
    weights: np.ndarray
    mass_at_infinity: float = 0.0
    cell_edges: np.ndarray = None

    def __post_init__(self):
        pts = _frozen(self.points).reshape(-1, 2)
        w = _frozen(self.weights)
        if w.size != pts.shape[0] or np.any(w < 0):
            raise DomainError("one non-negative weight per point required")
        radius = np.hypot(pts[:, 0], pts[:, 1] - 0.5)
        if np.any(np.abs(radius - 0.5) > 1e-12):
            raise DomainError("points must lie on the circle of radius 1/2 centred at (0, 1/2)")
        if self.mass_at_infinity < 0:
            raise DomainError("mass at infinity must be non-negative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "mass_at_infinity", float(self.mass_at_infinity))
        if self.cell_edges is not None:
            object.__setattr__(self, "cell_edges", _frozen(self.cell_edges))

    @property
    def mass(self):
        return math.fsum(self.weights) + self.mass_at_infinity

    @property
    def angles(self):
        return circle_angle(self.points)

    def atoms_with_pole(self):
        """Angles and weights of all atoms, the pole included when charged."""
        ang, w = self.angles, self.weights
        if self.mass_at_infinity > 0:
            ang = np.append(ang, np.pi)
            w = np.append(w, self.mass_at_infinity)
        return ang, w


def stereo_push(m):
    """Push a grid or empirical measure forward to the circle."""
    pts = stereo_map(m.points)
    edges = m.edges if isinstance(m, GridMeasure) else None
    return SphereMeasure(pts, np.asarray(m.weights, dtype=float), 0.0, edges)


def stereo_pull(s):
    """Inverse of :func:`stereo_push` for measures without mass at the pole."""
    if s.mass_at_infinity > 0:
        raise DomainError("cannot pull back a measure charging the point at infinity")
    x = stereo_inverse(s.points)
    if s.cell_edges is not None:
        return GridMeasure(s.cell_edges, s.weights)
    uniform = np.allclose(s.weights, s.weights[0], rtol=1e-12, atol=0)
    if not uniform:
        raise DomainError("atoms with unequal weights have no empirical-measure preimage")
    return EmpiricalMeasure(x, float(s.weights[0]))


# ----------------------------------------------------- weak-topology metric


_LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def _chord(theta1, theta2):
    return np.abs(np.sin(0.5 * (theta1[:, None] - theta2[None, :])))


def _bin_angles(ang, w, n_bins):
    edges = np.linspace(-np.pi, np.pi, n_bins + 1)
    idx = np.clip(np.searchsorted(edges, ang, side="right") - 1, 0, n_bins - 1)
    # the pole sits at +pi == -pi
    binned = np.bincount(idx, weights=w, minlength=n_bins)
    centres = 0.5 * (edges[:-1] + edges[1:])
    return centres, binned


def transport_cost(src_angles, src_w, dst_angles, dst_w):
    """Optimal transport cost between equal-mass atomic measures on the circle
    under the chord distance, by the transportation linear program."""
    n, m = src_w.size, dst_w.size
    if n == 0 or m == 0:
        return 0.0
    cost = _chord(src_angles, dst_angles).ravel()
    rows = np.repeat(np.arange(n), m)
    cols = np.tile(np.arange(m), n)
    a_eq = sparse.vstack(
        [
            sparse.csr_matrix((np.ones(n * m), (rows, np.arange(n * m))), shape=(n, n * m)),
            sparse.csr_matrix((np.ones(n * m), (cols, np.arange(n * m))), shape=(m, n * m)),
        ]
    )
    # solve at unit mass (tiny net excesses fall below solver tolerances)
    # with the balance exact so the equality system is consistent
    total = src_w.sum()
    src_w = src_w / total
    dst_w = dst_w / dst_w.sum()
    res = optimize.linprog(
        cost, A_eq=a_eq, b_eq=np.concatenate([src_w, dst_w]), bounds=(0, None), method="highs", options=_LP_OPTIONS
    )
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun) * total


def bl_distance(m1, m2, n_bins=512):
    """Bounded-Lipschitz distance between two equal-mass circle measures.

    On the circle of diameter 1 every chord is shorter than 2, so the
    bounded-Lipschitz ball coincides with the 1-Lipschitz functions up to
    constants and the distance equals the Wasserstein-1 cost under the chord
    metric. Atoms are binned on ``n_bins`` equal angular cells (``None`` keeps
    them exact) and only the net excess is transported.
    """
    if not math.isclose(m1.mass, m2.mass, rel_tol=1e-9, abs_tol=1e-12):
        raise MassMismatchError(f"masses differ: {m1.mass} vs {m2.mass}")
    a1, w1 = m1.atoms_with_pole()
    a2, w2 = m2.atoms_with_pole()
    if n_bins is None:
        ang = np.concatenate([a1, a2])
        uniq, inv = np.unique(ang, return_inverse=True)
        p = np.bincount(inv[: a1.size], weights=w1, minlength=uniq.size)
        q = np.bincount(inv[a1.size :], weights=w2, minlength=uniq.size)
        centres = uniq
    else:
        centres, p = _bin_angles(a1, w1, n_bins)
        _, q = _bin_angles(a2, w2, n_bins)
    net = p - q
    scale = max(m1.mass, m2.mass, 1e-300)
    tol = 1e-14 * scale
    # swapping the arguments negates net exactly; fix its orientation so both
    # orders solve the same LP and the distance is exactly symmetric
    big = np.flatnonzero(np.abs(net) > tol)
    if big.size and net[big[0]] < 0:
        net = -net
    src = net > tol
    dst = net < -tol
    return transport_cost(centres[src], net[src], centres[dst], -net[dst])


# ------------------------------------------------------------ discretization


def quantile_discretize(m, n):
    """Successive-minimum quantile atoms of a piecewise-uniform measure.

    Returns ``x_1 <= ... <= x_n`` where ``x_k`` is the smallest point whose
    cumulative mass reaches ``k * mass / n``; each atom represents
    ``mass / n``.
    """
    n = int(n)
    if n < 1:
        raise DomainError("need at least one atom")
    if not isinstance(m, GridMeasure):
        raise DomainError("quantile discretization needs an atomless (grid) measure")
    cum = np.concatenate([[0.0], np.cumsum(m.weights)])
    levels = m.mass * np.arange(1, n + 1) / n
    slack = 1e-13 * m.mass
    idx = np.searchsorted(cum, levels - slack, side="left")
    idx = np.clip(idx, 1, m.weights.size)
    cell = idx - 1
    w = m.weights[cell]
    frac = np.where(w > 0, (levels - cum[cell]) / np.where(w > 0, w, 1.0), 1.0)
    x = m.edges[cell] + np.clip(frac, 0.0, 1.0) * m.widths[cell]
    return np.maximum.accumulate(x)


class SnapResult(NamedTuple):
    values: np.ndarray
    indices: np.ndarray
    interlacing: bool
    distinct: bool


def snap_to_lattice(atoms, lat):
    """Move each negative atom to the nearest lattice point strictly below it.

    Raises
    ------
    TruncationError
        When an atom has no tabulated lattice point below it.
    """
    y = np.asarray(atoms, dtype=float)
    ascending = lat.points[::-1]
    below = np.searchsorted(ascending, y, side="left")
    if np.any(below == 0):
        raise TruncationError("lattice table exhausted below an atom; enlarge K")
    indices = lat.count - below
    values = lat.points[indices]
    interlacing = bool(np.all((y[:-1] < values[1:]) & (values[1:] < y[1:])))
    distinct = bool(np.unique(indices).size == indices.size)
    return SnapResult(values, indices, interlacing, distinct)
