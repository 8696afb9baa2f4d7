"""Constrained vector equilibrium problem on grids.

Minimizes ``I(mu) - I(mu, nu) + I(nu) + int Q dmu`` over probability weights
``mu`` on cells of ``[0, R]`` and weights ``nu`` of mass 1/2 on cells of
``[-S, 0]`` bounded by the constraint caps. Written as
``1/2 w^T G w + f^T w`` with ``w = (mu, nu)`` and
``G = [[2 K_mm, -K_mn], [-K_nm, 2 K_nn]]``, where ``K`` are the exact
cell-averaged logarithmic kernels, the problem is a convex quadratic program
solved by projected gradient descent with Armijo backtracking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import cell_log_kernel
from .exceptions import ConvergenceError, DomainError, InfeasibleError
from .fields import FieldSpec, make_field
from .measures import ConstraintMeasure, GridMeasure, bl_distance, stereo_push

NU_RATIO = 1.1
FEASIBILITY_MARGIN = 1e-3
OUTER_FRACTION = 0.05
OUTER_MASS_TOL = 1e-4
MAX_DOUBLINGS = 4
SUPPORT_TOL = 1e-9


def geometric_edges(S, n, ratio=NU_RATIO, width_cap=None):
    """Edges of ``n`` cells on ``[-S, 0]`` whose widths grow by ``ratio``
    away from 0 until they reach ``width_cap`` (default ``2 S / n``)."""
    if n < 1 or S <= 0:
        raise DomainError("need n >= 1 and S > 0")
    cap = 2.0 * S / n if width_cap is None else width_cap
    powers = ratio ** np.arange(n)

    def span(log_h0):
        return np.minimum(math.exp(log_h0) * powers, cap).sum()

    if span(math.log(cap)) < S:
        raise DomainError("width cap too small to cover [-S, 0]")
    lo, hi = math.log(cap) - n * math.log(ratio) - 50.0, math.log(cap)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if span(mid) < S:
            lo = mid
        else:
            hi = mid
    widths = np.minimum(math.exp(hi) * powers, cap)
    widths *= S / widths.sum()
    offsets = np.concatenate([[0.0], np.cumsum(widths)])
    offsets[-1] = S
    return -offsets[::-1]


def _cell_field(fld, lo, hi, order=16):
    """Cell averages of the effective field; exact for the Wishart field."""
    if fld.kind == "wishart":
        mean_x = 0.5 * (lo + hi)
        mean_sqrt = (2.0 / 3.0) * (hi**1.5 - lo**1.5) / (hi - lo)
        return mean_x - 2.0 * math.sqrt(fld.a) * mean_sqrt
    # Gauss-Legendre in t = sqrt(x) absorbs the square-root cusp at 0
    t, w = np.polynomial.legendre.leggauss(order)
    a, b = np.sqrt(lo)[:, None], np.sqrt(hi)[:, None]
    ts = 0.5 * (a + b) + 0.5 * (b - a) * t[None, :]
    vals = np.asarray(fld(ts * ts), dtype=float) * 2.0 * ts
    return (vals * w[None, :]).sum(axis=1) * 0.5 * (b - a)[:, 0] / (hi - lo)


@dataclass(frozen=True, eq=False)
class EquilibriumProblem:
    """Discretized problem: grids, caps, Gram matrix and linear term."""

    a: float
    field: FieldSpec
    mu_edges: np.ndarray
    nu_edges: np.ndarray
    caps: np.ndarray
    nu_mass: float
    gram: np.ndarray = field(repr=False)
    linear: np.ndarray = field(repr=False)

    @property
    def n_mu(self):
        return self.mu_edges.size - 1

    @property
    def n_nu(self):
        return self.nu_edges.size - 1

    @property
    def R(self):
        return float(self.mu_edges[-1])

    @property
    def S(self):
        return float(-self.nu_edges[0])

    @property
    def field_scale(self):
        return float(np.max(np.abs(self.linear[: self.n_mu])))

    def split(self, w):
        return w[: self.n_mu], w[self.n_mu:]


def build_problem(a=1.0, n_mu=400, n_nu=400, R=None, S=None, fld=None, nu_mass=0.5, ratio=NU_RATIO):
    """Assemble an :class:`EquilibriumProblem`.

    Parameters
    ----------
    a : float
        Field strength; ``a = 0`` is allowed together with ``nu_mass = 0``
        (single-measure problem).
    n_mu, n_nu : int
        Cell counts.
    R, S : float, optional
        Grid extents; defaults ``4 (1 + sqrt(a))^2`` and ``16 max(1, a)``.
    fld : FieldSpec, optional
        Defaults to the Wishart field ``x - 2 sqrt(a x)``.
    nu_mass : float
        Mass of the second measure, 1/2 for the model.

    Raises
    ------
    InfeasibleError
        When the caps on ``[-S, 0]`` cannot hold the mass of ``nu``.
    """
    if a < 0 or not np.isfinite(a):
        raise DomainError("a must be non-negative")
    if a == 0 and nu_mass > 0:
        raise DomainError("a = 0 leaves no constraint measure; use nu_mass = 0")
    fld = make_field("wishart", a=a) if fld is None else fld
    R = 4.0 * (1.0 + math.sqrt(a)) ** 2 if R is None else float(R)
    S = 16.0 * max(1.0, a) if S is None else float(S)
    mu_edges = np.linspace(0.0, R, n_mu + 1)
    if nu_mass > 0:
        nu_edges = geometric_edges(S, n_nu, ratio)
        caps = ConstraintMeasure(a).cell_caps(nu_edges)
        if caps.sum() < nu_mass + FEASIBILITY_MARGIN:
            raise InfeasibleError(f"caps hold {caps.sum():.6g} < {nu_mass} + margin; enlarge S")
    else:
        nu_edges = np.array([-1.0, 0.0])
        caps = np.zeros(1)
    lo_m, hi_m = mu_edges[:-1], mu_edges[1:]
    lo_n, hi_n = nu_edges[:-1], nu_edges[1:]
    k_mm = cell_log_kernel(lo_m[:, None], hi_m[:, None], lo_m[None, :], hi_m[None, :])
    k_nn = cell_log_kernel(lo_n[:, None], hi_n[:, None], lo_n[None, :], hi_n[None, :])
    k_mn = cell_log_kernel(lo_m[:, None], hi_m[:, None], lo_n[None, :], hi_n[None, :])
    gram = np.block([[2.0 * k_mm, -k_mn], [-k_mn.T, 2.0 * k_nn]])
    linear = np.concatenate([_cell_field(fld, lo_m, hi_m), np.zeros(nu_edges.size - 1)])
    for arr in (mu_edges, nu_edges, caps, gram, linear):
        arr.setflags(write=False)
    return EquilibriumProblem(float(a), fld, mu_edges, nu_edges, caps, float(nu_mass), gram, linear)


# ------------------------------------------------------------ projections


def project_simplex(v, mass=1.0):
    """Euclidean projection onto ``{w >= 0, sum w = mass}``."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - mass
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    tau = css[rho] / (rho + 1)
    w = np.maximum(v - tau, 0.0)
    return _fix_mass(w, mass, np.full(v.size, np.inf))


def _fix_mass(w, mass, caps):
    # spread the rounding residual over coordinates strictly inside their bounds
    for _ in range(3):
        resid = mass - math.fsum(w)
        if resid == 0.0:
            break
        # prefer interior coordinates so zeros stay zero
        free = (w > 0) & (w < caps)
        if not np.any(free):
            free = (w > 0) if resid < 0 else (w < caps)
        if not np.any(free):
            break
        w[free] += resid / np.count_nonzero(free)
        np.clip(w, 0.0, caps, out=w)
    return w


def project_capped_simplex(v, caps, mass):
    """Euclidean projection onto ``{0 <= w <= caps, sum w = mass}``.

    The shift ``tau`` in ``w = clip(v - tau, 0, caps)`` is found by bisection
    down to ``1e-14`` relative width, then fixed by one linear step on the
    final bracket.
    """
    total_cap = math.fsum(caps)
    if mass > total_cap * (1 + 1e-15):
        raise InfeasibleError("mass exceeds the total cap")
    if mass == 0:
        return np.zeros_like(v)

    def filled(tau):
        return np.clip(v - tau, 0.0, caps).sum()

    lo, hi = float(np.min(v - caps)), float(np.max(v))
    scale = max(abs(lo), abs(hi), 1.0)
    while hi - lo > 1e-14 * scale:
        mid = 0.5 * (lo + hi)
        if filled(mid) > mass:
            lo = mid
        else:
            hi = mid
        if mid in (lo, hi) and hi - lo <= 4 * np.spacing(scale):
            break
    tau = hi
    w = np.clip(v - tau, 0.0, caps)
    free = (v - tau > 0) & (v - tau < caps)
    if np.any(free):
        w[free] += (mass - w.sum()) / np.count_nonzero(free)
        np.clip(w, 0.0, caps, out=w)
    return _fix_mass(w, mass, caps)


# ------------------------------------------------------------- objective


def objective(prob, mu, nu):
    """``1/2 w^T G w + f^T w`` for feasible weights.

    Raises
    ------
    InfeasibleError
        If masses or caps are violated.
    """
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if mu.shape != (prob.n_mu,) or nu.shape != (prob.n_nu,):
        raise DomainError("weight vectors do not match the grids")
    if np.any(mu < 0) or abs(math.fsum(mu) - 1.0) > 1e-12:
        raise InfeasibleError("mu must be a probability vector")
    if np.any(nu < 0) or abs(math.fsum(nu) - prob.nu_mass) > 1e-12:
        raise InfeasibleError(f"nu must be non-negative with mass {prob.nu_mass}")
    if np.any(nu > prob.caps * (1 + 1e-12)):
        raise InfeasibleError("nu exceeds the constraint caps")
    w = np.concatenate([mu, nu])
    return _value(prob, w, prob.gram @ w)


def _value(prob, w, gw):
    return 0.5 * float(w @ gw) + float(prob.linear @ w)


# -------------------------------------------------------------- solution


@dataclass(frozen=True, eq=False)
class EquilibriumSolution:
    mu_star: GridMeasure
    nu_star: GridMeasure
    objective: float
    el_mu_residual: float
    el_nu_residual: float
    iterations: int
    converged: bool
    problem: EquilibriumProblem = field(repr=False)
    pg_norm: float = math.nan
    active_cells: int = 0
    history: np.ndarray = field(default=None, repr=False)

    @property
    def residual_scale(self):
        return self.problem.field_scale

    def report(self):
        p = self.problem
        return {
            "a": p.a,
            "objective": self.objective,
            "el_mu_residual": self.el_mu_residual,
            "el_nu_residual": self.el_nu_residual,
            "field_scale": p.field_scale,
            "iterations": self.iterations,
            "converged": self.converged,
            "pg_norm": self.pg_norm,
            "R": p.R,
            "S": p.S,
            "n_mu": p.n_mu,
            "n_nu": p.n_nu,
            "active_nu_cells": self.active_cells,
            "first_moment_mu": self.mu_star.moment(1),
        }


def default_start(prob, kind="uniform", seed=0):
    """Feasible starting weights: ``"uniform"``, ``"edge"`` (caps filled from
    0 outward, mu on the left half of the grid) or ``"random"``."""
    n_mu = prob.n_mu
    if kind == "uniform":
        mu = np.full(n_mu, 1.0 / n_mu)
        nu = prob.caps * (prob.nu_mass / prob.caps.sum()) if prob.nu_mass > 0 else np.zeros(prob.n_nu)
    elif kind == "edge":
        mu = np.zeros(n_mu)
        mu[: max(1, n_mu // 2)] = 1.0
        mu /= mu.sum()
        nu = np.zeros(prob.n_nu)
        left = prob.nu_mass
        for i in range(prob.n_nu - 1, -1, -1):
            take = min(prob.caps[i], left)
            nu[i] = take
            left -= take
            if left <= 0:
                break
    elif kind == "random":
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
        mu = project_simplex(rng.random(n_mu) / n_mu)
        nu = project_capped_simplex(rng.random(prob.n_nu) * prob.caps, prob.caps, prob.nu_mass)
        return np.concatenate([mu, nu])
    else:
        raise DomainError(f"unknown start {kind!r}")
    return np.concatenate([project_simplex(mu), project_capped_simplex(nu, prob.caps, prob.nu_mass)])


def _project(prob, w):
    mu, nu = prob.split(w)
    return np.concatenate([project_simplex(mu), project_capped_simplex(nu, prob.caps, prob.nu_mass)])


def _tangent_lmax(prob, iters=200, seed=0):
    """Largest eigenvalue of G restricted to zero-mass directions (power iteration)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    n_mu = prob.n_mu

    def centre(v):
        v = v.copy()
        v[:n_mu] -= v[:n_mu].mean()
        v[n_mu:] -= v[n_mu:].mean()
        return v

    v = centre(rng.standard_normal(prob.gram.shape[0]))
    lam = 1.0
    for _ in range(iters):
        gv = centre(prob.gram @ v)
        lam_new = float(np.linalg.norm(gv) / np.linalg.norm(v))
        v = gv / np.linalg.norm(gv)
        if abs(lam_new - lam) < 1e-10 * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return lam


def _pg_norm(prob, w, g, step):
    return float(np.max(np.abs(w - _project(prob, w - step * g)))) / step


def _descend(prob, w, tol, max_iter, keep_history=False, refresh=100):
    step = 1.0 / _tangent_lmax(prob)
    base = step
    gw = prob.gram @ w
    val = _value(prob, w, gw)
    history = [val] if keep_history else None
    pgn = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = gw + prob.linear
        trial_step = min(2.0 * step, 64.0 * base)
        while True:
            d = _project(prob, w - trial_step * g) - w
            gd = prob.gram @ d
            dd = float(d @ d)
            # the quadratic's exact increment is g.d + d.Gd / 2; sufficient
            # decrease needs d.Gd <= |d|^2 / t (no cancellation in values)
            if float(d @ gd) <= dd / trial_step or trial_step <= base:
                break
            trial_step = max(0.5 * trial_step, base)
        step = trial_step
        w = w + d
        gw = gw + gd
        if it % refresh == 0:
            gw = prob.gram @ w
        val = val + float(g @ d) + 0.5 * float(d @ gd)
        if keep_history:
            history.append(val)
        pgn = math.sqrt(dd) / step if dd > 0 else 0.0
        if float(np.max(np.abs(d))) / step <= tol:
            pgn = _pg_norm(prob, w, gw + prob.linear, base)
            if pgn <= tol:
                break
    gw = prob.gram @ w
    return w, _value(prob, w, gw), it, pgn, (np.array(history) if keep_history else None)


def el_residuals(prob, mu, nu):
    """Euler-Lagrange (KKT) residuals of the discrete problem.

    ``phi_mu = 2 U^mu - U^nu + Q`` must be constant (``l_mu``) where
    ``mu > 0`` and not below it elsewhere. ``phi_nu = 2 U^nu - U^mu`` must be
    constant where ``0 < nu < cap``, at most ``l_nu`` on saturated cells and
    at least ``l_nu`` where ``nu = 0``.

    Returns
    -------
    el_mu, el_nu : float
    """
    w = np.concatenate([mu, nu])
    g = prob.gram @ w + prob.linear
    phi_mu, phi_nu = prob.split(g)
    supp = mu > SUPPORT_TOL * mu.max()
    l_mu = float(np.dot(mu[supp], phi_mu[supp]) / mu[supp].sum())
    el_mu = float(np.max(np.abs(phi_mu[supp] - l_mu)))
    if np.any(~supp):
        el_mu = max(el_mu, float(np.max(np.maximum(0.0, l_mu - phi_mu[~supp]))))
    if prob.nu_mass == 0:
        return el_mu, 0.0
    caps = prob.caps
    zero = nu <= SUPPORT_TOL * caps
    full = nu >= caps * (1.0 - SUPPORT_TOL)
    free = ~zero & ~full
    if np.any(free):
        l_nu = float(np.dot(nu[free], phi_nu[free]) / nu[free].sum())
    else:
        # any level between the saturated maximum and the empty minimum works
        upper = phi_nu[zero].min() if np.any(zero) else math.inf
        lower = phi_nu[full].max() if np.any(full) else -math.inf
        l_nu = 0.5 * (upper + lower) if np.isfinite(upper) and np.isfinite(lower) else min(upper, lower)
    el_nu = 0.0
    if np.any(free):
        el_nu = float(np.max(np.abs(phi_nu[free] - l_nu)))
    if np.any(full):
        el_nu = max(el_nu, float(np.max(np.maximum(0.0, phi_nu[full] - l_nu))))
    if np.any(zero):
        el_nu = max(el_nu, float(np.max(np.maximum(0.0, l_nu - phi_nu[zero]))))
    return el_mu, el_nu


def _outer_mass(prob, mu):
    cut = prob.R * (1.0 - OUTER_FRACTION)
    return float(mu[prob.mu_edges[:-1] >= cut].sum())


def _solve_fixed(prob, tol, max_iter, start, seed, keep_history):
    w0 = start if isinstance(start, np.ndarray) else default_start(prob, start, seed)
    w, val, it, pgn, hist = _descend(prob, np.asarray(w0, dtype=float), tol, max_iter, keep_history)
    mu, nu = prob.split(w)
    el_mu, el_nu = el_residuals(prob, mu, nu)
    mu_star = GridMeasure(prob.mu_edges, mu, 1.0)
    nu_star = GridMeasure(prob.nu_edges, nu, prob.nu_mass) if prob.nu_mass > 0 else GridMeasure(prob.nu_edges, nu, 0.0)
    active = int(np.count_nonzero(nu >= prob.caps * (1.0 - SUPPORT_TOL))) if prob.nu_mass > 0 else 0
    return EquilibriumSolution(mu_star, nu_star, val, el_mu, el_nu, it, pgn <= tol, prob, pgn, active, hist)


def solve(prob, tol=1e-8, max_iter=50_000, start="uniform", seed=0, adapt_domain=True, keep_history=False,
          strict=False):
    """Minimize the discrete functional.

    Parameters
    ----------
    prob : EquilibriumProblem
    tol : float
        Stopping threshold for the max-norm of the projected gradient map.
    max_iter : int
    start : {"uniform", "edge", "random"} or ndarray
    adapt_domain : bool
        Double ``R`` (at most 4 times) while ``mu`` keeps more than ``1e-4``
        mass in the outer 5% of ``[0, R]``.
    strict : bool
        Raise :class:`ConvergenceError` instead of returning an unconverged
        solution.

    Returns
    -------
    EquilibriumSolution
    """
    sol = _solve_fixed(prob, tol, max_iter, start, seed, keep_history)
    doublings = 0
    while adapt_domain and _outer_mass(prob, sol.mu_star.weights) > OUTER_MASS_TOL and doublings < MAX_DOUBLINGS:
        doublings += 1
        prob = build_problem(prob.a, prob.n_mu, prob.n_nu, 2.0 * prob.R, prob.S, prob.field, prob.nu_mass)
        sol = _solve_fixed(prob, tol, max_iter, start if isinstance(start, str) else "uniform", seed, keep_history)
    if strict and not sol.converged:
        raise ConvergenceError(
            "projected gradient did not reach the tolerance",
            {"pg_norm": sol.pg_norm, "iterations": sol.iterations, "tol": tol},
        )
    return sol


def solution_distance(s1, s2, n_bins=512):
    """Bounded-Lipschitz distance between the mu-components of two solutions."""
    return bl_distance(stereo_push(s1.mu_star), stereo_push(s2.mu_star), n_bins)


def marchenko_pastur_cdf(x):
    """CDF of the law with density ``sqrt((4 - x) / x) / (2 pi)`` on ``[0, 4]``."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 4.0)
    phi = np.arcsin(np.sqrt(x) / 2.0)
    return (2.0 / np.pi) * (phi + 0.5 * np.sin(2.0 * phi))


def marchenko_pastur_grid(edges):
    """The quarter-circle-type law above as a grid measure on ``edges``."""
    edges = np.asarray(edges, dtype=float)
    return GridMeasure(edges, np.diff(marchenko_pastur_cdf(edges)))
