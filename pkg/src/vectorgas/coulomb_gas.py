"""Metropolis-within-Gibbs sampling of the two-type Coulomb gas.

N continuous particles ``x`` on the positive half line repel each other, N/2
particles ``u`` on the Bessel-zero lattice repel each other, and the two types
attract. The sampler works on lattice *indices* for ``u`` so that "at most one
particle per site" is a property of the state.

Random numbers come from a PCG64 stream (one ``SeedSequence`` child per
chain), drawn in numpy blocks and consumed by the compiled sweep kernel.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .exceptions import ConvergenceError, DomainError
from .fields import v_n, v_n_scalar
from .measures import (
    EmpiricalMeasure,
    GridMeasure,
    Lattice,
    default_lattice_size,
    lattice_points,
    quantile_discretize,
    snap_to_lattice,
)

WINDOW = 16
GLOBAL_PROB = 0.05
TARGET_ACCEPT = 0.35
DRIFT_EVERY = 10_000
DRIFT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ParticleConfig:
    """Continuous positions ``x`` and distinct lattice indices ``u_index``."""

    x: np.ndarray
    u_index: np.ndarray
    lattice: Lattice

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        idx = np.array(self.u_index, dtype=np.int64)
        p = self.lattice.params
        p.require_even()
        if x.shape != (p.N,) or idx.shape != (p.N // 2,):
            raise DomainError(f"need {p.N} x-particles and {p.N // 2} lattice particles")
        if np.any(idx < 0) or np.any(idx >= self.lattice.count):
            raise DomainError("lattice index outside the table")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u_index", idx)

    @property
    def params(self):
        return self.lattice.params

    @property
    def u(self):
        return self.lattice.points[self.u_index]


@dataclass
class ChainStats:
    steps: int = 0
    proposed_x: int = 0
    accepted_x: int = 0
    proposed_u: int = 0
    accepted_u: int = 0
    width: float = 0.0
    seed: int = 0
    max_drift: float = 0.0
    tail_visits: int = 0
    burnin_acceptance: list = field(default_factory=list)

    @property
    def acceptance_x(self):
        return self.accepted_x / max(self.proposed_x, 1)

    @property
    def acceptance_u(self):
        return self.accepted_u / max(self.proposed_u, 1)


def _pair_log_sum(v):
    d = np.abs(v[:, None] - v[None, :])
    iu = np.triu_indices(v.size, 1)
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(d[iu])))


def gas_log_density(c):
    """Unnormalized log density of a configuration; ``-inf`` on collisions.

    ``2 sum_{i<j} log|x_i - x_j| + 2 sum_{i<j} log|u_i - u_j|
    - sum_{i,j} log(x_i - u_j) - N sum_i v_n(x_i) + sum_j log|u_j|``
    """
    p = c.params
    x, u = c.x, c.u
    if np.any(x < 0) or (p.alpha > 0 and np.any(x == 0)):
        return -math.inf
    if np.unique(c.u_index).size != c.u_index.size or np.unique(x).size != x.size:
        return -math.inf
    total = 2.0 * _pair_log_sum(x) + 2.0 * _pair_log_sum(u)
    total -= float(np.sum(np.log(x[:, None] - u[None, :])))
    total -= p.N * float(np.sum(v_n(p, x)))
    total += float(np.sum(np.log(-u)))
    return total


# ------------------------------------------------------------ compiled core


@njit(cache=True)
def _delta_x(x, u, i, new, a, alpha, n):
    old = x[i]
    d = 0.0
    for j in range(x.shape[0]):
        if j != i:
            d += 2.0 * (math.log(abs(new - x[j])) - math.log(abs(old - x[j])))
    for j in range(u.shape[0]):
        d -= math.log(new - u[j]) - math.log(old - u[j])
    d -= n * (v_n_scalar(a, alpha, n, new) - v_n_scalar(a, alpha, n, old))
    return d


@njit(cache=True)
def _delta_u(x, u, m, new):
    old = u[m]
    d = 0.0
    for j in range(u.shape[0]):
        if j != m:
            d += 2.0 * (math.log(abs(new - u[j])) - math.log(abs(old - u[j])))
    for i in range(x.shape[0]):
        d -= math.log(x[i] - new) - math.log(x[i] - old)
    d += math.log(-new) - math.log(-old)
    return d


@njit(cache=True, nogil=True)
def _sweeps(x, uidx, occupied, points, a, alpha, width, normals, acc_x, pick_global, offsets, targets, acc_u,
            out_x, out_u, emit_every, logd, tail_start):
    """Run ``normals.shape[0]`` sweeps in place.

    Returns accepted x moves, accepted u moves, the updated running log
    density, the number of emitted samples and top-of-table visits.
    """
    n_sweeps, N = normals.shape
    K = points.shape[0]
    half = uidx.shape[0]
    u = np.empty(half)
    for m in range(half):
        u[m] = points[uidx[m]]
    ax = 0
    au = 0
    emitted = 0
    tail = 0
    for s in range(n_sweeps):
        for i in range(N):
            new = x[i] + width * normals[s, i]
            if new < 0.0 or (new == 0.0 and alpha > 0.0):
                continue
            dup = False
            for j in range(N):
                if j != i and x[j] == new:
                    dup = True
            if dup:
                continue
            d = _delta_x(x, u, i, new, a, alpha, float(N))
            if math.log(acc_x[s, i]) < d:
                x[i] = new
                logd += d
                ax += 1
        for m in range(half):
            if pick_global[s, m]:
                k = targets[s, m]
            else:
                k = uidx[m] + offsets[s, m]
            if k < 0 or k >= K or occupied[k]:
                continue
            d = _delta_u(x, u, m, points[k])
            if math.log(acc_u[s, m]) < d:
                occupied[uidx[m]] = False
                occupied[k] = True
                uidx[m] = k
                u[m] = points[k]
                logd += d
                au += 1
                if k >= tail_start:
                    tail += 1
        if emit_every > 0 and (s + 1) % emit_every == 0:
            for i in range(N):
                out_x[emitted, i] = x[i]
            for m in range(half):
                out_u[emitted, m] = u[m]
            emitted += 1
    return ax, au, logd, emitted, tail


def _random_block(rng, sweeps, N, half, K, window):
    normals = rng.standard_normal((sweeps, N))
    acc_x = rng.random((sweeps, N))
    pick_global = rng.random((sweeps, half)) < GLOBAL_PROB
    # offsets uniform on {-W..-1, 1..W}
    off = rng.integers(1, window + 1, (sweeps, half)) * np.where(rng.random((sweeps, half)) < 0.5, -1, 1)
    targets = rng.integers(0, K, (sweeps, half))
    acc_u = rng.random((sweeps, half))
    return normals, acc_x, pick_global, off.astype(np.int64), targets.astype(np.int64), acc_u


# -------------------------------------------------------------- public API


@dataclass(frozen=True, eq=False)
class ChainResult:
    """Post-burnin samples of one chain (rows are emitted configurations)."""

    x: np.ndarray
    u: np.ndarray
    stats: ChainStats
    final: ParticleConfig


def mcmc_run(init, steps, burnin=0, seed=0, thin=1, width=None, window=WINDOW, chunk=DRIFT_EVERY):
    """Run one chain from ``init``.

    One step is a sweep: every x-particle gets a Gaussian move and every
    lattice particle a move to an unoccupied site (offset within ``window``
    indices, or uniform over the table with probability 5%). During burn-in
    the Gaussian width is adapted by Robbins-Monro towards 35% acceptance.

    Parameters
    ----------
    init : ParticleConfig
        Must have finite log density.
    steps : int
        Post-burnin sweeps; one sample is emitted every ``thin`` sweeps.
    burnin : int
    seed : int
    thin : int
    width : float, optional
        Initial x-proposal standard deviation.

    Returns
    -------
    ChainResult
    """
    if steps < 0 or burnin < 0 or thin < 1:
        raise DomainError("steps and burnin must be >= 0 and thin >= 1")
    start_logd = gas_log_density(init)
    if not np.isfinite(start_logd):
        raise DomainError("initial configuration has zero density")
    p = init.params
    points = np.ascontiguousarray(init.lattice.points)
    K = points.size
    x = init.x.copy()
    uidx = init.u_index.copy()
    occupied = np.zeros(K, dtype=np.bool_)
    occupied[uidx] = True
    N, half = x.size, uidx.size
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    if width is None:
        width = 0.25 * max(float(np.std(x)), 0.1) / math.sqrt(N)
    stats = ChainStats(seed=int(seed))
    tail_start = int(0.9 * K)
    logd = start_logd
    no_x = np.empty((0, N))
    no_u = np.empty((0, half))

    def check_drift():
        full = gas_log_density(ParticleConfig(x, uidx, init.lattice))
        drift = abs(full - logd)
        stats.max_drift = max(stats.max_drift, drift)
        if drift > DRIFT_TOL * max(1.0, abs(full)):
            raise ConvergenceError("incremental log density drifted", {"drift": drift, "full": full})
        return full

    # burn-in with adaptation, one sweep per update
    log_w = math.log(width)
    done = 0
    while done < burnin:
        block = min(chunk, burnin - done)
        for t in range(block):
            r = _random_block(rng, 1, N, half, K, window)
            ax, au, logd, _, tail = _sweeps(x, uidx, occupied, points, p.a, p.alpha, math.exp(log_w), *r,
                                            no_x, no_u, 0, logd, tail_start)
            rate = ax / N
            log_w += (rate - TARGET_ACCEPT) / (1.0 + done + t) ** 0.6
            stats.burnin_acceptance.append(rate)
        done += block
        logd = check_drift()
    stats.width = math.exp(log_w)

    n_out = steps // thin
    out_x = np.empty((n_out, N))
    out_u = np.empty((n_out, half))
    emitted = 0
    done = 0
    while done < steps:
        block = min(chunk - chunk % thin or thin, steps - done)
        r = _random_block(rng, block, N, half, K, window)
        n_emit = block // thin
        bx = np.empty((n_emit, N))
        bu = np.empty((n_emit, half))
        ax, au, logd, got, tail = _sweeps(x, uidx, occupied, points, p.a, p.alpha, stats.width, *r,
                                          bx, bu, thin, logd, tail_start)
        out_x[emitted:emitted + got] = bx[:got]
        out_u[emitted:emitted + got] = bu[:got]
        emitted += got
        stats.accepted_x += ax
        stats.accepted_u += au
        stats.proposed_x += block * N
        stats.proposed_u += block * half
        stats.tail_visits += tail
        done += block
        logd = check_drift()
    stats.steps = burnin + steps
    final = ParticleConfig(x, uidx, init.lattice)
    return ChainResult(out_x[:emitted], out_u[:emitted], stats, final)


def gas_lattice(p, K=None):
    """Lattice for the sampler; default covers ``[-4(1 + a), 0]`` and at least 8N sites."""
    if K is None:
        K = max(8 * p.N, default_lattice_size(p, 4.0 * (1.0 + p.a)))
    return lattice_points(p, K)


def init_config(mu, nu, p, K=None):
    """Configuration from quantile atoms of ``mu`` and lattice-snapped
    quantile atoms of ``nu``.

    Snapping collisions are moved to the next free, more negative site.

    Returns
    -------
    config : ParticleConfig
    diagnostics : dict
        ``interlacing``, ``collisions`` (number of shifted particles).
    """
    p.require_even()
    if not isinstance(mu, GridMeasure) or not isinstance(nu, GridMeasure):
        raise DomainError("initial measures must be atomless grid measures")
    lat = gas_lattice(p, K)
    x = quantile_discretize(mu, p.N)
    if np.unique(x).size != x.size:
        raise DomainError("quantile atoms of mu collide; mu must have no gaps at quantile levels")
    y = quantile_discretize(nu, p.N // 2)
    snap = snap_to_lattice(y, lat)
    idx = snap.indices.copy()
    taken = set()
    collisions = 0
    for m in range(idx.size):
        k = int(idx[m])
        while k in taken:
            k += 1
            collisions += 1
        if k >= lat.count:
            raise DomainError("lattice exhausted while resolving snapping collisions; enlarge K")
        taken.add(k)
        idx[m] = k
    if p.alpha > 0 and np.any(x <= 0):
        raise DomainError("x-particles must be positive when alpha > 0")
    cfg = ParticleConfig(x, idx, lat)
    return cfg, {"interlacing": snap.interlacing, "collisions": collisions, "distinct": snap.distinct}


def default_init(p, K=None):
    """Spread x-quantiles over ``[0, (1 + sqrt(a))^2 + 1]`` and occupy the
    lattice sites nearest to 0."""
    p.require_even()
    lat = gas_lattice(p, K)
    hi = (1.0 + math.sqrt(p.a)) ** 2 + 1.0
    x = hi * (np.arange(1, p.N + 1) - 0.5) / p.N
    return ParticleConfig(x, np.arange(p.N // 2), lat)


def split_rhat(chains):
    """Split-R-hat of a scalar summary; ``chains`` has shape (chains, draws)."""
    chains = np.asarray(chains, dtype=float)
    n = chains.shape[1] // 2
    if n < 2:
        raise DomainError("need at least 4 draws per chain")
    halves = np.concatenate([chains[:, :n], chains[:, n:2 * n]], axis=0)
    means = halves.mean(axis=1)
    W = halves.var(axis=1, ddof=1).mean()
    B = n * means.var(ddof=1)
    var_plus = (n - 1) / n * W + B / n
    return float(math.sqrt(var_plus / W)) if W > 0 else math.inf


def _workers(n_tasks):
    cap = int(os.environ.get("VECTORGAS_THREADS", os.cpu_count() or 1))
    return max(1, min(cap, n_tasks))


def run_chains(init, chains, steps, burnin, seed, thin=1, **kwargs):
    """Independent chains from a common start; chain ``c`` uses the ``c``-th
    spawned child of ``SeedSequence(seed)``. Results do not depend on the
    number of worker threads."""
    children = np.random.SeedSequence(int(seed)).spawn(int(chains))
    seeds = [int(c.generate_state(1, np.uint64)[0]) for c in children]

    def one(s):
        return mcmc_run(init, steps, burnin, s, thin, **kwargs)

    with ThreadPoolExecutor(_workers(len(seeds))) as pool:
        return list(pool.map(one, seeds))


def empirical_pair(result, row):
    """``(mu^N, nu^N)`` of one emitted sample."""
    N = result.x.shape[1]
    return EmpiricalMeasure(result.x[row], 1.0 / N), EmpiricalMeasure(result.u[row], 1.0 / N)
