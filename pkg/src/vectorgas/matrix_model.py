"""Non-centered complex Wishart samples ``X = A + G`` and their spectra.

``A`` is the ``(N + alpha) x N`` matrix with ``sqrt(a)`` on the diagonal of
its top ``N x N`` block and ``alpha`` zero rows below. Every sample draws from
its own PCG64 stream seeded by ``SeedSequence(seed)``, so a sample is a pure
function of ``(params, seed)``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, UnsupportedRouteError
from .fields import ModelParams
from .measures import EmpiricalMeasure


@dataclass(frozen=True, eq=False)
class ComplexMatrixSample:
    entries: np.ndarray
    params: ModelParams
    seed: int


def _rows(p):
    if not float(p.alpha).is_integer():
        raise UnsupportedRouteError("the matrix model needs an integral alpha; use the gas sampler instead")
    return p.N + int(p.alpha)


def sample_matrix(p, seed):
    """Draw ``X = A + G`` with ``E|G_ij|^2 = 1/N``.

    Parameters
    ----------
    p : ModelParams
        Must have integral ``alpha``; ``N`` need not be even here.
    seed : int
        Seed of the PCG64 stream.
    """
    M = _rows(p)
    N = p.N
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    scale = np.sqrt(0.5 / N)
    G = rng.normal(0.0, scale, (M, N)) + 1j * rng.normal(0.0, scale, (M, N))
    G[np.arange(N), np.arange(N)] += np.sqrt(p.a)
    return ComplexMatrixSample(G, p, int(seed))


def eigenvalues(sample):
    """Eigenvalues of ``X^* X`` in ascending order."""
    X = sample.entries
    H = X.conj().T @ X
    try:
        return np.linalg.eigvalsh(H)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(
            "Hermitian eigensolver failed", {"seed": sample.seed, "N": sample.params.N, "error": str(exc)}
        ) from exc


def spectral_measure(sample):
    """Empirical measure with mass ``1/N`` on each eigenvalue of ``X^* X``.

    Round-off negatives (PSD matrix) are clipped to 0.
    """
    ev = eigenvalues(sample)
    return EmpiricalMeasure(np.maximum(ev, 0.0), 1.0 / sample.params.N)


def _workers(n_tasks):
    cap = int(os.environ.get("VECTORGAS_THREADS", os.cpu_count() or 1))
    return max(1, min(cap, n_tasks))


def sample_seeds(seed, count):
    """Independent per-sample seeds spawned from one root seed."""
    children = np.random.SeedSequence(int(seed)).spawn(count)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def sample_spectra(p, samples, seed):
    """Eigenvalues of ``samples`` independent draws, shape ``(samples, N)``.

    Draw ``i`` uses the ``i``-th seed of :func:`sample_seeds`, so the output
    does not depend on the number of worker threads.
    """
    _rows(p)
    seeds = sample_seeds(seed, samples)

    def one(s):
        return np.maximum(eigenvalues(sample_matrix(p, s)), 0.0)

    with ThreadPoolExecutor(_workers(samples)) as pool:
        rows = list(pool.map(one, seeds))
    return np.array(rows), seeds
