"""scikit-learn style wrappers.

The computations here are not learned from data, so ``fit`` ignores ``X``
and computes the object determined by the hyper-parameters; the wrappers
exist for ``get_params``/``set_params``, cloning and the fitted-attribute
conventions.
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_scalar

from .coulomb_gas import default_init, run_chains, split_rhat
from .equilibrium import build_problem, solve
from .fields import ModelParams
from .matrix_model import sample_spectra
from .measures import EmpiricalMeasure, stereo_inverse, stereo_map


class EquilibriumMeasure(BaseEstimator):
    """Minimizer of the discretized rate functional.

    Parameters
    ----------
    a : float, default=1.0
    n_mu, n_nu : int, default=400
    tol : float, default=1e-9
    max_iter : int, default=50000
    start : {"uniform", "edge", "random"}, default="uniform"

    Attributes
    ----------
    mu_star_, nu_star_ : GridMeasure
    objective_ : float
    el_residuals_ : tuple of float
    solution_ : EquilibriumSolution
    """

    def __init__(self, a=1.0, n_mu=400, n_nu=400, tol=1e-9, max_iter=50_000, start="uniform"):
        self.a = a
        self.n_mu = n_mu
        self.n_nu = n_nu
        self.tol = tol
        self.max_iter = max_iter
        self.start = start

    def fit(self, X=None, y=None):
        check_scalar(self.a, "a", numbers.Real, min_val=0.0, include_boundaries="neither")
        check_scalar(self.n_mu, "n_mu", numbers.Integral, min_val=2)
        check_scalar(self.n_nu, "n_nu", numbers.Integral, min_val=2)
        check_scalar(self.tol, "tol", numbers.Real, min_val=0.0, include_boundaries="neither")
        check_scalar(self.max_iter, "max_iter", numbers.Integral, min_val=1)
        sol = solve(build_problem(self.a, self.n_mu, self.n_nu), tol=self.tol, max_iter=self.max_iter, start=self.start)
        self.solution_ = sol
        self.mu_star_ = sol.mu_star
        self.nu_star_ = sol.nu_star
        self.objective_ = sol.objective
        self.el_residuals_ = (sol.el_mu_residual, sol.el_nu_residual)
        self.n_iter_ = sol.iterations
        return self

    def score_samples(self, X):
        """Log density of ``mu_star_`` at the points ``X`` (``-inf`` outside its cells)."""
        check_is_fitted(self, "mu_star_")
        x = check_array(X, ensure_2d=False).ravel()
        mu = self.mu_star_
        idx = np.searchsorted(mu.edges, x, side="right") - 1
        inside = (idx >= 0) & (idx < len(mu))
        dens = np.zeros_like(x)
        dens[inside] = mu.weights[idx[inside]] / mu.widths[idx[inside]]
        with np.errstate(divide="ignore"):
            return np.log(dens)


class WishartSpectrum(BaseEstimator):
    """Eigenvalues of independent non-centered Wishart samples.

    Attributes
    ----------
    eigenvalues_ : ndarray of shape (samples, n)
    spectral_measure_ : EmpiricalMeasure
        Average of the per-sample spectral measures.
    mean_trace_ : float
        Mean of ``(1/N) Tr X^* X`` over samples.
    """

    def __init__(self, a=1.0, alpha=0, n=100, samples=20, seed=0):
        self.a = a
        self.alpha = alpha
        self.n = n
        self.samples = samples
        self.seed = seed

    def fit(self, X=None, y=None):
        check_scalar(self.samples, "samples", numbers.Integral, min_val=1)
        ev, seeds = sample_spectra(ModelParams(self.a, self.alpha, self.n), self.samples, self.seed)
        self.eigenvalues_ = ev
        self.sample_seeds_ = seeds
        self.spectral_measure_ = EmpiricalMeasure(ev.ravel(), 1.0 / ev.size)
        self.mean_trace_ = float(ev.sum(axis=1).mean() / self.n)
        return self


class CoulombGasSampler(BaseEstimator):
    """Multi-chain sampler of the two-type gas.

    Attributes
    ----------
    chains_ : list of ChainResult
    x_samples_ : ndarray of shape (chains, draws, n)
    rhat_ : float
        Split-R-hat of the mean x-position (nan for a single chain).
    """

    def __init__(self, a=1.0, alpha=0.0, n=2, steps=10_000, burnin=1_000, thin=1, chains=2, seed=0,
                 lattice_size=None):
        self.a = a
        self.alpha = alpha
        self.n = n
        self.steps = steps
        self.burnin = burnin
        self.thin = thin
        self.chains = chains
        self.seed = seed
        self.lattice_size = lattice_size

    def fit(self, X=None, y=None):
        check_scalar(self.chains, "chains", numbers.Integral, min_val=1)
        p = ModelParams(self.a, self.alpha, self.n).require_even()
        init = default_init(p, self.lattice_size)
        self.chains_ = run_chains(init, self.chains, self.steps, self.burnin, self.seed, self.thin)
        self.x_samples_ = np.stack([c.x for c in self.chains_])
        means = self.x_samples_.mean(axis=2)
        self.rhat_ = split_rhat(means) if self.chains > 1 and means.shape[1] >= 4 else float("nan")
        return self


class StereographicProjection(TransformerMixin, BaseEstimator):
    """Map real points onto the circle of diameter 1 centred at (0, 1/2)."""

    def fit(self, X=None, y=None):
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        x = check_array(X, ensure_2d=False).ravel()
        return stereo_map(x)

    def inverse_transform(self, Z):
        z = check_array(Z)
        return stereo_inverse(z)
