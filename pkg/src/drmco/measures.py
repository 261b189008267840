"""Discrete measures, transport distances and the AR-lognormal inflow process."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSample, NonPsdCovariance
from .lp import LinearProgram, solve


@dataclass
class DiscreteMeasure:
    """Finitely supported probability measure. ``atoms`` has shape (n, dim)."""

    atoms: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms.reshape(-1, 1)
        self.atoms = atoms
        n = atoms.shape[0]
        if self.weights is None:
            self.weights = np.full(n, 1.0 / n) if n else np.zeros(0)
        else:
            self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.weights.size != n:
            raise ValueError("one weight per atom required")
        if np.any(self.weights < 0) or (n and abs(self.weights.sum() - 1.0) > 1e-12):
            raise ValueError("weights must be nonnegative and sum to one")

    @property
    def n(self):
        return self.atoms.shape[0]

    @property
    def dim(self):
        return self.atoms.shape[1]

    @classmethod
    def empirical(cls, samples):
        return cls(np.asarray(samples, dtype=float))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"xi{i}" for i in range(self.dim)] + ["weight"])
            for atom, wt in zip(self.atoms, self.weights):
                w.writerow([repr(float(v)) for v in atom] + [repr(float(wt))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        body = [r for r in rows[1:] if r]
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
        return cls(data[:, :-1], data[:, -1])


def distance(a, b, metric="L1"):
    diff = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    if metric == "L1":
        return float(diff.sum(axis=-1)) if diff.ndim == 1 else diff.sum(axis=-1)
    if metric == "Linf":
        return float(diff.max(axis=-1)) if diff.ndim == 1 else diff.max(axis=-1)
    raise ValueError(f"unknown metric {metric!r}")


def pairwise_distances(X, Y, metric="L1"):
    diff = np.abs(X[:, None, :] - Y[None, :, :])
    return diff.sum(axis=2) if metric == "L1" else diff.max(axis=2)


def wasserstein_discrete(mu: DiscreteMeasure, nu: DiscreteMeasure, metric="L1") -> float:
    """Type-1 Wasserstein distance between two discrete measures via the transport LP."""
    if mu.dim != nu.dim:
        raise ValueError("measures live in different dimensions")
    cost = pairwise_distances(mu.atoms, nu.atoms, metric)
    n, m = cost.shape
    rows = np.zeros((n + m, n * m))
    for i in range(n):
        rows[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        rows[n + j, j::m] = 1.0
    # one marginal row is implied by the others
    lp = LinearProgram(cost.ravel(), E=rows[:-1], e=np.concatenate([mu.weights, nu.weights])[:-1])
    sol = solve(lp)
    return max(float(sol.objective), 0.0)


def radius_hat(nu_hat: DiscreteMeasure, metric="L1") -> float:
    """Largest mean distance from one empirical atom to all the others."""
    if nu_hat.n <= 1:
        return 0.0
    d = pairwise_distances(nu_hat.atoms, nu_hat.atoms, metric)
    return float(np.max(d.mean(axis=1)))


def psd_factor(cov, tol=1e-10):
    """Symmetric square-root-like factor L with L L' = cov (negative eigenvalues clipped)."""
    cov = np.asarray(cov, dtype=float)
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    if vals.size and vals.min() < -tol * max(1.0, abs(vals.max())):
        raise NonPsdCovariance(f"covariance has eigenvalue {vals.min():.3g}")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


@dataclass
class ArLognormalModel:
    """Log-AR(1) process ``ln xi_t - mu_t = phi_t (ln xi_{t-1} - mu_{t-1}) + eps_t``.

    ``mu``, ``phi`` have shape (T, J); ``sigma`` has shape (T, J, J). Row t
    holds the parameters of stage t+1, so row 0 belongs to the known first
    stage and is only used as the lag of stage 2.
    """

    mu: np.ndarray
    phi: np.ndarray
    sigma: np.ndarray
    floor: float = 0.0

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        self._factors = [psd_factor(s) for s in self.sigma]

    def step(self, t, xi_prev, noise):
        """Advance from stage t-1 to t (0-based rows) given standard normal ``noise``."""
        lag = np.log(xi_prev) - self.mu[t - 1]
        log_xi = self.mu[t] + self.phi[t] * lag + self._factors[t] @ noise
        return np.maximum(np.exp(log_xi), self.floor)


def simulate_ar_lognormal(model: ArLognormalModel, t, xi_prev, rng):
    """Draw xi_t given xi_{t-1} (rows indexed from 0)."""
    xi_prev = np.asarray(xi_prev, dtype=float)
    if np.any(xi_prev <= 0):
        raise ValueError("previous inflow must be strictly positive")
    return model.step(t, xi_prev, rng.standard_normal(model.mu.shape[1]))


@dataclass
class SaaFit:
    measure: DiscreteMeasure
    log_mean: np.ndarray
    log_cov: np.ndarray
    diagonal_fallback: bool


def fit_saa(samples, n_out, rng, family="lognormal") -> SaaFit:
    """Fit a correlated lognormal to positive samples and resample ``n_out`` atoms.

    A singular log-covariance with some spread is replaced by its diagonal
    and flagged in the result.
    """
    if family.lower() != "lognormal":
        raise ValueError("only the lognormal family is supported")
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples.reshape(-1, 1)
    if samples.shape[0] < 2 or np.any(samples <= 0):
        raise DegenerateSample("need at least two strictly positive samples")
    logs = np.log(samples)
    mean = logs.mean(axis=0)
    cov = np.cov(logs, rowvar=False).reshape(samples.shape[1], samples.shape[1])
    fallback = False
    if np.any(np.diag(cov) > 0) and np.linalg.matrix_rank(cov) < cov.shape[0]:
        cov = np.diag(np.diag(cov))
        fallback = True
    factor = psd_factor(cov)
    draws = mean + rng.standard_normal((n_out, samples.shape[1])) @ factor.T
    return SaaFit(DiscreteMeasure(np.exp(draws)), mean, cov, fallback)
