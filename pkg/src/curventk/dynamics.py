"""Kernel-regime gradient-descent error evolution on the discrete grid.

The nominal error recursion zeta_{k+1} = (Id - tau * T)[zeta_k] runs
against the measure-weighted kernel operator T = K diag(mu_weights).
Powers are taken either through the symmetric eigendecomposition of
D^{1/2} K D^{1/2} (exact for any iteration count) or by explicit
iteration; the two agree to rounding for moderate k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from mpmath import mp, mpf

from .errors import ConfigurationError, DomainError
from .solver import DiscretizedManifold, KernelMatrix


@dataclass(frozen=True)
class DynamicsConfig:
    """Step size, iteration budget, and initial error for the recursion."""

    step_size: float
    iterations: int
    zeta0: np.ndarray
    monotone: bool = False
    use_eig: bool = True

    def __post_init__(self):
        if self.step_size < 0:
            raise DomainError("step size must be nonnegative")
        if self.iterations < 0:
            raise DomainError("iteration count must be nonnegative")


@dataclass(frozen=True)
class EvolveResult:
    """Weighted error norms per iteration plus the error trajectory."""

    norms: np.ndarray           # (k+1,)
    trajectory: np.ndarray      # (k+1, N)
    eigenvalues: Optional[np.ndarray]
    lambda_max: float
    method: str


def weighted_operator_eigs(K: KernelMatrix, grid: DiscretizedManifold):
    """Spectrum of K diag(w) via the similar symmetric D^1/2 K D^1/2."""
    d = np.sqrt(grid.mu_weights)
    S = d[:, None] * K.values * d[None, :]
    evals, evecs = np.linalg.eigh(S)
    return evals, evecs, d


def nominal_evolve(grid: DiscretizedManifold, K: KernelMatrix,
                   zeta0: np.ndarray, tau: float, iterations: int,
                   monotone: bool = False, use_eig: bool = True) -> EvolveResult:
    """Run the error recursion for the given number of iterations.

    With ``monotone`` the step size must satisfy tau < 1/lambda_max of the
    weighted operator, which guarantees a nonincreasing weighted norm.
    """
    zeta0 = np.asarray(zeta0, dtype=float)
    if zeta0.shape[0] != grid.size or K.size != grid.size:
        raise DomainError("dimension mismatch")
    cfg = DynamicsConfig(step_size=tau, iterations=iterations, zeta0=zeta0,
                         monotone=monotone, use_eig=use_eig)
    evals, evecs, d = weighted_operator_eigs(K, grid)
    lam_max = float(evals[-1])
    if monotone and tau * lam_max >= 1.0:
        raise ConfigurationError(
            f"monotone mode needs tau < 1/lambda_max = {1.0 / lam_max:.3e}")
    k = iterations
    if use_eig:
        coeffs = evecs.T @ (d * zeta0)
        factors = 1.0 - tau * evals
        steps = np.arange(k + 1)
        # (k+1, N) table of factor powers; moderate sizes only
        powers = factors[None, :] ** steps[:, None]
        traj = (powers * coeffs[None, :]) @ evecs.T / d[None, :]
        method = "eig"
    else:
        traj = np.empty((k + 1, grid.size))
        traj[0] = zeta0
        z = zeta0.copy()
        for i in range(1, k + 1):
            z = z - tau * (K.values @ (grid.mu_weights * z))
            traj[i] = z
        method = "explicit"
    norms = np.sqrt(np.sum(grid.mu_weights[None, :] * traj**2, axis=1))
    return EvolveResult(norms=norms, trajectory=traj,
                        eigenvalues=evals, lambda_max=lam_max, method=method)


def separation_check(f_values: np.ndarray, labels: np.ndarray):
    """Whether sign(f) matches the labels everywhere, and the margin."""
    f_values = np.asarray(f_values, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if f_values.shape != labels.shape:
        raise DomainError("length mismatch")
    margin = float(np.min(labels * f_values))
    return margin > 0.0, margin


def iteration_schedule(depth: float, width: float, tau: float) -> int:
    """Iteration index floor(L^(39/44) / (n tau)).

    Evaluated in 50-digit arithmetic so that exact powers (e.g. L = 2^44)
    floor correctly; float64 pow can land one ulp below an integer.
    """
    if depth <= 0 or width <= 0 or tau <= 0:
        raise DomainError("all arguments must be positive")
    with mp.workdps(50):
        val = mpf(depth) ** (mpf(39) / 44) / (mpf(width) * mpf(tau))
        return int(mp.floor(val))
