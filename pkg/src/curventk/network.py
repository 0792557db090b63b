"""Finite-width random ReLU networks and their empirical tangent kernel.

Networks are Gaussian-initialized (hidden variance 2/n, scalar output row
variance 1) from a single seed that expands deterministically into
per-layer generators, so weights can be regenerated on demand instead of
held in memory.  The empirical kernel is the parameter-gradient inner
product, assembled layer by layer from forward features and backward
features built with the active-coordinate projections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class NetworkParams:
    """Architecture plus the seed that determines every weight."""

    width: int
    depth: int
    input_dim: int
    seed: int = 0
    _seeds: tuple = field(repr=False, default=None)

    def __post_init__(self):
        if self.width < 1 or self.depth < 1 or self.input_dim < 1:
            raise DomainError("width, depth and input_dim must be positive")
        ss = np.random.SeedSequence(self.seed)
        object.__setattr__(self, "_seeds", tuple(ss.spawn(self.depth + 1)))

    def weight(self, layer: int) -> np.ndarray:
        """W^layer, regenerated deterministically; layer in 1..depth+1."""
        if not (1 <= layer <= self.depth + 1):
            raise DomainError(f"layer must lie in [1, {self.depth + 1}]")
        rng = np.random.default_rng(self._seeds[layer - 1])
        n, L, D = self.width, self.depth, self.input_dim
        if layer == L + 1:
            return rng.standard_normal((1, n))
        cols = D if layer == 1 else n
        return rng.standard_normal((n, cols)) * math.sqrt(2.0 / n)


def _forward_pass(net: NetworkParams, X: np.ndarray, keep_signs: bool):
    """Activations per layer for a batch; optionally the sign patterns."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != net.input_dim:
        raise DomainError(f"inputs must have dimension {net.input_dim}")
    acts = [X]
    signs = []
    a = X
    for layer in range(1, net.depth + 1):
        z = a @ net.weight(layer).T
        mask = z > 0.0
        a = np.where(mask, z, 0.0)
        acts.append(a)
        if keep_signs:
            signs.append(mask)
    out = (a @ net.weight(net.depth + 1).T)[:, 0]
    return acts, signs, out


def forward(net: NetworkParams, x) -> float:
    """Network output on one unit input."""
    x = np.asarray(x, dtype=float)
    if abs(np.linalg.norm(x) - 1.0) > 1e-6:
        raise DomainError("input must be a unit vector")
    _, _, out = _forward_pass(net, x[None, :], keep_signs=False)
    return float(out[0])


def forward_batch(net: NetworkParams, X: np.ndarray) -> np.ndarray:
    _, _, out = _forward_pass(net, X, keep_signs=False)
    return out


def empirical_ntk_gram(net: NetworkParams, X: np.ndarray) -> np.ndarray:
    """Gram matrix of parameter-gradient inner products over a batch.

    Gradients factor per layer into backward and forward features, so the
    kernel is the sum over layers of the elementwise product of their
    Gram matrices, plus the output-layer term.
    """
    acts, signs, _ = _forward_pass(net, X, keep_signs=True)
    L = net.depth
    w_out = net.weight(L + 1)[0]
    gram = acts[L] @ acts[L].T  # output-layer gradient term
    B = signs[L - 1] * w_out[None, :]
    gram += (B @ B.T) * (acts[L - 1] @ acts[L - 1].T)
    for layer in range(L - 1, 0, -1):
        B = signs[layer - 1] * (B @ net.weight(layer + 1))
        gram += (B @ B.T) * (acts[layer - 1] @ acts[layer - 1].T)
    return gram


def empirical_ntk(net: NetworkParams, x, xp) -> float:
    """Kernel value for one pair of unit inputs."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    gram = empirical_ntk_gram(net, np.vstack([x, xp]))
    return float(gram[0, 1])


def parameter_gradient_flat(net: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Flattened formal gradient, for small finite-difference cross-checks."""
    acts, signs, _ = _forward_pass(net, x[None, :], keep_signs=True)
    L = net.depth
    pieces = []
    b = (signs[L - 1][0] * net.weight(L + 1)[0]).astype(float)
    backs = {L: b}
    for layer in range(L - 1, 0, -1):
        b = signs[layer - 1][0] * (backs[layer + 1] @ net.weight(layer + 1))
        backs[layer] = b
    for layer in range(1, L + 1):
        grad = np.outer(backs[layer], acts[layer - 1][0])
        pieces.append(grad.ravel())
    pieces.append(acts[L][0])  # output layer
    return np.concatenate(pieces)


@dataclass(frozen=True)
class SampledInitialError:
    """Network error on a grid plus its piecewise-constant approximation."""

    zeta0: np.ndarray
    piecewise: np.ndarray
    sup_diff: float
    mean_output: float


def sampled_zeta0(net: NetworkParams, grid) -> SampledInitialError:
    """zeta0 = f - labels on the grid, and its mean-shifted flat version.

    The flat version replaces the network output by its grid average, so
    the difference to -labels is constant.
    """
    f = forward_batch(net, grid.points)
    zeta0 = f - grid.labels
    mean = float(np.sum(grid.mu_weights * f))
    piecewise = -grid.labels + mean
    return SampledInitialError(zeta0=zeta0, piecewise=piecewise,
                               sup_diff=float(np.max(np.abs(zeta0 - piecewise))),
                               mean_output=mean)
