"""Discretized kernel equation and certificate construction.

Two solution routes are provided.  The direct route discretizes the pair
of curves, assembles the kernel matrix, and least-squares-solves for the
certificate through a rank-revealing pseudoinverse.  The constructive
route works on a low-frequency Fourier subspace per component, replaces
the localized kernel by a convolution operator that is diagonal in that
basis, and inverts by a Neumann series; a two-scale combination with an
affine coefficient removes the kernel's constant (DC) part, with iterative
refinement of the leftover error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import (ConfigurationError, DomainError, NumericError,
                     ResolutionError)
from .geometry import TwoCurveInstance, arclength_reparameterize
from .kernel import KernelParams, SkeletonTable, skeleton, tabulate_skeleton

PI = math.pi

# kernel-matrix assembly switches to the tabulated profile beyond this depth
TABLE_DEPTH = 1000


@dataclass(frozen=True)
class DiscretizedManifold:
    """Quadrature grid on which the integral operators become matrices."""

    points: np.ndarray          # (N, dim), plus component first
    labels: np.ndarray          # (N,) +1 / -1
    t_params: np.ndarray        # source parameters of the nodes
    arclengths: np.ndarray      # per-component arc-length coordinates
    speeds: np.ndarray          # |x'(t_i)| of the source parameterization
    weights: np.ndarray         # Riemannian quadrature weights w_i
    density: np.ndarray         # rho_i, probability density w.r.t. arc length
    lengths: tuple              # (len_plus, len_minus)
    weighting: str              # 'uniform_t' | 'riemannian'
    name: str = ""

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def mu_weights(self) -> np.ndarray:
        """Probability-measure weights w_i * rho_i."""
        return self.weights * self.density

    def component_slices(self):
        mp = int(np.sum(self.labels > 0))
        return {1: slice(0, mp), -1: slice(mp, self.size)}

    def validate(self):
        total = float(np.sum(self.mu_weights))
        if abs(total - 1.0) > 1e-6:
            raise NumericError(f"measure weights sum to {total}, not 1")
        if np.max(np.abs(np.linalg.norm(self.points, axis=1) - 1.0)) > 1e-9:
            raise NumericError("grid points are not unit vectors")
        return self


def discretize(instance: TwoCurveInstance, M: int,
               weighting: str = "uniform_t") -> DiscretizedManifold:
    """Build an M-points-per-component quadrature grid.

    ``uniform_t`` reproduces the uniform-parameter scheme: nodes at
    t_i = i/M with measure weight exactly 1/(2M) per node (the uniform
    density 1/(2|x'|) folded against the speed).  ``riemannian`` places
    nodes uniformly in arc length with Riemannian weights len/M and a
    constant density 1/(2 len) per component.
    """
    if M < 16:
        raise ResolutionError(f"need at least 16 points per curve, got {M}")
    if weighting not in ("uniform_t", "riemannian"):
        raise DomainError(f"unknown weighting {weighting!r}")
    pts, labels, tpar, arcs, speeds, w, rho = [], [], [], [], [], [], []
    lengths = []
    for sigma, comp in ((1, instance.plus), (-1, instance.minus)):
        src = comp.source
        if weighting == "uniform_t":
            if src is None:
                raise DomainError("uniform_t needs the source curves")
            t = np.arange(M) / M
            v = np.linalg.norm(src(t, 1), axis=1)
            pts.append(src(t, 0))
            tpar.append(t)
            speeds.append(v)
            w.append(v / M)
            rho.append(1.0 / (2.0 * v))
            arcs.append(np.full(M, np.nan))
        else:
            if comp.samples == M:
                usc = comp
            elif src is None:
                raise DomainError("resampling to a different node count "
                                  "needs the source curves")
            else:
                usc = arclength_reparameterize(src, M, max_order=1)
            pts.append(usc.points)
            tpar.append(usc.t_params)
            if src is not None:
                speeds.append(np.linalg.norm(src(usc.t_params, 1), axis=1))
            else:
                # arc-length parameterization rescaled to [0,1) has constant
                # speed equal to the component length
                speeds.append(np.full(M, usc.length))
            w.append(np.full(M, usc.length / M))
            rho.append(np.full(M, 1.0 / (2.0 * usc.length)))
            arcs.append(usc.arclengths)
        labels.append(np.full(M, sigma, dtype=float))
        lengths.append(comp.length)
    pts = [p / np.linalg.norm(p, axis=1, keepdims=True) for p in pts]
    grid = DiscretizedManifold(
        points=np.vstack(pts), labels=np.concatenate(labels),
        t_params=np.concatenate(tpar), arclengths=np.concatenate(arcs),
        speeds=np.concatenate(speeds), weights=np.concatenate(w),
        density=np.concatenate(rho), lengths=tuple(lengths),
        weighting=weighting, name=instance.name)
    if weighting == "uniform_t":
        # fill arc lengths by integrating speed cumulatively (trapezoid on
        # the uniform-t nodes; diagnostic only)
        sl = grid.component_slices()
        arcs = grid.arclengths.copy()
        for sigma in (1, -1):
            s = sl[sigma]
            v = grid.speeds[s]
            cs = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) / M)])
            arcs[s] = cs
        object.__setattr__(grid, "arclengths", arcs)
    return grid.validate()


@dataclass(frozen=True)
class KernelMatrix:
    """Dense symmetric matrix of kernel values over the grid."""

    values: np.ndarray
    params: KernelParams
    dc: bool
    psi_pi: float

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def validate(self):
        if np.max(np.abs(self.values - self.values.T)) > 1e-9:
            raise NumericError("kernel matrix is not symmetric")
        if not self.dc:
            diag_target = self.params.width * self.params.depth / 2.0
            if np.max(np.abs(np.diag(self.values) - diag_target)) > 1e-9 * diag_target:
                raise NumericError("kernel diagonal deviates from n*L/2")
        return self


def assemble_kernel(grid: DiscretizedManifold, params: KernelParams,
                    dc: bool = False,
                    table: Optional[SkeletonTable] = None) -> KernelMatrix:
    """Kernel matrix over the grid; tabulated profile beyond depth 1000."""
    pts = grid.points
    gram = np.clip(pts @ pts.T, -1.0, 1.0)
    angles = np.arccos(gram)
    np.fill_diagonal(angles, 0.0)
    if table is None and params.depth > TABLE_DEPTH:
        table = tabulate_skeleton(params)
    if table is not None:
        if table.params != params:
            raise DomainError("table was built for different kernel params")
        flat = table(angles.ravel()).reshape(angles.shape)
        psi_pi = table.psi_pi
        vals = flat if dc else flat + psi_pi
    else:
        uniq, inv = np.unique(angles.ravel(), return_inverse=True)
        prof = skeleton(np.append(uniq, PI), params)
        psi_pi = float(prof[-1])
        vals = prof[:-1][inv].reshape(angles.shape)
        if dc:
            vals = vals - psi_pi
    vals = 0.5 * (vals + vals.T)
    return KernelMatrix(values=vals, params=params, dc=dc,
                        psi_pi=float(psi_pi)).validate()


def weighted_norm(values: np.ndarray, grid: DiscretizedManifold) -> float:
    """L2 norm under the grid's probability measure."""
    values = np.asarray(values)
    if values.shape[0] != grid.size:
        raise DomainError("length mismatch")
    return float(np.sqrt(np.sum(grid.mu_weights * np.abs(values) ** 2)))


def riemannian_norm(values: np.ndarray, grid: DiscretizedManifold) -> float:
    """L2 norm under the grid's Riemannian (density-free) measure."""
    values = np.asarray(values)
    if values.shape[0] != grid.size:
        raise DomainError("length mismatch")
    return float(np.sqrt(np.sum(grid.weights * np.abs(values) ** 2)))


@dataclass(frozen=True)
class Certificate:
    """Near-solution of the kernel equation with diagnostics."""

    values: np.ndarray
    target: np.ndarray
    residual: np.ndarray
    norm: float
    residual_norm: float
    method: str
    measure: str
    metadata: dict = field(default_factory=dict)

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def solve_certificate_pinv(K: KernelMatrix, grid: DiscretizedManifold,
                           zeta: Optional[np.ndarray] = None,
                           rank_tol: Optional[float] = None) -> Certificate:
    """Least-squares certificate through the pseudoinverse.

    Solves (K * mu_weights) g = zeta; the default target is the labels
    (the random-network mean term is dropped) and the default cutoff is
    machine epsilon times the system size.
    """
    if K.size != grid.size:
        raise DomainError("kernel and grid sizes differ")
    if zeta is None:
        zeta = grid.labels.copy()
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape[0] != grid.size:
        raise DomainError("target length mismatch")
    A = K.values * grid.mu_weights[None, :]
    scale = float(np.max(np.abs(A)))
    if scale == 0.0:
        raise NumericError("kernel matrix is identically zero")
    if rank_tol is None:
        rank_tol = np.finfo(float).eps * grid.size
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    cutoff = rank_tol * s[0]
    rank = int(np.sum(s > cutoff))
    inv = np.zeros_like(s)
    inv[:rank] = 1.0 / s[:rank]
    g = Vt.T @ (inv * (U.T @ zeta))
    residual = A @ g - zeta
    return Certificate(
        values=g, target=zeta, residual=residual,
        norm=weighted_norm(g, grid),
        residual_norm=weighted_norm(residual, grid),
        method="pinv", measure="mu",
        metadata={"rank": rank, "rank_tol": float(rank_tol),
                  "singular_max": float(s[0]),
                  "weighting": grid.weighting})


# ---------------------------------------------------------------------------
# Fourier subspace and constructive route


def scale_exponent(eps: float) -> float:
    """a_eps = (1-eps)^3 (1 - eps/12)."""
    return (1.0 - eps) ** 3 * (1.0 - eps / 12.0)


def localization_radius(eps: float, depth: int) -> float:
    """r_eps = 6 pi L^(-a/(a+1)), the invariant-operator window."""
    a = scale_exponent(eps)
    return 6.0 * PI * depth ** (-a / (a + 1.0))


def depth_floor(eps: float) -> int:
    """Smallest depth with r_eps <= pi."""
    a = scale_exponent(eps)
    return int(math.ceil(6.0 ** ((a + 1.0) / a)))


def frequency_cutoff(eps: float, depth: int, length: float) -> int:
    """Largest retained frequency: floor(sqrt(eps) len / (2 pi r_eps))."""
    return int(math.floor(math.sqrt(eps) * length
                          / (2.0 * PI * localization_radius(eps, depth))))


@dataclass(frozen=True)
class SubspaceSpec:
    """Low-frequency Fourier subspace bookkeeping at one scale."""

    eps: float
    a_eps: float
    r_eps: float            # effective (possibly clamped) radius
    r_eps_raw: float        # the formula value 6 pi L^(-a/(a+1))
    capped: bool
    freqs_plus: tuple       # frequencies on the + component (0, +-1, ...)
    freqs_minus: tuple
    K_plus: int
    K_minus: int

    @property
    def dim(self) -> int:
        return len(self.freqs_plus) + len(self.freqs_minus)


def subspace_spec(grid: DiscretizedManifold, eps: float, params: KernelParams,
                  cap_radius: bool = False) -> SubspaceSpec:
    if not (0.0 < eps < 0.75):
        raise DomainError("eps must lie in (0, 3/4)")
    a = scale_exponent(eps)
    r_raw = localization_radius(eps, params.depth)
    limit = min(PI, 0.5 * min(grid.lengths)) * (1.0 - 1e-9)
    capped = r_raw > limit
    if capped and not cap_radius:
        raise ConfigurationError(
            f"r_eps = {r_raw:.4f} exceeds {limit:.4f}; depth must be at "
            f"least {depth_floor(eps)} for r <= pi (and larger still for "
            f"r <= len/2), or pass cap_radius=True")
    r = min(r_raw, limit)
    Ks = [int(math.floor(math.sqrt(eps) * ln / (2.0 * PI * r)))
          for ln in grid.lengths]
    freqs = []
    for K in Ks:
        f = [0]
        for k in range(1, K + 1):
            f.extend([-k, k])
        freqs.append(tuple(f))
    return SubspaceSpec(eps=eps, a_eps=a, r_eps=r, r_eps_raw=r_raw,
                        capped=capped, freqs_plus=freqs[0],
                        freqs_minus=freqs[1], K_plus=Ks[0], K_minus=Ks[1])


@dataclass(frozen=True)
class FourierSubspace:
    """Sampled orthonormal basis of the low-frequency subspace."""

    spec: SubspaceSpec
    basis: np.ndarray       # (N, dim) complex, weighted-orthonormal columns
    grid: DiscretizedManifold = field(repr=False, default=None)

    def project_coeffs(self, values: np.ndarray) -> np.ndarray:
        """Coefficients of the weighted-orthogonal projection onto the span."""
        return self.basis.conj().T @ (self.grid.weights * values)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return self.basis @ coeffs

    def project(self, values: np.ndarray) -> np.ndarray:
        return self.synthesize(self.project_coeffs(values))

    def gram(self) -> np.ndarray:
        return self.basis.conj().T @ (self.grid.weights[:, None] * self.basis)


def fourier_subspace(grid: DiscretizedManifold, eps: float,
                     params: KernelParams,
                     cap_radius: bool = False) -> FourierSubspace:
    """Per-component complex exponentials, Gram-orthonormalized.

    Basis functions live on one component and vanish on the other; the
    discrete weighted Gram matrix is forced to the identity by a symmetric
    orthonormalization so the projector is exactly orthogonal even when
    sampling breaks exact orthogonality.
    """
    spec = subspace_spec(grid, eps, params, cap_radius=cap_radius)
    if np.any(np.isnan(grid.arclengths)):
        raise DomainError("grid lacks arc-length coordinates; use a "
                          "riemannian grid for the constructive route")
    sl = grid.component_slices()
    cols = []
    for sigma, freqs, length in ((1, spec.freqs_plus, grid.lengths[0]),
                                 (-1, spec.freqs_minus, grid.lengths[1])):
        s = grid.arclengths[sl[sigma]]
        for k in freqs:
            col = np.zeros(grid.size, dtype=complex)
            col[sl[sigma]] = np.exp(2j * PI * k * s / length) / math.sqrt(length)
            cols.append(col)
    B = np.column_stack(cols)
    gram = B.conj().T @ (grid.weights[:, None] * B)
    evals, evecs = np.linalg.eigh(gram)
    if np.min(evals) < 1e-10:
        raise NumericError("Fourier samples are numerically dependent; "
                           "increase the grid resolution")
    B = B @ (evecs * (evals ** -0.5)) @ evecs.conj().T
    sub = FourierSubspace(spec=spec, basis=B, grid=grid)
    resid = np.max(np.abs(sub.gram() - np.eye(B.shape[1])))
    if resid > 1e-8:
        raise NumericError(f"weighted Gram deviates from identity by {resid:.2e}")
    return sub


def invariant_operator_eigs(eps: float, params: KernelParams,
                            length: float,
                            table: Optional[SkeletonTable] = None,
                            cap_radius: bool = False,
                            freqs: Optional[Sequence[int]] = None) -> np.ndarray:
    """Eigenvalues of the localized convolution operator on one component.

    The operator convolves against psi° restricted to a window of radius
    r_eps, so the Fourier mode of frequency k has eigenvalue
    int_{-r}^{r} psi°(|s|) cos(2 pi k s / length) ds, computed by adaptive
    quadrature to absolute tolerance 1e-9 * n * log L.
    """
    r_raw = localization_radius(eps, params.depth)
    limit = min(PI, 0.5 * length) * (1.0 - 1e-9)
    if r_raw > limit and not cap_radius:
        raise ConfigurationError(
            f"r_eps = {r_raw:.4f} exceeds min(pi, len/2) = {limit:.4f}")
    r = min(r_raw, limit)
    if table is None:
        if params.depth > TABLE_DEPTH:
            prof = tabulate_skeleton(params)
        else:
            psi_pi = skeleton(PI, params)
            prof = lambda s: skeleton(s, params) - psi_pi
    else:
        prof = table
    if freqs is None:
        K = int(math.floor(math.sqrt(eps) * length / (2.0 * PI * r)))
        freqs = range(0, K + 1)
    tol = 1e-9 * params.width * math.log(params.depth)
    # split points at the profile's decay scale so quad sees the peak
    pieces = [3.0 * PI * (2.0 ** j) / params.depth for j in range(0, 40)]
    pts = sorted(p for p in pieces if 0.0 < p < r)
    out = []
    for k in freqs:
        def f(s, k=k):
            return prof(s) * math.cos(2.0 * PI * k * s / length)

        val, err = quad(f, 0.0, r, points=pts or None, limit=200,
                        epsabs=0.25 * tol, epsrel=1e-12)
        if err > tol:
            raise NumericError(f"eigenvalue quadrature did not converge "
                               f"(k={k}, err={err:.2e})")
        out.append(2.0 * val)
    return np.asarray(out)


def corrected_kernel_dc(grid: DiscretizedManifold, params: KernelParams,
                        table: Optional[SkeletonTable] = None) -> KernelMatrix:
    """DC-subtracted kernel matrix with product-integration diagonal.

    The profile psi° is peaked at width ~3 pi/L, far below any practical
    node spacing at large depth, so the naive Nystrom diagonal w*psi°(0)
    can exceed the true cell integral by orders of magnitude and wrecks
    the discrete operator.  Each diagonal entry is replaced by the exact
    cell average (1/h) int_{-h/2}^{h/2} psi°(|u|) du of its quadrature
    cell, which restores the operator's action on smooth functions.
    """
    if params.depth > TABLE_DEPTH and table is None:
        table = tabulate_skeleton(params)
    K = assemble_kernel(grid, params, dc=True, table=table)
    if table is not None:
        prof = table
    else:
        psi_pi = K.psi_pi
        prof = lambda s: skeleton(s, params) - psi_pi
    vals = K.values.copy()
    pieces = [3.0 * PI * (2.0 ** j) / params.depth for j in range(0, 40)]
    cache = {}
    for i in range(grid.size):
        hw = 0.5 * grid.weights[i]
        key = round(hw, 15)
        if key not in cache:
            pts = [p for p in pieces if 0.0 < p < hw]
            val, _ = quad(prof, 0.0, hw, points=pts or None, limit=200,
                          epsabs=1e-12 * max(1.0, params.width * params.depth),
                          epsrel=1e-10)
            cache[key] = val / hw
        vals[i, i] = cache[key]
    return KernelMatrix(values=vals, params=params, dc=True, psi_pi=K.psi_pi)


def _subspace_operator(sub: FourierSubspace, op_matrix: np.ndarray) -> np.ndarray:
    """Matrix of a kernel operator restricted to the subspace basis.

    `op_matrix` acts on value vectors as v -> op_matrix @ (w * v) with w
    the Riemannian weights.
    """
    grid = sub.grid
    applied = op_matrix @ (grid.weights[:, None] * sub.basis)
    return sub.basis.conj().T @ (grid.weights[:, None] * applied)


def _diag_eigs_for_spec(spec: SubspaceSpec, params, grid, table,
                        cap_radius) -> np.ndarray:
    eigs = []
    for freqs, length in ((spec.freqs_plus, grid.lengths[0]),
                          (spec.freqs_minus, grid.lengths[1])):
        ks = sorted(set(abs(k) for k in freqs))
        vals = invariant_operator_eigs(spec.eps, params, length, table=table,
                                       cap_radius=cap_radius, freqs=ks)
        lookup = dict(zip(ks, vals))
        eigs.extend(lookup[abs(k)] for k in freqs)
    return np.asarray(eigs)


def neumann_certificate(grid: DiscretizedManifold, zeta: np.ndarray,
                        eps: float, params: KernelParams,
                        max_terms: int = 512, tol: float = 1e-10,
                        table: Optional[SkeletonTable] = None,
                        kernel_dc: Optional[KernelMatrix] = None,
                        cap_radius: bool = False) -> Certificate:
    """Certificate on the low-frequency subspace by Neumann series.

    Solves P_S Theta°[g] = zeta for zeta in the subspace S, expanding the
    inverse around the diagonal convolution operator.  If the contraction
    estimate (the spectral norm of the preconditioned residual operator on
    S) reaches 1 the result carries a divergence diagnostic instead of a
    solution.
    """
    zeta = np.asarray(zeta, dtype=complex)
    if zeta.shape[0] != grid.size:
        raise DomainError("target length mismatch")
    sub = fourier_subspace(grid, eps, params, cap_radius=cap_radius)
    if params.depth > TABLE_DEPTH and table is None:
        table = tabulate_skeleton(params)
    if kernel_dc is None:
        kernel_dc = corrected_kernel_dc(grid, params, table=table)
    zeta_c = sub.project_coeffs(zeta)
    in_span = sub.synthesize(zeta_c)
    defect = riemannian_norm(zeta - in_span, grid)
    scale = max(riemannian_norm(zeta, grid), 1e-300)
    if defect > 1e-8 * scale:
        raise DomainError(f"target is not in the subspace span "
                          f"(defect {defect:.2e} relative {defect / scale:.2e})")
    T_S = _subspace_operator(sub, kernel_dc.values)
    m_eigs = _diag_eigs_for_spec(sub.spec, params, grid, table, cap_radius)
    if np.min(m_eigs) <= 0:
        raise NumericError("invariant operator is not positive on the subspace")
    R = (T_S - np.diag(m_eigs)) / m_eigs[:, None]
    contraction = float(np.linalg.norm(R, 2))
    meta = {"contraction": contraction, "eps": eps,
            "subspace_dim": sub.spec.dim, "r_eps": sub.spec.r_eps,
            "capped": sub.spec.capped, "m_eigs": m_eigs,
            "weighting": grid.weighting}
    if contraction >= 1.0:
        return Certificate(values=np.zeros(grid.size), target=np.asarray(zeta),
                           residual=np.asarray(zeta), norm=0.0,
                           residual_norm=riemannian_norm(zeta, grid),
                           method="neumann", measure="riemannian",
                           metadata={**meta, "diverged": True, "terms": 0})
    c0 = zeta_c / m_eigs
    acc = c0.copy()
    term = c0
    zeta_norm = riemannian_norm(zeta, grid)
    terms = 1
    for _ in range(max_terms - 1):
        term = -(R @ term)
        if np.linalg.norm(term) <= tol * max(zeta_norm, 1e-300):
            break
        acc += term
        terms += 1
    g = sub.synthesize(acc)
    resid_c = T_S @ acc - zeta_c
    residual = sub.synthesize(resid_c)
    return Certificate(values=g, target=np.asarray(zeta), residual=residual,
                       norm=riemannian_norm(g, grid),
                       residual_norm=float(np.linalg.norm(resid_c)),
                       method="neumann", measure="riemannian",
                       metadata={**meta, "diverged": False, "terms": terms,
                                 "coeffs": acc, "tol": tol})


def dc_density_certificate(grid: DiscretizedManifold, zeta: np.ndarray,
                           params: KernelParams,
                           eps0: float = 1.0 / 20.0,
                           eps1: float = 51.0 / 100.0,
                           refine_steps: int = 3,
                           table: Optional[SkeletonTable] = None,
                           kernel_dc: Optional[KernelMatrix] = None,
                           tol: float = 1e-10) -> Certificate:
    """Certificate for the full kernel with density, by two-scale combination.

    Each round solves the DC-subtracted problem at scale eps0 for the
    current target and at scale eps1 for the constant function, combines
    them with the affine coefficient that cancels the DC term, and feeds
    the projected residual back as the next target.  Rounds that fail to
    decrease the residual stop the iteration and the best iterate is kept.
    """
    zeta = np.asarray(zeta, dtype=complex)
    if params.depth > TABLE_DEPTH and table is None:
        table = tabulate_skeleton(params)
    if kernel_dc is None:
        kernel_dc = corrected_kernel_dc(grid, params, table=table)
    psi_pi = kernel_dc.psi_pi
    w = grid.weights

    sub0 = fourier_subspace(grid, eps0, params)

    def theta_full(v):
        return kernel_dc.values @ (w * v) + psi_pi * np.sum(w * v)

    ones = np.ones(grid.size, dtype=complex)
    g1_cert = neumann_certificate(grid, ones, eps1, params, table=table,
                                  kernel_dc=kernel_dc, tol=tol,
                                  cap_radius=True)
    if g1_cert.metadata.get("diverged"):
        return g1_cert
    g1 = g1_cert.values
    one_g1 = np.sum(w * g1)
    if one_g1.real <= 0:
        raise NumericError("constant-target certificate has nonpositive mean")

    h_total = np.zeros(grid.size, dtype=complex)
    target = zeta.copy()
    best = None
    rounds = []
    for i in range(refine_steps + 1):
        g_cert = neumann_certificate(grid, target, eps0, params, table=table,
                                     kernel_dc=kernel_dc, tol=tol)
        if g_cert.metadata.get("diverged"):
            if best is None:
                return g_cert
            break
        g = g_cert.values
        alpha = -psi_pi * np.sum(w * g) / (psi_pi * one_g1 + 1.0)
        h_i = g + alpha * g1
        cand = h_total + h_i
        resid = theta_full(cand) - zeta
        resid_norm = riemannian_norm(resid, grid)
        rounds.append({"round": i, "alpha": complex(alpha),
                       "residual_norm": resid_norm})
        if best is not None and resid_norm >= best[1]:
            break
        h_total = cand
        best = (h_total.copy(), resid_norm)
        target = -sub0.project(theta_full(h_total) - zeta)
    h, resid_norm = best
    h_real = h.real
    residual = theta_full(h_real) - zeta.real
    g_mu = h_real / grid.density
    return Certificate(
        values=g_mu, target=np.asarray(zeta.real),
        residual=np.asarray(residual.real),
        norm=weighted_norm(g_mu, grid),
        residual_norm=weighted_norm(residual.real, grid),
        method="dc_density", measure="mu",
        metadata={"eps0": eps0, "eps1": eps1, "rounds": rounds,
                  "alpha_mean": complex(np.mean([r["alpha"] for r in rounds])),
                  "one_g1": complex(one_g1), "psi_pi": psi_pi,
                  "riemannian_residual_norm": riemannian_norm(residual.real, grid),
                  "weighting": grid.weighting})
