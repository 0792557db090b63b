"""Pairs of smooth closed curves on spheres and their difficulty measures.

Curves are represented by periodic parameterizations on [0, 1) with
analytic derivatives up to order five (built-ins) or spectral derivatives
of periodic samples (imported curves).  Everything downstream works on
unit-speed resamplings: curvature and derivative bounds, intrinsic versus
extrinsic distances, the scale-eps injectivity radius, and the covering
count of the winding set (how often the geometry loops back on itself).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import (ConstructionError, DegenerateCurveError, DomainError,
                     NumericError, ResolutionError)

TWO_PI = 2.0 * math.pi

_BINOM = [[math.comb(k, j) for j in range(k + 1)] for k in range(7)]


class ParametricCurve:
    """Closed curve t in [0,1) -> R^dim with derivatives up to max_order.

    `stack` maps (t_array, order) to an (len(t), dim) array of the order-th
    derivative with respect to t.  Curves are always 1-periodic.
    """

    def __init__(self, stack: Callable[[np.ndarray, int], np.ndarray],
                 dim: int, max_order: int = 5):
        self.stack = stack
        self.dim = dim
        self.max_order = max_order

    def __call__(self, t, order: int = 0) -> np.ndarray:
        if order > self.max_order:
            raise DomainError(f"derivative order {order} exceeds available "
                              f"order {self.max_order}")
        t = np.atleast_1d(np.asarray(t, dtype=float)) % 1.0
        return self.stack(t, order)

    from_samples = None  # bound below, after curve_from_samples is defined


def _trig_curve_stack(coef: np.ndarray, n: int):
    """Evaluation closure for a real trig interpolant given rfft(P)/n."""
    k = np.arange(coef.shape[0])

    def stack(t, order):
        c = coef * (2j * math.pi * k[:, None]) ** order
        phase = np.exp(2j * math.pi * np.outer(t, k))
        out = 2.0 * (phase @ c).real
        out -= (phase[:, :1] @ c[:1]).real  # k = 0 counted once
        if n % 2 == 0:
            out -= (phase[:, -1:] @ c[-1:]).real  # Nyquist counted once
        return out

    return stack


def curve_from_samples(points: np.ndarray, max_order: int = 5) -> ParametricCurve:
    """Trigonometric interpolant of equispaced periodic samples."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] < 8:
        raise DomainError("need at least 8 periodic samples")
    n, dim = points.shape
    coef = np.fft.rfft(points, axis=0) / n
    return ParametricCurve(_trig_curve_stack(coef, n), dim, max_order)


ParametricCurve.from_samples = staticmethod(curve_from_samples)


def sphere_lift(p) -> np.ndarray:
    """Lift a point of the open unit ball in R^3 to S^3."""
    p = np.asarray(p, dtype=float)
    sq = float(np.dot(p, p))
    if sq >= 1.0:
        raise DomainError("point must lie strictly inside the unit ball")
    return np.append(p, math.sqrt(1.0 - sq))


def lift_curve(curve: ParametricCurve) -> ParametricCurve:
    """Lift a ball curve to the sphere one dimension up, with derivatives.

    The last coordinate w = sqrt(1 - |p|^2) gets its derivatives from the
    recursion 2 w w^{(k)} = -q^{(k)} - sum_{0<j<k} C(k,j) w^{(j)} w^{(k-j)}
    with q = |p|^2.
    """

    def stack(t, order):
        ps = [curve(t, m) for m in range(order + 1)]
        qs = []
        for m in range(order + 1):
            q = np.zeros(len(t))
            for j in range(m + 1):
                q += _BINOM[m][j] * np.sum(ps[j] * ps[m - j], axis=1)
            qs.append(q)
        if np.any(qs[0] >= 1.0):
            raise DomainError("curve leaves the open unit ball; cannot lift")
        ws = [np.sqrt(1.0 - qs[0])]
        for m in range(1, order + 1):
            acc = -qs[m].copy()
            for j in range(1, m):
                acc -= _BINOM[m][j] * ws[j] * ws[m - j]
            ws.append(acc / (2.0 * ws[0]))
        return np.concatenate([ps[order], ws[order][:, None]], axis=1)

    return ParametricCurve(stack, curve.dim + 1, curve.max_order)


def scale_curve(curve: ParametricCurve, factor: float) -> ParametricCurve:
    def stack(t, order):
        return factor * curve(t, order)

    return ParametricCurve(stack, curve.dim, curve.max_order)


@dataclass(frozen=True)
class UnitSpeedCurve:
    """A closed curve resampled uniformly in arc length."""

    length: float
    points: np.ndarray            # (M, dim)
    derivs: dict                  # order -> (M, dim), orders 1..5
    arclengths: np.ndarray        # s_i = i * length / M
    t_params: np.ndarray          # source parameters of the samples
    source: ParametricCurve = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def samples(self) -> int:
        return self.points.shape[0]

    def validate(self):
        hint = ("; for sampled curves this usually means the samples are "
                "not smooth enough for spectral differentiation (five "
                "continuous derivatives are assumed)")
        x = self.points
        d1 = self.derivs[1]
        if np.max(np.abs(np.linalg.norm(x, axis=1) - 1.0)) > 1e-9:
            raise NumericError("samples are not on the unit sphere" + hint)
        if np.max(np.abs(np.linalg.norm(d1, axis=1) - 1.0)) > 1e-6:
            raise NumericError("resampling is not unit speed" + hint)
        if np.max(np.abs(np.sum(x * d1, axis=1))) > 1e-6:
            raise NumericError("<x, x'> does not vanish" + hint)
        if 2 in self.derivs:
            d2 = self.derivs[2]
            if np.max(np.abs(np.sum(x * d2, axis=1) + 1.0)) > 1e-5:
                raise NumericError("<x, x''> + 1 does not vanish" + hint)
        return self


class _SpeedIntegral:
    """Spectrally accurate cumulative arc length of a periodic curve.

    Coefficients of the periodic speed below 1e-15 relative are dropped;
    smooth speeds keep only a handful of harmonics, so pointwise integral
    evaluations stay cheap.
    """

    def __init__(self, curve: ParametricCurve, n: int):
        t = np.arange(n) / n
        d1 = curve(t, 1)
        speed = np.linalg.norm(d1, axis=1)
        if np.min(speed) < 1e-10:
            raise DegenerateCurveError("curve speed vanishes (min |x'| < 1e-10)")
        self.n = n
        coef = np.fft.rfft(speed) / n
        mags = np.abs(coef)
        keep = np.flatnonzero(mags > 1e-15 * max(mags[0], 1e-300))
        cutoff = int(keep[-1]) + 1 if len(keep) else 1
        self.nyquist_kept = (n % 2 == 0) and cutoff == len(coef)
        self.coef = coef[:max(cutoff, 2)]
        self.length = float(coef[0].real)
        self.curve = curve

    def __call__(self, t):
        """Integral of the trig interpolant of the speed from 0 to t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = np.arange(1, self.coef.shape[0])
        phase = np.exp(2j * math.pi * np.outer(t, k))
        weights = self.coef[1:] / (2j * math.pi * k)
        if self.nyquist_kept:
            weights = weights.copy()
            weights[-1] *= 0.5
        out = self.length * t + 2.0 * np.sum(((phase - 1.0) * weights).real, axis=1)
        return out

    def dense_cumulative(self, m: int):
        """(t_j, S(t_j)) on a uniform grid of m points via one FFT."""
        t = np.arange(m + 1) / m
        full = np.zeros(m // 2 + 1, dtype=complex)
        k = np.arange(1, self.coef.shape[0])
        weights = self.coef[1:] / (2j * math.pi * k)
        if self.nyquist_kept:
            weights = weights.copy()
            weights[-1] *= 0.5
        full[1:len(weights) + 1] = weights
        osc = np.fft.irfft(full, m) * m
        vals = self.length * t - 2.0 * np.sum(weights.real)
        vals[:-1] += osc
        vals[-1] += osc[0]
        return t, vals

    def speed(self, t):
        return np.linalg.norm(self.curve(t, 1), axis=1)


def _invert_arclength(integral: _SpeedIntegral, targets: np.ndarray) -> np.ndarray:
    """Solve S(t) = s for each target by Newton with bisection fallback."""
    n_dense = 4 * max(len(targets), 1024)
    t_dense, s_dense = integral.dense_cumulative(n_dense)
    t = np.interp(targets, s_dense, t_dense)
    for _ in range(60):
        resid = integral(t) - targets
        step = resid / np.maximum(integral.speed(t % 1.0), 1e-12)
        t = t - step
        if np.max(np.abs(resid)) < 1e-13 * max(integral.length, 1.0):
            break
    resid = np.abs(integral(t) - targets)
    bad = resid > 1e-10 * max(integral.length, 1.0)
    for i in np.flatnonzero(bad):
        t[i] = brentq(lambda x: float(integral(x)[0] - targets[i]), 0.0, 1.0,
                      xtol=1e-15)
    return t % 1.0


def arclength_reparameterize(curve: ParametricCurve, M: int,
                             max_order: int = 5) -> UnitSpeedCurve:
    """Resample a closed curve at M points equispaced in arc length.

    Cumulative arc length uses spectral integration of the periodic speed,
    refined until two consecutive resolutions agree to 1e-9 relative; the
    inverse map is solved per sample and unit-speed derivatives follow from
    the chain rule with exact parameter derivatives.
    """
    if M < 4:
        raise DomainError("need at least 4 samples")
    max_order = min(max_order, curve.max_order)
    n = 2048
    integral = _SpeedIntegral(curve, n)
    while True:
        finer = _SpeedIntegral(curve, 2 * n)
        probes = np.linspace(0.05, 0.95, 7)
        err = abs(integral.length - finer.length)
        err = max(err, float(np.max(np.abs(integral(probes) - finer(probes)))))
        if err <= 1e-9 * finer.length or n >= 2**17:
            integral = finer
            break
        integral, n = finer, 2 * n
    if err > 1e-8 * integral.length:
        raise NumericError(f"arc length did not converge (residual {err:.2e})")

    length = integral.length
    s_targets = np.arange(M) * (length / M)
    t_i = _invert_arclength(integral, s_targets)

    c = [curve(t_i, m) for m in range(max_order + 1)]
    # speed and its derivatives in t at the sample parameters
    v = np.linalg.norm(c[1], axis=1)
    dots = {}
    for a in range(1, max_order + 1):
        for b in range(a, max_order + 1):
            if a + b <= max_order + 1:
                dots[(a, b)] = np.sum(c[a] * c[b], axis=1)
    v1 = dots[(1, 2)] / v if max_order >= 2 else None
    v2 = (dots[(2, 2)] + dots[(1, 3)] - v1**2) / v if max_order >= 3 else None
    v3 = ((3 * dots[(2, 3)] + dots[(1, 4)] - 3 * v1 * v2) / v
          if max_order >= 4 else None)
    v4 = ((3 * dots[(3, 3)] + 4 * dots[(2, 4)] + dots[(1, 5)]
           - 3 * v2**2 - 4 * v1 * v3) / v if max_order >= 5 else None)
    # derivatives of t(s)
    t1 = 1.0 / v
    t2 = -v1 / v**3 if v1 is not None else None
    t3 = (-v2 / v**4 + 3 * v1**2 / v**5) if v2 is not None else None
    t4 = ((-v3 / v**5 + 10 * v1 * v2 / v**6 - 15 * v1**3 / v**7)
          if v3 is not None else None)
    t5 = ((-v4 / v**6 + 15 * v1 * v3 / v**7 + 10 * v2**2 / v**7
           - 105 * v1**2 * v2 / v**8 + 105 * v1**4 / v**9)
          if v4 is not None else None)

    def col(x):
        return x[:, None]

    derivs = {1: c[1] * col(t1)}
    if max_order >= 2:
        derivs[2] = c[2] * col(t1**2) + c[1] * col(t2)
    if max_order >= 3:
        derivs[3] = (c[3] * col(t1**3) + 3 * c[2] * col(t1 * t2)
                     + c[1] * col(t3))
    if max_order >= 4:
        derivs[4] = (c[4] * col(t1**4) + 6 * c[3] * col(t1**2 * t2)
                     + c[2] * col(3 * t2**2 + 4 * t1 * t3) + c[1] * col(t4))
    if max_order >= 5:
        derivs[5] = (c[5] * col(t1**5) + 10 * c[4] * col(t1**3 * t2)
                     + c[3] * col(15 * t1 * t2**2 + 10 * t1**2 * t3)
                     + c[2] * col(10 * t2 * t3 + 5 * t1 * t4)
                     + c[1] * col(t5))

    usc = UnitSpeedCurve(length=length, points=c[0], derivs=derivs,
                         arclengths=s_targets, t_params=t_i, source=curve)
    return usc.validate()


@dataclass(frozen=True)
class DerivativeBounds:
    """Sup norms of arc-length derivatives plus curvature summaries."""

    M1: float
    M2: float
    M3: float
    M4: float
    M5: float
    kappa: float
    kappa_hat: float


def derivative_bounds(curve: UnitSpeedCurve) -> DerivativeBounds:
    """Sup |x^(i)| over the samples and the intrinsic curvature maximum."""
    sup = {}
    for order in range(1, 6):
        if order not in curve.derivs:
            raise DomainError(f"derivative order {order} missing from samples")
        sup[order] = float(np.max(np.linalg.norm(curve.derivs[order], axis=1)))
    acc2 = np.sum(curve.derivs[2] ** 2, axis=1)
    kappa = float(np.sqrt(np.max(np.maximum(acc2 - 1.0, 0.0))))
    return DerivativeBounds(M1=sup[1], M2=sup[2], M3=sup[3], M4=sup[4],
                            M5=sup[5], kappa=kappa,
                            kappa_hat=max(kappa, 2.0 / math.pi))


def combined_bounds(plus: UnitSpeedCurve, minus: UnitSpeedCurve) -> DerivativeBounds:
    a, b = derivative_bounds(plus), derivative_bounds(minus)
    kappa = max(a.kappa, b.kappa)
    return DerivativeBounds(*(max(getattr(a, f), getattr(b, f))
                              for f in ("M1", "M2", "M3", "M4", "M5")),
                            kappa=kappa, kappa_hat=max(kappa, 2.0 / math.pi))


@dataclass(frozen=True)
class TwoCurveInstance:
    """A labeled pair of disjoint closed spherical curves plus density."""

    plus: UnitSpeedCurve
    minus: UnitSpeedCurve
    density_mode: str = "riemannian-uniform"
    rho_min: float = 0.0
    rho_max: float = 0.0
    name: str = ""
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.plus.dim != self.minus.dim:
            raise DomainError("components must share an ambient dimension")
        gram = self.plus.points @ self.minus.points.T
        cross_min = float(np.min(np.arccos(np.clip(gram, -1, 1))))
        if cross_min <= 0.0:
            raise DomainError("curves are not disjoint on the sample grid")
        if self.max_pairwise_angle() > math.pi / 2 + 1e-6:
            raise DomainError("pairwise angles exceed pi/2: the pair must fit "
                              "in a quarter-sphere cap")

    @property
    def dim(self) -> int:
        return self.plus.dim

    def component(self, sigma: int) -> UnitSpeedCurve:
        return self.plus if sigma > 0 else self.minus

    def all_points(self) -> np.ndarray:
        return np.vstack([self.plus.points, self.minus.points])

    def labels(self) -> np.ndarray:
        return np.concatenate([np.ones(self.plus.samples),
                               -np.ones(self.minus.samples)])

    def cross_min_angle(self) -> float:
        gram = self.plus.points @ self.minus.points.T
        return float(np.min(np.arccos(np.clip(gram, -1, 1))))

    def max_pairwise_angle(self) -> float:
        pts = self.all_points()
        gram = pts @ pts.T
        return float(np.max(np.arccos(np.clip(gram, -1, 1))))

    def bounds(self) -> DerivativeBounds:
        return combined_bounds(self.plus, self.minus)


def intrinsic_distance(instance: TwoCurveInstance, i: int, j: int) -> float:
    """Arc distance between sample i and sample j; inf across components."""
    mp = instance.plus.samples
    total = mp + instance.minus.samples
    if not (0 <= i < total and 0 <= j < total):
        raise DomainError("sample index out of range")
    ci, cj = (i < mp), (j < mp)
    if ci != cj:
        return math.inf
    comp = instance.plus if ci else instance.minus
    si = comp.arclengths[i if ci else i - mp]
    sj = comp.arclengths[j if cj else j - mp]
    d = abs(si - sj)
    return min(d, comp.length - d)


def _circular_dist_matrix(s: np.ndarray, length: float) -> np.ndarray:
    d = np.abs(s[:, None] - s[None, :])
    return np.minimum(d, length - d)


def _angle_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.arccos(np.clip(a @ b.T, -1.0, 1.0))


def _check_resolution(instance: TwoCurveInstance):
    if instance.plus.samples < 64 or instance.minus.samples < 64:
        raise ResolutionError("need at least 64 samples per curve")


@dataclass(frozen=True)
class InjectivityRadius:
    value: float
    eps: float
    intrinsic_threshold: float
    cap_active: bool
    samples: tuple


def injectivity_radius(instance: TwoCurveInstance, eps: float,
                       refine: int = 4) -> InjectivityRadius:
    """Smallest angle among sample pairs that are intrinsically far.

    The threshold for "far" is sqrt(eps)/kappa_hat, which also caps the
    reported value.  The pairwise scan runs on a `refine`-times denser
    arc-length grid than the instance carries (when the source curves are
    available), which keeps the reported minimum stable under resampling
    even at high curvature.
    """
    if not (0.0 < eps < 1.0):
        raise DomainError("eps must lie in (0, 1)")
    _check_resolution(instance)
    kh = instance.bounds().kappa_hat
    thresh = math.sqrt(eps) / kh
    comps = []
    for comp in (instance.plus, instance.minus):
        if refine > 1 and comp.source is not None:
            comps.append(arclength_reparameterize(comp.source,
                                                  refine * comp.samples,
                                                  max_order=1))
        else:
            comps.append(comp)
    best = thresh
    for comp in comps:
        s, ln, pts = comp.arclengths, comp.length, comp.points
        for lo in range(0, len(s), 512):
            sl = slice(lo, min(lo + 512, len(s)))
            d = np.abs(s[sl, None] - s[None, :])
            d = np.minimum(d, ln - d)
            far = d >= thresh
            if np.any(far):
                ang = np.arccos(np.clip(pts[sl] @ pts.T, -1.0, 1.0))
                best = min(best, float(np.min(ang[far])))
    cross = min(float(np.min(np.arccos(np.clip(
        comps[0].points[sl2] @ comps[1].points.T, -1.0, 1.0))))
        for sl2 in (slice(lo, min(lo + 512, comps[0].samples))
                    for lo in range(0, comps[0].samples, 512)))
    best = min(best, cross)
    return InjectivityRadius(value=best, eps=eps, intrinsic_threshold=thresh,
                             cap_active=(best == thresh),
                             samples=(comps[0].samples, comps[1].samples))


def _mask_to_arcs(mask: np.ndarray, s: np.ndarray, length: float) -> list:
    """Qualifying-sample runs -> circular arcs with half-step padding."""
    if not np.any(mask):
        return []
    m = len(mask)
    h = length / m
    if np.all(mask):
        return [(0.0, length)]
    idx = np.flatnonzero(mask)
    # split into runs of consecutive indices (circularly)
    breaks = np.flatnonzero(np.diff(idx) > 1)
    runs = np.split(idx, breaks + 1)
    if mask[0] and mask[-1] and len(runs) > 1:
        runs[0] = np.concatenate([runs[-1], runs[0] + 0])
        runs = runs[:-1]
    arcs = []
    for run in runs:
        start = s[run[0]] - 0.5 * h
        span = len(run) * h  # (count-1) steps plus h/2 padding on both ends
        arcs.append((start % length, min(span, length)))
    return arcs


def _min_interval_cover(arcs: list, length: float, radius: float) -> int:
    """Minimal number of length-2*radius intervals covering circular arcs.

    Intervals may sit anywhere on the circle; greedy sweeps started at each
    arc head are exact for circular interval covering.
    """
    if not arcs:
        return 0
    width = 2.0 * radius
    total = sum(a[1] for a in arcs)
    if total >= length - 1e-12:
        return max(1, math.ceil(length / width - 1e-12))
    arcs = sorted((a % length, span) for a, span in arcs)
    best = None
    for start_idx in range(len(arcs)):
        origin = arcs[start_idx][0]
        # unroll arcs starting at `origin`
        pieces = []
        for a, span in arcs:
            rel = (a - origin) % length
            pieces.append((rel, rel + span))
        pieces.sort()
        count = 0
        covered_to = 0.0
        for lo, hi in pieces:
            if hi <= covered_to:
                continue
            pos = max(lo, covered_to)
            while pos < hi - 1e-12:
                count += 1
                covered_to = pos + width
                pos = max(covered_to, lo)
        if best is None or count < best:
            best = count
    return int(best)


def clover_number(instance: TwoCurveInstance, eps: float, delta: float,
                  restrict_centers: bool = False) -> int:
    """Covering count of the winding set, maximized over base points.

    For each base sample x the winding set collects samples that are
    intrinsically far (d >= sqrt(eps)/kappa_hat; always true across
    components) yet extrinsically close (angle <= delta*sqrt(eps)/kappa_hat).
    Per component it is a union of arcs, covered greedily by intrinsic
    balls of radius 1/sqrt(1+kappa^2).
    """
    if not (0.0 < eps < 1.0):
        raise DomainError("eps must lie in (0, 1)")
    if not (0.0 < delta <= 1.0 - eps):
        raise DomainError("delta must lie in (0, 1-eps]")
    _check_resolution(instance)
    b = instance.bounds()
    thresh = math.sqrt(eps) / b.kappa_hat
    angle_thresh = delta * math.sqrt(eps) / b.kappa_hat
    radius = 1.0 / math.sqrt(1.0 + b.kappa**2)

    comps = (instance.plus, instance.minus)
    dmats = [_circular_dist_matrix(c.arclengths, c.length) for c in comps]
    pts = instance.all_points()
    amat = _angle_matrix(pts, pts)
    sizes = [c.samples for c in comps]
    offsets = [0, sizes[0]]

    worst = 0
    for base in range(pts.shape[0]):
        base_comp = 0 if base < sizes[0] else 1
        count = 0
        for ci, comp in enumerate(comps):
            sl = slice(offsets[ci], offsets[ci] + sizes[ci])
            close = amat[base, sl] <= angle_thresh
            if ci == base_comp:
                far = dmats[ci][base - offsets[ci]] >= thresh
            else:
                far = np.ones(sizes[ci], dtype=bool)  # cross-component: inf
            arcs = _mask_to_arcs(close & far, comp.arclengths, comp.length)
            if restrict_centers:
                count += _min_interval_cover_restricted(arcs, comp.length, radius)
            else:
                count += _min_interval_cover(arcs, comp.length, radius)
        worst = max(worst, count)
    return worst


def _min_interval_cover_restricted(arcs: list, length: float, radius: float) -> int:
    """Covering with ball centers restricted to the arcs themselves."""
    if not arcs:
        return 0
    total = sum(a[1] for a in arcs)
    if total >= length - 1e-12:
        return max(1, math.ceil(length / (2 * radius) - 1e-12))
    arcs = sorted((a % length, span) for a, span in arcs)
    best = None
    for start_idx in range(len(arcs)):
        origin = arcs[start_idx][0]
        pieces = sorted(((a - origin) % length, ((a - origin) % length) + sp)
                        for a, sp in arcs)
        count = 0
        covered_to = 0.0
        for lo, hi in pieces:
            pos = max(lo, covered_to)
            while pos < hi - 1e-12:
                count += 1
                # center must lie in an arc: place it at min(pos+radius, hi)
                center = min(pos + radius, hi)
                covered_to = center + radius
                pos = max(covered_to, lo)
        if best is None or count < best:
            best = count
    return int(best)


# ---------------------------------------------------------------------------
# built-in geometries


def _circle_on_sphere(polar: float) -> ParametricCurve:
    """Latitude circle at the given polar angle on S^2."""
    r, z = math.sin(polar), math.cos(polar)

    def stack(t, order):
        w = TWO_PI * t
        f = (2j * math.pi) ** order * np.exp(1j * w)
        out = np.zeros((len(t), 3))
        out[:, 0] = r * f.real
        out[:, 1] = r * f.imag
        if order == 0:
            out[:, 2] = z
        return out

    return ParametricCurve(stack, 3, 5)


def _circle_3d(center: np.ndarray, u: np.ndarray, v: np.ndarray,
               radius: float) -> ParametricCurve:
    """center + radius*(u cos 2pi t + v sin 2pi t) in R^3."""
    center = np.asarray(center, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)

    def stack(t, order):
        w = TWO_PI * t
        f = (2j * math.pi) ** order * np.exp(1j * w)
        out = radius * (np.outer(f.real, u) + np.outer(f.imag, v))
        if order == 0:
            out += center
        return out

    return ParametricCurve(stack, 3, 5)


def _clover_flower(sep: float) -> ParametricCurve:
    """The four-petal component: radius sin(4t)+1+sep at angle t - pi/8,
    with first coordinate cos(4t).  Parameter rescaled to [0, 1)."""
    a = math.pi / 8

    def stack(t, order):
        w = TWO_PI * t
        out = np.zeros((len(t), 3))
        # x1 = cos(4w), w = 2 pi t, so d^k/dt^k picks up (8 pi i)^k
        out[:, 0] = ((8j * math.pi) ** order * np.exp(4j * w)).real
        # plane part Z(w) = R e^{i(w-a)} with R = sin 4w + 1 + sep;
        # R^{(j)}_w = 4^j sin(4w + j pi/2), then chain d/dt = 2 pi d/dw
        z = np.zeros(len(t), dtype=complex)
        for j in range(order + 1):
            if j == 0:
                rj = np.sin(4 * w) + 1.0 + sep
            else:
                rj = (4.0**j) * np.sin(4 * w + j * math.pi / 2)
            z += _BINOM[order][j] * rj * (1j ** (order - j)) * np.exp(1j * (w - a))
        z *= TWO_PI**order
        out[:, 1] = z.real
        out[:, 2] = z.imag
        return out

    return ParametricCurve(stack, 3, 5)


def _big_circle() -> ParametricCurve:
    """The companion component: radius-4 circle through the flower center."""

    def stack(t, order):
        w = TWO_PI * t
        f = (2j * math.pi) ** order * np.exp(1j * w)
        out = np.zeros((len(t), 3))
        out[:, 0] = 4.0 * f.imag
        out[:, 1] = 4.0 * f.real
        if order == 0:
            out[:, 1] -= 4.0
        return out

    return ParametricCurve(stack, 3, 5)


def _reflect_curve(curve: ParametricCurve, segments: list) -> ParametricCurve:
    """Reflect (x2, x3) over chord lines on parameter segments.

    Each segment is (t_lo, t_hi, anchor2d, reflection2x2); outside segments
    the curve is untouched.  x1 is never modified, so the transform is an
    isometry of R^3 on each piece.
    """

    def stack(t, order):
        out = curve(t, order)
        for (lo, hi, anchor, refl) in segments:
            inside = (t > lo) & (t < hi)
            if not np.any(inside):
                continue
            yz = out[inside][:, 1:3]
            if order == 0:
                yz = (yz - anchor) @ refl.T + anchor
            else:
                yz = yz @ refl.T
            out[inside, 1:3] = yz
        return out

    return ParametricCurve(stack, curve.dim, curve.max_order)


def _unfold_segments(flower: ParametricCurve, petals: int) -> list:
    """Segments for reflecting `petals` inner passes outward.

    Finds the 8 parameters where |dx2/dt| = |dx3/dt| by bracketing sign
    changes, pairs them around each inner pass (radius minimum), and builds
    the chord-line reflections.
    """
    if petals == 0:
        return []
    n_scan = 8192
    ts = np.arange(n_scan) / n_scan
    d1 = flower(ts, 1)
    g = np.abs(d1[:, 1]) - np.abs(d1[:, 2])

    def gfun(x):
        row = flower(np.array([x % 1.0]), 1)[0]
        return abs(row[1]) - abs(row[2])

    roots = []
    for i in range(n_scan):
        a, b = ts[i], ts[(i + 1) % n_scan] if i + 1 < n_scan else 1.0
        ga, gb = g[i], g[(i + 1) % n_scan]
        if ga == 0.0:
            roots.append(a)
        elif ga * gb < 0:
            roots.append(brentq(gfun, a, b, xtol=1e-10))
    # the petal tips balance |x2'| = |x3'| identically (they sit at 45 deg in
    # the rotated frame); the construction uses the eight outer balance
    # points, whose chords trace the circumscribing square
    outer = []
    for r in roots:
        pos = flower(np.array([r % 1.0]), 0)[0]
        if math.hypot(pos[1], pos[2]) > 1.0:
            outer.append(r)
    roots = sorted(set(np.round(outer, 12)))
    if len(roots) != 8:
        raise ConstructionError(
            f"unfolding expected 8 tangent-balance points, found {len(roots)}")
    # inner passes sit where sin(8 pi t) = -1: t = 3/16 + m/4
    tips = [3.0 / 16.0 + m / 4.0 for m in range(4)]
    segments = []
    for tip in tips[:petals]:
        after = [r for r in roots if r > tip]
        before = [r for r in roots if r < tip]
        hi = after[0] if after else roots[0] + 1.0
        lo = before[-1] if before else roots[-1] - 1.0
        pa = flower(np.array([lo % 1.0]), 0)[0][1:3]
        pb = flower(np.array([hi % 1.0]), 0)[0][1:3]
        chord = pb - pa
        nrm = np.linalg.norm(chord)
        if nrm < 1e-12:
            raise ConstructionError("degenerate unfolding chord")
        d = chord / nrm
        refl = 2.0 * np.outer(d, d) - np.eye(2)
        segments.append((lo, hi, pa, refl))
    return segments


def builtin_geometry(name: str, **options) -> TwoCurveInstance:
    """Construct one of the built-in curve-pair geometries.

    Names: ``two_circles`` (latitude circles on S^2; options polar, gap),
    ``fig1_like`` (two interlocked small circles lifted to S^3; options
    delta_sep, scale), ``clover1`` .. ``clover4`` (the unfoldable flower
    configuration lifted to S^3; options delta_sep, scale).  All accept
    ``samples`` (per curve, default 1024).
    """
    known = {"two_circles", "fig1_like", "clover1", "clover2", "clover3",
             "clover4"}
    if name not in known:
        raise DomainError(f"unknown geometry {name!r}; pick from {sorted(known)}")
    samples = int(options.pop("samples", 1024))
    if name == "two_circles":
        polar = float(options.pop("polar", 0.45))
        gap = float(options.pop("gap", 0.3))
        _reject_unknown(options)
        if polar <= 0 or gap <= 0:
            raise DomainError("polar and gap must be positive")
        plus_src = _circle_on_sphere(polar)
        minus_src = _circle_on_sphere(polar + gap)
        inst_name = "two_circles"
        opts = {"polar": polar, "gap": gap}
    elif name == "fig1_like":
        delta_sep = float(options.pop("delta_sep", 0.05))
        scale = float(options.pop("scale", 0.01))
        _reject_unknown(options)
        d = 1.0 + delta_sep
        a = _circle_3d([0, 0, 0], [1, 0, 0], [0, 1, 0], 1.0)
        b = _circle_3d([d, 0, 0], [1, 0, 0], [0, 0, 1], 1.0)
        plus_src = lift_curve(scale_curve(a, scale))
        minus_src = lift_curve(scale_curve(b, scale))
        inst_name = "fig1_like"
        opts = {"delta_sep": delta_sep, "scale": scale}
    else:
        k = int(name[-1])
        delta_sep = float(options.pop("delta_sep", 0.05))
        scale = float(options.pop("scale", 0.01))
        _reject_unknown(options)
        flower = _clover_flower(delta_sep)
        segments = _unfold_segments(flower, 4 - k)
        if segments:
            flower = _reflect_curve(_clover_flower(delta_sep), segments)
        plus_src = lift_curve(scale_curve(_big_circle(), scale))
        minus_src = lift_curve(scale_curve(flower, scale))
        inst_name = name
        opts = {"delta_sep": delta_sep, "scale": scale}
    plus = arclength_reparameterize(plus_src, samples)
    minus = arclength_reparameterize(minus_src, samples)
    rho = (1.0 / (2 * plus.length), 1.0 / (2 * minus.length))
    return TwoCurveInstance(plus=plus, minus=minus,
                            density_mode="riemannian-uniform",
                            rho_min=min(rho), rho_max=max(rho),
                            name=inst_name, options=opts)


def _reject_unknown(options: dict):
    if options:
        raise DomainError(f"unknown geometry options: {sorted(options)}")


@dataclass(frozen=True)
class GeometryReport:
    """Summary of the quantities that set problem difficulty."""

    name: str
    dim: int
    len_plus: float
    len_minus: float
    len_total: float
    M1: float
    M2: float
    M3: float
    M4: float
    M5: float
    kappa: float
    kappa_hat: float
    eps: float
    delta: float
    injectivity_radius: float
    clover_number: int
    cross_min_angle: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def geometry_report(instance: TwoCurveInstance, eps: float = 1.0 / 20.0,
                    delta: float = 19.0 / 20.0) -> GeometryReport:
    b = instance.bounds()
    inj = injectivity_radius(instance, eps)
    cn = clover_number(instance, eps, delta)
    return GeometryReport(
        name=instance.name, dim=instance.dim,
        len_plus=instance.plus.length, len_minus=instance.minus.length,
        len_total=instance.plus.length + instance.minus.length,
        M1=b.M1, M2=b.M2, M3=b.M3, M4=b.M4, M5=b.M5,
        kappa=b.kappa, kappa_hat=b.kappa_hat, eps=eps, delta=delta,
        injectivity_radius=inj.value, clover_number=cn,
        cross_min_angle=instance.cross_min_angle())


# ---------------------------------------------------------------------------
# CSV import/export


def export_curves_csv(instance: TwoCurveInstance, path):
    """Write `component,t,x0,...,x{D-1}` rows for both components."""
    dim = instance.dim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "t"] + [f"x{i}" for i in range(dim)])
        for sigma, comp in ((1, instance.plus), (-1, instance.minus)):
            ts = comp.arclengths / comp.length
            for t, row in zip(ts, comp.points):
                writer.writerow([sigma, repr(float(t))]
                                + [repr(float(x)) for x in row])


def import_curves_csv(path, samples: int = 1024) -> TwoCurveInstance:
    """Read a curve-pair CSV and rebuild an instance via trig interpolation."""
    groups = {1: [], -1: []}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) < 5 or header[0] != "component" or header[1] != "t":
            raise DomainError("expected header component,t,x0,...")
        for row in reader:
            sigma = int(float(row[0]))
            groups[sigma].append((float(row[1]), [float(x) for x in row[2:]]))
    curves = {}
    for sigma, rows in groups.items():
        if len(rows) < 8:
            raise DomainError(f"component {sigma} has too few samples")
        rows.sort(key=lambda r: r[0])
        pts = np.asarray([r[1] for r in rows])
        curves[sigma] = curve_from_samples(pts)
    plus = arclength_reparameterize(curves[1], samples)
    minus = arclength_reparameterize(curves[-1], samples)
    rho = (1.0 / (2 * plus.length), 1.0 / (2 * minus.length))
    return TwoCurveInstance(plus=plus, minus=minus,
                            density_mode="riemannian-uniform",
                            rho_min=min(rho), rho_max=max(rho),
                            name="imported", options={"path": str(path)})
