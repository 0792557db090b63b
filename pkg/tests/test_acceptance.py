"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Criterion 4 asserts a 1.1x stability factor on the normalized surrogate
gap; the measured ratio is 1.1439 (grid-independent, confirmed in
30-digit arithmetic), so that single criterion reports FAIL honestly;
see README.
"""

import contextlib
import filecmp
import io
import math
import time

import numpy as np
import pytest

from curventk.cli import main as cli_main
from curventk.dynamics import (nominal_evolve, separation_check,
                               weighted_operator_eigs)
from curventk.geometry import builtin_geometry, clover_number
from curventk.kernel import (KernelParams, angle_evolution, hat_angle_evolution,
                             hat_skeleton, skeleton, skeleton_derivative,
                             tabulate_skeleton, xi, xi_derivative)
from curventk.network import NetworkParams, empirical_ntk_gram
from curventk.solver import (assemble_kernel, corrected_kernel_dc, discretize,
                             fourier_subspace, invariant_operator_eigs,
                             localization_radius, neumann_certificate,
                             riemannian_norm, solve_certificate_pinv)

from test_kernel import FROZEN_CENTRAL_DIFFS

PI = math.pi


def report(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {num:02d}] {name}: {status}" + (f" ({detail})" if detail else ""))
    assert ok, f"criterion {num} ({name}) failed: {detail}"


@pytest.fixture(scope="module")
def two_circles():
    return builtin_geometry("two_circles", samples=256)


@pytest.fixture(scope="module")
def clovers():
    return {k: builtin_geometry(f"clover{k}", samples=1024) for k in (1, 2, 3, 4)}


@pytest.fixture(scope="module")
def deep():
    params = KernelParams(100000, 2.0)
    return params, tabulate_skeleton(params)


def test_criterion_01_fluid_bracket():
    start = time.time()
    t = PI * np.arange(1, 65) / 64.0
    u = t.copy()
    ok = True
    for ell in range(1, 257):
        u = angle_evolution(u)
        lb = t / (1 + ell * t / PI)
        ub = t / (1 + ell * t / (3 * PI))
        if not (np.all(u >= lb - 1e-12) and np.all(u <= ub + 1e-12)):
            ok = False
            break
    elapsed = time.time() - start
    report(1, "fluid bracket", ok and elapsed < 1.0,
           f"256 compositions x 64 angles in {elapsed:.2f}s")


def test_criterion_02_skeleton_calculus():
    start = time.time()
    ok = True
    detail = []
    ts = np.concatenate([[1e-6], np.linspace(0.05, PI, 20)])
    for L in (4, 8, 16, 32, 64, 128):
        p = KernelParams(L, 2.0)
        got = hat_skeleton(ts, p)
        for i, t in enumerate(ts):
            acc = 0.0
            for ell in range(L):
                prod = 1.0
                for lp in range(ell, L):
                    prod *= 1 - hat_angle_evolution(float(t), lp) / PI
                acc += prod
            if abs(got[i] - acc) > 1e-10 * abs(acc):
                ok = False
                detail.append(f"hat mismatch L={L} t={t}")
    for (L, t), vals in FROZEN_CENTRAL_DIFFS.items():
        p = KernelParams(L, 2.0)
        for order in (1, 2, 3):
            got = skeleton_derivative(t, order, p).value
            if abs(got - vals[order - 1]) > 1e-4 * abs(vals[order - 1]):
                ok = False
                detail.append(f"deriv mismatch L={L} t={t} order={order}")
    elapsed = time.time() - start
    report(2, "skeleton calculus", ok and elapsed < 10.0,
           "; ".join(detail) or f"closed form + orders 1-3 in {elapsed:.1f}s")


def test_criterion_03_boundary_values():
    start = time.time()
    ok = True
    for L in (2, 5, 16, 64):
        p = KernelParams(L, 2.0)
        for ell in range(L):
            if abs(xi(0.0, ell, p) - 1.0) > 1e-12:
                ok = False
            if abs(xi_derivative(0.0, ell, 1, p).value + (L - ell) / PI) > 1e-12:
                ok = False
        if abs(xi(PI, 0, p)) > 1e-12:
            ok = False
    elapsed = time.time() - start
    report(3, "boundary values", ok and elapsed < 1.0, f"{elapsed:.2f}s")


def test_criterion_04_surrogate_gap():
    start = time.time()
    t = PI * np.arange(1, 65) / 64.0
    u = t.copy()
    nonneg = True
    sup_gap = {}
    for ell in range(1, 1025):
        u = angle_evolution(u)
        gap = t / (1 + ell * t / (3 * PI)) - u
        if gap.min() < -1e-12:
            nonneg = False
        sup_gap[ell] = gap.max()
    norm = {ell: g * ell**2 / math.log(1 + ell) for ell, g in sup_gap.items()}
    head = max(norm[ell] for ell in range(1, 65))
    worst = max(norm[ell] / head for ell in range(8, 1025))
    ok = nonneg and worst <= 1.1
    elapsed = time.time() - start
    report(4, "surrogate gap", ok and elapsed < 30.0,
           f"gap >= 0: {nonneg}; normalized ratio {worst:.4f} vs allowed 1.1 "
           f"- the true asymptotic ratio exceeds the allowed factor "
           f"(known limitation, see README)")


def test_criterion_05_clover_numbers(clovers):
    start = time.time()
    ok = True
    detail = []
    for k, inst in clovers.items():
        cn = clover_number(inst, 1 / 20, 19 / 20)
        if cn != k:
            ok = False
            detail.append(f"clover{k} -> {cn}")
        inst2 = builtin_geometry(f"clover{k}", samples=2048)
        cn2 = clover_number(inst2, 1 / 20, 19 / 20)
        if cn2 != k:
            ok = False
            detail.append(f"clover{k} @2x -> {cn2}")
    elapsed = time.time() - start
    report(5, "clover numbers", ok and elapsed < 120.0,
           "; ".join(detail) or f"k=1..4 stable under doubling, {elapsed:.0f}s")


def test_criterion_06_figure2_trend(clovers):
    start = time.time()
    p = KernelParams(50, 2.0)
    norms = []
    for k in (1, 2, 3, 4):
        grid = discretize(clovers[k], 200, "uniform_t")
        cert = solve_certificate_pinv(assemble_kernel(grid, p), grid)
        norms.append(cert.norm)
    ok = all(norms[i] <= norms[i + 1] for i in range(3))
    elapsed = time.time() - start
    report(6, "figure-2 trend", ok and elapsed < 300.0,
           "cert norms by clover k=1..4: "
           + ", ".join(f"{v:.4f}" for v in norms))


def test_criterion_07_figure3_trend():
    start = time.time()
    inst = builtin_geometry("fig1_like", samples=256)
    grid = discretize(inst, 200, "uniform_t")
    maxima = []
    for L in (10, 25, 50, 100):
        p = KernelParams(L, 2.0)
        cert = solve_certificate_pinv(assemble_kernel(grid, p), grid)
        maxima.append(cert.max_abs)
    ok = all(maxima[i] > maxima[i + 1] for i in range(3))
    elapsed = time.time() - start
    report(7, "figure-3 trend", ok and elapsed < 300.0,
           "max|g| by depth 10,25,50,100: "
           + ", ".join(f"{v:.3f}" for v in maxima))


def test_criterion_08_invariant_spectrum(two_circles, deep):
    start = time.time()
    params, table = deep
    eps = 1 / 20
    n = params.width
    # fit the bound constant at depth 256 and freeze it; m0 = 2 int psi° is
    # length-independent, so the fit uses the longer component (the shorter
    # one does not admit r_256 <= len/2)
    p_fit = KernelParams(256, 2.0)
    grid = discretize(two_circles, 256, "riemannian")
    r_fit = localization_radius(eps, 256)
    m0_fit = invariant_operator_eigs(eps, p_fit, max(grid.lengths),
                                     freqs=[0])[0]
    log_term = (3 * PI * n / 4) * math.log(1 + (256 - 2) * r_fit / (3 * PI))
    C = (log_term - m0_fit) / (n * r_fit * math.log(256) ** 2)
    # evaluate at depth 1e5 with the tabulated profile
    ok = True
    detail = []
    r = localization_radius(eps, params.depth)
    for length in grid.lengths:
        eigs = invariant_operator_eigs(eps, params, length, table=table)
        if not np.all(eigs >= (1 - eps) * eigs[0]):
            ok = False
            detail.append(f"m_k < (1-eps) m0 at len {length:.2f}")
        bound = ((3 * PI * n / 4)
                 * math.log(1 + (params.depth - 2) * r / (3 * PI))
                 - C * n * r * math.log(params.depth) ** 2)
        if eigs[0] < bound:
            ok = False
            detail.append(f"m0 {eigs[0]:.2f} < bound {bound:.2f}")
        else:
            detail.append(f"m0 {eigs[0]:.2f} >= bound {bound:.2f}")
    elapsed = time.time() - start
    report(8, "invariant-operator spectrum", ok and elapsed < 60.0,
           f"C fitted {C:.3f}; " + "; ".join(detail) + f"; {elapsed:.0f}s")


def test_criterion_09_neumann_path(two_circles, deep):
    start = time.time()
    params, table = deep
    grid = discretize(two_circles, 2048, "riemannian")
    sub = fourier_subspace(grid, 1 / 20, params)
    zeta = sub.project(grid.labels.astype(complex))
    tol = 1e-10
    cert = neumann_certificate(grid, zeta, 1 / 20, params, table=table,
                               tol=tol)
    contraction = cert.metadata["contraction"]
    ok = (not cert.metadata["diverged"]) and contraction < 1.0
    # direct restricted solve
    K = corrected_kernel_dc(grid, params, table=table)
    applied = K.values @ (grid.weights[:, None] * sub.basis)
    T_S = sub.basis.conj().T @ (grid.weights[:, None] * applied)
    g_direct = sub.synthesize(np.linalg.solve(T_S, sub.project_coeffs(zeta)))
    zeta_norm = riemannian_norm(zeta, grid)
    match = riemannian_norm(cert.values - g_direct, grid)
    ok = ok and match <= 10 * tol * zeta_norm
    ok = ok and cert.residual_norm <= 1e-6 * zeta_norm
    elapsed = time.time() - start
    report(9, "neumann path", ok and elapsed < 600.0,
           f"contraction {contraction:.4f}, direct-solve gap {match:.2e}, "
           f"P_S residual {cert.residual_norm:.2e} vs 1e-6|zeta|="
           f"{1e-6 * zeta_norm:.2e}, {elapsed:.0f}s")


def test_criterion_10_dynamics_separation(two_circles):
    start = time.time()
    grid = discretize(two_circles, 400, "uniform_t")
    K = assemble_kernel(grid, KernelParams(50, 2.0))
    evals, _, _ = weighted_operator_eigs(K, grid)
    tau = 1.0 / (2.0 * evals[-1])
    res = nominal_evolve(grid, K, -grid.labels, tau, 1000, monotone=True)
    nonincreasing = bool(np.all(np.diff(res.norms) <= 1e-12))
    sep_at = None
    for k in range(1001):
        okk, _ = separation_check(grid.labels + res.trajectory[k], grid.labels)
        if okk:
            sep_at = k
            break
    ok = nonincreasing and sep_at is not None
    elapsed = time.time() - start
    report(10, "dynamics separation", ok and elapsed < 60.0,
           f"monotone {nonincreasing}, separated at iter {sep_at}, {elapsed:.0f}s")


def test_criterion_11_empirical_concentration():
    start = time.time()
    inst = builtin_geometry("fig1_like", samples=256)
    grid = discretize(inst, 16, "uniform_t")
    pts = grid.points[::2]
    assert pts.shape == (16, 4)
    p = KernelParams(4, 2.0)
    angles = np.arccos(np.clip(pts @ pts.T, -1.0, 1.0))
    np.fill_diagonal(angles, 0.0)
    closed_unit = skeleton(angles.ravel(), p).reshape(angles.shape) / p.width
    medians = {}
    for width in (128, 512, 2048):
        sups = []
        for seed in range(10):
            net = NetworkParams(width, 4, 4, seed=seed)
            gram = empirical_ntk_gram(net, pts)
            target = closed_unit * width
            sups.append(np.max(np.abs(gram - target)) / (width * 4 / 2.0))
        medians[width] = float(np.median(sups))
    ok = (medians[128] > medians[512] > medians[2048]
          and medians[2048] <= 0.25)
    elapsed = time.time() - start
    report(11, "empirical concentration", ok and elapsed < 300.0,
           f"median sup rel err: " + ", ".join(
               f"n={w}: {m:.3f}" for w, m in medians.items()) + f"; {elapsed:.0f}s")


def test_criterion_12_determinism(tmp_path):
    start = time.time()
    fast_configs = {
        "geometry": ["--set", "samples=128"],
        "kernel-table": ["--set", "L=2000"],
        "certificate": ["--set", "M=32", "--set", "L=25", "--set", "samples=128"],
        "neumann": ["--set", "M=64", "--set", "L=2000", "--set", "samples=128"],
        "dynamics": ["--set", "M=32", "--set", "iterations=50",
                     "--set", "samples=128"],
        "ntk-compare": ["--set", "widths=64,128", "--set", "n_seeds=2",
                        "--set", "samples=128"],
        "clover-sweep": ["--set", "M=32", "--set", "samples=512"],
        "depth-sweep": ["--set", "depths=10,25", "--set", "M=32",
                        "--set", "samples=128"],
    }
    ok = True
    detail = []
    for sub, args in fast_configs.items():
        dirs = []
        for run in (0, 1):
            out = tmp_path / f"{sub}-{run}"
            with contextlib.redirect_stdout(io.StringIO()):
                rc = cli_main([sub, "--out", str(out), "--seed", "7"] + args)
            if rc != 0:
                ok = False
                detail.append(f"{sub} rc={rc}")
                break
            dirs.append(out)
        if len(dirs) == 2:
            for f in sorted(dirs[0].glob("*.csv")):
                if not filecmp.cmp(f, dirs[1] / f.name, shallow=False):
                    ok = False
                    detail.append(f"{sub}/{f.name} differs")
    elapsed = time.time() - start
    report(12, "determinism", ok,
           "; ".join(detail) or f"all 8 subcommands byte-identical, {elapsed:.0f}s")
