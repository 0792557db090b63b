"""Configuration-driven experiment runner.

Every subcommand reads a flat key=value config (file plus --set
overrides), writes CSV artifacts with deterministic bodies, and drops a
JSON sidecar next to each output carrying the full config echo and the
library version.  Exit codes: 0 success, 2 config error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import nominal_evolve, separation_check, weighted_operator_eigs
from .errors import ConfigurationError, CurventkError, DomainError
from .geometry import (builtin_geometry, clover_number, export_curves_csv,
                       geometry_report, injectivity_radius)
from .kernel import KernelParams, tabulate_skeleton
from .network import NetworkParams, empirical_ntk_gram, sampled_zeta0
from .solver import (assemble_kernel, dc_density_certificate, discretize,
                     fourier_subspace, neumann_certificate,
                     solve_certificate_pinv)

GEOMETRY_KEYS = {"geometry", "polar", "gap", "delta_sep", "scale", "samples"}

SUBCOMMAND_KEYS = {
    "geometry": GEOMETRY_KEYS | {"eps", "delta"},
    "kernel-table": {"L", "n", "grid_size", "verify"},
    "certificate": GEOMETRY_KEYS | {"L", "n", "M", "weighting", "dc",
                                    "rank_tol", "eps", "delta", "solver",
                                    "eps0", "eps1", "refine_steps"},
    "neumann": GEOMETRY_KEYS | {"L", "n", "M", "eps", "delta", "tol",
                                "max_terms"},
    "dynamics": GEOMETRY_KEYS | {"L", "n", "M", "weighting", "tau_factor",
                                 "iterations", "zeta0", "net_width"},
    "ntk-compare": GEOMETRY_KEYS | {"L", "n", "widths", "n_seeds",
                                    "grid_points"},
    "clover-sweep": {"delta_sep", "scale", "samples", "L", "n", "M",
                     "weighting", "eps", "delta"},
    "depth-sweep": GEOMETRY_KEYS | {"depths", "n", "M", "weighting"},
}

GEOMETRY_DEFAULTS = {"geometry": "two_circles", "samples": 1024}


class ConfigError(Exception):
    pass


def _parse_value(raw: str):
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def load_config(path: str | None, overrides: list) -> dict:
    cfg = {}
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {path} does not exist")
        for ln, line in enumerate(p.read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected key=value, got {line!r}")
            key, _, val = line.partition("=")
            cfg[key.strip()] = _parse_value(val)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, val = item.partition("=")
        cfg[key.strip()] = _parse_value(val)
    return cfg


def validate_keys(subcommand: str, cfg: dict):
    allowed = SUBCOMMAND_KEYS[subcommand]
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys for {subcommand}: {unknown}; "
                          f"allowed: {sorted(allowed)}")


def build_instance(cfg: dict):
    name = cfg.get("geometry", GEOMETRY_DEFAULTS["geometry"])
    opts = {}
    for key in ("polar", "gap", "delta_sep", "scale"):
        if key in cfg:
            opts[key] = cfg[key]
    opts["samples"] = cfg.get("samples", GEOMETRY_DEFAULTS["samples"])
    return builtin_geometry(name, **opts)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, header: list, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if not isinstance(v, str) else v
                             for v in row])


def write_sidecar(path: Path, subcommand: str, cfg: dict, seed: int):
    meta = {"subcommand": subcommand, "config": cfg, "seed": seed,
            "version": __version__}
    Path(str(path) + ".meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")


def _kernel_params(cfg, default_L=50):
    return KernelParams(int(cfg.get("L", default_L)), float(cfg.get("n", 2.0)))


def _geometry_summary(instance, eps, delta):
    rep = geometry_report(instance, eps, delta)
    return rep


def cmd_geometry(cfg, out, seed):
    instance = build_instance(cfg)
    rep = geometry_report(instance, float(cfg.get("eps", 1 / 20)),
                          float(cfg.get("delta", 19 / 20)))
    path = out / "geometry.json"
    path.write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    write_sidecar(path, "geometry", cfg, seed)
    curves = out / "curves.csv"
    export_curves_csv(instance, curves)
    write_sidecar(curves, "geometry", cfg, seed)
    return [path, curves]


def cmd_kernel_table(cfg, out, seed):
    params = _kernel_params(cfg)
    tab = tabulate_skeleton(params, int(cfg.get("grid_size", 4096)),
                            verify=bool(cfg.get("verify", True)))
    path = out / "kernel_table.csv"
    write_csv(path, ["t", "psi0"], zip(tab.grid, tab.values))
    write_sidecar(path, "kernel-table", cfg, seed)
    return [path]


def _write_certificate_artifacts(out, grid, cert, params, cfg, seed,
                                 subcommand, geometry_rep):
    cert_path = out / "certificate.csv"
    g = np.real(cert.values)
    resid = np.real(cert.residual)
    rows = zip(grid.labels.astype(int), grid.t_params, grid.arclengths,
               g, np.real(cert.target), resid)
    write_csv(cert_path, ["component", "t", "s", "g", "zeta", "residual"],
              rows)
    write_sidecar(cert_path, subcommand, cfg, seed)
    summary = {
        "L": params.depth, "n": params.width, "M": grid.size // 2,
        "mode": grid.weighting, "cert_norm": cert.norm,
        "residual_norm": cert.residual_norm,
        "contraction": cert.metadata.get("contraction"),
        "clover": geometry_rep.clover_number,
        "delta_eps": geometry_rep.injectivity_radius,
        "kappa": geometry_rep.kappa,
        "method": cert.method, "measure": cert.measure,
    }
    spath = out / "summary.json"
    spath.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_sidecar(spath, subcommand, cfg, seed)
    return [cert_path, spath]


def cmd_certificate(cfg, out, seed):
    instance = build_instance(cfg)
    params = _kernel_params(cfg)
    M = int(cfg.get("M", 200))
    weighting = cfg.get("weighting", "uniform_t")
    solver = cfg.get("solver", "pinv")
    eps = float(cfg.get("eps", 1 / 20))
    delta = float(cfg.get("delta", 19 / 20))
    rep = _geometry_summary(instance, eps, delta)
    if solver == "pinv":
        grid = discretize(instance, M, weighting)
        K = assemble_kernel(grid, params, dc=bool(cfg.get("dc", False)))
        rank_tol = cfg.get("rank_tol")
        cert = solve_certificate_pinv(
            K, grid, rank_tol=float(rank_tol) if rank_tol else None)
    elif solver == "dc_density":
        grid = discretize(instance, M, "riemannian")
        cert = dc_density_certificate(
            grid, grid.labels.astype(complex), params,
            eps0=float(cfg.get("eps0", 1 / 20)),
            eps1=float(cfg.get("eps1", 51 / 100)),
            refine_steps=int(cfg.get("refine_steps", 3)))
    else:
        raise ConfigError(f"unknown solver {solver!r} (pinv or dc_density)")
    return _write_certificate_artifacts(out, grid, cert, params, cfg, seed,
                                        "certificate", rep)


def cmd_neumann(cfg, out, seed):
    instance = build_instance(cfg)
    params = _kernel_params(cfg, default_L=100000)
    M = int(cfg.get("M", 2048))
    eps = float(cfg.get("eps", 1 / 20))
    grid = discretize(instance, M, "riemannian")
    sub = fourier_subspace(grid, eps, params)
    zeta = sub.project(grid.labels.astype(complex))
    cert = neumann_certificate(grid, zeta, eps, params,
                               max_terms=int(cfg.get("max_terms", 512)),
                               tol=float(cfg.get("tol", 1e-10)))
    rep = _geometry_summary(instance, eps, float(cfg.get("delta", 19 / 20)))
    return _write_certificate_artifacts(out, grid, cert, params, cfg, seed,
                                        "neumann", rep)


def cmd_dynamics(cfg, out, seed):
    instance = build_instance(cfg)
    params = _kernel_params(cfg)
    M = int(cfg.get("M", 400))
    grid = discretize(instance, M, cfg.get("weighting", "uniform_t"))
    K = assemble_kernel(grid, params)
    evals, _, _ = weighted_operator_eigs(K, grid)
    tau = float(cfg.get("tau_factor", 0.5)) / evals[-1]
    iters = int(cfg.get("iterations", 1000))
    mode = cfg.get("zeta0", "labels")
    if mode == "labels":
        zeta0 = -grid.labels
    elif mode == "sampled":
        net = NetworkParams(int(cfg.get("net_width", 1024)), params.depth,
                            instance.dim, seed=seed)
        zeta0 = sampled_zeta0(net, grid).zeta0
    else:
        raise ConfigError("zeta0 must be 'labels' or 'sampled'")
    res = nominal_evolve(grid, K, zeta0, tau, iters, monotone=True)
    rows = []
    for k in range(iters + 1):
        f = grid.labels + res.trajectory[k]
        ok, margin = separation_check(f, grid.labels)
        rows.append((k, res.norms[k], margin, ok))
    path = out / "dynamics.csv"
    write_csv(path, ["iter", "error_norm", "margin", "separated"], rows)
    write_sidecar(path, "dynamics", cfg, seed)
    return [path]


def cmd_ntk_compare(cfg, out, seed):
    cfg.setdefault("geometry", "fig1_like")
    cfg.setdefault("samples", 256)
    instance = build_instance(cfg)
    params = _kernel_params(cfg, default_L=4)
    widths = cfg.get("widths", "128,512,2048")
    widths = [int(w) for w in str(widths).split(",")]
    n_seeds = int(cfg.get("n_seeds", 10))
    n_pts = int(cfg.get("grid_points", 16))
    grid = discretize(instance, max(16, n_pts), "uniform_t")
    step = max(1, grid.size // n_pts)
    pts = grid.points[::step][:n_pts]
    angles = np.arccos(np.clip(pts @ pts.T, -1.0, 1.0))
    np.fill_diagonal(angles, 0.0)
    from .kernel import skeleton
    closed = skeleton(angles.ravel(), params).reshape(angles.shape)
    rows = []
    for width in widths:
        for s in range(n_seeds):
            net = NetworkParams(width, params.depth, instance.dim,
                                seed=seed + s)
            gram = empirical_ntk_gram(net, pts)
            target = closed * (width / params.width)
            sup_rel = float(np.max(np.abs(gram - target))
                            / (width * params.depth / 2.0))
            rows.append((width, seed + s, sup_rel))
    path = out / "ntk_compare.csv"
    write_csv(path, ["n", "seed", "sup_rel_err"], rows)
    write_sidecar(path, "ntk-compare", cfg, seed)
    return [path]


def cmd_clover_sweep(cfg, out, seed):
    params = _kernel_params(cfg)
    M = int(cfg.get("M", 200))
    eps = float(cfg.get("eps", 1 / 20))
    delta = float(cfg.get("delta", 19 / 20))
    samples = int(cfg.get("samples", 1024))
    rows = []
    for k in (4, 3, 2, 1):
        opts = {kk: cfg[kk] for kk in ("delta_sep", "scale") if kk in cfg}
        inst = builtin_geometry(f"clover{k}", samples=samples, **opts)
        cn = clover_number(inst, eps, delta)
        grid = discretize(inst, M, cfg.get("weighting", "uniform_t"))
        K = assemble_kernel(grid, params)
        cert = solve_certificate_pinv(K, grid)
        rows.append((k, cn, cert.norm, cert.residual_norm, cert.max_abs))
    path = out / "clover_sweep.csv"
    write_csv(path, ["k", "clover", "cert_norm", "residual_norm", "max_abs_g"],
              rows)
    write_sidecar(path, "clover-sweep", cfg, seed)
    return [path]


def cmd_depth_sweep(cfg, out, seed):
    cfg.setdefault("geometry", "fig1_like")
    instance = build_instance(cfg)
    M = int(cfg.get("M", 200))
    depths = cfg.get("depths", "10,25,50,100")
    depths = [int(d) for d in str(depths).split(",")]
    weighting = cfg.get("weighting", "uniform_t")
    grid = discretize(instance, M, weighting)
    rows = []
    maxima = {}
    for L in depths:
        params = KernelParams(L, float(cfg.get("n", 2.0)))
        K = assemble_kernel(grid, params)
        cert = solve_certificate_pinv(K, grid)
        maxima[L] = cert.max_abs
        for comp, t, s, g in zip(grid.labels.astype(int), grid.t_params,
                                 grid.arclengths, cert.values):
            rows.append((L, comp, t, s, g))
    path = out / "depth_sweep.csv"
    write_csv(path, ["L", "component", "t", "s", "g"], rows)
    write_sidecar(path, "depth-sweep", cfg, seed)
    spath = out / "depth_sweep_summary.json"
    spath.write_text(json.dumps({"max_abs_g": {str(k): v for k, v in
                                               maxima.items()}},
                                indent=2, sort_keys=True) + "\n")
    write_sidecar(spath, "depth-sweep", cfg, seed)
    return [path, spath]


COMMANDS = {
    "geometry": cmd_geometry,
    "kernel-table": cmd_kernel_table,
    "certificate": cmd_certificate,
    "neumann": cmd_neumann,
    "dynamics": cmd_dynamics,
    "ntk-compare": cmd_ntk_compare,
    "clover-sweep": cmd_clover_sweep,
    "depth-sweep": cmd_depth_sweep,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="curventk",
        description="Kernel/geometry/certificate experiments on curve pairs")
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", default=None, help="flat key=value file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--set", action="append", default=[], dest="sets",
                        metavar="KEY=VALUE", help="config override")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.sets)
        validate_keys(args.subcommand, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        paths = COMMANDS[args.subcommand](cfg, out, args.seed)
    except (ConfigError, ConfigurationError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CurventkError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
