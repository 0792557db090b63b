"""Render curventk CSV artifacts into static figures.

Three kinds are supported, one per CSV schema: the certificate graphed
over the 3D-projected curves, certificate norm against the clover number,
and per-depth log-magnitude of the certificate along arc length.  Inputs
are validated against the expected headers before anything is drawn;
nothing is written on schema errors.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("certificate-curve", "norm-vs-clover", "depth-magnitude")

_SCHEMAS = {
    "certificate-curve": ["component", "t", "s", "g", "zeta", "residual"],
    "norm-vs-clover": ["k", "clover", "cert_norm", "residual_norm",
                       "max_abs_g"],
    "depth-magnitude": ["L", "component", "t", "s", "g"],
}
_CURVES_SCHEMA_PREFIX = ["component", "t", "x0"]


class SchemaError(ValueError):
    """Input CSV does not match the expected artifact schema."""


@dataclass(frozen=True)
class FigureJob:
    """One rendering request: inputs, kind, output path, style options."""

    kind: str
    inputs: tuple
    output: str
    scale: float = 0.3
    dpi: int = 150

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; "
                              f"pick from {KINDS}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")
        for p in self.inputs:
            if not Path(p).exists():
                raise SchemaError(f"input {p} does not exist")


def _read_csv(path, expected_header, prefix_ok=False):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file")
        if prefix_ok:
            if header[:len(expected_header)] != expected_header:
                raise SchemaError(
                    f"{path}: header {header[:4]}... does not start with "
                    f"{expected_header}")
        elif header != expected_header:
            raise SchemaError(f"{path}: header {header} != {expected_header}")
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    data = {}
    for j, name in enumerate(header):
        col = [row[j] for row in rows]
        try:
            data[name] = np.asarray(col, dtype=float)
        except ValueError:
            data[name] = np.asarray(col)
    return data


def _render_certificate_curve(job: FigureJob):
    cert = _read_csv(job.inputs[0], _SCHEMAS["certificate-curve"])
    if len(job.inputs) < 2:
        raise SchemaError("certificate-curve needs the curves CSV as the "
                          "second input")
    curves = _read_csv(job.inputs[1], _CURVES_SCHEMA_PREFIX, prefix_ok=True)
    dims = [k for k in curves if k.startswith("x")]
    fig = plt.figure(figsize=(7, 6))
    ax = fig.add_subplot(projection="3d")
    for sigma, color in ((1, "tab:red"), (-1, "tab:blue")):
        mask = curves["component"] == sigma
        if not np.any(mask):
            raise SchemaError(f"curves CSV lacks component {sigma}")
        pts = np.column_stack([curves[d][mask] for d in dims[:3]])
        order = np.argsort(curves["t"][mask])
        loop = np.append(order, order[0])
        ax.plot(*pts[loop].T, color=color, lw=1.2,
                label=f"curve {'+' if sigma > 0 else '-'}")
        cmask = cert["component"] == sigma
        if not np.any(cmask):
            raise SchemaError(f"certificate CSV lacks component {sigma}")
        tq = cert["t"][cmask]
        g = cert["g"][cmask]
        base = np.column_stack([
            np.interp(tq, curves["t"][mask][order], pts[order, i],
                      period=1.0) for i in range(3)])
        radial = base / np.maximum(np.linalg.norm(base, axis=1,
                                                  keepdims=True), 1e-12)
        offset = base + job.scale * g[:, None] * radial
        ax.plot(*offset.T, color=color, lw=0.8, alpha=0.7, ls="--")
    ax.set_xlabel("x0")
    ax.set_ylabel("x1")
    ax.set_zlabel("x2")
    ax.set_title(f"certificate over the curves (radial offsets x {job.scale})")
    ax.legend(loc="upper left", fontsize=8)
    return fig


def _render_norm_vs_clover(job: FigureJob):
    data = _read_csv(job.inputs[0], _SCHEMAS["norm-vs-clover"])
    fig, ax = plt.subplots(figsize=(5, 4))
    order = np.argsort(data["clover"])
    x, y = data["clover"][order], data["cert_norm"][order]
    ax.plot(x, y, "o-", color="tab:purple")
    ax.set_xlabel("clover number")
    ax.set_ylabel("certificate norm")
    ax.set_title("certificate norm vs clover number")
    ax.set_xticks(sorted(set(int(v) for v in x)))
    ax.grid(alpha=0.3)
    return fig


def _render_depth_magnitude(job: FigureJob):
    data = _read_csv(job.inputs[0], _SCHEMAS["depth-magnitude"])
    depths = sorted(set(int(v) for v in data["L"]))
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    floor = 1e-300
    for ax, sigma, title in ((axes[0], 1, "component +"),
                             (axes[1], -1, "component -")):
        for L in depths:
            mask = (data["component"] == sigma) & (data["L"] == L)
            if not np.any(mask):
                raise SchemaError(f"depth sweep lacks component {sigma} "
                                  f"at depth {L}")
            s = data["s"][mask]
            g = np.abs(data["g"][mask]) + floor
            order = np.argsort(s)
            ax.plot(s[order], np.log10(g[order]), lw=1.0, label=f"L={L}")
        ax.set_xlabel("arc length")
        ax.set_title(title)
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("log10 |certificate|")
    axes[1].legend(fontsize=8)
    fig.suptitle("certificate magnitude by depth")
    return fig


_RENDERERS = {
    "certificate-curve": _render_certificate_curve,
    "norm-vs-clover": _render_norm_vs_clover,
    "depth-magnitude": _render_depth_magnitude,
}


def render(job: FigureJob) -> Path:
    """Render one job; returns the output path.

    Inputs are parsed and validated before the figure file is created, so
    a schema failure leaves no output behind.
    """
    fig = _RENDERERS[job.kind](job)
    out = Path(job.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=job.dpi, bbox_inches="tight")
    plt.close(fig)
    if not out.exists() or out.stat().st_size == 0:
        raise RuntimeError(f"failed to write {out}")
    return out
