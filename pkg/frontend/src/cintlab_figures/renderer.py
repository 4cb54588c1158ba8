"""Five-panel summary figure for one scenario output directory.

Consumes only the documented files (manifest.json, image_<method>.csv,
twopoint.bin) and writes a raster figure:

    top row:    conventional image | two-point surface
    bottom row: phase retrieval | sqrt-correlation (red) + spectral (blue) | optimization

Reflector locations from the manifest are marked with red crosses on the
abscissa. Rendering never modifies the scenario directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import struct
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

__all__ = ["FigureSpec", "render", "main"]

DEFAULT_PANELS = ("sar", "surface", "pr", "ci+sp", "op")
MAX_SURFACE_SIDE = 512


@dataclass
class FigureSpec:
    scenario_dir: str
    out_path: str
    panels: tuple = DEFAULT_PANELS
    dpi: int = 150
    markers: list = field(default_factory=list)   # filled from the manifest


def _require(path: str) -> str:
    if not os.path.exists(path):
        raise FileNotFoundError(f"missing scenario input: {path}")
    return path


def read_image_csv(path: str):
    """Columns y, re, im, abs with one header line."""
    ys, re, im = [], [], []
    with open(_require(path), newline="") as f:
        reader = csv.reader(f)
        next(reader, None)
        for row in reader:
            if not row:
                continue
            ys.append(float(row[0]))
            re.append(float(row[1]))
            im.append(float(row[2]))
    y = np.array(ys)
    v = np.array(re) + 1j * np.array(im)
    if np.all(np.array(im) == 0.0):
        v = np.array(re)
    return y, v


def read_twopoint_bin(path: str):
    """Magic 'C2PT', u32 version, u64 G, f64 X_used, then G*G c16le."""
    with open(_require(path), "rb") as f:
        magic = f.read(4)
        if magic != b"C2PT":
            raise ValueError(f"bad two-point magic in {path}: {magic!r}")
        version, G, x_used = struct.unpack("<IQd", f.read(20))
        if version != 1:
            raise ValueError(f"unsupported two-point version {version}")
        data = np.frombuffer(f.read(), dtype="<c16")
    if data.size != G * G:
        raise ValueError(f"two-point payload truncated in {path}")
    return data.reshape(G, G), x_used


def _downsample(surface: np.ndarray, limit: int = MAX_SURFACE_SIDE) -> np.ndarray:
    step = max(1, int(np.ceil(surface.shape[0] / limit)))
    return surface[::step, ::step]


def _line_panel(ax, path, title, color=None, label=None):
    y, v = read_image_csv(path)
    if len(y) == 0:
        warnings.warn(f"empty image file: {path}", stacklevel=2)
        ax.set_title(f"{title} (empty)")
        return
    vals = np.abs(v) if np.iscomplexobj(v) else v
    ax.plot(y, vals, color=color, lw=0.9, label=label)
    ax.set_title(title)
    ax.set_xlabel("cross-range [wavelengths]")
    ax.set_xlim(y[0], y[-1])


def _mark_reflectors(ax, markers):
    if not markers:
        return
    y0, y1 = ax.get_ylim()
    ax.plot(markers, [y0 + 0.0 * (y1 - y0)] * len(markers), "rx",
            markersize=6, clip_on=False, zorder=5)


def render(spec: FigureSpec) -> dict:
    """Write the five-panel figure; returns {'path', 'panels'}."""
    d = spec.scenario_dir
    manifest = json.loads(open(_require(os.path.join(d, "manifest.json"))).read())
    markers = spec.markers or [z for z, _ in manifest["scene"]["reflectors"]]
    domain = manifest["scene"]["domain"]

    fig = plt.figure(figsize=(12.5, 7.0))
    grid = fig.add_gridspec(2, 6, hspace=0.45, wspace=0.8)
    axes = {
        "sar": fig.add_subplot(grid[0, 0:3]),
        "surface": fig.add_subplot(grid[0, 3:6]),
        "pr": fig.add_subplot(grid[1, 0:2]),
        "ci+sp": fig.add_subplot(grid[1, 2:4]),
        "op": fig.add_subplot(grid[1, 4:6]),
    }
    n_panels = 0

    if "sar" in spec.panels:
        ax = axes["sar"]
        _line_panel(ax, os.path.join(d, "image_sar.csv"), "conventional image")
        _mark_reflectors(ax, markers)
        n_panels += 1

    if "surface" in spec.panels:
        ax = axes["surface"]
        dense, _ = read_twopoint_bin(os.path.join(d, "twopoint.bin"))
        surf = _downsample(np.abs(dense))
        extent = [domain[0], domain[1], domain[1], domain[0]]
        im = ax.imshow(surf, extent=extent, aspect="equal", cmap="viridis")
        ax.invert_yaxis()
        ax.set_title("two-point surface")
        ax.set_xlabel("y' [wavelengths]")
        ax.set_ylabel("y [wavelengths]")
        fig.colorbar(im, ax=ax, fraction=0.046)
        n_panels += 1

    if "pr" in spec.panels:
        ax = axes["pr"]
        _line_panel(ax, os.path.join(d, "image_pr.csv"), "phase retrieval")
        _mark_reflectors(ax, markers)
        n_panels += 1

    if "ci+sp" in spec.panels:
        ax = axes["ci+sp"]
        _line_panel(ax, os.path.join(d, "image_ci.csv"),
                    "sqrt-correlation (red) / spectral (blue)",
                    color="red", label="ci")
        y, v = read_image_csv(os.path.join(d, "image_sp.csv"))
        if len(y):
            ax.plot(y, np.real(v), color="blue", lw=0.9, label="sp")
        _mark_reflectors(ax, markers)
        n_panels += 1

    if "op" in spec.panels:
        ax = axes["op"]
        _line_panel(ax, os.path.join(d, "image_op.csv"), "optimization")
        _mark_reflectors(ax, markers)
        n_panels += 1

    for name, ax in axes.items():
        if name not in spec.panels:
            ax.set_visible(False)

    fig.suptitle(manifest.get("scenario", os.path.basename(d)))
    fig.savefig(spec.out_path, dpi=spec.dpi)
    plt.close(fig)
    return {"path": spec.out_path, "panels": n_panels}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cintlab-figures",
        description="Render the five-panel summary figure for a scenario "
                    "output directory.")
    parser.add_argument("--scenario-dir", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--dpi", type=int, default=150)
    args = parser.parse_args(argv)
    spec = FigureSpec(scenario_dir=args.scenario_dir, out_path=args.out,
                      dpi=args.dpi)
    try:
        info = render(spec)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(info["path"])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
