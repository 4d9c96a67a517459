"""Study runner: renders a scene at several settings, writes CSV metrics
and matplotlib figures next to them.

Studies:
    convergence  error versus sample count for both path tracers against a
                 converged reference, plus an image ladder
    ao           mean ambient-occlusion brightness versus ray length
"""

import argparse
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .integrators import IntegratorConfig, render_frame
from .scene_io import load_scene, resolve
from .scene import compile_scene


def _mse(img, ref):
    d = img - ref
    return float(np.mean(d * d))


def convergence_study(scene, outdir, width, height, seed, spp_ladder, reference_spp,
                      workers):
    ref = render_frame(scene, width, height, reference_spp, integrator="pt-nee",
                       seed=seed + 1, workers=workers).mean()

    rows = []
    images = {}
    for integ in ("pt", "pt-nee"):
        for spp in spp_ladder:
            img = render_frame(scene, width, height, spp, integrator=integ,
                               seed=seed, workers=workers).mean()
            rows.append({"integrator": integ, "spp": spp, "mse": _mse(img, ref)})
            images[(integ, spp)] = img

    csv_path = os.path.join(outdir, "convergence.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["integrator", "spp", "mse"])
        writer.writeheader()
        writer.writerows(rows)

    fig, ax = plt.subplots(figsize=(5.5, 4))
    for integ, style in (("pt", "o-"), ("pt-nee", "s-")):
        pts = [(r["spp"], r["mse"]) for r in rows if r["integrator"] == integ]
        ax.loglog([p[0] for p in pts], [p[1] for p in pts], style, label=integ)
    anchor = next(r for r in rows if r["integrator"] == "pt" and r["spp"] == spp_ladder[0])
    guide = [anchor["mse"] * spp_ladder[0] / s for s in spp_ladder]
    ax.loglog(spp_ladder, guide, "k--", alpha=0.5, label="1/N")
    ax.set_xlabel("samples per pixel")
    ax.set_ylabel("MSE vs reference")
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(outdir, "convergence.png"), dpi=150)
    plt.close(fig)

    fig, axes = plt.subplots(2, len(spp_ladder), figsize=(2.2 * len(spp_ladder), 4.6))
    for col, spp in enumerate(spp_ladder):
        for row, integ in enumerate(("pt", "pt-nee")):
            ax = axes[row, col] if len(spp_ladder) > 1 else axes[row]
            ax.imshow(np.clip(images[(integ, spp)], 0, 1) ** (1 / 2.2))
            ax.set_title(f"{integ} {spp}spp", fontsize=8)
            ax.axis("off")
    fig.tight_layout()
    fig.savefig(os.path.join(outdir, "samples.png"), dpi=150)
    plt.close(fig)
    return csv_path


def ao_study(scene, outdir, width, height, seed, lengths, spp, workers):
    rows = []
    for length in lengths:
        cfg = IntegratorConfig(ao_ray_count=64, ao_max_length=length)
        img = render_frame(scene, width, height, spp, integrator="ao",
                           seed=seed, workers=workers, cfg=cfg).mean()
        rows.append({"ao_length": length, "mean_brightness": float(img.mean())})

    csv_path = os.path.join(outdir, "ao_lengths.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["ao_length", "mean_brightness"])
        writer.writeheader()
        writer.writerows(rows)

    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.semilogx([r["ao_length"] for r in rows],
                [r["mean_brightness"] for r in rows], "o-")
    ax.set_xlabel("max occlusion ray length")
    ax.set_ylabel("mean image brightness")
    fig.tight_layout()
    fig.savefig(os.path.join(outdir, "ao_lengths.png"), dpi=150)
    plt.close(fig)
    return csv_path


def build_parser():
    p = argparse.ArgumentParser(
        prog="pathtrace-report",
        description="Render comparison studies and write CSV plus figures.")
    p.add_argument("--scene", required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--study", choices=("convergence", "ao", "all"), default="all")
    p.add_argument("--width", type=int, default=96)
    p.add_argument("--height", type=int, default=96)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spp-ladder", type=int, nargs="+", default=[4, 16, 64, 256])
    p.add_argument("--reference-spp", type=int, default=2048)
    p.add_argument("--ao-lengths", type=float, nargs="+",
                   default=[0.05, 0.1, 0.3, 1.0, 2.0])
    p.add_argument("--ao-spp", type=int, default=4)
    p.add_argument("--workers", type=int, default=1)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        os.makedirs(args.outdir, exist_ok=True)
        scene = compile_scene(load_scene(args.scene))
        written = []
        if args.study in ("convergence", "all"):
            written.append(convergence_study(
                scene, args.outdir, args.width, args.height, args.seed,
                sorted(args.spp_ladder), args.reference_spp, args.workers))
        if args.study in ("ao", "all"):
            written.append(ao_study(
                scene, args.outdir, args.width, args.height, args.seed,
                sorted(args.ao_lengths), args.ao_spp, args.workers))
        for path in written:
            print(path, file=sys.stderr)
        return 0
    except (OSError, ValueError, LookupError) as exc:
        print(f"pathtrace-report: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
