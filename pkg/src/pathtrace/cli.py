"""Batch renderer command line.

Exit codes: 0 success, 1 runtime error, 2 usage error. The summary line
goes to stderr so `--out -` can stream the PPM on stdout.
"""

import argparse
import os
import sys
import tempfile
import time

from .integrators import INTEGRATORS, IntegratorConfig, render_frame
from .scene_io import load_scene, ppm_bytes, resolve
from .scene import compile_scene


def build_parser():
    p = argparse.ArgumentParser(
        prog="pathtrace",
        description="Render a scene description to a binary PPM image.")
    p.add_argument("--scene", required=True, help="scene description file")
    p.add_argument("--out", required=True, help="output PPM path, or - for stdout")
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--spp", type=int, default=16, help="samples per pixel")
    p.add_argument("--integrator", choices=INTEGRATORS, default="pt")
    p.add_argument("--max-depth", type=int, default=8)
    p.add_argument("--ao-length", type=float, default=1e30,
                   help="maximum occlusion ray length")
    p.add_argument("--ao-rays", type=int, default=16,
                   help="occlusion rays per sample")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", default="1",
                   help="worker thread count, or auto")
    p.add_argument("--build-quality", choices=("fast", "balanced"), default="balanced")
    p.add_argument("--no-gamma", action="store_true",
                   help="skip the 2.2 display encode")
    p.add_argument("--pixel-centers", action="store_true",
                   help="sample at exact pixel grid points instead of jittering")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2

    try:
        if args.workers == "auto":
            workers = os.cpu_count() or 1
        else:
            workers = int(args.workers)

        t0 = time.perf_counter()
        desc = load_scene(args.scene)
        scene = compile_scene(desc, quality=args.build_quality)
        t1 = time.perf_counter()

        cfg = IntegratorConfig(
            max_depth=args.max_depth,
            ao_ray_count=args.ao_rays,
            ao_max_length=args.ao_length,
        )
        acc, stats = render_frame(
            scene, args.width, args.height, args.spp,
            integrator=args.integrator, seed=args.seed, workers=workers,
            cfg=cfg, jitter=not args.pixel_centers, return_stats=True)
        t2 = time.perf_counter()

        # eye shading reproduces raw byte output; the others display-encode
        gamma = (args.integrator != "eye") and not args.no_gamma
        payload = ppm_bytes(resolve(acc, gamma_encode=gamma))

        if args.out == "-":
            sys.stdout.buffer.write(payload)
            sys.stdout.buffer.flush()
        else:
            # stage next to the target so a failed render never leaves output
            out_dir = os.path.dirname(os.path.abspath(args.out))
            fd, tmp = tempfile.mkstemp(dir=out_dir, suffix=".ppm.part")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(payload)
                os.replace(tmp, args.out)
            except BaseException:
                os.unlink(tmp)
                raise

        build_ms = (t1 - t0) * 1e3
        render_s = t2 - t1
        rays_per_s = stats["rays"] / render_s if render_s > 0 else float("inf")
        print(f"{args.width}x{args.height} {args.spp}spp {args.integrator} | "
              f"build {build_ms:.1f} ms | render {render_s * 1e3:.1f} ms | "
              f"{rays_per_s:.3g} rays/s", file=sys.stderr)
        return 0
    except (OSError, ValueError, LookupError) as exc:
        print(f"pathtrace: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
