"""Command-line interface: noise, denoise, metrics, bench, samples."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .image import Image, clip_to_range, load_image, save_image, to_grayscale
from .metrics import score
from .noise import NoiseSpec, contaminate, relative_noise_level, spawn_seed
from .pipeline import (
    DenoiseParams,
    contaminate_calibrated,
    load_config,
    run_benchmark,
    denoise_image,
)
from .samples import SAMPLE_BUILDERS, sample_image


def _load_gray(path: str) -> Image:
    img = load_image(path)
    if not isinstance(img, Image):
        img = to_grayscale(img)
    return img


def _cmd_noise(args) -> int:
    clean = _load_gray(args.input)
    if args.spec:
        spec = NoiseSpec.from_text(Path(args.spec).read_text())
        noisy = contaminate(clean, spec)
        realized = relative_noise_level(clean, noisy)
    else:
        if args.family is None or args.k is None:
            print("noise: provide --family and --k, or --spec", file=sys.stderr)
            return 2
        spec, noisy, realized = contaminate_calibrated(
            clean, args.family, args.k, seed=args.seed
        )
    save_image(noisy, args.out)
    if args.emit_spec:
        Path(args.emit_spec).write_text(spec.to_text())
    print(f"wrote {args.out} (family={spec.family}, realized k={realized:.2f}%)")
    return 0


def _cmd_denoise(args) -> int:
    noisy = _load_gray(args.input)
    params = DenoiseParams(
        rho=args.rho,
        delta=args.delta,
        eigvecs=args.eigvecs,
        solver=args.solver,
        geodesic_method=(
            "per_source_shortest_path" if args.geodesic == "dijkstra" else "floyd"
        ),
        square_distances=args.gram == "squared",
        projection=args.projection,
    )
    result = denoise_image(noisy, params)
    save_image(clip_to_range(result.image), args.out)
    print(
        f"wrote {args.out} (L requested={result.l_requested}, "
        f"effective={result.l_effective}, solver={result.solver_used})"
    )
    return 0


def _cmd_metrics(args) -> int:
    ref = _load_gray(args.ref)
    test = _load_gray(args.test)
    rep = score(ref, test)
    psnr_txt = "inf" if rep.psnr_db == float("inf") else f"{rep.psnr_db:.4f}"
    if args.format == "csv":
        print(f"{psnr_txt},{rep.ssim:.6f},{rep.rmse:.6f}")
    else:
        print(f"psnr_db={psnr_txt} ssim={rep.ssim:.6f} rmse={rep.rmse:.6f}")
    return 0


def _cmd_bench(args) -> int:
    config = load_config(args.config)
    out = args.out or config.output
    if not out:
        print("bench: provide --out or an 'output' key in the config", file=sys.stderr)
        return 2
    results = run_benchmark(config, out, workers=args.workers)
    failures = sum(1 for r in results if r.status != "ok")
    print(f"wrote {out} ({len(results)} rows, {failures} failed cells)")
    print(f"wrote {Path(out).with_suffix('.md')} and PSNR/SSIM figures")
    return 1 if failures else 0


def _cmd_samples(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in sorted(SAMPLE_BUILDERS):
        path = out_dir / f"{name}.pgm"
        save_image(sample_image(name), str(path))
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geodenoise",
        description="Patch-graph spectral image denoising, noise calibration, and benchmarking.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log pipeline details")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("noise", help="contaminate an image with calibrated noise")
    p.add_argument("--input", required=True, help="clean input image (PGM or PNG)")
    p.add_argument("--family", choices=["gaussian", "salt_pepper", "speckle", "poisson", "uniform"])
    p.add_argument("--k", type=float, help="target relative noise level in percent")
    p.add_argument("--seed", type=int, default=0, help="master seed (64-bit unsigned)")
    p.add_argument("--out", required=True, help="output PGM path")
    p.add_argument("--emit-spec", help="write the calibrated noise spec to this path")
    p.add_argument("--spec", help="apply a previously emitted noise spec instead of calibrating")
    p.set_defaults(func=_cmd_noise)

    p = sub.add_parser("denoise", help="denoise an image")
    p.add_argument("--input", required=True)
    p.add_argument("--rho", type=int, required=True, help="odd patch length")
    p.add_argument("--delta", type=int, required=True, help="nearest-neighbor count")
    p.add_argument("--eigvecs", type=int, required=True, help="eigenvector budget L")
    p.add_argument("--solver", choices=["dense", "krylov"], default="dense")
    p.add_argument("--geodesic", choices=["dijkstra", "floyd"], default="dijkstra")
    p.add_argument("--gram", choices=["squared", "literal"], default="squared")
    p.add_argument("--projection", choices=["smooth", "patch_subspace"], default="smooth")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_denoise)

    p = sub.add_parser("metrics", help="score a test image against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--format", choices=["csv", "keyvalue"], default="keyvalue")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("bench", help="run a benchmark grid from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output CSV path (markdown + figures land beside it)")
    p.add_argument("--workers", type=int, help="parallel grid cells (default from config)")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("samples", help="write the bundled sample images as PGM files")
    p.add_argument("--out-dir", default="samples", help="destination directory")
    p.set_defaults(func=_cmd_samples)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
