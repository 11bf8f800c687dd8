"""End-to-end denoising pipeline and the reproducible benchmark grid.

The denoiser chains: extract patches -> nearest-neighbor graph -> geodesic
distances -> double-centered Gramian -> leading eigenpairs -> eigenvector
filtering of the patch set -> Shepard merge -> clip. Everything is
deterministic for fixed inputs, so benchmark output files are byte-identical
across reruns with the same configuration and seed.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import report
from .graph import all_pairs_geodesics, build_knn_graph
from .image import Image, load_image
from .metrics import psnr, ssim
from .noise import (
    NoiseSpec,
    calibrate_noise,
    contaminate,
    relative_noise_level,
    spawn_seed,
)
from .patches import extract_patches, merge_patches
from .spectral import (
    MATERIALIZE_MAX_ORDER,
    CenteredGramianOperator,
    double_center,
    smooth_patches,
    project_patches,
    build_patch_basis,
    top_eigenpairs,
)

logger = logging.getLogger(__name__)

# Dense eigensolver is the default up to this Gramian order.
DENSE_SOLVER_MAX_ORDER = 4096

PROJECTIONS = ("smooth", "patch_subspace")

# noise field stream index used for the single applied contamination draw,
# distinct from calibration draw indices 0..draws-1
_APPLY_DRAW = 0xA110


@dataclass(frozen=True)
class DenoiseParams:
    """Tuning knobs of one denoising run."""

    rho: int  # odd patch length
    delta: int  # nearest-neighbor count
    eigvecs: int  # eigenvector budget L
    solver: str = "auto"  # auto | dense | iterative_krylov
    geodesic_method: str = "per_source_shortest_path"
    square_distances: bool = True  # Gramian mode: squared (default) or literal
    projection: str = "smooth"  # smooth | patch_subspace

    def __post_init__(self):
        if self.rho < 3 or self.rho % 2 == 0:
            raise ValueError(f"rho must be odd and >= 3, got {self.rho}")
        if self.delta < 1:
            raise ValueError(f"delta must be >= 1, got {self.delta}")
        if self.eigvecs < 1:
            raise ValueError(f"eigvecs must be >= 1, got {self.eigvecs}")
        if self.projection not in PROJECTIONS:
            raise ValueError(f"unknown projection {self.projection!r}")


# (delta, rho, L) schedule keyed by relative noise level percent
_PARAM_TABLE = {30: (5, 7, 200), 40: (10, 9, 100), 50: (15, 11, 50)}


def default_params(k: float) -> DenoiseParams:
    """Parameter schedule per noise level; off-schedule k snaps to the nearest level."""
    levels = sorted(_PARAM_TABLE)
    nearest = min(levels, key=lambda lv: (abs(lv - k), lv))
    delta, rho, eigvecs = _PARAM_TABLE[nearest]
    return DenoiseParams(rho=rho, delta=delta, eigvecs=eigvecs)


@dataclass(frozen=True)
class DenoiseResult:
    image: Image
    l_requested: int
    l_effective: int
    solver_used: str


def _resolve_solver(solver: str, order: int) -> str:
    if solver == "auto":
        return "dense" if order <= DENSE_SOLVER_MAX_ORDER else "iterative_krylov"
    if solver in ("dense", "iterative_krylov", "krylov"):
        return "iterative_krylov" if solver == "krylov" else solver
    raise ValueError(f"unknown solver {solver!r}")


def denoise_image(noisy: Image, params: DenoiseParams) -> DenoiseResult:
    """Denoise ``noisy`` and report the effective eigenvector budget."""
    order = noisy.height * noisy.width
    if params.delta >= order:
        raise ValueError(f"delta must be < {order} for a {noisy.height}x{noisy.width} image")

    patches = extract_patches(noisy, params.rho)
    graph = build_knn_graph(patches, params.delta)
    distances = all_pairs_geodesics(graph, params.geodesic_method)

    l_requested = params.eigvecs
    l_eig = min(l_requested, order)
    if l_eig < l_requested:
        logger.warning(
            "eigenvector budget L=%d exceeds vertex count %d; clamping to %d",
            l_requested, order, l_eig,
        )

    solver = _resolve_solver(params.solver, order)
    if order <= MATERIALIZE_MAX_ORDER:
        gram = double_center(distances, params.square_distances)
    else:
        gram = CenteredGramianOperator(distances, params.square_distances)
        if solver == "dense":
            raise ValueError(
                f"dense solver cannot run matrix-free at order {order}; use iterative_krylov"
            )
    spectrum = top_eigenpairs(gram, l_eig, solver=solver)

    if params.projection == "smooth":
        denoised = smooth_patches(patches, spectrum)
        l_effective = spectrum.count
    else:
        spectrum = build_patch_basis(patches, spectrum)
        if spectrum.basis_size < l_eig:
            logger.warning(
                "patch basis kept %d of %d directions (patch space is %d-dimensional)",
                spectrum.basis_size, l_eig, params.rho**2,
            )
        denoised = project_patches(patches, spectrum)
        l_effective = spectrum.basis_size

    merged = merge_patches(denoised, clip=True)
    return DenoiseResult(
        image=merged,
        l_requested=l_requested,
        l_effective=l_effective,
        solver_used=solver,
    )


def denoise(noisy: Image, params: DenoiseParams) -> Image:
    """Denoised image only; see :func:`denoise_image` for the full result record."""
    return denoise_image(noisy, params).image


# ---------------------------------------------------------------------------
# Benchmark harness
# ---------------------------------------------------------------------------

CSV_COLUMNS = [
    "image",
    "family",
    "k_target_pct",
    "k_realized_pct",
    "rho",
    "delta",
    "L_requested",
    "L_effective",
    "psnr_db",
    "ssim",
    "runtime_ms",
    "seed",
    "status",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """One benchmark grid: images x families x noise levels."""

    images: tuple[str, ...]
    families: tuple[str, ...]
    k_levels: tuple[float, ...]
    seed: int = 0
    draws: int = 5
    workers: int = 1
    record_runtime: bool = False  # measured timings break byte-identical reruns
    output: str | None = None
    params_by_k: dict = field(default_factory=dict)  # level -> DenoiseParams

    def __post_init__(self):
        if not self.images or not self.families or not self.k_levels:
            raise ValueError("config needs at least one image, family, and k level")

    def params_for(self, k: float) -> DenoiseParams:
        return self.params_by_k.get(k, default_params(k))


def _parse_flat_keyvalues(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (expected 'key = value'): {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        out[key] = val
    return out


_PARAM_KEYS = {
    "rho": int,
    "delta": int,
    "eigvecs": int,
    "solver": str,
    "geodesic": str,
    "gram": str,
    "projection": str,
}


def load_config(path: str) -> ExperimentConfig:
    """Parse the flat key-value benchmark configuration file.

    Recognized keys: images, families, k_levels (comma-separated), seed,
    draws, workers, record_runtime, output, and per-level overrides of the
    form ``params.<k>.<rho|delta|eigvecs|solver|geodesic|gram|projection>``.
    """
    fields = _parse_flat_keyvalues(Path(path).read_text())

    def split_list(key: str) -> list[str]:
        if key not in fields:
            raise ValueError(f"config is missing required key {key!r}")
        return [item.strip() for item in fields.pop(key).split(",") if item.strip()]

    images = tuple(split_list("images"))
    families = tuple(split_list("families"))
    k_levels = tuple(float(k) for k in split_list("k_levels"))
    seed = int(fields.pop("seed", "0"))
    draws = int(fields.pop("draws", "5"))
    workers = int(fields.pop("workers", "1"))
    record_runtime = fields.pop("record_runtime", "false").lower() in ("1", "true", "yes")
    output = fields.pop("output", None)

    overrides: dict[float, dict] = {}
    for key in list(fields):
        parts = key.split(".")
        if len(parts) == 3 and parts[0] == "params":
            level = float(parts[1])
            name = parts[2]
            if name not in _PARAM_KEYS:
                raise ValueError(f"unknown parameter override {key!r}")
            overrides.setdefault(level, {})[name] = _PARAM_KEYS[name](fields.pop(key))
    if fields:
        raise ValueError(f"unrecognized config keys: {sorted(fields)}")

    geodesic_names = {
        "dijkstra": "per_source_shortest_path",
        "per_source_shortest_path": "per_source_shortest_path",
        "floyd": "floyd",
    }
    params_by_k = {}
    for level, kv in overrides.items():
        base = default_params(level)
        geodesic = kv.get("geodesic", "per_source_shortest_path")
        if geodesic not in geodesic_names:
            raise ValueError(f"unknown geodesic method {geodesic!r} (want dijkstra or floyd)")
        gram = kv.get("gram", "squared")
        if gram not in ("squared", "literal"):
            raise ValueError(f"unknown gram mode {gram!r} (want squared or literal)")
        params_by_k[level] = replace(
            base,
            rho=kv.get("rho", base.rho),
            delta=kv.get("delta", base.delta),
            eigvecs=kv.get("eigvecs", base.eigvecs),
            solver=kv.get("solver", base.solver),
            geodesic_method=geodesic_names[geodesic],
            square_distances=gram == "squared",
            projection=kv.get("projection", base.projection),
        )

    return ExperimentConfig(
        images=images,
        families=families,
        k_levels=k_levels,
        seed=seed,
        draws=draws,
        workers=workers,
        record_runtime=record_runtime,
        output=output,
        params_by_k=params_by_k,
    )


def _stream_key(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def cell_seed(master: int, image_name: str, family: str, k: float) -> int:
    """Stable per-cell sub-seed; independent of grid ordering and worker count."""
    return spawn_seed(master, _stream_key(image_name), _stream_key(family), int(round(k * 100)))


def contaminate_calibrated(
    clean: Image, family: str, k: float, seed: int, draws: int = 5
) -> tuple[NoiseSpec, Image, float]:
    """Calibrate a family to level ``k`` and apply one fresh draw.

    Returns (spec, noisy image, realized level of the applied draw). The
    draw uses a stream index disjoint from the calibration draws, and the
    returned spec carries that stream's seed, so ``contaminate(clean, spec)``
    reproduces the returned image exactly.
    """
    calibrated = calibrate_noise(clean, family, k, seed=seed, draws=draws)
    applied = calibrated.with_seed(spawn_seed(calibrated.seed, _APPLY_DRAW))
    noisy = contaminate(clean, applied)
    return applied, noisy, relative_noise_level(clean, noisy)


@dataclass
class CellResult:
    image: str
    family: str
    k_target: float
    k_realized: float | None
    params: DenoiseParams
    l_effective: int | None
    psnr_db: float | None
    ssim: float | None
    runtime_ms: int
    seed: int
    status: str


def _run_cell(
    clean: Image, image_name: str, family: str, k: float, config: ExperimentConfig
) -> CellResult:
    params = config.params_for(k)
    seed = cell_seed(config.seed, image_name, family, k)
    start = time.perf_counter()
    try:
        _, noisy, realized = contaminate_calibrated(clean, family, k, seed, config.draws)
        result = denoise_image(noisy, params)
        elapsed = int(round((time.perf_counter() - start) * 1000))
        return CellResult(
            image=image_name,
            family=family,
            k_target=k,
            k_realized=realized,
            params=params,
            l_effective=result.l_effective,
            psnr_db=psnr(clean, result.image),
            ssim=ssim(clean, result.image),
            runtime_ms=elapsed if config.record_runtime else 0,
            seed=seed,
            status="ok",
        )
    except Exception as exc:  # keep the grid alive; the row records the failure
        elapsed = int(round((time.perf_counter() - start) * 1000))
        reason = f"error: {type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
        logger.warning("cell (%s, %s, %g%%) failed: %s", image_name, family, k, reason)
        return CellResult(
            image=image_name,
            family=family,
            k_target=k,
            k_realized=None,
            params=params,
            l_effective=None,
            psnr_db=None,
            ssim=None,
            runtime_ms=elapsed if config.record_runtime else 0,
            seed=seed,
            status=reason,
        )


def _fmt(value, spec: str) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and np.isinf(value):
        return "inf"
    return format(value, spec)


def result_row(res: CellResult) -> list[str]:
    return [
        res.image,
        res.family,
        _fmt(res.k_target, "g"),
        _fmt(res.k_realized, ".4f"),
        str(res.params.rho),
        str(res.params.delta),
        str(res.params.eigvecs),
        _fmt(res.l_effective, "d"),
        _fmt(res.psnr_db, ".4f"),
        _fmt(res.ssim, ".6f"),
        str(res.runtime_ms),
        str(res.seed),
        res.status,
    ]


def run_benchmark(config: ExperimentConfig, out_csv: str, workers: int | None = None) -> list[CellResult]:
    """Run the full grid, then write the CSV, Markdown pivot, and figures.

    Cells execute concurrently up to the worker count, but rows are always
    written in (image, family, k) configuration order, so output files do
    not depend on completion order.
    """
    workers = workers or config.workers
    clean_images: dict[str, Image] = {}
    for path in config.images:
        img = load_image(path)
        if not isinstance(img, Image):
            raise ValueError(f"benchmark images must be grayscale: {path}")
        clean_images[path] = img

    cells = [
        (path, Path(path).stem, family, k)
        for path in config.images
        for family in config.families
        for k in config.k_levels
    ]

    def work(cell):
        path, name, family, k = cell
        return _run_cell(clean_images[path], name, family, k, config)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, cells))
    else:
        results = [work(cell) for cell in cells]

    out_path = Path(out_csv)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for res in results:
            writer.writerow(result_row(res))

    report.write_markdown_table(results, out_path.with_suffix(".md"))
    report.render_figures(results, out_path)
    return results
