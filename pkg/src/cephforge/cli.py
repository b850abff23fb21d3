"""Command-line surface: one subcommand per pipeline stage.

Exit codes: 0 success, 1 validation error (bad flags or inputs), 2 runtime
error.  Diagnostics go to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset, fileio, metrics
from .cephgeom import (
    Quadrant,
    QuadrantPatch,
    VirtualDetectorSpec,
    flip_horizontal,
    normalize_quadrant,
    pack_dual,
    patch_envelope,
    rebin_to_vd,
    split_quadrants,
    stitch_quadrants,
)
from .film import (
    ModifiedSigmoidParams,
    SigmoidParams,
    fit_sigmoid,
    load_film_params,
    save_cephalogram,
    save_film_params,
)
from .pipeline import Type1Config, produce_type2_dataset, synthesize_type1
from .projector import (
    AttenuationModel,
    ConeGeometry,
    DetectorGrid,
    load_integral_image,
    project_mip,
    project_orthogonal,
    project_perspective,
    save_integral_image,
)
from .volume import EnhanceParams, load_volume


class _ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the CLI contract reserves 2 for runtime
    # failures, so parsing problems are rethrown as validation errors.
    def error(self, message):
        raise _ValidationError(message)


# ---------------------------------------------------------------------------
# flag value parsers


def _parse_grid(text: str) -> DetectorGrid:
    """'512x512@0.5' or '512x512@0.5x0.73' -> DetectorGrid."""
    try:
        dims, _, sp = text.partition("@")
        nu, nv = (int(p) for p in dims.lower().split("x"))
        if sp:
            parts = sp.lower().split("x")
            su = float(parts[0])
            sv = float(parts[1]) if len(parts) > 1 else su
        else:
            su = sv = 0.5
        return DetectorGrid(nu, nv, su, sv)
    except (_ValidationError, ValueError) as exc:
        raise _ValidationError(f"bad grid spec {text!r}: {exc}") from exc


def _parse_vd(text: str) -> VirtualDetectorSpec:
    g = _parse_grid(text)
    return VirtualDetectorSpec((g.nu, g.nv), (g.su, g.sv))


def _parse_geom(text: str, detector: DetectorGrid, angle: float = 0.0) -> ConeGeometry:
    """'d0=650,d1=950[,angle=0]' -> ConeGeometry (strict d0 < d1)."""
    vals: dict[str, float] = {}
    try:
        for part in text.split(","):
            key, _, val = part.partition("=")
            vals[key.strip()] = float(val)
        d0, d1 = vals.pop("d0"), vals.pop("d1")
        angle = vals.pop("angle", angle)
    except (KeyError, ValueError) as exc:
        raise _ValidationError(f"bad geometry spec {text!r} (want d0=..,d1=..[,angle=..])") from exc
    if vals:
        raise _ValidationError(f"unknown geometry keys {sorted(vals)} in {text!r}")
    try:
        return ConeGeometry(d0, d1, detector, angle)
    except ValueError as exc:
        raise _ValidationError(str(exc)) from exc


def _parse_pair(text: str, what: str) -> tuple[float, float]:
    try:
        a, b = (float(p) for p in text.split(","))
        return a, b
    except ValueError as exc:
        raise _ValidationError(f"bad {what} {text!r} (want two comma-separated numbers)") from exc


def _load_gray(path) -> np.ndarray:
    arr = fileio.load_image8(path)
    if arr.ndim != 2:
        raise _ValidationError(f"{path}: expected a grayscale image")
    return arr


def _film_params(path) -> ModifiedSigmoidParams:
    if path is None:
        return ModifiedSigmoidParams()
    p = load_film_params(path)
    return p if isinstance(p, ModifiedSigmoidParams) else ModifiedSigmoidParams(base=p)


def _default_threads() -> int:
    env = os.environ.get("CEPHFORGE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            print(f"warning: ignoring bad CEPHFORGE_THREADS={env!r}", file=sys.stderr)
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_synth_type1(a) -> int:
    v = load_volume(a.volume)
    cfg = Type1Config(
        enhance=EnhanceParams(bone_weight=a.bone_weight),
        projection=a.projection,
        film=_film_params(a.film),
        grid=_parse_grid(a.grid),
        attenuation=AttenuationModel(a.mu_water),
        samples_per_mm=a.samples_per_mm,
        variant=a.variant,
        mip_k=a.mip_k,
    )
    ceph = synthesize_type1(v, cfg, cache_dir=a.cache_dir)
    out = save_cephalogram(ceph, a.out)
    print(out)
    return 0


def _cmd_project(a) -> int:
    v = load_volume(a.volume)
    det = _parse_grid(a.grid)
    model = AttenuationModel(a.mu_water)
    if a.mode == "orthogonal":
        img = project_orthogonal(v, det, model, a.samples_per_mm)
    else:
        geom = _parse_geom(a.geom, det)
        img = project_perspective(v, geom, model, a.samples_per_mm)
    diag = img.diagnostics()
    if diag["suspicious"]:
        print(
            f"warning: integrals up to {diag['max']:.2f} exceed the plausible "
            "head range (> 20); check spacing/units",
            file=sys.stderr,
        )
    out = save_integral_image(img, a.out)
    print(out)
    return 0


def _cmd_mip(a) -> int:
    v = load_volume(a.volume)
    det = _parse_grid(a.grid)
    panel = project_mip(v, a.k, det, a.samples_per_mm)
    lo, hi = _parse_pair(a.window, "window")
    if hi <= lo:
        raise _ValidationError(f"bad window {a.window!r}: need lo < hi")
    arr = dataset.quantize_array(panel.data, lo, hi)
    out = fileio.save_gray8(a.out, arr)
    fileio.write_keyvalues(
        out.with_suffix(".meta"),
        {
            "dims": "{},{}".format(*panel.dims),
            "spacing_mm": "{:.9g},{:.9g}".format(*panel.spacing),
            "window_hu": f"{lo:g},{hi:g}",
        },
    )
    print(out)
    return 0


def _cmd_rebin(a) -> int:
    proj = load_integral_image(a.proj)
    det = DetectorGrid(proj.dims[0], proj.dims[1], *proj.spacing)
    geom = _parse_geom(a.geom, det)
    if a.flip:
        proj = flip_horizontal(proj)
    img = rebin_to_vd(proj, geom, _parse_vd(a.vd))
    out = save_integral_image(img, a.out)
    print(out)
    return 0


def _cmd_envelope(a) -> int:
    y0, z0 = _parse_pair(a.corner, "corner")
    x_min, x_max = _parse_pair(a.depth, "depth")
    env = patch_envelope(y0, z0, a.edge, x_min, x_max, a.d0)
    print("y_mm\tz_mm")
    for y, z in env.vertices:
        print(f"{y:.6g}\t{z:.6g}")
    return 0


def _cmd_quadrants(a) -> int:
    if a.stitch:
        paths = a.stitch.split(",")
        if len(paths) != 4:
            raise _ValidationError("--stitch wants 4 comma-separated patch paths (Q1..Q4)")
        patches = [
            QuadrantPatch(_load_gray(p), q, normalized=a.normalized)
            for p, q in zip(paths, Quadrant)
        ]
        full = stitch_quadrants(patches, denormalize=a.normalized)
        if a.out is None:
            raise _ValidationError("--stitch needs --out for the assembled image")
        print(fileio.save_gray8(a.out, full))
        return 0
    if a.image is None:
        raise _ValidationError("quadrants needs --image (or --stitch)")
    img = _load_gray(a.image)
    outdir = Path(a.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = Path(a.image).stem
    for p in split_quadrants(img):
        if a.normalize:
            p = normalize_quadrant(p)
        print(fileio.save_gray8(outdir / f"{stem}_{p.quadrant.value}.png", p.data))
    return 0


def _cmd_pack_dual(a) -> int:
    p0 = QuadrantPatch(_load_gray(a.p0), a.quadrant, normalized=True)
    p180 = QuadrantPatch(_load_gray(a.p180), a.quadrant, normalized=True)
    rgb = pack_dual(p0, p180)
    print(fileio.save_rgb8(a.out, rgb.to_array()))
    return 0


def _cmd_make_type2(a) -> int:
    det = _parse_grid(a.grid)
    geom = _parse_geom(a.geom, det)
    cfg = Type1Config(
        film=_film_params(a.film),
        grid=_parse_vd(a.vd).grid,
        attenuation=AttenuationModel(a.mu_water),
        samples_per_mm=a.samples_per_mm,
    )
    manifest = produce_type2_dataset(
        list(a.volumes), geom, cfg, a.out, threads=a.threads, cache_dir=a.cache_dir
    )
    print(manifest)
    return 0


def _cmd_make_sr(a) -> int:
    images = [(Path(p).stem, _load_gray(p)) for p in a.images]
    _, manifest = dataset.make_sr_dataset(
        images, a.out, hr_patch=a.hr_patch, per_image=a.per_image, seed=a.seed
    )
    print(manifest)
    return 0


def _cmd_quantize(a) -> int:
    img = load_integral_image(a.image)
    ceph = dataset.quantize_integral(img, a.lo, a.hi)
    print(save_cephalogram(ceph, a.out))
    return 0


def _cmd_rmse_psnr(a) -> int:
    x = _load_gray(a.a)
    y = _load_gray(a.b)
    r = metrics.rmse(x, y)
    p = metrics.psnr(x, y, a.peak)
    print(f"rmse\t{r:.6g}")
    print(f"psnr\t{'inf' if p == float('inf') else format(p, '.6g')}")
    return 0


def _cmd_profile(a) -> int:
    arr = _load_gray(a.image)
    spacing = _parse_pair(a.spacing, "spacing") if a.spacing else None
    vals = metrics.line_profile(arr, _parse_pair(a.p0, "p0"), _parse_pair(a.p1, "p1"), a.n, spacing=spacing)
    print("t\tvalue")
    for i, val in enumerate(vals):
        print(f"{i / (len(vals) - 1):.6g}\t{val:.6g}")
    return 0


def _cmd_sdr(a) -> int:
    spacing = _parse_pair(a.pixel_spacing, "pixel spacing") if a.pixel_spacing else None
    detected = metrics.load_landmarks(a.detected, pixel_spacing=spacing)
    reference = metrics.load_landmarks(a.reference, pixel_spacing=spacing)
    radii = tuple(float(r) for r in a.radii.split(","))
    table = metrics.sdr(detected, reference, radii)
    print(table.to_tsv() if a.tsv else table.format_table())
    return 0


def _cmd_fit_sigmoid(a) -> int:
    rows = []
    for ln in Path(a.samples).read_text(encoding="utf-8").splitlines():
        if not ln.strip() or ln.startswith("#") or ln.split("\t")[0] in ("x", "integral"):
            continue
        parts = ln.replace(",", "\t").split("\t")
        rows.append((float(parts[0]), float(parts[1])))
    fit = fit_sigmoid(rows, max_iter=a.max_iter)
    if not fit.converged:
        print(f"warning: no convergence after {fit.iterations} iterations", file=sys.stderr)
    print(
        f"c1={fit.params.c1:.6g} c2={fit.params.c2:.6g} t={fit.params.t:.6g} "
        f"s={fit.params.s:.6g} rms={fit.rms:.6g}"
    )
    if a.out:
        save_film_params(fit.params, a.out)
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="cephforge",
        description="Synthetic lateral cephalograms from CBCT volumes.",
    )
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    fmt = argparse.ArgumentDefaultsHelpFormatter

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, formatter_class=fmt)
        p.set_defaults(func=func)
        return p

    p = add("synth-type1", _cmd_synth_type1, "synthesize a Type I cephalogram from a volume")
    p.add_argument("--volume", required=True, help="volume sidecar (.meta)")
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--projection", choices=["orthogonal", "wehmer_perspective"], default="orthogonal")
    p.add_argument("--variant", choices=["modified_sigmoid", "original_sigmoid", "raycast", "mip"], default="modified_sigmoid")
    p.add_argument("--film", default=None, help="film parameter file (key=value)")
    p.add_argument("--grid", default="512x512@0.5", help="output grid NxM@spacing")
    p.add_argument("--bone-weight", type=float, default=1.3, help="bone enhancement weight")
    p.add_argument("--mu-water", type=float, default=0.0203, help="water attenuation 1/mm")
    p.add_argument("--samples-per-mm", type=float, default=3.0)
    p.add_argument("--mip-k", type=int, default=50)
    p.add_argument("--cache-dir", default=None, help="projection cache directory")

    p = add("project", _cmd_project, "forward-project a volume to an integral image")
    p.add_argument("--volume", required=True)
    p.add_argument("--out", required=True, help="output sidecar (.meta) path")
    p.add_argument("--mode", choices=["orthogonal", "perspective"], default="orthogonal")
    p.add_argument("--geom", default="d0=650,d1=950,angle=0", help="cone geometry for perspective mode")
    p.add_argument("--grid", default="512x512@0.5")
    p.add_argument("--mu-water", type=float, default=0.0203)
    p.add_argument("--samples-per-mm", type=float, default=3.0)

    p = add("mip", _cmd_mip, "top-K maximum intensity projection panel")
    p.add_argument("--volume", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=50, help="number of largest samples to average")
    p.add_argument("--grid", default="512x512@0.5")
    p.add_argument("--window", default="-1000,3000", help="display window in HU")
    p.add_argument("--samples-per-mm", type=float, default=3.0)

    p = add("rebin", _cmd_rebin, "rebin a cone-beam projection onto the virtual detector")
    p.add_argument("--proj", required=True, help="projection sidecar or raw path")
    p.add_argument("--geom", required=True, help="d0=..,d1=.. of the acquisition")
    p.add_argument("--out", required=True)
    p.add_argument("--vd", default="512x512@0.5", help="virtual detector grid")
    p.add_argument("--flip", action="store_true", help="flip input into the 0-degree frame first (180-degree views)")

    p = add("envelope", _cmd_envelope, "projected patch envelope vertices")
    p.add_argument("--corner", required=True, help="patch corner y0,z0 in mm")
    p.add_argument("--edge", type=float, required=True, help="patch edge length mm")
    p.add_argument("--depth", required=True, help="depth range x_min,x_max in mm")
    p.add_argument("--d0", type=float, default=650.0, help="source-to-isocenter mm")

    p = add("quadrants", _cmd_quadrants, "split an image into quadrant patches (or stitch)")
    p.add_argument("--image", help="image to split")
    p.add_argument("--outdir", default=".", help="output directory for patches")
    p.add_argument("--normalize", action="store_true", help="normalize patch orientations")
    p.add_argument("--stitch", default=None, help="4 patch paths Q1,Q2,Q3,Q4 to reassemble")
    p.add_argument("--normalized", action="store_true", help="stitch inputs are normalized patches")
    p.add_argument("--out", default=None, help="output path for --stitch")

    p = add("pack-dual", _cmd_pack_dual, "pack normalized 0/180-degree patches into RGB")
    p.add_argument("--p0", required=True, help="normalized 0-degree patch PNG")
    p.add_argument("--p180", required=True, help="normalized 180-degree patch PNG")
    p.add_argument("--quadrant", choices=[q.value for q in Quadrant], required=True)
    p.add_argument("--out", required=True)

    p = add("make-type2-dataset", _cmd_make_type2, "produce the dual-projection training dataset")
    p.add_argument("--volumes", nargs="+", required=True, help="volume sidecars")
    p.add_argument("--out", required=True, help="dataset root directory")
    p.add_argument("--geom", default="d0=650,d1=950", help="CBCT acquisition geometry")
    p.add_argument("--grid", default="512x512@0.73", help="physical detector grid")
    p.add_argument("--vd", default="512x512@0.5", help="virtual detector grid")
    p.add_argument("--film", default=None)
    p.add_argument("--mu-water", type=float, default=0.0203)
    p.add_argument("--samples-per-mm", type=float, default=3.0)
    p.add_argument("--threads", type=int, default=_default_threads(), help="volumes processed in parallel")
    p.add_argument("--cache-dir", default=None)

    p = add("make-sr-dataset", _cmd_make_sr, "cut aligned HR/LR/ILR super-resolution triples")
    p.add_argument("--images", nargs="+", required=True, help="high-resolution cephalogram PNGs")
    p.add_argument("--out", required=True)
    p.add_argument("--hr-patch", type=int, default=320)
    p.add_argument("--per-image", type=int, default=42)
    p.add_argument("--seed", type=int, default=0)

    p = add("quantize", _cmd_quantize, "quantize an integral image to 8 bits")
    p.add_argument("--image", required=True, help="integral image sidecar")
    p.add_argument("--out", required=True)
    p.add_argument("--lo", type=float, default=0.0)
    p.add_argument("--hi", type=float, default=6.0)

    p = add("rmse-psnr", _cmd_rmse_psnr, "RMSE and PSNR between two images")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--peak", type=float, default=255.0)

    p = add("profile", _cmd_profile, "intensity profile along a line segment")
    p.add_argument("--image", required=True)
    p.add_argument("--p0", required=True, help="start y,z in mm")
    p.add_argument("--p1", required=True, help="end y,z in mm")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--spacing", default=None, help="pixel spacing su,sv (default from sidecar units)")

    p = add("sdr", _cmd_sdr, "successful detection rate table for landmark files")
    p.add_argument("--detected", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--radii", default="2,2.5,3,4", help="precision radii in mm")
    p.add_argument("--pixel-spacing", default=None, help="treat files as pixel-indexed with this spacing")
    p.add_argument("--tsv", action="store_true", help="machine-readable output")

    p = add("fit-sigmoid", _cmd_fit_sigmoid, "least-squares fit of the film curve")
    p.add_argument("--samples", required=True, help="TSV of integral, gray pairs")
    p.add_argument("--out", default=None, help="write fitted params as key=value")
    p.add_argument("--max-iter", type=int, default=200)

    return parser


def _apply_config(parser: _Parser, argv: list[str]) -> list[str]:
    """Load --config key=value defaults into the chosen subparser."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise _ValidationError("--config needs a path argument")
    cfg = fileio.read_keyvalues(argv[i + 1])
    argv = argv[:i] + argv[i + 2 :]
    if not argv:
        raise _ValidationError("--config requires a subcommand")
    sub_actions = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    chosen = sub_actions[0].choices.get(argv[0]) if sub_actions else None
    if chosen is None:
        return argv
    dest_map = {act.dest: act for act in chosen._actions}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        act = dest_map.get(dest)
        if act is None:
            raise _ValidationError(f"unknown config key {key!r} for subcommand {argv[0]!r}")
        chosen.set_defaults(**{dest: act.type(value) if act.type else value})
        act.required = False
    return argv


def run(argv) -> int:
    """Execute one subcommand; returns the process exit code."""
    argv = list(argv)
    parser = _build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            parser.print_help(sys.stderr)
            return 1
        return args.func(args)
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    except _ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - unexpected runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
