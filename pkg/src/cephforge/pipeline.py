"""End-to-end Type I synthesis and Type II dataset production."""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cephgeom import (
    VirtualDetectorSpec,
    flip_horizontal,
    normalize_quadrant,
    pack_dual,
    rebin_to_vd,
    split_quadrants,
)
from .dataset import (
    PatchPairSample,
    assign_splits,
    export_pairs,
    quantize_array,
    quantize_integral,
)
from .film import (
    Cephalogram8,
    ModifiedSigmoidParams,
    modified_sigmoid_transform,
    sigmoid_transform,
)
from .projector import (
    AttenuationModel,
    ConeGeometry,
    DetectorGrid,
    IntegralImage,
    project_mip,
    project_orthogonal,
    project_perspective,
    wehmer_geometry,
)
from .volume import EnhanceParams, Volume, enhance_skeleton, load_volume

PROJECTIONS = ("orthogonal", "wehmer_perspective")
VARIANTS = ("modified_sigmoid", "original_sigmoid", "raycast", "mip")

# display window for the MIP variant, HU
MIP_WINDOW = (-1000.0, 3000.0)


@dataclass(frozen=True)
class Type1Config:
    """Parameters of the direct (Type I) cephalogram synthesis.

    ``variant`` selects the output map: the piecewise film transform
    (default), the plain sigmoid, the raw ray-cast integrals quantized from
    [0, 6], or a MIP panel of the unenhanced volume windowed from
    [-1000, 3000] HU.
    """

    enhance: EnhanceParams = field(default_factory=EnhanceParams)
    projection: str = "orthogonal"
    film: ModifiedSigmoidParams = field(default_factory=ModifiedSigmoidParams)
    grid: DetectorGrid = field(default_factory=lambda: DetectorGrid(512, 512, 0.5, 0.5))
    attenuation: AttenuationModel = field(default_factory=AttenuationModel)
    samples_per_mm: float = 3.0
    variant: str = "modified_sigmoid"
    mip_k: int = 50

    def __post_init__(self):
        if self.projection not in PROJECTIONS:
            raise ValueError(f"projection must be one of {PROJECTIONS}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.samples_per_mm <= 0:
            raise ValueError("samples_per_mm must be positive")
        if self.mip_k < 1:
            raise ValueError("mip_k must be >= 1")


def _stage_key(v: Volume, *parts) -> str:
    h = hashlib.sha256()
    h.update(v.data.tobytes())
    h.update(repr((v.dims, v.spacing, v.origin)).encode())
    for p in parts:
        h.update(repr(p).encode())
    return h.hexdigest()[:32]


def _cached_integral(cache_dir, key: str, compute) -> IntegralImage:
    if cache_dir is None:
        return compute()
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"{key}.npz"
    if path.exists():
        with np.load(path) as z:
            return IntegralImage(z["data"], tuple(z["spacing"]), tuple(z["origin"]))
    img = compute()
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, data=img.data, spacing=img.spacing, origin=img.plane_origin)
    tmp.replace(path)
    return img


def synthesize_type1(v: Volume, cfg: Type1Config = Type1Config(), cache_dir=None) -> Cephalogram8:
    """Skeleton enhancement -> projection -> film transform.

    ``cache_dir`` keeps the projection stage (the cost hot-spot) on disk,
    keyed by the content of the volume and stage parameters.
    """
    if cfg.variant == "mip":
        key = _stage_key(v, "mip", cfg.grid, cfg.mip_k, cfg.samples_per_mm)
        panel = _cached_integral(
            cache_dir, key, lambda: project_mip(v, cfg.mip_k, cfg.grid, cfg.samples_per_mm)
        )
        return Cephalogram8(quantize_array(panel.data, *MIP_WINDOW), panel.spacing)

    enhanced = enhance_skeleton(v, cfg.enhance)
    if cfg.projection == "orthogonal":
        key = _stage_key(enhanced, "ortho", cfg.grid, cfg.attenuation, cfg.samples_per_mm)
        g = _cached_integral(
            cache_dir,
            key,
            lambda: project_orthogonal(enhanced, cfg.grid, cfg.attenuation, cfg.samples_per_mm),
        )
    else:
        geom = wehmer_geometry(cfg.grid)
        key = _stage_key(enhanced, "wehmer", geom, cfg.attenuation, cfg.samples_per_mm)
        g = _cached_integral(
            cache_dir,
            key,
            lambda: project_perspective(enhanced, geom, cfg.attenuation, cfg.samples_per_mm),
        )

    if cfg.variant == "original_sigmoid":
        return sigmoid_transform(g, cfg.film.base)
    if cfg.variant == "raycast":
        return quantize_integral(g)
    return modified_sigmoid_transform(g, cfg.film)


def _normalize_volumes(volumes) -> list[tuple[str, Volume]]:
    out = []
    for item in volumes:
        if isinstance(item, (str, Path)):
            out.append((Path(item).stem, load_volume(item)))
        else:
            pid, v = item
            out.append((str(pid), v if isinstance(v, Volume) else load_volume(v)))
    return out


def produce_type2_dataset(
    volumes,
    g: ConeGeometry,
    cfg: Type1Config = Type1Config(),
    root="type2_dataset",
    threads: int = 1,
    cache_dir=None,
) -> Path:
    """Build the dual-projection training dataset; returns the manifest path.

    Per volume: simulate the 0/180-degree cone-beam projections of the raw
    volume, flip the 180-degree view into the 0-degree frame, rebin both to
    the virtual detector, quantize, split into normalized quadrants, and
    pack each quadrant's dual views as an RGB input.  The target is the
    Type I orthogonal cephalogram of the same volume, split and normalized
    the same way.  4 records per volume; whole patients are assigned to
    train/val/test in list order by the standard proportions.

    ``volumes`` holds (patient_id, Volume) pairs or sidecar paths.
    """
    entries = _normalize_volumes(volumes)
    if not entries:
        raise ValueError("no volumes given")
    vd = VirtualDetectorSpec((cfg.grid.nu, cfg.grid.nv), (cfg.grid.su, cfg.grid.sv))
    split_of = assign_splits([pid for pid, _ in entries])

    def one(entry) -> list[PatchPairSample]:
        pid, v = entry
        proj0 = _cached_integral(
            cache_dir,
            _stage_key(v, "persp", g.with_angle(0.0), cfg.attenuation, cfg.samples_per_mm),
            lambda: project_perspective(v, g.with_angle(0.0), cfg.attenuation, cfg.samples_per_mm),
        )
        proj180 = _cached_integral(
            cache_dir,
            _stage_key(v, "persp", g.with_angle(180.0), cfg.attenuation, cfg.samples_per_mm),
            lambda: project_perspective(v, g.with_angle(180.0), cfg.attenuation, cfg.samples_per_mm),
        )
        vd0 = rebin_to_vd(proj0, g, vd)
        vd180 = rebin_to_vd(flip_horizontal(proj180), g, vd)
        q0 = quantize_array(vd0.data)
        q180 = quantize_array(vd180.data)
        target = synthesize_type1(v, cfg, cache_dir=cache_dir)

        samples = []
        for p0, p180, tgt in zip(
            split_quadrants(q0), split_quadrants(q180), split_quadrants(target.data)
        ):
            rgb = pack_dual(normalize_quadrant(p0), normalize_quadrant(p180))
            samples.append(
                PatchPairSample(
                    input_rgb=rgb.to_array(),
                    target=normalize_quadrant(tgt).data,
                    quadrant=p0.quadrant,
                    patient_id=pid,
                    split=split_of[pid],
                )
            )
        return samples

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_volume = list(pool.map(one, entries))
    else:
        per_volume = [one(e) for e in entries]

    flat = [s for group in per_volume for s in group]
    return export_pairs(flat, root)
