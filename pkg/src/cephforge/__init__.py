"""cephforge: synthetic lateral cephalograms from CBCT head volumes.

Pipeline stages are plain functions over immutable dataclasses:

* volume    — ingestion, rigid resampling, skeleton enhancement
* projector — orthogonal / cone-beam / MIP ray casting
* film      — sigmoid film-characteristic transforms and curve fitting
* cephgeom  — virtual-detector rebinning, quadrants, dual-view packing
* dataset   — quantization, manifests, SR dataset preparation
* metrics   — RMSE/PSNR, line profiles, landmark SDR tables
* pipeline  — Type I synthesis and Type II dataset orchestration
"""

from .cephgeom import (
    DualRgbPatch,
    PatchEnvelope,
    Quadrant,
    QuadrantPatch,
    VirtualDetectorSpec,
    cone_project_point,
    denormalize_quadrant,
    flip_horizontal,
    magnification,
    normalize_quadrant,
    pack_dual,
    patch_envelope,
    rebin_to_vd,
    split_quadrants,
    stitch_quadrants,
)
from .dataset import (
    PatchPairRecord,
    PatchPairSample,
    SrRecord,
    dequantize_array,
    downsample_avg,
    export_pairs,
    make_sr_dataset,
    quantize_array,
    quantize_integral,
    read_manifest,
    read_sr_manifest,
    upsample_bicubic,
)
from .film import (
    Cephalogram8,
    ModifiedSigmoidParams,
    SigmoidFit,
    SigmoidParams,
    derive_c4,
    fit_sigmoid,
    load_cephalogram,
    modified_sigmoid_transform,
    save_cephalogram,
    sigmoid,
    sigmoid_transform,
)
from .metrics import (
    LandmarkSet,
    SdrTable,
    line_profile,
    load_landmarks,
    psnr,
    rmse,
    save_landmarks,
    sdr,
)
from .pipeline import Type1Config, produce_type2_dataset, synthesize_type1
from .projector import (
    AttenuationModel,
    ConeGeometry,
    DetectorGrid,
    IntegralImage,
    dental_cbct_geometry,
    hu_to_mu,
    load_integral_image,
    project_mip,
    project_orthogonal,
    project_perspective,
    resolve_distances,
    save_integral_image,
    wehmer_geometry,
)
from .volume import (
    EnhanceParams,
    RigidTransform,
    Volume,
    enhance_skeleton,
    load_volume,
    resample_rigid,
    save_volume,
)

__version__ = "0.1.0"
