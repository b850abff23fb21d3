"""Release acceptance gate: one test per criterion, one verdict line each.

Run `pytest tests/test_acceptance.py -s -v` to see the verdict lines; a
criterion fails loudly with every violated sub-check in the message.
"""

import time

import numpy as np

from cephforge import (
    ConeGeometry,
    DetectorGrid,
    ModifiedSigmoidParams,
    Volume,
    cone_project_point,
    denormalize_quadrant,
    enhance_skeleton,
    flip_horizontal,
    magnification,
    modified_sigmoid_transform,
    normalize_quadrant,
    patch_envelope,
    project_orthogonal,
    project_perspective,
    quantize_array,
    rebin_to_vd,
    sigmoid_transform,
    split_quadrants,
)
from cephforge import metrics
from cephforge.cephgeom import VirtualDetectorSpec
from cephforge.dataset import (
    PatchPairSample,
    Quadrant,
    downsample_avg,
    export_pairs,
    make_sr_dataset,
    read_sr_manifest,
    upsample_bicubic,
)
from cephforge.film import derive_c4, sigmoid
from cephforge.fileio import load_image8
from cephforge.phantoms import head_phantom, point_volume, uniform_volume
from cephforge.projector import WEHMER_D0, WEHMER_D1, dental_cbct_geometry


def _checks():
    failures = []

    def check(cond, msg):
        if not bool(cond):
            failures.append(msg)

    return failures, check


def _gate(name, failures):
    print(f"\n[{'FAIL' if failures else 'PASS'}] {name}")
    assert not failures, f"{name}: " + "; ".join(failures)


def test_skeleton_enhancement_branch_table():
    failures, check = _checks()
    hu = [-1024.0, -800.0, -500.0, 0.0, 999.0, 1000.0, 1001.0, 1200.0]
    want = [-1000.0, -1000.0, -500.0, 0.0, 999.0, 1000.0, 1301.3, 1560.0]
    v = Volume.centered(np.array(hu).reshape(2, 2, 2), 1.0)
    got = enhance_skeleton(v).data.ravel()
    for h, w, g in zip(hu, want, got):
        check(abs(g - w) <= 1e-9, f"enhance({h:g}) = {g:.12g}, want {w:g}")
    _gate("skeleton enhancement branch table, exact to 1e-9", failures)


def test_film_transform_anchors_and_continuity():
    failures, check = _checks()
    grays = sigmoid_transform(np.array([[2.6, 50.0, 0.0]])).data.ravel()
    for x, w, g in zip((2.6, 50.0, 0.0), (145, 250, 44), grays):
        check(g == w, f"base curve at {x:g} -> {g}, want {w}")
    air = modified_sigmoid_transform(np.array([[0.05]])).data[0, 0]
    check(air == 0, f"modified transform at 0.05 -> {air}, want 0")
    # junction residual of the piecewise curve with the derived span
    p = ModifiedSigmoidParams()
    b = p.base
    low = p.c3 + derive_c4(p) * sigmoid(p.tau2 - (p.tau1 + p.tau2) / 2.0)
    base = b.c1 + (255.0 - b.c1 - b.c2) * sigmoid(b.s * (p.tau2 - b.t))
    check(abs(low - base) < 0.5, f"junction residual {abs(low - base):.3g} gray")
    _gate("film transform anchors and junction continuity < 0.5 gray", failures)


def test_projection_analytic_phantoms_and_runtime():
    failures, check = _checks()

    # uniform water slab: every ray integrates to thickness * mu_water
    slab = uniform_volume((200, 21, 21), 1.0, hu=0.0)
    img = project_orthogonal(slab, DetectorGrid(9, 9, 2.0, 2.0))
    rel = float(np.abs(img.data - 4.06).max() / 4.06)
    check(rel < 1e-3, f"water slab integral off by {rel:.2e} relative")

    # hot voxel lands where similar triangles say it should
    v = point_volume((21, 41, 41), 1.0, (10, 30, 14))
    g = dental_cbct_geometry(DetectorGrid(121, 121, 0.73, 0.73))
    pimg = project_perspective(v, g)
    ui, vi = np.unravel_index(int(np.argmax(pimg.data)), pimg.dims)
    scale = g.d1 / g.d0
    u_pred = (10.0 * scale - pimg.plane_origin[0]) / 0.73
    v_pred = (-6.0 * scale - pimg.plane_origin[1]) / 0.73
    check(abs(ui - u_pred) <= 1.0, f"peak u {ui} vs predicted {u_pred:.2f}")
    check(abs(vi - v_pred) <= 1.0, f"peak v {vi} vs predicted {v_pred:.2f}")

    # cone beam converges to the parallel beam at 100x cephalostat distances
    v40 = uniform_volume((40, 31, 31), 1.0, hu=0.0)
    det = DetectorGrid(15, 15, 1.0, 1.0)
    far = ConeGeometry(100 * WEHMER_D0, 100 * WEHMER_D1, det)
    cone = project_perspective(v40, far).data
    ortho = project_orthogonal(v40, det).data
    gap = float(np.abs(cone - ortho).max() / max(float(ortho.max()), 1e-12))
    check(gap < 0.01, f"far-source gap {gap:.4f} of max-norm")

    # runtime budget: 128^3 voxels at 3 samples/mm, single-threaded
    big = head_phantom(128, spacing=2.0)
    t0 = time.perf_counter()
    project_orthogonal(big, DetectorGrid(128, 128, 2.0, 2.0), samples_per_mm=3.0)
    dt = time.perf_counter() - t0
    check(dt < 60.0, f"128^3 projection took {dt:.1f} s")
    _gate("analytic projection phantoms within 0.1%/1px/1% and < 60 s", failures)


def test_dual_projection_geometry_suite():
    failures, check = _checks()

    # closed-form magnification table
    table = [(65.0, 10.0 / 9.0), (130.0, 1.25), (0.0, 1.0), (-650.0, 0.5)]
    for x, want in table:
        got = magnification(x, 650.0)
        check(abs(got - want) <= 1e-12, f"magnification({x:g}, 650) = {got!r}")

    # a structure's true (y, z) is bracketed by its 0/180-degree projections
    rng = np.random.default_rng(2026)
    g0 = dental_cbct_geometry(DetectorGrid(64, 64, 0.73, 0.73))
    g180 = g0.with_angle(180.0)
    bad = 0
    for _ in range(10_000):
        pt = (rng.uniform(-250, 250), rng.uniform(-80, 80), rng.uniform(-80, 80))
        py0, pz0 = cone_project_point(pt, g0)
        py1, pz1 = cone_project_point(pt, g180)
        ok_y = min(py0, py1) - 1e-9 <= pt[1] <= max(py0, py1) + 1e-9
        ok_z = min(pz0, pz1) - 1e-9 <= pt[2] <= max(pz0, pz1) + 1e-9
        bad += not (ok_y and ok_z)
    check(bad == 0, f"{bad} bracket violations in 10000 draws")

    # midsagittal structures are fixed points of the rebinned pair
    v = point_volume((21, 41, 41), 1.0, (10, 32, 12))  # world (0, 12, -8)
    g = dental_cbct_geometry(DetectorGrid(121, 121, 0.73, 0.73))
    vd = VirtualDetectorSpec((120, 120), (0.5, 0.5))
    vd0 = rebin_to_vd(project_perspective(v, g), g, vd)
    vd180 = rebin_to_vd(flip_horizontal(project_perspective(v, g.with_angle(180.0))), g, vd)
    p0 = np.unravel_index(int(np.argmax(vd0.data)), vd0.dims)
    p1 = np.unravel_index(int(np.argmax(vd180.data)), vd180.dims)
    check(
        abs(p0[0] - p1[0]) <= 1 and abs(p0[1] - p1[1]) <= 1,
        f"midsagittal peak moved: {p0} vs {p1}",
    )

    # orientation normalization undoes itself bit-exactly
    img = np.random.default_rng(7).integers(0, 256, (16, 12), dtype=np.uint8)
    for patch in split_quadrants(img):
        back = denormalize_quadrant(normalize_quadrant(patch))
        check(np.array_equal(back.data, patch.data), f"{patch.quadrant} not involutive")

    # envelope vertex counts: square at the origin, hexagon in general
    check(len(patch_envelope(0.0, 0.0, 10.0, 65.0, 455.0, 650.0).vertices) == 4,
          "origin patch envelope is not a square")
    check(len(patch_envelope(10.0, 10.0, 10.0, 65.0, 455.0, 650.0).vertices) == 6,
          "generic patch envelope is not a hexagon")
    _gate("dual-projection geometry: table, bracket, fixed point, involution, envelope", failures)


def test_metrics_closed_form_suite():
    failures, check = _checks()
    a = np.full((32, 32), 100, dtype=np.uint8)
    check(metrics.rmse(a, a + 10) == 10.0, "offset-10 RMSE is not 10")
    p = metrics.psnr(a, a + 10)
    check(abs(p - 28.13) <= 0.01, f"offset-10 PSNR {p:.4f}, want 28.13 +/- 0.01")

    labels = tuple(f"L{i:02d}" for i in range(19))
    ref = np.arange(38, dtype=np.float64).reshape(19, 2)
    det = ref.copy()
    det[7, 1] += 3.0  # one landmark misses by exactly 3 mm
    table = metrics.sdr(
        metrics.LandmarkSet(det, labels), metrics.LandmarkSet(ref, labels), (2.0, 2.5, 3.0, 4.0)
    )
    check(abs(table.rates[0] - 94.74) <= 0.01, f"SDR at 2 mm = {table.rates[0]:.4f}")
    check(table.rates[2] == 100.0, f"SDR at 3 mm = {table.rates[2]:.4f}, want 100")

    rng = np.random.default_rng(99)
    refset = metrics.LandmarkSet(ref, labels)
    violations = 0
    for _ in range(1000):
        noisy = metrics.LandmarkSet(ref + rng.normal(0, 2.0, ref.shape), labels)
        rates = metrics.sdr(noisy, refset, (1.0, 2.0, 3.0, 4.0, 8.0)).rates
        violations += bool((np.diff(rates) < 0).any())
    check(violations == 0, f"{violations} non-monotone SDR tables in 1000 draws")
    _gate("metrics: RMSE/PSNR closed form, SDR boundary, monotone tables", failures)


def _gray8(x):
    # x is non-negative here, so floor(x + 0.5) rounds half away from zero
    return np.clip(np.floor(np.asarray(x, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


def test_dataset_pipeline_suite(tmp_path):
    failures, check = _checks()
    q = quantize_array(np.array([[0.0, 6.0]]))
    check(q[0, 0] == 0 and q[0, 1] == 255, f"quantize endpoints {q.tolist()}")

    big = np.zeros((1935, 2400), dtype=np.float64)
    check(downsample_avg(big, 5).shape == (387, 480),
          "factor-5 downsample of 1935x2400 is not 387x480")

    # every stored LR patch re-derives bit-exactly from its HR patch
    rng = np.random.default_rng(17)
    image = rng.integers(0, 256, (60, 60), dtype=np.uint8)
    records, manifest = make_sr_dataset(
        [("case", image)], tmp_path / "sr", hr_patch=20, per_image=4, seed=5
    )
    root = manifest.parent
    for r in records:
        hr = load_image8(root / r.hr_path)
        lr = load_image8(root / r.lr_path)
        if r.blur_level == "x5":
            redo = _gray8(downsample_avg(hr.astype(np.float64), 5))
        else:
            small = _gray8(downsample_avg(hr.astype(np.float64), 10))
            redo = _gray8(upsample_bicubic(small.astype(np.float64), 2))
        check(np.array_equal(lr, redo), f"{r.lr_path} not re-derivable from HR")

    # reruns produce byte-identical manifests
    _, m2 = make_sr_dataset([("case", image)], tmp_path / "sr2", hr_patch=20, per_image=4, seed=5)
    check(manifest.read_bytes() == m2.read_bytes(), "SR manifests differ across reruns")
    read_sr_manifest(m2)

    sample = PatchPairSample(
        np.full((4, 4, 3), 9, dtype=np.uint8), np.full((4, 4), 7, dtype=np.uint8),
        Quadrant.Q1, "p00", "train",
    )
    pm1 = export_pairs([sample], tmp_path / "pairs1")
    pm2 = export_pairs([sample], tmp_path / "pairs2")
    check(pm1.read_bytes() == pm2.read_bytes(), "pair manifests differ across reruns")
    _gate("dataset: quantize endpoints, factor-5 dims, HR->LR bit-exact, stable manifests", failures)


def test_full_scale_results_declared_out_of_scope():
    print(
        "\n[PASS] out-of-scope note: the source study's Tables I-III and Fig. 10 "
        "(one/dual-projection PSNR 28.03/33.10/33.83, SR PSNR 32.5, SDR "
        "percentages, challenge curves) are NOT reproducible at desk scale; "
        "they require fully trained GANs and the ISBI/CQ500 corpora. The "
        "analytic and property gates above, plus the trainer smoke tests, "
        "stand in for them."
    )
