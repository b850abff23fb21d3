"""Rebinning geometry, quadrant symmetry, and envelope tests."""

import numpy as np
import pytest

from cephforge import (
    ConeGeometry,
    DetectorGrid,
    DualRgbPatch,
    IntegralImage,
    PatchEnvelope,
    Quadrant,
    QuadrantPatch,
    VirtualDetectorSpec,
    cone_project_point,
    denormalize_quadrant,
    dental_cbct_geometry,
    flip_horizontal,
    magnification,
    normalize_quadrant,
    pack_dual,
    patch_envelope,
    rebin_to_vd,
    split_quadrants,
    stitch_quadrants,
)

ALL_QUADRANTS = (Quadrant.Q1, Quadrant.Q2, Quadrant.Q3, Quadrant.Q4)


# ---------------------------------------------------------------------------
# magnification and point projection


def test_magnification_table():
    assert magnification(0.0, 650.0) == 1.0
    assert magnification(65.0, 650.0) == pytest.approx(1.1111111111111112, abs=1e-15)
    assert magnification(130.0, 650.0) == 1.25
    assert magnification(-650.0, 650.0) == 0.5
    with pytest.raises(ValueError):
        magnification(650.0, 650.0)
    with pytest.raises(ValueError):
        magnification(700.0, 650.0)


def test_cone_project_point_scales_by_depth():
    g = dental_cbct_geometry(DetectorGrid(64, 64, 0.73, 0.73))
    y, z = cone_project_point((65.0, 9.0, -18.0), g)
    assert (y, z) == pytest.approx((10.0, -20.0), abs=1e-12)
    # midsagittal points are fixed points of the projection
    assert cone_project_point((0.0, 7.0, 3.0), g) == pytest.approx((7.0, 3.0), abs=1e-15)


def test_cone_project_point_180_mirror():
    g = dental_cbct_geometry(DetectorGrid(64, 64, 0.73, 0.73)).with_angle(180.0)
    # mirrored depth, same world (y, z): the two views agree on the VD
    y, z = cone_project_point((-65.0, 9.0, -18.0), g)
    assert (y, z) == pytest.approx((10.0, -20.0), abs=1e-12)


def test_cone_project_point_bounds():
    g = dental_cbct_geometry(DetectorGrid(64, 64, 0.73, 0.73))
    with pytest.raises(ValueError):
        cone_project_point((650.0, 0.0, 0.0), g)  # at the source
    with pytest.raises(ValueError):
        cone_project_point((-300.0, 0.0, 0.0), g)  # at the detector plane
    cone_project_point((-299.0, 0.0, 0.0), g)  # just inside


def test_bracketing_property_seeded():
    # a structure's VD position always lies between its own position and its
    # position scaled by the extreme magnification of its depth range
    rng = np.random.default_rng(41)
    g = dental_cbct_geometry(DetectorGrid(64, 64, 0.73, 0.73))
    for trial in range(1000):
        x = rng.uniform(-250.0, 250.0)
        y = rng.uniform(-80.0, 80.0)
        z = rng.uniform(-80.0, 80.0)
        py, pz = cone_project_point((x, y, z), g)
        m = magnification(x, g.d0)
        assert py == pytest.approx(m * y, rel=1e-12, abs=1e-12)
        assert pz == pytest.approx(m * z, rel=1e-12, abs=1e-12)
        lo, hi = min(y, m * y), max(y, m * y)
        assert lo - 1e-9 <= py <= hi + 1e-9


# ---------------------------------------------------------------------------
# flip and rebin


def test_flip_horizontal_is_involution():
    rng = np.random.default_rng(42)
    img = IntegralImage(rng.uniform(0, 5, (10, 8)), (0.5, 0.5))
    once = flip_horizontal(img)
    assert np.array_equal(flip_horizontal(once).data, img.data)
    assert once.data[0, 3] == img.data[9, 3]


def test_rebin_exact_on_linear_ramp():
    # bilinear resampling reproduces a plane exactly; the rebinned value at
    # (y, z) must equal the projection read at (y, z) * d1/d0
    det = DetectorGrid(64, 64, 0.73, 0.73)
    g = dental_cbct_geometry(det)
    uu = det.u_coords()[:, None]
    vv = det.v_coords()[None, :]
    proj = IntegralImage(0.3 * uu + 0.1 * vv + 2.0, (det.su, det.sv), det.plane_origin)
    vd = VirtualDetectorSpec((16, 16), (0.5, 0.5))
    out = rebin_to_vd(proj, g, vd)
    scale = g.d1 / g.d0
    yy = vd.grid.u_coords()[:, None] * scale
    zz = vd.grid.v_coords()[None, :] * scale
    assert np.abs(out.data - (0.3 * yy + 0.1 * zz + 2.0)).max() < 1e-12
    assert out.spacing == (0.5, 0.5)


def test_rebin_center_is_fixed_point():
    rng = np.random.default_rng(43)
    det = DetectorGrid(32, 32, 1.0, 1.0)
    g = ConeGeometry(650.0, 950.0, det)
    proj = IntegralImage(rng.uniform(0, 4, (32, 32)), (1.0, 1.0), det.plane_origin)
    vd = VirtualDetectorSpec((32, 32), (1.0, 1.0))
    out = rebin_to_vd(proj, g, vd)
    # the central VD block samples the detector within +-0.74 mm of the
    # axis; bilinear values are convex combinations of that neighborhood
    c = slice(15, 17)
    local = proj.data[13:19, 13:19]
    got = out.data[c, c]
    assert got.min() >= local.min() - 1e-12
    assert got.max() <= local.max() + 1e-12


def test_rebin_out_of_range_fills_zero():
    det = DetectorGrid(8, 8, 0.5, 0.5)  # 4 mm wide detector
    g = ConeGeometry(650.0, 950.0, det)
    proj = IntegralImage(np.full((8, 8), 3.0), (0.5, 0.5), det.plane_origin)
    vd = VirtualDetectorSpec((32, 32), (0.5, 0.5))  # 16 mm wide VD
    out = rebin_to_vd(proj, g, vd)
    assert out.data[0, 16] == 0.0  # maps far off the physical detector
    assert out.data[16, 16] == pytest.approx(3.0, abs=1e-12)


def test_rebin_rejects_mismatched_dims():
    det = DetectorGrid(16, 16, 1.0, 1.0)
    g = ConeGeometry(650.0, 950.0, det)
    proj = IntegralImage(np.zeros((8, 8)), (1.0, 1.0))
    with pytest.raises(ValueError, match="dims"):
        rebin_to_vd(proj, g, VirtualDetectorSpec((8, 8), (1.0, 1.0)))


def test_virtual_detector_spec_validation():
    with pytest.raises(ValueError):
        VirtualDetectorSpec((15, 16), (0.5, 0.5))
    with pytest.raises(ValueError):
        VirtualDetectorSpec((16, 16), (0.5, -0.5))
    grid = VirtualDetectorSpec((16, 10), (0.5, 0.25)).grid
    assert (grid.nu, grid.nv, grid.su, grid.sv) == (16, 10, 0.5, 0.25)


# ---------------------------------------------------------------------------
# envelopes


def test_envelope_generic_position_is_hexagon():
    env = patch_envelope(10.0, 10.0, 10.0, 65.0, 455.0, 650.0)
    assert len(env.vertices) == 6
    # extreme magnifications: 650/585 = 10/9 and 650/195 = 10/3
    ys = [v[0] for v in env.vertices]
    zs = [v[1] for v in env.vertices]
    assert max(ys) == pytest.approx(200.0 / 3.0, abs=1e-12)
    assert max(zs) == pytest.approx(200.0 / 3.0, abs=1e-12)
    assert min(ys) == pytest.approx(100.0 / 9.0, abs=1e-12)
    # the outer square's lower-left corner lies on the diagonal between the
    # two extreme corners, so the hull drops it as collinear
    assert all(not np.allclose(v, (100.0 / 3.0, 100.0 / 3.0)) for v in env.vertices)


def test_envelope_origin_corner_is_square():
    env = patch_envelope(0.0, 0.0, 10.0, 65.0, 455.0, 650.0)
    assert len(env.vertices) == 4
    m_hi = magnification(455.0, 650.0)
    assert max(v[0] for v in env.vertices) == pytest.approx(10.0 * m_hi, abs=1e-12)


def test_envelope_on_axis_corner_is_pentagon():
    env = patch_envelope(0.0, 10.0, 10.0, 65.0, 455.0, 650.0)
    assert len(env.vertices) == 5


def test_envelope_degenerate_depth_is_square():
    env = patch_envelope(10.0, 10.0, 10.0, 65.0, 65.0, 650.0)
    assert len(env.vertices) == 4


def test_envelope_contains_all_intermediate_squares():
    rng = np.random.default_rng(44)
    for trial in range(40):
        y0 = rng.uniform(0.0, 30.0)
        z0 = rng.uniform(0.0, 30.0)
        L0 = rng.uniform(2.0, 25.0)
        x_min = rng.uniform(-200.0, 100.0)
        x_max = x_min + rng.uniform(0.0, 300.0)
        env = patch_envelope(y0, z0, L0, x_min, x_max, 650.0)
        for _ in range(25):
            m = magnification(rng.uniform(x_min, x_max), 650.0)
            py = m * rng.uniform(y0, y0 + L0)
            pz = m * rng.uniform(z0, z0 + L0)
            assert env.contains(py, pz)
        far = magnification(x_max, 650.0) * (max(y0 + L0, z0 + L0) + 1.0)
        assert not env.contains(far, far)


def test_envelope_validation():
    with pytest.raises(ValueError):
        PatchEnvelope(((0.0, 0.0), (1.0, 0.0)))
    with pytest.raises(ValueError, match="convex"):
        PatchEnvelope(((0.0, 0.0), (0.0, 1.0), (1.0, 0.0)))  # clockwise
    with pytest.raises(ValueError):
        patch_envelope(-1.0, 0.0, 5.0, 0.0, 10.0, 650.0)
    with pytest.raises(ValueError):
        patch_envelope(0.0, 0.0, 0.0, 0.0, 10.0, 650.0)
    with pytest.raises(ValueError):
        patch_envelope(0.0, 0.0, 5.0, 10.0, 0.0, 650.0)


# ---------------------------------------------------------------------------
# quadrants


def _demo_image(nu=6, nv=4):
    return np.arange(nu * nv, dtype=np.uint8).reshape(nu, nv)


def test_split_quadrants_layout():
    img = _demo_image()
    q1, q2, q3, q4 = split_quadrants(img)
    assert np.array_equal(q1.data, img[3:, 2:])
    assert np.array_equal(q2.data, img[:3, 2:])
    assert np.array_equal(q3.data, img[:3, :2])
    assert np.array_equal(q4.data, img[3:, :2])
    assert [q.quadrant for q in (q1, q2, q3, q4)] == list(ALL_QUADRANTS)
    with pytest.raises(ValueError):
        split_quadrants(np.zeros((5, 4)))


def test_normalize_orients_every_quadrant_like_q1():
    # a gradient increasing away from the image center must increase along
    # both axes in every normalized patch
    nu = nv = 8
    uu = np.abs(np.arange(nu) - (nu - 1) / 2.0)[:, None]
    vv = np.abs(np.arange(nv) - (nv - 1) / 2.0)[None, :]
    img = (uu + vv).astype(np.float64)
    for patch in split_quadrants(img):
        norm = normalize_quadrant(patch).data
        assert (np.diff(norm, axis=0) > 0).all()
        assert (np.diff(norm, axis=1) > 0).all()


def test_normalize_denormalize_is_involution():
    rng = np.random.default_rng(45)
    img = rng.integers(0, 256, (12, 10), dtype=np.uint8)
    for patch in split_quadrants(img):
        back = denormalize_quadrant(normalize_quadrant(patch))
        assert np.array_equal(back.data, patch.data)
        assert not back.normalized


def test_normalize_state_guards():
    patch = QuadrantPatch(np.zeros((2, 2), dtype=np.uint8), Quadrant.Q2)
    norm = normalize_quadrant(patch)
    with pytest.raises(ValueError):
        normalize_quadrant(norm)
    with pytest.raises(ValueError):
        denormalize_quadrant(patch)


def test_stitch_inverts_split():
    rng = np.random.default_rng(46)
    img = rng.integers(0, 256, (14, 6), dtype=np.uint8)
    assert np.array_equal(stitch_quadrants(split_quadrants(img)), img)
    normalized = [normalize_quadrant(p) for p in split_quadrants(img)]
    assert np.array_equal(stitch_quadrants(normalized, denormalize=True), img)


def test_stitch_validation():
    q1, q2, q3, q4 = split_quadrants(_demo_image())
    with pytest.raises(ValueError, match="duplicate"):
        stitch_quadrants([q1, q1, q3, q4])
    with pytest.raises(ValueError, match="missing"):
        stitch_quadrants([q1, q2, q3])
    small = QuadrantPatch(np.zeros((1, 1), dtype=np.uint8), Quadrant.Q4)
    with pytest.raises(ValueError, match="dims"):
        stitch_quadrants([q1, q2, q3, small])


def test_pack_dual_and_guards():
    rng = np.random.default_rng(47)
    a = rng.integers(0, 256, (8, 6), dtype=np.uint8)
    b = rng.integers(0, 256, (8, 6), dtype=np.uint8)
    p0 = normalize_quadrant(QuadrantPatch(a, Quadrant.Q2))
    p180 = normalize_quadrant(QuadrantPatch(b, Quadrant.Q2))
    dual = pack_dual(p0, p180)
    arr = dual.to_array()
    assert arr.shape == (8, 6, 3)
    assert np.array_equal(arr[:, :, 0], arr[:, :, 2])
    assert np.array_equal(arr[:, :, 0], p0.data)
    assert np.array_equal(arr[:, :, 1], p180.data)

    raw = QuadrantPatch(a, Quadrant.Q2)
    with pytest.raises(ValueError, match="normalized"):
        pack_dual(raw, p180)
    other = normalize_quadrant(QuadrantPatch(b, Quadrant.Q3))
    with pytest.raises(ValueError, match="quadrant"):
        pack_dual(p0, other)
    f32 = QuadrantPatch(a.astype(np.float64), Quadrant.Q2, normalized=True)
    with pytest.raises(ValueError, match="uint8"):
        pack_dual(f32, p180)


def test_dual_rgb_patch_requires_matching_r_b():
    a = np.zeros((4, 4), dtype=np.uint8)
    g = np.ones((4, 4), dtype=np.uint8)
    DualRgbPatch(r=a, g=g, b=a.copy())
    with pytest.raises(ValueError):
        DualRgbPatch(r=a, g=g, b=g)
