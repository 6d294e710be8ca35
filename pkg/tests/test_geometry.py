import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from goalforge import geometry as gm
from goalforge.errors import DegenerateProjection, PointBehindCamera


def ortho_100():
    return gm.Camera.top_down((0.0, 0.0), (10.0, 10.0), (100, 100))


def pinhole_200():
    return gm.Camera("pinhole", (0.0, 0.0, 10.0), (0.0, 0.0, 0.0), (0.0, 1.0, 0.0), 100.0, (200, 200))


def test_ortho_center_maps_to_image_center():
    p = gm.project_point(ortho_100(), (0.0, 0.0, 0.0))
    assert p == (50.0, 50.0, False)


def test_ortho_window_edge_is_clamped_and_flagged():
    p = gm.project_point(ortho_100(), (5.0, 0.0, 0.0))
    assert (p.u, p.v) == (99.0, 50.0)
    assert p.out_of_window


def test_ortho_y_up_maps_to_v_down():
    p = gm.project_point(ortho_100(), (0.0, 2.0, 0.0))
    assert p.uv == pytest.approx((50.0, 30.0))


def test_pinhole_offset_point():
    p = gm.project_point(pinhole_200(), (1.0, 0.0, 0.0))
    assert p.uv == pytest.approx((110.0, 100.0))
    assert not p.out_of_window


def test_pinhole_point_behind_camera():
    with pytest.raises(PointBehindCamera):
        gm.project_point(pinhole_200(), (0.0, 0.0, 11.0))


def test_force_along_x_has_zero_pixel_angle():
    _, ang, mag = gm.project_force(ortho_100(), (0.0, 0.0, 0.0), (1.0, 0.0, 0.0), 0.3)
    assert ang == pytest.approx(0.0)
    assert mag == 0.3


def test_force_along_y_points_up_in_image():
    _, ang, _ = gm.project_force(ortho_100(), (0.0, 0.0, 0.0), (0.0, 1.0, 0.0), 0.3)
    assert ang == pytest.approx(-math.pi / 2)


def test_force_along_optical_axis_is_degenerate():
    with pytest.raises(DegenerateProjection):
        gm.project_force(pinhole_200(), (0.0, 0.0, 0.0), (0.0, 0.0, 1.0), 0.5)


def test_force_direction_must_be_unit():
    with pytest.raises(ValueError):
        gm.project_force(ortho_100(), (0, 0, 0), (2.0, 0.0, 0.0), 0.5)


def test_camera_dict_round_trip():
    cam = pinhole_200()
    assert gm.Camera.from_dict(cam.to_dict()) == cam


def test_gaussian_peak_and_one_sigma():
    cfg = gm.GaussianBlobCfg(sigma=4.0)
    f = gm.gaussian_field((20.0, 10.0), cfg, 30, 40)
    assert f[10, 20] == pytest.approx(1.0)
    assert f[10, 24] == pytest.approx(math.exp(-0.5))
    assert f[14, 20] == pytest.approx(0.6065, abs=1e-4)


def test_gaussian_matches_direct_evaluation():
    # separable product against the naive per-pixel formula
    cfg = gm.GaussianBlobCfg(sigma=3.3, amplitude=0.7)
    c = (11.4, 6.2)
    f = gm.gaussian_field(c, cfg, 17, 23)
    vv, uu = np.mgrid[0:17, 0:23]
    ref = 0.7 * np.exp(-((uu - c[0]) ** 2 + (vv - c[1]) ** 2) / (2 * 3.3 ** 2))
    np.testing.assert_allclose(f, ref, rtol=1e-12, atol=1e-15)


def test_gaussian_cfg_validation():
    with pytest.raises(ValueError):
        gm.GaussianBlobCfg(sigma=0.0)
    with pytest.raises(ValueError):
        gm.GaussianBlobCfg(sigma=1.0, amplitude=1.5)


coord = st.floats(-4.9, 4.9)


@given(coord, coord, coord, coord, st.floats(0.0, 1.0))
def test_ortho_projection_is_affine(x1, y1, x2, y2, a):
    cam = ortho_100()
    p = gm.project_point(cam, (x1, y1, 0.0))
    q = gm.project_point(cam, (x2, y2, 0.0))
    m = gm.project_point(cam, (a * x1 + (1 - a) * x2, a * y1 + (1 - a) * y2, 0.0))
    assert m.u == pytest.approx(a * p.u + (1 - a) * q.u, abs=1e-9)
    assert m.v == pytest.approx(a * p.v + (1 - a) * q.v, abs=1e-9)


@given(st.floats(0.0, 2 * math.pi), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_force_angle_ignores_magnitude(theta, m1, m2):
    d = (math.cos(theta), math.sin(theta), 0.0)
    a1 = gm.project_force(ortho_100(), (0.5, -0.3, 0.0), d, m1)[1]
    a2 = gm.project_force(ortho_100(), (0.5, -0.3, 0.0), d, m2)[1]
    assert a1 == a2


@given(st.floats(-math.pi + 1e-3, math.pi - 1e-3))
def test_ortho_pixel_angle_is_negated_world_angle(theta):
    # square pixels, y flipped: pixel angle = -world angle
    a = gm.world_to_pixel_angle(ortho_100(), (0.0, 0.0), theta)
    assert gm.wrap_angle(a + theta) == pytest.approx(0.0, abs=1e-6)


@given(st.floats(0.5, 20.0), st.floats(0.0, 30.0), st.floats(0.0, 20.0), st.integers(-8, 8), st.integers(-8, 8))
def test_gaussian_bounded_and_symmetric(sigma, cu, cv, du, dv):
    cfg = gm.GaussianBlobCfg(sigma)
    f = gm.gaussian_field((float(round(cu)), float(round(cv))), cfg, 21, 31)
    assert f.min() >= 0.0 and f.max() <= 1.0
    # symmetry about an integer center
    big = gm.gaussian_field((20.0, 20.0), cfg, 41, 41)
    assert big[20 + dv, 20 + du] == pytest.approx(big[20 - dv, 20 - du], rel=1e-12)


def test_gaussian_mass_grows_with_sigma():
    h, w = 40, 60
    diag = math.hypot(h, w)
    sums = [gm.gaussian_field((30.0, 20.0), gm.GaussianBlobCfg(s), h, w).sum()
            for s in np.linspace(0.5, diag / 4, 25)]
    assert all(b > a for a, b in zip(sums, sums[1:]))
