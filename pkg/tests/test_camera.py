"""Radial distortion model and metric conversion."""

import numpy as np
import pytest

from evflow.camera import (
    CameraIntrinsics,
    UndistortConvergenceError,
    distort,
    from_metric,
    to_metric,
    undistort,
    undistort_lut,
)

# Frozen against an independent bisection inversion of the forward radial
# model (solve r_obs = r_u (1 + k1 (r_u/f)^2 + k2 (r_u/f)^4) on the monotone
# branch, 200 halvings).
BISECTION_CASES = [
    # (focal, xp, yp, k1, k2, x_obs, y_obs, x_u, y_u)
    (115.0, 63.5, 63.5, 0.2, 0.05, 100.0, 80.0, 99.150846516153, 79.616136096343),
    (100.0, 64.0, 60.0, 0.1, -0.02, 20.0, 30.0, 21.094607460176, 30.746323268302),
]


@pytest.mark.parametrize("f,xp,yp,k1,k2,x,y,ex,ey", BISECTION_CASES)
def test_undistort_matches_bisection_oracle(f, xp, yp, k1, k2, x, y, ex, ey):
    intr = CameraIntrinsics(focal_px=f, xp=xp, yp=yp, k1=k1, k2=k2)
    xu, yu = undistort(intr, x, y)
    assert abs(xu - ex) < 1e-6
    assert abs(yu - ey) < 1e-6


@pytest.mark.parametrize("k1,k2", [(0.0, 0.0), (0.2, 0.05), (-0.1, 0.0),
                                   (0.1, -0.02)])
def test_roundtrip_over_full_grid(k1, k2):
    intr = CameraIntrinsics(k1=k1, k2=k2)
    gx, gy = np.meshgrid(np.arange(128.0), np.arange(128.0))
    ux, uy = undistort(intr, gx, gy)
    bx, by = distort(intr, ux, uy)
    assert np.abs(bx - gx).max() < 1e-6
    assert np.abs(by - gy).max() < 1e-6


def test_zero_distortion_is_identity():
    intr = CameraIntrinsics(k1=0.0, k2=0.0)
    xs = np.array([0.0, 31.25, 63.5, 127.0])
    ux, uy = undistort(intr, xs, xs[::-1])
    assert np.array_equal(ux, xs)
    assert np.array_equal(uy, xs[::-1])


def test_principal_point_is_fixed_point():
    intr = CameraIntrinsics(k1=0.3, k2=0.1)
    xu, yu = undistort(intr, intr.xp, intr.yp)
    assert xu == intr.xp and yu == intr.yp


def test_strong_negative_k_raises_convergence_error():
    # far off-axis with k1 = -0.3 the fixed-point map oscillates
    intr = CameraIntrinsics(focal_px=115.0, k1=-0.3, k2=0.0)
    with pytest.raises(UndistortConvergenceError):
        undistort(intr, 10.0, 120.0)


def test_lut_matches_pointwise():
    intr = CameraIntrinsics(k1=0.15, k2=0.02)
    lx, ly = undistort_lut(intr)
    assert lx.shape == (128, 128) and ly.shape == (128, 128)
    # table and pointwise paths may stop at different iteration counts, so
    # they agree to the documented inversion tolerance rather than bitwise
    for x, y in [(0, 0), (64, 64), (127, 3), (10, 120)]:
        ux, uy = undistort(intr, float(x), float(y))
        assert lx[y, x] == pytest.approx(ux, abs=1e-6)
        assert ly[y, x] == pytest.approx(uy, abs=1e-6)


def test_metric_conversion_inverse():
    intr = CameraIntrinsics()
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 127, 50)
    y = rng.uniform(0, 127, 50)
    xm, ym = to_metric(intr, x, y)
    xb, yb = from_metric(intr, xm, ym)
    np.testing.assert_allclose(xb, x, atol=1e-12)
    np.testing.assert_allclose(yb, y, atol=1e-12)
    # center maps to the metric origin
    assert to_metric(intr, intr.xp, intr.yp) == (0.0, 0.0)
