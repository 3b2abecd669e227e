"""Camera intrinsics, radial undistortion, and metric coordinates.

The distortion model is two-parameter Brown-Conrady radial, applied to
focal-length-normalized offsets from the principal point: an undistorted
pixel (x_u, y_u) maps to the observed pixel via

    (x - x_p) = (x_u - x_p) * (1 + k1 r^2 + k2 r^4)

with r the *undistorted* radius in units of f, so k1 and k2 are
dimensionless.  Inversion (observed -> undistorted) uses fixed-point
iteration on the radial scale factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole geometry plus radial distortion.

    focal_px  : focal length in pixels
    xp, yp    : principal point (pixels)
    k1, k2    : radial distortion coefficients (dimensionless)
    width     : sensor width in pixels
    height    : sensor height in pixels
    """

    focal_px: float = 100.0
    xp: float = 64.0
    yp: float = 64.0
    k1: float = 0.0
    k2: float = 0.0
    width: int = 128
    height: int = 128


class UndistortConvergenceError(ArithmeticError):
    """Fixed-point undistortion failed to converge within the iteration cap."""


def distort(intr: CameraIntrinsics, x_u, y_u):
    """Forward model: undistorted pixel -> observed (distorted) pixel."""
    dx = np.asarray(x_u, dtype=np.float64) - intr.xp
    dy = np.asarray(y_u, dtype=np.float64) - intr.yp
    r2 = (dx * dx + dy * dy) / (intr.focal_px * intr.focal_px)
    s = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2
    return intr.xp + dx * s, intr.yp + dy * s


def undistort(intr: CameraIntrinsics, x, y, max_iter: int = 20, tol: float = 1e-6):
    """Invert the radial model: observed pixel -> undistorted pixel.

    Iterates  d_u <- d_obs / (1 + k1 r^2 + k2 r^4)  with r the current
    undistorted-radius estimate, starting from the observed offset.
    Raises UndistortConvergenceError if the update exceeds ``tol`` pixels
    after ``max_iter`` iterations.
    """
    dx = np.asarray(x, dtype=np.float64) - intr.xp
    dy = np.asarray(y, dtype=np.float64) - intr.yp
    if intr.k1 == 0.0 and intr.k2 == 0.0:
        return intr.xp + dx, intr.yp + dy
    ux, uy = dx.copy(), dy.copy()
    inv_f2 = 1.0 / (intr.focal_px * intr.focal_px)
    for _ in range(max_iter):
        r2 = (ux * ux + uy * uy) * inv_f2
        s = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2
        nx = dx / s
        ny = dy / s
        step = np.max(np.hypot(nx - ux, ny - uy)) if np.ndim(nx) else np.hypot(nx - ux, ny - uy)
        ux, uy = nx, ny
        if step < tol:
            return intr.xp + ux, intr.yp + uy
    raise UndistortConvergenceError(
        f"radial inversion did not reach {tol} px in {max_iter} iterations "
        f"(last step {float(step):.3g} px)")


def undistort_lut(intr: CameraIntrinsics):
    """Per-pixel undistorted coordinates, shape (height, width) each.

    Computed once at pipeline start; pixelwise lookup replaces per-event
    iteration on the hot path.
    """
    xs = np.arange(intr.width, dtype=np.float64)
    ys = np.arange(intr.height, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    ux, uy = undistort(intr, gx, gy)
    return np.ascontiguousarray(ux), np.ascontiguousarray(uy)


def to_metric(intr: CameraIntrinsics, x_u, y_u):
    """Undistorted pixels -> dimensionless metric coordinates (offsets over f)."""
    f = intr.focal_px
    return (np.asarray(x_u, dtype=np.float64) - intr.xp) / f, \
           (np.asarray(y_u, dtype=np.float64) - intr.yp) / f


def from_metric(intr: CameraIntrinsics, xm, ym):
    f = intr.focal_px
    return intr.xp + np.asarray(xm, dtype=np.float64) * f, \
           intr.yp + np.asarray(ym, dtype=np.float64) * f
