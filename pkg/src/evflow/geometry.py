"""Ego-motion flow fields over a planar scene, and scaled-velocity observables.

Frames and conventions
----------------------
Camera frame: X_C right, Y_C down-image, Z_C along the optical axis toward
the scene.  Metric image coordinates are xm = (x_u - x_p)/f, ym likewise;
metric flow is (u/f, v/f) with units 1/s.

For a camera looking at a planar scene, depth along the axis obeys
Z = Z0 + Z_X * X + Z_Y * Y, equivalently Z(xm, ym) = Z0 / (1 - Z_X xm - Z_Y ym),
with Z_X = -tan(roll), Z_Y = tan(pitch) for a level ground plane under
camera attitude (roll, pitch).

The scaled velocities ("visual observables") are
    vx = U_C/Z0, vy = V_C/Z0, vz = W_C/Z0
so flow divergence D = 2*vz and time-to-contact tau = 1/vz.

Body frame: X_B forward, Y_B right, Z_B down; the camera looks down and is
offset dz_m below the body origin along Z_B.  The body->camera velocity
mapping (including the rotation-induced terms from the mount offset) is
owned by body_to_camera() and matches ground_truth_observables exactly.

Rotation rates p, q, r enter the flow equations as the camera's angular
velocity components (q, p, r) about (X_C, Y_C, Z_C); flow_full, derotation
in the observables estimator, and the renderer all share this convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class EgoMotion:
    """Camera translational velocity (m/s), rotation rates (rad/s)."""

    u_c: float = 0.0   # along X_C
    v_c: float = 0.0   # along Y_C
    w_c: float = 0.0   # along Z_C (positive toward the scene)
    p: float = 0.0     # roll rate
    q: float = 0.0     # pitch rate
    r: float = 0.0     # yaw rate


@dataclass(frozen=True)
class GroundPlane:
    """Planar depth field Z = z0 + z_x * X + z_y * Y (camera frame)."""

    z0: float = 1.0
    z_x: float = 0.0
    z_y: float = 0.0

    def depth(self, xm: float, ym: float) -> float:
        """Depth along the optical axis at metric image point (xm, ym)."""
        d = 1.0 - self.z_x * xm - self.z_y * ym
        return self.z0 / d


@dataclass(frozen=True)
class VisualObservables:
    """Scaled velocities (1/s) plus a confidence value in [0, 1]."""

    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0
    k: float = 1.0


@dataclass(frozen=True)
class CameraMount:
    """Rigid mount: camera dz_m below the body origin along Z_B."""

    dz_m: float = 0.0


def plane_from_attitude(z0: float, roll: float, pitch: float) -> GroundPlane:
    """Level ground seen from a camera with the given attitude."""
    return GroundPlane(z0=z0, z_x=-math.tan(roll), z_y=math.tan(pitch))


def flow_full(motion: EgoMotion, xm, ym, depth):
    """Metric flow (1/s) of the static scene point at (xm, ym) with depth Z.

    u = -U/Z + xm W/Z - p + r ym + q xm ym - p xm^2
    v = -V/Z + ym W/Z + q - r xm + q ym^2 - p xm ym
    """
    u = (-motion.u_c + xm * motion.w_c) / depth \
        - motion.p + motion.r * ym + motion.q * xm * ym - motion.p * xm * xm
    v = (-motion.v_c + ym * motion.w_c) / depth \
        + motion.q - motion.r * xm + motion.q * ym * ym - motion.p * xm * ym
    return u, v


def flow_rotational(p: float, q: float, r: float, xm, ym):
    """Rotation-only part of flow_full (depth-independent)."""
    u = -p + r * ym + q * xm * ym - p * xm * xm
    v = q - r * xm + q * ym * ym - p * xm * ym
    return u, v


def planar_flow(obs: VisualObservables, plane: GroundPlane, xm, ym):
    """Translational flow over a planar scene, in scaled-velocity form.

    u_T = (-vx + xm vz) * (1 - z_x xm - z_y ym)
    v_T = (-vy + ym vz) * (1 - z_x xm - z_y ym)
    """
    g = 1.0 - plane.z_x * xm - plane.z_y * ym
    return (-obs.vx + xm * obs.vz) * g, (-obs.vy + ym * obs.vz) * g


def body_to_camera(u_b: float, v_b: float, w_b: float,
                   p: float, q: float, r: float,
                   mount: CameraMount) -> EgoMotion:
    """Body-frame velocity and rates -> camera-frame ego-motion.

    The mount offset makes body rotation rates contribute translational
    camera velocity:  U_C = V_B - p dz,  V_C = U_B + q dz,  W_C = W_B.
    Rates pass through unchanged (see module docstring for how they enter
    the flow equations).
    """
    dz = mount.dz_m
    return EgoMotion(u_c=v_b - p * dz, v_c=u_b + q * dz, w_c=w_b, p=p, q=q, r=r)


def ground_truth_observables(u_b: float, v_b: float, w_b: float,
                             p: float, q: float, r: float,
                             z0: float, mount: CameraMount,
                             z_c: float | None = None) -> VisualObservables:
    """Reference observables from vehicle state (confidence fixed at 1).

    vx = (V_B - p dz)/Z_C,  vy = (U_B + q dz)/Z_C,  vz = W_C/Z0,
    with Z_C the camera-center depth (defaults to Z0).
    """
    if z_c is None:
        z_c = z0
    cam = body_to_camera(u_b, v_b, w_b, p, q, r, mount)
    return VisualObservables(vx=cam.u_c / z_c, vy=cam.v_c / z_c,
                             vz=cam.w_c / z0, k=1.0)
