"""Motion-field geometry: flow equations, ground plane, frame transforms."""

import math

import numpy as np
import pytest

from evflow.geometry import (
    CameraMount,
    EgoMotion,
    GroundPlane,
    VisualObservables,
    body_to_camera,
    flow_full,
    flow_rotational,
    ground_truth_observables,
    planar_flow,
    plane_from_attitude,
)


def test_flow_full_worked_example():
    # hand-evaluated: u = -U/Z + x W/Z - p + r y + q x y - p x^2
    #                 v = -V/Z + y W/Z + q - r x + q y^2 - p x y
    # with (U,V,W,p,q,r) = (0.1,-0.2,0.3,0.01,-0.02,0.005), (x,y,Z) = (0.2,-0.1,2)
    u, v = flow_full(EgoMotion(0.1, -0.2, 0.3, 0.01, -0.02, 0.005), 0.2, -0.1, 2.0)
    assert u == pytest.approx(-0.0305, abs=1e-12)
    assert v == pytest.approx(0.064, abs=1e-12)


def test_pure_translation_along_optical_axis_diverges_from_center():
    # approaching (W > 0): flow points radially outward, scaled by distance
    u, v = flow_full(EgoMotion(w_c=0.5), 0.3, -0.2, 1.0)
    assert u == pytest.approx(0.15)
    assert v == pytest.approx(-0.1)


def test_rotational_flow_is_depth_free_and_consistent():
    rng = np.random.default_rng(2)
    for _ in range(20):
        p, q, r = rng.uniform(-1, 1, 3)
        xm, ym = rng.uniform(-0.5, 0.5, 2)
        ur, vr = flow_rotational(p, q, r, xm, ym)
        for depth in (0.5, 2.0, 7.0):
            uf, vf = flow_full(EgoMotion(p=p, q=q, r=r), xm, ym, depth)
            assert uf == pytest.approx(ur, abs=1e-14)
            assert vf == pytest.approx(vr, abs=1e-14)


def test_flow_decomposes_into_translation_plus_rotation():
    rng = np.random.default_rng(3)
    for _ in range(20):
        uc, vc, wc, p, q, r = rng.uniform(-1, 1, 6)
        xm, ym = rng.uniform(-0.5, 0.5, 2)
        z = rng.uniform(0.5, 4.0)
        uf, vf = flow_full(EgoMotion(uc, vc, wc, p, q, r), xm, ym, z)
        ut, vt = flow_full(EgoMotion(uc, vc, wc), xm, ym, z)
        ur, vr = flow_rotational(p, q, r, xm, ym)
        assert uf == pytest.approx(ut + ur, abs=1e-12)
        assert vf == pytest.approx(vt + vr, abs=1e-12)


def test_ground_plane_depth_example():
    plane = GroundPlane(z0=2.0, z_x=0.1, z_y=-0.2)
    # Z_C = z0 / (1 - z_x x - z_y y)
    assert plane.depth(0.3, 0.5) == pytest.approx(2.0 / (1.0 - 0.03 + 0.1))
    assert plane.depth(0.0, 0.0) == pytest.approx(2.0)


def test_planar_flow_matches_full_flow_over_plane():
    # translational flow over a tilted plane in scaled form equals the full
    # equation evaluated with the plane's pointwise depth
    rng = np.random.default_rng(4)
    plane = GroundPlane(z0=1.7, z_x=0.12, z_y=-0.08)
    obs = VisualObservables(vx=0.4, vy=-0.2, vz=0.6)
    for _ in range(20):
        xm, ym = rng.uniform(-0.4, 0.4, 2)
        z = plane.depth(xm, ym)
        motion = EgoMotion(obs.vx * plane.z0, obs.vy * plane.z0,
                           obs.vz * plane.z0)
        uf, vf = flow_full(motion, xm, ym, z)
        up, vp = planar_flow(obs, plane, xm, ym)
        assert up == pytest.approx(uf, abs=1e-12)
        assert vp == pytest.approx(vf, abs=1e-12)


def test_plane_from_attitude():
    plane = plane_from_attitude(2.0, roll=0.1, pitch=-0.05)
    assert plane.z0 == 2.0
    assert plane.z_x == pytest.approx(-math.tan(0.1))
    assert plane.z_y == pytest.approx(math.tan(-0.05))
    level = plane_from_attitude(3.0, 0.0, 0.0)
    assert level.z_x == 0.0 and level.z_y == 0.0


def test_body_to_camera_axis_swap_and_mount_arm():
    # body X maps to camera Y and body Y to camera X; the mount offset turns
    # rotation rates into translational camera velocity
    mount = CameraMount(dz_m=0.1)
    motion = body_to_camera(0.0, 0.0, 0.0, p=0.0, q=2.0, r=0.0, mount=mount)
    assert motion.u_c == pytest.approx(0.0)     # U_C = V_B - p dz
    assert motion.v_c == pytest.approx(0.2)     # V_C = U_B + q dz
    assert motion.w_c == pytest.approx(0.0)
    assert (motion.p, motion.q, motion.r) == (0.0, 2.0, 0.0)
    swapped = body_to_camera(0.5, -0.3, 0.8, 0.0, 0.0, 0.0, mount=CameraMount())
    assert (swapped.u_c, swapped.v_c, swapped.w_c) == (-0.3, 0.5, 0.8)


def test_ground_truth_observables_scales_by_height():
    obs = ground_truth_observables(0.5, -0.3, 0.8, 0.0, 0.0, 0.0,
                                   z0=2.0, mount=CameraMount())
    assert obs.vx == pytest.approx(-0.15)
    assert obs.vy == pytest.approx(0.25)
    assert obs.vz == pytest.approx(0.4)
    assert obs.k == 1.0
    # separate camera-center depth scales the lateral components only
    obs2 = ground_truth_observables(0.5, -0.3, 0.8, 0.0, 0.0, 0.0,
                                    z0=2.0, mount=CameraMount(), z_c=1.0)
    assert obs2.vx == pytest.approx(-0.3)
    assert obs2.vz == pytest.approx(0.4)
