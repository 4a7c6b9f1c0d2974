import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from hapticforceps.errors import (
    DegenerateConfiguration,
    DepthNonPositive,
    InsufficientCorrespondences,
    NonPositiveDepth,
    SingularIntrinsics,
)
from hapticforceps.geometry import (
    CameraIntrinsics,
    Homography,
    Pose,
    TargetLayout,
    decompose_homography,
    nearest_rotation,
    project_marker,
    project_points,
    relative_pose,
    solve_homography,
)

from support import INTR, LAYOUT, frob, seeds, workspace_pose


def pinhole_oracle(intr, R, t, p):
    """Direct evaluation of u = fx X/Z + u0, v = fy Y/Z + v0."""
    X = R @ np.array([p[0], p[1], 0.0]) + t
    return np.array([intr.fx * X[0] / X[2] + intr.u0, intr.fy * X[1] / X[2] + intr.v0])


# -- projection ---------------------------------------------------------------

def test_optical_axis_point_maps_to_principal_point():
    intr = CameraIntrinsics(1.0, 1.0, 0.0, 0.0)
    uv = project_marker(intr, Pose(np.eye(3), [0, 0, 1.0]), (0.0, 0.0))
    assert np.allclose(uv, [0.0, 0.0], atol=0)


def test_projection_hand_value():
    intr = CameraIntrinsics(100.0, 100.0, 200.0, 200.0)
    uv = project_marker(intr, Pose(np.eye(3), [0, 0, 10.0]), (1.0, 0.0))
    assert np.allclose(uv, [210.0, 200.0], atol=1e-12)


def test_plane_behind_camera_raises():
    with pytest.raises(DepthNonPositive):
        project_marker(INTR, Pose(np.eye(3), [0, 0, -1.0]), (0.0, 0.0))


def test_projection_matches_pinhole_oracle():
    rng = np.random.default_rng(3)
    for _ in range(50):
        pose = workspace_pose(rng)
        p = rng.uniform(-1.5, 1.5, 2)
        expect = pinhole_oracle(INTR, pose.rotation, pose.translation, p)
        assert np.allclose(project_marker(INTR, pose, p), expect, atol=1e-10)


def test_homography_from_pose_agrees_with_projection():
    rng = np.random.default_rng(4)
    pose = workspace_pose(rng)
    H = Homography.from_pose(INTR, pose)
    assert np.allclose(H.apply(LAYOUT.markers), project_points(INTR, pose, LAYOUT.markers), atol=1e-10)
    assert np.allclose(H.inverse_apply(H.apply(LAYOUT.markers)), LAYOUT.markers, atol=1e-12)


# -- homography estimation ----------------------------------------------------

def test_unit_square_gives_identity():
    sq = [(0, 0), (1, 0), (0, 1), (1, 1)]
    H = solve_homography(sq, sq)
    assert np.allclose(H.matrix, np.eye(3), atol=1e-12)


def test_random_homography_recovered():
    rng = np.random.default_rng(5)
    for _ in range(20):
        intr = CameraIntrinsics(*rng.uniform(200, 600, 2), *rng.uniform(150, 250, 2))
        Hstar = Homography.from_pose(intr, workspace_pose(rng))
        H = solve_homography(LAYOUT.markers, Hstar.apply(LAYOUT.markers))
        assert np.max(np.abs(H.matrix - Hstar.matrix)) < 1e-9


def test_three_pairs_insufficient():
    with pytest.raises(InsufficientCorrespondences):
        solve_homography([(0, 0), (1, 0), (0, 1)], [(0, 0), (1, 0), (0, 1)])


def test_collinear_points_degenerate():
    pts = [(0, 0), (1, 0), (2, 0), (3, 0), (4, 0)]
    with pytest.raises(DegenerateConfiguration):
        solve_homography(pts, pts)


def test_homogeneous_pixel_input_accepted():
    rng = np.random.default_rng(6)
    Hstar = Homography.from_pose(INTR, workspace_pose(rng))
    px = Hstar.apply(LAYOUT.markers)
    homog = np.column_stack([px, np.ones(len(px))]) * 3.7
    assert np.allclose(solve_homography(LAYOUT.markers, homog).matrix, Hstar.matrix, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(seeds, st.floats(-1e3, 1e3).filter(lambda s: abs(s) > 1e-3))
def test_homography_scale_invariance(seed, scale):
    rng = np.random.default_rng(seed)
    px = Homography.from_pose(INTR, workspace_pose(rng)).apply(LAYOUT.markers)
    px = px + rng.normal(0, 0.3, px.shape)  # invariance must hold on noisy data too
    homog = np.column_stack([px, np.ones(len(px))])
    H1 = solve_homography(LAYOUT.markers, homog)
    H2 = solve_homography(LAYOUT.markers, homog * scale)
    assert np.allclose(H1.matrix, H2.matrix, rtol=1e-9, atol=1e-9)


# -- decomposition ------------------------------------------------------------

def test_decompose_square_on_pose():
    intr = CameraIntrinsics(100.0, 100.0, 200.0, 200.0)
    pose = decompose_homography(Homography.from_pose(intr, Pose(np.eye(3), [0, 0, 10.0])), intr)
    assert frob(pose.rotation, np.eye(3)) < 1e-9
    assert np.allclose(pose.translation, [0, 0, 10.0], atol=1e-9)


def test_decompose_tilted_pose():
    intr = CameraIntrinsics(100.0, 100.0, 200.0, 200.0)
    R = Rotation.from_euler("x", 10, degrees=True).as_matrix()
    truth = Pose(R, [1.0, -2.0, 15.0])
    pose = decompose_homography(Homography.from_pose(intr, truth), intr)
    assert frob(pose.rotation, R) < 1e-8
    assert np.allclose(pose.translation, truth.translation, atol=1e-8)


def test_decompose_orthonormal_columns_on_exact_data():
    rng = np.random.default_rng(7)
    for _ in range(50):
        pose = decompose_homography(Homography.from_pose(INTR, workspace_pose(rng)), INTR)
        r1, r2 = pose.rotation[:, 0], pose.rotation[:, 1]
        assert abs(r1 @ r2) < 1e-9
        assert abs(np.linalg.norm(r2) - 1) < 1e-9


def test_singular_intrinsics():
    H = Homography.from_pose(INTR, Pose(np.eye(3), [0, 0, 8.0]))
    A = np.array([[400.0, 0, 200], [0, 0, 200], [0, 0, 1]])
    with pytest.raises(SingularIntrinsics):
        decompose_homography(H, A)


def test_non_positive_depth():
    # an intrinsic matrix with a flipped last row puts the recovered plane behind the camera
    H = Homography.from_pose(INTR, Pose(np.eye(3), [0, 0, 8.0]))
    A = INTR.matrix @ np.diag([1.0, 1.0, -1.0])
    with pytest.raises(NonPositiveDepth):
        decompose_homography(H, A)


@settings(max_examples=100, deadline=None)
@given(seeds, st.floats(0.0, 5.0))
def test_decompose_returns_valid_pose_on_noisy_h(seed, noise):
    rng = np.random.default_rng(seed)
    px = Homography.from_pose(INTR, workspace_pose(rng)).apply(LAYOUT.markers)
    H = solve_homography(LAYOUT.markers, px + rng.normal(0, noise, px.shape))
    pose = decompose_homography(H, INTR)
    R = pose.rotation
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-9)
    assert abs(np.linalg.det(R) - 1) < 1e-9


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_projective_round_trip(seed):
    rng = np.random.default_rng(seed)
    truth = workspace_pose(rng)
    H = solve_homography(LAYOUT.markers, project_points(INTR, truth, LAYOUT.markers))
    pose = decompose_homography(H, INTR)
    assert frob(pose.rotation, truth.rotation) < 1e-8
    assert np.linalg.norm(pose.translation - truth.translation) < 1e-8


def test_nearest_rotation_fixes_reflection():
    M = np.diag([1.0, 1.0, -1.0])
    R = nearest_rotation(M)
    assert abs(np.linalg.det(R) - 1) < 1e-12


# -- poses --------------------------------------------------------------------

def test_relative_pose_identity():
    T = Pose.from_rotvec([0.1, -0.2, 0.05], [0.3, 0.1, 8.0])
    rel = relative_pose(T, T)
    assert frob(rel.matrix(), np.eye(4)) < 1e-12


def test_relative_pose_hand_value():
    rel = relative_pose(Pose(np.eye(3), [0, 0, 10.0]), Pose(np.eye(3), [1.0, 0, 10.0]))
    assert frob(rel.rotation, np.eye(3)) < 1e-15
    assert np.allclose(rel.translation, [1.0, 0, 0], atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_relative_pose_group_laws(seed):
    rng = np.random.default_rng(seed)
    A, B, C = (workspace_pose(rng) for _ in range(3))
    assert frob((A @ relative_pose(A, B)).matrix(), B.matrix()) < 1e-12
    chain = relative_pose(A, B) @ relative_pose(B, C)
    assert frob(chain.matrix(), relative_pose(A, C).matrix()) < 1e-12


def test_pose_rejects_non_rotation():
    with pytest.raises(ValueError):
        Pose(np.diag([1.0, 1.0, -1.0]), [0, 0, 0])
    with pytest.raises(ValueError):
        Pose(np.eye(3) * 1.001, [0, 0, 0])


def test_pose_is_immutable():
    T = Pose.identity()
    with pytest.raises(ValueError):
        T.translation[0] = 1.0


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        CameraIntrinsics(0.0, 1.0, 0.0, 0.0)


def test_layout_default_shape():
    assert LAYOUT.n == 12
    r = np.hypot(*LAYOUT.markers.T)
    assert np.ptp(r) < 1e-9 and abs(r[0] - 1.2) < 1e-12
    # listed bottom (largest y at the square-on pose) to top
    assert np.all(np.diff(LAYOUT.markers[:, 1]) < 0)


def test_layout_rejects_off_circle_points():
    with pytest.raises(ValueError):
        TargetLayout([[1, 0], [0, 1], [-1, 0], [0, -1.1]])
