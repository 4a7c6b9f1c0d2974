"""Pinhole projection, planar homographies and rigid poses.

Conventions: millimetres for metric quantities, pixels with the origin at the
top-left corner (u to the right, v downward), integer coordinates at pixel
centres. A ``Pose`` maps points from a child frame into its parent frame,
``p_parent = R @ p_child + t``; the camera-from-target pose is the usual
input to the projection.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import (
    DegenerateConfiguration,
    DepthNonPositive,
    InsufficientCorrespondences,
    NonPositiveDepth,
    SingularIntrinsics,
)

ORTHO_TOL = 1e-9


def _frozen(a, shape):
    a = np.array(a, dtype=np.float64)
    if a.shape != shape:
        raise ValueError(f"expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite entries")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    u0: float
    v0: float
    width: int = 400
    height: int = 400

    def __post_init__(self):
        for name in ("fx", "fy", "u0", "v0"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("fx and fy must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.u0],
                         [0.0, self.fy, self.v0],
                         [0.0, 0.0, 1.0]])

    @property
    def inverse(self) -> np.ndarray:
        return np.array([[1.0 / self.fx, 0.0, -self.u0 / self.fx],
                         [0.0, 1.0 / self.fy, -self.v0 / self.fy],
                         [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Pose:
    """Rigid transform; ``rotation`` is orthonormal with det +1."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = _frozen(self.rotation, (3, 3))
        t = _frozen(np.ravel(self.translation), (3,))
        if np.abs(R.T @ R - np.eye(3)).max() > ORTHO_TOL or abs(np.linalg.det(R) - 1) > ORTHO_TOL:
            raise ValueError("rotation is not a proper orthonormal matrix")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_rotvec(cls, rotvec, translation=(0.0, 0.0, 0.0)) -> "Pose":
        return cls(Rotation.from_rotvec(rotvec).as_matrix(), translation)

    @classmethod
    def from_matrix(cls, T) -> "Pose":
        T = np.asarray(T, dtype=np.float64)
        return cls(T[:3, :3], T[:3, 3])

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def __matmul__(self, other: "Pose") -> "Pose":
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def rotvec(self) -> np.ndarray:
        return Rotation.from_matrix(self.rotation).as_rotvec()


@dataclass(frozen=True)
class Homography:
    """Plane-to-image homography normalised so that the (3,3) entry is 1."""

    matrix: np.ndarray

    def __post_init__(self):
        H = np.array(self.matrix, dtype=np.float64)
        if H.shape != (3, 3) or not np.all(np.isfinite(H)):
            raise ValueError("homography must be a finite 3x3 matrix")
        if H[2, 2] == 0:
            raise DegenerateConfiguration("h33 is zero; cannot normalise")
        H = H / H[2, 2]
        if abs(np.linalg.det(H)) < 1e-300:
            raise DegenerateConfiguration("homography is singular")
        H.setflags(write=False)
        object.__setattr__(self, "matrix", H)

    @classmethod
    def from_pose(cls, intr: CameraIntrinsics, pose: Pose) -> "Homography":
        R, t = pose.rotation, pose.translation
        return cls(intr.matrix @ np.column_stack([R[:, 0], R[:, 1], t]))

    def apply(self, plane_points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(plane_points, dtype=np.float64))
        q = p @ self.matrix[:, :2].T + self.matrix[:, 2]
        return q[:, :2] / q[:, 2:3]

    def inverse_apply(self, pixels) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
        Hi = np.linalg.inv(self.matrix)
        q = p @ Hi[:, :2].T + Hi[:, 2]
        return q[:, :2] / q[:, 2:3]


@dataclass(frozen=True)
class TargetLayout:
    """Marker centres (mm) in the target frame, indexed bottom-to-top.

    Index order matches the order in which a blob detector lists the markers
    when the target faces the camera squarely, so the last index is the
    top-most marker (the one hidden behind the cable channel at rest).
    """

    markers: np.ndarray
    central_hole_radius: float = 0.3
    marker_diameter: float = 0.15

    def __post_init__(self):
        m = np.array(self.markers, dtype=np.float64)
        if m.ndim != 2 or m.shape[1] != 2 or len(m) < 4:
            raise ValueError("markers must be an (n>=4, 2) array")
        r = np.hypot(m[:, 0], m[:, 1])
        if np.ptp(r) > 1e-9:
            raise ValueError("markers must lie on one circle about the target centre")
        m.setflags(write=False)
        object.__setattr__(self, "markers", m)

    @classmethod
    def circular(cls, n=12, radius=1.2, phase_deg=7.5, central_hole_radius=0.3,
                 marker_diameter=0.15) -> "TargetLayout":
        ang = np.deg2rad(phase_deg) + 2 * np.pi * np.arange(n) / n
        pts = radius * np.column_stack([np.cos(ang), np.sin(ang)])
        # bottom of the image is +y at the square-on pose
        order = np.lexsort((pts[:, 0], -pts[:, 1]))
        return cls(pts[order], central_hole_radius, marker_diameter)

    @property
    def n(self) -> int:
        return len(self.markers)

    @property
    def radius(self) -> float:
        return float(np.hypot(*self.markers[0]))


def project_points(intr: CameraIntrinsics, pose: Pose, points) -> np.ndarray:
    """Project plane points (N, 2) in the target frame to pixels (N, 2)."""
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    cam = pose.apply(np.column_stack([p, np.zeros(len(p))]))
    z = cam[:, 2]
    if np.any(z <= 0):
        raise DepthNonPositive(f"point behind the camera (min depth {z.min():.6g} mm)")
    u = intr.fx * cam[:, 0] / z + intr.u0
    v = intr.fy * cam[:, 1] / z + intr.v0
    return np.column_stack([u, v])


def project_marker(intr: CameraIntrinsics, pose: Pose, p) -> np.ndarray:
    return project_points(intr, pose, [p])[0]


def _dehomogenise(pixels) -> np.ndarray:
    q = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    if q.shape[1] == 3:
        q = q[:, :2] / q[:, 2:3]
    elif q.shape[1] != 2:
        raise ValueError("pixels must be (N, 2) or homogeneous (N, 3)")
    return q


def dlt_system(plane_points, pixels):
    """Stack the two linear equations per correspondence (h33 fixed to 1).

    Unknown order is h11, h12, h13, h21, h22, h23, h31, h32.
    """
    p = np.asarray(plane_points, dtype=np.float64)
    q = np.asarray(pixels, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    u, v = q[:, 0], q[:, 1]
    one, zero = np.ones_like(x), np.zeros_like(x)
    rows_u = np.column_stack([x, y, one, zero, zero, zero, -x * u, -y * u])
    rows_v = np.column_stack([zero, zero, zero, x, y, one, -x * v, -y * v])
    M = np.empty((2 * len(p), 8))
    M[0::2], M[1::2] = rows_u, rows_v
    b = np.empty(2 * len(p))
    b[0::2], b[1::2] = u, v
    return M, b


def solve_homography(plane_points, pixels, rank_tol=1e-10) -> Homography:
    """Least-squares homography from >= 4 plane/pixel correspondences."""
    p = np.atleast_2d(np.asarray(plane_points, dtype=np.float64))
    q = _dehomogenise(pixels)
    if len(p) != len(q):
        raise ValueError("plane_points and pixels differ in length")
    if len(p) < 4:
        raise InsufficientCorrespondences(f"need at least 4 pairs, got {len(p)}")
    M, b = dlt_system(p, q)
    # column equilibration changes variables only, not the least-squares minimiser
    scale = np.linalg.norm(M, axis=0)
    scale[scale == 0] = 1.0
    Ms = M / scale
    s = np.linalg.svd(Ms, compute_uv=False)
    if s[-1] <= rank_tol * s[0]:
        raise DegenerateConfiguration("correspondences do not determine a homography (rank < 8)")
    h, *_ = np.linalg.lstsq(Ms, b, rcond=None)
    h = h / scale
    return Homography(np.append(h, 1.0).reshape(3, 3))


def decompose_homography(H: Homography, intr) -> Pose:
    """Recover the camera-from-target pose from a plane homography."""
    A = intr.matrix if isinstance(intr, CameraIntrinsics) else np.asarray(intr, dtype=np.float64)
    if not np.isfinite(A).all() or abs(np.linalg.det(A)) < 1e-12:
        raise SingularIntrinsics("intrinsic matrix is not invertible")
    Hm = H.matrix if isinstance(H, Homography) else Homography(H).matrix
    B = np.linalg.solve(A, Hm)
    n1, n2 = np.linalg.norm(B[:, 0]), np.linalg.norm(B[:, 1])
    # geometric mean of the two column-norm scale estimates
    lam = 1.0 / np.sqrt(n1 * n2)
    r1, r2, t = lam * B[:, 0], lam * B[:, 1], lam * B[:, 2]
    if t[2] <= 0:
        raise NonPositiveDepth(f"recovered depth t_z = {t[2]:.6g} mm")
    R = nearest_rotation(np.column_stack([r1, r2, np.cross(r1, r2)]))
    return Pose(R, t)


def nearest_rotation(M) -> np.ndarray:
    """Orthogonal polar factor of ``M`` restricted to det +1."""
    U, _, Vt = np.linalg.svd(M)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def relative_pose(T_C_M0: Pose, T_C_Mt: Pose) -> Pose:
    """Pose of the current target frame expressed in the initial one."""
    return T_C_M0.inverse() @ T_C_Mt


def rotation_error(R_est, R_true) -> float:
    """Geodesic angle (rad) between two rotations."""
    return float(np.linalg.norm(Rotation.from_matrix(np.asarray(R_est) @ np.asarray(R_true).T).as_rotvec()))
