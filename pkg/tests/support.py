"""Shared samplers and oracles for the test suite."""
import itertools
import json
import math

import numpy as np
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment
from scipy.spatial.transform import Rotation

from hapticforceps.config import Config
from hapticforceps.forces import ForcepsGeometry
from hapticforceps.geometry import CameraIntrinsics, Pose, TargetLayout

INTR = CameraIntrinsics(400.0, 400.0, 200.0, 200.0)
LAYOUT = TargetLayout.circular()
STANDOFF = 8.0
REST = Pose(np.eye(3), [0.0, 0.0, STANDOFF])


def workspace_displacement(rng, lateral=1.0, axial=2.0, tilt_deg=10.0) -> Pose:
    """Random target motion relative to rest: +-lateral, +-axial mm, tilt up to tilt_deg."""
    d = np.array([rng.uniform(-lateral, lateral), rng.uniform(-lateral, lateral),
                  rng.uniform(-axial, axial)])
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    ang = np.deg2rad(rng.uniform(0.0, tilt_deg))
    return Pose.from_rotvec(axis * ang, d)


def workspace_pose(rng, **kw) -> Pose:
    """Camera-from-target pose anywhere in the flexure workspace."""
    return REST @ workspace_displacement(rng, **kw)


def frob(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


def default_config(**sections) -> Config:
    """Default config with per-section overrides, e.g. grasp={"F_p_target": 0.2}."""
    return Config().with_overrides([f"{s}.{k}={json.dumps(v)}"
                                    for s, kv in sections.items() for k, v in kv.items()])


def l1_oracle(detections, reference):
    """Assignment of detections to reference indexes minimising total L1 distance."""
    det = np.asarray(detections, dtype=float)
    ref = np.asarray(reference, dtype=float)
    cost = np.abs(det[:, None, :] - ref[None, :, :]).sum(axis=2)
    rows, cols = linear_sum_assignment(cost)
    return dict(zip(rows.tolist(), cols.tolist()))


def brute_force_l1(detections, reference):
    """Exhaustive version of ``l1_oracle`` for very small sets."""
    det = np.asarray(detections, dtype=float)
    ref = np.asarray(reference, dtype=float)
    best, arg = np.inf, None
    for perm in itertools.permutations(range(len(ref)), len(det)):
        c = sum(np.abs(det[i] - ref[j]).sum() for i, j in enumerate(perm))
        if c < best:
            best, arg = c, perm
    return dict(enumerate(arg))


def random_rotation(rng) -> np.ndarray:
    return Rotation.random(random_state=rng.integers(2**31)).as_matrix()


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
seeds = st.integers(0, 2**32 - 1)


def smooth_path(rng, n, lateral=1.0, axial=2.0, tilt_deg=10.0):
    """Target displacements along a smooth closed path starting at rest.

    Each degree of freedom is a sine with 1-3 cycles over the path, so the
    whole workspace box is visited while frame-to-frame motion stays small.
    """
    k = np.arange(n) / n
    amp = np.array([lateral, lateral, axial] + [np.deg2rad(tilt_deg) / np.sqrt(3)] * 3)
    amp = amp * rng.uniform(0.6, 1.0, 6) * rng.choice([-1, 1], 6)
    cyc = rng.integers(1, 4, 6)
    q = amp * np.sin(2 * np.pi * np.outer(k, cyc))
    return [Pose.from_rotvec(row[3:], row[:3]) for row in q]


def torque_balance_grasp(F_d, l2, lever, alpha, rot, jaw_dir_angle, efficiency=1.0):
    """Grip force that zeroes the moment of one jaw about its pivot (batched).

    Built from explicit vectors in arbitrarily oriented frames ``rot`` (N, 3, 3):
    half the cable tension pulls the jaw tail (arm ``l2`` at ``alpha`` from the
    instrument axis) along the axis; the tissue pushes on the jaw at ``lever``
    from the pivot, perpendicular to the jaw. Moments are cross products.
    """
    col = lambda v: np.asarray(v, dtype=float)[:, None]
    axis = rot[:, :, 2]
    perp = rot[:, :, 0]
    normal = np.cross(axis, perp)  # rotation axis of the jaw
    tail = col(l2) * (col(np.cos(alpha)) * axis + col(np.sin(alpha)) * perp)
    pull = -col(efficiency * F_d / 2.0) * axis
    jaw_u = col(np.cos(jaw_dir_angle)) * axis + col(np.sin(jaw_dir_angle)) * perp
    jaw = col(lever) * jaw_u
    push_dir = np.cross(normal, jaw_u)  # in-plane, perpendicular to the jaw
    m_cable = (np.cross(tail, pull) * normal).sum(axis=1)
    m_unit = (np.cross(jaw, push_dir) * normal).sum(axis=1)
    return np.abs(-m_cable / m_unit)


def random_geometries(rng, n):
    l1, l2 = rng.uniform(0.5, 3.0, (2, n))
    l12 = rng.uniform(np.abs(l1 - l2) + 0.01, l1 + l2 - 0.01)
    return [ForcepsGeometry(a, b, c, d, e) for a, b, c, d, e in
            zip(l1, l2, rng.uniform(0.5, 5.0, n), l12, rng.uniform(0.5, 5.0, n))]


def hausdorff_oracle(A, B):
    """Plain double loop over all pairs."""
    def dist(p, q):
        dx, dy, dz = p[0] - q[0], p[1] - q[1], p[2] - q[2]
        return math.sqrt(dx * dx + dy * dy + dz * dz)

    a_to_b = [min(dist(p, q) for q in B) for p in A]
    b_to_a = [min(dist(q, p) for p in A) for q in B]
    d_a = max(math.fsum(a_to_b) / len(a_to_b), math.fsum(b_to_a) / len(b_to_a))
    d_h = max(max(a_to_b), max(b_to_a))
    return d_a, d_h


def stats_oracle(e, r, mfa):
    """Element-by-element loop; sums are exact (fsum) so the result is order-free."""
    err = [abs(a - b) for a, b in zip(e, r)]
    mean = math.fsum(err) / len(err)
    mx = max(err)
    rms = math.sqrt(math.fsum(x * x for x in err) / len(err))
    return mean, mx, rms, 100 * mean / mfa, 100 * mx / mfa, 100 * rms / mfa
