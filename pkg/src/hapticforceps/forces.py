"""Flexure stiffness, pushing/pulling force and jaw grasping force.

Sign conventions (frame of the target at rest, +z from the camera toward the
jaws): ``K @ d`` is the load carried by the flexure, i.e. the net external
force applied to the sensing head. The cable pulls the head toward the
camera, so at rest its force is ``(0, 0, -F_d)``. A tissue push on the jaws
is negative along z, a tissue pull positive.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GeometryInfeasible, RankDeficientDisplacements, SingularStiffness
from .geometry import Pose

# Calibrated prototype flexure (N/mm).
DEFAULT_STIFFNESS = np.array([
    [0.9592, 0.0932, -0.0184],
    [0.1210, 0.8807, -0.0170],
    [0.0013, 0.0012, 3.8520],
])


def check_stiffness(K) -> np.ndarray:
    K = np.asarray(K, dtype=np.float64)
    if K.shape != (3, 3) or not np.isfinite(K).all():
        raise ValueError("stiffness must be a finite 3x3 matrix")
    if np.linalg.eigvalsh((K + K.T) / 2).min() <= 0:
        raise ValueError("stiffness must have a positive-definite symmetric part")
    return K


def force_from_displacement(K, d) -> np.ndarray:
    return np.asarray(K, dtype=np.float64) @ np.asarray(d, dtype=np.float64)


def spring_displacement(K, f) -> np.ndarray:
    K = np.asarray(K, dtype=np.float64)
    if np.linalg.cond(K) > 1e12:
        raise SingularStiffness("stiffness matrix is singular or nearly so")
    return np.linalg.solve(K, np.asarray(f, dtype=np.float64))


def calibrate_stiffness(displacements, forces, cond_limit=1e10) -> np.ndarray:
    """Ordinary least-squares fit of ``K`` in ``f = K d`` over all samples."""
    D = np.atleast_2d(np.asarray(displacements, dtype=np.float64))
    F = np.atleast_2d(np.asarray(forces, dtype=np.float64))
    if D.shape != F.shape or D.shape[1] != 3:
        raise ValueError("displacements and forces must both be (N, 3)")
    if len(D) < 3:
        raise RankDeficientDisplacements(f"need at least 3 samples, got {len(D)}")
    s = np.linalg.svd(D, compute_uv=False)
    if s[-1] == 0 or s[0] / s[-1] > cond_limit:
        raise RankDeficientDisplacements("displacement samples do not span 3-D space")
    Kt, *_ = np.linalg.lstsq(D, F, rcond=None)
    return Kt.T


def mode1_force(T_M0_Mt: Pose, f_d_magnitude: float, f_s, efficiency: float = 1.0) -> np.ndarray:
    """Tissue push/pull force on the jaws from cable tension and flexure reaction.

    ``f_s`` is the force the flexure exerts on the head, i.e. ``-K @ d``.
    Only the rotation of ``T_M0_Mt`` acts on the cable force; ``efficiency``
    scales the proximal tension to the tension at the jaws.
    """
    if f_d_magnitude < 0:
        raise ValueError("f_d_magnitude must be >= 0")
    f_d = np.array([0.0, 0.0, -efficiency * f_d_magnitude])
    return -(T_M0_Mt.rotation @ f_d) - np.asarray(f_s, dtype=np.float64)


@dataclass(frozen=True)
class ForcepsGeometry:
    l1: float = 1.0
    l2: float = 1.0
    l3: float = 2.0
    l12: float = 1.5
    l3_prime: Optional[float] = 2.5  # jaw lever with contact pads fitted

    def __post_init__(self):
        for name in ("l1", "l2", "l3", "l12"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.l3_prime is not None and not self.l3_prime > 0:
            raise ValueError("l3_prime must be positive")
        a, b, c = sorted((self.l1, self.l2, self.l12))
        if a + b <= c:
            raise ValueError("l1, l2, l12 violate the triangle inequality")

    def lever(self, use_pad_lever=False) -> float:
        if use_pad_lever:
            if self.l3_prime is None:
                raise ValueError("no pad lever configured")
            return self.l3_prime
        return self.l3


def _link_angle(g: ForcepsGeometry, l12: float) -> float:
    if l12 <= 0:
        raise GeometryInfeasible(f"effective joint distance {l12:.6g} mm is not positive")
    arg = (l12 ** 2 + g.l2 ** 2 - g.l1 ** 2) / (2 * g.l1 * l12)
    if abs(arg) > 1:
        raise GeometryInfeasible(f"arccos argument {arg:.6g} outside [-1, 1]")
    return float(np.arccos(arg))


def alpha0(g: ForcepsGeometry) -> float:
    """Link angle with the jaws closed and the flexure relaxed."""
    return _link_angle(g, g.l12)


def alpha_open(g: ForcepsGeometry, t_d: float, t_s: float) -> float:
    """Link angle after cable travel ``t_d`` and head travel ``t_s`` (both mm)."""
    return _link_angle(g, g.l12 + t_d - t_s)


def jaw_angle(alpha: float, alpha_rest: float) -> float:
    return 2.0 * (alpha - alpha_rest)


def alpha_for_jaw_angle(g: ForcepsGeometry, theta: float) -> float:
    return alpha0(g) + theta / 2.0


def travel_for_jaw_angle(g: ForcepsGeometry, theta: float, t_s: float = 0.0) -> float:
    """Cable travel that opens the jaws to ``theta``; inverse of alpha_open.

    Of the two joint distances consistent with the link angle, the one on the
    branch through the closed configuration is returned.
    """
    a = alpha_for_jaw_angle(g, theta)
    ca = g.l1 * np.cos(a)
    disc = ca ** 2 - g.l2 ** 2 + g.l1 ** 2
    if disc < 0:
        raise GeometryInfeasible(f"jaw angle {theta:.6g} rad is unreachable")
    roots = [r for r in (ca + np.sqrt(disc), ca - np.sqrt(disc)) if r > 0]
    if not roots:
        raise GeometryInfeasible(f"jaw angle {theta:.6g} rad is unreachable")
    l12p = min(roots, key=lambda r: abs(r - g.l12))
    return float(l12p - g.l12 + t_s)


def grasp_force(F_d: float, g: ForcepsGeometry, alpha: float, use_pad_lever=False,
                efficiency: float = 1.0) -> float:
    """Jaw contact force from cable tension (moment balance about the jaw pivot)."""
    if F_d < 0:
        raise ValueError("F_d must be >= 0")
    return efficiency * F_d * g.l2 * np.sin(alpha) / (2 * g.lever(use_pad_lever))


def grasp_force_from_pull(F_p: float, F_s: float, g: ForcepsGeometry, alpha: float,
                          use_pad_lever=False) -> float:
    """Same as ``grasp_force`` with the tension written as pull plus flexure load."""
    if F_p + F_s < 0:
        raise ValueError("F_p + F_s must be >= 0")
    return (F_p + F_s) * g.l2 * np.sin(alpha) / (2 * g.lever(use_pad_lever))
