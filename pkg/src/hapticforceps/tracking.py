"""Marker registration and frame-to-frame target pose tracking.

At start-up the target faces the camera squarely and every marker except the
top one is visible; the detections are paired with the layout in order, the
hidden marker is filled in through the fitted homography and the result
becomes the "complete" reference set. Every later frame assigns each
detection to the nearest (L1) reference pixel, refits the homography from the
registered markers, predicts the missing ones, and reports the target pose
relative to the start-up pose.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Tuple

import numpy as np

from .errors import TooFewMarkers, WrongDetectionCount
from .geometry import (
    CameraIntrinsics,
    Homography,
    Pose,
    TargetLayout,
    decompose_homography,
    relative_pose,
    solve_homography,
)

DEFAULT_GATE_PX = 40.0


@dataclass(frozen=True)
class RegisteredSet:
    entries: Dict[int, np.ndarray]
    unmatched: int = 0  # detections dropped by the gate or by a closer rival
    conflicts: int = 0  # how many of those lost an index to a closer detection

    def __len__(self):
        return len(self.entries)

    def indices(self) -> np.ndarray:
        return np.array(sorted(self.entries), dtype=int)

    def pixels(self) -> np.ndarray:
        idx = self.indices()
        return np.array([self.entries[j] for j in idx]).reshape(len(idx), 2)


@dataclass(frozen=True)
class TrackerState:
    prev_complete: np.ndarray  # (n, 2) pixels, one per marker index
    H0: Homography
    T_C_M0: Pose
    frame_index: int = 0
    H: Homography = None
    T_M0_Mt: Pose = field(default_factory=Pose.identity)
    m_detected: int = 0
    m_registered: int = 0
    flags: Tuple[str, ...] = ()


def init_tracker(detections, layout: TargetLayout, intr: CameraIntrinsics) -> TrackerState:
    """Start tracking from a square-on rest frame with the top marker hidden."""
    det = np.asarray(detections, dtype=np.float64).reshape(-1, 2)
    n = layout.n
    if len(det) != n - 1:
        raise WrongDetectionCount(f"expected {n - 1} detections at rest, got {len(det)}")
    H0 = solve_homography(layout.markers[:n - 1], det)
    hidden = H0.apply(layout.markers[n - 1:])
    complete = np.vstack([det, hidden])
    complete.setflags(write=False)
    return TrackerState(
        prev_complete=complete,
        H0=H0,
        T_C_M0=decompose_homography(H0, intr),
        frame_index=0,
        H=H0,
        m_detected=len(det),
        m_registered=len(det),
        flags=("init",),
    )


def register_markers(detections, prev_complete, gate=DEFAULT_GATE_PX) -> RegisteredSet:
    """Assign each detection to the reference index nearest in L1 distance.

    When two detections pick the same index the closer one keeps it; the
    other is dropped. Detections farther than ``gate`` pixels from every
    reference are dropped too.
    """
    det = np.asarray(detections, dtype=np.float64).reshape(-1, 2)
    ref = np.asarray(prev_complete, dtype=np.float64)
    if len(det) == 0:
        return RegisteredSet({})
    cost = np.abs(det[:, None, :] - ref[None, :, :]).sum(axis=2)
    best = cost.argmin(axis=1)
    best_cost = cost[np.arange(len(det)), best]
    winner: Dict[int, int] = {}
    unmatched = conflicts = 0
    for i in np.argsort(best_cost, kind="stable"):
        if gate is not None and best_cost[i] > gate:
            unmatched += 1
            continue
        j = int(best[i])
        if j in winner:
            unmatched += 1
            conflicts += 1
            continue
        winner[j] = int(i)
    entries = {j: det[i].copy() for j, i in sorted(winner.items())}
    return RegisteredSet(entries, unmatched, conflicts)


def track_step(state: TrackerState, detections, layout: TargetLayout, intr: CameraIntrinsics,
               gate=DEFAULT_GATE_PX) -> Tuple[Pose, TrackerState]:
    """Process one frame; returns the target pose relative to the rest pose.

    Raises ``TooFewMarkers`` when fewer than four detections register, in
    which case the caller should keep ``state`` as it was.
    """
    det = np.asarray(detections, dtype=np.float64).reshape(-1, 2)
    reg = register_markers(det, state.prev_complete, gate) if len(det) else RegisteredSet({})
    if len(reg) < 4:
        raise TooFewMarkers(f"only {len(reg)} markers registered (need 4)")
    idx = reg.indices()
    H = solve_homography(layout.markers[idx], reg.pixels())
    complete = H.apply(layout.markers)
    complete[idx] = reg.pixels()
    complete.setflags(write=False)
    T_C_Mt = decompose_homography(H, intr)
    rel = relative_pose(state.T_C_M0, T_C_Mt)
    flags = []
    if reg.unmatched:
        flags.append(f"unmatched={reg.unmatched}")
    if reg.conflicts:
        flags.append(f"conflicts={reg.conflicts}")
    new = replace(
        state,
        prev_complete=complete,
        frame_index=state.frame_index + 1,
        H=H,
        T_M0_Mt=rel,
        m_detected=len(det),
        m_registered=len(reg),
        flags=tuple(flags),
    )
    return rel, new


@dataclass
class FrameRecord:
    frame_index: int
    m_detected: int
    m_registered: int
    d_s: np.ndarray
    rotvec: np.ndarray
    flags: str


class Tracker:
    """Stateful wrapper that holds the last good pose through skipped frames."""

    def __init__(self, layout: TargetLayout, intr: CameraIntrinsics, gate=DEFAULT_GATE_PX):
        self.layout = layout
        self.intr = intr
        self.gate = gate
        self.state = None
        self.frames_seen = 0

    def reinit(self, detections) -> FrameRecord:
        """(Re)start from a rest frame; the only recovery path after a lost track."""
        self.state = init_tracker(detections, self.layout, self.intr)
        self.frames_seen = 0
        return self._record(self.state, len(self.state.prev_complete) - 1,
                            self.state.m_registered, "init")

    def step(self, detections) -> FrameRecord:
        if self.state is None:
            raise RuntimeError("tracker not initialised; call reinit() with a rest frame")
        self.frames_seen += 1
        try:
            _, self.state = track_step(self.state, detections, self.layout, self.intr, self.gate)
        except TooFewMarkers:
            return self._record(self.state, len(detections), 0, "skipped")
        return self._record(self.state, self.state.m_detected, self.state.m_registered,
                            "|".join(self.state.flags))

    @property
    def pose(self) -> Pose:
        return self.state.T_M0_Mt

    def _record(self, state, m_det, m_reg, flags) -> FrameRecord:
        rel = state.T_M0_Mt
        return FrameRecord(self.frames_seen, m_det, m_reg, rel.translation.copy(),
                           rel.rotvec(), flags)
