"""Closed-loop desk simulation of touch, grasp and pull with the vision sensor.

The plant is quasi-static along the instrument axis (+z toward the tissue):

* the lower driver moves the carrier (``c``) that holds camera and flexure,
  and can add a compensation offset ``o``;
* the head sits on the flexure, so the jaw tip is at ``c + o + d_z``;
* the upper driver pulls the cable by ``t_d`` relative to the carrier, which
  moves the jaw linkage by ``t_d - t_s`` with ``t_s = -d_z``;
* tissue pushes back when penetrated and, once grasped, pulls when
  stretched; jaws closed past the contact angle squeeze it linearly.

Each step solves the scalar force balance for ``d_z`` with Brent's method.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, List, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import PhaseTimeout
from .forces import (
    ForcepsGeometry,
    alpha0,
    alpha_open,
    check_stiffness,
    force_from_displacement,
    grasp_force,
    jaw_angle,
    mode1_force,
    travel_for_jaw_angle,
)
from .geometry import CameraIntrinsics, Pose, TargetLayout
from .imaging import BlobParams, GrayImage, RenderConfig, denoise, detect_blobs, render_target
from .tracking import DEFAULT_GATE_PX, Tracker


class Phase(str, Enum):
    TOUCHING = "Touching"
    PENDING1 = "Pending1"
    GRASPING = "Grasping"
    PENDING2 = "Pending2"
    PULLING = "Pulling"
    HOLDING = "Holding"
    DONE = "Done"


PHASE_ORDER = list(Phase)


@dataclass(frozen=True)
class TissueModel:
    contact_stiffness: float = 0.5  # N/mm, compression of the tissue surface
    pull_stiffness: float = 0.3  # N/mm, stretch once grasped
    position: float = 0.3  # mm, tissue surface along the axis; jaw tip starts at 0
    grip_stiffness: float = 5.0  # N/rad of jaw closure past contact
    contact_angle: float = float(np.deg2rad(10.0))  # rad, jaw angle that meets the tissue

    def __post_init__(self):
        for name in ("contact_stiffness", "pull_stiffness", "grip_stiffness"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class GraspConfig:
    F_touch_threshold: float = -0.05
    F_g_target: float = 0.4
    F_p_target: float = 0.4
    frame_rate: float = 30.0
    approach_speed: float = 1.0  # mm/s, lower driver while touching
    grasp_speed: float = 0.2  # mm/s, upper driver while grasping
    pull_speed: float = 0.3  # mm/s, lower driver while pulling
    pend_duration: float = 2.0
    hold_duration: float = 1.0
    max_phase_duration: float = 20.0
    jaw_open_angle: float = float(np.deg2rad(40.0))
    compensation: bool = True
    transmission_efficiency: float = 1.0
    use_pad_lever: bool = False
    fd_noise_sigma: float = 0.0  # N, proximal load-cell noise
    rng_seed: int = 0

    def __post_init__(self):
        if not self.F_g_target >= 0:
            raise ValueError("F_g_target must be >= 0")
        if not self.frame_rate > 0:
            raise ValueError("frame_rate must be > 0")
        for name in ("approach_speed", "grasp_speed", "pull_speed", "pend_duration",
                     "hold_duration", "fd_noise_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.max_phase_duration > 0:
            raise ValueError("max_phase_duration must be > 0")
        if not 0 < self.transmission_efficiency <= 1:
            raise ValueError("transmission_efficiency must lie in (0, 1]")


@dataclass(frozen=True)
class SensorRig:
    """Camera, target and rendering settings that turn plant states into images."""

    intr: CameraIntrinsics
    layout: TargetLayout
    render: RenderConfig
    standoff: float = 8.0  # mm, camera to target at rest
    tilt_per_mm: float = 0.0  # rad of target tilt per mm of lateral deflection

    @property
    def rest_pose(self) -> Pose:
        return Pose(np.eye(3), [0.0, 0.0, self.standoff])


@dataclass(frozen=True)
class PlantModel:
    K: np.ndarray
    geometry: ForcepsGeometry
    tissue: TissueModel
    rig: SensorRig
    efficiency: float = 1.0  # true cable transmission
    use_pad_lever: bool = False

    def __post_init__(self):
        object.__setattr__(self, "K", check_stiffness(self.K))


@dataclass(frozen=True)
class PlantState:
    flexure_displacement: np.ndarray
    cable_travel: float
    lower_carrier: float
    jaw_theta: float
    tissue_stretch: float
    phase: Phase
    time: float
    comp_offset: float = 0.0
    attached: bool = False
    F_d: float = 0.0  # proximal cable tension
    f_p: np.ndarray = field(default_factory=lambda: np.zeros(3))  # tissue force on the jaws
    F_g: float = 0.0
    step: int = 0

    @property
    def tip(self) -> float:
        return self.lower_carrier + self.comp_offset + float(self.flexure_displacement[2])

    def tissue_energy(self, tissue: TissueModel) -> float:
        return 0.5 * tissue.pull_stiffness * self.tissue_stretch ** 2


@dataclass(frozen=True)
class DriverCommand:
    upper_velocity: float = 0.0  # mm/s, + pulls the cable
    lower_velocity: float = 0.0  # mm/s, + advances toward the tissue
    compensation: Optional[float] = None  # new carrier offset (mm); None holds it
    ideal_compensation: bool = False  # cancel the true deformation change exactly


def _equilibrium(plant: PlantModel, t_d: float, tip_of: Callable[[float], float], attached: bool):
    g, tis = plant.geometry, plant.tissue
    a_rest = alpha0(g)
    lever = g.lever(plant.use_pad_lever)
    Kinv = np.linalg.inv(plant.K)

    def loads(dz):
        pen = tip_of(dz) - tis.position
        if attached:
            fpz = -tis.contact_stiffness * pen if pen > 0 else -tis.pull_stiffness * pen
        else:
            fpz = -tis.contact_stiffness * max(pen, 0.0)
        l12p = max(g.l12 + t_d + dz, 1e-9)
        arg = (l12p ** 2 + g.l2 ** 2 - g.l1 ** 2) / (2 * g.l1 * l12p)
        a = float(np.arccos(np.clip(arg, -1.0, 1.0)))
        theta = jaw_angle(a, a_rest)
        F_g = tis.grip_stiffness * max(tis.contact_angle - theta, 0.0) if attached else 0.0
        F_tip = 2 * lever * F_g / (g.l2 * max(np.sin(a), 1e-9))
        return np.array([0.0, 0.0, fpz - F_tip]), fpz, F_tip, F_g, theta, pen

    def resid(dz):
        return dz - (Kinv @ loads(dz)[0])[2]

    lo, hi = -5.0, 5.0
    while resid(lo) > 0:
        lo *= 2
    while resid(hi) < 0:
        hi *= 2
    dz = brentq(resid, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    f, fpz, F_tip, F_g, theta, pen = loads(dz)
    d = Kinv @ f
    return d, fpz, F_tip, F_g, theta, pen


def step_plant(state: PlantState, cmd: DriverCommand, plant: PlantModel, dt: float) -> PlantState:
    """Advance the drivers by ``dt`` and re-solve the quasi-static balance."""
    t_d = state.cable_travel + cmd.upper_velocity * dt
    c = state.lower_carrier + cmd.lower_velocity * dt
    dz_prev = float(state.flexure_displacement[2])
    if cmd.ideal_compensation:
        # the offset tracks the deformation change, so the tip ignores it
        tip_fixed = c + state.comp_offset + dz_prev
        tip_of = lambda dz: tip_fixed
    else:
        o = state.comp_offset if cmd.compensation is None else float(cmd.compensation)
        tip_of = lambda dz: c + o + dz

    attached = state.attached
    d, fpz, F_tip, F_g, theta, pen = _equilibrium(plant, t_d, tip_of, attached)
    if not attached and pen > 0 and theta <= plant.tissue.contact_angle:
        attached = True
        d, fpz, F_tip, F_g, theta, pen = _equilibrium(plant, t_d, tip_of, attached)
    alpha_open(plant.geometry, t_d, -d[2])  # raises when the linkage cannot reach

    if cmd.ideal_compensation:
        o = state.comp_offset - (d[2] - dz_prev)
    stretch = max(-pen, 0.0) if attached else 0.0
    return replace(
        state,
        flexure_displacement=d,
        cable_travel=t_d,
        lower_carrier=c,
        comp_offset=o,
        jaw_theta=theta,
        tissue_stretch=stretch,
        time=(state.step + 1) * dt,
        attached=attached,
        F_d=F_tip / plant.efficiency,
        f_p=np.array([0.0, 0.0, fpz]),
        F_g=F_g,
        step=state.step + 1,
    )


def initial_state(plant: PlantModel, jaw_open_angle: float) -> PlantState:
    t_open = travel_for_jaw_angle(plant.geometry, jaw_open_angle)
    return PlantState(
        flexure_displacement=np.zeros(3),
        cable_travel=t_open,
        lower_carrier=0.0,
        jaw_theta=jaw_open_angle,
        tissue_stretch=0.0,
        phase=Phase.TOUCHING,
        time=0.0,
    )


def target_pose(d, rig: SensorRig) -> Pose:
    d = np.asarray(d, dtype=np.float64)
    tilt = rig.tilt_per_mm * np.array([-d[1], d[0], 0.0])
    return rig.rest_pose @ Pose.from_rotvec(tilt, d)


def synthesize_frame(plant_state: PlantState, rig: SensorRig, frame: int = 0,
                     render_cfg: RenderConfig = None) -> GrayImage:
    """Camera image of the target displaced by the plant's flexure deflection."""
    return render_target(rig.intr, target_pose(plant_state.flexure_displacement, rig),
                         rig.layout, render_cfg or rig.render, frame=frame)


@dataclass
class Estimate:
    d_s: np.ndarray
    pose: Pose
    f_s: np.ndarray  # flexure load K @ d
    f_p: np.ndarray
    F_g: float
    alpha: float
    theta: float
    m_detected: int
    m_registered: int
    flags: str


class VisionForceEstimator:
    """Image -> target pose -> flexure load, tissue force and grasp force."""

    def __init__(self, intr: CameraIntrinsics, layout: TargetLayout, blob: BlobParams, K,
                 geometry: ForcepsGeometry, denoise_sigmas=(0.6, 20.0), gate=DEFAULT_GATE_PX,
                 efficiency=1.0, use_pad_lever=False):
        self.blob = blob
        self.K = check_stiffness(K)
        self.geometry = geometry
        self.denoise_sigmas = denoise_sigmas
        self.efficiency = efficiency
        self.use_pad_lever = use_pad_lever
        self.tracker = Tracker(layout, intr, gate)

    def detect(self, image: GrayImage) -> np.ndarray:
        return detect_blobs(denoise(image, *self.denoise_sigmas), self.blob)

    def initialize(self, image: GrayImage):
        return self.tracker.reinit(self.detect(image))

    def update(self, image: GrayImage, F_d: float, t_d: float) -> Estimate:
        rec = self.tracker.step(self.detect(image))
        return self.forces(F_d, t_d, rec)

    def forces(self, F_d, t_d, rec) -> Estimate:
        pose = self.tracker.pose
        d = pose.translation
        f_s = force_from_displacement(self.K, d)
        F_d = max(F_d, 0.0)
        f_p = mode1_force(pose, F_d, -f_s, efficiency=self.efficiency)
        g = self.geometry
        a = alpha_open(g, t_d, -d[2])
        F_g = grasp_force(F_d, g, a, self.use_pad_lever, efficiency=self.efficiency)
        return Estimate(d.copy(), pose, f_s, f_p, F_g, a, jaw_angle(a, alpha0(g)),
                        rec.m_detected, rec.m_registered, rec.flags)


TRACE_COLUMNS = (
    ["time_s", "phase", "F_d"]
    + [f"F_s_est_{a}" for a in "xyz"] + [f"F_s_true_{a}" for a in "xyz"]
    + [f"F_p_est_{a}" for a in "xyz"] + [f"F_p_true_{a}" for a in "xyz"]
    + ["F_g_est", "F_g_true", "theta_rad", "t_d_mm"]
    + [f"d_s_est_{a}" for a in "xyz"] + [f"d_s_true_{a}" for a in "xyz"]
)


def fmt(x) -> str:
    return f"{float(x):.9g}"


@dataclass
class TraceRecord:
    time_s: float
    phase: Phase
    F_d: float
    F_s_est: np.ndarray
    F_s_true: np.ndarray
    F_p_est: np.ndarray
    F_p_true: np.ndarray
    F_g_est: float
    F_g_true: float
    theta_rad: float
    t_d_mm: float
    d_s_est: np.ndarray
    d_s_true: np.ndarray
    tip: float = 0.0
    tissue_energy: float = 0.0

    def row(self) -> list:
        return ([fmt(self.time_s), self.phase.value, fmt(self.F_d)]
                + [fmt(v) for v in self.F_s_est] + [fmt(v) for v in self.F_s_true]
                + [fmt(v) for v in self.F_p_est] + [fmt(v) for v in self.F_p_true]
                + [fmt(self.F_g_est), fmt(self.F_g_true), fmt(self.theta_rad), fmt(self.t_d_mm)]
                + [fmt(v) for v in self.d_s_est] + [fmt(v) for v in self.d_s_true])


@dataclass
class Trace:
    records: List[TraceRecord] = field(default_factory=list)
    frame_rate: float = 30.0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def phases(self) -> List[Phase]:
        """Phases in order of first appearance."""
        seen = []
        for r in self.records:
            if not seen or seen[-1] != r.phase:
                seen.append(r.phase)
        return seen

    def phase_frames(self, phase: Phase) -> np.ndarray:
        return np.array([i for i, r in enumerate(self.records) if r.phase == phase], dtype=int)

    def phase_duration(self, phase: Phase) -> float:
        return len(self.phase_frames(phase)) / self.frame_rate

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.records:
            w.writerow(r.row())
        return buf.getvalue()

    def summary(self) -> dict:
        out = {"frames": len(self.records),
               "phases": [p.value for p in self.phases()],
               "terminal_phase": self.records[-1].phase.value if self.records else None,
               "durations_s": {p.value: self.phase_duration(p) for p in self.phases()}}
        if self.records:
            fs = np.linalg.norm(self.column("F_s_est") - self.column("F_s_true"), axis=1)
            fg = np.abs(self.column("F_g_est") - self.column("F_g_true"))
            fp = np.linalg.norm(self.column("F_p_est") - self.column("F_p_true"), axis=1)
            out.update(F_s_mean_abs_err=float(fs.mean()), F_g_mean_abs_err=float(fg.mean()),
                       F_p_mean_abs_err=float(fp.mean()))
        return out


def run_grasp_procedure(cfg: GraspConfig, plant: PlantModel, estimator: VisionForceEstimator,
                        record_hook=None) -> Trace:
    """Touch, pend, grasp, pend, pull and hold, switching on estimated forces.

    Raises ``PhaseTimeout`` (carrying the partial trace) when Touching,
    Grasping or Pulling runs longer than ``cfg.max_phase_duration``.
    """
    dt = 1.0 / cfg.frame_rate
    n_pend = int(round(cfg.pend_duration * cfg.frame_rate))
    n_hold = int(round(cfg.hold_duration * cfg.frame_rate))
    n_max = int(round(cfg.max_phase_duration * cfg.frame_rate))
    render_cfg = replace(plant.rig.render, rng_seed=cfg.rng_seed)
    fd_rng = np.random.default_rng([cfg.rng_seed, 0xFD])

    state = initial_state(plant, cfg.jaw_open_angle)
    trace = Trace(frame_rate=cfg.frame_rate)
    in_phase = 0
    comp_ref = None
    k = 0
    while True:
        F_d_meas = state.F_d
        if cfg.fd_noise_sigma > 0:
            F_d_meas = state.F_d + fd_rng.normal(0.0, cfg.fd_noise_sigma)
        img = synthesize_frame(state, plant.rig, frame=k, render_cfg=render_cfg)
        if k == 0:
            est = estimator.forces(F_d_meas, state.cable_travel, estimator.initialize(img))
        else:
            est = estimator.update(img, F_d_meas, state.cable_travel)
        rec = TraceRecord(
            time_s=state.time, phase=state.phase, F_d=F_d_meas,
            F_s_est=est.f_s, F_s_true=force_from_displacement(plant.K, state.flexure_displacement),
            F_p_est=est.f_p, F_p_true=state.f_p.copy(),
            F_g_est=est.F_g, F_g_true=state.F_g, theta_rad=state.jaw_theta,
            t_d_mm=state.cable_travel, d_s_est=est.d_s, d_s_true=state.flexure_displacement.copy(),
            tip=state.tip, tissue_energy=state.tissue_energy(plant.tissue))
        trace.records.append(rec)
        if record_hook is not None:
            record_hook(rec, state, est)
        in_phase += 1

        phase = state.phase
        nxt = phase
        if phase == Phase.TOUCHING and est.f_p[2] <= cfg.F_touch_threshold:
            nxt = Phase.PENDING1
        elif phase == Phase.PENDING1 and in_phase >= n_pend:
            nxt = Phase.GRASPING
            comp_ref = (-est.d_s[2], state.comp_offset)
        elif phase == Phase.GRASPING and est.F_g >= cfg.F_g_target:
            nxt = Phase.PENDING2
        elif phase == Phase.PENDING2 and in_phase >= n_pend:
            nxt = Phase.PULLING
        elif phase == Phase.PULLING and est.f_p[2] >= cfg.F_p_target:
            nxt = Phase.HOLDING
        elif phase == Phase.HOLDING and in_phase >= n_hold:
            nxt = Phase.DONE
        if nxt == phase and phase in (Phase.TOUCHING, Phase.GRASPING, Phase.PULLING) \
                and in_phase >= n_max:
            raise PhaseTimeout(f"{phase.value} exceeded {cfg.max_phase_duration} s", trace)
        if nxt == Phase.DONE:
            return trace
        if nxt != phase:
            in_phase = 0

        cmd = DriverCommand()
        if nxt == Phase.TOUCHING:
            cmd = DriverCommand(lower_velocity=cfg.approach_speed)
        elif nxt == Phase.GRASPING:
            comp = None
            if cfg.compensation and phase == Phase.GRASPING:
                comp = comp_ref[1] + (-est.d_s[2] - comp_ref[0])
            cmd = DriverCommand(upper_velocity=cfg.grasp_speed, compensation=comp)
        elif nxt == Phase.PULLING:
            cmd = DriverCommand(lower_velocity=-cfg.pull_speed)
        state = step_plant(replace(state, phase=nxt), cmd, plant, dt)
        k += 1
