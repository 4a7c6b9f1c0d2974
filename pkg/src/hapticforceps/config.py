"""Project configuration: one YAML file, one section per subsystem.

Defaults mirror the 4 mm prototype (400x400 camera, 12 holes of 0.15 mm on a
3.4 mm target, calibrated flexure). ``load_config(None)`` or ``"default"``
returns them; a file only needs the fields it changes.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import yaml

from .errors import ConfigError
from .forces import DEFAULT_STIFFNESS, ForcepsGeometry, check_stiffness
from .geometry import CameraIntrinsics, Pose, TargetLayout, project_points
from .imaging import BlobParams, RenderConfig
from .sim import GraspConfig, PlantModel, SensorRig, TissueModel, VisionForceEstimator
from .tracking import DEFAULT_GATE_PX

@dataclass(frozen=True)
class CameraSection:
    fx: float = 400.0
    fy: float = 400.0
    u0: float = 200.0
    v0: float = 200.0
    width: int = 400
    height: int = 400
    standoff_mm: float = 8.0


@dataclass(frozen=True)
class LayoutSection:
    n_markers: int = 12
    ring_radius_mm: float = 1.2
    phase_deg: float = 7.5
    marker_diameter_mm: float = 0.15
    central_hole_radius_mm: float = 0.3


@dataclass(frozen=True)
class RenderSection:
    background_level: float = 20.0
    foreground_level: float = 220.0
    noise_sigma: float = 2.0
    occlusion_center: Optional[Tuple[float, float]] = None  # None: over the top marker at rest
    occlusion_radius: float = 10.0
    rng_seed: int = 0
    supersample: int = 5


@dataclass(frozen=True)
class BlobSection:
    threshold: float = 120.0
    min_area: int = 4
    max_area: int = 2000
    min_circularity: float = 0.5
    denoise_spatial_sigma: float = 0.6
    denoise_range_sigma: float = 20.0


@dataclass(frozen=True)
class TrackerSection:
    gate_px: float = DEFAULT_GATE_PX


@dataclass(frozen=True)
class StiffnessSection:
    matrix: Tuple[Tuple[float, ...], ...] = tuple(map(tuple, DEFAULT_STIFFNESS.tolist()))
    tilt_per_mm: float = 0.0


@dataclass(frozen=True)
class ForcepsSection:
    l1: float = 1.0
    l2: float = 1.0
    l3: float = 2.0
    l12: float = 1.5
    l3_prime: Optional[float] = 2.5


@dataclass(frozen=True)
class TissueSection:
    contact_stiffness: float = 0.5
    pull_stiffness: float = 0.3
    position: float = 0.3
    grip_stiffness: float = 5.0
    contact_angle_deg: float = 10.0


@dataclass(frozen=True)
class GraspSection:
    F_touch_threshold: float = -0.05
    F_g_target: float = 0.4
    F_p_target: float = 0.4
    frame_rate: float = 30.0
    approach_speed: float = 1.0
    grasp_speed: float = 0.2
    pull_speed: float = 0.3
    pend_duration: float = 2.0
    hold_duration: float = 1.0
    max_phase_duration: float = 20.0
    jaw_open_angle_deg: float = 40.0
    compensation: bool = True
    transmission_efficiency: float = 1.0
    use_pad_lever: bool = False
    fd_noise_sigma: float = 0.0
    rng_seed: int = 0


SECTIONS = {
    "camera": CameraSection,
    "layout": LayoutSection,
    "render": RenderSection,
    "blob": BlobSection,
    "tracker": TrackerSection,
    "stiffness": StiffnessSection,
    "forceps": ForcepsSection,
    "tissue": TissueSection,
    "grasp": GraspSection,
}


@dataclass(frozen=True)
class Config:
    camera: CameraSection = field(default_factory=CameraSection)
    layout: LayoutSection = field(default_factory=LayoutSection)
    render: RenderSection = field(default_factory=RenderSection)
    blob: BlobSection = field(default_factory=BlobSection)
    tracker: TrackerSection = field(default_factory=TrackerSection)
    stiffness: StiffnessSection = field(default_factory=StiffnessSection)
    forceps: ForcepsSection = field(default_factory=ForcepsSection)
    tissue: TissueSection = field(default_factory=TissueSection)
    grasp: GraspSection = field(default_factory=GraspSection)

    # -- builders; each names the offending section when a value is rejected --

    def intrinsics(self) -> CameraIntrinsics:
        c = self.camera
        with _section("camera"):
            return CameraIntrinsics(c.fx, c.fy, c.u0, c.v0, int(c.width), int(c.height))

    def rest_pose(self) -> Pose:
        with _section("camera"):
            if not self.camera.standoff_mm > 0:
                raise ValueError("standoff_mm must be > 0")
            return Pose(np.eye(3), [0.0, 0.0, self.camera.standoff_mm])

    def target_layout(self) -> TargetLayout:
        s = self.layout
        with _section("layout"):
            if s.n_markers < 5:
                raise ValueError("n_markers must be >= 5")
            return TargetLayout.circular(int(s.n_markers), s.ring_radius_mm, s.phase_deg,
                                         s.central_hole_radius_mm, s.marker_diameter_mm)

    def render_config(self) -> RenderConfig:
        s = self.render
        centre = s.occlusion_center
        if centre is None:
            layout = self.target_layout()
            centre = tuple(project_points(self.intrinsics(), self.rest_pose(), layout.markers[-1:])[0])
        with _section("render"):
            return RenderConfig(s.background_level, s.foreground_level, s.noise_sigma,
                                tuple(float(v) for v in centre), s.occlusion_radius,
                                int(s.rng_seed), int(s.supersample))

    def blob_params(self) -> BlobParams:
        s = self.blob
        with _section("blob"):
            if s.denoise_spatial_sigma <= 0 or s.denoise_range_sigma <= 0:
                raise ValueError("denoise sigmas must be > 0")
            return BlobParams(s.threshold, int(s.min_area), int(s.max_area), s.min_circularity)

    def denoise_sigmas(self) -> Tuple[float, float]:
        return (self.blob.denoise_spatial_sigma, self.blob.denoise_range_sigma)

    def stiffness_matrix(self) -> np.ndarray:
        with _section("stiffness"):
            return check_stiffness(np.array(self.stiffness.matrix, dtype=float))

    def forceps_geometry(self) -> ForcepsGeometry:
        s = self.forceps
        with _section("forceps"):
            return ForcepsGeometry(s.l1, s.l2, s.l3, s.l12, s.l3_prime)

    def tissue_model(self) -> TissueModel:
        s = self.tissue
        with _section("tissue"):
            return TissueModel(s.contact_stiffness, s.pull_stiffness, s.position,
                               s.grip_stiffness, float(np.deg2rad(s.contact_angle_deg)))

    def grasp_config(self) -> GraspConfig:
        kw = dataclasses.asdict(self.grasp)
        kw["jaw_open_angle"] = float(np.deg2rad(kw.pop("jaw_open_angle_deg")))
        with _section("grasp"):
            return GraspConfig(**kw)

    def rig(self) -> SensorRig:
        with _section("stiffness"):
            tilt = float(self.stiffness.tilt_per_mm)
        return SensorRig(self.intrinsics(), self.target_layout(), self.render_config(),
                         self.camera.standoff_mm, tilt)

    def plant(self) -> PlantModel:
        g = self.grasp
        return PlantModel(self.stiffness_matrix(), self.forceps_geometry(), self.tissue_model(),
                          self.rig(), g.transmission_efficiency, g.use_pad_lever)

    def estimator(self) -> VisionForceEstimator:
        g = self.grasp
        return VisionForceEstimator(self.intrinsics(), self.target_layout(), self.blob_params(),
                                    self.stiffness_matrix(), self.forceps_geometry(),
                                    self.denoise_sigmas(), self.tracker.gate_px,
                                    g.transmission_efficiency, g.use_pad_lever)

    def validate(self) -> "Config":
        self.plant()
        self.estimator()
        self.grasp_config()
        return self

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        out = {}
        for name in SECTIONS:
            sec = dataclasses.asdict(getattr(self, name))
            out[name] = {k: (list(map(list, v)) if k == "matrix" else
                             list(v) if isinstance(v, tuple) else v) for k, v in sec.items()}
        return out

    def with_overrides(self, overrides) -> "Config":
        """Apply ``"section.field=value"`` strings (values parsed as YAML)."""
        data = self.to_dict()
        for item in overrides or ():
            key, sep, raw = item.partition("=")
            if not sep or "." not in key:
                raise ConfigError(f"override '{item}' is not of the form section.field=value")
            sec, name = key.split(".", 1)
            data.setdefault(sec, {})[name] = yaml.safe_load(raw)
        return config_from_dict(data)


class _section:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None and issubclass(exc_type, ValueError) and not isinstance(exc, ConfigError):
            raise ConfigError(f"{self.name}: {exc}") from exc
        return False


def _coerce(section: str, f: dataclasses.Field, value):
    where = f"{section}.{f.name}"
    default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
    if value is None:
        if default is None:
            return None
        raise ConfigError(f"{where}: value required")
    if f.name == "matrix":
        try:
            m = np.array(value, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected a 3x3 list of numbers") from None
        if m.shape != (3, 3):
            raise ConfigError(f"{where}: expected a 3x3 list of numbers")
        return tuple(map(tuple, m.tolist()))
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) or f.name in ("width", "height", "rng_seed", "supersample",
                                                "min_area", "max_area", "n_markers"):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    if f.name == "occlusion_center":
        if not (isinstance(value, (list, tuple)) and len(value) == 2):
            raise ConfigError(f"{where}: expected [u, v] or null")
        return tuple(float(v) for v in value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if not np.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    return float(value)


def config_from_dict(data: Optional[dict]) -> Config:
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping of sections")
    kw = {}
    for sec, values in data.items():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown config section '{sec}'")
        if values is None:
            continue
        if not isinstance(values, dict):
            raise ConfigError(f"{sec}: expected a mapping of fields")
        cls = SECTIONS[sec]
        known = {f.name: f for f in fields(cls)}
        sec_kw = {}
        for name, value in values.items():
            if name not in known:
                raise ConfigError(f"unknown config field '{sec}.{name}'")
            sec_kw[name] = _coerce(sec, known[name], value)
        kw[sec] = cls(**sec_kw)
    return Config(**kw).validate()


def load_config(path=None) -> Config:
    if path is None or str(path) == "default":
        return Config().validate()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: invalid YAML ({exc.__class__.__name__})") from None
    return config_from_dict(data)
