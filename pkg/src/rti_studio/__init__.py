"""Dual-UAV reflectance transformation imaging toolkit.

Plan lighting positions on a spherical cap, sequence and fly them in a
simulated MPC-tracked mission, render the captures, fit polynomial
texture maps, and analyze the recovered normal maps.
"""

from .errors import (
    ConfigError,
    DegenerateGeometryError,
    IllConditionedLightingError,
    InfeasibleStepError,
    InvalidRegionError,
    RtiStudioError,
    UndefinedMeanError,
)
from .geometry import CameraModel, LightingVector, fov_distance, lighting_vector
from .lighting import (
    LightingPlan,
    ScanRegion,
    fibonacci_positions,
    parse_lp,
    sppa_positions,
)
from .sequencing import Sequence, brute_force_tour, etsp_tour, sppa_sequence
from .trajectory import (
    MpcConfig,
    ObstacleSet,
    Trajectory,
    generate_trajectory,
    simulate_mission,
    solve_orientation_mpc,
    solve_position_mpc,
)
from .capture import CaptureSet, Scene, hemisphere_bump_scene, render, run_capture
from .ptm import NormalMap, PtmImage, compare_normals, fit_ptm, normal_map, relight

__version__ = "0.1.0"

__all__ = [
    "CameraModel",
    "CaptureSet",
    "ConfigError",
    "DegenerateGeometryError",
    "IllConditionedLightingError",
    "InfeasibleStepError",
    "InvalidRegionError",
    "LightingPlan",
    "LightingVector",
    "MpcConfig",
    "NormalMap",
    "ObstacleSet",
    "PtmImage",
    "RtiStudioError",
    "ScanRegion",
    "Scene",
    "Sequence",
    "Trajectory",
    "UndefinedMeanError",
    "brute_force_tour",
    "compare_normals",
    "etsp_tour",
    "fibonacci_positions",
    "fit_ptm",
    "fov_distance",
    "generate_trajectory",
    "hemisphere_bump_scene",
    "lighting_vector",
    "normal_map",
    "parse_lp",
    "relight",
    "render",
    "run_capture",
    "simulate_mission",
    "solve_orientation_mpc",
    "solve_position_mpc",
    "sppa_positions",
    "sppa_sequence",
]
