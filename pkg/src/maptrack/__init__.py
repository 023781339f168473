"""Online multi-object tracking with probability/prediction maps and a covariance-adaptive Kalman filter."""
from .association import AppearanceGallery, AssociationConfig, appearance_distance, solve_assignment
from .filtering import FilterConfig
from .geometry import BoundingBox, ioi, iou
from .io_formats import Detection, FrameDetections, SequenceMeta
from .kalman import KalmanTrackState, NoiseConfig
from .metrics import EvalReport, evaluate
from .occupancy import MapConfig, OccupancyGrid
from .pipeline import BaselineTracker, MapTracker, PipelineConfig, Track, TrackStatus, run_sequence

__version__ = "0.1.0"

__all__ = [
    "AppearanceGallery",
    "AssociationConfig",
    "BaselineTracker",
    "BoundingBox",
    "Detection",
    "EvalReport",
    "FilterConfig",
    "FrameDetections",
    "KalmanTrackState",
    "MapConfig",
    "MapTracker",
    "NoiseConfig",
    "OccupancyGrid",
    "PipelineConfig",
    "SequenceMeta",
    "Track",
    "TrackStatus",
    "appearance_distance",
    "evaluate",
    "ioi",
    "iou",
    "run_sequence",
    "solve_assignment",
]
