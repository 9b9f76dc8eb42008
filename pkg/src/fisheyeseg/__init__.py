"""Moving-object segmentation for fisheye cameras from dense flow and odometry."""

from .camera import FisheyeCalibration, load_calibration, project, save_calibration, unproject
from .constraints import ConstraintDeviations, Thresholds, evaluate_pair
from .flow import FlowGrid, average_flow, lift_correspondences, read_flow, write_flow
from .fusion import FusionWeights, fuse, segment
from .odometry import Mounting, OdometrySample, PoseDelta, camera_motion, dead_reckon
from .pipeline import PairResult, process_pair

__version__ = "0.1.0"

__all__ = [
    "ConstraintDeviations", "FisheyeCalibration", "FlowGrid", "FusionWeights", "Mounting",
    "OdometrySample", "PairResult", "PoseDelta", "Thresholds", "average_flow", "camera_motion",
    "dead_reckon", "evaluate_pair", "fuse", "lift_correspondences", "load_calibration",
    "process_pair", "project", "read_flow", "save_calibration", "segment", "unproject",
    "write_flow",
]
