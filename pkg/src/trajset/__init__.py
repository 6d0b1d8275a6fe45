"""Trajectory-Set (TS) features for action recognition.

Dense point trajectories are grouped by the block of cells they start in;
each block yields one fixed-length vector of per-cell mean trajectories.
Videos are then encoded as Fisher vectors over a diagonal GMM and
classified with a one-hidden-layer perceptron.
"""

from .config import RunConfig, config_from_dict, load_config
from .fisher import FisherVector, GmmModel, encode_fisher, fit_gmm, normalize, subsample
from .flow import FlowField, FlowParams, estimate_flow, median_filter_flow
from .frames import GrayFrame, Pyramid, build_pyramid, open_source
from .mlp import MlpModel, TrainConfig, grad_check, predict, train
from .synth import MotionSpec, generate, make_dataset
from .tracking import TrackerParams, Trajectory, extract_trajectories, sample_points
from .ts import TSFeature, TsParams, assign_to_cells, cell_vector, encode_frame, encode_video

__version__ = "0.1.0"

__all__ = [
    "FisherVector", "FlowField", "FlowParams", "GmmModel", "GrayFrame", "MlpModel", "MotionSpec",
    "Pyramid", "RunConfig", "TSFeature", "TrackerParams", "TrainConfig", "Trajectory", "TsParams",
    "assign_to_cells", "build_pyramid", "cell_vector", "config_from_dict", "encode_fisher",
    "encode_frame", "encode_video", "estimate_flow", "extract_trajectories", "fit_gmm", "generate",
    "grad_check", "load_config", "make_dataset", "median_filter_flow", "normalize", "open_source",
    "predict", "sample_points", "subsample", "train",
]
