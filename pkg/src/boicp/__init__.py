"""Global point-cloud registration: Bayesian optimisation over SE(3) start
poses for point-to-point ICP, with grid and random-search baselines."""

from importlib.resources import files as _files

from ._backend import BACKEND
from .acquisition import AcquisitionConfig, argmax_ei, expected_improvement
from .baseline import PyramidConfig, pyramid_search, random_search
from .cloud import KdIndex, PointCloud, build_index, nearest, voxel_downsample
from .errors import (
    BoIcpError,
    DegenerateGeometryError,
    DegeneratePoseError,
    NoOverlapError,
    NumericalError,
    ParseError,
    RegistrationFailedError,
)
from .evaluation import mean_p2p_distance, overlap_fraction, select_pairs, welch_anova
from .fileio import load_cloud, load_poses, save_cloud, save_poses
from .geom import (
    RigidTransform,
    SearchBounds,
    pose_to_transform,
    rotation_error,
    transform_to_pose,
    translation_error,
)
from .icp import IcpConfig, IcpResult, run_icp
from .optimizer import BoConfig, RegistrationResult, optimize, preset
from .surrogate import GpModel, Kernel

__version__ = "0.1.0"


def data_path(name: str):
    """Path of a bundled data file (``synthetic_source.ply``, ``synthetic_reference.ply``,
    ``synthetic_gt.txt``)."""
    return _files(__name__) / "data" / name


def schema_path():
    """Path of the JSON schema describing ``boicp align`` output."""
    return _files(__name__) / "schemas" / "result.schema.json"
