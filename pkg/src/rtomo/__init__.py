"""Consensus-ADMM imaging for widely-distributed radar."""

from .cadmm import CadmmConfig, SolverReport
from .cadmm import run as run_cadmm
from .dataset import read_dataset, write_dataset
from .geometry import (ClusterGeometry, MeasurementSet, SceneGrid, WaveformConfig,
                       grid_pixel_coords, make_cluster)
from .jsc import JscConfig, run_jsc
from .operator import ClusterOperator, apply_adjoint, apply_forward, apply_gram
from .simulate import PointScatterer, SimulationSpec, simulate
from .solvers import CgConfig, FistaConfig, cg_solve, fista, soft_threshold

__version__ = "0.1.0"
