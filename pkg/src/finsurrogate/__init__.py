"""Flapping-fin thrust surrogates driven by a strip-centroid fin skeleton."""

__version__ = "0.1.0"

from .geometry import AxisFrame, FinShape, InvalidShapeError, builtin_shape, builtin_shapes, segment_fin
from .harness import GEN_TESTS, GenTestSpec, assemble_reduced, compare_variants, run_gen_test
from .kinematics import KinematicSetting, Variant, generate_cycle
from .preprocess import NormStats, thrust_coefficient, thrust_deviation
from .reduction import PcaReducer
from .surrogate import SurrogateModel
from .synthdata import DatasetGrid, NoiseConfig, generate_dataset, load_dataset, save_dataset

__all__ = [
    "AxisFrame", "DatasetGrid", "FinShape", "GEN_TESTS", "GenTestSpec", "InvalidShapeError", "KinematicSetting",
    "NoiseConfig", "NormStats", "PcaReducer", "SurrogateModel", "Variant", "__version__", "assemble_reduced",
    "builtin_shape", "builtin_shapes", "compare_variants", "generate_cycle", "generate_dataset", "load_dataset",
    "run_gen_test", "save_dataset", "segment_fin", "thrust_coefficient", "thrust_deviation",
]
