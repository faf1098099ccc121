__version__ = '1.0.0'

# Module lvl imports
from .analytic import ModelParams, Spherical, RankOnePlusSpherical, Dense, q_function
from .paramsets import theta_sphere, theta_sensing_aware, ExpSparsity, PolySparsity
from .datagen import Dataset, gen_dataset
from .classifiers import TRAINER_NAMES, get_trainer, predict
from .sweep import SweepPlan, SweepResult, estimate_error, run_sweep
