"""Joint sub-band and power allocation for multi-cell downlinks.

Solvers label random network drops (exhaustive oracle or genetic
algorithm) and a stacked sparse-autoencoder network learns to predict the
allocations from user channel reports.
"""

from .netmodel import Allocation, NetworkRealization, ScenarioConfig
from .solvers import GaConfig, SolveResult, exhaustive_search, ga_solve
from .dataset import Dataset, Sample, generate, read_csv, split, write_csv
from .dnn import NetParams, TrainConfig

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "NetworkRealization",
    "ScenarioConfig",
    "GaConfig",
    "SolveResult",
    "exhaustive_search",
    "ga_solve",
    "Dataset",
    "Sample",
    "generate",
    "read_csv",
    "split",
    "write_csv",
    "NetParams",
    "TrainConfig",
]
