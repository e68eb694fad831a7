"""Acoustic fault diagnosis for rotating machinery.

Raw measurement CSVs -> PCM audio -> conditioning -> 144-dim features ->
imbalance-aware oversampling -> boosted-tree classification -> metrics,
grid search, and greedy feature selection.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .config import PipelineConfig, default_config
from .pipeline import run_pipeline

__version__ = "0.1.0"

__all__ = ["PipelineConfig", "default_config", "run_pipeline", "KERNEL_BACKEND",
           "__version__"]
