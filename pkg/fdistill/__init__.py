"""Package providing step-wise f-divergence distillation for enumerable models."""

from fdistill import divergences, experiments, metrics, models, objectives, training
from fdistill.model_files import read_model, write_model
from fdistill.models import SequenceModel, TabularARModel
from fdistill.utils import versions

__version__ = "0.1.0"

__all__ = [
    "SequenceModel",
    "TabularARModel",
    "__version__",
    "divergences",
    "experiments",
    "metrics",
    "models",
    "objectives",
    "read_model",
    "training",
    "versions",
    "write_model",
]
