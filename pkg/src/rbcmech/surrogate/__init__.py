from .design import DESIGN_BOUNDS, DesignMatrix, sample_design
from .table import TrainingTable, build_training_table, load_table, save_table
from .mlp import SurrogateModel, surrogate_predict, train_mlp, validate_surrogate

__all__ = [
    "DESIGN_BOUNDS",
    "DesignMatrix",
    "sample_design",
    "TrainingTable",
    "build_training_table",
    "load_table",
    "save_table",
    "SurrogateModel",
    "train_mlp",
    "surrogate_predict",
    "validate_surrogate",
]
