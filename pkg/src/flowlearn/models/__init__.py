from .common import MissingLabel, NonFiniteLoss, TrainConfig, train_val_split
from .mthl import MthlClassifier, MthlConfig, MthlNetwork, ShapeTraceViolation
from .knn import KnnClassifier, KTooLarge
from .mlp import MlpClassifier

__all__ = [
    "MissingLabel", "NonFiniteLoss", "TrainConfig", "train_val_split",
    "MthlClassifier", "MthlConfig", "MthlNetwork", "ShapeTraceViolation",
    "KnnClassifier", "KTooLarge", "MlpClassifier",
]
