"""Multiple-instance learning on point patterns with set distances."""

__version__ = "0.1.0"

from .cluster import SetAffinityPropagation, affinity_propagation  # noqa: E402
from .distances import (DistanceSpec, SetDistanceTransformer, hausdorff, ospa,  # noqa: E402
                        ospa_decompose, pairwise_distances, wasserstein)
from .neighbors import KNeighborsPatternClassifier, learn_cutoff  # noqa: E402
from .novelty import NNNoveltyDetector, select_cutoff  # noqa: E402
from .patterns import LabeledDataset, PointPattern, load_dataset, save_dataset  # noqa: E402

__all__ = [
    "DistanceSpec", "KNeighborsPatternClassifier", "LabeledDataset", "NNNoveltyDetector",
    "PointPattern", "SetAffinityPropagation", "SetDistanceTransformer", "affinity_propagation", "hausdorff",
    "learn_cutoff", "load_dataset", "ospa", "ospa_decompose", "pairwise_distances",
    "save_dataset", "select_cutoff", "wasserstein",
]
