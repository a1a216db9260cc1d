"""Black-box combinatorial optimization with QUBO surrogates.

The surrogate is an upper-triangular QUBO matrix trained by simultaneous
classification (bad solutions must stay above a threshold) and regression
(good solutions are fitted exactly), sampled by simulated annealing inside
a cross-entropy style loop.
"""

from boxqubo.qubo_core import (
    LabeledBatch,
    QuboMatrix,
    TrainingDivergedError,
    batch_energy,
    energy,
    gradient_descent_epochs,
    loss,
    loss_gradient,
    random_init,
)
from boxqubo.annealer import AnnealSchedule, SampleSet, anneal, best_k
from boxqubo.surrogate import (
    Dataset,
    LowRankModel,
    SplitResult,
    TrainParams,
    build_temporary_set,
    model_to_qubo,
    split_dataset,
    train_box_qubo,
    train_regression_baseline,
)

__version__ = "0.1.0"

__all__ = [
    "AnnealSchedule",
    "Dataset",
    "LabeledBatch",
    "LowRankModel",
    "QuboMatrix",
    "SampleSet",
    "SplitResult",
    "TrainParams",
    "TrainingDivergedError",
    "anneal",
    "batch_energy",
    "best_k",
    "build_temporary_set",
    "energy",
    "gradient_descent_epochs",
    "loss",
    "loss_gradient",
    "model_to_qubo",
    "random_init",
    "split_dataset",
    "train_box_qubo",
    "train_regression_baseline",
]
