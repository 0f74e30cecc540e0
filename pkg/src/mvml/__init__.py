"""Multi-view metric learning in vector-valued kernel spaces.

Jointly learns a block metric between per-view kernel feature spaces and a
vector-valued predictor, with an optional block-wise Nystrom approximation.
"""
from .exceptions import (ConfigError, DeserializationError, DivergenceError, IngestionError,
                         InputError, MetricError, MVMLError, NumericalError)
from .kernels import KernelConfig, cross_gram, eval_kernel, gram, mean_distance_sigma
from .multiview import (GramStack, GroupLayout, MetricMatrix, assemble_K, build_gram_stack,
                        group_frobenius, group_layout, preset_metric_cov,
                        preset_metric_identity_blocks)
from .nystrom import NystromFactors, build_U, factorize_view, nystrom_from_grams, nystrom_from_views
from .solver import SolverConfig, SolverState, fit
from .model import ModelState, fit_one_vs_all, predict, predict_classes, predict_views, train
from .evaluation import BoundInputs, accuracy, nmse, r2, rademacher_bound
from .serialization import load, save

__version__ = "0.1.0"
