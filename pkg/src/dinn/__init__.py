"""Deep interval neural networks with rigorous outward rounding."""

from .exceptions import (BadCheckpoint, DivergenceDetected, DivisionByZeroInterval,
                         IntervalOverflow, InvalidEndpoints, MissingColumn, NegativeUncertainty,
                         NonPositiveClip, ParseError, ShapeMismatch, TraceMismatch,
                         UncoveredFeature, ZeroVariance)
from .interval import (EMPTY, Interval, IntervalDescriptors, add, apply_monotone_increasing,
                       contains, descriptors, div, from_uncertainty, hull, intersect, mag, make,
                       mul, relu, sqr, sub, subset)
from .tensor import IntervalTensor, clip_by_mag, concat_rows, from_real, matmul
from .net import (DinnLayer, DinnModel, ForwardTrace, backward, data_loss, forward,
                  lipschitz_bound, load_model, loss, predict, regularizer, relu_deriv, save_model)
from .optim import (OptimizerConfig, OptimizerState, Schedule, adam_unmodified_step,
                    apply_update, clip_gradients, iadam_step, init_model, init_weights,
                    momentum_step, schedule_alpha, sgd_step, warm_start)
from .baseline import RealModel, TrainConfig, mc_dropout_predict, train_real

__version__ = "0.1.0"
