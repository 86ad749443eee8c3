"""Greedy training of polynomial networks with squared activations."""
from .data import Dataset, DataFormatError, load_csv, save_csv
from .geco2 import TrainConfig, TrainTrace, geco2_train, refit_output_weights
from .geco3 import TensorConfig, approx_tensor_max, geco3_train
from .linalg import NumericalFailure, dominant_eigenpair, top_singular_pair
from .loss import LOGISTIC, SQUARED, LossFn, empirical_risk, get_loss
from .net import BasisFunction, PolyNet, evaluate

__version__ = "0.1.0"
