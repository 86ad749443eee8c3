"""Comparison methods: SGD-trained networks, monomial linearization, over-specification."""
from .linearization import linearization_train, monomial_features
from .mlp import MlpNet, SgdConfig, sgd_train
from .overspec import overspec_experiment, overspec_sweep
