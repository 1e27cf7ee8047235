"""Learned step-cost estimators: features, networks, training, wrappers."""

from .data import DEFAULT_WINDOW, DatasetBundle, build_dataset, config_bits_row, \
    window_rows
from .features import FEATURES_PER_CELL, FeatureStats, N_FEATURES, N_STATE_FEATURES, \
    TargetStats, featurize, featurize_many, fit_feature_stats, max_prbs_vector, \
    raw_features
from .models import HandoverEstimator, MlpEstimator, lstm_from_dict, lstm_to_dict, \
    mlp_from_dict, mlp_to_dict, model_from_dict
from .nn import ADAGRAD_EPS, AdagradState, LSTM_HIDDEN, LSTM_LR, LstmCell, LstmParams, \
    MLP_DIMS, MLP_LR, MlpParams, glorot_uniform, init_lstm, init_mlp, lstm_forward, \
    lstm_gradient, mlp_forward, mlp_gradient
from .training import Dataset, EpochStats, LstmNet, MlpNet, TrainReport, train

__all__ = [
    "ADAGRAD_EPS", "AdagradState", "Dataset", "DatasetBundle", "DEFAULT_WINDOW",
    "EpochStats", "FEATURES_PER_CELL", "FeatureStats", "HandoverEstimator",
    "LSTM_HIDDEN", "LSTM_LR", "LstmCell", "LstmNet", "LstmParams", "MLP_DIMS",
    "MLP_LR", "MlpEstimator", "MlpNet", "MlpParams", "N_FEATURES",
    "N_STATE_FEATURES", "TargetStats", "TrainReport", "build_dataset",
    "config_bits_row", "featurize", "featurize_many", "fit_feature_stats",
    "glorot_uniform", "init_lstm", "init_mlp", "lstm_forward", "lstm_from_dict",
    "lstm_gradient", "lstm_to_dict", "max_prbs_vector", "mlp_forward",
    "mlp_from_dict", "mlp_gradient", "mlp_to_dict", "model_from_dict",
    "raw_features", "train", "window_rows",
]
