from .config import PRESETS, DenseConfig, LstmConfig, config_from_dict, preset
from .dense import dense_backward, dense_forward, init_dense
from .estimators import DenseRegressor, LstmRegressor, TrainingError, estimator_from_dict
from .gradcheck import gradient_check
from .lstm import init_lstm, lstm_backward, lstm_forward
from .optim import Adam
from .search import DENSE_SPACE, LSTM_SPACE, Trial, random_search, sample_params

__all__ = [
    "Adam", "PRESETS", "preset", "DENSE_SPACE", "DenseConfig", "DenseRegressor", "LSTM_SPACE", "LstmConfig", "LstmRegressor",
    "Trial", "TrainingError", "config_from_dict", "dense_backward", "dense_forward", "estimator_from_dict",
    "gradient_check", "init_dense", "init_lstm", "lstm_backward", "lstm_forward", "random_search",
    "sample_params",
]
