from .data import (
    CIFAR10_MEAN,
    CIFAR10_STD,
    DataFormatError,
    Dataset,
    encode_cifar10_records,
    flip_horizontal,
    load_cifar10_binary,
    parse_cifar10_records,
    standardize,
    synthetic_dataset,
)
from .loss import accuracy, label_smoothing_ce
from .optim import AdamW, DivergenceError, Ema, cosine_schedule, no_decay_param
from .loop import METRIC_COLUMNS, TrainConfig, TrainResult, evaluate, train_loop
