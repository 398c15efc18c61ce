from .tensor import (
    DimensionError,
    EvaluationError,
    Tensor,
    UnsupportedConfigError,
    add_rowvec,
    as_tensor,
    concat,
    conv2d,
    dwconv2d,
    einsum2,
    elementwise,
    layer_norm,
    log_softmax,
    matmul,
    softmax,
    stack,
)
from .rng import Rng
from .io import FormatError, read_nctd, write_nctd
from .gradcheck import grad_check

__all__ = [
    "DimensionError",
    "add_rowvec",
    "EvaluationError",
    "FormatError",
    "Rng",
    "Tensor",
    "UnsupportedConfigError",
    "as_tensor",
    "concat",
    "conv2d",
    "dwconv2d",
    "einsum2",
    "elementwise",
    "grad_check",
    "layer_norm",
    "log_softmax",
    "matmul",
    "read_nctd",
    "softmax",
    "stack",
    "write_nctd",
]
