from ..errors import ConfigError, DimensionError, ShapeError
from .gradcheck import grad_check, numeric_gradient
from .kernels import (
    bidirectional_recurrent,
    conv1d_strided,
    conv1d_transposed,
    conv2d_same,
    gelu,
    glu,
    group_norm,
    irfft_axis,
    linear,
    rfft_axis,
    sigmoid,
    tanh,
)
from .rng import derive_seed, make_rng
from .tensor import (
    Tensor,
    add,
    as_tensor,
    concat,
    is_grad_enabled,
    mean,
    moveaxis,
    mul,
    narrow,
    no_grad,
    pad_axis,
    reshape,
    sqrt,
    square,
    sub,
    tsum,
)

__all__ = [
    "ConfigError", "DimensionError", "ShapeError", "Tensor",
    "add", "as_tensor", "bidirectional_recurrent", "concat", "conv1d_strided", "conv1d_transposed",
    "conv2d_same", "derive_seed", "gelu", "glu", "grad_check", "group_norm", "irfft_axis",
    "is_grad_enabled", "linear", "make_rng", "mean", "moveaxis", "mul", "narrow", "no_grad",
    "numeric_gradient", "pad_axis", "reshape", "rfft_axis", "sigmoid", "sqrt", "square", "sub",
    "tanh", "tsum",
]
