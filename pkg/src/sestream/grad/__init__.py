from .tensor import Tensor, no_grad, grad_enabled
from .functional import (
    pad4,
    crop4,
    concat_channels,
    conv2d,
    conv_transpose2d,
    silu,
    cumulative_group_norm,
)
from .params import ParamStore, conv_init
from .kernels import backend_name

__all__ = [
    "Tensor",
    "no_grad",
    "grad_enabled",
    "pad4",
    "crop4",
    "concat_channels",
    "conv2d",
    "conv_transpose2d",
    "silu",
    "cumulative_group_norm",
    "ParamStore",
    "conv_init",
    "backend_name",
]
