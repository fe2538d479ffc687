from meb.numcore.tensor import GradTape, Tensor, get_default_dtype, precision
from meb.numcore.ops import (
    add,
    affine,
    clamp,
    concat,
    div,
    exp,
    gather,
    log,
    log_softmax,
    matmul,
    mean,
    mul,
    neg,
    pad_columns,
    pairwise_l2,
    relu,
    sigmoid,
    softmax,
    softplus,
    sub,
    sum_,
    take_rows,
    tanh,
)
from meb.numcore.gradcheck import gradcheck

__all__ = [
    "GradTape",
    "Tensor",
    "get_default_dtype",
    "precision",
    "add",
    "affine",
    "clamp",
    "concat",
    "div",
    "exp",
    "gather",
    "gradcheck",
    "log",
    "log_softmax",
    "matmul",
    "mean",
    "mul",
    "neg",
    "pad_columns",
    "pairwise_l2",
    "relu",
    "sigmoid",
    "softmax",
    "softplus",
    "sub",
    "sum_",
    "take_rows",
    "tanh",
]
