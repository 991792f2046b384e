"""Autodiff tape, MLPs, Adam, and seeded sampling."""

from . import autodiff
from .autodiff import (
    Node,
    backward,
    concat,
    gradients,
    relu,
    sigmoid,
    softminus,
    softplus,
    tanh,
    value_of,
    zero_grad,
)
from .nets import Layer, Mlp
from .optim import AdamState, adam_step
from .rng import Rng, child_rng, gaussian_sample, make_rng

__all__ = [
    "autodiff",
    "Node",
    "backward",
    "gradients",
    "zero_grad",
    "concat",
    "relu",
    "sigmoid",
    "softplus",
    "softminus",
    "tanh",
    "value_of",
    "Layer",
    "Mlp",
    "AdamState",
    "adam_step",
    "Rng",
    "make_rng",
    "child_rng",
    "gaussian_sample",
]
