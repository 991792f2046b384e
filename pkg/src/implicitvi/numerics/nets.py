"""Small fully-connected networks whose parameters live on the autodiff tape."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Node

ACTIVATIONS = ("tanh", "relu", "identity")


@dataclass
class Layer:
    weight: Node  # shape (out_dim, in_dim)
    bias: Node  # shape (out_dim,)
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


class Mlp:
    """Feed-forward network: affine layers with tanh/relu/identity activations.

    Parameters are persistent ``Node`` leaves so gradients accumulate into
    them across a backward pass; ``apply_const`` evaluates the same function
    with the parameters treated as constants (no adjoints flow into them),
    which doubles as a fast pure-numpy path when the input is a plain array.
    """

    def __init__(self, layers: Sequence[Layer]):
        layers = list(layers)
        if not layers:
            raise ValueError("Mlp needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if nxt.weight.value.shape[1] != prev.weight.value.shape[0]:
                raise ValueError("consecutive layer dimensions do not chain")
        self.layers = layers
        self.input_dim = layers[0].weight.value.shape[1]
        self.output_dim = layers[-1].weight.value.shape[0]

    @classmethod
    def create(
        cls,
        sizes: Sequence[int],
        rng: np.random.Generator,
        hidden_activation: str = "tanh",
        output_activation: str = "identity",
        name: str = "mlp",
    ) -> "Mlp":
        """Glorot-uniform weights, zero biases; `sizes` includes input and output."""
        if len(sizes) < 2:
            raise ValueError("sizes must list at least input and output dims")
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
            act = output_activation if i == len(sizes) - 2 else hidden_activation
            layers.append(
                Layer(
                    weight=Node(w, name=f"{name}.layer{i}.weight"),
                    bias=Node(np.zeros(fan_out), name=f"{name}.layer{i}.bias"),
                    activation=act,
                )
            )
        return cls(layers)

    def _forward(self, x, as_nodes: bool):
        xv = ad.value_of(x) if not isinstance(x, Node) else x.value
        if xv.shape[-1] != self.input_dim:
            raise ValueError(
                f"input has {xv.shape[-1]} features, network expects {self.input_dim}"
            )
        h = x
        for layer in self.layers:
            w = layer.weight if as_nodes else layer.weight.value
            b = layer.bias if as_nodes else layer.bias.value
            h = ad.add(ad.matmul(h, ad.transpose(w)), b)
            if layer.activation == "tanh":
                h = ad.tanh(h)
            elif layer.activation == "relu":
                h = ad.relu(h)
        return h

    def apply(self, x):
        """Forward pass with trainable parameters (graph-connected)."""
        return self._forward(x, as_nodes=True)

    def apply_const(self, x):
        """Forward pass with parameters frozen to their current values."""
        return self._forward(x, as_nodes=False)

    def params(self) -> list[Node]:
        out = []
        for layer in self.layers:
            out.append(layer.weight)
            out.append(layer.bias)
        return out

    def n_params(self) -> int:
        return int(np.sum([p.value.size for p in self.params()]))

    def param_values(self) -> list[np.ndarray]:
        return [np.array(p.value, copy=True) for p in self.params()]

    def set_param_values(self, values: Sequence[np.ndarray]) -> None:
        params = self.params()
        if len(values) != len(params):
            raise ValueError("parameter count mismatch")
        for p, v in zip(params, values):
            v = np.asarray(v, dtype=np.float64)
            if v.shape != p.value.shape:
                raise ValueError(f"shape mismatch for {p.name}: {v.shape} vs {p.value.shape}")
            p.value = np.array(v, copy=True)
            p.grad = np.zeros_like(p.value)

    def to_dict(self) -> dict:
        return {
            "layers": [
                {
                    "weight": layer.weight.value.tolist(),
                    "bias": layer.bias.value.tolist(),
                    "activation": layer.activation,
                }
                for layer in self.layers
            ]
        }

    @classmethod
    def from_dict(cls, payload: dict, name: str = "mlp") -> "Mlp":
        layers = []
        for i, spec in enumerate(payload["layers"]):
            layers.append(
                Layer(
                    weight=Node(np.asarray(spec["weight"], dtype=np.float64),
                                name=f"{name}.layer{i}.weight"),
                    bias=Node(np.asarray(spec["bias"], dtype=np.float64),
                              name=f"{name}.layer{i}.bias"),
                    activation=spec["activation"],
                )
            )
        return cls(layers)
