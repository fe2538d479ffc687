"""Encoder topologies for the expert networks.

Parameters live in flat ``name -> Tensor`` mappings so that the current and the
temporally averaged sets can be swapped under the same forward code.

    none          h_i = act(h_{i-1} W_i + b_i)
    residual      h_0 = act(x W_0 + b_0); h_i = h_{i-1} + act(h_{i-1} W_i + b_i)
    dense_concat  h_i = act([x, h_1, ..., h_{i-1}] W_i + b_i), embed reads [h_1, ..., h_n]

Optional parallel branches read the last hidden state and are concatenated
before the final ``embed`` projection, whose output is zero-padded to the
shared feature width.
"""
from typing import Mapping

import numpy as np

from meb.numcore import Tensor, affine, concat, pad_columns, relu, tanh
from meb.schemas.enums import Activation, SkipPattern
from meb.schemas.experts import ArchitectureSpec


def _activate(kind: Activation, x: Tensor) -> Tensor:
    if kind == Activation.RELU:
        return relu(x)
    if kind == Activation.TANH:
        return tanh(x)
    return x


def _init_layer(rng: np.random.Generator, fan_in: int, fan_out: int, kind: Activation) -> tuple[np.ndarray, np.ndarray]:
    gain = 2.0 if kind == Activation.RELU else 1.0
    weight = rng.normal(0.0, np.sqrt(gain / fan_in), size=(fan_in, fan_out))
    return weight.astype(np.float32), np.zeros(fan_out, dtype=np.float32)


def layer_shapes(arch: ArchitectureSpec, input_dim: int) -> dict[str, tuple[int, int]]:
    """(fan_in, fan_out) of every affine layer of the encoder, in forward order."""
    shapes: dict[str, tuple[int, int]] = {}
    fan_in = input_dim
    dense_width = input_dim
    for i, width in enumerate(arch.hidden_widths):
        if arch.skip == SkipPattern.DENSE_CONCAT:
            shapes[f"layer{i}"] = (dense_width, width)
            dense_width += width
        else:
            shapes[f"layer{i}"] = (fan_in, width)
        fan_in = width

    if arch.skip == SkipPattern.DENSE_CONCAT:
        fan_in = dense_width - input_dim
    if arch.branch_widths:
        for j, width in enumerate(arch.branch_widths):
            shapes[f"branch{j}"] = (fan_in, width)
        fan_in = sum(arch.branch_widths)
    shapes["embed"] = (fan_in, arch.embed_dim)
    return shapes


def init_encoder(arch: ArchitectureSpec, input_dim: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    activations = arch.activations
    branch_acts = arch.branch_activations or [activations[-1]] * len(arch.branch_widths)
    for name, (fan_in, fan_out) in layer_shapes(arch, input_dim).items():
        if name.startswith("layer"):
            kind = activations[int(name[len("layer"):])]
        elif name.startswith("branch"):
            kind = branch_acts[int(name[len("branch"):])]
        else:
            kind = Activation.IDENTITY
        params[f"{name}.weight"], params[f"{name}.bias"] = _init_layer(rng, fan_in, fan_out, kind)
    return params


def _layer(params: Mapping[str, Tensor], name: str, x: Tensor) -> Tensor:
    return affine(x, params[f"{name}.weight"], params[f"{name}.bias"])


def encode(arch: ArchitectureSpec, params: Mapping[str, Tensor], x: Tensor) -> Tensor:
    """Pre-head features [B, F]; columns past ``embed_dim`` are exactly zero."""
    activations = arch.activations
    h = x
    dense_inputs = [x]
    dense_outputs = []
    for i, kind in enumerate(activations):
        name = f"layer{i}"
        if arch.skip == SkipPattern.DENSE_CONCAT:
            source = dense_inputs[0] if len(dense_inputs) == 1 else concat(dense_inputs, axis=1)
            h = _activate(kind, _layer(params, name, source))
            dense_inputs.append(h)
            dense_outputs.append(h)
        elif arch.skip == SkipPattern.RESIDUAL and i > 0:
            h = h + _activate(kind, _layer(params, name, h))
        else:
            h = _activate(kind, _layer(params, name, h))

    if arch.skip == SkipPattern.DENSE_CONCAT and len(dense_outputs) > 1:
        h = concat(dense_outputs, axis=1)

    if arch.branch_widths:
        branch_acts = arch.branch_activations or [activations[-1]] * len(arch.branch_widths)
        branches = [_activate(kind, _layer(params, f"branch{j}", h)) for j, kind in enumerate(branch_acts)]
        h = branches[0] if len(branches) == 1 else concat(branches, axis=1)

    embedded = _layer(params, "embed", h)
    if arch.embed_dim == arch.feature_dim:
        return embedded
    return pad_columns(embedded, arch.feature_dim)
