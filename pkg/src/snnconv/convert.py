"""ANN to SNN conversion and closed-form rate predictions."""
from __future__ import annotations

import struct

import numpy as np

from .ann import KIND_SNN, AnnNetwork, CheckpointError, DenseLayer, QcfsParams, read_container, write_container
from .snn import THETA_NEG, Mode, NeuronLayerState, SnnLayer, SnnNetwork, V0Policy
from .tensor import level_value


class ConversionError(ValueError):
    pass


def convert(ann: AnnNetwork, mode=Mode.DTN, v0_policy=V0Policy("half_theta"), theta_neg=THETA_NEG) -> SnnNetwork:
    """Copy weights and biases verbatim and map each learned ``lam`` to the layer threshold."""
    mode = Mode(mode)
    v0_policy = V0Policy.parse(v0_policy)
    layers = []
    for i, (dense, p) in enumerate(ann.layers):
        if not (np.isfinite(p.lam) and p.lam > 0):
            raise ConversionError(f"layer {i}: threshold must be finite and positive, got {p.lam}")
        tpl = NeuronLayerState.fresh((dense.n_out,), float(p.lam), 0.0, mode, theta_neg)
        layers.append(SnnLayer(dense.weights.copy(), dense.bias.copy(), tpl))
    out = ann.output_layer
    layers.append(SnnLayer(out.weights.copy(), out.bias.copy(), None))
    return SnnNetwork(layers, v0_policy)


def predicted_rate(a, lam, theta, T):
    """Rate an activation ``a`` maps to: ``clip(theta/T * floor(a T / lam), 0, theta)``."""
    if T < 1 or not lam > 0:
        raise ValueError("need T >= 1 and lam > 0")
    k = np.floor(np.asarray(a, dtype=np.float64) * T / lam)
    return np.clip(level_value(theta, k, T), 0.0, theta)


def equivalent_rate(z, theta, T, v0):
    """Closed-form output rate of an IF neuron fed constant current ``z`` for ``T`` steps.

    ``theta/T * clip(floor((T z + v0) / theta), 0, T)``; exact for soft reset
    with at most one spike per step.
    """
    k = np.clip(np.floor((T * np.asarray(z, dtype=np.float64) + v0) / theta), 0, T)
    return level_value(theta, k, T)


# --- SNN checkpoints: the ANN container plus a mode/theta_neg/v0 extension --

_EXT = "<BdBd"
_V0_KINDS = ("zero", "half_theta", "explicit")


def export_snn(snn: SnnNetwork) -> bytes:
    hidden = []
    for layer in snn.hidden:
        hidden.append((DenseLayer(layer.weights, layer.bias), QcfsParams(layer.theta, 1)))
    out = snn.layers[-1]
    tpl = snn.hidden[0].template if snn.hidden else NeuronLayerState.fresh((1,), 1.0)
    ext = struct.pack(
        _EXT,
        0 if snn.mode is Mode.IF else 1,
        tpl.theta_neg,
        _V0_KINDS.index(snn.v0_policy.kind),
        snn.v0_policy.value if snn.v0_policy.value is not None else 0.0,
    )
    return write_container(AnnNetwork(hidden, DenseLayer(out.weights, out.bias)), KIND_SNN, ext)


def import_snn(data: bytes) -> SnnNetwork:
    kind, net, ext = read_container(data)
    if kind != KIND_SNN:
        raise CheckpointError("checkpoint holds an ANN; convert it first")
    if len(ext) != struct.calcsize(_EXT):
        raise CheckpointError("malformed SNN header extension")
    mode_code, theta_neg, v0_kind, v0_value = struct.unpack(_EXT, ext)
    if mode_code > 1 or v0_kind > 2:
        raise CheckpointError("malformed SNN header extension")
    kind_name = _V0_KINDS[v0_kind]
    policy = V0Policy(kind_name, v0_value if kind_name == "explicit" else None)
    return convert(net, Mode.IF if mode_code == 0 else Mode.DTN, policy, theta_neg)
