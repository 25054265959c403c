"""Learnable-threshold ANN training and conversion to dual-threshold spiking networks."""

__version__ = "0.1.0"

from .ann import AnnNetwork, QcfsParams, ann_forward, init_network, qcfs_backward, qcfs_forward, train
from .convert import convert, equivalent_rate, predicted_rate
from .snn import Mode, NeuronLayerState, SimRecord, SnnNetwork, V0Policy, simulate, step

__all__ = [
    "AnnNetwork", "QcfsParams", "ann_forward", "init_network", "qcfs_backward", "qcfs_forward", "train",
    "convert", "equivalent_rate", "predicted_rate",
    "Mode", "NeuronLayerState", "SimRecord", "SnnNetwork", "V0Policy", "simulate", "step",
]
