"""Conversion-error metrics, brute-force oracles and SOP-based energy estimates."""
from __future__ import annotations

import csv
import io
import itertools
import math
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from .ann import AnnNetwork
from .convert import predicted_rate
from .snn import Mode, NeuronLayerState, SimRecord, SnnNetwork, run_layer_with_trains
from .tensor import Rng, rand_uniform

ENERGY_PER_SOP = 77e-15  # J
ENERGY_PER_FLOP = 12.5e-12  # J
MAX_ORDERINGS = 10**6


def clipping_stats(acts, lam):
    """Fraction of activations above ``lam`` and the mean excess ``(a - lam)+``."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    a = np.asarray(acts, dtype=np.float64).ravel()
    if a.size == 0:
        return 0.0, 0.0
    excess = np.maximum(a - lam, 0.0)
    return float(np.mean(a > lam)), float(np.mean(excess))


def quantization_mse(z, theta, T, v0):
    """Mean of ``(z - theta/T * floor((T z + v0)/theta))**2`` over elements with z in [0, theta]."""
    if T < 1:
        raise ValueError("T must be >= 1")
    z = np.asarray(z, dtype=np.float64).ravel()
    z = z[(z >= 0) & (z <= theta)]
    if z.size == 0:
        return 0.0
    err = z - theta * np.floor((T * z + v0) / theta) / T
    return float(np.mean(err * err))


def v0_sweep(theta, T, grid, n_samples=100_000, seed=0):
    """Monte-Carlo quantization MSE for each candidate v0; returns ``(curve, argmin_v0)``."""
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    z = rand_uniform(Rng(seed), n_samples, 0.0, theta)
    curve = [(float(v0), quantization_mse(z, theta, T, v0)) for v0 in grid]
    best = min(curve, key=lambda item: item[1])
    return curve, best[0]


def uniform_train(count: int, T: int):
    """Evenly spread ``count`` spikes over ``T`` steps.

    Spike times are those of an IF neuron fed constant current
    ``count/T`` with threshold 1 and v(0) = 1/2.
    """
    t = np.arange(T + 1)
    cum = np.floor(t * count / T + 0.5)
    return np.diff(cum).astype(np.int8)


@dataclass
class UnevennessResult:
    min_phi: float
    max_phi: float
    uniform_phi: float
    target: float
    mean_abs_dev: float
    max_abs_dev: float
    histogram: dict = field(default_factory=dict)
    n_orderings: int = 0


def unevenness_enumeration(weights, presyn_counts, theta, T, mode=Mode.IF, presyn_theta=1.0, v0=0.0,
                           theta_neg=-1e-3) -> UnevennessResult:
    """Rate of one postsynaptic neuron over every placement of the presynaptic spikes.

    Presynaptic neuron ``i`` fires exactly ``presyn_counts[i]`` times in ``T``
    steps; all ``prod(C(T, c_i))`` placements are simulated.  Deviations are
    measured against the rate the ANN activation ``W . rates`` maps to.
    """
    w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    if w.shape[0] != 1:
        raise ValueError("enumeration drives a single postsynaptic neuron")
    counts = [int(c) for c in presyn_counts]
    if len(counts) != w.shape[1] or any(c < 0 or c > T for c in counts):
        raise ValueError("need one count in [0, T] per presynaptic neuron")
    total = math.prod(math.comb(T, c) for c in counts)
    if total > MAX_ORDERINGS:
        raise ValueError(f"{total} orderings exceeds the {MAX_ORDERINGS} limit; sample orderings instead")

    per_input = []
    for c in counts:
        options = []
        for times in itertools.combinations(range(T), c):
            train = np.zeros(T, dtype=np.int8)
            train[list(times)] = 1
            options.append(train)
        per_input.append(options)
    trains = np.array([np.stack(combo, axis=1) for combo in itertools.product(*per_input)])
    trains = trains.transpose(1, 0, 2)  # (T, orderings, n_in)

    tpl = NeuronLayerState.fresh((1,), theta, v0, mode, theta_neg)
    phis = run_layer_with_trains(w, None, tpl, trains, T, presyn_theta).phi[0][:, 0]

    uniform = np.stack([uniform_train(c, T) for c in counts], axis=1)
    uniform_phi = float(run_layer_with_trains(w, None, tpl, uniform, T, presyn_theta).phi[0][0, 0])

    a = float((w @ np.array(counts, dtype=np.float64))[0] * presyn_theta / T)
    target = float(predicted_rate(a, theta, theta, T))
    dev = np.abs(phis - target)
    hist = Counter(float(p) for p in phis)
    return UnevennessResult(
        min_phi=float(phis.min()),
        max_phi=float(phis.max()),
        uniform_phi=uniform_phi,
        target=target,
        mean_abs_dev=float(dev.mean()),
        max_abs_dev=float(dev.max()),
        histogram=dict(sorted(hist.items())),
        n_orderings=int(total),
    )


def count_sops(sim: SimRecord, net: SnnNetwork) -> int:
    """Spike events (either sign) times the fan-out of the emitting neuron, summed over batch and steps."""
    if len(sim.spikes) != len(net.hidden):
        raise ValueError("record does not match the network's spiking layers")
    total = 0
    for spikes, nxt in zip(sim.spikes, net.layers[1:]):
        fan_out = nxt.weights.shape[0]
        total += int(np.abs(spikes).sum(dtype=np.int64)) * fan_out
    return total


def count_flops(ann: AnnNetwork) -> int:
    """Two operations per multiply-accumulate, per sample."""
    dense = [layer for layer, _ in ann.layers] + [ann.output_layer]
    return sum(2 * d.n_in * d.n_out for d in dense)


def estimate_energy(sops, flops):
    return sops * ENERGY_PER_SOP, flops * ENERGY_PER_FLOP


@dataclass
class LayerErrors:
    clip_fraction: float
    clip_mass: float
    quant_mse: float
    rate_gap: float


@dataclass
class ErrorReport:
    layers: list[LayerErrors]
    sops: int
    flops: int
    energy_snn: float
    energy_ann: float
    seed: int | None = None

    CSV_COLUMNS = ("layer", "clip_fraction", "clip_mass", "quant_mse", "rate_gap",
                   "sops", "flops", "energy_snn_j", "energy_ann_j")

    def to_json(self) -> dict:
        return {
            "layers": [asdict(layer) for layer in self.layers],
            "totals": {"sops": self.sops, "flops": self.flops,
                       "energy_snn": self.energy_snn, "energy_ann": self.energy_ann},
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ErrorReport":
        t = d["totals"]
        return cls([LayerErrors(**layer) for layer in d["layers"]], t["sops"], t["flops"],
                   t["energy_snn"], t["energy_ann"], d.get("seed"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_COLUMNS)
        for i, layer in enumerate(self.layers):
            writer.writerow([i, repr(layer.clip_fraction), repr(layer.clip_mass),
                             repr(layer.quant_mse), repr(layer.rate_gap), "", "", "", ""])
        writer.writerow(["total", "", "", "", "", self.sops, self.flops,
                         repr(self.energy_snn), repr(self.energy_ann)])
        return buf.getvalue()

    def mean(self, name) -> float:
        values = [getattr(layer, name) for layer in self.layers]
        return float(np.mean(values)) if values else 0.0


def error_report(ann: AnnNetwork, snn: SnnNetwork, sim: SimRecord, acts, pre, seed=None) -> ErrorReport:
    """Per-layer error statistics for one evaluated batch.

    ``acts``/``pre`` are the ANN's hidden activations and pre-activations on
    the same inputs that produced ``sim``.  SOPs and FLOPs cover the whole
    batch.
    """
    layers = []
    for (_, p), layer, a, z, phi in zip(ann.layers, snn.hidden, acts, pre, sim.phi):
        frac, mass = clipping_stats(a, p.lam)
        v0 = snn.v0_policy.initial(layer.theta)
        quant = quantization_mse(z, layer.theta, sim.T, v0)
        gap = float(np.mean(np.abs(phi - np.asarray(a, dtype=np.float64))))
        layers.append(LayerErrors(frac, mass, quant, gap))
    batch = sim.phi[-1].shape[0]
    sops = count_sops(sim, snn)
    flops = count_flops(ann) * batch
    e_snn, e_ann = estimate_energy(sops, flops)
    return ErrorReport(layers, sops, flops, e_snn, e_ann, seed)
