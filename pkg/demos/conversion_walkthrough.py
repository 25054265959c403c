"""
From a trained ANN to a spiking network
=======================================

Train a small quantized network on two interleaved spirals, convert it to a
spiking network, and watch accuracy recover as the simulation gets longer.
The last cell prints where the remaining error lives and what the spiking
run costs in energy.
"""
import numpy as np

from snnconv.analysis import error_report
from snnconv.ann import accuracy, ann_forward
from snnconv.convert import convert
from snnconv.pipeline import ExperimentConfig, load_dataset, train_ann
from snnconv.snn import simulate

cfg = ExperimentConfig(task="spirals", seed=1, net=[32, 32], L=4, n_samples=800)
train_set, test_set = load_dataset(cfg)
print(f"{len(train_set.labels)} training points, {len(test_set.labels)} test points")

# Training takes a few seconds.  The learned clipping levels end up as the
# spiking thresholds.
ann, log = train_ann(cfg, train_set)
print(f"final loss {log.loss[-1]:.4f}")
print("learned lambdas", [round(v, 3) for v in ann.lambdas])
print("ANN test accuracy", accuracy(ann, test_set.inputs, test_set.labels))

# %%
# Convert twice: once with plain integrate-and-fire neurons and once with
# the dual-threshold variant.  Both start at half the threshold.
for T in (1, 2, 4, 8, 16):
    row = []
    for mode in ("IF", "DTN"):
        sim = simulate(convert(ann, mode), test_set.inputs, T)
        row.append(f"{mode} {np.mean(sim.predictions() == test_set.labels):.3f}")
    print(f"T={T:2d}  " + "  ".join(row))

# %%
# Per-layer error report at T=4.  Clipping is gone because the threshold
# equals lambda, so what remains is quantization and the gap between the
# simulated rate and the ANN activation.
snn = convert(ann, "DTN")
sim = simulate(snn, test_set.inputs, 4)
_, acts, pre = ann_forward(ann, test_set.inputs)
report = error_report(ann, snn, sim, acts, pre, seed=cfg.seed)
print(report.to_csv())
print(f"SNN {report.energy_snn:.3e} J vs ANN {report.energy_ann:.3e} J")
