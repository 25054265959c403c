"""
Spiking neuron dynamics, step by step
=====================================

Three small experiments on single neurons: why a negative threshold helps,
how spike arrival order changes the output rate, and where the best initial
membrane potential sits.

Run with ``python3 demos/neuron_dynamics.py``.
"""
import numpy as np

from snnconv.analysis import unevenness_enumeration, v0_sweep
from snnconv.snn import Mode, run_neuron

np.set_printoptions(precision=3, suppress=True)

# %%
# A neuron with threshold 1 receives +2 and -2 alternately for four steps.
# The net input is zero, yet a plain integrate-and-fire neuron fires twice:
# each +2 pushes it over threshold before the -2 arrives.
charges = (2, -2, 2, -2)
spikes, rate, pots = run_neuron(charges, 1.0, 0.0, Mode.IF)
print("IF   spikes", spikes, "rate", rate, "potential", pots)

# %%
# With a small negative threshold the neuron may take a spike back once its
# potential drops below zero.  The output rate now matches the input.
spikes, rate, pots = run_neuron(charges, 1.0, 0.0, Mode.DTN, theta_neg=-1e-3)
print("DTN  spikes", spikes, "rate", rate, "potential", pots)

# %%
# Order matters.  A neuron with weights (2, -2) sees 3 spikes on the first
# input and 2 on the second over T=5 steps.  Every placement of those spikes
# gives the same input totals, but not the same output.
res = unevenness_enumeration([2.0, -2.0], (3, 2), 1.0, 5, Mode.IF)
print(f"\n{res.n_orderings} orderings, uniform {res.uniform_phi}, "
      f"range [{res.min_phi}, {res.max_phi}], target {res.target}")
for phi, count in sorted(res.histogram.items()):
    print(f"  phi={phi:.1f}  {'#' * (count // 2)} {count}")

dtn = unevenness_enumeration([2.0, -2.0], (3, 2), 1.0, 5, Mode.DTN)
print(f"mean |error| IF {res.mean_abs_dev:.3f}  DTN {dtn.mean_abs_dev:.3f}")

# %%
# Finally the initial potential.  For uniformly distributed inputs the
# expected squared error between the spiking rate and the input is smallest
# when the neuron starts half way to threshold.
grid = [round(0.1 * k, 10) for k in range(11)]
for T in (2, 4, 8):
    curve, best = v0_sweep(1.0, T, grid, 50_000, seed=T)
    mse = dict(curve)
    print(f"T={T}: best v0={best}, error at 0 {mse[0.0]:.5f}, at best {mse[best]:.5f}")
