import csv
import io
import itertools
from fractions import Fraction

import numpy as np
import pytest

from snnconv.analysis import (
    ENERGY_PER_SOP,
    ErrorReport,
    LayerErrors,
    clipping_stats,
    count_flops,
    count_sops,
    estimate_energy,
    quantization_mse,
    unevenness_enumeration,
    uniform_train,
    v0_sweep,
)
from snnconv.ann import AnnNetwork, DenseLayer, QcfsParams, init_network
from snnconv.convert import predicted_rate
from snnconv.snn import Mode, NeuronLayerState, SimRecord, SnnLayer, SnnNetwork, V0Policy, simulate
from snnconv.tensor import Rng


def test_clipping_stats_examples():
    assert clipping_stats([0.2, 0.5], 1.0) == (0.0, 0.0)
    assert clipping_stats([0.5, 1.5], 1.0) == (0.5, 0.25)
    with pytest.raises(ValueError):
        clipping_stats([1.0], 0.0)


def test_quantization_mse_examples():
    assert quantization_mse([0.0, 0.25, 0.5, 1.0], 1.0, 4, 0.0) == 0.0
    assert quantization_mse([0.45], 1.0, 5, 0.5) == pytest.approx(0.0025, abs=1e-15)
    # out-of-range values are excluded
    assert quantization_mse([0.45, -3.0, 7.0], 1.0, 5, 0.5) == quantization_mse([0.45], 1.0, 5, 0.5)
    z = np.linspace(0, 1, 100_000)
    assert quantization_mse(z, 1.0, 4, 0.5) <= quantization_mse(z, 1.0, 4, 0.0)


def expected_mse(theta, T, v0):
    # z ~ U[0, theta]: the fractional part f of T z / theta is uniform; the
    # quantizer rounds up once f >= 1 - v, v = v0/theta
    v = v0 / theta
    return (theta / T) ** 2 * ((1 - v) ** 3 + v ** 3) / 3


@pytest.mark.parametrize("theta, T", [(1.0, 4), (2.0, 4), (1.0, 2), (0.7, 8)])
def test_v0_sweep_matches_quadrature_and_finds_half(theta, T):
    grid = [theta * k / 4 for k in range(5)]
    curve, best = v0_sweep(theta, T, grid, 100_000, seed=3)
    for v0, mse in curve:
        assert mse == pytest.approx(expected_mse(theta, T, v0), rel=0.03)
    assert best == theta / 2


def test_v0_sweep_single_point_and_empty():
    assert v0_sweep(1.0, 4, [0.3], 1000)[1] == 0.3
    with pytest.raises(ValueError):
        v0_sweep(1.0, 4, [])


def brute_force_rates(w, counts, theta, T, mode):
    """Independent enumeration with rational arithmetic, one neuron at a time."""
    per_input = [list(itertools.combinations(range(T), c)) for c in counts]
    rates = []
    for combo in itertools.product(*per_input):
        v, net, total = Fraction(0), 0, 0
        for t in range(T):
            m = v + sum(Fraction(wi) for wi, times in zip(w, combo) if t in times)
            if m >= theta:
                s = 1
            elif mode == "DTN" and m <= Fraction(-1, 1000) and net >= 1:
                s = -1
            else:
                s = 0
            v, net, total = m - s * theta, net + s, total + s
        rates.append(Fraction(theta) * total / T)
    return rates


def test_unevenness_worked_example_if():
    res = unevenness_enumeration([2.0, -2.0], (3, 2), 1.0, 5, Mode.IF)
    assert (res.uniform_phi, res.max_phi, res.min_phi) == (2 / 5, 4 / 5, 1 / 5)
    assert res.n_orderings == 100 and sum(res.histogram.values()) == 100
    oracle = brute_force_rates([2, -2], (3, 2), 1, 5, "IF")
    assert sorted(res.histogram.items()) == sorted(
        (float(r), n) for r, n in zip(*np.unique([float(x) for x in oracle], return_counts=True))
    )


def test_unevenness_dtn_reduces_mean_deviation():
    if_res = unevenness_enumeration([2.0, -2.0], (3, 2), 1.0, 5, Mode.IF)
    dtn_res = unevenness_enumeration([2.0, -2.0], (3, 2), 1.0, 5, Mode.DTN)
    oracle = brute_force_rates([2, -2], (3, 2), 1, 5, "DTN")
    assert dtn_res.mean_abs_dev == pytest.approx(float(sum(abs(r - Fraction(2, 5)) for r in oracle) / 100))
    assert dtn_res.mean_abs_dev <= if_res.mean_abs_dev


@pytest.mark.parametrize("w, count", [(1.0, 2), (-0.7, 3), (0.4, 5), (0.9, 4)])
@pytest.mark.parametrize("mode", [Mode.IF, Mode.DTN])
def test_single_input_has_no_unevenness(w, count, mode):
    res = unevenness_enumeration([w], (count,), 1.0, 5, mode)
    assert len(res.histogram) == 1


def test_single_input_above_threshold_is_order_sensitive():
    # with w > theta, late arrivals leave charge that one-spike-per-step cannot release
    res = unevenness_enumeration([1.5], (2,), 1.0, 5)
    # three spikes whenever the second arrival is at t <= 4: C(4, 2) = 6 of 10 orderings
    assert res.histogram == {0.4: 4, 0.6: 6}


@pytest.mark.parametrize("w, counts, T", [([2.0, -2.0], (3, 2), 5), ([1.0, 0.5, -1.0], (2, 4, 1), 6)])
def test_uniform_order_matches_predicted_rate(w, counts, T):
    res = unevenness_enumeration(w, counts, 1.0, T)
    a = float(np.dot(w, counts)) / T
    assert res.uniform_phi == predicted_rate(a, 1.0, 1.0, T) == res.target


def test_uniform_train_counts():
    for T in range(1, 12):
        for c in range(T + 1):
            train = uniform_train(c, T)
            assert train.sum() == c and set(train.tolist()) <= {0, 1}


def test_enumeration_guard():
    with pytest.raises(ValueError, match="sample"):
        unevenness_enumeration([1.0, 1.0, 1.0], (10, 10, 10), 1.0, 20)


def test_sops_examples():
    net = SnnNetwork([
        SnnLayer(np.ones((1, 2)), np.zeros(1), NeuronLayerState.fresh((1,), 1.0)),
        SnnLayer(np.ones((10, 1)), np.zeros(10), None),
    ])
    silent = SimRecord(3, [np.zeros((3, 1, 1), dtype=np.int8)], [np.zeros((1, 1)), np.zeros((1, 10))], [1.0])
    assert count_sops(silent, net) == 0
    one = SimRecord(3, [np.array([[[0]], [[1]], [[0]]], dtype=np.int8)], [np.zeros((1, 1)), np.zeros((1, 10))], [1.0])
    assert count_sops(one, net) == 10
    neg = SimRecord(3, [np.array([[[1]], [[-1]], [[0]]], dtype=np.int8)], [np.zeros((1, 1)), np.zeros((1, 10))], [1.0])
    assert count_sops(neg, net) == 20


def test_flops_and_energy():
    dense = [DenseLayer(np.zeros((3, 2)), np.zeros(3)), DenseLayer(np.zeros((1, 3)), np.zeros(1))]
    ann = AnnNetwork([(dense[0], QcfsParams())], dense[1])
    assert count_flops(ann) == 18
    assert estimate_energy(1000, 0) == (1000 * ENERGY_PER_SOP, 0.0)
    assert estimate_energy(1000, 0)[0] == pytest.approx(7.7e-11, rel=1e-12)
    assert estimate_energy(0, 10)[1] == pytest.approx(1.25e-10, rel=1e-12)


def test_sops_nondecreasing_in_T():
    ann = init_network([2, 8, 8, 2], 4, Rng(0))
    from snnconv.convert import convert
    snn = convert(ann, Mode.DTN)
    x = Rng(1).uniform((20, 2), -2, 2)
    sops = [count_sops(simulate(snn, x, T), snn) for T in (1, 2, 4, 8, 16)]
    assert sops == sorted(sops)


def test_error_report_serialization():
    rep = ErrorReport([LayerErrors(0.0, 0.0, 0.01, 0.1), LayerErrors(0.0, 0.0, 0.02, 0.2)], 100, 18,
                      *estimate_energy(100, 18), seed=4)
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0] == ["layer", "clip_fraction", "clip_mass", "quant_mse", "rate_gap",
                       "sops", "flops", "energy_snn_j", "energy_ann_j"]
    assert len(rows) == 4 and rows[-1][0] == "total" and rows[-1][5] == "100"
    assert ErrorReport.from_json(rep.to_json()) == rep
    assert rep.mean("rate_gap") == pytest.approx(0.15)
