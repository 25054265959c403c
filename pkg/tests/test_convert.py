import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from snnconv.ann import CheckpointError, QcfsParams, ann_forward, export_checkpoint, import_checkpoint, init_network, qcfs_forward
from snnconv.convert import ConversionError, convert, equivalent_rate, export_snn, import_snn, predicted_rate
from snnconv.snn import Mode, NeuronLayerState, SnnLayer, SnnNetwork, V0Policy, simulate
from snnconv.tensor import Rng


def _net(lams=(1.5, 0.8)):
    net = init_network([3, 4, 5, 2], 4, Rng(0))
    for (_, p), lam in zip(net.layers, lams):
        p.lam = lam
    return net


def test_threshold_mapping_and_weights():
    ann = _net()
    snn = convert(ann, Mode.IF)
    assert [layer.theta for layer in snn.hidden] == [1.5, 0.8]
    for (dense, _), layer in zip(ann.layers, snn.hidden):
        assert layer.weights.tobytes() == dense.weights.tobytes()
        assert layer.bias.tobytes() == dense.bias.tobytes()
    assert snn.layers[-1].weights.tobytes() == ann.output_layer.weights.tobytes()
    assert snn.layers[-1].template is None


def test_defaults_half_theta_and_negative_threshold():
    snn = convert(_net())
    assert snn.v0_policy == V0Policy("half_theta")
    assert [snn.v0_policy.initial(layer.theta) for layer in snn.hidden] == [0.75, 0.4]
    assert all(layer.template.theta_neg == -1e-3 for layer in snn.hidden)
    assert snn.mode is Mode.DTN


def test_modes_differ_only_in_dynamics():
    ann = _net()
    a, b = convert(ann, Mode.IF), convert(ann, Mode.DTN)
    for la, lb in zip(a.layers, b.layers):
        assert la.weights.tobytes() == lb.weights.tobytes() and la.theta == lb.theta
    assert a.mode is Mode.IF and b.mode is Mode.DTN


def test_conversion_rejects_bad_lambda():
    ann = _net()
    ann.layers[1][1].lam = float("nan")
    with pytest.raises(ConversionError, match="layer 1"):
        convert(ann)


def test_conversion_is_weight_preserving_for_first_step():
    ann = _net()
    x = Rng(3).uniform((4, 3), -1, 1)
    z_ann = ann_forward(ann, x.astype(np.float32))[2][0]
    snn = convert(ann, Mode.IF, "zero")
    rec = simulate(snn, x.astype(np.float32), 1, record_potentials=True)
    np.testing.assert_allclose(rec.potentials[0][0] + rec.spikes[0][0] * snn.hidden[0].theta, z_ann, rtol=1e-6)


@pytest.mark.parametrize("a, expected", [(1.0, 1.0), (0.45, 0.4), (1.3, 1.0), (-0.2, 0.0)])
def test_predicted_rate_examples(a, expected):
    assert predicted_rate(a, 1.0, 1.0, 5) == expected


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 10), st.integers(1, 16), st.floats(0.1, 4), st.integers(1, 4))
def test_qcfs_outputs_never_engage_upper_clamp(z, L, lam, mult):
    a = qcfs_forward(np.array([z]), QcfsParams(lam, L))[0]
    T = L * mult
    k = np.floor(a * T / lam)
    assert 0 <= k <= T
    assert predicted_rate(a, lam, lam, T) == (lam if k == T else lam * k / T)


def _single_neuron_net(theta, mode=Mode.IF):
    layer = SnnLayer(np.array([[1.0]]), np.zeros(1), NeuronLayerState.fresh((1,), theta, mode=mode))
    return SnnNetwork([layer, SnnLayer(np.ones((1, 1)), np.zeros(1), None)], V0Policy("half_theta"))


@settings(max_examples=300, deadline=None)
@given(st.floats(-0.5, 1.5), st.floats(0.1, 5), st.integers(1, 64))
def test_single_layer_equivalence_property(z_frac, theta, T):
    z = z_frac * theta
    q = (T * z + theta / 2) / theta
    # on an exact quantizer edge the stepwise and closed-form roundings may split
    assume(abs(q - round(q)) > 1e-9)
    rec = simulate(_single_neuron_net(theta), np.array([z]), T)
    assert rec.phi[0][0, 0] == equivalent_rate(z, theta, T, theta / 2)


def test_end_to_end_first_layer_exact():
    ann = init_network([2, 6, 6, 2], 4, Rng(1))
    x = Rng(2).uniform((50, 2), -2, 2).astype(np.float32)
    _, acts, _ = ann_forward(ann, x)
    for mode in ("IF", "DTN"):
        rec = simulate(convert(ann, mode), x, 4)
        np.testing.assert_array_equal(rec.phi[0], acts[0].astype(np.float64))


def test_snn_checkpoint_round_trip():
    for policy in (V0Policy("half_theta"), V0Policy("zero"), V0Policy("explicit", 0.125)):
        snn = convert(_net((1.5, 0.75)), Mode.IF, policy, theta_neg=-0.01)
        back = import_snn(export_snn(snn))
        assert back.v0_policy == policy and back.mode is Mode.IF
        assert [layer.theta for layer in back.hidden] == [1.5, 0.75]
        assert back.hidden[0].template.theta_neg == -0.01
        for la, lb in zip(snn.layers, back.layers):
            assert la.weights.tobytes() == lb.weights.tobytes()


def test_snn_checkpoint_kind_checks():
    ann = _net()
    with pytest.raises(CheckpointError):
        import_snn(export_checkpoint(ann))
    with pytest.raises(CheckpointError):
        import_checkpoint(export_snn(convert(ann)))
    with pytest.raises(CheckpointError):
        import_snn(export_snn(convert(ann))[:-4])
