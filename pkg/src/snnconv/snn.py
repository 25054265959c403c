"""Clocked simulation of integrate-and-fire and dual-threshold spiking layers."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .tensor import ANALYSIS_DTYPE, DimensionError, level_value, matmul

THETA_NEG = -1e-3
_EPS = np.finfo(ANALYSIS_DTYPE).eps


class Mode(str, enum.Enum):
    IF = "IF"
    DTN = "DTN"


class ConservationError(AssertionError):
    """Membrane charge bookkeeping failed (a simulator bug, never expected)."""


@dataclass(frozen=True)
class V0Policy:
    """Initial membrane potential rule: ``zero``, ``half_theta`` or ``explicit``."""

    kind: str = "half_theta"
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "half_theta", "explicit"):
            raise ValueError(f"unknown v0 policy {self.kind!r}")
        if self.kind == "explicit" and self.value is None:
            raise ValueError("explicit v0 policy needs a value")

    @classmethod
    def parse(cls, spec) -> "V0Policy":
        if isinstance(spec, V0Policy):
            return spec
        if isinstance(spec, (int, float)):
            return cls("explicit", float(spec))
        if spec in ("zero", "half_theta"):
            return cls(spec)
        try:
            return cls("explicit", float(spec))
        except (TypeError, ValueError):
            raise ValueError(f"unknown v0 policy {spec!r}") from None

    def initial(self, theta: float) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "half_theta":
            return theta / 2
        return float(self.value)

    def __str__(self):
        return self.kind if self.kind != "explicit" else repr(self.value)


@dataclass
class NeuronLayerState:
    v: np.ndarray
    theta: float
    theta_neg: float = THETA_NEG
    mode: Mode = Mode.IF
    net_spikes: np.ndarray | None = None

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if not self.theta_neg < 0:
            raise ValueError(f"theta_neg must be negative, got {self.theta_neg}")
        self.mode = Mode(self.mode)
        self.v = np.array(self.v, dtype=ANALYSIS_DTYPE)
        if self.net_spikes is None:
            self.net_spikes = np.zeros(self.v.shape, dtype=np.int64)

    @classmethod
    def fresh(cls, shape, theta, v0=0.0, mode=Mode.IF, theta_neg=THETA_NEG):
        return cls(np.full(shape, v0, dtype=ANALYSIS_DTYPE), theta, theta_neg, Mode(mode))

    def copy(self) -> "NeuronLayerState":
        return replace(self, v=self.v.copy(), net_spikes=self.net_spikes.copy())


def step(state: NeuronLayerState, input_current):
    """Advance one time step in place; returns spikes in {-1, 0, 1} as int8.

    Charge ``m = v + input``.  A positive spike fires when ``m >= theta``
    (soft reset by ``theta``).  In DTN mode, otherwise, a negative spike fires
    when ``m <= theta_neg`` and the neuron has a net positive spike to cancel;
    it restores ``theta`` to the membrane.
    """
    input_current = np.asarray(input_current, dtype=ANALYSIS_DTYPE)
    if input_current.shape != state.v.shape:
        raise DimensionError(f"input {input_current.shape} != state {state.v.shape}")
    m = state.v + input_current
    pos = m >= state.theta
    if state.mode is Mode.DTN:
        neg = ~pos & (m <= state.theta_neg) & (state.net_spikes >= 1)
    else:
        neg = np.zeros_like(pos)
    spikes = pos.astype(np.int8) - neg.astype(np.int8)
    state.v = m - spikes * state.theta
    state.net_spikes += spikes
    return spikes


@dataclass
class SnnLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    template: NeuronLayerState | None  # None for the non-spiking output integrator

    @property
    def theta(self) -> float | None:
        return None if self.template is None else self.template.theta


@dataclass
class SnnNetwork:
    layers: list[SnnLayer]  # spiking hidden layers followed by the output integrator
    v0_policy: V0Policy = field(default_factory=V0Policy)

    def __post_init__(self):
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.weights.shape[0] != nxt.weights.shape[1]:
                raise DimensionError(
                    f"layer output {prev.weights.shape} does not feed {nxt.weights.shape}"
                )
        if self.layers[-1].template is not None:
            raise ValueError("last layer must be the non-spiking output integrator")

    @property
    def hidden(self) -> list[SnnLayer]:
        return self.layers[:-1]

    @property
    def mode(self) -> Mode:
        return self.hidden[0].template.mode if self.hidden else Mode.IF


@dataclass
class SimRecord:
    """Result of a simulation.

    ``spikes[l]`` has shape (T, batch, units); ``phi[l]`` is the average
    postsynaptic potential ``theta * sum_t s(t) / T``.  The final entry of
    ``phi`` is the output layer's mean input current, used for classification.
    """

    T: int
    spikes: list[np.ndarray]
    phi: list[np.ndarray]
    thetas: list[float]
    potentials: list[np.ndarray] | None = None

    def predictions(self):
        return np.argmax(self.phi[-1], axis=1)

    def spike_counts(self):
        return [np.abs(s).sum(axis=0) for s in self.spikes]

    def to_json(self, include_potentials=True) -> dict:
        out = {
            "T": self.T,
            "thetas": list(self.thetas),
            "layers": [
                {
                    "positive_spikes": int((s == 1).sum()),
                    "negative_spikes": int((s == -1).sum()),
                    "phi": p.tolist(),
                }
                for s, p in zip(self.spikes, self.phi)
            ],
            "output_phi": self.phi[-1].tolist(),
        }
        if include_potentials and self.potentials is not None:
            out["potentials"] = [p.tolist() for p in self.potentials]
        return out


class _ChargeLedger:
    """Tracks the soft-reset conservation law v(T) - v(0) = sum(input) - theta*(net spikes).

    Equality holds exactly in real arithmetic; in float64 each step rounds
    twice, so the check allows the accumulated rounding bound and nothing more.
    """

    def __init__(self, v0):
        self.v0 = v0.copy()
        self.total_in = np.zeros_like(v0)
        self.magnitude = np.abs(v0)
        self.steps = 0

    def add(self, current, v_after):
        self.total_in += current
        self.magnitude += np.abs(current) + np.abs(v_after) + np.abs(self.total_in)
        self.steps += 1

    def check(self, state: NeuronLayerState, where: str):
        lhs = state.v - self.v0
        rhs = self.total_in - state.theta * state.net_spikes
        bound = 4 * (self.steps + 2) * _EPS * (self.magnitude + state.theta * np.abs(state.net_spikes))
        bad = np.abs(lhs - rhs) > bound
        if np.any(bad):
            i = tuple(np.argwhere(bad)[0])
            raise ConservationError(
                f"{where}: charge not conserved at neuron {i}: "
                f"v(T)-v(0)={lhs[i]!r}, sum(input)-theta*N={rhs[i]!r}"
            )
        if np.any(state.net_spikes < 0):
            raise ConservationError(f"{where}: negative net spike count")


def _as_batch(x):
    x = np.asarray(x, dtype=ANALYSIS_DTYPE)
    return x[None, :] if x.ndim == 1 else x


def simulate(net: SnnNetwork, x, T: int, record_potentials=False) -> SimRecord:
    """Run the network for ``T`` steps with ``x`` injected as a constant current."""
    if int(T) != T or T < 1:
        raise ValueError(f"T must be a positive integer, got {T}")
    T = int(T)
    x = _as_batch(x)
    first = net.layers[0]
    if x.shape[1] != first.weights.shape[1]:
        raise DimensionError(f"input width {x.shape[1]} != first layer input {first.weights.shape[1]}")
    n = x.shape[0]
    weights = [np.asarray(layer.weights, dtype=ANALYSIS_DTYPE).T for layer in net.layers]
    biases = [np.asarray(layer.bias, dtype=ANALYSIS_DTYPE) for layer in net.layers]

    states, ledgers = [], []
    for layer in net.hidden:
        tpl = layer.template
        v0 = net.v0_policy.initial(tpl.theta)
        st = NeuronLayerState.fresh((n, layer.weights.shape[0]), tpl.theta, v0, tpl.mode, tpl.theta_neg)
        states.append(st)
        ledgers.append(_ChargeLedger(st.v))

    spikes = [np.zeros((T, n, st.v.shape[1]), dtype=np.int8) for st in states]
    potentials = (
        [np.zeros((T, n, st.v.shape[1]), dtype=ANALYSIS_DTYPE) for st in states] if record_potentials else None
    )
    out_sum = np.zeros((n, net.layers[-1].weights.shape[0]), dtype=ANALYSIS_DTYPE)
    first_current = matmul(x, weights[0]) + biases[0]

    for t in range(T):
        current = first_current
        for li, st in enumerate(states):
            s = step(st, current)
            ledgers[li].add(current, st.v)
            spikes[li][t] = s
            if potentials is not None:
                potentials[li][t] = st.v
            current = matmul(s * st.theta, weights[li + 1]) + biases[li + 1]
        if not states:
            current = first_current
        out_sum += current

    for li, st in enumerate(states):
        ledgers[li].check(st, f"layer {li}")

    thetas = [st.theta for st in states]
    phi = [level_value(st.theta, s.sum(axis=0, dtype=np.int64), T) for st, s in zip(states, spikes)]
    phi.append(out_sum / T)
    return SimRecord(T, spikes, phi, thetas, potentials)


def run_layer_with_trains(weights, bias, state_template: NeuronLayerState, presyn_spike_trains, T: int,
                          presyn_theta: float = 1.0, record_potentials=False) -> SimRecord:
    """Drive one spiking layer with explicit presynaptic spike trains.

    ``presyn_spike_trains`` has shape (T, n_in) or (T, batch, n_in) with
    entries in {-1, 0, 1}; each spike delivers ``presyn_theta`` through the
    weights.  The template's ``v`` (scalar or per-neuron) sets v(0); a batch
    dimension runs independent copies side by side.
    """
    trains = np.asarray(presyn_spike_trains)
    if trains.shape[0] != T:
        raise ValueError(f"spike trains have {trains.shape[0]} steps, expected T={T}")
    if trains.ndim == 2:
        trains = trains[:, None, :]
    w = np.atleast_2d(np.asarray(weights, dtype=ANALYSIS_DTYPE))
    b = np.zeros(w.shape[0]) if bias is None else np.asarray(bias, dtype=ANALYSIS_DTYPE)
    if trains.shape[2] != w.shape[1]:
        raise DimensionError(f"trains carry {trains.shape[2]} inputs, weights expect {w.shape[1]}")
    n = trains.shape[1]
    v0 = np.broadcast_to(state_template.v, (n, w.shape[0])).copy()
    st = replace(state_template.copy(), v=v0, net_spikes=np.zeros(v0.shape, dtype=np.int64))
    ledger = _ChargeLedger(st.v)
    spikes = np.zeros((T, n, w.shape[0]), dtype=np.int8)
    pots = np.zeros((T, n, w.shape[0])) if record_potentials else None
    for t in range(T):
        current = matmul(trains[t] * presyn_theta, w.T) + b
        spikes[t] = step(st, current)
        ledger.add(current, st.v)
        if pots is not None:
            pots[t] = st.v
    ledger.check(st, "layer")
    phi = level_value(st.theta, spikes.sum(axis=0, dtype=np.int64), T)
    return SimRecord(T, [spikes], [phi], [st.theta], None if pots is None else [pots])


def run_neuron(charges, theta=1.0, v0=0.0, mode=Mode.IF, theta_neg=THETA_NEG):
    """Single neuron fed an explicit per-step charge sequence; returns (spikes, rate, potentials)."""
    st = NeuronLayerState.fresh((1,), theta, v0, mode, theta_neg)
    ledger = _ChargeLedger(st.v)
    spikes, pots = [], []
    for c in charges:
        cur = np.array([c], dtype=ANALYSIS_DTYPE)
        spikes.append(int(step(st, cur)[0]))
        ledger.add(cur, st.v)
        pots.append(float(st.v[0]))
    ledger.check(st, "neuron")
    rate = float(level_value(theta, sum(spikes), len(spikes)))
    return spikes, rate, pots
