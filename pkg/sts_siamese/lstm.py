"""
Standard LSTM (no peepholes) encoding a sequence into its final hidden state.

    i  = sigmoid(W_i x + U_i h + b_i)
    f  = sigmoid(W_f x + U_f h + b_f)
    o  = sigmoid(W_o x + U_o h + b_o)
    c~ = tanh(W_c x + U_c h + b_c)
    c' = f * c + i * c~
    h' = o * tanh(c')
"""
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from sts_siamese.errors import ShapeMismatchError
from sts_siamese.kernel import add, gaussian_init, hadamard, matvec, sigmoid_vec, tanh_vec


GATES = ("i", "f", "o", "c")


@dataclass
class LstmParameters:
    """Gate weights for input width m and hidden width H."""
    W_i: np.ndarray
    U_i: np.ndarray
    b_i: np.ndarray
    W_f: np.ndarray
    U_f: np.ndarray
    b_f: np.ndarray
    W_o: np.ndarray
    U_o: np.ndarray
    b_o: np.ndarray
    W_c: np.ndarray
    U_c: np.ndarray
    b_c: np.ndarray

    def __post_init__(self) -> None:
        hidden, width = self.W_i.shape
        for gate in GATES:
            W, U, b = self.gate(gate)
            if W.shape != (hidden, width) or U.shape != (hidden, hidden) or b.shape != (hidden,):
                raise ShapeMismatchError(
                    f"gate {gate}: shapes {W.shape}, {U.shape}, {b.shape} inconsistent with H={hidden}, m={width}"
                )
            for array in (W, U, b):
                if not np.all(np.isfinite(array)):
                    raise ValueError(f"gate {gate} contains non-finite values")

    @property
    def input_dim(self) -> int:
        return self.W_i.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W_i.shape[0]

    def gate(self, name: str):
        return getattr(self, f"W_{name}"), getattr(self, f"U_{name}"), getattr(self, f"b_{name}")

    def arrays(self) -> Dict[str, np.ndarray]:
        """Named arrays in checkpoint order (W, U, b per gate, gates i, f, o, c)."""
        out: Dict[str, np.ndarray] = {}
        for gate in GATES:
            for prefix in ("W", "U", "b"):
                out[f"{prefix}_{gate}"] = getattr(self, f"{prefix}_{gate}")
        return out

    @classmethod
    def initialize(cls, input_dim: int, hidden_dim: int, stddev: float, seed: int,
                   forget_bias: float = 2.5) -> 'LstmParameters':
        """Gaussian weights, zero biases except the forget gate."""
        arrays = {}
        for offset, gate in enumerate(GATES):
            arrays[f"W_{gate}"] = gaussian_init((hidden_dim, input_dim), stddev, seed + 2 * offset)
            arrays[f"U_{gate}"] = gaussian_init((hidden_dim, hidden_dim), stddev, seed + 2 * offset + 1)
            arrays[f"b_{gate}"] = np.zeros(hidden_dim)
        arrays["b_f"] = np.full(hidden_dim, float(forget_bias))
        return cls(**arrays)


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_dim: int) -> 'LstmState':
        return cls(h=np.zeros(hidden_dim), c=np.zeros(hidden_dim))


@dataclass
class LstmTrace:
    """Per-timestep activations kept for backpropagation through time."""
    inputs: np.ndarray  # (n, m)
    states: List[LstmState] = field(default_factory=list)  # states[0] is the initial state
    gates: List[Dict[str, np.ndarray]] = field(default_factory=list)

    @property
    def h_n(self) -> np.ndarray:
        return self.states[-1].h


def _check_x(params: LstmParameters, x: np.ndarray) -> None:
    if x.shape != (params.input_dim,):
        raise ShapeMismatchError(f"LSTM input of shape {x.shape}, expected ({params.input_dim},)")


def _gate_activations(params: LstmParameters, state: LstmState, x: np.ndarray) -> Dict[str, np.ndarray]:
    acts = {}
    for gate in GATES:
        W, U, b = params.gate(gate)
        pre = matvec(W, x) + matvec(U, state.h) + b
        acts[gate] = tanh_vec(pre) if gate == "c" else sigmoid_vec(pre)
    return acts


def step(params: LstmParameters, state: LstmState, x: np.ndarray) -> LstmState:
    """One LSTM update from `state` on input `x`."""
    _check_x(params, x)
    if state.h.shape != (params.hidden_dim,) or state.c.shape != (params.hidden_dim,):
        raise ShapeMismatchError(f"LSTM state shapes {state.h.shape}/{state.c.shape}, expected ({params.hidden_dim},)")
    acts = _gate_activations(params, state, x)
    c = add(hadamard(acts["f"], state.c), hadamard(acts["i"], acts["c"]))
    h = acts["o"] * tanh_vec(c)
    return LstmState(h=h, c=c)


def encode_forward(params: LstmParameters, sequence: np.ndarray) -> LstmTrace:
    """Run the LSTM over a (n, m) sequence from the zero state, keeping every activation."""
    sequence = np.asarray(sequence, dtype=np.float64)
    if sequence.ndim != 2 or sequence.shape[0] == 0:
        raise ShapeMismatchError("cannot encode an empty sequence")
    if sequence.shape[1] != params.input_dim:
        raise ShapeMismatchError(f"sequence width {sequence.shape[1]}, expected {params.input_dim}")

    trace = LstmTrace(inputs=sequence, states=[LstmState.zeros(params.hidden_dim)])
    for x in sequence:
        prev = trace.states[-1]
        acts = _gate_activations(params, prev, x)
        c = add(hadamard(acts["f"], prev.c), hadamard(acts["i"], acts["c"]))
        acts["tanh_c"] = tanh_vec(c)
        h = acts["o"] * acts["tanh_c"]
        trace.gates.append(acts)
        trace.states.append(LstmState(h=h, c=c))
    return trace


def encode(params: LstmParameters, sequence: np.ndarray) -> np.ndarray:
    """Final hidden state h_n of the sequence."""
    return encode_forward(params, sequence).h_n


def encode_backward(params: LstmParameters, trace: LstmTrace, d_h_n: np.ndarray):
    """
    Backpropagation through the whole sequence, no truncation.

    Args:
        params: Parameters used for the forward pass.
        trace: Output of encode_forward.
        d_h_n: Gradient of the loss with respect to the final hidden state.

    Returns:
        (gradients keyed like LstmParameters.arrays(), (n, m) input gradients)

    Raises:
        ValueError: If the trace carries no cached activations.
    """
    if not trace.gates or len(trace.states) != len(trace.gates) + 1:
        raise ValueError("encode_backward needs the activations cached by encode_forward")
    if d_h_n.shape != (params.hidden_dim,):
        raise ShapeMismatchError(f"upstream gradient {d_h_n.shape}, expected ({params.hidden_dim},)")

    grads = {name: np.zeros_like(array) for name, array in params.arrays().items()}
    d_inputs = np.zeros_like(trace.inputs)
    d_h = d_h_n.astype(np.float64).copy()
    d_c = np.zeros(params.hidden_dim)

    for t in range(len(trace.gates) - 1, -1, -1):
        acts = trace.gates[t]
        prev = trace.states[t]
        x = trace.inputs[t]

        d_o = d_h * acts["tanh_c"]
        d_c = d_c + d_h * acts["o"] * (1.0 - acts["tanh_c"] ** 2)
        d_pre = {
            "i": d_c * acts["c"] * acts["i"] * (1.0 - acts["i"]),
            "f": d_c * prev.c * acts["f"] * (1.0 - acts["f"]),
            "o": d_o * acts["o"] * (1.0 - acts["o"]),
            "c": d_c * acts["i"] * (1.0 - acts["c"] ** 2),
        }

        d_h = np.zeros(params.hidden_dim)
        for gate in GATES:
            W, U, _ = params.gate(gate)
            g = d_pre[gate]
            grads[f"W_{gate}"] += np.outer(g, x)
            grads[f"U_{gate}"] += np.outer(g, prev.h)
            grads[f"b_{gate}"] += g
            d_inputs[t] += W.T @ g
            d_h += U.T @ g
        d_c = d_c * acts["f"]

    return grads, d_inputs
