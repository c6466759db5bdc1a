"""LSTM cell and sequence with hand-derived backpropagation through time.

Gate layout: one weight matrix per gate, each of shape (H, F+H), acting
on the concatenation [x_t; h_{t-1}]. Forward follows the standard
sigmoid/tanh cell:

    i, f, o = sigmoid(W [x; h] + b)      g = tanh(W_g [x; h] + b_g)
    c_t = f * c_{t-1} + i * g            h_t = o * tanh(c_t)

Everything operates on batches: x is (N, F), states are (N, H).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch, StaleCacheError
from .activations import check_finite, sigmoid


@dataclass
class LstmParams:
    w_i: np.ndarray  # (H, F+H)
    w_f: np.ndarray
    w_o: np.ndarray
    w_g: np.ndarray
    b_i: np.ndarray  # (H,)
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.w_i.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_i.shape[1] - self.w_i.shape[0]

    def size(self) -> int:
        return sum(
            a.size
            for a in (self.w_i, self.w_f, self.w_o, self.w_g,
                      self.b_i, self.b_f, self.b_o, self.b_g)
        )

    def validate(self) -> None:
        h = self.hidden_size
        fin = self.w_i.shape[1]
        for name in ("w_i", "w_f", "w_o", "w_g"):
            if getattr(self, name).shape != (h, fin):
                raise ShapeMismatch(f"{name} shape inconsistent")
        for name in ("b_i", "b_f", "b_o", "b_g"):
            if getattr(self, name).shape != (h,):
                raise ShapeMismatch(f"{name} shape inconsistent")


@dataclass
class LstmState:
    h: np.ndarray  # (N, H)
    c: np.ndarray  # (N, H)


def zero_state(batch: int, hidden: int) -> LstmState:
    return LstmState(
        h=np.zeros((batch, hidden), dtype=np.float64),
        c=np.zeros((batch, hidden), dtype=np.float64),
    )


@dataclass
class LstmStepCache:
    z: np.ndarray        # (N, F+H) concatenated input
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray        # new cell state
    c_prev: np.ndarray


def lstm_cell_forward(
    x: np.ndarray, state: LstmState, params: LstmParams
) -> tuple[LstmState, LstmStepCache]:
    """One time step. x: (N, F). Returns the new state and a backward cache."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != params.input_size:
        raise ShapeMismatch(
            f"input width {x.shape[1]} != expected {params.input_size}"
        )
    if state.h.shape != (x.shape[0], params.hidden_size):
        raise ShapeMismatch("state shape does not match batch/hidden size")

    z = np.concatenate([x, state.h], axis=1)
    i = sigmoid(z @ params.w_i.T + params.b_i)
    f = sigmoid(z @ params.w_f.T + params.b_f)
    o = sigmoid(z @ params.w_o.T + params.b_o)
    g = np.tanh(z @ params.w_g.T + params.b_g)
    c = f * state.c + i * g
    h = o * np.tanh(c)
    check_finite(h, "lstm hidden state")
    cache = LstmStepCache(z=z, i=i, f=f, o=o, g=g, c=c, c_prev=state.c)
    return LstmState(h=h, c=c), cache


def lstm_cell_backward(
    cache: LstmStepCache, params: LstmParams, dh: np.ndarray, dc_in: np.ndarray
) -> tuple[dict[str, np.ndarray], np.ndarray, np.ndarray, np.ndarray]:
    """Backward through one step.

    dh: gradient wrt h_t (from the output and the next step combined),
    dc_in: gradient wrt c_t from the next step. Returns (param grads,
    dx, dh_prev, dc_prev).
    """
    tanh_c = np.tanh(cache.c)
    do = dh * tanh_c
    dc = dc_in + dh * cache.o * (1.0 - tanh_c * tanh_c)

    da_i = dc * cache.g * cache.i * (1.0 - cache.i)
    da_f = dc * cache.c_prev * cache.f * (1.0 - cache.f)
    da_o = do * cache.o * (1.0 - cache.o)
    da_g = dc * cache.i * (1.0 - cache.g * cache.g)

    grads = {
        "w_i": da_i.T @ cache.z,
        "w_f": da_f.T @ cache.z,
        "w_o": da_o.T @ cache.z,
        "w_g": da_g.T @ cache.z,
        "b_i": da_i.sum(axis=0),
        "b_f": da_f.sum(axis=0),
        "b_o": da_o.sum(axis=0),
        "b_g": da_g.sum(axis=0),
    }
    dz = da_i @ params.w_i + da_f @ params.w_f + da_o @ params.w_o + da_g @ params.w_g
    n_in = params.input_size
    dx = dz[:, :n_in]
    dh_prev = dz[:, n_in:]
    dc_prev = dc * cache.f
    return grads, dx, dh_prev, dc_prev


@dataclass
class LstmSequenceCache:
    steps: list[LstmStepCache]
    input_shape: tuple[int, int, int]  # (N, T, F)
    return_sequences: bool
    consumed: bool = field(default=False)


def lstm_sequence(
    seq: np.ndarray, params: LstmParams, return_sequences: bool = False
) -> tuple[np.ndarray, LstmSequenceCache]:
    """Run the cell over seq (N, T, F) from a zero initial state.

    Returns (N, T, H) when return_sequences is set, else (N, H) for the
    final step only.
    """
    params.validate()
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim == 2:  # (T, F) single sample
        seq = seq[np.newaxis]
    if seq.ndim != 3:
        raise ShapeMismatch(f"sequence must be (N, T, F), got {seq.shape}")
    n, t_len, _ = seq.shape
    if t_len < 1:
        raise ShapeMismatch("sequence length must be >= 1")

    state = zero_state(n, params.hidden_size)
    steps: list[LstmStepCache] = []
    outputs = np.empty((n, t_len, params.hidden_size), dtype=np.float64)
    for t in range(t_len):
        state, cache = lstm_cell_forward(seq[:, t, :], state, params)
        outputs[:, t, :] = state.h
        steps.append(cache)

    seq_cache = LstmSequenceCache(
        steps=steps, input_shape=seq.shape, return_sequences=return_sequences
    )
    if return_sequences:
        return outputs, seq_cache
    return outputs[:, -1, :], seq_cache


def lstm_backward(
    cache: LstmSequenceCache, params: LstmParams, grad_out: np.ndarray
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Exact BPTT gradients for a completed lstm_sequence pass.

    grad_out is (N, T, H) when the forward returned sequences, else
    (N, H) against the last hidden state. Returns (param grads keyed
    like LstmParams fields, input grads of shape (N, T, F)).
    """
    if cache.consumed:
        raise StaleCacheError("lstm cache already consumed by a backward pass")
    cache.consumed = True

    n, t_len, n_in = cache.input_shape
    h = params.hidden_size
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if cache.return_sequences:
        if grad_out.shape != (n, t_len, h):
            raise ShapeMismatch("upstream gradient shape mismatch (sequences)")
    else:
        if grad_out.shape != (n, h):
            raise ShapeMismatch("upstream gradient shape mismatch (last state)")

    totals = {k: np.zeros_like(getattr(params, k))
              for k in ("w_i", "w_f", "w_o", "w_g", "b_i", "b_f", "b_o", "b_g")}
    dx_all = np.zeros((n, t_len, n_in), dtype=np.float64)
    dh_next = np.zeros((n, h), dtype=np.float64)
    dc_next = np.zeros((n, h), dtype=np.float64)

    for t in range(t_len - 1, -1, -1):
        dh = dh_next.copy()
        if cache.return_sequences:
            dh += grad_out[:, t, :]
        elif t == t_len - 1:
            dh += grad_out
        step_grads, dx, dh_next, dc_next = lstm_cell_backward(
            cache.steps[t], params, dh, dc_next
        )
        for k, v in step_grads.items():
            totals[k] += v
        dx_all[:, t, :] = dx

    return totals, dx_all
