"""1D convolution (cross-correlation, valid padding) and max pooling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InputTooShort, ShapeMismatch


@dataclass
class Conv1dParams:
    kernels: np.ndarray  # (K, C_in, k)
    biases: np.ndarray   # (K,)

    @property
    def n_filters(self) -> int:
        return self.kernels.shape[0]

    @property
    def kernel_width(self) -> int:
        return self.kernels.shape[2]

    def size(self) -> int:
        return self.kernels.size + self.biases.size


def conv1d_forward(x: np.ndarray, params: Conv1dParams) -> np.ndarray:
    """x: (N, L, C_in) -> (N, L-k+1, K). No kernel flip, stride 1."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:  # single sample (L, C_in)
        x = x[np.newaxis]
    k_filters, c_in, width = params.kernels.shape
    if x.shape[2] != c_in:
        raise ShapeMismatch(f"input channels {x.shape[2]} != kernel channels {c_in}")
    if x.shape[1] < width:
        raise InputTooShort(f"input length {x.shape[1]} < kernel width {width}")
    windows = sliding_window_view(x, width, axis=1)  # (N, W, C_in, k)
    return np.einsum("nwcj,ocj->nwo", windows, params.kernels) + params.biases


def conv1d_backward(
    x: np.ndarray, params: Conv1dParams, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (d_kernels, d_biases, d_input) for conv1d_forward."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[np.newaxis]
    grad_out = np.asarray(grad_out, dtype=np.float64)
    k_filters, c_in, width = params.kernels.shape
    n, length, _ = x.shape
    n_windows = length - width + 1
    if grad_out.shape != (n, n_windows, k_filters):
        raise ShapeMismatch("conv1d upstream gradient shape mismatch")

    windows = sliding_window_view(x, width, axis=1)  # (N, W, C_in, k)
    d_kernels = np.einsum("nwo,nwcj->ocj", grad_out, windows)
    d_biases = grad_out.sum(axis=(0, 1))
    d_input = np.zeros_like(x)
    for j in range(width):
        # grad_out at window w touches input position w + j
        d_input[:, j:j + n_windows, :] += np.einsum(
            "nwo,oc->nwc", grad_out, params.kernels[:, :, j]
        )
    return d_kernels, d_biases, d_input


def maxpool1d_forward(
    x: np.ndarray, pool: int
) -> tuple[np.ndarray, np.ndarray]:
    """x: (N, L, C) -> (N, floor(L/pool), C), plus argmax cache.

    pool = 1 is the identity. A trailing remainder shorter than the pool
    window is dropped.
    """
    x = np.asarray(x, dtype=np.float64)
    if pool < 1:
        raise ValueError("pool size must be >= 1")
    n, length, channels = x.shape
    n_windows = length // pool
    trimmed = x[:, : n_windows * pool, :].reshape(n, n_windows, pool, channels)
    # np.argmax picks the first index on ties
    argmax = trimmed.argmax(axis=2)
    out = trimmed.max(axis=2)
    return out, argmax


def maxpool1d_backward(
    x_shape: tuple[int, ...], pool: int, argmax: np.ndarray, grad_out: np.ndarray
) -> np.ndarray:
    """Route grad_out back to the argmax positions of each window."""
    n, length, channels = x_shape
    n_windows = length // pool
    d_input = np.zeros((n, length, channels), dtype=np.float64)
    n_idx, w_idx, c_idx = np.meshgrid(
        np.arange(n), np.arange(n_windows), np.arange(channels), indexing="ij"
    )
    positions = w_idx * pool + argmax
    d_input[n_idx, positions, c_idx] += grad_out
    return d_input
