"""
Deterministic dense-tensor kernels.

All tensors are float64 numpy arrays in row-major order. Feature maps are
laid out (C, H, W); token matrices are (N, D). Every kernel is a pure
function: inputs are never modified and a new array is returned.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from src.core.exceptions import ArgumentError

Tensor = npt.NDArray[np.float64]


def as_tensor(data: npt.ArrayLike, name: str = "tensor") -> Tensor:
    """
    Convert array-like data into a validated float64 tensor.

    Args:
        data: Nested sequence or array
        name: Argument name used in error messages

    Returns:
        C-contiguous float64 array

    Raises:
        ArgumentError: If the data contains NaN or Inf values
    """
    array = np.ascontiguousarray(data, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise ArgumentError(f"{name} contains non-finite values", argument=name)
    return array


def _check_map(x: Tensor, name: str = "x") -> None:
    if x.ndim != 3:
        raise ArgumentError(
            f"{name} must be a (C, H, W) feature map", argument=name, expected=3, received=x.ndim
        )


@dataclass(frozen=True)
class ConvParams:
    """Convolution weights: kernel (out_ch, in_ch, k, k) and per-output bias."""

    kernel: Tensor
    bias: Tensor
    stride: int = 1
    padding: int = 0

    def __post_init__(self) -> None:
        kernel = as_tensor(self.kernel, "kernel")
        bias = as_tensor(self.bias, "bias")
        if kernel.ndim != 4 or kernel.shape[2] != kernel.shape[3]:
            raise ArgumentError("kernel must have shape (out_ch, in_ch, k, k)", argument="kernel")
        if kernel.shape[0] < 1 or kernel.shape[1] < 1:
            raise ArgumentError("kernel needs at least one input and output channel")
        if bias.shape != (kernel.shape[0],):
            raise ArgumentError(
                "bias must have one entry per output channel",
                argument="bias",
                expected=(kernel.shape[0],),
                received=bias.shape,
            )
        if self.stride < 1:
            raise ArgumentError("stride must be positive", argument="stride", received=self.stride)
        if self.padding < 0:
            raise ArgumentError("padding must be non-negative", argument="padding")
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "bias", bias)

    @property
    def in_channels(self) -> int:
        return int(self.kernel.shape[1])

    @property
    def out_channels(self) -> int:
        return int(self.kernel.shape[0])

    @property
    def kernel_size(self) -> int:
        return int(self.kernel.shape[2])

    @classmethod
    def same(cls, kernel: npt.ArrayLike, bias: npt.ArrayLike) -> "ConvParams":
        """Stride-1 convolution padded so that the spatial size is preserved (odd k)."""
        k = np.shape(kernel)[-1]
        if k % 2 == 0:
            raise ArgumentError("'same' convolution needs an odd kernel size", received=k)
        return cls(kernel=np.asarray(kernel), bias=np.asarray(bias), stride=1, padding=k // 2)

    @classmethod
    def identity(cls, channels: int) -> "ConvParams":
        kernel = np.eye(channels).reshape(channels, channels, 1, 1)
        return cls(kernel=kernel, bias=np.zeros(channels))

    @classmethod
    def zeros(cls, out_ch: int, in_ch: int, k: int) -> "ConvParams":
        return cls.same(np.zeros((out_ch, in_ch, k, k)), np.zeros(out_ch))

    @classmethod
    def random(
        cls, out_ch: int, in_ch: int, k: int, rng: np.random.Generator, scale: float = 1.0
    ) -> "ConvParams":
        std = scale / np.sqrt(in_ch * k * k)
        return cls.same(rng.normal(0.0, std, (out_ch, in_ch, k, k)), np.zeros(out_ch))


@dataclass(frozen=True)
class BatchNormParams:
    """Inference-mode batch normalization statistics and affine terms."""

    gamma: Tensor
    beta: Tensor
    running_mean: Tensor
    running_var: Tensor
    epsilon: float = 1e-5

    def __post_init__(self) -> None:
        fields = {}
        for name in ("gamma", "beta", "running_mean", "running_var"):
            fields[name] = as_tensor(getattr(self, name), name)
            if fields[name].ndim != 1:
                raise ArgumentError(f"{name} must be a per-channel vector", argument=name)
        shapes = {value.shape for value in fields.values()}
        if len(shapes) != 1:
            raise ArgumentError("batch norm vectors must share one length", received=shapes)
        if np.any(fields["running_var"] < 0):
            raise ArgumentError("running_var must be non-negative", argument="running_var")
        if not self.epsilon > 0:
            raise ArgumentError("epsilon must be positive", argument="epsilon")
        for name, value in fields.items():
            object.__setattr__(self, name, value)

    @property
    def channels(self) -> int:
        return int(self.gamma.shape[0])

    @classmethod
    def unit(cls, channels: int, epsilon: float = 1e-5) -> "BatchNormParams":
        """gamma=1, beta=0, mean=0, var=1."""
        return cls(
            gamma=np.ones(channels),
            beta=np.zeros(channels),
            running_mean=np.zeros(channels),
            running_var=np.ones(channels),
            epsilon=epsilon,
        )


@dataclass(frozen=True)
class LinearParams:
    """Dense layer y = W x + b with W of shape (out, in)."""

    weight: Tensor
    bias: Tensor

    def __post_init__(self) -> None:
        weight = as_tensor(self.weight, "weight")
        bias = as_tensor(self.bias, "bias")
        if weight.ndim != 2:
            raise ArgumentError("weight must be a matrix", argument="weight")
        if bias.shape != (weight.shape[0],):
            raise ArgumentError(
                "bias length must equal weight rows",
                argument="bias",
                expected=(weight.shape[0],),
                received=bias.shape,
            )
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)

    @property
    def in_features(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_features(self) -> int:
        return int(self.weight.shape[0])

    @classmethod
    def identity(cls, features: int) -> "LinearParams":
        return cls(weight=np.eye(features), bias=np.zeros(features))

    @classmethod
    def zeros(cls, out_features: int, in_features: int) -> "LinearParams":
        return cls(weight=np.zeros((out_features, in_features)), bias=np.zeros(out_features))

    @classmethod
    def random(
        cls, out_features: int, in_features: int, rng: np.random.Generator, scale: float = 1.0
    ) -> "LinearParams":
        std = scale / np.sqrt(in_features)
        return cls(
            weight=rng.normal(0.0, std, (out_features, in_features)),
            bias=np.zeros(out_features),
        )


# ============================================================================
# ELEMENTWISE
# ============================================================================


def _check_same_shape(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ArgumentError("shape mismatch", expected=a.shape, received=b.shape)


def add(a: npt.ArrayLike, b: npt.ArrayLike) -> Tensor:
    """Element-wise addition of equally shaped tensors."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b)
    return a + b


def mul(a: npt.ArrayLike, b: npt.ArrayLike) -> Tensor:
    """Element-wise multiplication of equally shaped tensors."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b)
    return a * b


def sigmoid(x: npt.ArrayLike) -> Tensor:
    return special.expit(np.asarray(x, dtype=np.float64))


def gelu(x: npt.ArrayLike) -> Tensor:
    """Exact GELU, x * Phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    return x * 0.5 * (1.0 + special.erf(x / np.sqrt(2.0)))


# ============================================================================
# REDUCTIONS AND LINEAR ALGEBRA
# ============================================================================


def softmax(x: npt.ArrayLike, axis: int = -1) -> Tensor:
    """
    Numerically stable softmax along one axis.

    Args:
        x: Input tensor
        axis: Axis to normalize over

    Returns:
        Tensor of the same shape whose slices along ``axis`` sum to one

    Raises:
        ArgumentError: If the axis does not exist
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or not -x.ndim <= axis < x.ndim:
        raise ArgumentError("invalid softmax axis", argument="axis", received=axis)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    exps = np.exp(shifted)
    return exps / np.sum(exps, axis=axis, keepdims=True)


def spatial_softmax(x: Tensor) -> Tensor:
    """Softmax over the spatial positions of each channel of a (C, H, W) map."""
    _check_map(x)
    c, h, w = x.shape
    return softmax(x.reshape(c, h * w), axis=1).reshape(c, h, w)


def matmul(a: npt.ArrayLike, b: npt.ArrayLike) -> Tensor:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ArgumentError("matmul needs (n, k) @ (k, m)", expected=a.shape, received=b.shape)
    return a @ b


def linear(x: npt.ArrayLike, params: LinearParams) -> Tensor:
    """
    Apply a dense layer to a vector or to each row of a matrix.

    Raises:
        ArgumentError: If the trailing dimension of x differs from the weight columns
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != params.in_features:
        raise ArgumentError(
            "linear input dimension mismatch",
            argument="x",
            expected=params.in_features,
            received=x.shape,
        )
    if x.ndim == 1:
        return params.weight @ x + params.bias
    return x @ params.weight.T + params.bias


def layer_norm(x: Tensor, epsilon: float = 1e-6) -> Tensor:
    """Normalize each row of a token matrix to zero mean and unit variance."""
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + epsilon)


def scaled_dot_product_attention(
    q: Tensor, k: Tensor, v: Tensor, scale: bool = True
) -> Tuple[Tensor, Tensor]:
    """
    Dense attention softmax(Q K^T / sqrt(d_k)) V.

    Args:
        q: Queries (n_q, d_k)
        k: Keys (n_k, d_k)
        v: Values (n_k, d_v)
        scale: Divide logits by sqrt(d_k)

    Returns:
        Tuple of (values (n_q, d_v), attention weights (n_q, n_k))
    """
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise ArgumentError("attention operands must be matrices")
    if q.shape[1] != k.shape[1] or k.shape[0] != v.shape[0]:
        raise ArgumentError(
            "attention operand shape mismatch", received=(q.shape, k.shape, v.shape)
        )
    logits = q @ k.T
    if scale:
        logits = logits / np.sqrt(q.shape[1])
    weights = softmax(logits, axis=-1)
    return weights @ v, weights


# ============================================================================
# CONVOLUTION, POOLING, NORMALIZATION
# ============================================================================


def conv2d(x: Tensor, params: ConvParams) -> Tensor:
    """
    2-D cross-correlation of a (C, H, W) map.

    Output spatial size is (H + 2 * padding - k) // stride + 1.

    Raises:
        ArgumentError: On channel mismatch or a non-positive output size
    """
    _check_map(x)
    if x.shape[0] != params.in_channels:
        raise ArgumentError(
            "conv2d channel mismatch",
            argument="x",
            expected=params.in_channels,
            received=x.shape[0],
        )
    k, s, p = params.kernel_size, params.stride, params.padding
    padded = np.pad(x, ((0, 0), (p, p), (p, p))) if p else x
    if padded.shape[1] < k or padded.shape[2] < k:
        raise ArgumentError("conv2d output size is not positive", expected=k, received=padded.shape)
    windows = sliding_window_view(padded, (k, k), axis=(1, 2))[:, ::s, ::s]
    # windows: (C, H', W', k, k); contract channel and kernel axes
    out = np.tensordot(windows, params.kernel, axes=([0, 3, 4], [1, 2, 3]))
    return np.ascontiguousarray(out.transpose(2, 0, 1)) + params.bias[:, None, None]


def avg_pool2d(x: Tensor, window: int, stride: int, padding: int = 0) -> Tensor:
    """
    Average pooling with a square window.

    Raises:
        ArgumentError: If the window does not fit in the (padded) input
    """
    _check_map(x)
    if window < 1 or stride < 1:
        raise ArgumentError("window and stride must be positive")
    padded = np.pad(x, ((0, 0), (padding, padding), (padding, padding))) if padding else x
    if padded.shape[1] < window or padded.shape[2] < window:
        raise ArgumentError(
            "pooling window larger than input", expected=window, received=padded.shape[1:]
        )
    windows = sliding_window_view(padded, (window, window), axis=(1, 2))[:, ::stride, ::stride]
    return windows.mean(axis=(3, 4))


def global_avg_pool(x: Tensor) -> Tensor:
    """Per-channel mean over all spatial positions."""
    _check_map(x)
    if x.size == 0:
        raise ArgumentError("global_avg_pool of an empty tensor", argument="x")
    return x.mean(axis=(1, 2))


def batch_norm_infer(x: Tensor, params: BatchNormParams) -> Tensor:
    """Batch normalization with stored running statistics only."""
    _check_map(x)
    if x.shape[0] != params.channels:
        raise ArgumentError(
            "batch norm channel mismatch", expected=params.channels, received=x.shape[0]
        )
    scale = params.gamma / np.sqrt(params.running_var + params.epsilon)
    shift = params.beta - params.running_mean * scale
    return x * scale[:, None, None] + shift[:, None, None]


def upsample_nearest(x: Tensor, height: int, width: int) -> Tensor:
    """Nearest-neighbour resize of a (C, h, w) map to (C, height, width)."""
    _check_map(x)
    _, h, w = x.shape
    rows = np.minimum((np.arange(height) * h) // height, h - 1)
    cols = np.minimum((np.arange(width) * w) // width, w - 1)
    return x[:, rows][:, :, cols]
