"""Neural building blocks on top of the autodiff tape.

Shape conventions follow the row-vector style: input maps are stored as
(d_in, d_out) and applied as ``x @ W``, except the convolution weight which
is stored as (d_out, w * d_in) and applied as ``W @ c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

WEIGHT_INIT_LOW = -0.08
WEIGHT_INIT_HIGH = 0.08


def _weight(rng: np.random.Generator, shape) -> Tensor:
    return ad.parameter(rng.uniform(WEIGHT_INIT_LOW, WEIGHT_INIT_HIGH, size=shape))


def _bias(shape) -> Tensor:
    return ad.parameter(np.zeros(shape))


@dataclass
class GruParams:
    """Update gate, reset gate, and candidate-state parameters.

    w_* are input maps (d_in, d_h), u_* recurrent maps (d_h, d_h),
    b_* biases (d_h,).
    """

    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_h: Tensor
    u_h: Tensor
    b_h: Tensor

    def __post_init__(self):
        d_in, d_h = self.w_z.shape
        for name in ("w_z", "w_r", "w_h"):
            if getattr(self, name).shape != (d_in, d_h):
                raise ValueError(f"{name} must have shape ({d_in}, {d_h})")
        for name in ("u_z", "u_r", "u_h"):
            if getattr(self, name).shape != (d_h, d_h):
                raise ValueError(f"{name} must have shape ({d_h}, {d_h})")
        for name in ("b_z", "b_r", "b_h"):
            if getattr(self, name).shape != (d_h,):
                raise ValueError(f"{name} must have shape ({d_h},)")

    @property
    def input_dim(self) -> int:
        return self.w_z.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w_z.shape[1]

    def tensors(self) -> list[Tensor]:
        return [
            self.w_z, self.u_z, self.b_z,
            self.w_r, self.u_r, self.b_r,
            self.w_h, self.u_h, self.b_h,
        ]

    @classmethod
    def init(cls, d_in: int, d_h: int, rng: np.random.Generator) -> "GruParams":
        return cls(
            w_z=_weight(rng, (d_in, d_h)), u_z=_weight(rng, (d_h, d_h)), b_z=_bias(d_h),
            w_r=_weight(rng, (d_in, d_h)), u_r=_weight(rng, (d_h, d_h)), b_r=_bias(d_h),
            w_h=_weight(rng, (d_in, d_h)), u_h=_weight(rng, (d_h, d_h)), b_h=_bias(d_h),
        )


def gru_step(x: Tensor, h_prev: Tensor, params: GruParams) -> Tensor:
    """One gated recurrence step.

    z = sigmoid(x W_z + h U_z + b_z)
    r = sigmoid(x W_r + h U_r + b_r)
    h~ = tanh(x W_h + r * (h U_h) + b_h)
    h' = (1 - z) * h + z * h~
    """
    z = ad.sigmoid(ad.add(ad.add(ad.vecmat(x, params.w_z), ad.vecmat(h_prev, params.u_z)), params.b_z))
    r = ad.sigmoid(ad.add(ad.add(ad.vecmat(x, params.w_r), ad.vecmat(h_prev, params.u_r)), params.b_r))
    candidate = ad.tanh(
        ad.add(
            ad.add(ad.vecmat(x, params.w_h), ad.mul(r, ad.vecmat(h_prev, params.u_h))),
            params.b_h,
        )
    )
    return ad.add(ad.mul(ad.one_minus(z), h_prev), ad.mul(z, candidate))


def gru_run(
    inputs: Sequence[Tensor], params: GruParams, h0: Tensor | None = None
) -> list[Tensor]:
    """Unroll the recurrence left-to-right; returns all hidden states."""
    if not inputs:
        raise ValueError("gru_run requires at least one input")
    h = h0 if h0 is not None else ad.constant(np.zeros(params.hidden_dim))
    states = []
    for x in inputs:
        h = gru_step(x, h, params)
        states.append(h)
    return states


@dataclass
class AttentionParams:
    """Projection (d_h, d_a), bias (d_a,), and learned context vector (d_a,)."""

    w_w: Tensor
    b_w: Tensor
    u_w: Tensor

    def __post_init__(self):
        d_h, d_a = self.w_w.shape
        if self.b_w.shape != (d_a,):
            raise ValueError(f"b_w must have shape ({d_a},)")
        if self.u_w.shape != (d_a,):
            raise ValueError(
                f"context vector must match projection output dim ({d_a},)"
            )

    def tensors(self) -> list[Tensor]:
        return [self.w_w, self.b_w, self.u_w]

    @classmethod
    def init(cls, d_h: int, d_a: int, rng: np.random.Generator) -> "AttentionParams":
        return cls(
            w_w=_weight(rng, (d_h, d_a)),
            b_w=_bias(d_a),
            u_w=_weight(rng, (d_a,)),
        )


def attention(h_seq: Tensor, params: AttentionParams) -> tuple[Tensor, Tensor]:
    """Importance-weighted pooling of hidden states.

    For the (n, d_h) state matrix: u_i = tanh(h_i W_w + b_w), scores
    s_i = u_i . u_w, alpha = softmax(s), v = sum_i alpha_i h_i. Returns
    (alpha, v); alpha sums to 1 up to rounding.
    """
    if h_seq.value.ndim != 2 or h_seq.value.shape[0] < 1:
        raise ValueError("attention expects a non-empty (n, d_h) state matrix")
    projected = ad.tanh(ad.add_rowvec(ad.matmul(h_seq, params.w_w), params.b_w))
    scores = ad.matvec(projected, params.u_w)
    alpha = ad.softmax(scores)
    v = ad.vecmat(alpha, h_seq)
    return alpha, v


@dataclass
class ConvParams:
    """Sliding-window convolution weight (d_out, width * d_in) and bias."""

    w: Tensor
    b: Tensor
    width: int

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("filter width must be >= 1")
        d_out = self.w.shape[0]
        if self.w.shape[1] % self.width != 0:
            raise ValueError("weight columns must be width * d_in")
        if self.b.shape != (d_out,):
            raise ValueError(f"bias must have shape ({d_out},)")

    @property
    def input_dim(self) -> int:
        return self.w.shape[1] // self.width

    @property
    def output_dim(self) -> int:
        return self.w.shape[0]

    def tensors(self) -> list[Tensor]:
        return [self.w, self.b]

    @classmethod
    def init(
        cls, d_in: int, d_out: int, width: int, rng: np.random.Generator
    ) -> "ConvParams":
        return cls(w=_weight(rng, (d_out, width * d_in)), b=_bias(d_out), width=width)


def conv_wgram(inputs: Sequence[Tensor], params: ConvParams) -> Tensor:
    """Valid (no-padding) w-gram convolution with ReLU.

    Window i concatenates inputs[i .. i+w-1] and maps it through
    ReLU(W c + b); the result stacks to ((n - w + 1), d_out).
    """
    n = len(inputs)
    if n < params.width:
        raise ValueError(
            f"sequence length {n} shorter than filter width {params.width}"
        )
    rows = []
    for i in range(n - params.width + 1):
        window = ad.concat(list(inputs[i : i + params.width]))
        rows.append(ad.relu(ad.add(ad.matvec(params.w, window), params.b)))
    return ad.stack_rows(rows)


def max_pool(p_seq: Tensor) -> Tensor:
    """Coordinate-wise max over the sequence axis (first argmax gets the grad)."""
    return ad.max_over_rows(p_seq)


def softmax_xent(logits: Tensor, label: int) -> tuple[np.ndarray, Tensor]:
    """Class probabilities and cross-entropy loss -ln p[label].

    The probabilities are returned as a plain array; the loss is the
    differentiable scalar.
    """
    log_p = ad.log_prob_of(logits, label)
    probs = ad.softmax_probs(logits.value)
    return probs, ad.scale(log_p, -1.0)
