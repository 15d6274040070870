"""The two keyword-guided classifiers.

KA-RNN: GRU over token embeddings, attention pooling, softmax output. Its
training loss subtracts ``penalty * mask . alpha`` per document, so minimizing
it amplifies attention on keyword positions.

HDNN: a text branch (w-gram convolution + max-pool, or GRU final state)
fused by concatenation with a keyword branch (shared per-slot dense layer +
coordinate-wise max over slots), trained with plain cross-entropy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor
from .corpus import PAD_INDEX

VARIANT_KARNN = "karnn"
VARIANT_HDNN_C = "hdnn_c"
VARIANT_HDNN_R = "hdnn_r"
VARIANTS = (VARIANT_KARNN, VARIANT_HDNN_C, VARIANT_HDNN_R)

CHECKPOINT_FORMAT_VERSION = 1


def embedding_tensor(matrix: np.ndarray, trainable: bool = False) -> Tensor:
    """Wrap an embedding matrix as a graph leaf (copy when trainable)."""
    values = matrix.copy() if trainable else matrix
    return Tensor(values, requires_grad=trainable)


@dataclass
class KarnnParams:
    """All trainable tensors of the attention classifier plus the penalty."""

    gru: nn.GruParams
    attn: nn.AttentionParams
    w_out: Tensor
    b_out: Tensor
    penalty: float

    def __post_init__(self):
        if self.penalty < 0:
            raise ValueError("penalty coefficient must be >= 0")
        d_h = self.gru.hidden_dim
        if self.w_out.shape[0] != d_h:
            raise ValueError("output weight rows must match the hidden dim")

    @property
    def num_classes(self) -> int:
        return self.w_out.shape[1]

    def tensors(self) -> list[Tensor]:
        return [*self.gru.tensors(), *self.attn.tensors(), self.w_out, self.b_out]

    @classmethod
    def init(
        cls,
        input_dim: int,
        hidden_dim: int,
        attention_dim: int,
        num_classes: int,
        penalty: float,
        seed: int,
    ) -> "KarnnParams":
        rng = np.random.default_rng(seed)
        return cls(
            gru=nn.GruParams.init(input_dim, hidden_dim, rng),
            attn=nn.AttentionParams.init(hidden_dim, attention_dim, rng),
            w_out=nn._weight(rng, (hidden_dim, num_classes)),
            b_out=nn._bias(num_classes),
            penalty=penalty,
        )


def _karnn_graph(
    token_ids: np.ndarray, emb: Tensor, params: KarnnParams
) -> tuple[Tensor, Tensor]:
    """Build the per-document graph; returns (logits, alpha)."""
    if len(token_ids) == 0:
        raise ValueError("cannot run the classifier on an empty document")
    inputs = [ad.pick_row(emb, int(i)) for i in token_ids]
    states = nn.gru_run(inputs, params.gru)
    alpha, v = nn.attention(ad.stack_rows(states), params.attn)
    logits = ad.add(ad.vecmat(v, params.w_out), params.b_out)
    return logits, alpha


def karnn_forward(
    token_ids: np.ndarray, emb: Tensor, params: KarnnParams
) -> tuple[np.ndarray, np.ndarray]:
    """Class probabilities and attention weights for one document."""
    logits, alpha = _karnn_graph(token_ids, emb, params)
    return ad.softmax_probs(logits.value), alpha.value.copy()


def karnn_loss(
    batch: Sequence[tuple[np.ndarray, int, np.ndarray]],
    emb: Tensor,
    params: KarnnParams,
) -> Tensor:
    """Batch loss: sum_d -ln p[label_d] - penalty * sum_d mask_d . alpha_d.

    Masks must match document token counts exactly. With a large penalty the
    loss can go negative; that is expected, the regularizer is a reward.
    """
    if not batch:
        raise ValueError("empty batch")
    total: Tensor | None = None
    for token_ids, label, mask in batch:
        if len(mask) != len(token_ids):
            raise ValueError(
                f"mask length {len(mask)} != document length {len(token_ids)}"
            )
        logits, alpha = _karnn_graph(token_ids, emb, params)
        _, xent = nn.softmax_xent(logits, label)
        term = xent
        if params.penalty != 0.0 and np.any(mask):
            reward = ad.dot(ad.constant(np.asarray(mask, dtype=np.float64)), alpha)
            term = ad.sub(xent, ad.scale(reward, params.penalty))
        total = term if total is None else ad.add(total, term)
    return total


@dataclass
class HdnnParams:
    """Trainable tensors of the hybrid classifier.

    Exactly one of ``conv``/``gru`` is set, matching ``variant`` ("c"/"r").
    The keyword branch applies a shared (d, d) dense map per slot embedding;
    the two fusion maps produce half-width vectors whose concatenation feeds
    the output layer.
    """

    variant: str
    conv: nn.ConvParams | None
    gru: nn.GruParams | None
    w_fcn: Tensor
    b_fcn: Tensor
    w_ct: Tensor
    b_ct: Tensor
    w_ft: Tensor
    b_ft: Tensor
    w_out: Tensor
    b_out: Tensor
    slot_count: int

    def __post_init__(self):
        if self.variant not in ("c", "r"):
            raise ValueError("variant must be 'c' or 'r'")
        if (self.variant == "c") != (self.conv is not None):
            raise ValueError("conv params must be set exactly for variant 'c'")
        if (self.variant == "r") != (self.gru is not None):
            raise ValueError("gru params must be set exactly for variant 'r'")
        if self.slot_count < 1:
            raise ValueError("slot count must be >= 1")
        d = self.w_fcn.shape[0]
        if self.w_fcn.shape != (d, d):
            raise ValueError("keyword-branch weight must be square (d, d)")
        half = self.w_ct.shape[1]
        if self.w_ft.shape[1] != half:
            raise ValueError("fusion halves must have equal width")
        if self.w_out.shape[0] != 2 * half:
            raise ValueError("output layer must consume the concatenated fusion")

    @property
    def num_classes(self) -> int:
        return self.w_out.shape[1]

    @property
    def text_dim(self) -> int:
        return self.conv.output_dim if self.variant == "c" else self.gru.hidden_dim

    def tensors(self) -> list[Tensor]:
        branch = self.conv.tensors() if self.variant == "c" else self.gru.tensors()
        return [
            *branch,
            self.w_fcn, self.b_fcn,
            self.w_ct, self.b_ct,
            self.w_ft, self.b_ft,
            self.w_out, self.b_out,
        ]

    @classmethod
    def init(
        cls,
        variant: str,
        input_dim: int,
        num_classes: int,
        slot_count: int,
        hidden_dim: int = 128,
        filter_width: int = 3,
        conv_channels: int = 128,
        fusion_dim: int = 64,
        seed: int = 0,
    ) -> "HdnnParams":
        if fusion_dim % 2 != 0:
            raise ValueError("fusion_dim must be even")
        rng = np.random.default_rng(seed)
        conv = gru = None
        if variant == "c":
            conv = nn.ConvParams.init(input_dim, conv_channels, filter_width, rng)
            text_dim = conv_channels
        else:
            gru = nn.GruParams.init(input_dim, hidden_dim, rng)
            text_dim = hidden_dim
        half = fusion_dim // 2
        return cls(
            variant=variant,
            conv=conv,
            gru=gru,
            w_fcn=nn._weight(rng, (input_dim, input_dim)),
            b_fcn=nn._bias(input_dim),
            w_ct=nn._weight(rng, (text_dim, half)),
            b_ct=nn._bias(half),
            w_ft=nn._weight(rng, (input_dim, half)),
            b_ft=nn._bias(half),
            w_out=nn._weight(rng, (fusion_dim, num_classes)),
            b_out=nn._bias(num_classes),
            slot_count=slot_count,
        )


def _hdnn_graph(
    token_ids: np.ndarray,
    slot_ids: np.ndarray,
    emb: Tensor,
    params: HdnnParams,
) -> Tensor:
    """Build the per-document graph; returns logits."""
    if len(token_ids) == 0:
        raise ValueError("cannot run the classifier on an empty document")
    if len(slot_ids) != params.slot_count:
        raise ValueError(
            f"expected {params.slot_count} keyword slots, got {len(slot_ids)}"
        )
    inputs = [ad.pick_row(emb, int(i)) for i in token_ids]
    if params.variant == "c":
        h_text = nn.max_pool(nn.conv_wgram(inputs, params.conv))
    else:
        h_text = nn.gru_run(inputs, params.gru)[-1]
    slot_hidden = []
    for slot in slot_ids:
        x = ad.pick_row(emb, int(slot))
        slot_hidden.append(ad.relu(ad.add(ad.matvec(params.w_fcn, x), params.b_fcn)))
    h_keywords = nn.max_pool(ad.stack_rows(slot_hidden))
    h_ct = ad.add(ad.vecmat(h_text, params.w_ct), params.b_ct)
    h_ft = ad.add(ad.vecmat(h_keywords, params.w_ft), params.b_ft)
    fused = ad.concat([h_ct, h_ft])
    return ad.add(ad.vecmat(fused, params.w_out), params.b_out)


def hdnn_forward(
    token_ids: np.ndarray, slot_ids: np.ndarray, emb: Tensor, params: HdnnParams
) -> np.ndarray:
    """Class probabilities for one document."""
    logits = _hdnn_graph(token_ids, slot_ids, emb, params)
    return ad.softmax_probs(logits.value)


def hdnn_loss(
    batch: Sequence[tuple[np.ndarray, int, np.ndarray]],
    emb: Tensor,
    params: HdnnParams,
) -> Tensor:
    """Batch cross-entropy: sum_d -ln p[label_d]."""
    if not batch:
        raise ValueError("empty batch")
    total: Tensor | None = None
    for token_ids, label, slot_ids in batch:
        logits = _hdnn_graph(token_ids, slot_ids, emb, params)
        _, xent = nn.softmax_xent(logits, label)
        total = xent if total is None else ad.add(total, xent)
    return total


def predict_from_probs(probs: np.ndarray) -> int:
    """Argmax class; exact ties resolve to the lowest class index."""
    return int(np.argmax(probs))


def predict(
    params: KarnnParams | HdnnParams,
    token_ids: np.ndarray,
    emb: Tensor,
    slot_ids: np.ndarray | None = None,
) -> int:
    """Predicted class index for one encoded document."""
    if isinstance(params, KarnnParams):
        probs, _ = karnn_forward(token_ids, emb, params)
    else:
        if slot_ids is None:
            slot_ids = np.full(params.slot_count, PAD_INDEX, dtype=np.int64)
        probs = hdnn_forward(token_ids, slot_ids, emb, params)
    return predict_from_probs(probs)


def _named_tensors(params: KarnnParams | HdnnParams) -> dict[str, Tensor]:
    named: dict[str, Tensor] = {}
    if isinstance(params, KarnnParams):
        groups = {"gru": params.gru, "attn": params.attn}
    else:
        groups = {}
        if params.conv is not None:
            groups["conv"] = params.conv
        if params.gru is not None:
            groups["gru"] = params.gru
    for prefix, group in groups.items():
        for field_name in group.__dataclass_fields__:
            value = getattr(group, field_name)
            if isinstance(value, Tensor):
                named[f"{prefix}.{field_name}"] = value
    for field_name in params.__dataclass_fields__:
        value = getattr(params, field_name)
        if isinstance(value, Tensor):
            named[field_name] = value
    return named


def save_checkpoint(path, params: KarnnParams | HdnnParams, metadata: dict) -> None:
    """Write a versioned binary checkpoint (npz: arrays + JSON metadata).

    ``metadata`` should carry at least the keyword-set hash used at train
    time; model hyperparameters are recorded automatically.
    """
    named = _named_tensors(params)
    meta = dict(metadata)
    meta["format_version"] = CHECKPOINT_FORMAT_VERSION
    if isinstance(params, KarnnParams):
        meta["model"] = VARIANT_KARNN
        meta["hyper"] = {"penalty": params.penalty}
    else:
        meta["model"] = VARIANT_HDNN_C if params.variant == "c" else VARIANT_HDNN_R
        hyper = {"slot_count": params.slot_count}
        if params.conv is not None:
            hyper["filter_width"] = params.conv.width
        meta["hyper"] = hyper
    arrays = {name: tensor.value for name, tensor in named.items()}
    np.savez(path, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def load_checkpoint(path) -> tuple[KarnnParams | HdnnParams, dict]:
    """Reload a checkpoint written by save_checkpoint."""
    data = np.load(path, allow_pickle=False)
    meta = json.loads(data["__meta__"].item())
    if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(
            f"unsupported checkpoint format version {meta.get('format_version')!r}"
        )

    def tensor(name: str) -> Tensor:
        return ad.parameter(data[name])

    if meta["model"] == VARIANT_KARNN:
        params: KarnnParams | HdnnParams = KarnnParams(
            gru=nn.GruParams(
                w_z=tensor("gru.w_z"), u_z=tensor("gru.u_z"), b_z=tensor("gru.b_z"),
                w_r=tensor("gru.w_r"), u_r=tensor("gru.u_r"), b_r=tensor("gru.b_r"),
                w_h=tensor("gru.w_h"), u_h=tensor("gru.u_h"), b_h=tensor("gru.b_h"),
            ),
            attn=nn.AttentionParams(
                w_w=tensor("attn.w_w"), b_w=tensor("attn.b_w"), u_w=tensor("attn.u_w"),
            ),
            w_out=tensor("w_out"),
            b_out=tensor("b_out"),
            penalty=float(meta["hyper"]["penalty"]),
        )
    else:
        variant = "c" if meta["model"] == VARIANT_HDNN_C else "r"
        conv = gru = None
        if variant == "c":
            conv = nn.ConvParams(
                w=tensor("conv.w"),
                b=tensor("conv.b"),
                width=int(meta["hyper"]["filter_width"]),
            )
        else:
            gru = nn.GruParams(
                w_z=tensor("gru.w_z"), u_z=tensor("gru.u_z"), b_z=tensor("gru.b_z"),
                w_r=tensor("gru.w_r"), u_r=tensor("gru.u_r"), b_r=tensor("gru.b_r"),
                w_h=tensor("gru.w_h"), u_h=tensor("gru.u_h"), b_h=tensor("gru.b_h"),
            )
        params = HdnnParams(
            variant=variant,
            conv=conv,
            gru=gru,
            w_fcn=tensor("w_fcn"), b_fcn=tensor("b_fcn"),
            w_ct=tensor("w_ct"), b_ct=tensor("b_ct"),
            w_ft=tensor("w_ft"), b_ft=tensor("b_ft"),
            w_out=tensor("w_out"), b_out=tensor("b_out"),
            slot_count=int(meta["hyper"]["slot_count"]),
        )
    return params, meta
