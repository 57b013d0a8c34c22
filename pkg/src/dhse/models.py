"""GAT and AGDN-HA layers, the node classifier built on them, and training.

Attention neighborhoods are N(i) plus i itself over the undirected view.
Attention scores use leaky-relu (slope 0.2); the aggregation nonlinearity is
configurable (ELU by default).  Heads are mean-pooled.
"""
from __future__ import annotations

import copy
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from . import _kernels
from .encoder import DhseEncoder, LinearLayer, uniform_
from .graph import Graph

log = logging.getLogger(__name__)

ACTIVATIONS = {"elu": F.elu, "relu": F.relu, "tanh": torch.tanh, "identity": lambda x: x}


class TrainingDiverged(RuntimeError):
    pass


class AttentionGraph:
    """Edge lists (dst, src) for attention over N(i) + {i}, as torch tensors."""

    def __init__(self, g: Graph):
        n = g.num_nodes
        rows = np.repeat(np.arange(n), np.diff(g.undirected_offsets))
        cols = g.undirected_targets
        keep = rows != cols
        dst = np.concatenate([rows[keep], np.arange(n)])
        src = np.concatenate([cols[keep], np.arange(n)])
        order = np.lexsort((src, dst))
        self.num_nodes = n
        self._set_edges(dst[order].astype(np.int64), src[order].astype(np.int64))
        deg = np.bincount(dst, minlength=n).astype(np.float64)
        # D^-1/2 (A + I) D^-1/2 weights, used by the symmetric transition fallback
        inv = 1.0 / np.sqrt(deg)
        self.sym_weight = torch.from_numpy(inv[dst[order]] * inv[src[order]])

    def _set_edges(self, dst: np.ndarray, src: np.ndarray) -> None:
        # edges sorted by destination, so ``offsets`` is the CSR row pointer
        self.dst = torch.from_numpy(dst)
        self.src = torch.from_numpy(src)
        self.src_np, self.dst_np = src, dst
        self.offsets = np.zeros(self.num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(dst, minlength=self.num_nodes), out=self.offsets[1:])
        self.t_edges = np.argsort(src, kind="stable").astype(np.int64)
        self.t_offsets = np.zeros(self.num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.num_nodes), out=self.t_offsets[1:])

    def permuted(self, perm: np.ndarray) -> "AttentionGraph":
        """Same graph with node i relabelled to perm[i]."""
        out = copy.copy(self)
        dst, src = perm[self.dst.numpy()], perm[self.src.numpy()]
        order = np.lexsort((src, dst))
        out._set_edges(dst[order], src[order])
        out.sym_weight = self.sym_weight[torch.from_numpy(order)]
        return out


def edge_softmax(scores: torch.Tensor, dst: torch.Tensor, num_nodes: int) -> torch.Tensor:
    """Softmax of per-edge ``scores`` (E, H) over edges sharing a destination."""
    shift = torch.full((num_nodes, scores.shape[1]), -math.inf, dtype=scores.dtype)
    shift = shift.scatter_reduce(0, dst[:, None].expand_as(scores), scores.detach(), "amax")
    ex = torch.exp(scores - shift[dst])
    denom = torch.zeros_like(shift).index_add(0, dst, ex)
    return ex / denom[dst]


class _EdgeAggregate(torch.autograd.Function):
    @staticmethod
    def forward(ctx, weights, x, graph):
        offsets, src = graph.offsets, graph.src_np
        w = weights.detach().contiguous().numpy()
        xv = x.detach().contiguous().numpy()
        ctx.save_for_backward(weights, x)
        ctx.graph = graph
        return torch.from_numpy(_kernels.edge_aggregate(offsets, src, w, xv))

    @staticmethod
    def backward(ctx, grad_out):
        weights, x = ctx.saved_tensors
        ag = ctx.graph
        gw, gx = _kernels.edge_aggregate_backward(
            ag.offsets, ag.src_np, weights.detach().contiguous().numpy(), x.detach().contiguous().numpy(),
            grad_out.contiguous().numpy(), ag.t_offsets, ag.t_edges, ag.dst_np,
        )
        return torch.from_numpy(gw), torch.from_numpy(gx), None


def propagate(weights: torch.Tensor, x: torch.Tensor, ag: AttentionGraph) -> torch.Tensor:
    """out_i = sum_j weights_ij x_j for per-edge weights (E, H) and x (N, H, D)."""
    return _EdgeAggregate.apply(weights, x, ag)


class GatLayer(nn.Module):
    def __init__(self, in_width: int, out_width: int, heads: int = 3, activation: str = "elu",
                 negative_slope: float = 0.2, generator=None, dtype=torch.float64):
        super().__init__()
        if heads < 1:
            raise ValueError("need at least one head")
        self.heads, self.out_width = heads, out_width
        self.negative_slope = negative_slope
        self.activation = activation
        self.weight = nn.Parameter(uniform_(torch.empty(heads, in_width, out_width, dtype=dtype), in_width, generator))
        # attention vector a = [a_dst || a_src] per head
        self.attn = nn.Parameter(uniform_(torch.empty(heads, 2 * out_width, dtype=dtype), 2 * out_width, generator))

    def attention(self, z: torch.Tensor, ag: AttentionGraph) -> torch.Tensor:
        a_dst, a_src = self.attn[:, :self.out_width], self.attn[:, self.out_width:]
        s_dst = (z * a_dst).sum(-1)
        s_src = (z * a_src).sum(-1)
        e = F.leaky_relu(s_dst[ag.dst] + s_src[ag.src], self.negative_slope)
        return edge_softmax(e, ag.dst, ag.num_nodes)

    def forward(self, h: torch.Tensor, ag: AttentionGraph, return_attention: bool = False):
        z = torch.einsum("ni,hio->nho", h, self.weight)
        alpha = self.attention(z, ag)
        out = ACTIVATIONS[self.activation](propagate(alpha, z, ag)).mean(dim=1)
        return (out, alpha) if return_attention else out


class AgdnLayer(nn.Module):
    """Graph diffusion with per-node hop-wise attention and a linear residual.

    The transition matrix is the GAT attention matrix of each head
    (``transition="gat"``) or the symmetric normalized adjacency with self
    loops (``transition="sym"``).
    """

    def __init__(self, in_width: int, out_width: int, heads: int = 3, diffusion_k: int = 3,
                 transition: str = "gat", negative_slope: float = 0.2, generator=None, dtype=torch.float64):
        super().__init__()
        if diffusion_k < 0:
            raise ValueError("diffusion depth must be >= 0")
        if transition not in ("gat", "sym"):
            raise ValueError(f"unknown transition {transition!r}")
        self.heads, self.out_width, self.diffusion_k = heads, out_width, diffusion_k
        self.transition = transition
        self.negative_slope = negative_slope
        self.weight = nn.Parameter(uniform_(torch.empty(heads, in_width, out_width, dtype=dtype), in_width, generator))
        self.attn = nn.Parameter(uniform_(torch.empty(heads, 2 * out_width, dtype=dtype), 2 * out_width, generator))
        self.hop_attn = nn.Parameter(uniform_(torch.empty(heads, 2 * out_width, dtype=dtype), 2 * out_width, generator))
        self.res_weight = nn.Parameter(uniform_(torch.empty(in_width, out_width, dtype=dtype), in_width, generator))

    def transition_weights(self, z, ag):
        if self.transition == "sym":
            return ag.sym_weight[:, None].expand(-1, self.heads).to(z.dtype)
        a_dst, a_src = self.attn[:, :self.out_width], self.attn[:, self.out_width:]
        e = F.leaky_relu((z * a_dst).sum(-1)[ag.dst] + (z * a_src).sum(-1)[ag.src], self.negative_slope)
        return edge_softmax(e, ag.dst, ag.num_nodes)

    def forward(self, h: torch.Tensor, ag: AttentionGraph, return_attention: bool = False):
        z = torch.einsum("ni,hio->nho", h, self.weight)
        t = self.transition_weights(z, ag)
        hops = [z]
        for _ in range(self.diffusion_k):
            hops.append(propagate(t, hops[-1], ag))
        stacked = torch.stack(hops, dim=2)  # (N, H, K+1, D)
        a0, ak = self.hop_attn[:, :self.out_width], self.hop_attn[:, self.out_width:]
        score = (z * a0).sum(-1)[:, :, None] + torch.einsum("nhkd,hd->nhk", stacked, ak)
        theta = torch.softmax(F.leaky_relu(score, self.negative_slope), dim=2)
        out = (theta[..., None] * stacked).sum(dim=2).mean(dim=1) + h @ self.res_weight
        return (out, theta) if return_attention else out


@dataclass
class ModelConfig:
    kind: str = "agdn"
    in_widths: dict = field(default_factory=dict)
    hidden: int = 64
    num_classes: int = 2
    layers: int = 2
    heads: int = 3
    diffusion_k: int = 3
    transition: str = "gat"
    activation: str = "elu"
    dropout: float = 0.0
    embed_dropout: float = 0.0
    encoding: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


class DhseModel(nn.Module):
    """Encoder (or raw concatenation) -> attention layers -> linear head."""

    def __init__(self, cfg: ModelConfig, generator=None, dtype=torch.float64):
        super().__init__()
        if cfg.kind not in ("gat", "agdn"):
            raise ValueError(f"unknown model kind {cfg.kind!r}")
        if cfg.layers < 1:
            raise ValueError("need at least one attention layer")
        if cfg.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {cfg.activation!r}")
        self.cfg = cfg
        self.branches = [b for b in ("intrinsic", "structure", "distance") if cfg.in_widths.get(b, 0) > 0]
        if cfg.encoding:
            self.encoder = DhseEncoder(cfg.in_widths, cfg.hidden, cfg.embed_dropout, generator, dtype)
            width = cfg.hidden
        else:
            self.encoder = None
            width = sum(cfg.in_widths[b] for b in self.branches)
        self.layers = nn.ModuleList()
        for _ in range(cfg.layers):
            if cfg.kind == "gat":
                layer = GatLayer(width, cfg.hidden, cfg.heads, cfg.activation, generator=generator, dtype=dtype)
            else:
                layer = AgdnLayer(width, cfg.hidden, cfg.heads, cfg.diffusion_k, cfg.transition,
                                  generator=generator, dtype=dtype)
            self.layers.append(layer)
            width = cfg.hidden
        self.head = LinearLayer(width, cfg.num_classes, generator, dtype)
        self.drop = nn.Dropout(cfg.dropout) if cfg.dropout > 0 else nn.Identity()

    def embed(self, blocks: dict[str, torch.Tensor]) -> torch.Tensor:
        if self.encoder is not None:
            return self.encoder(blocks)
        return torch.cat([blocks[b] for b in self.branches], dim=1)

    def forward(self, blocks: dict[str, torch.Tensor], ag: AttentionGraph) -> torch.Tensor:
        """Logits of shape (num_nodes, num_classes)."""
        h = self.embed(blocks)
        for layer in self.layers:
            h = layer(self.drop(h), ag)
            if self.cfg.kind == "agdn":
                h = ACTIVATIONS[self.cfg.activation](h)
        return self.head(self.drop(h))


@dataclass
class ModelOutput:
    logits: np.ndarray
    probs: np.ndarray


def model_forward(model: DhseModel, blocks, ag: AttentionGraph) -> ModelOutput:
    model.eval()
    with torch.no_grad():
        logits = model(blocks, ag)
        probs = torch.softmax(logits, dim=1)
    return ModelOutput(logits.numpy(), probs.numpy())


@dataclass
class TrainConfig:
    epochs: int = 100
    lr: float = 0.01
    weight_decay: float = 0.0
    keep_best: bool = True


def accuracy(pred: np.ndarray, labels: np.ndarray, idx: np.ndarray) -> float:
    if len(idx) == 0:
        return float("nan")
    return float(np.mean(pred[idx] == labels[idx]))


def train(model: DhseModel, blocks, ag: AttentionGraph, labels, train_idx, valid_idx=None,
          cfg: TrainConfig | None = None, seed: int = 0):
    """Full-batch Adam on mean cross-entropy over ``train_idx``.

    Returns the metric history (one dict per epoch).  With ``keep_best`` the
    parameters with the best validation accuracy are restored at the end.
    """
    cfg = cfg or TrainConfig()
    train_idx = np.asarray(train_idx, dtype=np.int64)
    valid_idx = np.asarray(valid_idx if valid_idx is not None else [], dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if train_idx.size == 0:
        raise ValueError("empty training set")
    if labels.min() < 0 or labels.max() >= model.cfg.num_classes:
        raise ValueError("labels outside [0, num_classes)")
    torch.manual_seed(seed)
    y = torch.from_numpy(labels)
    tidx = torch.from_numpy(train_idx)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=(0.9, 0.999), eps=1e-8,
                           weight_decay=cfg.weight_decay)
    stochastic = any(isinstance(m, nn.Dropout) for m in model.modules())
    history = []
    best = (-1.0, None)
    for epoch in range(cfg.epochs):
        model.train()
        opt.zero_grad()
        logits = model(blocks, ag)
        loss = F.cross_entropy(logits[tidx], y[tidx])
        if not torch.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss {loss.item()} at epoch {epoch}")
        loss.backward()
        if stochastic:
            model.eval()
            with torch.no_grad():
                logits = model(blocks, ag)
        # without dropout the step's own forward pass is the eval pass
        pred = logits.detach().argmax(dim=1).numpy()
        state = copy.deepcopy(model.state_dict()) if cfg.keep_best and valid_idx.size else None
        opt.step()
        row = {
            "epoch": epoch,
            "loss": float(loss.item()),
            "train_acc": accuracy(pred, labels, train_idx),
            "valid_acc": accuracy(pred, labels, valid_idx),
        }
        history.append(row)
        if state is not None and row["valid_acc"] > best[0]:
            best = (row["valid_acc"], state)
    if cfg.keep_best and best[1] is not None:
        model.load_state_dict(best[1])
    return history


def to_blocks(arrays: dict[str, np.ndarray], dtype=torch.float64) -> dict[str, torch.Tensor]:
    return {k: torch.as_tensor(np.asarray(v), dtype=dtype) for k, v in arrays.items() if v is not None}
