"""Sum-of-embeddings encoder for intrinsic, structure and distance features.

Each raw block goes through its own linear map and layer norm; the branch
outputs are summed into one embedding of the hidden width.
"""
from __future__ import annotations

import math

import torch
from torch import nn

LN_EPS = 1e-5
BRANCHES = ("intrinsic", "structure", "distance")


def uniform_(t: torch.Tensor, fan_in: int, generator: torch.Generator | None = None) -> torch.Tensor:
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    with torch.no_grad():
        return t.uniform_(-bound, bound, generator=generator)


def layer_norm(x: torch.Tensor, gain: torch.Tensor, bias: torch.Tensor, eps: float = LN_EPS) -> torch.Tensor:
    """Row-wise ``gain * (x - mean) / sqrt(var + eps) + bias`` with population variance."""
    mu = x.mean(dim=-1, keepdim=True)
    var = ((x - mu) ** 2).mean(dim=-1, keepdim=True)
    return gain * (x - mu) / torch.sqrt(var + eps) + bias


class LinearLayer(nn.Module):
    """``x @ weight.T + bias`` with weight of shape (out, in)."""

    def __init__(self, in_width: int, out_width: int, generator=None, dtype=torch.float64):
        super().__init__()
        self.weight = nn.Parameter(uniform_(torch.empty(out_width, in_width, dtype=dtype), in_width, generator))
        self.bias = nn.Parameter(torch.zeros(out_width, dtype=dtype))

    def forward(self, x):
        return x @ self.weight.T + self.bias


class LayerNorm(nn.Module):
    def __init__(self, width: int, eps: float = LN_EPS, dtype=torch.float64):
        super().__init__()
        if eps <= 0:
            raise ValueError("epsilon must be positive")
        self.eps = eps
        self.gain = nn.Parameter(torch.ones(width, dtype=dtype))
        self.bias = nn.Parameter(torch.zeros(width, dtype=dtype))

    def forward(self, x):
        return layer_norm(x, self.gain, self.bias, self.eps)


class DhseEncoder(nn.Module):
    """Encode each present feature block and add the normalized branches.

    ``in_widths`` maps branch name to raw width; branches with width 0 or
    missing are dropped, which is how ablations remove a block.
    """

    def __init__(self, in_widths: dict[str, int], hidden: int, dropout: float = 0.0,
                 generator=None, dtype=torch.float64):
        super().__init__()
        self.branches = [b for b in BRANCHES if in_widths.get(b, 0) > 0]
        if not self.branches:
            raise ValueError("encoder needs at least one non-empty feature block")
        self.in_widths = {b: int(in_widths[b]) for b in self.branches}
        self.encoders = nn.ModuleDict({b: LinearLayer(self.in_widths[b], hidden, generator, dtype) for b in self.branches})
        self.norms = nn.ModuleDict({b: LayerNorm(hidden, dtype=dtype) for b in self.branches})
        self.dropout = nn.Dropout(dropout) if dropout > 0 else nn.Identity()
        self.hidden = hidden

    def forward(self, blocks: dict[str, torch.Tensor]) -> torch.Tensor:
        h = None
        for b in self.branches:
            x = blocks[b]
            if x.shape[-1] != self.in_widths[b]:
                raise ValueError(f"{b} block has width {x.shape[-1]}, encoder expects {self.in_widths[b]}")
            hb = self.norms[b](self.encoders[b](x))
            h = hb if h is None else h + hb
        return self.dropout(h)


def encode(intrinsic, structure, distance, encoder: DhseEncoder) -> torch.Tensor:
    blocks = {"intrinsic": intrinsic, "structure": structure, "distance": distance}
    sizes = {b.shape[0] for b in blocks.values() if b is not None}
    if len(sizes) > 1:
        raise ValueError("feature blocks disagree on the number of nodes")
    return encoder({b: x for b, x in blocks.items() if x is not None})
