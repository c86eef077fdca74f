"""Vector-field network: base transformer branch plus a reference branch.

The base branch is a pre-norm transformer encoder over element tokens.
When a retrieved reference layout is supplied, the reference branch takes
over: each of its layers fuses the current features with the reference and
the condition (Condition-Modulated Attention over linear attention),
applies a time-conditioned scale/shift, and runs a feed-forward block.
Its own head then predicts the field; without a reference the base head's
prediction is returned untouched.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn

FUSION_KINDS = ("cma", "cross", "concat")

# Columns appended to every token: known-flags for (category, size, position).
N_ATTR_FLAGS = 3


@dataclass
class ModelConfig:
    n_categories: int
    d_model: int = 64
    n_layers_base: int = 4
    n_layers_ref: int = 2
    n_heads: int = 4
    ffn_mult: int = 4
    sampler_steps: int = 50
    lam: float = 0.01
    p_irrelevant: float = 0.1
    fusion: str = "cma"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sampler_steps < 1:
            raise ValueError("sampler_steps must be >= 1")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not 0.0 <= self.p_irrelevant <= 1.0:
            raise ValueError("p_irrelevant must be in [0, 1]")
        if self.fusion not in FUSION_KINDS:
            raise ValueError(f"fusion must be one of {FUSION_KINDS}")
        if self.d_model % 2 or self.d_model % self.n_heads:
            raise ValueError("d_model must be even and divisible by n_heads")

    @property
    def n_channels(self) -> int:
        """Width of an encoded layout row: one-hot block plus geometry."""
        return self.n_categories + 4


def sinusoidal_features(t: torch.Tensor, d: int) -> torch.Tensor:
    """(B, d) features: d/2 sin/cos pairs at geometric frequencies 1..1e4."""
    half = d // 2
    exponents = torch.arange(half, dtype=t.dtype, device=t.device)
    freqs = torch.pow(torch.tensor(1e4, dtype=t.dtype, device=t.device), exponents / max(half - 1, 1))
    angles = t.reshape(-1, 1) * freqs
    return torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1)


class TimeEmbedding(nn.Module):
    """Sinusoidal features followed by a 2-layer perceptron."""

    def __init__(self, d_model: int) -> None:
        super().__init__()
        self.d_model = d_model
        self.mlp = nn.Sequential(
            nn.Linear(d_model, 2 * d_model),
            nn.SiLU(),
            nn.Linear(2 * d_model, d_model),
        )

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        return self.mlp(sinusoidal_features(t, self.d_model))


def linear_attention(
    q: torch.Tensor,
    k: torch.Tensor,
    v: torch.Tensor,
    key_mask: torch.Tensor | None = None,
) -> torch.Tensor:
    """Kernelized attention with feature map elu(x)+1, O(N + M) in sequence length.

    out = phi(Q) (phi(K)^T V) / (phi(Q) (phi(K)^T 1)), denominator floored
    at 1e-6.  `key_mask` (.., M) True marks valid key/value rows; masked
    rows contribute nothing.
    """
    phi_q = torch.nn.functional.elu(q) + 1.0
    phi_k = torch.nn.functional.elu(k) + 1.0
    if key_mask is not None:
        phi_k = phi_k * key_mask.unsqueeze(-1).to(phi_k.dtype)
    kv = torch.einsum("...md,...me->...de", phi_k, v)
    k_sum = phi_k.sum(dim=-2)
    denom = torch.einsum("...nd,...d->...n", phi_q, k_sum)
    denom = denom.clamp(min=1e-6).unsqueeze(-1)
    return torch.einsum("...nd,...de->...ne", phi_q, kv) / denom


class MultiHeadSelfAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int) -> None:
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.w_q = nn.Linear(d_model, d_model)
        # key bias is a softmax gauge direction (shifts all scores equally)
        self.w_k = nn.Linear(d_model, d_model, bias=False)
        self.w_v = nn.Linear(d_model, d_model)
        self.w_o = nn.Linear(d_model, d_model)

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor | None = None) -> torch.Tensor:
        b, n, _ = x.shape
        def split(t: torch.Tensor) -> torch.Tensor:
            return t.reshape(b, n, self.n_heads, self.d_head).transpose(1, 2)
        q, k, v = split(self.w_q(x)), split(self.w_k(x)), split(self.w_v(x))
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.d_head)
        if pad_mask is not None:
            bias = torch.where(pad_mask, 0.0, -1e9).to(scores.dtype)
            scores = scores + bias.reshape(b, 1, 1, n)
        attn = torch.softmax(scores, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, -1)
        return self.w_o(out)


def _ffn(d_model: int, mult: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(d_model, mult * d_model),
        nn.SiLU(),
        nn.Linear(mult * d_model, d_model),
    )


class EncoderLayer(nn.Module):
    """Pre-norm transformer encoder layer."""

    def __init__(self, d_model: int, n_heads: int, ffn_mult: int) -> None:
        super().__init__()
        self.norm1 = nn.LayerNorm(d_model)
        self.attn = MultiHeadSelfAttention(d_model, n_heads)
        self.norm2 = nn.LayerNorm(d_model)
        self.ffn = _ffn(d_model, ffn_mult)

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor | None = None) -> torch.Tensor:
        x = x + self.attn(self.norm1(x), pad_mask)
        return x + self.ffn(self.norm2(x))


class Stylize(nn.Module):
    """Scale/shift regressed from the time embedding; starts as identity."""

    def __init__(self, d_model: int) -> None:
        super().__init__()
        self.proj = nn.Linear(d_model, 2 * d_model)
        nn.init.zeros_(self.proj.weight)
        with torch.no_grad():
            self.proj.bias[:d_model] = 1.0
            self.proj.bias[d_model:] = 0.0

    def forward(self, h: torch.Tensor, t_emb: torch.Tensor) -> torch.Tensor:
        gamma, beta = self.proj(t_emb).chunk(2, dim=-1)
        return gamma.unsqueeze(1) * h + beta.unsqueeze(1)


class CMABlock(nn.Module):
    """Condition-Modulated Attention.

    Reference keys/values are gated per row by the sigmoid-scaled dot
    product between that row's key and the pooled condition feature, then
    fused into the current features through linear attention.  The result
    is residually added, normalized, and stylized by the time embedding.
    `gate_override` forces a constant gate (test hook).
    """

    def __init__(self, d_model: int, ref_dim: int, cond_dim: int) -> None:
        super().__init__()
        self.d_model = d_model
        self.ref_embed = nn.Linear(ref_dim, d_model)
        self.cond_embed = nn.Linear(cond_dim, d_model)
        self.w_q = nn.Linear(d_model, d_model)
        self.w_k = nn.Linear(d_model, d_model)
        self.w_v = nn.Linear(d_model, d_model)
        self.w_c = nn.Linear(d_model, d_model)
        self.norm = nn.LayerNorm(d_model)
        self.stylize = Stylize(d_model)
        self.gate_override: float | None = None

    def gates(self, ref: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        """(B, M, 1) gate per reference row."""
        k = self.w_k(self.ref_embed(ref))
        c_bar = self.w_c(self.cond_embed(cond)).mean(dim=-2, keepdim=True)
        logits = (k * c_bar).sum(dim=-1, keepdim=True) / math.sqrt(self.d_model)
        return torch.sigmoid(logits)

    def forward(
        self,
        x: torch.Tensor,
        ref: torch.Tensor,
        cond: torch.Tensor,
        t_emb: torch.Tensor,
        ref_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        r = self.ref_embed(ref)
        k = self.w_k(r)
        v = self.w_v(r)
        if self.gate_override is not None:
            g = torch.full_like(k[..., :1], float(self.gate_override))
        else:
            c_bar = self.w_c(self.cond_embed(cond)).mean(dim=-2, keepdim=True)
            g = torch.sigmoid((k * c_bar).sum(dim=-1, keepdim=True) / math.sqrt(self.d_model))
        fused = linear_attention(self.w_q(x), k * g, v * g, key_mask=ref_mask)
        return self.stylize(self.norm(x + fused), t_emb)


class VanillaCrossBlock(nn.Module):
    """Plain softmax cross-attention onto the reference; no condition gate."""

    def __init__(self, d_model: int, ref_dim: int, cond_dim: int) -> None:
        super().__init__()
        self.d_model = d_model
        self.ref_embed = nn.Linear(ref_dim, d_model)
        self.w_q = nn.Linear(d_model, d_model)
        # key bias is a softmax gauge direction (shifts all scores equally)
        self.w_k = nn.Linear(d_model, d_model, bias=False)
        self.w_v = nn.Linear(d_model, d_model)
        self.norm = nn.LayerNorm(d_model)
        self.stylize = Stylize(d_model)

    def forward(
        self,
        x: torch.Tensor,
        ref: torch.Tensor,
        cond: torch.Tensor,
        t_emb: torch.Tensor,
        ref_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        r = self.ref_embed(ref)
        scores = self.w_q(x) @ self.w_k(r).transpose(-1, -2) / math.sqrt(self.d_model)
        if ref_mask is not None:
            bias = torch.where(ref_mask, 0.0, -1e9).to(scores.dtype)
            scores = scores + bias.unsqueeze(1)
        fused = torch.softmax(scores, dim=-1) @ self.w_v(r)
        return self.stylize(self.norm(x + fused), t_emb)


class ConcatLinearBlock(nn.Module):
    """Mean-pooled reference feature concatenated per token, then a linear mix."""

    def __init__(self, d_model: int, ref_dim: int, cond_dim: int) -> None:
        super().__init__()
        self.ref_embed = nn.Linear(ref_dim, d_model)
        self.fuse = nn.Linear(2 * d_model, d_model)
        self.norm = nn.LayerNorm(d_model)
        self.stylize = Stylize(d_model)

    def forward(
        self,
        x: torch.Tensor,
        ref: torch.Tensor,
        cond: torch.Tensor,
        t_emb: torch.Tensor,
        ref_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        r = self.ref_embed(ref)
        if ref_mask is not None:
            w = ref_mask.unsqueeze(-1).to(r.dtype)
            pooled = (r * w).sum(dim=-2) / w.sum(dim=-2).clamp(min=1.0)
        else:
            pooled = r.mean(dim=-2)
        expanded = pooled.unsqueeze(1).expand(-1, x.shape[1], -1)
        fused = self.fuse(torch.cat([x, expanded], dim=-1))
        return self.stylize(self.norm(x + fused), t_emb)


_FUSION_BLOCKS = {"cma": CMABlock, "cross": VanillaCrossBlock, "concat": ConcatLinearBlock}


class ReferenceLayer(nn.Module):
    """Fusion block followed by a pre-norm feed-forward block."""

    def __init__(self, cfg: ModelConfig, ref_dim: int, cond_dim: int) -> None:
        super().__init__()
        self.fuse = _FUSION_BLOCKS[cfg.fusion](cfg.d_model, ref_dim, cond_dim)
        self.ffn_norm = nn.LayerNorm(cfg.d_model)
        self.ffn = _ffn(cfg.d_model, cfg.ffn_mult)

    def forward(self, x, ref, cond, t_emb, ref_mask=None):
        x = self.fuse(x, ref, cond, t_emb, ref_mask)
        return x + self.ffn(self.ffn_norm(x))


class VectorFieldNet(nn.Module):
    """Predicts the per-channel velocity for a noisy layout encoding."""

    def __init__(self, cfg: ModelConfig) -> None:
        super().__init__()
        self.cfg = cfg
        d = cfg.d_model
        n_ch = cfg.n_channels
        cond_dim = n_ch + N_ATTR_FLAGS
        self.in_proj = nn.Linear(n_ch + N_ATTR_FLAGS, d)
        self.time_embed = TimeEmbedding(d)
        self.base_layers = nn.ModuleList(
            EncoderLayer(d, cfg.n_heads, cfg.ffn_mult) for _ in range(cfg.n_layers_base)
        )
        self.base_norm = nn.LayerNorm(d)
        self.base_head = nn.Linear(d, n_ch)
        self.ref_layers = nn.ModuleList(
            ReferenceLayer(cfg, ref_dim=n_ch, cond_dim=cond_dim) for _ in range(cfg.n_layers_ref)
        )
        self.ref_norm = nn.LayerNorm(d)
        self.ref_head = nn.Linear(d, n_ch)

    def forward(
        self,
        x_t: torch.Tensor,
        t: torch.Tensor,
        cond_values: torch.Tensor,
        attr_mask: torch.Tensor,
        ref: torch.Tensor | None = None,
        ref_mask: torch.Tensor | None = None,
        pad_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """x_t (B,N,C+4), t (B,), cond_values (B,N,C+4), attr_mask (B,N,3).

        `ref` (B,M,C+4) activates the reference branch for the whole batch;
        `ref_mask` (B,M) marks real reference rows, `pad_mask` (B,N) real
        elements.
        """
        t_emb = self.time_embed(t)
        h = self.in_proj(torch.cat([x_t, attr_mask], dim=-1)) + t_emb.unsqueeze(1)
        for layer in self.base_layers:
            h = layer(h, pad_mask)
        v_base = self.base_head(self.base_norm(h))
        if ref is None:
            return v_base
        cond = torch.cat([cond_values, attr_mask], dim=-1)
        for layer in self.ref_layers:
            h = layer(h, ref, cond, t_emb, ref_mask)
        return self.ref_head(self.ref_norm(h))


def build_net(cfg: ModelConfig) -> VectorFieldNet:
    """Construct a net with parameters initialized deterministically from cfg.seed."""
    torch.manual_seed(cfg.seed)
    return VectorFieldNet(cfg)
