"""Caption tokens, visual pseudo-words and the joint text encoder.

The conditioning sequence is ``[pseudo-words; caption tokens]``: sixteen
tokens mapped from garment image features into the text embedding space,
followed by the embedded caption, then run through a small transformer.
"""

import re
from dataclasses import dataclass

import torch
from torch import nn
import torch.nn.functional as F

from ..errors import ContractError, DimensionError
from ..semantics.attributes import CLOSED_SETS, COMMON_COLORS, COMMON_PATTERNS
from .layers import Block, sinusoidal

PAD, UNK = "<pad>", "<unk>"
NUM_PSEUDO_WORDS = 16
TEMPLATE_WORDS = ("a", "top", "with", "neckline", "length")
# words of the unstructured caption used by the raw-text ablation
RAW_WORDS = ("photo", "of", "an", "upper", "body", "garment", "shirt", "t-shirt")
_WORD_RE = re.compile(r"[a-z0-9]+(?:-[a-z0-9]+)*")


def tokenize(text):
    """Lowercase, split on whitespace and punctuation, keep hyphenated words."""
    return _WORD_RE.findall(text.lower())


class Vocabulary:
    """Word-to-id table; id 0 is padding and id 1 the unknown token."""

    def __init__(self, words):
        self.itos = [PAD, UNK] + sorted(set(words) - {PAD, UNK})
        self.stoi = {w: i for i, w in enumerate(self.itos)}

    def __len__(self):
        return len(self.itos)

    def encode(self, tokens):
        unk = self.stoi[UNK]
        return [self.stoi.get(t, unk) for t in tokens]

    @classmethod
    def default(cls):
        words = set(TEMPLATE_WORDS) | set(RAW_WORDS) | set(COMMON_COLORS) | set(COMMON_PATTERNS)
        for values in CLOSED_SETS.values():
            for v in values:
                words.update(tokenize(v))
        return cls(words)


@dataclass
class TextEmbedding:
    """Padded token ids, validity mask (True = real token) and embeddings."""

    ids: torch.Tensor
    mask: torch.Tensor
    embeddings: torch.Tensor

    @property
    def length(self):
        return int(self.mask.sum())

    @property
    def tokens(self):
        return self.embeddings[self.mask]


def embed_text(caption, vocab, table, max_len=32):
    """Tokenize, look up and pad one caption to ``max_len`` rows."""
    ids = vocab.encode(tokenize(caption))[:max_len]
    n = len(ids)
    padded = torch.zeros(max_len, dtype=torch.long)
    padded[:n] = torch.tensor(ids, dtype=torch.long)
    mask = torch.zeros(max_len, dtype=torch.bool)
    mask[:n] = True
    return TextEmbedding(padded, mask, table(padded))


def embed_batch(captions, vocab, table, max_len=32):
    items = [embed_text(c, vocab, table, max_len) for c in captions]
    return (torch.stack([e.embeddings for e in items]), torch.stack([e.mask for e in items]))


class VisualEncoder(nn.Module):
    """Frozen patch-embedding transformer standing in for an image encoder.

    Patches are pooled to a fixed token grid so the sequence length does not
    depend on the image resolution.
    """

    def __init__(self, dim=64, patch=8, grid=(8, 6), blocks=2, seed=0):
        super().__init__()
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self.embed = nn.Conv2d(3, dim, patch, stride=patch)
            self.blocks = nn.ModuleList(Block(dim) for _ in range(blocks))
            self.norm = nn.LayerNorm(dim)
        self.grid = grid
        self.dim = dim
        self.requires_grad_(False)

    def forward(self, image):
        x = F.adaptive_avg_pool2d(self.embed(image), self.grid)
        x = x.flatten(2).transpose(1, 2)
        x = x + sinusoidal(torch.arange(x.shape[1]), self.dim).to(x.dtype)
        for blk in self.blocks:
            x = blk(x)
        return self.norm(x)


class PseudoWordMapper(nn.Module):
    """Transformer block plus MLP head mapping visual tokens to pseudo-words."""

    def __init__(self, visual_dim=64, text_dim=64, num_words=NUM_PSEUDO_WORDS, hidden=128):
        super().__init__()
        self.block = Block(visual_dim)
        self.head = nn.Sequential(nn.LayerNorm(visual_dim), nn.Linear(visual_dim, hidden), nn.GELU(),
                                  nn.Linear(hidden, num_words * text_dim))
        self.num_words = num_words
        self.text_dim = text_dim

    @property
    def final_layer(self):
        return self.head[-1]

    def forward(self, visual_tokens):
        x = self.block(visual_tokens).mean(dim=1)
        return self.head(x).view(-1, self.num_words, self.text_dim)


def map_pseudo_words(garment_image, visual_encoder, mapper, num_words=NUM_PSEUDO_WORDS):
    """Garment image batch -> (B, 16, d_text) pseudo-word embeddings."""
    out = mapper(visual_encoder(garment_image))
    if out.dim() != 3 or out.shape[0] != garment_image.shape[0] or out.shape[1] != num_words:
        raise ContractError(f"mapper returned {tuple(out.shape)}, expected (B, {num_words}, d_text)")
    return out


class TextEncoder(nn.Module):
    """Learned positions plus pre-norm transformer blocks over the joint sequence.

    With ``identity_init`` the positions and every residual branch start at
    zero, so the encoder is initially the identity map.
    """

    def __init__(self, dim=64, blocks=2, max_len=NUM_PSEUDO_WORDS + 32, identity_init=False):
        super().__init__()
        self.pos = nn.Parameter(torch.randn(max_len, dim) * 0.02)
        self.blocks = nn.ModuleList(Block(dim) for _ in range(blocks))
        self.dim = dim
        if identity_init:
            nn.init.zeros_(self.pos)
            for blk in self.blocks:
                blk.zero_residuals()

    def forward(self, x, mask=None):
        if x.shape[1] > self.pos.shape[0]:
            raise DimensionError(f"sequence of {x.shape[1]} exceeds encoder length {self.pos.shape[0]}")
        x = x + self.pos[: x.shape[1]].to(x.dtype)
        for blk in self.blocks:
            x = blk(x, mask=mask)
        return x


def fuse_and_encode(v_pseudo, t_feature, encoder, t_mask=None):
    """Concatenate pseudo-words before caption tokens and encode.

    Args:
        v_pseudo: (B, 16, d) pseudo-word embeddings.
        t_feature: (B, n, d) caption token embeddings.
        t_mask: optional (B, n) validity mask; padding is never attended.

    Returns:
        ``(E_text, mask)`` with E_text (B, 16 + n, d).
    """
    if v_pseudo.shape[-1] != t_feature.shape[-1]:
        raise DimensionError(f"token widths differ: {v_pseudo.shape[-1]} vs {t_feature.shape[-1]}")
    B, n = t_feature.shape[:2]
    if t_mask is None:
        t_mask = torch.ones(B, n, dtype=torch.bool, device=t_feature.device)
    mask = torch.cat([torch.ones(B, v_pseudo.shape[1], dtype=torch.bool, device=t_mask.device), t_mask], 1)
    y = torch.cat([v_pseudo, t_feature], dim=1)
    return encoder(y, mask=mask), mask
