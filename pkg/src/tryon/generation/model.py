"""Bundles the generation components and builds denoiser conditions.

Text handling: the sequence ``[pseudo-words; caption tokens]`` is the text
condition carried in :class:`Conditions`; the frozen text encoder runs
inside :meth:`GenerationModel.predict_noise`, so dropping the text
condition replaces the whole joint sequence with the learned null row.
"""

from dataclasses import dataclass

import torch
from torch import nn

from ..errors import ArgumentError
from ..semantics.attributes import parse_caption
from .condition import GeometricCondition, downsample_mask, downsample_pose
from .diffusion import Conditions
from .latent import DeskAutoencoder, encode_latent
from .text import (NUM_PSEUDO_WORDS, PseudoWordMapper, TextEncoder, VisualEncoder, Vocabulary,
                   embed_batch, map_pseudo_words)
from .unet import Denoiser

TEXT_MODES = ("none", "raw", "structured")
RAW_CAPTION = "a photo of an upper body garment"


@dataclass
class GenerationConfig:
    d_text: int = 64
    max_text: int = 32
    visual_dim: int = 64
    visual_blocks: int = 2
    mapper_hidden: int = 128
    text_blocks: int = 2
    denoiser_base: int = 32
    time_dim: int = 64
    seed: int = 0


def caption_for_mode(caption, text_mode):
    """Caption string fed to the tokenizer under a text ablation mode.

    ``structured`` keeps the attribute caption, ``raw`` swaps in a generic
    category prompt without attributes and ``none`` yields no tokens.
    """
    if text_mode not in TEXT_MODES:
        raise ArgumentError(f"text_mode must be one of {TEXT_MODES}, got {text_mode!r}")
    if text_mode == "structured":
        parse_caption(caption)
        return caption
    return RAW_CAPTION if text_mode == "raw" else ""


class GenerationModel(nn.Module):
    """Token table, visual encoder, pseudo-word mapper, text encoder, denoiser.

    The token table, visual encoder and text encoder are frozen stand-ins
    drawn from ``config.seed``; the mapper, null text row and denoiser are
    trained.
    """

    def __init__(self, config=None, text_mode="structured"):
        super().__init__()
        if text_mode not in TEXT_MODES:
            raise ArgumentError(f"text_mode must be one of {TEXT_MODES}, got {text_mode!r}")
        cfg = config or GenerationConfig()
        self.config = cfg
        self.text_mode = text_mode
        self.vocab = Vocabulary.default()
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(cfg.seed)
            self.table = nn.Embedding(len(self.vocab), cfg.d_text)
            self.text_encoder = TextEncoder(cfg.d_text, cfg.text_blocks, NUM_PSEUDO_WORDS + cfg.max_text)
            self.mapper = PseudoWordMapper(cfg.visual_dim, cfg.d_text, NUM_PSEUDO_WORDS, cfg.mapper_hidden)
            self.null_text = nn.Parameter(torch.randn(cfg.d_text) * 0.02)
            self.denoiser = Denoiser(cfg.denoiser_base, cfg.d_text, cfg.time_dim)
        self.table.requires_grad_(False)
        self.text_encoder.requires_grad_(False)
        self.visual = VisualEncoder(cfg.visual_dim, blocks=cfg.visual_blocks, seed=cfg.seed)
        self.autoencoder = DeskAutoencoder()

    def caption_tokens(self, captions):
        """(B, max_text, d) caption embeddings and validity mask for the current mode."""
        B = len(captions)
        if self.text_mode == "none":
            # the caption slot carries the null row every step
            emb = self.null_text.view(1, 1, -1).expand(B, self.config.max_text, -1)
            mask = torch.zeros(B, self.config.max_text, dtype=torch.bool)
            mask[:, 0] = True
            return emb, mask
        texts = [caption_for_mode(c, self.text_mode) for c in captions]
        return embed_batch(texts, self.vocab, self.table, self.config.max_text)

    def conditions(self, garment, warped, agnostic, mask_full, pose_full, captions):
        """Encode a batch of full-resolution inputs into :class:`Conditions`.

        Args:
            garment: (B, 3, H, W) in-shop garment for the pseudo-word path.
            warped: (B, 3, H, W) warped garment (or its stand-in).
            agnostic: (B, 3, H, W) agnostic person image.
            mask_full: (B, 1, H, W) inpainting mask.
            pose_full: (B, 3, H, W) dense-pose rendering.
            captions: list of B caption strings.
        """
        e_warp = encode_latent(warped, self.autoencoder)
        e_agn = encode_latent(agnostic, self.autoencoder)
        size = tuple(e_warp.shape[-2:])
        pseudo = map_pseudo_words(garment, self.visual, self.mapper)
        tokens, tmask = self.caption_tokens(captions)
        text = torch.cat([pseudo, tokens.to(pseudo.dtype)], dim=1)
        mask = torch.cat([torch.ones(len(captions), NUM_PSEUDO_WORDS, dtype=torch.bool), tmask], 1)
        return Conditions(e_warp, e_agn, downsample_mask(mask_full, size),
                          downsample_pose(pose_full, size), text, mask)

    def unconditional(self, cond):
        return cond.nulled(self.null_text)

    def predict_noise(self, x_t, t, cond):
        stack = GeometricCondition(cond.e_warp, cond.e_agnostic, cond.mask, cond.pose, x_t).stack()
        context = self.text_encoder(cond.text, mask=cond.text_mask)
        return self.denoiser(stack, t, context, cond.text_mask)

    def forward(self, x_t, t, cond):
        return self.predict_noise(x_t, t, cond)
