"""Latent diffusion generation with geometric and text conditions."""

from .condition import (STACK_ORDER, STACK_WIDTH, GeometricCondition, assemble_geometric_condition,
                        downsample_mask, downsample_pose)
from .diffusion import (Conditions, DiffusionSchedule, add_noise, diffusion_loss, guided_predict,
                        mask_conditions, sample)
from .latent import DOWNSCALE, LATENT_CHANNELS, DeskAutoencoder, decode_latent, encode_latent
from .model import TEXT_MODES, GenerationConfig, GenerationModel, caption_for_mode
from .text import (NUM_PSEUDO_WORDS, PseudoWordMapper, TextEmbedding, TextEncoder, VisualEncoder,
                   Vocabulary, embed_batch, embed_text, fuse_and_encode, map_pseudo_words, tokenize)
from .unet import Denoiser

__all__ = [
    "Conditions", "DOWNSCALE", "DeskAutoencoder", "Denoiser", "DiffusionSchedule",
    "GenerationConfig", "GenerationModel", "GeometricCondition", "LATENT_CHANNELS",
    "NUM_PSEUDO_WORDS", "PseudoWordMapper", "STACK_ORDER", "STACK_WIDTH", "TEXT_MODES",
    "TextEmbedding", "TextEncoder", "VisualEncoder", "Vocabulary", "add_noise",
    "assemble_geometric_condition", "caption_for_mode", "decode_latent", "diffusion_loss",
    "downsample_mask", "downsample_pose", "embed_batch", "embed_text", "encode_latent",
    "fuse_and_encode", "guided_predict", "map_pseudo_words", "mask_conditions", "sample",
    "tokenize",
]
