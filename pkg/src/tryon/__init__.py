"""Desk-scale virtual try-on pipeline: flow warping, garment semantics,
latent diffusion generation, and evaluation."""

__version__ = "0.1.0"
