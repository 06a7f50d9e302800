"""Configuration, training loops, inference, ablations and reporting."""

from .ablation import SUITES, AblationResult, run_ablation, suite_settings
from .checkpoint import JsonlLog, file_hash, load_checkpoint, read_log, save_checkpoint
from .config import (RunConfig, desk_preset, fingerprint, from_text, full_preset, load_config, to_text,
                     warp_fingerprint)
from .data import Batch, collate, load_batch
from .grid import emit_grid
from .inference import infer, write_references
from .training import (Checkpoint, dropout_rates, load_generation_model, load_warp_network,
                       train_generation, train_warp, warp_lr)

__all__ = [
    "AblationResult", "Batch", "Checkpoint", "JsonlLog", "RunConfig", "SUITES", "collate", "desk_preset",
    "dropout_rates", "emit_grid", "file_hash", "fingerprint", "from_text", "full_preset", "infer",
    "load_batch", "load_checkpoint", "load_config", "load_generation_model", "load_warp_network",
    "read_log", "run_ablation", "save_checkpoint", "suite_settings", "to_text", "train_generation",
    "train_warp", "warp_fingerprint", "warp_lr", "write_references",
]
