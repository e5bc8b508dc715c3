"""Embedding extraction for the zsaudio evaluation pipeline."""

from .audio import DecodeError, load_wav
from .augment import AUGMENTATIONS, InvalidAugmentationParams, apply_augmentation, resolve_params
from .jobs import ExtractionJob, extract_audio_embeddings, extract_text_banks
from .models import UnsupportedModel, load_encoder, supported_models
from .tensorfile import read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "AUGMENTATIONS",
    "DecodeError",
    "ExtractionJob",
    "InvalidAugmentationParams",
    "UnsupportedModel",
    "apply_augmentation",
    "extract_audio_embeddings",
    "extract_text_banks",
    "load_encoder",
    "load_wav",
    "read_tensor",
    "resolve_params",
    "supported_models",
    "write_tensor",
]
