"""Garment attribute schema, captioning and dataset construction."""

from .attributes import (AttributeValidationError, CaptionParseError, EmptyCaptionError,
                         GarmentAttributes, clean_caption, parse_caption, serialize_caption,
                         validate_attributes)
from .captioning import (CaptionPolicy, CaptionResponse, CaptionResult, CaptionUnavailableError,
                         CallableClient, ScriptedClient, generate_caption)
from .dataset import (DatasetManifest, ManifestResult, ParseMap, PoseKeypoints, SampleRecord,
                      build_manifest, build_sample, load_record, make_agnostic)

__all__ = [
    "AttributeValidationError", "CallableClient", "CaptionParseError", "CaptionPolicy",
    "CaptionResponse", "CaptionResult", "CaptionUnavailableError", "DatasetManifest",
    "EmptyCaptionError", "GarmentAttributes", "ManifestResult", "ParseMap", "PoseKeypoints",
    "SampleRecord", "ScriptedClient", "build_manifest", "build_sample", "clean_caption",
    "generate_caption", "load_record", "make_agnostic", "parse_caption", "serialize_caption",
    "validate_attributes",
]
