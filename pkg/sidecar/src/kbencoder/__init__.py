"""kbencoder: turn raw images + instructions into engine-ready tensors.

The sidecar talks to the retrieval engine only through its file contracts
(tensor wire format, manifest schema, observation directories) and CLI.
"""

from .backbone import BackboneError, SpectralBackbone, backbone_names, get_backbone
from .encode import (
    ENCODE_ERRORS,
    DatasetRecord,
    EncodeError,
    EncodeJob,
    encode_dataset,
    encode_observation,
    parse_dataset,
)
from .images import ImageError, load_depth, load_mask, load_rgb
from .wire import WireError, read_tensor, tensor_bytes, write_tensor

__all__ = [
    "BackboneError",
    "DatasetRecord",
    "ENCODE_ERRORS",
    "EncodeError",
    "EncodeJob",
    "ImageError",
    "SpectralBackbone",
    "WireError",
    "backbone_names",
    "encode_dataset",
    "encode_observation",
    "get_backbone",
    "load_depth",
    "load_mask",
    "load_rgb",
    "parse_dataset",
    "read_tensor",
    "tensor_bytes",
    "write_tensor",
]
