"""Bridge from video frames to AFTN feature volumes and inverted latent stacks."""

from .errors import DecodeError, ExportError, ModelLoadError
from .export import export_features, export_latents, run_export
from .manifest import ExportManifest
from .video import load_frames

__version__ = "0.1.0"

__all__ = ["DecodeError", "ExportError", "ExportManifest", "ModelLoadError",
           "export_features", "export_latents", "load_frames", "run_export"]
