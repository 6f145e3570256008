class ExportError(ValueError):
    """Base error for export failures."""


class DecodeError(ExportError):
    """Video or image frames could not be decoded."""


class ModelLoadError(ExportError):
    """The requested feature/latent model could not be loaded."""
