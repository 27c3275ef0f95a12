"""Evaluation and analysis toolkit for flexible-count 3D visual grounding."""

__version__ = "0.1.0"

from .kernels import backend  # noqa: E402

__all__ = ["__version__", "backend"]
