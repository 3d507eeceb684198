"""Light field depth from sparse EPI edges and bidirectional diffusion."""
from .config import PipelineConfig, paper_defaults
from .evaluate import MetricsReport, compute_metrics
from .lightfield import (DisparityMap, GridLayout, LightField, LightFieldError, ParameterError,
                         load_light_field)
from .pipeline import DepthResult, TexturelessError, estimate_depth, sparse_labels
from .synth import SceneSpec, render

__version__ = "0.1.0"

__all__ = [
    "DepthResult", "DisparityMap", "GridLayout", "LightField", "LightFieldError", "MetricsReport",
    "ParameterError", "PipelineConfig", "SceneSpec", "TexturelessError", "compute_metrics",
    "estimate_depth", "load_light_field", "paper_defaults", "render", "sparse_labels",
]
