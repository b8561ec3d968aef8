"""ARTPS: explainable target prioritization from images and depth maps.

The package turns an image (plus an optional depth raster) into normalized
anomaly component maps, a fused anomaly map, localized rotated-box candidate
regions, and a learned curiosity ranking with per-region uncertainty.
"""

from artps.raster import Raster, LumaSat, minmax_normalize, rgb_to_luma_sat, resize_bicubic
from artps.depth import DepthMap, DepthPostParams
from artps.features import ComponentMap
from artps.localize import RotatedBox, RegionHypothesis
from artps.curiosity import CuriosityModel, RegionFeatures, ScoredRegion
from artps.config import PipelineConfig, ConfigError, default_config
from artps.pipeline import run_pipeline, PipelineResult

__version__ = "0.1.0"

__all__ = [
    "Raster",
    "LumaSat",
    "minmax_normalize",
    "rgb_to_luma_sat",
    "resize_bicubic",
    "DepthMap",
    "DepthPostParams",
    "ComponentMap",
    "RotatedBox",
    "RegionHypothesis",
    "CuriosityModel",
    "RegionFeatures",
    "ScoredRegion",
    "PipelineConfig",
    "ConfigError",
    "default_config",
    "run_pipeline",
    "PipelineResult",
    "__version__",
]
