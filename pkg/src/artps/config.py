"""Pipeline configuration: JSON schema validation, defaults, and hashing.

A config document is validated structurally against a published JSON schema
(unknown keys rejected everywhere), deep-merged over defaults, then checked
for cross-field constraints (threshold ordering, weight coverage). The config
hash covers every semantic field and excludes the io section, so two runs
with the same hash are guaranteed to execute identical math.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

import jsonschema

from artps.curiosity import KnownValueConfig
from artps.depth import DepthPostParams, PoissonParams, WmfParams
from artps.enhance import (
    BilateralParams,
    ClaheParams,
    EnhanceParams,
    EnhanceSteps,
    UnsharpParams,
)
from artps.features import PatchRecipe
from artps.fuse import (
    DEFAULT_WEIGHTS,
    FusionConfig,
    HysteresisConfig,
    MorphologyConfig,
    SuppressionConfig,
)


class ConfigError(ValueError):
    """Raised for schema violations or cross-field constraint failures."""


_NONNEG = {"type": "number", "minimum": 0}
_UNIT = {"type": "number", "minimum": 0, "maximum": 1}
_POS_INT = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "enhance": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "resize_to": {
                    "oneOf": [
                        {"type": "null"},
                        {
                            "type": "array",
                            "items": {"type": "integer", "minimum": 4},
                            "minItems": 2,
                            "maxItems": 2,
                        },
                    ]
                },
                "steps": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "resize": {"type": "boolean"},
                        "bilateral": {"type": "boolean"},
                        "clahe": {"type": "boolean"},
                        "gamma": {"type": "boolean"},
                        "unsharp": {"type": "boolean"},
                    },
                },
                "bilateral": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "window": {"type": "integer", "minimum": 1},
                        "sigma_s": {"type": "number", "exclusiveMinimum": 0},
                        "sigma_r": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                "clahe": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "clip_limit": {"type": "number", "exclusiveMinimum": 0},
                        "tile_grid": {
                            "type": "array",
                            "items": _POS_INT,
                            "minItems": 2,
                            "maxItems": 2,
                        },
                    },
                },
                "unsharp": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "radius": {"type": "number", "exclusiveMinimum": 0},
                        "amount": _NONNEG,
                    },
                },
                "gamma_epsilon": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "depth": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "alpha": _NONNEG,
                "poisson": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "max_iters": _POS_INT,
                        "tolerance": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                "wmf": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "window": {"type": "integer", "minimum": 1},
                        "sigma_g": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            },
        },
        "features": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "patch": {"type": "integer", "minimum": 2},
                "stride": _POS_INT,
                "bins": {"type": "integer", "minimum": 2},
                "ridge_scale": {"type": "number", "exclusiveMinimum": 0},
                "pca_components": {"type": "integer", "minimum": 0},
                "scales": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 1,
                },
                "dog_sigmas": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 2,
                    "maxItems": 2,
                },
            },
        },
        "fusion": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "weights": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {name: _NONNEG for name in DEFAULT_WEIGHTS},
                },
                "suppression": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "enabled": {"type": "boolean"},
                        "mode": {"enum": ["both", "shadow", "specular"]},
                        "strength": _UNIT,
                    },
                },
                "hysteresis": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"tau_low": _UNIT, "tau_high": _UNIT},
                },
                "morphology": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "open_radius": {"type": "integer", "minimum": 0},
                        "close_radius": {"type": "integer", "minimum": 0},
                    },
                },
                "min_region_area": _POS_INT,
            },
        },
        "localize": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["regions", "canny"]},
                "nms_iou": _UNIT,
                "merge_dist_frac": _UNIT,
                "canny": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "tau_low": _UNIT,
                        "tau_high": _UNIT,
                        "min_pixels": _POS_INT,
                    },
                },
            },
        },
        "curiosity": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "known_value": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "mode": {"enum": ["constant", "sidecar"]},
                        "value": _UNIT,
                        "path": {"oneOf": [{"type": "null"}, {"type": "string"}]},
                    },
                },
                "model_path": {"oneOf": [{"type": "null"}, {"type": "string"}]},
            },
        },
        "io": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "out_dir": {"oneOf": [{"type": "null"}, {"type": "string"}]},
                "write_components": {"type": "boolean"},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}


def default_config_dict() -> dict:
    return {
        "enhance": {
            "resize_to": None,
            "steps": {
                "resize": True,
                "bilateral": True,
                "clahe": True,
                "gamma": True,
                "unsharp": True,
            },
            "bilateral": {"window": 5, "sigma_s": 3.0, "sigma_r": 0.1},
            "clahe": {"clip_limit": 2.0, "tile_grid": [8, 8]},
            "unsharp": {"radius": 3.0, "amount": 0.5},
            "gamma_epsilon": 1e-6,
        },
        "depth": {
            "enabled": True,
            "alpha": 8.0,
            "poisson": {"max_iters": 120, "tolerance": 2e-3},
            "wmf": {"window": 5, "sigma_g": 0.1},
        },
        "features": {
            "patch": 8,
            "stride": 4,
            "bins": 4,
            "ridge_scale": 0.01,
            "pca_components": 1,
            "scales": [2.0, 4.0, 8.0],
            "dog_sigmas": [1.5, 3.0],
        },
        "fusion": {
            "weights": dict(DEFAULT_WEIGHTS),
            "suppression": {"enabled": True, "mode": "both", "strength": 1.0},
            "hysteresis": {"tau_low": 0.3, "tau_high": 0.6},
            "morphology": {"open_radius": 1, "close_radius": 1},
            "min_region_area": 24,
        },
        "localize": {
            "mode": "regions",
            "nms_iou": 0.3,
            "merge_dist_frac": 0.05,
            "canny": {"tau_low": 0.2, "tau_high": 0.5, "min_pixels": 8},
        },
        "curiosity": {
            "known_value": {"mode": "constant", "value": 0.5, "path": None},
            "model_path": None,
        },
        "io": {"out_dir": None, "write_components": False},
        "seed": 0,
    }


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass(frozen=True)
class PipelineConfig:
    """Fully resolved parameters for one pipeline run."""

    enhance: EnhanceParams
    depth_enabled: bool
    depth_params: DepthPostParams
    patch_recipe: PatchRecipe
    pca_components: int
    scales: tuple[float, ...]
    dog_sigmas: tuple[float, float]
    fusion: FusionConfig
    localize_mode: str
    nms_iou: float
    merge_dist_frac: float
    canny_tau_low: float
    canny_tau_high: float
    canny_min_pixels: int
    known_value: KnownValueConfig
    model_path: str | None
    seed: int
    io: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def config_from_dict(doc: dict) -> PipelineConfig:
    """Validate a (possibly partial) config document and resolve defaults."""
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config schema violation at {path}: {exc.message}") from exc
    merged = _deep_merge(default_config_dict(), doc)
    try:
        enhance = EnhanceParams(
            steps=EnhanceSteps(**merged["enhance"]["steps"]),
            bilateral=BilateralParams(**merged["enhance"]["bilateral"]),
            clahe=ClaheParams(
                clip_limit=merged["enhance"]["clahe"]["clip_limit"],
                tile_grid=tuple(merged["enhance"]["clahe"]["tile_grid"]),
            ),
            unsharp=UnsharpParams(**merged["enhance"]["unsharp"]),
            gamma_epsilon=merged["enhance"]["gamma_epsilon"],
            resize_to=(
                tuple(merged["enhance"]["resize_to"])
                if merged["enhance"]["resize_to"] is not None
                else None
            ),
        )
        depth_params = DepthPostParams(
            alpha=merged["depth"]["alpha"],
            poisson=PoissonParams(**merged["depth"]["poisson"]),
            wmf=WmfParams(**merged["depth"]["wmf"]),
        )
        recipe = PatchRecipe(
            patch=merged["features"]["patch"],
            stride=merged["features"]["stride"],
            bins=merged["features"]["bins"],
            ridge_scale=merged["features"]["ridge_scale"],
        )
        fus = merged["fusion"]
        fusion = FusionConfig(
            weights=dict(fus["weights"]),
            suppression=SuppressionConfig(**fus["suppression"]),
            hysteresis=HysteresisConfig(**fus["hysteresis"]),
            morphology=MorphologyConfig(**fus["morphology"]),
            min_region_area=fus["min_region_area"],
        )
        loc = merged["localize"]
        if not loc["canny"]["tau_low"] <= loc["canny"]["tau_high"]:
            raise ValueError("canny tau_low must not exceed tau_high")
        known = KnownValueConfig(**merged["curiosity"]["known_value"])
        dog = merged["features"]["dog_sigmas"]
        if not dog[0] <= dog[1]:
            raise ValueError("dog_sigmas must be ordered narrow <= wide")
        return PipelineConfig(
            enhance=enhance,
            depth_enabled=merged["depth"]["enabled"],
            depth_params=depth_params,
            patch_recipe=recipe,
            pca_components=merged["features"]["pca_components"],
            scales=tuple(merged["features"]["scales"]),
            dog_sigmas=(dog[0], dog[1]),
            fusion=fusion,
            localize_mode=loc["mode"],
            nms_iou=loc["nms_iou"],
            merge_dist_frac=loc["merge_dist_frac"],
            canny_tau_low=loc["canny"]["tau_low"],
            canny_tau_high=loc["canny"]["tau_high"],
            canny_min_pixels=loc["canny"]["min_pixels"],
            known_value=known,
            model_path=merged["curiosity"]["model_path"],
            seed=merged["seed"],
            io=dict(merged["io"]),
            raw=merged,
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc


def default_config() -> PipelineConfig:
    return config_from_dict({})


def load_config(path: str) -> PipelineConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(doc)


def _canonical_numbers(node):
    """Collapse integral floats to ints so 2.0 and 2 hash identically.

    JSON has one number type; serializers in other languages are free to
    emit 2 where Python would emit 2.0, and the hash must not depend on
    which client produced the document.
    """
    if isinstance(node, dict):
        return {k: _canonical_numbers(v) for k, v in node.items()}
    if isinstance(node, list):
        return [_canonical_numbers(v) for v in node]
    if isinstance(node, float) and node.is_integer() and abs(node) <= 2**53:
        return int(node)
    return node


def config_hash(cfg: PipelineConfig) -> str:
    """sha256 over the canonical semantic config (io excluded)."""
    doc = copy.deepcopy(cfg.raw)
    doc.pop("io", None)
    canon = json.dumps(_canonical_numbers(doc), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
