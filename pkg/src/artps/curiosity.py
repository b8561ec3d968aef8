"""Region feature extraction, nonnegative linear curiosity scoring, and
disagreement-based uncertainty.

Five features per region: mean known-value confidence, mean reconstruction
error, mean fused anomaly, depth variance, and mean depth-gradient magnitude.
A nonnegative weight vector (learned by projected-gradient ridge regression)
turns the normalized features into a single curiosity score; the spread of
per-component region means gives an uncertainty estimate for the operator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from artps.depth import DepthMap, depth_gradient
from artps.localize import RegionHypothesis

FEATURE_ORDER = ("s_known", "s_recon", "s_anom", "depth_var", "roughness")
N_FEATURES = len(FEATURE_ORDER)

TRAIN_TOL = 1e-8
TRAIN_MAX_ITERS = 100_000


@dataclass(frozen=True)
class RegionFeatures:
    s_known: float
    s_recon: float
    s_anom: float
    depth_var: float
    roughness: float
    depth_valid: bool = True

    def __post_init__(self):
        vec = (self.s_known, self.s_recon, self.s_anom, self.depth_var, self.roughness)
        if not all(np.isfinite(v) for v in vec):
            raise ValueError("region features must be finite")
        if not 0.0 <= self.s_known <= 1.0:
            raise ValueError("s_known must lie in [0, 1]")
        if self.s_recon < 0 or self.depth_var < 0 or self.roughness < 0:
            raise ValueError("error/variance features must be nonnegative")

    def as_vector(self) -> np.ndarray:
        return np.array(
            [self.s_known, self.s_recon, self.s_anom, self.depth_var, self.roughness],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class CuriosityModel:
    """Weights plus the frozen normalization statistics they were trained with.

    feature_ranges is None for the untrained default model; callers then fall
    back to per-frame min-max normalization (flagged in reports).
    """

    alpha: tuple[float, float, float, float, float]
    lam: float
    norm_mode: str = "minmax"
    feature_ranges: tuple[tuple[float, float], ...] | None = None
    converged: bool = True

    def __post_init__(self):
        if len(self.alpha) != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} weights")
        if any(a < 0 for a in self.alpha):
            raise ValueError("curiosity weights must be nonnegative")
        if self.lam < 0:
            raise ValueError("ridge strength must be nonnegative")
        if self.norm_mode != "minmax":
            raise ValueError(f"unsupported norm_mode {self.norm_mode!r}")
        if self.feature_ranges is not None and len(self.feature_ranges) != N_FEATURES:
            raise ValueError("feature_ranges must cover every feature")


def default_model() -> CuriosityModel:
    w = 1.0 / N_FEATURES
    return CuriosityModel(alpha=(w,) * N_FEATURES, lam=0.0, feature_ranges=None)


@dataclass(frozen=True)
class ScoredRegion:
    hypothesis: RegionHypothesis
    features: RegionFeatures
    normalized: tuple[float, ...]
    curiosity: float
    uncertainty: float
    diagnostics: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class KnownValueConfig:
    mode: str = "constant"  # "constant" | "sidecar"
    value: float = 0.5
    path: str | None = None

    def __post_init__(self):
        if self.mode not in ("constant", "sidecar"):
            raise ValueError(f"unknown known-value mode {self.mode!r}")
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("constant known-value prior must lie in [0, 1]")


def known_value_provider(
    region_pixels: np.ndarray, cfg: KnownValueConfig, sidecar: np.ndarray | None = None
) -> float:
    """Mean classifier-style confidence over a region's pixel set.

    Sources: a constant prior, or a per-pixel confidence raster supplied as a
    sidecar input (no classifier is bundled; this is an injection point).
    """
    if cfg.mode == "constant":
        return float(cfg.value)
    if sidecar is None:
        raise ValueError("sidecar known-value mode requires a confidence raster")
    vals = sidecar[region_pixels[:, 0], region_pixels[:, 1]]
    return float(np.clip(np.asarray(vals, dtype=np.float64).mean(), 0.0, 1.0))


def compute_region_features(
    region_pixels: np.ndarray,
    recon_err: np.ndarray | None,
    fused: np.ndarray,
    depth: DepthMap | None,
    s_known: float = 0.5,
) -> RegionFeatures:
    """Exact per-region means of the five cue channels.

    region_pixels is an (n, 2) array of (row, col) indices. Depth features are
    zero (with depth_valid=False) when no depth, or no valid depth pixel,
    covers the region.
    """
    if region_pixels.size == 0:
        raise ValueError("cannot compute features for an empty region")
    rows = region_pixels[:, 0]
    cols = region_pixels[:, 1]
    s_anom = float(np.asarray(fused, dtype=np.float64)[rows, cols].mean())
    if recon_err is not None:
        s_recon = float(np.asarray(recon_err, dtype=np.float64)[rows, cols].mean())
    else:
        s_recon = 0.0
    depth_var = 0.0
    roughness = 0.0
    depth_valid = False
    if depth is not None:
        mask = depth.mask_or_full()
        sel = mask[rows, cols]
        if sel.any():
            d = depth.data.astype(np.float64)[rows[sel], cols[sel]]
            depth_var = float(np.mean((d - d.mean()) ** 2))
            gm = depth_gradient(depth).data.astype(np.float64)
            roughness = float(gm[rows[sel], cols[sel]].mean())
            depth_valid = True
    return RegionFeatures(
        s_known=float(s_known),
        s_recon=s_recon,
        s_anom=float(np.clip(s_anom, 0.0, 1.0)),
        depth_var=depth_var,
        roughness=roughness,
        depth_valid=depth_valid,
    )


def fit_normalization(raw: np.ndarray) -> tuple[tuple[float, float], ...]:
    """Per-feature (min, max) over a training feature matrix (n, 5)."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[1] != N_FEATURES:
        raise ValueError(f"expected an (n, {N_FEATURES}) feature matrix")
    return tuple((float(lo), float(hi)) for lo, hi in zip(raw.min(axis=0), raw.max(axis=0)))


def normalize_features(
    f: RegionFeatures, ranges: tuple[tuple[float, float], ...]
) -> np.ndarray:
    """Min-max to [0,1] using stored training ranges; out-of-range values clamp.

    A degenerate range (max == min) maps to 0.5: the feature carried no
    information in training, so it cannot order regions either way.
    """
    vec = f.as_vector()
    out = np.empty(N_FEATURES, dtype=np.float64)
    for k in range(N_FEATURES):
        lo, hi = ranges[k]
        span = hi - lo
        if span <= 0:
            out[k] = 0.5
        else:
            out[k] = np.clip((vec[k] - lo) / span, 0.0, 1.0)
    return out


def score(x: np.ndarray, model: CuriosityModel) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (N_FEATURES,):
        raise ValueError(f"expected a {N_FEATURES}-vector")
    return float(np.dot(np.asarray(model.alpha, dtype=np.float64), x))


def train_weights(
    x_mat: np.ndarray,
    y: np.ndarray,
    lam: float,
    feature_ranges: tuple[tuple[float, float], ...] | None = None,
) -> CuriosityModel:
    """Nonnegative ridge regression by projected gradient descent.

    Minimizes ||X a - y||^2 + lam ||a||^2 over a >= 0 with fixed step 1/L,
    L the largest eigenvalue of X^T X + lam I, from zero initialization.
    The problem is convex so the iterates are deterministic; if the step
    tolerance is not reached within the iteration budget the returned model
    carries converged=False rather than raising.
    """
    x_mat = np.asarray(x_mat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x_mat.ndim != 2 or x_mat.shape[1] != N_FEATURES:
        raise ValueError(f"expected an (n, {N_FEATURES}) design matrix")
    if x_mat.shape[0] != y.shape[0]:
        raise ValueError("design matrix and targets disagree on sample count")
    if x_mat.shape[0] < N_FEATURES:
        raise ValueError("need at least as many examples as features")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    if lam < 0:
        raise ValueError("ridge strength must be nonnegative")

    gram = x_mat.T @ x_mat + lam * np.eye(N_FEATURES)
    xty = x_mat.T @ y
    lip = float(np.linalg.eigvalsh(gram)[-1])
    if lip <= 0:
        # X is the zero matrix and lam = 0: any nonnegative a is optimal.
        return CuriosityModel(
            alpha=(0.0,) * N_FEATURES, lam=lam, feature_ranges=feature_ranges
        )
    step = 1.0 / lip
    alpha = np.zeros(N_FEATURES)
    converged = False
    for _ in range(TRAIN_MAX_ITERS):
        grad = gram @ alpha - xty
        nxt = np.maximum(alpha - step * grad, 0.0)
        delta = float(np.max(np.abs(nxt - alpha)))
        alpha = nxt
        if delta < TRAIN_TOL:
            converged = True
            break
    return CuriosityModel(
        alpha=tuple(float(a) for a in alpha),
        lam=lam,
        feature_ranges=feature_ranges,
        converged=converged,
    )


def uncertainty(component_means: np.ndarray) -> float:
    """Population standard deviation of the per-component region means."""
    vals = np.asarray(component_means, dtype=np.float64).reshape(-1)
    if vals.size == 0:
        raise ValueError("uncertainty requires at least one component score")
    return float(np.sqrt(np.mean((vals - vals.mean()) ** 2)))


def rank_regions(scored: list[ScoredRegion]) -> list[ScoredRegion]:
    """Descending curiosity; ties go to lower uncertainty, then lower id."""
    return sorted(
        scored, key=lambda s: (-s.curiosity, s.uncertainty, s.hypothesis.id)
    )


# ---------------------------------------------------------------------------
# Model persistence (plain JSON)


def save_model(model: CuriosityModel, path: str) -> None:
    doc = {
        "alpha": list(model.alpha),
        "lambda": model.lam,
        "norm_mode": model.norm_mode,
        "feature_ranges": (
            [list(r) for r in model.feature_ranges]
            if model.feature_ranges is not None
            else None
        ),
        "converged": model.converged,
        "feature_order": list(FEATURE_ORDER),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str) -> CuriosityModel:
    with open(path) as fh:
        doc = json.load(fh)
    order = doc.get("feature_order")
    if order is not None and tuple(order) != FEATURE_ORDER:
        raise ValueError("model feature order does not match this build")
    ranges = doc.get("feature_ranges")
    return CuriosityModel(
        alpha=tuple(float(a) for a in doc["alpha"]),
        lam=float(doc["lambda"]),
        norm_mode=doc.get("norm_mode", "minmax"),
        feature_ranges=(
            tuple((float(lo), float(hi)) for lo, hi in ranges)
            if ranges is not None
            else None
        ),
        converged=bool(doc.get("converged", True)),
    )
