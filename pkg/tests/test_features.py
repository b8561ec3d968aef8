"""Anomaly cue maps: gradients, blob filters, suppression terms, patch models."""

import numpy as np
import pytest
from scipy import ndimage

import oracles
from artps.depth import DepthMap
from artps.features import (
    SIGMA_FLOOR,
    ComponentMap,
    PatchRecipe,
    PatchStatsModel,
    PcaReconModel,
    depth_components,
    difference_of_gaussians,
    fit_patch_pca,
    fit_patch_stats,
    gradient_magnitude,
    load_patch_models,
    mahalanobis_distances,
    mahalanobis_map,
    make_component,
    multiscale_laplacian,
    patch_descriptors,
    recon_error_map,
    save_patch_models,
    sobel_magnitude,
    suppression_maps,
)
from artps.raster import Raster, rgb_to_luma_sat


# ---------------------------------------------------------------------------
# gradient magnitude

def test_gradient_constant_is_zero():
    comp = gradient_magnitude(Raster(np.full((6, 6), 0.5, dtype=np.float32)))
    assert np.array_equal(comp.map.data, np.zeros((6, 6), dtype=np.float32))
    assert comp.raw_range == (0.0, 0.0)


def test_gradient_vertical_step_peaks_on_edge_columns():
    a = np.zeros((8, 10), dtype=np.float32)
    a[:, 5:] = 1.0
    comp = gradient_magnitude(Raster(a))
    cols = np.argwhere(comp.map.data == comp.map.data.max())[:, 1]
    assert set(cols.tolist()) <= {4, 5}
    assert comp.map.data.max() == 1.0


def test_sobel_matches_explicit_kernels(rng):
    a = rng.uniform(0, 1, (5, 5))
    assert np.max(np.abs(sobel_magnitude(a) - oracles.sobel_reference(a))) <= 1e-9


# ---------------------------------------------------------------------------
# multiscale |LoG| and DoG

def test_mslap_constant_is_zero():
    comp = multiscale_laplacian(Raster(np.full((16, 16), 0.3, dtype=np.float32)), (1.0, 2.0))
    assert np.array_equal(comp.map.data, np.zeros((16, 16), dtype=np.float32))


def test_mslap_is_mean_of_per_scale_abs_log(rng):
    a = rng.uniform(0, 1, (20, 20)).astype(np.float32)
    scales = (1.0, 2.0, 4.0)
    comp = multiscale_laplacian(Raster(a), scales)
    raw = np.mean(
        [np.abs(ndimage.gaussian_laplace(a.astype(np.float64), s, mode="nearest")) for s in scales],
        axis=0,
    )
    assert np.allclose(comp.map.data, make_component("x", raw).map.data, atol=1e-6)


def test_mslap_gaussian_blob_peaks_at_center():
    yy, xx = np.mgrid[0:33, 0:33].astype(np.float64)
    blob = np.exp(-((yy - 16) ** 2 + (xx - 16) ** 2) / (2 * 3.0**2))
    comp = multiscale_laplacian(Raster(blob.astype(np.float32)), (2.0, 3.0))
    peak = np.unravel_index(np.argmax(comp.map.data), comp.map.data.shape)
    assert abs(peak[0] - 16) <= 1 and abs(peak[1] - 16) <= 1


def test_dog_equal_sigmas_is_zero(rng):
    a = rng.uniform(0, 1, (12, 12)).astype(np.float32)
    comp = difference_of_gaussians(Raster(a), 2.0, 2.0)
    assert np.array_equal(comp.map.data, np.zeros((12, 12), dtype=np.float32))


def test_dog_impulse_reproduces_kernel_difference():
    a = np.zeros((21, 21), dtype=np.float32)
    a[10, 10] = 1.0
    comp = difference_of_gaussians(Raster(a), 1.0, 2.5)
    g1 = ndimage.gaussian_filter(a.astype(np.float64), 1.0, mode="nearest")
    g2 = ndimage.gaussian_filter(a.astype(np.float64), 2.5, mode="nearest")
    ref = make_component("x", np.abs(g1 - g2))
    assert np.allclose(comp.map.data, ref.map.data, atol=1e-6)


def test_dog_sigma_order_enforced(rng):
    with pytest.raises(ValueError):
        difference_of_gaussians(Raster(np.zeros((8, 8), dtype=np.float32)), 3.0, 1.0)


# ---------------------------------------------------------------------------
# suppression terms

def test_suppression_two_level_image_hits_exp_half():
    a = np.empty((4, 4), dtype=np.float32)
    a[:, :2] = 0.3
    a[:, 2:] = 0.7  # every pixel sits exactly at mean +/- std
    ls = rgb_to_luma_sat(Raster(np.repeat(a[:, :, None], 3, axis=2)))
    sup = suppression_maps(ls)
    assert np.allclose(sup.shadow.data, np.exp(-0.5), atol=1e-4)


def test_suppression_constant_is_all_ones():
    img = Raster(np.full((4, 4, 3), 0.5, dtype=np.float32))
    sup = suppression_maps(rgb_to_luma_sat(img))
    assert np.allclose(sup.shadow.data, 1.0, atol=1e-6)
    assert np.allclose(sup.specular.data, 1.0, atol=1e-6)
    mu_l, sd_l, mu_s, sd_s = sup.stats
    assert sd_l == SIGMA_FLOOR and sd_s == SIGMA_FLOOR
    assert abs(mu_l - 0.5) < 1e-6


def test_suppression_value_one_at_the_mean(rng):
    img = Raster(rng.uniform(0, 1, (8, 8, 3)).astype(np.float32))
    ls = rgb_to_luma_sat(img)
    sup = suppression_maps(ls)
    mu_l = sup.stats[0]
    lum = ls.luminance.data.astype(np.float64)
    closest = np.unravel_index(np.argmin(np.abs(lum - mu_l)), lum.shape)
    assert sup.shadow.data[closest] == sup.shadow.data.max()


# ---------------------------------------------------------------------------
# Mahalanobis patch statistics

def _manual_stats_model(feats: np.ndarray, recipe: PatchRecipe) -> PatchStatsModel:
    mu = feats.mean(axis=0)
    diff = feats - mu
    sigma = diff.T @ diff / feats.shape[0] + 1e-12 * np.eye(feats.shape[1])
    return PatchStatsModel(
        mu=mu, sigma=sigma, chol=np.linalg.cholesky(sigma),
        recipe=recipe, n_reference=feats.shape[0],
    )


def test_mahalanobis_identity_covariance_is_euclidean(rng):
    d = PatchRecipe().dim
    model = PatchStatsModel(
        mu=np.zeros(d), sigma=np.eye(d), chol=np.eye(d),
        recipe=PatchRecipe(), n_reference=100,
    )
    feats = rng.normal(size=(20, d))
    got = mahalanobis_distances(feats, model)
    assert np.allclose(got, np.linalg.norm(feats, axis=1), atol=1e-10)


def test_mahalanobis_zero_at_the_mean(rng):
    d = PatchRecipe().dim
    mu = rng.normal(size=d)
    model = PatchStatsModel(
        mu=mu, sigma=np.eye(d), chol=np.eye(d), recipe=PatchRecipe(), n_reference=10,
    )
    assert mahalanobis_distances(mu[None, :], model)[0] <= 1e-12


def test_mahalanobis_two_dim_explicit_inverse(rng):
    feats = rng.normal(size=(10, 2)) @ np.array([[1.0, 0.4], [0.0, 0.8]])
    mu = feats.mean(axis=0)
    diff = feats - mu
    sigma = diff.T @ diff / 10 + 1e-12 * np.eye(2)
    model = PatchStatsModel(
        mu=mu, sigma=sigma, chol=np.linalg.cholesky(sigma),
        recipe=PatchRecipe(), n_reference=10,
    )
    got = mahalanobis_distances(feats, model)
    inv = np.linalg.inv(sigma)
    want = np.sqrt(np.einsum("ij,jk,ik->i", diff, inv, diff))
    assert np.max(np.abs(got - want)) <= 1e-8


def test_mahalanobis_affine_invariant(rng):
    d = 4
    feats = rng.normal(size=(60, d))
    recipe = PatchRecipe()
    base = mahalanobis_distances(feats, _manual_stats_model(feats, recipe))
    amat = rng.normal(size=(d, d)) + 2.0 * np.eye(d)  # well conditioned
    shift = rng.normal(size=d)
    moved = feats @ amat.T + shift
    out = mahalanobis_distances(moved, _manual_stats_model(moved, recipe))
    assert np.max(np.abs(out - base)) <= 1e-6


def test_fit_patch_stats_applies_relative_ridge(rng):
    tile = rng.uniform(0, 1, (24, 24)).astype(np.float64)
    recipe = PatchRecipe(patch=8, stride=4, bins=4, ridge_scale=0.01)
    model = fit_patch_stats([tile], recipe)
    feats = patch_descriptors(tile, recipe)[2]
    mu = feats.mean(axis=0)
    diff = feats - mu
    raw_sigma = diff.T @ diff / feats.shape[0]
    lam = 0.01 * np.trace(raw_sigma) / recipe.dim
    assert np.allclose(model.mu, mu, atol=1e-12)
    assert np.allclose(model.sigma, raw_sigma + lam * np.eye(recipe.dim), atol=1e-12)
    assert model.n_reference == feats.shape[0]


def test_mahalanobis_map_flags_inserted_anomaly(rng):
    base = rng.uniform(0.4, 0.6, (64, 64)).astype(np.float32)
    model = fit_patch_stats([base.astype(np.float64)], PatchRecipe())
    test = base.copy()
    test[28:36, 28:36] = 1.0  # bright square unlike the reference texture
    comp = mahalanobis_map(Raster(test), model)
    inside = comp.map.data[26:38, 26:38].mean()
    outside = comp.map.data[:16, :16].mean()
    assert inside > outside


# ---------------------------------------------------------------------------
# patch-PCA reconstruction error

def test_pca_k0_error_is_distance_to_mean(rng):
    a = rng.uniform(0, 1, (20, 20)).astype(np.float32)
    model = fit_patch_pca([a.astype(np.float64)], 0, patch=4, stride=2)
    comp = recon_error_map(Raster(a), model)

    # independent overlap-add with recon == mean
    acc = np.zeros((20, 20))
    cnt = np.zeros((20, 20))
    pos = [0, 2, 4, 6, 8, 10, 12, 14, 16]
    mean = model.mean.reshape(4, 4)
    for y0 in pos:
        for x0 in pos:
            patch = a[y0 : y0 + 4, x0 : x0 + 4].astype(np.float64)
            err = np.abs(patch - mean)
            acc[y0 : y0 + 4, x0 : x0 + 4] += err
            cnt[y0 : y0 + 4, x0 : x0 + 4] += 1.0
    ref = make_component("x", acc / np.maximum(cnt, 1.0))
    assert np.allclose(comp.map.data, ref.map.data, atol=1e-6)
    assert np.allclose(comp.denormalized(), ref.denormalized(), atol=1e-9)


def test_pca_full_rank_reconstructs_exactly(rng):
    a = rng.uniform(0, 1, (24, 24)).astype(np.float32)
    model = fit_patch_pca([a.astype(np.float64)], 16, patch=4, stride=2)
    comp = recon_error_map(Raster(a), model)
    assert float(np.max(comp.denormalized())) <= 1e-8


def test_pca_error_non_increasing_in_k(rng):
    a = rng.uniform(0, 1, (32, 32)).astype(np.float32)
    means = []
    for k in (0, 1, 2, 4, 8, 16):
        model = fit_patch_pca([a.astype(np.float64)], k, patch=4, stride=2)
        means.append(float(np.mean(recon_error_map(Raster(a), model).denormalized())))
    assert all(b <= a0 + 1e-9 for a0, b in zip(means, means[1:]))


def test_pca_reference_error_below_held_out(rng):
    ref_img = rng.uniform(0.4, 0.6, (32, 32))
    held = np.clip(ref_img + 0.3 * np.sin(np.arange(32) / 2.0)[None, :], 0, 1)
    model = fit_patch_pca([ref_img], 4, patch=4, stride=2)
    e_ref = float(np.mean(recon_error_map(Raster(ref_img.astype(np.float32)), model).denormalized()))
    e_held = float(np.mean(recon_error_map(Raster(held.astype(np.float32)), model).denormalized()))
    assert e_ref <= e_held


def test_pca_basis_orthonormal(rng):
    a = rng.uniform(0, 1, (32, 32))
    model = fit_patch_pca([a], 6, patch=4, stride=2)
    gram = model.basis @ model.basis.T
    assert np.max(np.abs(gram - np.eye(6))) <= 1e-6


def test_pca_k_out_of_range_errors(rng):
    a = rng.uniform(0, 1, (16, 16))
    with pytest.raises(ValueError):
        fit_patch_pca([a], 17, patch=4, stride=2)
    with pytest.raises(ValueError):
        fit_patch_pca([a], -1, patch=4, stride=2)


# ---------------------------------------------------------------------------
# depth cues

def test_depth_components_constant_are_zero():
    comps = depth_components(DepthMap(np.full((8, 8), 2.0, dtype=np.float32)))
    by_name = {c.name: c for c in comps}
    assert set(by_name) == {"depth_grad", "depth_lap"}
    assert np.array_equal(by_name["depth_grad"].map.data, np.zeros((8, 8), dtype=np.float32))
    assert np.array_equal(by_name["depth_lap"].map.data, np.zeros((8, 8), dtype=np.float32))


def test_depth_grad_cliff_peaks_along_cliff():
    a = np.full((10, 10), 1.0, dtype=np.float32)
    a[:, 5:] = 2.0
    comps = depth_components(DepthMap(a))
    grad = next(c for c in comps if c.name == "depth_grad")
    peak_cols = np.argwhere(grad.map.data == grad.map.data.max())[:, 1]
    assert set(peak_cols.tolist()) <= {4, 5}


# ---------------------------------------------------------------------------
# serialization

def test_patch_models_roundtrip(tmp_path, rng):
    tile = rng.uniform(0, 1, (24, 24))
    recipe = PatchRecipe(patch=8, stride=4, bins=4, ridge_scale=0.01)
    stats = fit_patch_stats([tile], recipe)
    pca = fit_patch_pca([tile], 3, patch=8, stride=4)
    path = tmp_path / "models.apm1"
    save_patch_models(path, stats=stats, pca=pca)
    stats2, pca2 = load_patch_models(path)
    assert np.array_equal(stats2.mu, stats.mu)
    assert np.array_equal(stats2.sigma, stats.sigma)
    assert stats2.recipe == recipe
    assert stats2.n_reference == stats.n_reference
    assert np.array_equal(pca2.mean, pca.mean)
    assert np.array_equal(pca2.basis, pca.basis)
    assert (pca2.patch, pca2.stride) == (8, 4)


def test_patch_models_partial_blobs(tmp_path, rng):
    tile = rng.uniform(0, 1, (16, 16))
    pca = fit_patch_pca([tile], 2, patch=4, stride=2)
    path = tmp_path / "pca_only.apm1"
    save_patch_models(path, pca=pca)
    stats2, pca2 = load_patch_models(path)
    assert stats2 is None
    assert pca2.k == 2


def test_patch_models_bad_magic_errors(tmp_path):
    path = tmp_path / "bad.apm1"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError, match="APM1"):
        load_patch_models(path)


def test_component_map_denormalized_restores_raw(rng):
    raw = rng.uniform(3.0, 9.0, (6, 6))
    comp = make_component("gradient", raw)
    assert comp.raw_range == (pytest.approx(raw.min()), pytest.approx(raw.max()))
    assert np.allclose(comp.denormalized(), raw, atol=1e-6)


def test_component_map_rejects_multichannel():
    with pytest.raises(ValueError):
        ComponentMap("x", Raster(np.zeros((4, 4, 3), dtype=np.float32)), (0.0, 1.0))
