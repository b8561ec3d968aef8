"""Raster container, normalization, color split, resizing, and PNG I/O."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artps.raster import (
    LUMA_WEIGHTS,
    Raster,
    minmax_normalize,
    read_png,
    read_png_raw16,
    resize_bicubic,
    rgb_to_luma_sat,
    write_png,
)


def test_minmax_pinned_three_values():
    r = minmax_normalize(Raster(np.array([[2.0, 4.0, 6.0]], dtype=np.float32)))
    assert np.allclose(r.data, [[0.0, 0.5, 1.0]])


def test_minmax_constant_maps_to_zeros():
    r = minmax_normalize(Raster(np.full((4, 5), 3.7, dtype=np.float32)))
    assert np.array_equal(r.data, np.zeros((4, 5), dtype=np.float32))


def test_minmax_random_hits_unit_range(rng):
    r = minmax_normalize(Raster(rng.normal(size=(8, 8)).astype(np.float32)))
    assert r.data.min() == 0.0
    assert r.data.max() == 1.0
    assert np.all((r.data >= 0.0) & (r.data <= 1.0))


@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, width=32),
        min_size=2,
        max_size=64,
    )
)
def test_minmax_idempotent_and_order_preserving(vals):
    a = np.array(vals, dtype=np.float32).reshape(1, -1)
    once = minmax_normalize(Raster(a))
    twice = minmax_normalize(once)
    assert np.allclose(once.data, twice.data, atol=1e-6)
    order = np.argsort(a[0], kind="stable")
    assert np.all(np.diff(once.data[0][order]) >= -1e-7)


def test_luma_sat_gray_pixel_has_zero_saturation():
    img = Raster(np.full((3, 3, 3), 0.42, dtype=np.float32))
    ls = rgb_to_luma_sat(img)
    assert np.allclose(ls.saturation.data, 0.0, atol=1e-5)
    assert np.allclose(ls.luminance.data, 0.42, atol=1e-6)


def test_luma_sat_pure_red():
    img = np.zeros((2, 2, 3), dtype=np.float32)
    img[:, :, 0] = 1.0
    ls = rgb_to_luma_sat(Raster(img))
    assert np.allclose(ls.luminance.data, LUMA_WEIGHTS[0], atol=1e-6)
    assert np.allclose(ls.saturation.data, 1.0, atol=1e-5)


def test_luma_sat_black():
    ls = rgb_to_luma_sat(Raster(np.zeros((2, 2, 3), dtype=np.float32)))
    assert np.allclose(ls.luminance.data, 0.0)
    assert np.allclose(ls.saturation.data, 0.0)


def test_luma_sat_outputs_in_unit_range(rng):
    img = Raster(rng.uniform(0, 1, (6, 7, 3)).astype(np.float32))
    ls = rgb_to_luma_sat(img)
    for ch in (ls.luminance.data, ls.saturation.data):
        assert ch.min() >= 0.0
        assert ch.max() <= 1.0 + 1e-6


def test_resize_constant_upscale_exact():
    out = resize_bicubic(Raster(np.full((8, 8), 0.3, dtype=np.float32)), 16, 16)
    assert out.data.shape == (16, 16)
    assert np.allclose(out.data, 0.3, atol=1e-6)


def test_resize_identity_is_noop(rng):
    img = Raster(rng.uniform(0, 1, (9, 11)).astype(np.float32))
    out = resize_bicubic(img, 11, 9)
    assert np.max(np.abs(out.data - img.data)) < 1e-6


def test_resize_upscale_clamped_to_source_range(rng):
    a = np.zeros((8, 8), dtype=np.float32)
    a[:, 4:] = 1.0  # sharp step would overshoot without clamping
    out = resize_bicubic(Raster(a), 32, 32)
    assert out.data.min() >= 0.0
    assert out.data.max() <= 1.0


def test_resize_target_too_small_errors():
    with pytest.raises(ValueError):
        resize_bicubic(Raster(np.zeros((8, 8), dtype=np.float32)), 2, 8)
    with pytest.raises(ValueError):
        resize_bicubic(Raster(np.zeros((8, 8), dtype=np.float32)), 8, 3)


def test_resize_rgb_channelwise(rng):
    img = Raster(rng.uniform(0, 1, (8, 8, 3)).astype(np.float32))
    out = resize_bicubic(img, 12, 10)
    assert out.data.shape == (10, 12, 3)
    for c in range(3):
        ref = resize_bicubic(Raster(img.data[:, :, c]), 12, 10)
        assert np.allclose(out.data[:, :, c], ref.data, atol=1e-6)


def test_png_roundtrip_8bit_rgb(tmp_path, rng):
    img = Raster(rng.uniform(0, 1, (12, 9, 3)).astype(np.float32))
    path = tmp_path / "img.png"
    write_png(img, path, bit_depth=8)
    back = read_png(path)
    assert back.data.shape == img.data.shape
    assert np.max(np.abs(back.data - img.data)) <= 0.5 / 255.0 + 1e-6


def test_png_roundtrip_16bit_gray(tmp_path, rng):
    img = Raster(rng.uniform(0, 1, (7, 5)).astype(np.float32))
    path = tmp_path / "img16.png"
    write_png(img, path, bit_depth=16)
    back = read_png(path)
    assert np.max(np.abs(back.data - img.data)) <= 0.5 / 65535.0 + 1e-6


def test_png_raw16_returns_counts(tmp_path):
    counts = np.array([[0, 1000], [32768, 65535]], dtype=np.uint16)
    img = Raster((counts.astype(np.float32) / 65535.0))
    path = tmp_path / "raw.png"
    write_png(img, path, bit_depth=16)
    assert np.array_equal(read_png_raw16(path), counts)


def test_write_png_16bit_rejects_rgb(tmp_path):
    img = Raster(np.zeros((4, 4, 3), dtype=np.float32))
    with pytest.raises(ValueError):
        write_png(img, tmp_path / "x.png", bit_depth=16)


def test_raster_rejects_nonfinite_and_empty():
    with pytest.raises(ValueError):
        Raster(np.array([[np.nan, 0.0]], dtype=np.float32))
    with pytest.raises(ValueError):
        Raster(np.zeros((0, 4), dtype=np.float32))
