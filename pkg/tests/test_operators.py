"""Denoiser, translation and registration contract tests."""

import numpy as np
import pytest
from scipy import ndimage

import oracles
from ctinfo import (
    DegenerateInputError,
    DenoiseParams,
    Image2D,
    ParamError,
    Shift2D,
    denoise,
    estimate_shift,
    joint_histogram,
    mutual_information,
    normalize,
    register,
    translate,
)
from conftest import as_image


def textured(n=128, seed=42, sigma=3.0):
    rng = np.random.default_rng(seed)
    base = ndimage.gaussian_filter(rng.standard_normal((n, n)), sigma)
    base = (base - base.min()) / (base.max() - base.min())
    return Image2D(base)


def projection_like(n=256, seed=42, sigma=4.0):
    """Textured object inside the field of view, background at the edges."""
    rng = np.random.default_rng(seed)
    base = ndimage.gaussian_filter(rng.standard_normal((n, n)), sigma)
    yy, xx = np.mgrid[0:n, 0:n]
    c = (n - 1) / 2
    envelope = np.clip(1 - ((yy - c) / (0.42 * n)) ** 2 - ((xx - c) / (0.46 * n)) ** 2, 0, 1)
    img = envelope * (0.5 + 2.0 * base / base.std())
    return Image2D((img - img.min()) / (img.max() - img.min()))


# --- denoise -------------------------------------------------------------


@pytest.mark.parametrize("method", ["gaussian", "nlm", "tv"])
def test_denoisers_fix_constant_images(method):
    img = as_image(np.full((32, 32), 0.5))
    out = denoise(img, DenoiseParams(method=method))
    np.testing.assert_allclose(out.values, 0.5, atol=1e-9)


def test_gaussian_matches_direct_convolution_oracle():
    rng = np.random.default_rng(5)
    grid = rng.random((7, 7))
    img = as_image(grid)
    out = denoise(img, DenoiseParams(method="gaussian", gaussian_sigma=1.0))
    expected = np.array(oracles.gaussian_blur_oracle(grid.tolist(), 1.0))
    np.testing.assert_allclose(out.values, expected, atol=1e-12)


def test_gaussian_single_pixel_mass_conserved():
    grid = np.zeros((7, 7))
    grid[3, 3] = 1.0
    out = denoise(as_image(grid), DenoiseParams(method="gaussian", gaussian_sigma=1.0))
    expected = np.array(oracles.gaussian_blur_oracle(grid.tolist(), 1.0))
    np.testing.assert_allclose(out.values, expected, atol=1e-12)
    assert out.values.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("method", ["gaussian", "tv"])
def test_smoothers_do_not_expand_value_range(method):
    img = textured(64)
    out = denoise(img, DenoiseParams(method=method))
    assert out.values.min() >= img.values.min() - 1e-9
    assert out.values.max() <= img.values.max() + 1e-9


def test_nlm_reduces_noise_variance():
    rng = np.random.default_rng(0)
    clean = textured(96, seed=9).values
    noisy = np.clip(clean + rng.normal(0, 0.05, clean.shape), 0, 1)
    out = denoise(as_image(noisy), DenoiseParams(method="nlm"))
    assert np.mean((out.values - clean) ** 2) < np.mean((noisy - clean) ** 2)


def test_tv_reduces_total_variation():
    rng = np.random.default_rng(3)
    noisy = np.clip(textured(64).values + rng.normal(0, 0.08, (64, 64)), 0, 1)
    out = denoise(as_image(noisy), DenoiseParams(method="tv")).values

    def tv(a):
        return np.abs(np.diff(a, axis=0)).sum() + np.abs(np.diff(a, axis=1)).sum()

    assert tv(out) < tv(noisy)


def test_denoise_params_validation():
    with pytest.raises(ParamError):
        DenoiseParams(method="median")
    with pytest.raises(ParamError):
        DenoiseParams(nlm_patch=7, nlm_search=5)
    with pytest.raises(ParamError):
        DenoiseParams(tv_weight=-0.1)


def test_denoise_preserves_mask():
    mask = np.zeros((16, 16), bool)
    mask[4:12, 4:12] = True
    img = as_image(np.random.default_rng(0).random((16, 16)), mask)
    out = denoise(img, DenoiseParams(method="gaussian"))
    np.testing.assert_array_equal(out.effective_mask(), mask)


# --- translate -----------------------------------------------------------


def test_translate_zero_shift_is_identity(textured_image):
    out = translate(textured_image, Shift2D(0.0, 0.0))
    np.testing.assert_array_equal(out.values, textured_image.values)
    assert out.effective_mask().all()


def test_translate_integer_row_shift():
    img = as_image([[1.0, 2.0], [3.0, 4.0]])
    out = translate(img, Shift2D(1.0, 0.0))
    np.testing.assert_array_equal(out.values, [[0.0, 0.0], [1.0, 2.0]])
    np.testing.assert_array_equal(out.effective_mask(), [[False, False], [True, True]])


def test_translate_half_pixel_bilinear():
    img = as_image([[0.0], [1.0], [0.0]])
    out = translate(img, Shift2D(0.5, 0.0))
    np.testing.assert_allclose(out.values[1:, 0], [0.5, 0.5], atol=1e-12)


def test_translate_matches_bilinear_oracle():
    rng = np.random.default_rng(8)
    grid = rng.random((6, 5))
    for dy, dx in [(1.25, -0.5), (-0.75, 2.0), (0.3, 0.7)]:
        out = translate(as_image(grid), Shift2D(dy, dx), fill=0.0)
        expected = np.array(oracles.bilinear_translate_oracle(grid.tolist(), dy, dx))
        np.testing.assert_allclose(out.values, expected, atol=1e-12)


def test_translate_round_trip_integer_exact(textured_image):
    fwd = translate(textured_image, Shift2D(3, -2))
    back = translate(fwd, Shift2D(-3, 2))
    interior = back.effective_mask()
    np.testing.assert_allclose(
        back.values[interior], textured_image.values[interior], atol=1e-6
    )


def test_translate_round_trip_fractional_interior():
    # gentle curvature keeps the double-bilinear error under the 1e-3 budget
    n = 128
    yy, xx = np.mgrid[0:n, 0:n]
    field = 0.5 + 0.3 * np.cos(2 * np.pi * yy / 100.0) * np.cos(2 * np.pi * xx / 100.0)
    img = as_image(field)
    fwd = translate(img, Shift2D(1.5, -0.5))
    back = translate(fwd, Shift2D(-1.5, 0.5))
    interior = ndimage.binary_erosion(back.effective_mask(), iterations=2)
    assert np.abs(back.values - img.values)[interior].max() < 1e-3


# --- estimate_shift / register -------------------------------------------


def test_estimate_shift_zero_for_identical():
    img = textured(128)
    est = estimate_shift(img, img)
    assert est.dy == pytest.approx(0.0, abs=1e-9)
    assert est.dx == pytest.approx(0.0, abs=1e-9)


def test_estimate_shift_recovers_integer_shift():
    img = projection_like(256)
    mov = translate(img, Shift2D(5, -3))
    est = estimate_shift(img, mov, upsample=100)
    assert np.hypot(est.dy + 5, est.dx - 3) < 0.05


def test_estimate_shift_recovers_subpixel_shift():
    img = projection_like(256)
    mov = translate(img, Shift2D(2.25, -1.5))
    est = estimate_shift(img, mov, upsample=100)
    assert np.hypot(est.dy + 2.25, est.dx - 1.5) < 0.05


def test_estimate_shift_exact_spectral_shift_within_refinement_step():
    # band-limited phantom, shift applied as an exact phase ramp
    img = projection_like(256)
    f = np.fft.fft2(img.values)
    ky = np.fft.fftfreq(256)[:, None]
    kx = np.fft.fftfreq(256)[None, :]
    for dy, dx in [(1.3, -2.6), (0.35, 0.85), (2.25, -1.5)]:
        shifted = np.real(np.fft.ifft2(f * np.exp(-2j * np.pi * (ky * dy + kx * dx))))
        est = estimate_shift(img, Image2D(shifted), upsample=100)
        assert np.hypot(est.dy + dy, est.dx + dx) <= 1.0 / 100 + 0.01


def test_estimate_shift_noisy_20db():
    rng = np.random.default_rng(7)
    img = projection_like(256)
    noise = rng.standard_normal((256, 256)) * img.values.std() / 10.0
    mov = Image2D(translate(img, Shift2D(3.3, -2.7)).values + noise)
    est = estimate_shift(img, mov, upsample=100)
    assert np.hypot(est.dy + 3.3, est.dx - 2.7) < 0.05


def test_estimate_shift_rejects_all_zero():
    with pytest.raises(DegenerateInputError):
        estimate_shift(as_image(np.zeros((32, 32))), as_image(np.zeros((32, 32))))


def test_register_aligned_pair_is_noop():
    img = textured(128)
    reg, est = register(img, img)
    assert abs(est.dy) < 1e-9 and abs(est.dx) < 1e-9
    np.testing.assert_allclose(reg.values, img.values, atol=1e-12)


def test_register_improves_mutual_information():
    img = projection_like(192, seed=11)
    base = normalize(img)
    mis = translate(base, Shift2D(5, -3))
    reg, est = register(base, mis)
    mi_mis = mutual_information(joint_histogram(mis, base))
    mi_reg = mutual_information(joint_histogram(reg, base))
    assert mi_reg > mi_mis
    assert np.hypot(est.dy + 5, est.dx - 3) < 0.05
