"""Pipeline image operators: denoising, synthetic misalignment, registration.

All operators preserve the validity mask of their input. Boundary
handling is reflective for the denoisers (no histogram edge artifacts)
and constant-fill for translation, so that pixels invented by a shift
are marked invalid rather than silently blended into the statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateInputError, ParamError, ShapeError
from .metrics import Image2D

# Pixels whose bilinear support is not fully inside the source frame are
# dropped from the translated mask.
_MASK_KEEP = 0.999

# Radial Gaussian weight (cycles/pixel) applied to the normalized
# cross-power spectrum. Suppresses interpolation-distorted phases near
# Nyquist that otherwise bias subpixel peaks toward integer positions.
_FREQ_WEIGHT_SIGMA = 0.10
# Soft floor, relative to the spectrum maximum, for the phase
# normalization; keeps leakage-dominated bins from being whitened to
# full weight.
_SOFT_NORM = 1e-4


@dataclass(frozen=True)
class DenoiseParams:
    """Parameters for the three denoising strategies."""

    method: str = "gaussian"
    gaussian_sigma: float = 1.0
    nlm_patch: int = 5
    nlm_search: int = 11
    nlm_h: float | None = None  # default: 0.8 * estimated noise std
    tv_weight: float = 0.1
    tv_iterations: int = 100

    def __post_init__(self):
        if self.method not in ("gaussian", "nlm", "tv"):
            raise ParamError(f"unknown denoise method {self.method!r}")
        if self.gaussian_sigma <= 0 or self.tv_weight <= 0:
            raise ParamError("gaussian_sigma and tv_weight must be positive")
        if self.tv_iterations < 1:
            raise ParamError("tv_iterations must be >= 1")
        if self.nlm_patch < 1 or self.nlm_search < 1:
            raise ParamError("nlm_patch and nlm_search must be >= 1")
        if self.nlm_patch > self.nlm_search:
            raise ParamError("nlm_patch must not exceed nlm_search")
        if self.nlm_h is not None and self.nlm_h <= 0:
            raise ParamError("nlm_h must be positive")


@dataclass(frozen=True)
class Shift2D:
    """Subpixel translation in (row, column) order."""

    dy: float
    dx: float

    def __post_init__(self):
        if not (np.isfinite(self.dy) and np.isfinite(self.dx)):
            raise ParamError("shift components must be finite")


def estimate_noise_sigma(values: np.ndarray) -> float:
    """Robust noise std via the median absolute deviation of the Laplacian.

    The 3x3 Laplacian of i.i.d. noise has variance 20*sigma^2, so the
    MAD-scaled residual is divided back by sqrt(20).
    """
    lap = ndimage.laplace(values, mode="reflect")
    med = np.median(lap)
    mad = np.median(np.abs(lap - med))
    return float(1.4826 * mad / np.sqrt(20.0))


def _gaussian(values: np.ndarray, sigma: float) -> np.ndarray:
    return ndimage.gaussian_filter(values, sigma, mode="reflect")


def _nlm(values: np.ndarray, patch: int, search: int, h: float | None) -> np.ndarray:
    sigma = estimate_noise_sigma(values)
    if h is None:
        h = 0.8 * sigma
    h = max(h, 1e-12)
    pad = search // 2
    padded = np.pad(values, pad, mode="symmetric")
    acc = np.zeros_like(values)
    wsum = np.zeros_like(values)
    # Expected squared distance between matching patches is 2*sigma^2 of
    # pure noise; subtracting it keeps weights near 1 on true matches.
    noise_floor = 2.0 * sigma * sigma
    h2 = h * h
    n0, n1 = values.shape
    for dy in range(-pad, pad + 1):
        for dx in range(-pad, pad + 1):
            shifted = padded[pad + dy : pad + dy + n0, pad + dx : pad + dx + n1]
            dist2 = ndimage.uniform_filter((values - shifted) ** 2, patch, mode="reflect")
            w = np.exp(-np.maximum(dist2 - noise_floor, 0.0) / h2)
            acc += w * shifted
            wsum += w
    return acc / wsum


def _tv_chambolle(values: np.ndarray, weight: float, iterations: int) -> np.ndarray:
    """ROF denoising by Chambolle's dual projection, fixed iteration count."""
    p = np.zeros((2,) + values.shape)
    tau = 0.25
    f = values / weight
    gy = np.empty_like(values)
    gx = np.empty_like(values)
    for _ in range(iterations):
        div = np.zeros_like(values)
        div[:-1, :] += p[0, :-1, :]
        div[1:, :] -= p[0, :-1, :]
        div[:, :-1] += p[1, :, :-1]
        div[:, 1:] -= p[1, :, :-1]
        u = div - f
        gy.fill(0.0)
        gx.fill(0.0)
        gy[:-1, :] = u[1:, :] - u[:-1, :]
        gx[:, :-1] = u[:, 1:] - u[:, :-1]
        mag = np.sqrt(gy * gy + gx * gx)
        p[0] = (p[0] + tau * gy) / (1.0 + tau * mag)
        p[1] = (p[1] + tau * gx) / (1.0 + tau * mag)
    div = np.zeros_like(values)
    div[:-1, :] += p[0, :-1, :]
    div[1:, :] -= p[0, :-1, :]
    div[:, :-1] += p[1, :, :-1]
    div[:, 1:] -= p[1, :, :-1]
    return values - weight * div


def denoise(img: Image2D, params: DenoiseParams | None = None) -> Image2D:
    """Apply the selected denoiser to a normalized image; output clipped to [0,1]."""
    params = params or DenoiseParams()
    if params.method == "gaussian":
        out = _gaussian(img.values, params.gaussian_sigma)
    elif params.method == "nlm":
        out = _nlm(img.values, params.nlm_patch, params.nlm_search, params.nlm_h)
    else:
        out = _tv_chambolle(img.values, params.tv_weight, params.tv_iterations)
    out = np.clip(out, 0.0, 1.0)
    return Image2D(out, None if img.mask is None else img.mask.copy(), dict(img.meta))


def translate(img: Image2D, shift: Shift2D, fill: float = 0.0) -> Image2D:
    """Translate an image by (dy, dx) with bilinear interpolation.

    Vacated regions take ``fill`` and the mask is translated identically,
    so fill pixels are excluded from any downstream metric.
    """
    out = ndimage.shift(
        img.values, (shift.dy, shift.dx), order=1, mode="grid-constant", cval=fill, prefilter=False
    )
    mask_f = ndimage.shift(
        img.effective_mask().astype(np.float64),
        (shift.dy, shift.dx),
        order=1,
        mode="grid-constant",
        cval=0.0,
        prefilter=False,
    )
    return Image2D(out, mask_f > _MASK_KEEP, dict(img.meta))


def _upsampled_dft(data: np.ndarray, region: int, upsample: float, offsets: np.ndarray) -> np.ndarray:
    """Matrix-multiply DFT of a small upsampled neighborhood of the peak."""
    im2pi = 1j * 2 * np.pi
    for n_items, offset in zip(data.shape[::-1], offsets[::-1]):
        kernel = np.exp(
            -im2pi * ((np.arange(region) - offset)[:, None] * np.fft.fftfreq(n_items, upsample))
        )
        data = np.tensordot(kernel, data, axes=(1, -1))
    return data


def estimate_shift(reference: Image2D, moving: Image2D, upsample: int = 100) -> Shift2D:
    """Estimate the shift that maps ``moving`` onto ``reference``.

    Phase cross-correlation: integer peak of the inverse transform of
    the normalized cross-power spectrum, refined to 1/upsample pixel by
    a locally upsampled DFT around that peak. Both inputs are mean-
    subtracted and cosine-tapered first to suppress wraparound edges.
    """
    if reference.shape != moving.shape:
        raise ShapeError(f"image shapes differ: {reference.shape} vs {moving.shape}")
    if upsample < 1:
        raise ParamError(f"upsample must be >= 1, got {upsample}")
    ref = reference.values
    mov = moving.values
    if not ref.any() or not mov.any():
        raise DegenerateInputError("cannot register an all-zero image")
    h, w = ref.shape
    window = np.outer(np.hanning(h), np.hanning(w))
    f_ref = np.fft.fft2((ref - ref.mean()) * window)
    f_mov = np.fft.fft2((mov - mov.mean()) * window)
    cross = f_ref * np.conj(f_mov)
    cross /= np.abs(cross) + _SOFT_NORM * np.abs(cross).max() + np.finfo(float).tiny
    ky = np.fft.fftfreq(h)[:, None]
    kx = np.fft.fftfreq(w)[None, :]
    cross *= np.exp(-(ky * ky + kx * kx) / (2.0 * _FREQ_WEIGHT_SIGMA ** 2))

    corr = np.fft.ifft2(cross)
    peak = np.unravel_index(np.argmax(np.abs(corr)), corr.shape)
    shift = np.array(peak, dtype=np.float64)
    dims = np.array([h, w], dtype=np.float64)
    shift[shift > dims / 2] -= dims[shift > dims / 2]

    if upsample > 1:
        region = int(np.ceil(upsample * 1.5))
        dftshift = np.fix(region / 2.0)
        shift = np.round(shift * upsample) / upsample
        offsets = dftshift - shift * upsample
        local = _upsampled_dft(np.conj(cross), region, upsample, offsets).conj()
        sub_peak = np.unravel_index(np.argmax(np.abs(local)), local.shape)
        shift += (np.array(sub_peak, dtype=np.float64) - dftshift) / upsample
    return Shift2D(float(shift[0]), float(shift[1]))


def register(
    reference: Image2D,
    moving: Image2D,
    upsample: int = 100,
    refine_passes: int = 2,
    fill: float = 0.0,
) -> tuple[Image2D, Shift2D]:
    """Align ``moving`` to ``reference`` and return (registered, estimated shift).

    After the first estimate the residual is re-measured on the shifted
    image and folded into the total, so the applied correction nulls the
    estimator's own small bias. The moving image is resampled once, with
    the final total shift.
    """
    if refine_passes < 1:
        raise ParamError("refine_passes must be >= 1")
    total = np.zeros(2)
    current = moving
    for _ in range(refine_passes):
        est = estimate_shift(reference, current, upsample)
        total += (est.dy, est.dx)
        current = translate(moving, Shift2D(total[0], total[1]), fill)
    return current, Shift2D(float(total[0]), float(total[1]))
