"""Parallel-beam sinogram construction, FBP and SART reconstruction.

The forward projector distributes each pixel's mass onto the detector
with linear weights (2x2 subpixel subdivision), which conserves total
mass exactly per angle and keeps profiles rotation-stable at diagonal
angles. Backprojection gathers per-pixel detector samples by linear
interpolation; FBP filters with a ramp kernel constructed in real space
to avoid the DC bias of a naive |f| filter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParamError, ShapeError
from .metrics import (
    HistogramSpec,
    Image2D,
    NormalizationSpec,
    entropy,
    histogram,
    joint_histogram,
    mutual_information,
    normalize,
    symmetric_kl,
)

# Pixel subdivision factor of the forward projector. 2 is enough to hold
# per-angle profile ripple at 45 degrees below 0.2% of peak.
_SUBPIXEL = 2


@dataclass
class Sinogram:
    """Detector-bin x angle grid of projection values."""

    values: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.angles = np.asarray(self.angles, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeError(f"sinogram values must be 2-D, got {self.values.shape}")
        if self.angles.ndim != 1 or self.angles.size != self.values.shape[1]:
            raise ShapeError(
                f"angle count {self.angles.size} != sinogram columns {self.values.shape[1]}"
            )
        if self.angles.size > 1 and not np.all(np.diff(self.angles) > 0):
            raise ParamError("angles must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ParamError("sinogram values must be finite")

    @property
    def detectors(self) -> int:
        return self.values.shape[0]


@dataclass
class ReconConfig:
    method: str = "fbp"
    grid_size: int = 0  # 0: use detector count
    sart_iterations: int = 5
    sart_relaxation: float = 1.0
    circular_mask: bool = True

    def __post_init__(self):
        if self.method not in ("fbp", "sart"):
            raise ParamError(f"unknown reconstruction method {self.method!r}")
        if self.grid_size < 0:
            raise ParamError("grid_size must be positive (or 0 for detector count)")
        if self.sart_iterations < 1:
            raise ParamError("sart_iterations must be >= 1")
        if not (0.0 < self.sart_relaxation < 2.0):
            raise ParamError("sart_relaxation must be in (0, 2)")


@dataclass
class ReconComparison:
    """Information metrics between two reconstructions of the same data."""

    entropy_a: float
    entropy_b: float
    mutual_info: float
    sym_kl: float
    extras: dict = field(default_factory=dict)


def build_sinogram(
    stack: list[Image2D],
    band_center_row: int,
    band_height: int,
    arc: tuple[float, float] = (0.0, np.pi),
) -> Sinogram:
    """Average a horizontal band of each projection into a sinogram column.

    Projections become angle columns in stack order, with angles spread
    uniformly over ``arc`` (endpoint excluded).
    """
    if not stack:
        raise ParamError("empty projection stack")
    width = stack[0].width
    height = stack[0].height
    half = band_height // 2
    lo = band_center_row - half
    hi = lo + band_height
    if band_height < 1 or lo < 0 or hi > height:
        raise ParamError(
            f"band rows [{lo}, {hi}) outside image height {height}"
        )
    cols = []
    for img in stack:
        if img.width != width or img.height != height:
            raise ShapeError("projections must share dimensions")
        cols.append(img.values[lo:hi, :].mean(axis=0))
    angles = np.linspace(arc[0], arc[1], len(stack), endpoint=False)
    return Sinogram(np.stack(cols, axis=1), angles)


def _pixel_coords(n: int):
    center = (n - 1) / 2.0
    yy, xx = np.mgrid[0:n, 0:n]
    return (yy - center).ravel(), (xx - center).ravel()


def _subpixel_cloud(img: np.ndarray):
    """Subdivide pixels into a weighted point cloud for splatting."""
    n = img.shape[0]
    y, x = _pixel_coords(n)
    s = _SUBPIXEL
    offs = (np.arange(s) + 0.5) / s - 0.5
    oy, ox = np.meshgrid(offs, offs, indexing="ij")
    ys = (y[:, None] + oy.ravel()[None, :]).ravel()
    xs = (x[:, None] + ox.ravel()[None, :]).ravel()
    vs = np.repeat(img.ravel() / (s * s), s * s)
    return ys, xs, vs


def _splat_profile(t: np.ndarray, weights: np.ndarray, detectors: int) -> np.ndarray:
    i0 = np.floor(t).astype(np.int64)
    frac = t - i0
    prof = np.zeros(detectors)
    m0 = (i0 >= 0) & (i0 < detectors)
    prof += np.bincount(i0[m0], weights=(weights * (1.0 - frac))[m0], minlength=detectors)
    i1 = i0 + 1
    m1 = (i1 >= 0) & (i1 < detectors)
    prof += np.bincount(i1[m1], weights=(weights * frac)[m1], minlength=detectors)
    return prof


def radon_forward(img: Image2D, angles) -> Sinogram:
    """Parallel-beam line integrals of a square image at the given angles.

    Detector count equals the image side; pixels projecting outside the
    detector span contribute nothing, consistent with zero padding.
    """
    values = img.values
    if values.shape[0] != values.shape[1]:
        raise ShapeError(f"radon_forward needs a square image, got {values.shape}")
    angles = np.asarray(angles, dtype=np.float64)
    n = values.shape[0]
    center = (n - 1) / 2.0
    ys, xs, vs = _subpixel_cloud(values)
    sino = np.empty((n, angles.size))
    for i, theta in enumerate(angles):
        t = xs * np.cos(theta) + ys * np.sin(theta) + center
        sino[:, i] = _splat_profile(t, vs, n)
    return Sinogram(sino, angles)


def _backproject(profiles: np.ndarray, angles: np.ndarray, n: int) -> np.ndarray:
    center = (n - 1) / 2.0
    y, x = _pixel_coords(n)
    coords = np.arange(profiles.shape[0], dtype=np.float64)
    out = np.zeros(n * n)
    for i, theta in enumerate(angles):
        t = x * np.cos(theta) + y * np.sin(theta) + center
        out += np.interp(t, coords, profiles[:, i], left=0.0, right=0.0)
    return out.reshape(n, n)


def _ramp_filter(sino: np.ndarray) -> np.ndarray:
    """Frequency-domain ramp built from the real-space kernel (Ram-Lak)."""
    detectors = sino.shape[0]
    padded_len = max(64, 1 << int(np.ceil(np.log2(2 * detectors))))
    dist = np.concatenate(
        [np.arange(0, padded_len // 2 + 1), np.arange(padded_len // 2 - 1, 0, -1)]
    )
    kernel = np.zeros(padded_len)
    kernel[0] = 0.25
    odd = dist % 2 == 1
    kernel[odd] = -1.0 / (np.pi * dist[odd]) ** 2
    ramp = 2.0 * np.real(np.fft.fft(kernel))
    padded = np.zeros((padded_len, sino.shape[1]))
    padded[:detectors] = sino
    filtered = np.real(np.fft.ifft(np.fft.fft(padded, axis=0) * ramp[:, None], axis=0))
    return filtered[:detectors]


def _circle_mask(n: int) -> np.ndarray:
    center = (n - 1) / 2.0
    yy, xx = np.mgrid[0:n, 0:n]
    return np.hypot(yy - center, xx - center) <= n / 2.0


def fbp(sino: Sinogram, cfg: ReconConfig | None = None) -> Image2D:
    """Filtered backprojection with a ramp filter, scaled by pi/(2*angles)."""
    cfg = cfg or ReconConfig(method="fbp")
    if sino.angles.size < 2:
        raise ParamError("need at least 2 angles to reconstruct")
    n = cfg.grid_size or sino.detectors
    filtered = _ramp_filter(sino.values)
    img = _backproject(filtered, sino.angles, n) * np.pi / (2.0 * sino.angles.size)
    mask = None
    if cfg.circular_mask:
        mask = _circle_mask(n)
        img = np.where(mask, img, 0.0)
    return Image2D(img, mask)


def sart(sino: Sinogram, cfg: ReconConfig | None = None) -> Image2D:
    """SART with ascending angle sweeps, ray-length normalization, relaxation.

    Starts from the uniform image whose mean forward projection matches
    the sinogram mean. The per-iteration data residual is recorded in
    ``meta['residual_history']`` (entry 0 is the initial residual).
    """
    cfg = cfg or ReconConfig(method="sart")
    if sino.angles.size < 2:
        raise ParamError("need at least 2 angles to reconstruct")
    n = cfg.grid_size or sino.detectors
    detectors = sino.detectors
    angles = sino.angles
    center = (n - 1) / 2.0
    y, x = _pixel_coords(n)
    coords = np.arange(detectors, dtype=np.float64)

    # geometry cached per angle: splat indices/weights and gather positions
    ys, xs, _ = _subpixel_cloud(np.zeros((n, n)))
    sub = _SUBPIXEL * _SUBPIXEL
    plans = []
    ray_norms = np.empty((detectors, angles.size))
    ones = np.full(n * n * sub, 1.0 / sub)
    for i, theta in enumerate(angles):
        t_sub = xs * np.cos(theta) + ys * np.sin(theta) + center
        t_pix = x * np.cos(theta) + y * np.sin(theta) + center
        ray_norms[:, i] = _splat_profile(t_sub, ones, detectors)
        plans.append((t_sub, t_pix))

    mean_norm = ray_norms.mean()
    start = sino.values.mean() / mean_norm if mean_norm > 0 else 0.0
    rec = np.full(n * n, start)

    def forward_one(vec: np.ndarray, i: int) -> np.ndarray:
        t_sub, _ = plans[i]
        return _splat_profile(t_sub, np.repeat(vec / sub, sub), detectors)

    def residual_norm() -> float:
        errs = [sino.values[:, i] - forward_one(rec, i) for i in range(angles.size)]
        return float(np.sqrt(np.mean(np.square(errs))))

    history = [residual_norm()]
    for _ in range(cfg.sart_iterations):
        for i in range(angles.size):
            proj = forward_one(rec, i)
            diff = sino.values[:, i] - proj
            norms = ray_norms[:, i]
            update_prof = np.where(norms > 1e-8, diff / np.maximum(norms, 1e-8), 0.0)
            _, t_pix = plans[i]
            rec += cfg.sart_relaxation * np.interp(t_pix, coords, update_prof, left=0.0, right=0.0)
        history.append(residual_norm())

    img = rec.reshape(n, n)
    mask = None
    if cfg.circular_mask:
        mask = _circle_mask(n)
        img = np.where(mask, img, 0.0)
    return Image2D(img, mask, meta={"residual_history": history})


def recon_compare(
    a: Image2D,
    b: Image2D,
    norm: NormalizationSpec | None = None,
    hist_spec: HistogramSpec | None = None,
) -> ReconComparison:
    """Entropies, MI and symmetric KL between two reconstructions.

    Both inputs are passed through the standard percentile normalization
    before any histogram is formed.
    """
    if a.shape != b.shape:
        raise ShapeError(f"reconstruction shapes differ: {a.shape} vs {b.shape}")
    an = normalize(a, norm)
    bn = normalize(b, norm)
    ha = histogram(an, hist_spec)
    hb = histogram(bn, hist_spec)
    return ReconComparison(
        entropy_a=entropy(ha),
        entropy_b=entropy(hb),
        mutual_info=mutual_information(joint_histogram(an, bn, hist_spec)),
        sym_kl=symmetric_kl(ha, hb),
    )
