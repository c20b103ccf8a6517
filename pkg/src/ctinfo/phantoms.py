"""Deterministic analytic phantoms for desk-scale studies.

Three kinds:

* ``disk``: anti-aliased circle, the reconstruction workhorse.
* ``ellipses``: a slice-like multi-ellipse object with known region
  means, optional smooth texture and seeded noise.
* ``rotating_sequence``: projection-like frames of flat-top smooth-edged
  ellipses whose orientation and per-ellipse intensity vary with frame
  angle, so the frame histograms decorrelate gradually with angular
  separation. Texture is static across the sequence (shared structure);
  only the noise is redrawn per frame.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import ParamError
from .metrics import Image2D

# (cy, cx, a, b, angle_deg, value) in unit coordinates of the half-width
_ELLIPSES = (
    (0.00, 0.00, 0.80, 0.65, 15.0, 0.45),
    (-0.18, 0.12, 0.28, 0.16, -30.0, 0.30),
    (0.22, -0.10, 0.14, 0.24, 55.0, -0.22),
    (0.05, 0.32, 0.10, 0.08, 0.0, 0.35),
    (-0.30, -0.25, 0.09, 0.13, 70.0, 0.25),
)

# interior falloff of the slice-like phantom, per ellipse
_SLICE_SHADING = (0.25, 0.5, 0.4, 0.3, 0.6)


def _render(size, ellipses, rot_deg=0.0, shade=0.0, edge=0.0):
    """Sum ellipse profiles; ``edge`` > 0 smooths each rim over that r^2 band."""
    yy, xx = np.mgrid[0:size, 0:size]
    center = (size - 1) / 2.0
    y = (yy - center) / (size / 2.0)
    x = (xx - center) / (size / 2.0)
    rot = np.deg2rad(rot_deg)
    img = np.zeros((size, size))
    for spec in ellipses:
        cy, cx, a, b, ang, val = spec[:6]
        ell_shade = spec[6] if len(spec) > 6 else shade
        cyr = cy * np.cos(rot) - cx * np.sin(rot)
        cxr = cy * np.sin(rot) + cx * np.cos(rot)
        theta = np.deg2rad(ang) + rot
        yr = (y - cyr) * np.cos(theta) + (x - cxr) * np.sin(theta)
        xr = -(y - cyr) * np.sin(theta) + (x - cxr) * np.cos(theta)
        r2 = (yr / a) ** 2 + (xr / b) ** 2
        profile = val * (1.0 - ell_shade * r2)
        if edge > 0:
            f = np.clip((1.0 - r2) / edge, 0.0, 1.0)
            img += profile * f * f * (3.0 - 2.0 * f)
        else:
            img += np.where(r2 <= 1.0, profile, 0.0)
    return img


def _texture(size, sigma, seed):
    rng = np.random.default_rng(seed)
    field = ndimage.gaussian_filter(rng.standard_normal((size, size)), sigma)
    return field / field.std()


def make_disk(size: int, seed: int = 0, radius: float | None = None) -> Image2D:
    """Anti-aliased disk of the given pixel radius (default 0.35 * size)."""
    if size < 16:
        raise ParamError("size must be >= 16")
    radius = radius if radius is not None else 0.35 * size
    yy, xx = np.mgrid[0:size, 0:size]
    center = (size - 1) / 2.0
    dist = np.hypot(yy - center, xx - center)
    values = np.clip(radius + 0.5 - dist, 0.0, 1.0)
    return Image2D(values, meta={"kind": "disk", "radius": radius, "seed": seed})


def make_ellipses(
    size: int,
    seed: int = 0,
    noise_sigma: float = 0.0,
    texture_amp: float = 0.05,
    texture_sigma: float = 2.5,
) -> Image2D:
    """Slice-like multi-ellipse phantom with texture and optional noise."""
    if size < 16:
        raise ParamError("size must be >= 16")
    ells = [e + (s,) for e, s in zip(_ELLIPSES, _SLICE_SHADING)]
    img = _render(size, ells)
    if texture_amp > 0:
        img = img + texture_amp * _texture(size, texture_sigma, seed) * (img > 0)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed + 1)
        img = img + rng.normal(0.0, noise_sigma, img.shape)
    region_means = {i: e[5] for i, e in enumerate(_ELLIPSES)}
    return Image2D(img, meta={"kind": "ellipses", "seed": seed, "region_values": region_means})


def make_rotating_sequence(
    size: int,
    seed: int = 0,
    frames: int = 10,
    rotation_step_deg: float = 8.0,
    modulation: float = 0.8,
    shade: float = 0.05,
    edge: float = 0.3,
    texture_amp: float = 0.02,
    texture_sigma: float = 14.0,
    noise_sigma: float = 0.0005,
) -> list[Image2D]:
    """Projection-like frame sequence with orientation-dependent intensities.

    Each frame rotates the ellipse pattern by ``rotation_step_deg`` and
    rescales every ellipse by 1 + modulation * sin(2*rot + phase), the
    pi-periodic dependence a projection has on view angle. Zero rotation
    step with zero modulation yields identical frames (up to noise).
    """
    if size < 16:
        raise ParamError("size must be >= 16")
    if frames < 1:
        raise ParamError("frames must be >= 1")
    texture = _texture(size, texture_sigma, seed) if texture_amp > 0 else None
    out = []
    for i in range(frames):
        rot_deg = rotation_step_deg * i
        rot = np.deg2rad(rot_deg)
        ells = []
        for j, (cy, cx, a, b, ang, val) in enumerate(_ELLIPSES):
            mod = 1.0 + modulation * np.sin(2.0 * rot + 1.9 * j)
            ells.append((cy, cx, a, b, ang, val * mod))
        img = _render(size, ells, rot_deg=rot_deg, shade=shade, edge=edge)
        if texture is not None:
            img = img + texture_amp * texture * (img > 1e-9)
        if noise_sigma > 0:
            rng = np.random.default_rng(seed * 100_003 + 17 * i + 1)
            img = img + rng.normal(0.0, noise_sigma, img.shape)
        out.append(
            Image2D(
                img,
                meta={"kind": "rotating_sequence", "seed": seed, "frame": i, "rot_deg": rot_deg},
            )
        )
    return out


def make_phantom(kind: str, size: int, seed: int = 0, **params):
    """Dispatch to a phantom builder by kind name."""
    builders = {
        "disk": make_disk,
        "ellipses": make_ellipses,
        "rotating_sequence": make_rotating_sequence,
    }
    if kind not in builders:
        raise ParamError(f"unknown phantom kind {kind!r}")
    return builders[kind](size, seed, **params)
