"""Dataset ingestion and study report serialization.

Dataset configs are JSON (or YAML) mappings validated into
``DatasetConfig``. Reports serialize to CSV (plain table, 6 significant
digits) or JSON (full schema with provenance); both emitters are
byte-stable for identical inputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, IoError, ParamError
from .metrics import Image2D

_LAYOUTS = ("projection_stack", "slice_pairs")
_FORMATS = ("tiff16", "raw_float32")
_MASK_SOURCES = ("file", "central_crop", "none")
_SCOPES = ("global", "per_image")


@dataclass
class DatasetConfig:
    root: str
    layout: str = "projection_stack"
    file_format: str = "raw_float32"
    width: int = 0
    height: int = 0
    count: int = 0
    index_start: int = 0
    index_stop: int | None = None
    index_step: int = 1
    mask_source: str = "central_crop"
    mask_path: str | None = None
    crop_fraction: float = 0.8
    norm_scope: str = "global"

    def __post_init__(self):
        if self.layout not in _LAYOUTS:
            raise ParamError(f"layout must be one of {_LAYOUTS}, got {self.layout!r}")
        if self.file_format not in _FORMATS:
            raise ParamError(f"file_format must be one of {_FORMATS}, got {self.file_format!r}")
        if self.mask_source not in _MASK_SOURCES:
            raise ParamError(f"mask_source must be one of {_MASK_SOURCES}")
        if self.norm_scope not in _SCOPES:
            raise ParamError(f"norm_scope must be one of {_SCOPES}")
        if not (0.0 < self.crop_fraction <= 1.0):
            raise ParamError(f"crop_fraction must be in (0,1], got {self.crop_fraction}")
        if self.index_step < 1:
            raise ParamError("index_step must be >= 1")
        if self.file_format == "raw_float32" and min(self.width, self.height) <= 0:
            raise ParamError("raw_float32 requires positive width and height")


def load_config(path: str | Path) -> DatasetConfig:
    """Read a dataset config mapping from a JSON or YAML file."""
    path = Path(path)
    if not path.exists():
        raise IoError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise FormatError(f"config root must be a mapping, got {type(data).__name__}")
    known = set(DatasetConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise FormatError(f"unknown config keys: {sorted(unknown)}")
    try:
        return DatasetConfig(**data)
    except TypeError as exc:
        raise FormatError(str(exc)) from exc


def _central_crop_mask(shape: tuple[int, int], fraction: float) -> np.ndarray:
    h, w = shape
    mh = int(round(h * fraction))
    mw = int(round(w * fraction))
    top = (h - mh) // 2
    left = (w - mw) // 2
    mask = np.zeros(shape, dtype=bool)
    mask[top : top + mh, left : left + mw] = True
    return mask


def _mask_for(cfg: DatasetConfig, shape: tuple[int, int]) -> np.ndarray | None:
    if cfg.mask_source == "none":
        return None
    if cfg.mask_source == "central_crop":
        return _central_crop_mask(shape, cfg.crop_fraction)
    path = Path(cfg.root) / cfg.mask_path if cfg.mask_path else None
    if path is None or not path.exists():
        raise IoError(f"mask file not found: {path}")
    if path.suffix == ".npy":
        mask = np.load(path)
    else:
        from PIL import Image as PILImage

        mask = np.array(PILImage.open(path))
    mask = np.asarray(mask) != 0
    if mask.shape != shape:
        raise FormatError(f"mask shape {mask.shape} != image shape {shape}")
    return mask


def _selected_indices(cfg: DatasetConfig, available: int) -> list[int]:
    stop = cfg.index_stop if cfg.index_stop is not None else available - 1
    idx = list(range(cfg.index_start, stop + 1, cfg.index_step))
    bad = [i for i in idx if i < 0 or i >= available]
    if bad:
        raise FormatError(f"indices {bad} out of range (have {available} frames)")
    return idx


def _load_raw_frames(path: Path, cfg: DatasetConfig) -> np.ndarray:
    if not path.exists():
        raise IoError(f"raw data file not found: {path}")
    data = np.fromfile(path, dtype="<f4")
    frame_px = cfg.width * cfg.height
    if frame_px == 0 or data.size % frame_px != 0:
        raise FormatError(
            f"{path} holds {data.size} floats, not a multiple of {cfg.height}x{cfg.width}"
        )
    frames = data.reshape(-1, cfg.height, cfg.width).astype(np.float64)
    if cfg.count and frames.shape[0] != cfg.count:
        raise FormatError(f"{path}: expected {cfg.count} frames, found {frames.shape[0]}")
    return frames


def _load_tiff_dir(directory: Path, cfg: DatasetConfig) -> list[np.ndarray]:
    from PIL import Image as PILImage

    if not directory.is_dir():
        raise IoError(f"dataset directory not found: {directory}")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in (".tif", ".tiff"))
    if not files:
        raise IoError(f"no TIFF files under {directory}")
    frames = []
    for f in files:
        arr = np.array(PILImage.open(f))
        if arr.ndim != 2:
            raise FormatError(f"{f}: expected a single-channel image, got shape {arr.shape}")
        # 16-bit integer data maps onto [0,1] before the usual normalization
        if np.issubdtype(arr.dtype, np.integer):
            frames.append(arr.astype(np.float64) / 65535.0)
        else:
            frames.append(arr.astype(np.float64))
    return frames


def load_stack(cfg: DatasetConfig) -> list[Image2D]:
    """Load the configured projection stack in ascending index order."""
    root = Path(cfg.root)
    if cfg.file_format == "raw_float32":
        frames = _load_raw_frames(root, cfg)
        idx = _selected_indices(cfg, frames.shape[0])
        arrays = [frames[i] for i in idx]
    else:
        all_frames = _load_tiff_dir(root, cfg)
        idx = _selected_indices(cfg, len(all_frames))
        arrays = [all_frames[i] for i in idx]
    out = []
    for i, arr in zip(idx, arrays):
        mask = _mask_for(cfg, arr.shape)
        out.append(Image2D(arr, mask, meta={"index": i, "source": str(root)}))
    return out


def load_slice_pairs(cfg: DatasetConfig) -> list[tuple[Image2D, Image2D]]:
    """Load (observation, ground truth) pairs for the task study.

    raw_float32: ``root`` is a directory holding observations.raw and
    ground_truth.raw with identical frame counts. tiff16: matching
    sorted filenames under root/observations and root/ground_truth.
    """
    root = Path(cfg.root)
    if cfg.layout != "slice_pairs":
        raise ParamError("load_slice_pairs requires layout='slice_pairs'")
    if cfg.file_format == "raw_float32":
        obs = _load_raw_frames(root / "observations.raw", cfg)
        truth = _load_raw_frames(root / "ground_truth.raw", cfg)
        if obs.shape != truth.shape:
            raise FormatError("observations and ground_truth frame counts differ")
        idx = _selected_indices(cfg, obs.shape[0])
        pairs = [(obs[i], truth[i]) for i in idx]
    else:
        obs_frames = _load_tiff_dir(root / "observations", cfg)
        truth_frames = _load_tiff_dir(root / "ground_truth", cfg)
        if len(obs_frames) != len(truth_frames):
            raise FormatError("observations and ground_truth file counts differ")
        idx = _selected_indices(cfg, len(obs_frames))
        pairs = [(obs_frames[i], truth_frames[i]) for i in idx]
    out = []
    for i, (o, t) in zip(idx, pairs):
        mask = _mask_for(cfg, o.shape)
        out.append(
            (
                Image2D(o, mask, meta={"index": i, "role": "observation"}),
                Image2D(t, None if mask is None else mask.copy(), meta={"index": i, "role": "ground_truth"}),
            )
        )
    return out


@dataclass
class StudyReport:
    """Tabular study output plus the provenance needed to rerun it."""

    study: str
    params: dict
    rows: list[dict]
    provenance: dict
    columns: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.columns and self.rows:
            self.columns = list(self.rows[0].keys())


def digest_params(study: str, params: dict) -> str:
    """Deterministic digest of a study's full parameter record."""
    blob = json.dumps({"study": study, "params": params}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".6g")
    return str(value)


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def emit(report: StudyReport, fmt: str, path: str | Path) -> Path:
    """Write a report as CSV or JSON; identical inputs give identical bytes."""
    if fmt not in ("csv", "json"):
        raise ParamError(f"format must be 'csv' or 'json', got {fmt!r}")
    path = Path(path)
    if fmt == "csv":
        lines = [",".join(report.columns)]
        for row in report.rows:
            lines.append(",".join(_format_cell(row.get(c, "")) for c in report.columns))
        text = "\n".join(lines) + "\n"
    else:
        payload = {
            "study": report.study,
            "params": _jsonable(report.params),
            "convention": report.provenance.get("convention_id", ""),
            "rows": _jsonable(report.rows),
            "provenance": _jsonable(report.provenance),
        }
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write report to {path}: {exc}") from exc
    return path


def parse_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    """Minimal reader for reports written by :func:`emit` (tests, round trips)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError(f"{path} is empty")
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]
