"""Multi-channel staged spatial-spectral feature transform.

One fitted model turns each count image into a non-negative feature row:
channel decorrelation (KLT), zero-padding to a power-of-two square, then a
pyramid of stages. Each stage assembles 2x2 neighborhoods into grid vectors,
projects them onto a PCA basis fitted across all images, rectifies the signed
coordinates into positive/negative position pairs, and halves the side length.
The flattened outputs of every stage concatenate into the feature row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DegenerateInput, DimensionMismatch, NonFiniteInput
from .ingest import CityImageSeries

MODEL_FORMAT_VERSION = 1

DEFAULT_MIN_RATIO = 0.03
DEFAULT_REDUCED_DIM = 128


def sp_transform(v: np.ndarray) -> np.ndarray:
    """Sign-to-position rectifier: each coordinate c becomes the pair
    (max(c, 0), max(-c, 0)), interleaved."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (2 * v.shape[-1],))
    out[..., 0::2] = np.maximum(v, 0.0)
    out[..., 1::2] = np.maximum(-v, 0.0)
    return out


def sp_inverse(w: np.ndarray) -> np.ndarray:
    """Exact inverse of sp_transform: positive part minus negative part."""
    w = np.asarray(w, dtype=float)
    return w[..., 0::2] - w[..., 1::2]


def next_power_of_two(x: int) -> int:
    s = 1
    while s < x:
        s *= 2
    return s


def pad_stack(stack: np.ndarray, side: int = None) -> np.ndarray:
    """Zero-pad (N, C, X, Y) symmetrically to (N, C, S, S), extra row/column on
    the high-index side when the difference is odd."""
    n, c, x, y = stack.shape
    s = side if side is not None else next_power_of_two(max(x, y))
    pad_x, pad_y = s - x, s - y
    lo_x, lo_y = pad_x // 2, pad_y // 2
    return np.pad(
        stack,
        ((0, 0), (0, 0), (lo_x, pad_x - lo_x), (lo_y, pad_y - lo_y)),
    )


def pad_series(series: CityImageSeries) -> np.ndarray:
    """Counts cast to reals and padded to the next power-of-two square."""
    return pad_stack(series.images.astype(float))


@dataclass(frozen=True)
class StageModel:
    stage_index: int
    input_side: int
    input_depth: int
    basis: linalg.PCABasis

    @property
    def output_side(self) -> int:
        return self.input_side // 2

    @property
    def output_depth(self) -> int:
        return 2 * self.basis.n_components

    def to_dict(self) -> dict:
        return {
            "stage_index": self.stage_index,
            "input_side": self.input_side,
            "input_depth": self.input_depth,
            "basis": self.basis.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "StageModel":
        return cls(
            stage_index=int(doc["stage_index"]),
            input_side=int(doc["input_side"]),
            input_depth=int(doc["input_depth"]),
            basis=linalg.PCABasis.from_dict(doc["basis"]),
        )


@dataclass(frozen=True)
class SaakModel:
    rows: int
    cols: int
    padded_side: int
    channel_klt: linalg.PCABasis
    stages: tuple
    min_ratio: float
    log_scale: bool

    @property
    def feature_dim(self) -> int:
        return sum(st.output_side**2 * st.output_depth for st in self.stages)

    def to_json(self) -> str:
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "rows": self.rows,
            "cols": self.cols,
            "padded_side": self.padded_side,
            "min_ratio": self.min_ratio,
            "log_scale": self.log_scale,
            "channel_klt": self.channel_klt.to_dict(),
            "stages": [st.to_dict() for st in self.stages],
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SaakModel":
        doc = json.loads(text)
        if doc.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model version {doc.get('format_version')}")
        return cls(
            rows=int(doc["rows"]),
            cols=int(doc["cols"]),
            padded_side=int(doc["padded_side"]),
            channel_klt=linalg.PCABasis.from_dict(doc["channel_klt"]),
            stages=tuple(StageModel.from_dict(d) for d in doc["stages"]),
            min_ratio=float(doc["min_ratio"]),
            log_scale=bool(doc["log_scale"]),
        )


def _assemble(stack: np.ndarray) -> np.ndarray:
    """(N, D, L, L) -> (N, L/2, L/2, 4D) grid vectors; each grid concatenates
    the four neighbor depth-vectors in row-major block order."""
    n, d, l, _ = stack.shape
    half = l // 2
    v = stack.reshape(n, d, half, 2, half, 2)
    v = v.transpose(0, 2, 4, 3, 5, 1)  # (N, i, j, row-in-block, col-in-block, D)
    return v.reshape(n, half, half, 4 * d)


def _apply_stage(stage: StageModel, stack: np.ndarray) -> np.ndarray:
    n = stack.shape[0]
    half = stage.output_side
    grids = _assemble(stack).reshape(n * half * half, 4 * stage.input_depth)
    coords = linalg.project(stage.basis, grids)
    rectified = sp_transform(coords)
    out = rectified.reshape(n, half, half, stage.output_depth)
    return out.transpose(0, 3, 1, 2)


def fit_stage(
    stack: np.ndarray, stage_index: int, min_ratio: float = DEFAULT_MIN_RATIO
) -> tuple[StageModel, np.ndarray]:
    """Fit one stage's PCA over all grid vectors of all images, then apply it."""
    n, d, l, _ = stack.shape
    if l < 2 or l % 2 != 0:
        raise DimensionMismatch(f"stage input side {l} must be even and >= 2")
    half = l // 2
    if n * half * half < 2:
        raise DegenerateInput("fewer than 2 grid vectors to fit a stage")
    grids = _assemble(stack).reshape(n * half * half, 4 * d)
    basis = linalg.fit_pca(grids, min_ratio=min_ratio)
    stage = StageModel(
        stage_index=stage_index, input_side=l, input_depth=d, basis=basis
    )
    return stage, _apply_stage(stage, stack)


def _decorrelate(model_or_klt, counts: np.ndarray) -> np.ndarray:
    n, c, x, y = counts.shape
    pixels = counts.transpose(0, 2, 3, 1).reshape(n * x * y, c)
    projected = linalg.project(model_or_klt, pixels)
    return projected.reshape(n, x, y, c).transpose(0, 3, 1, 2)


def _flatten_stage_output(out: np.ndarray) -> np.ndarray:
    # Row-major over pixels, channel innermost.
    return out.transpose(0, 2, 3, 1).reshape(out.shape[0], -1)


def _counts(series: CityImageSeries, log_scale: bool) -> np.ndarray:
    counts = series.images.astype(float)
    return np.log1p(counts) if log_scale else counts


def fit_saak(
    series: CityImageSeries,
    min_ratio: float = DEFAULT_MIN_RATIO,
    log_scale: bool = False,
) -> tuple[SaakModel, np.ndarray]:
    """Fit the full transform on an image series and return (model, raw
    feature matrix). The matrix equals transform(model, series) bit for bit;
    both run through the same per-stage application code."""
    if series.n_slots < 2:
        raise DegenerateInput("need at least 2 images to fit")
    counts = _counts(series, log_scale)
    klt = linalg.fit_klt(counts.transpose(0, 2, 3, 1).reshape(-1, counts.shape[1]))
    stack = pad_stack(_decorrelate(klt, counts))

    stages = []
    outputs = []
    k = 1
    while stack.shape[2] > 1:
        stage, stack = fit_stage(stack, k, min_ratio=min_ratio)
        stages.append(stage)
        outputs.append(_flatten_stage_output(stack))
        k += 1

    model = SaakModel(
        rows=series.spec.rows,
        cols=series.spec.cols,
        padded_side=next_power_of_two(max(series.spec.rows, series.spec.cols)),
        channel_klt=klt,
        stages=tuple(stages),
        min_ratio=min_ratio,
        log_scale=log_scale,
    )
    return model, np.hstack(outputs)


def transform(model: SaakModel, series: CityImageSeries) -> np.ndarray:
    """Apply a fitted model to an image series on the same grid."""
    if (series.spec.rows, series.spec.cols) != (model.rows, model.cols):
        raise DimensionMismatch(
            f"series grid {series.spec.rows}x{series.spec.cols} does not match "
            f"model grid {model.rows}x{model.cols}"
        )
    counts = _counts(series, model.log_scale)
    stack = pad_stack(_decorrelate(model.channel_klt, counts), model.padded_side)
    outputs = []
    for stage in model.stages:
        stack = _apply_stage(stage, stack)
        outputs.append(_flatten_stage_output(stack))
    return np.hstack(outputs)


@dataclass(frozen=True)
class ReducedFeatures:
    matrix: np.ndarray  # (N, k) with k <= target_dim
    coords2d: np.ndarray  # (N, 2) first two components, for the scatter export
    basis: linalg.PCABasis


def reduce(features: np.ndarray, target_dim: int = DEFAULT_REDUCED_DIM) -> ReducedFeatures:
    """PCA the raw features down to at most target_dim columns (capped by
    rank), keeping the first two coordinates for visualization."""
    features = np.asarray(features, dtype=float)
    if not np.all(np.isfinite(features)):
        raise NonFiniteInput("feature matrix contains NaN or Inf")
    basis = linalg.fit_pca(features, fixed_k=target_dim)
    reduced = linalg.project(basis, features)
    coords2d = np.zeros((reduced.shape[0], 2))
    coords2d[:, : min(2, reduced.shape[1])] = reduced[:, :2]
    return ReducedFeatures(matrix=reduced, coords2d=coords2d, basis=basis)
