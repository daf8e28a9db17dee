"""Gaussian fitness on a diagonal-covariance Mahalanobis distance.

Two observables are supported: a noisy point measurement of the target
center, and the mean color of the window a particle places on a raster frame.
Every likelihood function accepts a batch of states, shape ``(N, d)``, with
the center in the first two columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from swarmtrack.core import pixel_span


def _variances(sigma: Sequence[float] | np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=np.float64).reshape(-1)
    if np.any(sigma <= 0):
        raise ValueError(f"covariance diagonal must be positive, got {sigma.tolist()}")
    return sigma


def mahalanobis(c: np.ndarray, c_gt: np.ndarray, sigma: Sequence[float] | np.ndarray) -> np.ndarray | float:
    """Distance of ``c`` from ``c_gt`` under diagonal covariance ``sigma``.

    The last axis is the feature axis; leading axes broadcast.
    """
    c = np.asarray(c, dtype=np.float64)
    c_gt = np.asarray(c_gt, dtype=np.float64)
    sigma = _variances(sigma)
    if c.shape[-1] != c_gt.shape[-1] or c.shape[-1] != sigma.shape[0]:
        raise ValueError(
            f"dimension mismatch: {c.shape[-1]} vs {c_gt.shape[-1]} vs covariance {sigma.shape[0]}"
        )
    out = np.sqrt(np.sum((c - c_gt) ** 2 / sigma, axis=-1))
    return float(out) if out.ndim == 0 else out


def gaussian_fitness(delta, sigma: Sequence[float] | np.ndarray, n: int | None = None):
    """Multivariate normal density written in terms of the Mahalanobis distance."""
    sigma = _variances(sigma)
    if n is None:
        n = sigma.shape[0]
    norm = (2.0 * np.pi) ** (-n / 2) * np.prod(sigma) ** -0.5
    out = norm * np.exp(-np.square(delta) / 2.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class GaussianObservationModel:
    variances: tuple[float, ...]

    def __post_init__(self) -> None:
        _variances(self.variances)

    @property
    def n(self) -> int:
        return len(self.variances)

    @property
    def peak(self) -> float:
        return gaussian_fitness(0.0, self.variances, self.n)


@dataclass(frozen=True)
class ColorReference:
    reference_color: tuple[float, float, float]
    window: tuple[float, float]
    variances: tuple[float, float, float] = (400.0, 400.0, 400.0)

    def __post_init__(self) -> None:
        if len(self.reference_color) != 3 or any(not 0 <= c <= 255 for c in self.reference_color):
            raise ValueError(f"reference color must be 3 channels in [0, 255], got {self.reference_color}")
        _variances(self.variances)
        if self.window[0] <= 0 or self.window[1] <= 0:
            raise ValueError("window extent must be positive")

    @property
    def peak(self) -> float:
        return gaussian_fitness(0.0, self.variances, 3)


def point_likelihood(states: np.ndarray, observation, model: GaussianObservationModel) -> np.ndarray:
    if observation is None:
        raise ValueError("no observation for this frame")
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    obs = np.asarray(observation, dtype=np.float64)
    delta = mahalanobis(states[:, : model.n], obs, model.variances)
    return gaussian_fitness(np.atleast_1d(delta), model.variances, model.n)


class IntegralImage:
    """Summed-area table of an ``H x W x 3`` frame for O(1) window means."""

    def __init__(self, frame: np.ndarray) -> None:
        frame = np.asarray(frame)
        if frame.ndim != 3 or frame.shape[2] != 3:
            raise ValueError(f"expected an H x W x 3 frame, got shape {frame.shape}")
        self.height, self.width = frame.shape[:2]
        # integer frames get an integer table: window sums are exact
        dtype = np.int64 if np.issubdtype(frame.dtype, np.integer) else np.float64
        table = np.zeros((self.height + 1, self.width + 1, 3), dtype=dtype)
        table[1:, 1:] = frame
        table.cumsum(axis=0, out=table)
        table.cumsum(axis=1, out=table)
        self.table = table

    def window_means(
        self, cx: np.ndarray, cy: np.ndarray, w: np.ndarray, h: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Mean color over each window clipped to the frame, plus the visible pixel count."""
        x0, x1 = pixel_span(cx - w / 2, cx + w / 2, self.width)
        y0, y1 = pixel_span(cy - h / 2, cy + h / 2, self.height)
        t = self.table
        sums = t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0]
        count = ((x1 - x0) * (y1 - y0)).astype(np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            means = sums / count[:, None]
        return means, count


def color_patch_likelihood(states: np.ndarray, frame, ref: ColorReference) -> np.ndarray:
    """Fitness of the mean window color against the reference color.

    States carrying four columns use their own width and height; otherwise
    the reference window extent applies. Windows entirely outside the frame
    score zero.
    """
    integral = frame if isinstance(frame, IntegralImage) else IntegralImage(frame)
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    n = states.shape[0]
    if states.shape[1] >= 4:
        w, h = states[:, 2], states[:, 3]
    else:
        w = np.full(n, float(ref.window[0]))
        h = np.full(n, float(ref.window[1]))
    means, count = integral.window_means(states[:, 0], states[:, 1], w, h)
    visible = count > 0
    out = np.zeros(n)
    if visible.any():
        delta = mahalanobis(means[visible], np.asarray(ref.reference_color, dtype=np.float64), ref.variances)
        out[visible] = gaussian_fitness(np.atleast_1d(delta), ref.variances, 3)
    return out
