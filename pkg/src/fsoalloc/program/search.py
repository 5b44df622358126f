"""Vectorised bounded 1-D and 2-D maximisation used by the primal step."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

ArrayFn = Callable[[np.ndarray], np.ndarray]


def golden_section_max(
    fun: ArrayFn, lo: np.ndarray, hi: np.ndarray, tol: float = 1e-6
) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise golden-section search for the maximum of ``fun`` on [lo, hi].

    ``fun`` maps an array shaped like ``lo`` to values of the same shape; each
    element is an independent unimodal problem. Returns (argmax, max).
    """
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    width = float(np.max(b - a)) if a.size else 0.0
    n_iter = max(0, math.ceil(math.log(max(width, tol) / tol) / math.log(1.0 / INV_PHI)))
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc = fun(c)
    fd = fun(d)
    for _ in range(n_iter):
        # left: keep [a, d] and reuse c as the new d; otherwise keep [c, b]
        left = fc >= fd
        a, b = np.where(left, a, c), np.where(left, d, b)
        c, d = (
            np.where(left, b - INV_PHI * (b - a), d),
            np.where(left, c, a + INV_PHI * (b - a)),
        )
        fp = fun(np.where(left, c, d))
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
    x = np.where(fc >= fd, c, d)
    return x, np.maximum(fc, fd)


def maximize_bounded(
    fun: ArrayFn,
    lo: float,
    hi: float,
    shape: tuple[int, ...],
    grid: int = 32,
    tol: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray]:
    """Maximise ``fun`` on [lo, hi] for every element of an array of problems.

    ``fun`` must accept an array of shape ``shape + (K,)`` and return values of
    the same shape, for any K. A coarse grid picks the bracketing cell, golden
    section refines it, and the grid optimum (which includes both endpoints) is
    kept whenever it beats the refined point, so quasi-concave objectives with a
    spurious dip near an endpoint are still handled.
    """
    xs = np.linspace(lo, hi, grid)
    vals = fun(np.broadcast_to(xs, shape + (grid,)))
    k = np.argmax(vals, axis=-1)
    best_x = xs[k]
    best_v = np.take_along_axis(vals, k[..., None], axis=-1)[..., 0]
    a = xs[np.maximum(k - 1, 0)]
    b = xs[np.minimum(k + 1, grid - 1)]
    x, v = golden_section_max(lambda p: fun(p[..., None])[..., 0], a, b, tol)
    better = v > best_v
    return np.where(better, x, best_x), np.where(better, v, best_v)


def grid_refine_max_2d(
    fun: Callable[[np.ndarray, np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    grid: int = 64,
    refine: int = 8,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Grid search over [lo, hi]^2 followed by one refinement pass.

    ``fun(x, y)`` receives arrays with two trailing axes (x along -2, y along
    -1) and returns values broadcast over the leading problem axes. The
    refinement grid is ``refine`` times finer and spans one coarse cell on each
    side of the coarse optimum. Returns (x*, y*, value).
    """
    xs = np.linspace(lo, hi, grid)
    vals = fun(xs[:, None], xs[None, :])
    lead = vals.shape[:-2]
    flat = vals.reshape(lead + (-1,))
    k = np.argmax(flat, axis=-1)
    ix, iy = np.divmod(k, grid)
    step = (hi - lo) / (grid - 1)
    offsets = np.linspace(-step, step, 2 * refine + 1)
    fx = np.clip(xs[ix][..., None] + offsets, lo, hi)
    fy = np.clip(xs[iy][..., None] + offsets, lo, hi)
    fine = fun(fx[..., :, None], fy[..., None, :])
    fflat = fine.reshape(lead + (-1,))
    kf = np.argmax(fflat, axis=-1)
    jx, jy = np.divmod(kf, 2 * refine + 1)
    x = np.take_along_axis(fx, jx[..., None], axis=-1)[..., 0]
    y = np.take_along_axis(fy, jy[..., None], axis=-1)[..., 0]
    v = np.take_along_axis(fflat, kf[..., None], axis=-1)[..., 0]
    return x, y, v
