"""Exhaustive grid oracle for the shadowing property.

On finite spaces every point is tested directly, so the answer is exact.  On
the circle and the interval a point test is useless for windows longer than
a few steps (the set of tracking points shrinks like ``beta**-n``, far below
any affordable grid spacing), so each grid point stands for its cell
``[g - h, g + h]`` and the cell is mapped forward as an arc/interval.  A cell
is discarded only when some image provably stays farther than ``eps`` from
the pseudo-orbit; surviving cells may contain a tracking point and every
tracking point lies in a surviving cell.
"""
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import PreconditionError, SizeCapError
from ..ifs_core import Composite, IntervalClamp, IntervalTent
from ..spaces import TAU, Circle, Interval

GRID_CAP = 10_000_000


@dataclass(frozen=True)
class OracleHit:
    y0: object
    sup_deviation: float
    lower_bound: float
    grid_index: int


@dataclass(frozen=True)
class UniquenessVerdict:
    ok: bool
    clusters: tuple
    hits: int
    resolution: float

    @property
    def cluster_count(self):
        return len(self.clusters)


def _interval_cells(sys, po, eps, centers, h):
    lo = np.clip(centers - h, 0.0, 1.0)
    hi = np.clip(centers + h, 0.0, 1.0)
    c = centers.copy()
    pmax = np.zeros_like(c)
    lmax = np.zeros_like(c)
    syms = po.symbols()
    for k, x in enumerate(po.points):
        pmax = np.maximum(pmax, np.abs(c - x))
        gap = np.maximum(np.maximum(lo - x, x - hi), 0.0)
        lmax = np.maximum(lmax, gap)
        if k < len(po) - 1:
            f = sys.maps[syms[k]]
            c = f.apply_array(sys.space, c)
            lo, hi = _interval_image_vec(f, lo, hi)
            lo, hi = lo - 1e-15, hi + 1e-15
    return lmax <= eps + TAU, pmax, lmax


def _interval_image_vec(f, lo, hi):
    if isinstance(f, IntervalClamp):
        return np.minimum(2 * lo, 1.0), np.minimum(2 * hi, 1.0)
    if isinstance(f, IntervalTent):
        a, b = 1 - np.abs(1 - 2 * lo), 1 - np.abs(1 - 2 * hi)
        fold = (lo <= 0.5) & (hi >= 0.5)
        return np.minimum(a, b), np.where(fold, 1.0, np.maximum(a, b))
    if isinstance(f, Composite):
        for g in f.maps:
            lo, hi = _interval_image_vec(g, lo, hi)
        return lo, hi
    raise TypeError(f"no interval enclosure for {f.family}")


def _finite_points(sys, po, eps, pts):
    space = sys.space
    cur = np.asarray(pts)
    dev = np.zeros(len(cur))
    syms = po.symbols()
    for k, x in enumerate(po.points):
        dev = np.maximum(dev, space.distance_array(cur, np.full(len(cur), x)))
        if k < len(po) - 1:
            cur = sys.apply_array(int(syms[k]), cur)
    tol = 0.0 if space.exact else TAU
    return dev <= eps + tol, dev, dev


def brute_force_shadow(sys, po, eps, grid, backend=None, cap=GRID_CAP):
    """Every grid point (cell) that may start an orbit staying within ``eps``
    of ``po`` along its witnessed word.  Exact on finite spaces."""
    pts = np.asarray(grid.points)
    if len(pts) > cap:
        raise SizeCapError(f"grid of {len(pts)} points exceeds the cap of {cap}")
    po.sigma.check_alphabet(sys.m)
    space = sys.space
    if space.finite:
        accept, dev, low = _finite_points(sys, po, eps, pts)
    elif sys.is_circle_affine:
        a, b = sys.affine_params()
        syms = po.symbols() if len(po) > 1 else np.zeros(0, dtype=np.int64)
        accept, dev, low = _kernels.circle_cell_oracle(
            pts, grid.resolution, np.asarray(po.points, dtype=np.float64), syms, a, b, eps, TAU, backend)
    elif isinstance(space, Interval):
        accept, dev, low = _interval_cells(sys, po, eps, pts.astype(np.float64), grid.resolution)
    else:
        raise TypeError(f"no oracle for {space.kind} with these maps")
    idx = np.flatnonzero(accept)
    return [OracleHit(space.point_from_array(pts[i]), float(dev[i]), float(low[i]), int(i)) for i in idx]


def clusters(space, hits, grid):
    """Group hits whose grid cells touch (cyclically on the circle).  On
    finite spaces every distinct point is its own cluster."""
    if not hits:
        return []
    if space.finite:
        return [[h] for h in hits]
    order = sorted(hits, key=lambda h: h.grid_index)
    groups = [[order[0]]]
    for h in order[1:]:
        if h.grid_index - groups[-1][-1].grid_index <= 1:
            groups[-1].append(h)
        else:
            groups.append([h])
    n = len(grid.points)
    if isinstance(space, Circle) and len(groups) > 1:
        if groups[0][0].grid_index == 0 and groups[-1][-1].grid_index == n - 1:
            groups[0] = groups.pop() + groups[0]
    return groups


def cluster_contains(space, cluster, y, radius):
    pts = space.as_array([h.y0 for h in cluster])
    return bool(space.distance_array(pts, np.full(len(pts), y)).min() <= radius + TAU)


def uniqueness_check(sys, po, eps, expansivity, grid, backend=None):
    """Brute-force the shadows and require that they form a single cluster.
    Needs ``eps < e / 3`` for the expansivity constant ``e``."""
    if not eps < expansivity.constant / 3:
        raise PreconditionError(f"eps = {eps} must be below e/3 = {expansivity.constant / 3}")
    hits = brute_force_shadow(sys, po, eps, grid, backend)
    groups = clusters(sys.space, hits, grid)
    return UniquenessVerdict(len(groups) == 1, tuple(tuple(g) for g in groups), len(hits), grid.resolution)
