"""Orbits and pseudo-orbits on finite index windows.

A window is described by ``base`` (index of the first point) and the list of
points; the witnessing symbol word supplies the symbol for each step
``x_i -> x_{i+1}``.  Nothing is implicitly aligned at index 0.
"""
from dataclasses import dataclass
import json
import math
import os
from pathlib import Path
import tempfile

import numpy as np

from .errors import InsufficientWindowError, NotInvertibleError, PreconditionError, SpaceMismatchError
from .ifs_core import IFSystem, SymbolWord
from .spaces import TAU, BinaryShift, Circle, FiniteTable, Interval


@dataclass(frozen=True)
class PseudoOrbit:
    base: int
    points: tuple
    sigma: SymbolWord
    delta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if not self.points:
            raise ValueError("empty window")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")

    @property
    def lo(self):
        return self.base

    @property
    def hi(self):
        """Last index (inclusive)."""
        return self.base + len(self.points) - 1

    @property
    def indices(self):
        return range(self.lo, self.hi + 1)

    def __len__(self):
        return len(self.points)

    def point_at(self, i):
        return self.points[i - self.base]

    def symbols(self):
        """Symbols of the steps ``lo .. hi-1``."""
        return self.sigma.window(self.lo, self.hi)

    def window(self, lo, hi):
        """Sub-window with indices ``lo .. hi`` (inclusive)."""
        if lo < self.lo or hi > self.hi or lo > hi:
            raise ValueError(f"[{lo}, {hi}] is not inside [{self.lo}, {self.hi}]")
        return PseudoOrbit(lo, self.points[lo - self.base: hi - self.base + 1], self.sigma, self.delta)

    def with_delta(self, delta):
        return PseudoOrbit(self.base, self.points, self.sigma, delta)


@dataclass(frozen=True)
class Orbit:
    base: int
    points: tuple
    sigma: SymbolWord

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))

    lo = PseudoOrbit.lo
    hi = PseudoOrbit.hi
    indices = PseudoOrbit.indices
    point_at = PseudoOrbit.point_at
    symbols = PseudoOrbit.symbols

    def __len__(self):
        return len(self.points)

    def as_pseudo_orbit(self):
        return PseudoOrbit(self.base, self.points, self.sigma, 0.0)


@dataclass(frozen=True)
class PseudoOrbitCheck:
    ok: bool
    worst_index: int
    worst_error: float
    errors: tuple = ()


@dataclass(frozen=True)
class PseudoOrbitEnsemble:
    members: tuple
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


@dataclass(frozen=True)
class TildeDistance:
    value: float
    error_bound: float


def _tol(space):
    return 0.0 if space.exact else TAU


def step_errors(sys, po):
    """``d(f_{sigma(i)}(x_i), x_{i+1})`` for ``i = lo .. hi-1``."""
    space = sys.space
    out = np.empty(len(po) - 1)
    for k in range(len(po) - 1):
        i = po.base + k
        out[k] = space.distance(sys.apply(po.sigma.symbol_at(i), po.points[k]), po.points[k + 1])
    return out


def verify_pseudo_orbit(sys, po):
    """Check every step error against ``po.delta`` (plus the floating tolerance).

    The reported worst index is the first step whose error ties the maximum
    within tolerance.
    """
    errs = step_errors(sys, po)
    if errs.size == 0:
        return PseudoOrbitCheck(True, po.base, 0.0, ())
    tol = _tol(sys.space)
    worst = float(errs.max())
    k = int(np.flatnonzero(errs >= worst - tol)[0])
    return PseudoOrbitCheck(bool(worst <= po.delta + tol), po.base + k, worst, tuple(errs.tolist()))


def as_orbit(sys, po):
    """A pseudo-orbit with zero step errors, as an :class:`Orbit`."""
    if po.delta != 0 or not verify_pseudo_orbit(sys, po).ok:
        raise ValueError("not an orbit: step errors are non-zero")
    return Orbit(po.base, po.points, po.sigma)


# ------------------------------------------------------------ generation


def perturb(space, target, delta, rng):
    """A random point within ``delta`` of ``target``."""
    if delta == 0:
        return target
    if isinstance(space, Circle):
        return space.canon(target + rng.uniform(-delta, delta))
    if isinstance(space, Interval):
        return space.canon(target + rng.uniform(-delta, delta))
    if isinstance(space, BinaryShift):
        # flipping only coordinates with |i| >= k keeps the distance <= 2**-k <= delta
        k = max(0, math.ceil(-math.log2(delta))) if delta < 1 else 0
        if k > space.W:
            return target
        flips = 0
        for p in range(space.nbits):
            if abs(p - space.W) >= k and rng.random() < 0.5:
                flips |= 1 << p
        return target ^ flips
    if isinstance(space, FiniteTable):
        near = [j for j in range(space.size) if space.distance(target, j) <= delta]
        return near[int(rng.integers(len(near)))]
    raise SpaceMismatchError(f"no perturbation model for {space.kind}")


def _generate(sys, x0, sigma, lo, hi, step_delta, rng):
    if lo > 0 or hi < 0:
        raise ValueError("window must contain index 0")
    sigma.check_alphabet(sys.m)
    space = sys.space
    x0 = space.check_point(x0)
    fwd = [x0]
    for i in range(hi):
        fwd.append(perturb(space, sys.apply(sigma.symbol_at(i), fwd[-1]), step_delta(i), rng))
    bwd = []
    cur = x0
    for i in range(-1, lo - 1, -1):
        lam = sigma.symbol_at(i)
        if not sys.invertible_symbol(lam):
            raise NotInvertibleError(f"backward iterate through non-invertible map {lam}")
        cur = sys.apply_inverse(lam, perturb(space, cur, step_delta(i), rng))
        bwd.append(cur)
    return tuple(reversed(bwd)) + tuple(fwd)


def generate_orbit(sys, x0, sigma, lo, hi):
    """True orbit through ``x0`` at index 0 over ``lo .. hi``."""
    pts = _generate(sys, x0, sigma, lo, hi, lambda i: 0.0, None)
    return Orbit(lo, pts, sigma)


def generate_pseudo_orbit(sys, x0, sigma, lo, hi, delta, rng):
    """Each step lands uniformly within ``delta`` of the exact image."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    pts = _generate(sys, x0, sigma, lo, hi, lambda i: delta, rng)
    return PseudoOrbit(lo, pts, sigma, float(delta))


def generate_decaying_pseudo_orbit(sys, x0, sigma, lo, hi, profile, rng):
    """Step ``i`` errs by at most ``profile(|i|)``; ``delta`` is the largest one used."""
    levels = {i: float(profile(abs(i))) for i in range(lo, hi)}
    if any(v < 0 for v in levels.values()):
        raise ValueError("profile values must be non-negative")
    pts = _generate(sys, x0, sigma, lo, hi, levels.__getitem__, rng)
    return PseudoOrbit(lo, pts, sigma, max(levels.values(), default=0.0))


def geometric_profile(scale, ratio=0.5):
    return lambda k: scale * ratio ** k


# --------------------------------------------------------------- metric


def tilde_distance(space, a, b, tail_bound_target=None):
    """``sup_i d(a_i, b_i) / 2**|i|`` over the common window.

    Indices outside the common window contribute at most
    ``diam * 2**-m`` with ``m`` the smallest uncovered ``|i|``; sequences
    that both start at index >= 0 are treated as one-sided.
    """
    lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
    if lo > hi:
        raise ValueError("windows are disjoint")
    idx = np.arange(lo, hi + 1)
    pa = space.as_array([a.point_at(i) for i in idx])
    pb = space.as_array([b.point_at(i) for i in idx])
    value = float((space.distance_array(pa, pb) / np.ldexp(1.0, np.abs(idx))).max())
    one_sided = min(a.lo, b.lo) >= 0
    if lo > 0 or hi < 0:
        m = 0
    else:
        m = hi + 1 if one_sided else min(hi + 1, 1 - lo)
    bound = space.diameter() * 2.0 ** -m
    if tail_bound_target is not None and bound > tail_bound_target:
        raise InsufficientWindowError(
            f"tail bound {bound:.3g} exceeds target {tail_bound_target:.3g}; widen the window")
    return TildeDistance(value, bound)


# ----------------------------------------------------------- Z+ -> Z


def extend_zplus_to_z(sys, po, lam, depth):
    """Prefix a one-sided pseudo-orbit with the backward orbit of ``x_0``
    under ``f_lam``; the result is a pseudo-orbit with the same ``delta``."""
    if po.base != 0:
        raise ValueError("extension expects a window starting at index 0")
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if not sys.invertible_symbol(lam):
        raise NotInvertibleError(f"map {lam} has no inverse iterates")
    back = []
    cur = po.points[0]
    for _ in range(depth):
        cur = sys.apply_inverse(lam, cur)
        back.append(cur)
    word = (lam,) * depth + tuple(int(s) for s in po.symbols())
    sigma = SymbolWord(-depth, word, "fail_outside")
    return PseudoOrbit(-depth, tuple(reversed(back)) + po.points, sigma, po.delta)


# ------------------------------------------------------------ serialisation


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def pseudo_orbit_records(sys, po):
    errs = step_errors(sys, po)
    recs = []
    for k, i in enumerate(po.indices):
        last = i == po.hi
        recs.append({
            "i": i,
            "point": sys.space.point_to_json(po.points[k]),
            "symbol": None if last else int(po.sigma.symbol_at(i)),
            "step_error": None if last else float(errs[k]),
        })
    return recs


def dump_jsonl(sys, po, path):
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in pseudo_orbit_records(sys, po))
    _atomic_write(path, text)


def load_jsonl(sys, path, delta=None):
    """Read a pseudo-orbit; ``delta`` defaults to the largest stored step error."""
    recs = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
    recs.sort(key=lambda r: r["i"])
    base = recs[0]["i"]
    if [r["i"] for r in recs] != list(range(base, base + len(recs))):
        raise ValueError("records do not form a contiguous window")
    pts = tuple(sys.space.point_from_json(r["point"]) for r in recs)
    word = tuple(r["symbol"] for r in recs[:-1])
    if delta is None:
        delta = max((r["step_error"] for r in recs[:-1]), default=0.0)
    return PseudoOrbit(base, pts, SymbolWord(base, word, "fail_outside"), float(delta))


def save_ensemble(sys, ensemble, directory):
    directory = Path(directory)
    names = []
    for k, po in enumerate(ensemble.members):
        name = f"member_{k:05d}.jsonl"
        dump_jsonl(sys, po, directory / name)
        names.append(name)
    manifest = {"system": sys.to_json(), "delta": ensemble.delta, "count": len(names), "members": names}
    _atomic_write(directory / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_ensemble(directory):
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    sys = IFSystem.from_json(manifest["system"])
    delta = manifest["delta"]
    members = [load_jsonl(sys, directory / name, delta) for name in manifest["members"]]
    return sys, PseudoOrbitEnsemble(members, delta)


def check_ensemble(sys, ensemble):
    for po in ensemble:
        if po.delta > ensemble.delta:
            raise PreconditionError("member delta exceeds the ensemble delta")
        if not verify_pseudo_orbit(sys, po).ok:
            raise PreconditionError("ensemble member is not a pseudo-orbit")
