"""Iterated function systems: member maps, symbol words, compositions and
the constants that quantify expansion.

An :class:`IFSystem` is an ordered tuple of maps on one space; symbols are the
indices ``0 .. m-1``.  A :class:`SymbolWord` is a finite window of a symbol
sequence together with a rule for indices outside the window.
"""
from dataclasses import dataclass, field
import itertools
import math
import numbers

import numpy as np

from .errors import (
    NonFiniteFiberError,
    NotInvertibleError,
    SizeCapError,
    SpaceMismatchError,
    SymbolError,
)
from .spaces import BinaryShift, Circle, FiniteTable, Interval

POWER_CAP = 10_000
PAIR_CAP = 1 << 27  # exhaustive pair enumeration limit for finite spaces


class Fiber(list):
    """Preimage list.  ``plateau`` marks a non-finite fiber that is
    represented by the endpoints of the interval it fills."""

    def __init__(self, points=(), plateau=False):
        super().__init__(points)
        self.plateau = plateau


# --------------------------------------------------------------------- maps


class MapDescriptor:
    family = None

    def check_space(self, space):
        pass

    def invertible(self, space):
        return False

    def apply(self, space, x):
        raise NotImplementedError

    def apply_array(self, space, xs):
        return np.array([self.apply(space, space.point_from_array(x)) for x in xs])

    def preimages(self, space, y):
        raise NotImplementedError

    def inverse(self, space):
        raise NotInvertibleError(f"{self.family} map is not invertible")

    def apply_inverse(self, space, x):
        return self.inverse(space).apply(space, x)

    def apply_inverse_array(self, space, xs):
        return self.inverse(space).apply_array(space, xs)

    def lipschitz(self, space):
        """Analytic forward Lipschitz constant, or None."""
        return None

    def expansion(self, space):
        """Analytic ``(beta, delta0, alpha)``, or None."""
        return None

    def to_json(self):
        raise NotImplementedError


@dataclass(frozen=True)
class CircleAffine(MapDescriptor):
    """``x -> a*x + b (mod 1)`` on the circle, ``a >= 2``."""

    a: int
    b: float = 0.0
    family = "circle_affine"

    def __post_init__(self):
        if isinstance(self.a, bool) or not isinstance(self.a, numbers.Integral) or self.a < 2:
            raise ValueError("circle_affine needs an integer slope a >= 2")
        b = float(self.b) % 1.0
        object.__setattr__(self, "a", int(self.a))
        object.__setattr__(self, "b", 0.0 if b >= 1.0 else b)

    def check_space(self, space):
        if not isinstance(space, Circle):
            raise SpaceMismatchError("circle_affine acts on the circle")

    def apply(self, space, x):
        return space.canon(self.a * x + self.b)

    def apply_array(self, space, xs):
        return (self.a * np.asarray(xs, dtype=np.float64) + self.b) % 1.0

    def preimages(self, space, y):
        base = ((y - self.b) % 1.0) / self.a
        return Fiber(space.canon(base + k / self.a) for k in range(self.a))

    def lipschitz(self, space):
        return float(self.a)

    def expansion(self, space):
        # d(fx, fy) = a d(x, y) exactly while d(x, y) <= 1/(2a)
        return float(self.a), 1.0 / (2 * self.a), float(self.a)

    def to_json(self):
        return {"family": self.family, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class IntervalTent(MapDescriptor):
    family = "interval_tent"

    def check_space(self, space):
        if not isinstance(space, Interval):
            raise SpaceMismatchError("interval_tent acts on [0, 1]")

    def apply(self, space, x):
        return space.canon(1.0 - abs(1.0 - 2.0 * x))

    def apply_array(self, space, xs):
        return 1.0 - np.abs(1.0 - 2.0 * np.asarray(xs, dtype=np.float64))

    def preimages(self, space, y):
        lo, hi = y / 2.0, 1.0 - y / 2.0
        return Fiber([lo] if lo == hi else [lo, hi])

    def lipschitz(self, space):
        return 2.0

    def to_json(self):
        return {"family": self.family}


@dataclass(frozen=True)
class IntervalClamp(MapDescriptor):
    """``x -> min(2x, 1)``: continuous, not open, flat on ``[1/2, 1]``."""

    family = "interval_clamp"

    def check_space(self, space):
        if not isinstance(space, Interval):
            raise SpaceMismatchError("interval_clamp acts on [0, 1]")

    def apply(self, space, x):
        return min(2.0 * x, 1.0)

    def apply_array(self, space, xs):
        return np.minimum(2.0 * np.asarray(xs, dtype=np.float64), 1.0)

    def preimages(self, space, y):
        if y >= 1.0:
            return Fiber([0.5, 1.0], plateau=True)
        return Fiber([y / 2.0])

    def lipschitz(self, space):
        return 2.0

    def to_json(self):
        return {"family": self.family}


@dataclass(frozen=True)
class ShiftMap(MapDescriptor):
    """Shift on binary windows, optionally followed by bitwise complement.

    ``direction=+1`` is the left shift ``x'_i = x_{i+1}``; ``-1`` is its
    inverse, the right shift.  The coordinate entering the window comes from
    the space's extension rule (wrap-around for periodic windows, 0 for
    zero-extended ones) before the complement is taken.
    """

    flip: bool = False
    direction: int = 1
    family = "shift"

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        object.__setattr__(self, "flip", bool(self.flip))

    def check_space(self, space):
        if not isinstance(space, BinaryShift):
            raise SpaceMismatchError("shift acts on binary windows")

    def invertible(self, space):
        return True

    def apply_array(self, space, xs):
        xs = np.asarray(xs, dtype=np.int64)
        top = space.nbits - 1
        if self.direction == 1:
            out = xs >> 1
            if space.extension == "periodic":
                out = out | ((xs & 1) << top)
        else:
            out = (xs << 1) & space.mask
            if space.extension == "periodic":
                out = out | ((xs >> top) & 1)
        if self.flip:
            out = out ^ space.mask
        return out

    def apply(self, space, x):
        x = space.check_point(x)
        return int(self.apply_array(space, np.array([x]))[0])

    def inverse(self, space):
        return ShiftMap(self.flip, -self.direction)

    def preimages(self, space, y):
        return Fiber([self.inverse(space).apply(space, y)])

    def lipschitz(self, space):
        # the first disagreement index moves by at most one
        return 2.0

    def expansion(self, space):
        return 2.0, 1.0, 0.5

    def to_json(self):
        return {"family": self.family, "flip": self.flip, "direction": self.direction}


@dataclass(frozen=True)
class FiniteMap(MapDescriptor):
    table: tuple
    family = "finite"

    def __post_init__(self):
        object.__setattr__(self, "table", tuple(int(v) for v in self.table))

    def check_space(self, space):
        if not isinstance(space, FiniteTable):
            raise SpaceMismatchError("finite maps act on finite tables")
        if len(self.table) != space.size or any(not 0 <= v < space.size for v in self.table):
            raise SpaceMismatchError("table does not map the space into itself")

    def invertible(self, space):
        return len(set(self.table)) == len(self.table)

    def apply(self, space, x):
        return self.table[space.check_point(x)]

    def apply_array(self, space, xs):
        return np.asarray(self.table, dtype=np.int64)[np.asarray(xs, dtype=np.int64)]

    def preimages(self, space, y):
        y = space.check_point(y)
        return Fiber(i for i, v in enumerate(self.table) if v == y)

    def inverse(self, space):
        if not self.invertible(space):
            raise NotInvertibleError("finite map is not a bijection")
        inv = [0] * len(self.table)
        for i, v in enumerate(self.table):
            inv[v] = i
        return FiniteMap(tuple(inv))

    def lipschitz(self, space):
        idx = np.arange(space.size)
        x, y = np.meshgrid(idx, idx)
        off = x != y
        t = np.asarray(self.table)
        ratio = space.distance_array(t[x], t[y])[off] / space.distance_array(x, y)[off]
        return float(ratio.max()) if ratio.size else 1.0

    def to_json(self):
        return {"family": self.family, "table": list(self.table)}


@dataclass(frozen=True)
class Composite(MapDescriptor):
    """``maps[-1] o ... o maps[0]`` (the first entry acts first)."""

    maps: tuple
    family = "composite"

    def __post_init__(self):
        if not self.maps:
            raise ValueError("composite of no maps")
        object.__setattr__(self, "maps", tuple(self.maps))

    def check_space(self, space):
        for f in self.maps:
            f.check_space(space)

    def invertible(self, space):
        return all(f.invertible(space) for f in self.maps)

    def apply(self, space, x):
        for f in self.maps:
            x = f.apply(space, x)
        return x

    def apply_array(self, space, xs):
        for f in self.maps:
            xs = f.apply_array(space, xs)
        return xs

    def preimages(self, space, y):
        current = Fiber([y])
        for f in reversed(self.maps):
            nxt = Fiber()
            for p in current:
                fib = f.preimages(space, p)
                nxt.extend(fib)
                nxt.plateau = nxt.plateau or fib.plateau or current.plateau
            current = nxt
        return current

    def inverse(self, space):
        return Composite(tuple(f.inverse(space) for f in reversed(self.maps)))

    def lipschitz(self, space):
        ks = [f.lipschitz(space) for f in self.maps]
        return None if None in ks else math.prod(ks)

    def to_json(self):
        return {"family": self.family, "maps": [f.to_json() for f in self.maps]}


def map_from_json(obj):
    fam = obj.get("family")
    if fam == "circle_affine":
        return CircleAffine(obj["a"], obj.get("b", 0.0))
    if fam == "interval_tent":
        return IntervalTent()
    if fam == "interval_clamp":
        return IntervalClamp()
    if fam == "shift":
        return ShiftMap(obj.get("flip", False), obj.get("direction", 1))
    if fam == "finite":
        return FiniteMap(tuple(obj["table"]))
    if fam == "composite":
        return Composite(tuple(map_from_json(m) for m in obj["maps"]))
    raise ValueError(f"unknown map family {fam!r}")


def compose_circle_affine(first, second):
    """``second o first`` for two circle-affine maps, as one circle-affine map."""
    return CircleAffine(first.a * second.a, second.a * first.b + second.b)


# ------------------------------------------------------------------ systems


@dataclass(frozen=True)
class IFSystem:
    space: object
    maps: tuple
    labels: tuple = field(default=None, compare=False)

    def __post_init__(self):
        maps = tuple(self.maps)
        if not maps:
            raise ValueError("an IFS needs at least one map")
        for f in maps:
            f.check_space(self.space)
        object.__setattr__(self, "maps", maps)

    @property
    def m(self):
        return len(self.maps)

    def _map(self, lam):
        if isinstance(lam, bool) or not isinstance(lam, numbers.Integral) or not 0 <= lam < self.m:
            raise SymbolError(f"symbol {lam!r} outside 0..{self.m - 1}")
        return self.maps[lam]

    def apply(self, lam, x):
        return self._map(lam).apply(self.space, self.space.check_point(x))

    def apply_array(self, lam, xs):
        return self._map(lam).apply_array(self.space, xs)

    def preimages(self, lam, y):
        fib = self._map(lam).preimages(self.space, self.space.check_point(y))
        return fib

    def invertible_symbol(self, lam):
        return self._map(lam).invertible(self.space)

    def apply_inverse(self, lam, x):
        f = self._map(lam)
        if not f.invertible(self.space):
            raise NotInvertibleError(f"map {lam} ({f.family}) is not a homeomorphism")
        return f.apply_inverse(self.space, x)

    def apply_inverse_array(self, lam, xs):
        f = self._map(lam)
        if not f.invertible(self.space):
            raise NotInvertibleError(f"map {lam} ({f.family}) is not a homeomorphism")
        return f.apply_inverse_array(self.space, xs)

    @property
    def invertible(self):
        return all(f.invertible(self.space) for f in self.maps)

    @property
    def is_circle_affine(self):
        return isinstance(self.space, Circle) and all(isinstance(f, CircleAffine) for f in self.maps)

    @property
    def is_shift(self):
        return isinstance(self.space, BinaryShift) and all(isinstance(f, ShiftMap) for f in self.maps)

    def affine_params(self):
        return (np.array([f.a for f in self.maps], dtype=np.int64),
                np.array([f.b for f in self.maps], dtype=np.float64))

    def to_json(self):
        return {"space": self.space.to_json(), "maps": [f.to_json() for f in self.maps]}

    @classmethod
    def from_json(cls, obj):
        from .spaces import space_from_json

        return cls(space_from_json(obj["space"]), tuple(map_from_json(m) for m in obj["maps"]))


def apply(sys, lam, x):
    return sys.apply(lam, x)


def preimages(sys, lam, y):
    """All ``x`` with ``f_lam(x) = y``.  Plateau fibers raise unless the map
    represents them (check ``.plateau`` on the result)."""
    fib = sys.preimages(lam, y)
    if fib.plateau and not fib:
        raise NonFiniteFiberError("preimage set is infinite")
    return fib


# -------------------------------------------------------------- symbol words

WORD_EXTENSIONS = ("repeat_last", "cyclic", "fail_outside")


@dataclass(frozen=True)
class SymbolWord:
    """Symbols ``word[k]`` at indices ``base + k``.

    Outside the window, ``repeat_last`` continues with the nearest end
    symbol, ``cyclic`` repeats the word periodically and ``fail_outside``
    raises :class:`SymbolError`.
    """

    base: int
    word: tuple
    extension: str = "fail_outside"

    def __post_init__(self):
        object.__setattr__(self, "word", tuple(int(s) for s in self.word))
        object.__setattr__(self, "base", int(self.base))
        if self.extension not in WORD_EXTENSIONS:
            raise ValueError(f"extension must be one of {WORD_EXTENSIONS}")
        if not self.word and self.extension != "fail_outside":
            raise ValueError("an empty word can only use fail_outside")

    @property
    def lo(self):
        return self.base

    @property
    def hi(self):
        """One past the last covered index."""
        return self.base + len(self.word)

    def covers(self, i):
        return self.lo <= i < self.hi

    def __call__(self, i):
        return self.symbol_at(i)

    def symbol_at(self, i):
        k = i - self.base
        if 0 <= k < len(self.word):
            return self.word[k]
        if self.extension == "cyclic":
            return self.word[k % len(self.word)]
        if self.extension == "repeat_last":
            return self.word[0] if k < 0 else self.word[-1]
        raise SymbolError(f"symbol word undefined at index {i} (covers {self.lo}..{self.hi - 1})")

    def window(self, lo, hi):
        """Symbols at ``lo .. hi-1`` as an int array."""
        return np.array([self.symbol_at(i) for i in range(lo, hi)], dtype=np.int64)

    def check_alphabet(self, m):
        if any(not 0 <= s < m for s in self.word):
            raise SymbolError(f"word uses symbols outside 0..{m - 1}")

    def reversed(self):
        """Word for the time-reversed sequence: symbol at ``-i-1`` moves to ``i``."""
        return SymbolWord(-self.hi, tuple(reversed(self.word)), self.extension)

    @classmethod
    def constant(cls, lam, base=0, length=1):
        return cls(base, (lam,) * length, "repeat_last")

    @classmethod
    def random(cls, m, lo, hi, rng, extension="fail_outside"):
        return cls(lo, tuple(int(s) for s in rng.integers(0, m, size=hi - lo)), extension)

    def to_json(self):
        return {"base": self.base, "word": list(self.word), "extension": self.extension}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["base"], tuple(obj["word"]), obj.get("extension", "fail_outside"))


def compose_forward(sys, sigma, n, x):
    """``F_{sigma,n}(x) = f_{sigma(n-1)} o ... o f_{sigma(0)}(x)``; identity for n = 0."""
    if n < 0:
        raise ValueError("compose_forward needs n >= 0")
    x = sys.space.check_point(x)
    for i in range(n):
        x = sys.apply(sigma.symbol_at(i), x)
    return x


def compose_backward(sys, sigma, n, x):
    """``F_{sigma,-n}(x)``: undo ``f_{sigma(-1)}`` first, ``f_{sigma(-n)}`` last."""
    if n < 0:
        raise ValueError("compose_backward needs n >= 1")
    x = sys.space.check_point(x)
    for i in range(-1, -n - 1, -1):
        x = sys.apply_inverse(sigma.symbol_at(i), x)
    return x


# ------------------------------------------------------------------ constants


@dataclass(frozen=True)
class ExpansionReport:
    beta: float
    delta0: float
    alpha: float
    method: str
    samples: int = 0
    seed: int = None

    @property
    def expands_small_distances(self):
        return self.alpha > 1.0

    def to_json(self):
        return {
            "beta": self.beta,
            "delta0": self.delta0,
            "alpha": self.alpha,
            "method": self.method,
            "samples": self.samples,
            "seed": self.seed,
            "expands_small_distances": self.expands_small_distances,
        }


@dataclass(frozen=True)
class LipschitzReport:
    K: float
    method: str
    forward: float
    inverse: float = None

    @property
    def inverse_included(self):
        return self.inverse is not None

    def to_json(self):
        return {"K": self.K, "method": self.method, "forward": self.forward,
                "inverse": self.inverse, "inverse_included": self.inverse_included}


def iter_pairs(space, chunk=1 << 22):
    """All ordered pairs of a finite space, in flat array chunks."""
    n = space.size
    if n * n > PAIR_CAP:
        raise SizeCapError(f"{n * n} pairs exceed the enumeration cap")
    rows = max(1, chunk // n)
    ys = np.arange(n, dtype=np.int64)
    for start in range(0, n, rows):
        xs = np.arange(start, min(n, start + rows), dtype=np.int64)
        yield np.repeat(xs, n), np.tile(ys, len(xs))


def _exhaustive_ratios(sys, lam, inverse=False):
    """Min and max distance ratio of one map over all distinct pairs,
    together with the min ratio over the closest pairs."""
    space = sys.space
    f = sys.apply_inverse_array if inverse else sys.apply_array
    rmax, rmin = 0.0, math.inf
    for X, Y in iter_pairs(space):
        keep = X != Y
        X, Y = X[keep], Y[keep]
        d = space.distance_array(X, Y)
        fd = space.distance_array(f(lam, X), f(lam, Y))
        r = fd / d
        rmax = max(rmax, float(r.max()))
        rmin = min(rmin, float(r.min()))
    return rmin, rmax


def expansion_constants(sys, samples=10_000, seed=0, method="auto", delta0=None):
    """Global ratio ``beta`` and small-distance constants ``(delta0, alpha)``.

    ``alpha`` is the largest factor with ``d(f x, f y) >= alpha d(x, y)`` for
    every map and every pair with ``d(x, y) <= delta0``.  Analytic values are
    used for circle-affine and shift systems; finite spaces are enumerated;
    everything else is estimated from seeded samples.
    """
    space = sys.space
    infos = [f.expansion(space) for f in sys.maps]
    if method in ("auto", "analytic") and None not in infos:
        beta = max(i[0] for i in infos)
        d0 = min(i[1] for i in infos)
        alpha = min(i[2] for i in infos)
        return ExpansionReport(beta, d0, alpha, "analytic")
    if method == "analytic":
        raise ValueError("no analytic expansion constants for this system")

    if space.finite and method in ("auto", "exhaustive") and space.size ** 2 <= PAIR_CAP:
        pos = [d for row in _distance_matrix(space) for d in row if d > 0]
        d0 = min(pos) if delta0 is None else delta0
        beta, alpha = 0.0, math.inf
        for lam in range(sys.m):
            for X, Y in iter_pairs(space):
                keep = X != Y
                X, Y = X[keep], Y[keep]
                d = space.distance_array(X, Y)
                r = space.distance_array(sys.apply_array(lam, X), sys.apply_array(lam, Y)) / d
                beta = max(beta, float(r.max()))
                small = d <= d0
                if small.any():
                    alpha = min(alpha, float(r[small].min()))
        return ExpansionReport(beta, d0, alpha, "exhaustive", space.size ** 2)

    rng = np.random.default_rng(seed)
    d0 = space.diameter() / 8 if delta0 is None else delta0
    half = max(1, samples // 2)
    beta, alpha = 0.0, math.inf
    for lam in range(sys.m):
        X = space.random_points(rng, half)
        Y = space.random_points(rng, half)
        Xs = space.random_points(rng, half)
        off = rng.uniform(-d0, d0, size=half)
        Ys = np.clip(Xs + off, 0.0, 1.0) if not isinstance(space, Circle) else (Xs + off) % 1.0
        for A, B, small in ((X, Y, False), (Xs, Ys, True)):
            d = space.distance_array(A, B)
            keep = d > 0
            r = space.distance_array(sys.apply_array(lam, A[keep]), sys.apply_array(lam, B[keep])) / d[keep]
            if r.size:
                beta = max(beta, float(r.max()))
                if small:
                    alpha = min(alpha, float(r[d[keep] <= d0].min()))
                else:
                    sm = d[keep] <= d0
                    if sm.any():
                        alpha = min(alpha, float(r[sm].min()))
    return ExpansionReport(beta, d0, alpha, "sampled", 2 * half * sys.m, seed)


def _distance_matrix(space):
    if isinstance(space, FiniteTable):
        return space.matrix
    idx = np.arange(space.size)
    return space.distance_array(idx[:, None], idx[None, :])


def lipschitz_constant(sys, method="auto"):
    """``K >= 1`` bounding every map (and every inverse, when all maps are
    invertible): ``d(f x, f y) <= K d(x, y)``."""
    space = sys.space
    inv = sys.invertible
    if method in ("auto", "analytic"):
        fwd = [f.lipschitz(space) for f in sys.maps]
        bwd = [f.inverse(space).lipschitz(space) for f in sys.maps] if inv else []
        if None not in fwd and None not in bwd:
            kf = max(fwd)
            ki = max(bwd) if inv else None
            return LipschitzReport(max(1.0, kf, ki or 0.0), "analytic", kf, ki)
        if method == "analytic":
            raise ValueError("no analytic Lipschitz constant for this system")
    if not space.finite:
        raise ValueError("non-analytic Lipschitz constants need a finite space")
    kf = max(_exhaustive_ratios(sys, lam)[1] for lam in range(sys.m))
    ki = max(_exhaustive_ratios(sys, lam, inverse=True)[1] for lam in range(sys.m)) if inv else None
    return LipschitzReport(max(1.0, kf, ki or 0.0), "exhaustive", kf, ki)


# ------------------------------------------------------------ derived systems


def power_system(sys, k, cap=POWER_CAP):
    """``F^k``: one map per word ``(l1, ..., lk)``, namely ``f_lk o ... o f_l1``."""
    if k < 1:
        raise ValueError("power_system needs k >= 1")
    if sys.m ** k > cap:
        raise SizeCapError(f"{sys.m}^{k} composite maps exceed the cap of {cap}")
    words = list(itertools.product(range(sys.m), repeat=k))
    maps = []
    for w in words:
        ms = [sys.maps[s] for s in w]
        if len(ms) == 1:
            maps.append(ms[0])
        elif all(isinstance(f, CircleAffine) for f in ms):
            g = ms[0]
            for f in ms[1:]:
                g = compose_circle_affine(g, f)
            maps.append(g)
        else:
            maps.append(Composite(tuple(ms)))
    return IFSystem(sys.space, tuple(maps), labels=tuple(words))


def inverse_system(sys):
    """The system of inverse maps over the same symbols."""
    bad = [lam for lam in range(sys.m) if not sys.invertible_symbol(lam)]
    if bad:
        raise NotInvertibleError(f"maps {bad} are not invertible")
    return IFSystem(sys.space, tuple(f.inverse(sys.space) for f in sys.maps), labels=sys.labels)
