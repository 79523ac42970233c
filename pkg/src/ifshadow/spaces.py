"""Compact metric spaces the systems act on.

Four concrete spaces are provided:

* :class:`Circle` -- ``R/Z`` with the arc metric ``min(|x-y|, 1-|x-y|)``.
* :class:`Interval` -- ``[0, 1]`` with ``|x - y|``.
* :class:`BinaryShift` -- two-sided binary sequences seen through the window
  ``-W..W``; distance ``2**-min{|i| : x_i != y_i}``.
* :class:`FiniteTable` -- a finite set with an explicit distance matrix.

Points are plain Python values: floats for the circle and the interval,
integer codes for binary windows (bit ``i + W`` holds coordinate ``i``) and
integer indices for tables.  Every space also offers ``distance_array`` for
vectorised work on numpy arrays of points.
"""
from dataclasses import dataclass, field
from functools import lru_cache
import math
import numbers

import numpy as np

from .errors import SpaceMismatchError

#: global tolerance for floating comparisons
TAU = 1e-9

EXTENSIONS = ("periodic", "zero")


@dataclass(frozen=True)
class GridSample:
    points: list
    resolution: float

    def __len__(self):
        return len(self.points)


class Space:
    kind = None
    exact = False  # distances exactly representable, compare with ==
    finite = False

    def canon(self, x):
        return x

    def distance(self, a, b):
        raise NotImplementedError

    def distance_array(self, a, b):
        raise NotImplementedError

    def diameter(self):
        raise NotImplementedError

    def grid(self, n):
        raise NotImplementedError

    def random_point(self, rng):
        return self.point_from_array(self.random_points(rng, 1)[0])

    def random_points(self, rng, n):
        raise NotImplementedError

    def as_array(self, points):
        return np.asarray(points, dtype=np.float64)

    def point_from_array(self, value):
        return float(value)

    def check_point(self, x):
        return x

    def point_to_json(self, x):
        return x

    def point_from_json(self, obj):
        return self.check_point(obj)

    def params(self):
        return {}

    def to_json(self):
        return {"kind": self.kind, "params": self.params()}


def _check_real(space, x):
    if isinstance(x, bool) or not isinstance(x, numbers.Real):
        raise SpaceMismatchError(f"{space.kind} expects a real point, got {x!r}")
    x = float(x)
    if not math.isfinite(x):
        raise SpaceMismatchError(f"non-finite point {x!r}")
    return x


@dataclass(frozen=True)
class Circle(Space):
    kind = "circle"

    def canon(self, x):
        x = _check_real(self, x) % 1.0
        # -1e-18 % 1.0 rounds to 1.0
        return 0.0 if x >= 1.0 else x

    def check_point(self, x):
        return self.canon(x)

    def distance(self, a, b):
        d = abs(_check_real(self, a) - _check_real(self, b)) % 1.0
        return min(d, 1.0 - d)

    def distance_array(self, a, b):
        d = np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) % 1.0
        return np.minimum(d, 1.0 - d)

    def diameter(self):
        return 0.5

    def grid(self, n):
        if n < 1:
            raise ValueError("grid needs n >= 1")
        return GridSample(np.arange(n) / n, 1.0 / (2 * n))

    def random_points(self, rng, n):
        return rng.random(n)


@dataclass(frozen=True)
class Interval(Space):
    kind = "interval"

    def canon(self, x):
        return min(max(_check_real(self, x), 0.0), 1.0)

    def check_point(self, x):
        x = _check_real(self, x)
        if not 0.0 <= x <= 1.0:
            raise SpaceMismatchError(f"{x} outside [0, 1]")
        return x

    def distance(self, a, b):
        return abs(_check_real(self, a) - _check_real(self, b))

    def distance_array(self, a, b):
        return np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))

    def diameter(self):
        return 1.0

    def grid(self, n):
        if n < 1:
            raise ValueError("grid needs n >= 1")
        if n == 1:
            return GridSample(np.zeros(1), 1.0)
        return GridSample(np.linspace(0.0, 1.0, n), 1.0 / (2 * (n - 1)))

    def random_points(self, rng, n):
        return rng.random(n)


@lru_cache(maxsize=16)
def _kmin_table(W):
    """``kmin[m]`` = smallest ``|i|`` among set bits of mask ``m`` (W+1 if m == 0)."""
    size = 1 << (2 * W + 1)
    table = np.full(size, W + 1, dtype=np.int64)
    masks = np.arange(size, dtype=np.int64)
    for k in range(W, -1, -1):
        bits = (1 << (W + k)) | (1 << (W - k))
        table[(masks & bits) != 0] = k
    table.setflags(write=False)
    return table


@dataclass(frozen=True)
class BinaryShift(Space):
    """Binary sequences observed on the window ``-W..W``.

    ``extension`` says how the window continues outside ``-W..W``:
    ``"periodic"`` treats the window as one period of a ``2W+1``-periodic
    sequence (the metric on windows is then exact and the shift is a
    bijection); ``"zero"`` treats coordinates outside as 0, so the window is
    a truncation and the metric carries an error of at most ``2**-W``.
    """

    W: int = 4
    extension: str = "periodic"
    kind = "binary_shift"
    exact = True
    finite = True

    def __post_init__(self):
        if isinstance(self.W, bool) or not isinstance(self.W, int) or self.W < 1:
            raise ValueError("window radius W must be an integer >= 1")
        if self.extension not in EXTENSIONS:
            raise ValueError(f"extension must be one of {EXTENSIONS}")

    @property
    def nbits(self):
        return 2 * self.W + 1

    @property
    def size(self):
        return 1 << self.nbits

    @property
    def mask(self):
        return self.size - 1

    @property
    def truncation_error(self):
        return 0.0 if self.extension == "periodic" else 2.0 ** -self.W

    def check_point(self, x):
        if isinstance(x, (bool, np.bool_)) or not isinstance(x, (numbers.Integral,)):
            raise SpaceMismatchError(f"binary window expects an integer code, got {x!r}")
        x = int(x)
        if not 0 <= x < self.size:
            raise SpaceMismatchError(f"code {x} outside window of radius {self.W}")
        return x

    canon = check_point

    def bit(self, x, i):
        return (x >> (i + self.W)) & 1

    def bits(self, x):
        """Coordinates ``x_{-W} .. x_W`` as a tuple."""
        x = self.check_point(x)
        return tuple((x >> p) & 1 for p in range(self.nbits))

    def from_bits(self, bits):
        bits = list(bits)
        if len(bits) != self.nbits or any(v not in (0, 1) for v in bits):
            raise SpaceMismatchError(f"need {self.nbits} bits, got {bits!r}")
        return sum(v << p for p, v in enumerate(bits))

    def first_disagreement(self, a, b):
        """``min |i|`` with ``a_i != b_i``; ``None`` when the windows agree."""
        m = self.check_point(a) ^ self.check_point(b)
        if m == 0:
            return None
        if self.W <= 10:
            return int(_kmin_table(self.W)[m])
        return min(abs(p - self.W) for p in range(self.nbits) if (m >> p) & 1)

    def distance(self, a, b):
        k = self.first_disagreement(a, b)
        return 0.0 if k is None else 2.0 ** -k

    def distance_exponent_array(self, a, b):
        """Integer ``k`` with distance ``2**-k``; ``W+1`` marks equal windows."""
        m = np.bitwise_xor(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))
        return _kmin_table(self.W)[m]

    def distance_array(self, a, b):
        k = self.distance_exponent_array(a, b)
        return np.where(k > self.W, 0.0, np.ldexp(1.0, -k))

    def diameter(self):
        return 1.0

    def grid(self, n=None):
        # n is ignored: the whole window space is enumerated
        if n is not None and n < 1:
            raise ValueError("grid needs n >= 1")
        return GridSample(np.arange(self.size, dtype=np.int64), 0.0)

    def random_points(self, rng, n):
        return rng.integers(0, self.size, size=n, dtype=np.int64)

    def as_array(self, points):
        return np.asarray(points, dtype=np.int64)

    def point_from_array(self, value):
        return int(value)

    def point_to_json(self, x):
        return list(self.bits(x))

    def point_from_json(self, obj):
        if isinstance(obj, list):
            return self.from_bits(obj)
        return self.check_point(obj)

    def params(self):
        return {"W": self.W, "extension": self.extension}


@dataclass(frozen=True)
class FiniteTable(Space):
    matrix: tuple = field(default=((0.0,),))
    kind = "finite_table"
    exact = True
    finite = True

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
            raise ValueError("distance matrix must be square and non-empty")
        if (mat < 0).any() or not np.array_equal(mat, mat.T):
            raise ValueError("distance matrix must be symmetric and non-negative")
        off = ~np.eye(len(mat), dtype=bool)
        if (np.diag(mat) != 0).any() or (mat[off] <= 0).any():
            raise ValueError("distance must vanish exactly on the diagonal")
        if (mat[:, None, :] > mat[:, :, None] + mat[None, :, :]).any():
            raise ValueError("distance matrix violates the triangle inequality")
        object.__setattr__(self, "matrix", tuple(tuple(float(v) for v in row) for row in mat))
        object.__setattr__(self, "_mat", mat)

    @property
    def size(self):
        return len(self.matrix)

    def check_point(self, x):
        if isinstance(x, (bool, np.bool_)) or not isinstance(x, numbers.Integral):
            raise SpaceMismatchError(f"finite table expects an index, got {x!r}")
        x = int(x)
        if not 0 <= x < self.size:
            raise SpaceMismatchError(f"index {x} outside table of size {self.size}")
        return x

    canon = check_point

    def distance(self, a, b):
        return self.matrix[self.check_point(a)][self.check_point(b)]

    def distance_array(self, a, b):
        return self._mat[np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)]

    def diameter(self):
        return float(self._mat.max())

    def grid(self, n=None):
        if n is not None and n < 1:
            raise ValueError("grid needs n >= 1")
        return GridSample(np.arange(self.size, dtype=np.int64), 0.0)

    def random_points(self, rng, n):
        return rng.integers(0, self.size, size=n, dtype=np.int64)

    def as_array(self, points):
        return np.asarray(points, dtype=np.int64)

    def point_from_array(self, value):
        return int(value)

    def params(self):
        return {"matrix": [list(row) for row in self.matrix]}


def space_from_json(obj):
    kind = obj.get("kind")
    params = obj.get("params") or {}
    if kind == "circle":
        return Circle()
    if kind == "interval":
        return Interval()
    if kind == "binary_shift":
        return BinaryShift(W=int(params.get("W", 4)), extension=params.get("extension", "periodic"))
    if kind == "finite_table":
        return FiniteTable(tuple(tuple(row) for row in params["matrix"]))
    raise ValueError(f"unknown space kind {kind!r}")


# functional spellings of the space operations


def distance(space, a, b):
    return space.distance(a, b)


def diameter(space):
    return space.diameter()


def grid(space, n):
    return space.grid(n)


def random_point(space, rng):
    return space.random_point(rng)
