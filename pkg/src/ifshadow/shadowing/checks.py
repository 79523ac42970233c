"""Checkers for the hypotheses behind shadowing: openness of the
maps, expansivity, the separation horizon and contraction on stable sets.

Finite spaces are decided exactly by enumerating pairs; the circle-affine
families get analytic certificates; everything else is sampled, and a
sampled pass is labelled as evidence rather than proof.
"""
from dataclasses import dataclass, field
from fractions import Fraction
import itertools
import math

import numpy as np

from .. import _kernels
from ..errors import NotInvertibleError, PreconditionError, SizeCapError
from ..ifs_core import PAIR_CAP, inverse_system, iter_pairs
from ..orbits import perturb
from ..spaces import TAU, BinaryShift, Circle, Interval
from .solver import OpennessCertificate

EXHAUSTIVE_OPEN_CAP = 2048  # largest finite space checked pair by pair for openness
PREFIX_CAP = 4096
MODES = ("positive", "two_sided")


# ----------------------------------------------------------------- openness


def trial_radius(constants, delta1):
    """Radius of ``d(f x, y)`` in the openness trials: ``alpha * delta1``.

    A map that does not expand small distances reports ``alpha <= 0`` (pairs
    collapse); the implication is then tested at radius ``delta1`` so that it
    does not become vacuous.
    """
    return (constants.alpha if constants.alpha > 0 else 1.0) * delta1


def _distance_table(space):
    idx = np.arange(space.size, dtype=np.int64)
    return space.distance_array(idx[:, None], idx[None, :])


def _open_exhaustive(sys, delta1, radius):
    space = sys.space
    D = _distance_table(space)
    pts = np.arange(space.size, dtype=np.int64)
    for lam in range(sys.m):
        img = sys.apply_array(lam, pts)
        # near[x, y] = distance from x to the closest preimage of y
        near = np.full((space.size, space.size), np.inf)
        for p in range(space.size):
            col = img[p]
            np.minimum(near[:, col], D[:, p], out=near[:, col])
        close = D[img, :] < radius  # row x, column y: d(f x, y) < radius
        bad = close & (near > delta1)
        if bad.any():
            x, y = map(int, np.argwhere(bad)[0])
            return (lam, x, y)
    return None


def _random_near(space, target, radius, rng):
    """A point strictly within ``radius`` of ``target``."""
    if isinstance(space, (Circle, Interval)):
        return space.canon(target + rng.uniform(-1, 1) * radius * (1 - 1e-12))
    if isinstance(space, BinaryShift):
        k = math.floor(-math.log2(radius)) + 1 if radius < 1 else 0
        if k > space.W:
            return target
        return perturb(space, target, 2.0 ** -k, rng)
    close = [j for j in range(space.size) if space.distance(target, j) < radius]
    return close[int(rng.integers(len(close)))]


def openness_instance(sys, lam, x, y, delta1):
    """Does ``B(x, delta1)`` meet ``f_lam^{-1}(y)``?  Returns the closest
    preimage distance (``inf`` for an empty fiber)."""
    fib = sys.preimages(lam, y)
    space = sys.space
    if fib.plateau and isinstance(space, Interval):
        # the fiber fills the interval between its listed endpoints
        lo, hi = min(fib), max(fib)
        return max(lo - x, x - hi, 0.0)
    return min((space.distance(x, p) for p in fib), default=math.inf)


def openness_check(sys, constants, trial_count=1000, seed=0, rng=None):
    """Test ``d(f x, y) < alpha delta1  =>  B(x, delta1) meets f^{-1}(y)``
    with ``delta1 = delta0 / 4``."""
    delta1 = constants.delta0 / 4
    radius = trial_radius(constants, delta1)
    space = sys.space
    if sys.is_circle_affine:
        # the branch (y - b + k)/a nearest x sits at d(f x, y)/a < delta1
        return OpennessCertificate(delta1, True, None, "analytic", 0, radius)
    if space.finite and space.size <= EXHAUSTIVE_OPEN_CAP:
        w = _open_exhaustive(sys, delta1, radius)
        return OpennessCertificate(delta1, w is None, w, "exhaustive", space.size ** 2 * sys.m, radius)
    rng = rng if rng is not None else np.random.default_rng(seed)
    tol = 0.0 if space.exact else TAU
    for t in range(trial_count):
        lam = int(rng.integers(sys.m))
        x = space.random_point(rng)
        y = _random_near(space, sys.apply(lam, x), radius, rng)
        if openness_instance(sys, lam, x, y, delta1) > delta1 + tol:
            return OpennessCertificate(delta1, False, (lam, x, y), "sampled", t + 1, radius)
    return OpennessCertificate(delta1, True, None, "sampled", trial_count, radius)


# -------------------------------------------------- exact pair reachability


def _check_pair_space(space):
    if space.size ** 2 > PAIR_CAP:
        raise SizeCapError(f"{space.size}^2 pairs exceed the enumeration cap")


def _step_images(sys, inverse):
    pts = np.arange(sys.space.size, dtype=np.int64)
    f = sys.apply_inverse_array if inverse else sys.apply_array
    return [f(lam, pts) for lam in range(sys.m)]


def survival_sets(sys, e, strong=False, inverse=False, horizon=None, backend=None):
    """Yield ``S_0, S_1, ...`` where ``S_n[x, y]`` says some word (pair of
    words when ``strong``) keeps the pair within ``e`` for steps ``0..n``.
    Stops at the fixed point or after ``horizon`` steps."""
    space = sys.space
    _check_pair_space(space)
    imgs = _step_images(sys, inverse)
    combos = [(s, t) for s in range(sys.m) for t in range(sys.m)] if strong else [(s, s) for s in range(sys.m)]
    imgx = np.array([imgs[s] for s, _ in combos])
    imgy = np.array([imgs[t] for _, t in combos])
    S = _distance_table(space) <= e
    n = 0
    yield S
    while horizon is None or n < horizon:
        # S_n = S_0 & OR S_{n-1}[f x, g y]; S_n lies inside S_{n-1}, so refining S_{n-1} suffices
        S, changed = _kernels.pair_step(S, imgx, imgy, backend)
        n += 1
        if not changed:
            return
        yield S


def _fixed_point(sys, e, strong, inverse):
    S = None
    for S in survival_sets(sys, e, strong, inverse):
        pass
    return S


# -------------------------------------------------------------- expansivity


@dataclass(frozen=True)
class ExpansivityEstimate:
    constant: float
    horizon: int
    pair_count: int
    mode: str
    verdict: str
    witness: tuple = None
    strong: bool = False
    refutations: int = 0
    candidates: tuple = field(default=(), compare=False)

    @property
    def passed(self):
        return self.verdict != "refuted"

    def to_json(self):
        return {
            "constant": self.constant,
            "horizon": self.horizon,
            "pair_count": self.pair_count,
            "mode": self.mode,
            "strong": self.strong,
            "verdict": self.verdict,
            "witness": list(self.witness) if self.witness is not None else None,
            "refutations": self.refutations,
            "candidates": [dict(c) for c in self.candidates],
        }


def analytic_expansivity(sys, e, mode="positive", strong=False):
    """True when ``e`` is certified analytically, otherwise False.

    Circle-affine (one-sided): pairs within ``delta0 = 1/(2 a_max)`` are
    stretched by at least 2 each step, so any ``e < delta0`` works for a
    shared word.  For independent words with a common slope ``a``, a
    symbol pair with offset ``c = b_s - b_t != 0`` sends points within ``e``
    at least ``|c| - a e`` apart, so ``e < min(delta0, |c|_min / (a + 1))``
    works.  Shift systems on two-sided windows: a disagreement at index
    ``k`` reaches index 0 after ``|k|`` shifts in one direction, so every
    ``e < 1`` works for a shared word.
    """
    if sys.is_circle_affine and mode == "positive":
        a, b = sys.affine_params()
        d0 = 1.0 / (2 * int(a.max()))
        if not strong:
            return e < d0
        if len(set(a.tolist())) != 1:
            return False
        diffs = [abs(x - y) % 1.0 for x in b for y in b]
        diffs = [min(c, 1 - c) for c in diffs if min(c, 1 - c) > 0]
        if not diffs:
            return e < d0
        return e < min(d0, min(diffs) / (int(a[0]) + 1))
    if sys.is_shift and mode == "two_sided" and not strong:
        return e < 1
    return False


def _prefixes(m, depth, strong):
    base = m * m if strong else m
    depth = max(0, depth)
    while depth > 0 and base ** depth > PREFIX_CAP:
        depth -= 1
    if depth == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(itertools.product(range(base), repeat=depth)), dtype=np.int64)


def _sample_pairs(space, e, n, horizon, rng):
    """Distinct pairs within ``e``; continuous offsets are log-uniform down to
    ``e * 2**-(horizon/2)`` so slowly separating pairs are represented."""
    x = space.random_points(rng, n)
    if isinstance(space, (Circle, Interval)):
        lo = math.log(e) - (horizon / 2) * math.log(2)
        off = np.exp(rng.uniform(lo, math.log(e), size=n)) * rng.choice([-1.0, 1.0], size=n)
        y = (x + off) % 1.0 if isinstance(space, Circle) else np.clip(x + off, 0.0, 1.0)
        same = y == x
        y[same] = (x[same] + e / 2) % 1.0 if isinstance(space, Circle) else np.where(x[same] < 0.5, x[same] + e / 2, x[same] - e / 2)
        return x, y
    y = np.array([perturb(space, int(v), e, rng) for v in x], dtype=np.int64)
    same = y == x
    if same.any():
        # fall back to any other point within e
        for k in np.flatnonzero(same):
            others = [j for j in range(min(space.size, 1 << 16)) if j != x[k] and space.distance(int(x[k]), j) <= e]
            if others:
                y[k] = others[int(rng.integers(len(others)))]
    keep = y != x
    return x[keep], y[keep]


def _generic_survival(sys, x, y, prefixes, e, horizon, strong, inverse=False):
    """Numpy survival count for any system with array maps (greedy tail)."""
    space = sys.space
    m = sys.m
    f = sys.apply_inverse_array if inverse else sys.apply_array
    pairs = [(s, t) for s in range(m) for t in range(m)] if strong else [(s, s) for s in range(m)]
    P = len(x)
    Q, D = prefixes.shape
    cx = np.repeat(np.asarray(x), Q)
    cy = np.repeat(np.asarray(y), Q)
    pref = np.tile(prefixes, (P, 1))
    alive = space.distance_array(cx, cy) <= e
    steps = alive.astype(np.int64)
    for i in range(1, horizon + 1):
        if not alive.any():
            break
        if i - 1 < D:
            code = pref[:, i - 1]
            sx = code // m if strong else code
            sy = code % m if strong else code
            nx = cx.copy()
            ny = cy.copy()
            for s in range(m):
                nx[sx == s] = f(s, cx[sx == s])
                ny[sy == s] = f(s, cy[sy == s])
            d = space.distance_array(nx, ny)
        else:
            d = np.full(cx.shape, np.inf)
            nx, ny = cx.copy(), cy.copy()
            for s, t in pairs:
                tx, ty = f(s, cx), f(t, cy)
                dd = space.distance_array(tx, ty)
                better = dd < d
                d = np.where(better, dd, d)
                nx = np.where(better, tx, nx)
                ny = np.where(better, ty, ny)
        alive &= d <= e
        cx = np.where(alive, nx, cx)
        cy = np.where(alive, ny, cy)
        steps = np.where(alive, i + 1, steps)
    return steps.reshape(P, Q).max(axis=1)


def pair_survival(sys, x, y, e, horizon, strong=False, prefix_depth=4, inverse=False, backend=None):
    """Adversarial survival counts; ``horizon + 1`` means the pair stayed
    within ``e`` for every step ``0..horizon``."""
    prefixes = _prefixes(sys.m, prefix_depth, strong)
    if sys.is_circle_affine and not inverse:
        a, b = sys.affine_params()
        return _kernels.circle_pair_survival(x, y, prefixes, a, b, e, horizon, strong, backend)
    return _generic_survival(sys, x, y, prefixes, e, horizon, strong, inverse)


def _check_mode(sys, mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "two_sided" and not sys.invertible:
        raise NotInvertibleError("two-sided expansivity needs invertible maps")


def _exhaustive_expansivity(sys, e, mode, strong):
    S = _fixed_point(sys, e, strong, False)
    if mode == "two_sided":
        S = S & _fixed_point(sys, e, strong, True)
    off = S.copy()
    np.fill_diagonal(off, False)
    if off.any():
        x, y = map(int, np.argwhere(off)[0])
        return (x, y)
    return None


def _one_candidate(sys, e, horizon, pair_count, rng, mode, strong, prefix_depth, backend):
    space = sys.space
    rec = {"e": e, "verdict": None, "refutations": 0, "witness": None}
    if space.finite and space.size ** 2 <= PAIR_CAP:
        w = _exhaustive_expansivity(sys, e, mode, strong)
        rec.update(verdict="refuted" if w else "certified-exhaustive", witness=w, refutations=int(w is not None))
        return rec
    analytic = analytic_expansivity(sys, e, mode, strong)
    x, y = _sample_pairs(space, e, pair_count, horizon, rng)
    s = pair_survival(sys, x, y, e, horizon, strong, prefix_depth, False, backend)
    alive = s > horizon
    if mode == "two_sided":
        alive &= pair_survival(sys, x, y, e, horizon, strong, prefix_depth, True, backend) > horizon
    hits = np.flatnonzero(alive)
    rec["refutations"] = int(hits.size)
    if hits.size:
        k = hits[0]
        rec["witness"] = (space.point_from_array(x[k]), space.point_from_array(y[k]))
        rec["verdict"] = "refuted"
    else:
        rec["verdict"] = "certified-analytic" if analytic else "passed-sampling"
    return rec


def expansivity_search(sys, candidates, horizon=40, pair_count=10_000, seed=0, mode="positive",
                       strong=False, prefix_depth=4, rng=None, backend=None):
    """Largest candidate ``e`` that is not refuted.

    Each candidate is tested on sampled pairs within ``e`` against every
    symbol word of length ``prefix_depth`` continued greedily (the adversary
    picks the symbol keeping the pair closest).  A pair surviving ``horizon``
    steps refutes ``e``.  Finite spaces are decided exactly instead.
    """
    candidates = sorted(float(c) for c in candidates)
    if not candidates:
        raise ValueError("no candidate constants")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if candidates[0] <= 0:
        raise PreconditionError("expansivity constants must be positive")
    _check_mode(sys, mode)
    rng = rng if rng is not None else np.random.default_rng(seed)
    recs = [_one_candidate(sys, e, horizon, pair_count, rng, mode, strong, prefix_depth, backend)
            for e in candidates]
    ok = [r for r in recs if r["verdict"] != "refuted"]
    best = ok[-1] if ok else recs[0]
    return ExpansivityEstimate(
        constant=best["e"], horizon=horizon, pair_count=pair_count, mode=mode,
        verdict=best["verdict"], witness=best["witness"], strong=strong,
        refutations=best["refutations"], candidates=tuple(tuple(sorted(r.items())) for r in recs))


# -------------------------------------------------------- separation horizon


@dataclass(frozen=True)
class SeparationHorizon:
    e: float
    alpha: float
    N: int
    method: str
    bounded: bool = True
    samples: int = 0

    def to_json(self):
        return {"e": self.e, "alpha": self.alpha, "N": self.N, "method": self.method,
                "bounded": self.bounded, "samples": self.samples}


def analytic_separation(sys, e, alpha):
    """``min{n : a_min**n * alpha > e}`` for circle-affine systems and a
    shared word, valid for ``e < 1/(2 a_max)``; ``None`` otherwise."""
    if not sys.is_circle_affine:
        return None
    a, _ = sys.affine_params()
    if not e < 1.0 / (2 * int(a.max())):
        return None
    amin = int(a.min())
    n = 0
    while amin ** n * alpha <= e:
        n += 1
    return n


def separation_horizon(sys, e, alpha, pair_count=10_000, seed=0, mode="positive", strong=False,
                       cap=64, prefix_depth=4, rng=None, backend=None):
    """Smallest ``N`` such that staying within ``e`` for ``|i| <= N`` forces
    ``d(x, y) < alpha``.  Reports ``bounded=False`` when no ``N <= cap``
    works, which is evidence against expansivity at ``e``."""
    if e <= 0 or alpha <= 0:
        raise PreconditionError("e and alpha must be positive")
    _check_mode(sys, mode)
    if alpha > e:
        # a pair with d(x, y) >= alpha > e already fails at i = 0
        return SeparationHorizon(e, alpha, 0, "trivial")
    space = sys.space
    if space.finite and space.size ** 2 <= PAIR_CAP:
        far = _distance_table(space) >= alpha
        fwd = survival_sets(sys, e, strong, False, cap)
        bwd = survival_sets(sys, e, strong, True, cap) if mode == "two_sided" else None
        F = B = None
        for n in range(cap + 1):
            F = next(fwd, F)
            if bwd is not None:
                B = next(bwd, B)
            S = F if B is None else F & B
            if not (S & far).any():
                return SeparationHorizon(e, alpha, n, "exhaustive", True, space.size ** 2)
        return SeparationHorizon(e, alpha, None, "exhaustive", False, space.size ** 2)
    if not strong and mode == "positive":
        n = analytic_separation(sys, e, alpha)
        if n is not None:
            return SeparationHorizon(e, alpha, n, "analytic")
    rng = rng if rng is not None else np.random.default_rng(seed)
    x = space.random_points(rng, pair_count)
    if isinstance(space, (Circle, Interval)):
        dist = np.exp(rng.uniform(math.log(alpha), math.log(e), size=pair_count))
        dist[0] = alpha
        y = (x + dist) % 1.0 if isinstance(space, Circle) else np.clip(x + dist, 0.0, 1.0)
    else:
        y = space.random_points(rng, pair_count)
    keep = space.distance_array(x, y) >= alpha
    x, y = x[keep], y[keep]
    s = pair_survival(sys, x, y, e, cap, strong, prefix_depth, False, backend)
    if mode == "two_sided":
        s = np.minimum(s, pair_survival(sys, x, y, e, cap, strong, prefix_depth, True, backend))
    worst = int(s.max()) if s.size else 0
    if worst > cap:
        return SeparationHorizon(e, alpha, None, "sampled", False, int(x.size))
    return SeparationHorizon(e, alpha, worst, "sampled", True, int(x.size))


# -------------------------------------------------------- stable contraction


@dataclass(frozen=True)
class ContractionReport:
    eps0: float
    eta: float
    side: str
    samples: int
    method: str
    horizon: int
    eta_log2: str = None

    @property
    def empty(self):
        return self.samples == 0

    def to_json(self):
        return {"eps0": self.eps0, "eta": self.eta, "side": self.side, "samples": self.samples,
                "method": self.method, "horizon": self.horizon, "eta_log2": self.eta_log2}


def _contraction_exact(sys, sigma, X, Y, eps0, horizon):
    """Pairs given as int arrays on a shift space.  Returns the number of
    qualifying pairs and the largest ``log2(D_n / D_0) / n`` among them as a
    Fraction (``None`` when every later distance is 0)."""
    space = sys.space
    k0 = space.distance_exponent_array(X, Y)
    keep = (k0 <= space.W) & (np.ldexp(1.0, -np.minimum(k0, 60)) <= eps0)
    X, Y, k0 = X[keep], Y[keep], k0[keep]
    # per-pair best ratio num/den of log2(D_n / D_0) = k0 - k_n over n
    num = np.full(X.size, -1, dtype=np.int64)
    den = np.zeros(X.size, dtype=np.int64)
    for n in range(1, horizon + 1):
        if X.size == 0:
            break
        lam = sigma.symbol_at(n - 1)
        X, Y = sys.apply_array(lam, X), sys.apply_array(lam, Y)
        kn = space.distance_exponent_array(X, Y)
        dn = np.where(kn > space.W, 0.0, np.ldexp(1.0, -np.minimum(kn, 60)))
        ok = dn <= eps0
        X, Y, k0, kn, num, den = X[ok], Y[ok], k0[ok], kn[ok], num[ok], den[ok]
        v = k0 - kn
        better = (kn <= space.W) & ((den == 0) | (v * den > num * n))
        num = np.where(better, v, num)
        den = np.where(better, n, den)
    live = den > 0
    if not live.any():
        return X.size, None
    return X.size, max(Fraction(int(a), int(b)) for a, b in set(zip(num[live].tolist(), den[live].tolist())))


def _contraction_float(sys, sigma, X, Y, eps0, horizon):
    space = sys.space
    d0 = space.distance_array(X, Y)
    keep = (d0 > 0) & (d0 <= eps0)
    X, Y, d0 = X[keep], Y[keep], d0[keep]
    best = np.full(X.size, -np.inf)
    for n in range(1, horizon + 1):
        if X.size == 0:
            break
        lam = sigma.symbol_at(n - 1)
        X, Y = sys.apply_array(lam, X), sys.apply_array(lam, Y)
        dn = space.distance_array(X, Y)
        ok = dn <= eps0
        X, Y, d0, dn, best = X[ok], Y[ok], d0[ok], dn[ok], best[ok]
        with np.errstate(divide="ignore"):
            best = np.maximum(best, np.log2(dn / d0) / n)
    live = np.isfinite(best)
    return X.size, (float(best[live].max()) if live.any() else None)


def stable_contraction_check(sys, sigma, pairs="all", eps0=0.5, horizon=None, side="stable",
                             samples=10_000, seed=0, rng=None):
    """Smallest ``eta`` with ``D_n <= eta**n D_0`` on every qualifying pair.

    A pair qualifies when ``0 < D_0`` and ``D_n = d(F_n x, F_n y) <= eps0``
    for ``n = 0..horizon`` along ``sigma``.  ``side="unstable"`` runs the
    same check backwards, i.e. on the inverse system with the reversed word.
    On shift spaces the exponent is exact and ``eta_log2`` is a fraction.
    """
    if side == "unstable":
        if not sys.invertible:
            raise NotInvertibleError("the unstable side needs invertible maps")
        rep = stable_contraction_check(inverse_system(sys), sigma.reversed(), pairs, eps0, horizon,
                                       "stable", samples, seed, rng)
        return ContractionReport(rep.eps0, rep.eta, "unstable", rep.samples, rep.method, rep.horizon, rep.eta_log2)
    if side != "stable":
        raise ValueError("side must be 'stable' or 'unstable'")
    space = sys.space
    if horizon is None:
        horizon = space.W if isinstance(space, BinaryShift) else 40
    exact = isinstance(space, BinaryShift)
    method = "exhaustive"
    if isinstance(pairs, str):
        if pairs != "all":
            raise ValueError("pairs must be 'all' or a list of point pairs")
        if space.finite and space.size ** 2 <= PAIR_CAP:
            chunks = iter_pairs(space)
        else:
            method = "sampled"
            rng = rng if rng is not None else np.random.default_rng(seed)
            chunks = [_sample_pairs(space, eps0, samples, 2 * horizon, rng)]
    else:
        method = "given"
        pairs = list(pairs)
        chunks = [(space.as_array([p[0] for p in pairs]), space.as_array([p[1] for p in pairs]))] if pairs else []
    total = 0
    best = None
    for X, Y in chunks:
        run = _contraction_exact if exact else _contraction_float
        n_ok, b = run(sys, sigma, X, Y, eps0, horizon)
        total += n_ok
        if b is not None and (best is None or b > best):
            best = b
    if best is None:
        # no pair, or every qualifying pair collapsed to distance 0
        return ContractionReport(eps0, None if total == 0 else 0.0, "stable", total, method, horizon)
    if exact:
        return ContractionReport(eps0, 2.0 ** float(best), "stable", total, method, horizon, str(best))
    return ContractionReport(eps0, 2.0 ** best, "stable", total, method, horizon)
