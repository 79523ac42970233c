"""Experiment drivers: delta sweeps, limit shadowing and continuous shadowing."""
from dataclasses import dataclass, field
import math

import numpy as np

from ..errors import PreconditionError, UniquenessViolation
from ..ifs_core import SymbolWord, expansion_constants
from ..orbits import (PseudoOrbit, PseudoOrbitEnsemble, generate_pseudo_orbit, step_errors,
                      tilde_distance)
from ..spaces import TAU
from .checks import openness_check, separation_horizon
from .oracle import cluster_contains, uniqueness_check
from .solver import lipschitz_shadow, shadow_batch

NOISE_FLOOR = 4 * np.finfo(float).eps


def random_pseudo_orbits(sys, count, length, delta, rng, base=0):
    """``count`` delta-pseudo-orbits on ``base .. base+length-1`` with random
    start points and random words."""
    out = []
    for _ in range(count):
        sigma = SymbolWord.random(sys.m, base, base + length - 1, rng)
        x0 = sys.space.random_point(rng)
        out.append(generate_pseudo_orbit(sys, x0, sigma, base, base + length - 1, delta, rng))
    return out


def delta_sweep(sys, count, length, delta, seed=0, backend=None):
    """Shadow ``count`` random pseudo-orbits; returns (results, pseudo-orbits)."""
    rng = np.random.default_rng(seed)
    constants = expansion_constants(sys)
    cert = openness_check(sys, constants, seed=seed)
    pos = random_pseudo_orbits(sys, count, length, delta, rng)
    return shadow_batch(sys, pos, cert, constants, backend), pos


# ------------------------------------------------------------ limit shadowing


@dataclass(frozen=True)
class LimitReport:
    deviations: tuple
    envelope: tuple
    levels: tuple
    offset: float
    applicable: bool
    ok: bool
    L: float
    worst_margin: float
    scale: float

    def first_below(self, threshold):
        """First index from which the envelope stays below ``threshold``."""
        for k, v in enumerate(self.envelope):
            if v < threshold:
                return k
        return None

    def to_json(self):
        return {
            "deviations": list(self.deviations),
            "envelope": list(self.envelope),
            "levels": [dict(lv) for lv in self.levels],
            "offset": self.offset,
            "applicable": self.applicable,
            "ok": self.ok,
            "L": self.L,
            "worst_margin": self.worst_margin,
        }


def limit_shadow_experiment(sys, po, profile, certificate, constants, backend=None):
    """Shadow a pseudo-orbit whose step errors decay and check the tails.

    ``profile[k]`` bounds the step error at index ``po.base + k``.  For each
    level ``delta_I = profile[I]`` the suffix ``[I, hi]`` is a
    ``delta_I``-pseudo-orbit once the profile is non-increasing; it is
    re-shadowed on its own and the full shadow's deviations beyond ``I``
    must stay within ``(L + 1) delta_I``.
    """
    if po.base != 0:
        raise PreconditionError("limit experiments run on windows starting at index 0")
    profile = [float(v) for v in profile]
    if len(profile) < len(po) - 1:
        raise ValueError("profile shorter than the window")
    profile = profile[:len(po) - 1]
    errs = step_errors(sys, po)
    if (errs > np.asarray(profile) + TAU).any():
        raise PreconditionError("step errors exceed the profile")
    full = lipschitz_shadow(sys, po, certificate, constants, backend)
    L = full.constants["L"]
    dev = np.asarray(full.deviations)
    env = np.maximum.accumulate(dev[::-1])[::-1]
    nonincreasing = all(profile[k + 1] <= profile[k] for k in range(len(profile) - 1))
    applicable = bool(profile) and nonincreasing and (profile[-1] == 0 or profile[-1] < profile[0])
    levels = []
    worst = -math.inf
    ok = True
    if applicable:
        for I in range(len(profile)):
            d = profile[I]
            if d == 0:
                tail_ok = bool(dev[I:].max() <= TAU)
                worst = max(worst, float(dev[I:].max()))
                levels.append((("I", I), ("delta", d), ("tail_max", float(dev[I:].max())),
                               ("bound", 0.0), ("suffix_sup", 0.0), ("ok", tail_ok)))
                ok &= tail_ok
                continue
            suffix = po.window(I, po.hi).with_delta(d)
            sub = lipschitz_shadow(sys, suffix, certificate, constants, backend)
            tail = float(dev[I:].max())
            bound = (L + 1) * d
            tail_ok = tail <= bound + TAU and sub.sup_deviation <= L * d + TAU
            worst = max(worst, tail - bound)
            ok &= tail_ok
            levels.append((("I", I), ("delta", d), ("tail_max", tail), ("bound", bound),
                           ("suffix_sup", sub.sup_deviation), ("ok", bool(tail_ok))))
    else:
        ok = bool(full.sup_deviation <= L * po.delta + TAU)
    # smallest c with dev_i <= (L + 1) * profile[0] * 2**-(i - c)
    scale = profile[0] if profile else 0.0
    offset = 0.0
    if scale > 0:
        # deviations at rounding level carry no decay information
        live = dev > NOISE_FLOOR
        ratios = np.log2(dev[live] / ((L + 1) * scale)) + np.flatnonzero(live)
        offset = max(0.0, float(math.ceil(ratios.max()))) if ratios.size else 0.0
    return LimitReport(tuple(float(v) for v in dev), tuple(float(v) for v in env), tuple(levels),
                       offset, applicable, bool(ok), L, float(worst) if levels else 0.0, scale)


# ------------------------------------------------------- continuous shadowing


@dataclass(frozen=True)
class ContinuityReport:
    pairs_tested: int
    skipped: int
    max_displacement: float
    beta: float
    N: int
    alpha: float
    eps: float
    ok: bool
    aborts: int = 0
    displacements: tuple = field(default=(), compare=False)

    def to_json(self):
        return {
            "pairs_tested": self.pairs_tested,
            "skipped": self.skipped,
            "max_displacement": self.max_displacement,
            "beta": self.beta,
            "N": self.N,
            "alpha": self.alpha,
            "eps": self.eps,
            "ok": self.ok,
            "aborts": self.aborts,
        }


def paired_ensemble(sys, n_pairs, length, delta, beta, rng):
    """Members ``2k`` and ``2k+1`` share one witness word; the second is the
    first moved by at most ``beta * 2**i / 2`` at index ``i`` (and never more
    than keeps both delta-pseudo-orbits), so their weighted distance stays
    below ``beta``.  The base orbits are generated with ``delta / 2``."""
    a_max = max(getattr(f, "a", 2) for f in sys.maps)
    room = delta / (2 * (a_max + 1))
    members = []
    for _ in range(n_pairs):
        sigma = SymbolWord.random(sys.m, 0, length - 1, rng)
        x0 = sys.space.random_point(rng)
        po = generate_pseudo_orbit(sys, x0, sigma, 0, length - 1, delta / 2, rng)
        caps = np.minimum(beta / 2 * np.ldexp(1.0, np.arange(length)), room)
        moved = tuple(sys.space.canon(x + u) for x, u in zip(po.points, rng.uniform(-1, 1, length) * caps))
        members.append(po.with_delta(delta))
        members.append(PseudoOrbit(0, moved, sigma, delta))
    return PseudoOrbitEnsemble(members, delta)


def _shadow_point(res):
    return res.point_at(0) if res.orbit.lo <= 0 <= res.orbit.hi else res.y0


def continuity_experiment(sys, ensemble, eps, alpha, expansivity, certificate, constants,
                          pairs=None, grid=None, prefix=20, seed=0, backend=None):
    """Check that nearby pseudo-orbits (in the weighted metric) have nearby shadows.

    ``N`` is the separation horizon at ``(e, alpha)`` and ``beta`` is chosen
    with ``2**N * beta < e / 3``.  Pairs at weighted distance ``>= beta`` are
    skipped.  Each member's shadow is confirmed unique on its first
    ``prefix`` points by the grid oracle when ``grid`` is given.
    """
    e = expansivity.constant
    if not eps < e / 3:
        raise PreconditionError(f"eps = {eps} must be below e/3 = {e / 3}")
    sep = separation_horizon(sys, e, alpha, seed=seed)
    if not sep.bounded:
        raise PreconditionError(f"no separation horizon at e = {e}, alpha = {alpha}")
    N = sep.N
    beta = 0.5 * (e / 3) / 2 ** N
    members = list(ensemble)
    results = shadow_batch(sys, members, certificate, constants, backend)
    for r in results:
        if r.sup_deviation > eps + TAU:
            raise PreconditionError(f"member shadow deviates by {r.sup_deviation:.3g} > eps")
    space = sys.space
    aborts = 0
    if grid is not None:
        for k, (po, r) in enumerate(zip(members, results)):
            sub = po.window(po.lo, min(po.hi, po.lo + prefix - 1))
            v = uniqueness_check(sys, sub, eps, expansivity, grid, backend)
            if not v.ok or not cluster_contains(space, v.clusters[0], r.y0, 2 * grid.resolution):
                aborts += 1
                raise UniquenessViolation(
                    f"member {k}: {v.cluster_count} oracle clusters on the first {prefix} points",
                    clusters=v.clusters)
    if pairs is None:
        pairs = [(i, j) for i in range(len(members)) for j in range(i + 1, len(members))]
    tested = skipped = 0
    disp = []
    for i, j in pairs:
        td = tilde_distance(space, members[i], members[j])
        if td.value >= beta:
            skipped += 1
            continue
        tested += 1
        disp.append(space.distance(_shadow_point(results[i]), _shadow_point(results[j])))
    mx = max(disp, default=0.0)
    return ContinuityReport(tested, skipped, float(mx), beta, N, alpha, eps,
                            bool(all(d < alpha for d in disp)), aborts, tuple(disp))
