"""Constructive Lipschitz shadowing by backward-preimage pullback.

Starting from the last point of a finite window, each earlier shadow point is
the preimage (under the witnessed symbol) of the next shadow point that lies
closest to the pseudo-orbit point, and it must lie within the radius
``alpha_j * eps / alpha`` where ``alpha_j = sum_{k<j} alpha**-k``.  The radii
increase towards ``eps / (alpha - 1) = L * eps / 2`` so every deviation stays
below ``L * eps`` with ``L = 2 alpha / (alpha - 1)``.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .. import _kernels
from ..errors import CertificateViolation, InternalInvariantError, PreconditionError
from ..ifs_core import SymbolWord
from ..orbits import Orbit, PseudoOrbit, verify_pseudo_orbit
from ..spaces import TAU


@dataclass(frozen=True)
class OpennessCertificate:
    delta1: float
    verdict: bool
    witness: tuple = None
    method: str = "analytic"
    trials: int = 0
    radius: float = None

    def to_json(self):
        return {"delta1": self.delta1, "verdict": self.verdict, "witness": self.witness,
                "method": self.method, "trials": self.trials, "radius": self.radius}


@dataclass(frozen=True)
class ShadowResult:
    y0: object
    orbit: Orbit
    deviations: tuple
    sup_deviation: float
    bound: float
    constants: dict
    truncation_bound: float = 0.0
    ties: int = 0
    events: tuple = field(default=(), compare=False)

    @property
    def base(self):
        return self.orbit.base

    def deviation_at(self, i):
        return self.deviations[i - self.orbit.base]

    def point_at(self, i):
        return self.orbit.point_at(i)

    def to_json(self, space):
        return {
            "y0": space.point_to_json(self.y0),
            "base": self.base,
            "orbit": [space.point_to_json(p) for p in self.orbit.points],
            "deviations": list(self.deviations),
            "sup_deviation": self.sup_deviation,
            "bound": self.bound,
            "constants": self.constants,
            "truncation_bound": self.truncation_bound,
            "ties": self.ties,
        }


def shadow_constant(alpha):
    """``L = 2 alpha / (alpha - 1)``."""
    if alpha <= 1:
        raise PreconditionError(f"alpha = {alpha} must exceed 1")
    return 2.0 * alpha / (alpha - 1.0)


def partial_sum(alpha, j):
    """``alpha_j = sum_{k=0}^{j-1} alpha**-k``."""
    return (1.0 - alpha ** -j) / (1.0 - 1.0 / alpha)


def pullback_radii(n_points, eps, alpha):
    """Radius for each window position ``0 .. n_points-2``; position ``k`` is
    ``j = n_points-1-k`` steps from the end."""
    j = np.arange(n_points - 1, 0, -1, dtype=np.float64)
    return (1.0 - alpha ** -j) / (1.0 - 1.0 / alpha) * eps / alpha


def _check_preconditions(po, certificate, constants):
    if not certificate.verdict:
        raise PreconditionError("openness certificate is negative")
    L = shadow_constant(constants.alpha)
    if po.delta > certificate.delta1 / L * (1 + 1e-12):
        raise PreconditionError(
            f"delta = {po.delta:.6g} exceeds delta1 / L = {certificate.delta1 / L:.6g}")
    return L


def _pullback_generic(sys, po, radii, tol):
    space = sys.space
    n = len(po)
    ys = [None] * n
    ys[-1] = po.points[-1]
    events = []
    for k in range(n - 2, -1, -1):
        i = po.base + k
        fib = sys.preimages(po.sigma.symbol_at(i), ys[k + 1])
        cands = [(space.distance(p, po.points[k]), p) for p in fib]
        ok = [c for c in cands if c[0] <= radii[k] + tol]
        if not ok:
            near = min((c[0] for c in cands), default=math.inf)
            raise CertificateViolation(
                f"no preimage within {radii[k]:.6g} of x_{i} (nearest {near:.6g})", index=i)
        if len(ok) > 1:
            events.append(i)
        ys[k] = min(ok, key=lambda c: c[0])[1]
    return ys, events


def _result(sys, po, ys, L, constants, certificate, ties, events):
    space = sys.space
    dev = space.distance_array(space.as_array(ys), space.as_array(po.points))
    eps = po.delta
    alpha = constants.alpha
    steps = len(po) - 1
    orbit = Orbit(po.base, tuple(space.point_from_array(y) for y in ys), po.sigma)
    return ShadowResult(
        y0=orbit.points[0],
        orbit=orbit,
        deviations=tuple(float(d) for d in dev),
        sup_deviation=float(dev.max()),
        bound=L * eps,
        constants={"alpha": alpha, "L": L, "epsilon": eps, "delta1": certificate.delta1},
        truncation_bound=(eps / alpha) * alpha ** -steps / (1.0 - 1.0 / alpha),
        ties=ties,
        events=tuple(events),
    )


def _affine_tie_guard(sys, radii, ties):
    # branches of x -> a x + b are exactly 1/a apart
    if ties and radii.size and radii.max() < 1.0 / (2 * max(f.a for f in sys.maps)):
        raise InternalInvariantError("two preimage branches inside a ball narrower than their spacing")


def lipschitz_shadow(sys, po, certificate, constants, backend=None):
    """Shadow ``po`` (an ``eps``-pseudo-orbit with ``eps = po.delta``).

    Returns a :class:`ShadowResult` whose orbit is the pulled-back sequence;
    its deviation from ``po`` is at most ``L * eps`` (plus tolerance).
    """
    L = _check_preconditions(po, certificate, constants)
    po.sigma.check_alphabet(sys.m)
    radii = pullback_radii(len(po), po.delta, constants.alpha)
    tol = 0.0 if sys.space.exact else TAU
    if sys.is_circle_affine and len(po) > 1:
        a, b = sys.affine_params()
        xs = np.asarray(po.points, dtype=np.float64)[None, :]
        syms = po.symbols()[None, :]
        ys, fail, ties = _kernels.circle_pullback(xs, syms, a, b, radii, tol, backend)
        if fail[0] >= 0:
            raise CertificateViolation(
                f"no preimage within {radii[fail[0]]:.6g} of x_{po.base + fail[0]}",
                index=po.base + int(fail[0]))
        _affine_tie_guard(sys, radii, int(ties[0]))
        return _result(sys, po, ys[0], L, constants, certificate, int(ties[0]), ())
    ys, events = _pullback_generic(sys, po, radii, tol)
    return _result(sys, po, ys, L, constants, certificate, len(events), events)


def shadow_batch(sys, pos, certificate, constants, backend=None):
    """Shadow many equal-length windows of a circle-affine system in one kernel call."""
    pos = list(pos)
    if not pos:
        return []
    n = len(pos[0])
    if not sys.is_circle_affine or n < 2 or any(len(p) != n for p in pos):
        return [lipschitz_shadow(sys, p, certificate, constants, backend) for p in pos]
    delta = max(p.delta for p in pos)
    L = _check_preconditions(pos[0].with_delta(delta), certificate, constants)
    a, b = sys.affine_params()
    xs = np.array([p.points for p in pos], dtype=np.float64)
    syms = np.array([p.symbols() for p in pos], dtype=np.int64)
    out = []
    # radii depend on each member's own delta; group members sharing one
    by_delta = {}
    for r, p in enumerate(pos):
        by_delta.setdefault(p.delta, []).append(r)
    ys_all = np.empty_like(xs)
    ties_all = np.zeros(len(pos), dtype=np.int64)
    for d, rows in by_delta.items():
        radii = pullback_radii(n, d, constants.alpha)
        ys, fail, ties = _kernels.circle_pullback(xs[rows], syms[rows], a, b, radii, TAU, backend)
        bad = np.flatnonzero(fail >= 0)
        if bad.size:
            r = rows[bad[0]]
            raise CertificateViolation(
                f"member {r}: no preimage within radius at x_{pos[r].base + fail[bad[0]]}",
                index=pos[r].base + int(fail[bad[0]]))
        _affine_tie_guard(sys, radii, int(ties.max()))
        ys_all[rows] = ys
        ties_all[rows] = ties
    for r, p in enumerate(pos):
        out.append(_result(sys, p, ys_all[r], L, constants, certificate, int(ties_all[r]), ()))
    return out


def pullback_exact(sys, po):
    """Pull back with zero radius: recovers the orbit through the last point
    when ``po`` is an exact orbit (any system with finite fibers)."""
    ys, events = _pullback_generic(sys, po, np.zeros(max(len(po) - 1, 0)), 0.0 if sys.space.exact else TAU)
    return Orbit(po.base, tuple(ys), po.sigma)


def reverse_pseudo_orbit(po):
    """Time reversal: point ``x_i`` moves to index ``-i`` and the step symbol
    at ``i`` moves to ``-i-1``, which is what the inverse system consumes."""
    pts = tuple(reversed(po.points))
    word = tuple(int(s) for s in reversed(po.symbols()))
    sigma = SymbolWord(-po.hi, word, "fail_outside")
    return PseudoOrbit(-po.hi, pts, sigma, po.delta)


def check_orbit(sys, orbit):
    return verify_pseudo_orbit(sys, orbit.as_pseudo_orbit())
