import numpy as np
import pytest

from ifshadow.errors import CertificateViolation, PreconditionError
from ifshadow.ifs_core import SymbolWord, expansion_constants, inverse_system, power_system
from ifshadow.orbits import PseudoOrbit, generate_orbit, generate_pseudo_orbit
from ifshadow.shadowing import (OpennessCertificate, lipschitz_shadow, openness_check,
                                pullback_exact, reverse_pseudo_orbit, shadow_batch)
from ifshadow.shadowing.solver import partial_sum, pullback_radii, shadow_constant

from conftest import shift_system


def _setup(sys):
    c = expansion_constants(sys)
    return c, openness_check(sys, c)


def test_shadow_constant():
    assert shadow_constant(2) == 4
    assert shadow_constant(4) == pytest.approx(8 / 3)
    with pytest.raises(PreconditionError):
        shadow_constant(1)


def test_radii_monotone_and_bounded():
    for alpha in (1.5, 2.0, 4.0):
        r = pullback_radii(50, 1e-3, alpha)
        assert (np.diff(r[::-1]) >= 0).all() and r[0] > r[-1]
        assert r.max() <= 1e-3 / (alpha - 1)
        assert r[-1] == pytest.approx(1e-3 / alpha)
        assert partial_sum(alpha, 3) == pytest.approx(1 + 1 / alpha + 1 / alpha ** 2)


def test_fixed_point_shadow(single_doubling):
    c, cert = _setup(single_doubling)
    po = PseudoOrbit(0, (0.0,) * 10, SymbolWord(0, (0,) * 9), 0.001)
    res = lipschitz_shadow(single_doubling, po, cert, c)
    assert res.y0 == 0.0 and res.sup_deviation == 0.0


def test_hand_example(single_doubling):
    c, cert = _setup(single_doubling)
    po = PseudoOrbit(0, (0.1, 0.21, 0.43), SymbolWord(0, (0, 0)), 0.01)
    res = lipschitz_shadow(single_doubling, po, cert, c)
    # 0.43 -> preimage 0.215 -> preimage 0.1075, all by hand
    assert res.y0 == pytest.approx(0.1075, abs=1e-12)
    assert res.deviations == pytest.approx((0.0075, 0.005, 0.0), abs=1e-12)
    assert res.bound == pytest.approx(0.04)


def test_bound_on_random_orbits(doubling):
    c, cert = _setup(doubling)
    rng = np.random.default_rng(3)
    pos = [generate_pseudo_orbit(doubling, rng.random(), SymbolWord.random(2, 0, 99, rng), 0, 99, 1e-3, rng)
           for _ in range(50)]
    res = shadow_batch(doubling, pos, cert, c)
    single = [lipschitz_shadow(doubling, p, cert, c) for p in pos]
    for r, s, p in zip(res, single, pos):
        assert r.sup_deviation <= 4 * 1e-3 + 1e-9
        assert r.y0 == s.y0
        orbit = generate_orbit(doubling, r.y0, p.sigma, 0, 99)
        # forward iteration loses about a factor 2 per step, so compare early points only
        assert np.allclose(orbit.points[:20], r.orbit.points[:20], atol=1e-6)


def test_preconditions(doubling):
    c, cert = _setup(doubling)
    po = PseudoOrbit(0, (0.1, 0.2), SymbolWord(0, (0,)), 0.1)
    with pytest.raises(PreconditionError):
        lipschitz_shadow(doubling, po, cert, c)
    neg = OpennessCertificate(cert.delta1, False)
    with pytest.raises(PreconditionError):
        lipschitz_shadow(doubling, po.with_delta(1e-4), neg, c)


def test_certificate_violation(doubling):
    c, _ = _setup(doubling)
    # claim a radius budget the points do not respect
    fake = OpennessCertificate(1.0, True)
    po = PseudoOrbit(0, (0.1, 0.4), SymbolWord(0, (0,)), 0.1)
    with pytest.raises(CertificateViolation) as ei:
        lipschitz_shadow(doubling, po, fake, c)
    assert ei.value.index == 0


def test_singleton_window(doubling):
    c, cert = _setup(doubling)
    po = PseudoOrbit(5, (0.3,), SymbolWord(5, ()), 1e-3)
    res = lipschitz_shadow(doubling, po, cert, c)
    assert res.y0 == 0.3 and res.sup_deviation == 0.0


def test_power_system_consistency(doubling):
    sq = power_system(doubling, 2)
    c, cert = _setup(sq)
    assert c.alpha == 4
    rng = np.random.default_rng(2)
    sigma = SymbolWord.random(2, 0, 40, rng)
    base = generate_orbit(doubling, 0.37, sigma, 0, 40)
    pair_word = SymbolWord(0, tuple(2 * sigma.word[2 * k] + sigma.word[2 * k + 1] for k in range(20)))
    sq_orbit = generate_orbit(sq, 0.37, pair_word, 0, 20)
    assert np.allclose(sq_orbit.points, base.points[::2], atol=1e-9)
    po = generate_pseudo_orbit(sq, 0.37, pair_word, 0, 20, 1e-3, rng)
    res = lipschitz_shadow(sq, po, cert, c)
    assert res.sup_deviation <= 8 / 3 * 1e-3 + 1e-9


def test_shift_is_not_expanding():
    # the shift halves some distances, so the pullback has no certificate
    sh = shift_system(6)
    c = expansion_constants(sh)
    assert c.alpha == 0.5
    with pytest.raises(PreconditionError):
        shadow_constant(c.alpha)


def test_inverse_round_trip():
    sh = shift_system(6)
    inv = inverse_system(sh)
    rng = np.random.default_rng(8)
    sigma = SymbolWord.random(2, -12, 12, rng)
    orbit = generate_orbit(sh, 21, sigma, -12, 12)
    po = orbit.as_pseudo_orbit()
    assert pullback_exact(sh, po).points == orbit.points
    rev = reverse_pseudo_orbit(po)
    back = pullback_exact(inv, rev)
    assert back.points == tuple(reversed(orbit.points))
    assert reverse_pseudo_orbit(rev).points == po.points
