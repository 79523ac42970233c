import numpy as np
import pytest

from ifshadow.errors import PreconditionError
from ifshadow.ifs_core import SymbolWord, expansion_constants
from ifshadow.orbits import (PseudoOrbit, PseudoOrbitEnsemble, generate_decaying_pseudo_orbit,
                             generate_orbit, geometric_profile)
from ifshadow.shadowing import (ExpansivityEstimate, continuity_experiment, delta_sweep,
                                limit_shadow_experiment, openness_check)


@pytest.fixture
def setup(doubling):
    c = expansion_constants(doubling)
    return doubling, c, openness_check(doubling, c)


def test_delta_sweep_bounds(setup):
    sys, c, cert = setup
    res, pos = delta_sweep(sys, 20, 50, 1e-3, seed=1)
    assert len(res) == 20 and all(r.sup_deviation <= 4e-3 + 1e-9 for r in res)


def test_limit_zero_profile(setup):
    sys, c, cert = setup
    rng = np.random.default_rng(0)
    sigma = SymbolWord.random(2, 0, 30, rng)
    po = generate_orbit(sys, 0.3, sigma, 0, 30).as_pseudo_orbit()
    rep = limit_shadow_experiment(sys, po, [0.0] * 30, cert, c)
    assert rep.applicable and rep.ok and max(rep.deviations) <= 1e-9
    assert rep.worst_margin <= 1e-9
    fixed = generate_orbit(sys, 0.0, SymbolWord.constant(0), 0, 30).as_pseudo_orbit()
    rep = limit_shadow_experiment(sys, fixed, [0.0] * 30, cert, c)
    assert max(rep.deviations) == 0.0


def test_limit_geometric_profile(setup):
    sys, c, cert = setup
    rng = np.random.default_rng(1)
    sigma = SymbolWord.random(2, 0, 60, rng)
    prof = geometric_profile(0.01)
    po = generate_decaying_pseudo_orbit(sys, 0.2, sigma, 0, 60, prof, rng)
    profile = [prof(k) for k in range(60)]
    rep = limit_shadow_experiment(sys, po, profile, cert, c)
    assert rep.applicable and rep.ok
    for i, d in enumerate(rep.deviations):
        assert d <= 5 * 0.01 * 2.0 ** -(i - rep.offset) + 1e-15
    assert rep.first_below(1e-6) < 40


def test_limit_constant_profile_not_applicable(setup):
    sys, c, cert = setup
    rng = np.random.default_rng(2)
    sigma = SymbolWord.random(2, 0, 20, rng)
    po = generate_decaying_pseudo_orbit(sys, 0.2, sigma, 0, 20, lambda k: 1e-3, rng)
    rep = limit_shadow_experiment(sys, po, [1e-3] * 20, cert, c)
    assert not rep.applicable and rep.ok and max(rep.deviations) <= 4e-3 + 1e-9


def test_limit_profile_too_small(setup):
    sys, c, cert = setup
    rng = np.random.default_rng(3)
    sigma = SymbolWord.random(2, 0, 10, rng)
    po = generate_decaying_pseudo_orbit(sys, 0.2, sigma, 0, 10, lambda k: 1e-3, rng)
    with pytest.raises(PreconditionError):
        limit_shadow_experiment(sys, po, [1e-9] * 10, cert, c)


def _est(e=0.2):
    return ExpansivityEstimate(e, 40, 0, "positive", "certified-analytic")


def test_continuity_identical_pairs(setup):
    sys, c, cert = setup
    rng = np.random.default_rng(4)
    sigma = SymbolWord.random(2, 0, 30, rng)
    po = generate_orbit(sys, 0.4, sigma, 0, 30).as_pseudo_orbit().with_delta(1e-3)
    ens = PseudoOrbitEnsemble([po, po], 1e-3)
    rep = continuity_experiment(sys, ens, 0.01, 0.01, _est(), cert, c,
                                grid=sys.space.grid(100_000))
    assert rep.pairs_tested == 1 and rep.max_displacement == 0.0 and rep.ok


def test_continuity_small_perturbation(setup):
    sys, c, cert = setup
    rng = np.random.default_rng(5)
    sigma = SymbolWord.random(2, 0, 30, rng)
    a = generate_orbit(sys, 0.4, sigma, 0, 30).as_pseudo_orbit().with_delta(1e-3)
    b = PseudoOrbit(0, (0.4 + 1e-6,) + a.points[1:], sigma, 1e-3)
    rep = continuity_experiment(sys, PseudoOrbitEnsemble([a, b], 1e-3), 0.01, 0.01, _est(), cert, c)
    assert rep.pairs_tested == 1 and rep.max_displacement < 0.01


def test_continuity_far_pairs_skipped(setup):
    sys, c, cert = setup
    rng = np.random.default_rng(6)
    a = generate_orbit(sys, 0.1, SymbolWord.random(2, 0, 20, rng), 0, 20).as_pseudo_orbit().with_delta(1e-3)
    b = generate_orbit(sys, 0.6, SymbolWord.random(2, 0, 20, rng), 0, 20).as_pseudo_orbit().with_delta(1e-3)
    rep = continuity_experiment(sys, PseudoOrbitEnsemble([a, b], 1e-3), 0.01, 0.01, _est(), cert, c)
    assert rep.skipped == 1 and rep.pairs_tested == 0 and rep.ok


def test_continuity_eps_precondition(setup):
    sys, c, cert = setup
    po = PseudoOrbit(0, (0.1,), SymbolWord(0, ()), 1e-3)
    with pytest.raises(PreconditionError):
        continuity_experiment(sys, PseudoOrbitEnsemble([po], 1e-3), 0.1, 0.01, _est(), cert, c)
