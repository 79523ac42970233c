import numpy as np
import pytest

from ifshadow.errors import PreconditionError, SizeCapError
from ifshadow.ifs_core import SymbolWord
from ifshadow.orbits import PseudoOrbit, generate_orbit, generate_pseudo_orbit
from ifshadow.shadowing import ExpansivityEstimate, brute_force_shadow, clusters, uniqueness_check
from ifshadow.shadowing.oracle import OracleHit, cluster_contains

from conftest import shift_system


def _est(e):
    return ExpansivityEstimate(e, 0, 0, "positive", "assumed")


def test_exact_orbit_is_found(doubling):
    rng = np.random.default_rng(0)
    for _ in range(5):
        x0 = float(rng.random())
        sigma = SymbolWord.random(2, 0, 14, rng)
        po = generate_orbit(doubling, x0, sigma, 0, 14).as_pseudo_orbit()
        grid = doubling.space.grid(100_000)
        v = uniqueness_check(doubling, po, 0.01, _est(0.2), grid)
        assert v.ok
        assert cluster_contains(doubling.space, v.clusters[0], x0, 2 * grid.resolution)


def test_tiny_eps_finds_nothing(doubling):
    rng = np.random.default_rng(1)
    sigma = SymbolWord.random(2, 0, 30, rng)
    po = generate_pseudo_orbit(doubling, 0.3, sigma, 0, 30, 0.01, rng)
    assert brute_force_shadow(doubling, po, 1e-6, doubling.space.grid(100_000)) == []


def test_identity_map_has_two_clusters(identity_table):
    po = PseudoOrbit(0, (0, 0, 0), SymbolWord(0, (0, 0)), 0.0)
    v = uniqueness_check(identity_table, po, 1.0, _est(4.0), identity_table.space.grid())
    assert not v.ok and v.cluster_count == 2
    assert sorted(h.y0 for g in v.clusters for h in g) == [0, 1]


def test_eps_must_be_below_e_over_three(doubling):
    po = PseudoOrbit(0, (0.1,), SymbolWord(0, ()), 0.0)
    with pytest.raises(PreconditionError):
        uniqueness_check(doubling, po, 0.1, _est(0.3), doubling.space.grid(10))


def test_finite_oracle_matches_direct_check():
    sh = shift_system(4)
    rng = np.random.default_rng(2)
    sigma = SymbolWord.random(2, 0, 6, rng)
    po = generate_pseudo_orbit(sh, 5, sigma, 0, 6, 0.25, rng)
    eps = 0.25
    hits = {h.y0 for h in brute_force_shadow(sh, po, eps, sh.space.grid())}
    direct = set()
    for y in range(sh.space.size):
        orbit = generate_orbit(sh, y, sigma, 0, 6)
        if max(sh.space.distance(a, b) for a, b in zip(orbit.points, po.points)) <= eps:
            direct.add(y)
    assert hits == direct and len(direct) > 0


def test_clusters_wrap_on_circle(doubling):
    grid = doubling.space.grid(10)
    hits = [OracleHit(grid.points[i], 0.0, 0.0, i) for i in (0, 1, 5, 9)]
    groups = clusters(doubling.space, hits, grid)
    assert sorted(len(g) for g in groups) == [1, 3]


def test_grid_cap(doubling):
    po = PseudoOrbit(0, (0.1,), SymbolWord(0, ()), 0.0)
    with pytest.raises(SizeCapError):
        brute_force_shadow(doubling, po, 0.01, doubling.space.grid(100), cap=50)


HAND = PseudoOrbit(0, (0.1, 0.21, 0.43), SymbolWord(0, (0, 0)), 0.01)


def test_hand_example_single_cluster(single_doubling):
    grid = single_doubling.space.grid(100_000)
    v = uniqueness_check(single_doubling, HAND, 0.04, _est(0.2), grid)
    assert v.ok
    assert cluster_contains(single_doubling.space, v.clusters[0], 0.1075, 2 * grid.resolution)


def test_hand_example_tiny_eps_empty(single_doubling):
    assert brute_force_shadow(single_doubling, HAND, 1e-6, single_doubling.space.grid(100_000)) == []
