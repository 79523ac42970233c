import numpy as np
import pytest

from ifshadow.errors import InsufficientWindowError, NotInvertibleError
from ifshadow.ifs_core import SymbolWord
from ifshadow.orbits import (Orbit, PseudoOrbit, PseudoOrbitEnsemble, as_orbit, check_ensemble,
                             dump_jsonl, extend_zplus_to_z, generate_decaying_pseudo_orbit,
                             generate_orbit, generate_pseudo_orbit, geometric_profile, load_ensemble,
                             load_jsonl, save_ensemble, step_errors, tilde_distance,
                             verify_pseudo_orbit)
from ifshadow.spaces import Circle

from conftest import doubling_family, shift_system

HAND = PseudoOrbit(0, (0.1, 0.21, 0.43), SymbolWord(0, (0, 0)), 0.01)


def test_fixed_point_orbit(single_doubling):
    o = generate_orbit(single_doubling, 0.0, SymbolWord.constant(0), 0, 5)
    assert o.points == (0.0,) * 6


def test_forward_orbit_values(single_doubling):
    o = generate_orbit(single_doubling, 0.1, SymbolWord.constant(0), 0, 3)
    assert o.points == pytest.approx((0.1, 0.2, 0.4, 0.8))


def test_two_sided_shift_orbit():
    sh = shift_system(4)
    sigma = SymbolWord(-2, (0, 1, 1, 0), "fail_outside")
    o = generate_orbit(sh, 77, sigma, -2, 2)
    assert o.point_at(0) == 77
    assert verify_pseudo_orbit(sh, o.as_pseudo_orbit()).worst_error == 0.0


def test_backward_needs_inverse(doubling):
    with pytest.raises(NotInvertibleError):
        generate_orbit(doubling, 0.1, SymbolWord.constant(0), -1, 2)


def test_hand_example_verification(single_doubling):
    rep = verify_pseudo_orbit(single_doubling, HAND)
    # d(0.2, 0.21) = d(0.42, 0.43) = 0.01 by direct arithmetic
    assert rep.ok and rep.worst_error == pytest.approx(0.01, abs=1e-15)
    bad = verify_pseudo_orbit(single_doubling, HAND.with_delta(0.005))
    assert not bad.ok and bad.worst_index == 0


def test_zero_noise_is_orbit(doubling, rng):
    sigma = SymbolWord.random(2, 0, 30, rng)
    po = generate_pseudo_orbit(doubling, 0.3, sigma, 0, 30, 0.0, rng)
    assert po.points == generate_orbit(doubling, 0.3, sigma, 0, 30).points
    assert isinstance(as_orbit(doubling, po), Orbit)


def test_generated_pseudo_orbits_verify(doubling):
    for seed in range(20):
        rng = np.random.default_rng(seed)
        sigma = SymbolWord.random(2, 0, 100, rng)
        po = generate_pseudo_orbit(doubling, rng.random(), sigma, 0, 100, 0.01, rng)
        assert verify_pseudo_orbit(doubling, po).ok
        assert step_errors(doubling, po).max() <= 0.01 + 1e-12


def test_shift_perturbation_is_exact():
    sh = shift_system(6)
    rng = np.random.default_rng(4)
    for delta in (0.5, 0.25, 0.1, 2 ** -6, 0.001):
        sigma = SymbolWord.random(2, -10, 10, rng)
        po = generate_pseudo_orbit(sh, 5, sigma, -10, 10, delta, rng)
        assert verify_pseudo_orbit(sh, po).ok
        assert step_errors(sh, po).max() <= delta


def test_generation_is_seeded(doubling):
    sigma = SymbolWord(0, (0, 1) * 10)
    a = generate_pseudo_orbit(doubling, 0.2, sigma, 0, 20, 0.01, np.random.default_rng(9))
    b = generate_pseudo_orbit(doubling, 0.2, sigma, 0, 20, 0.01, np.random.default_rng(9))
    assert a == b
    with pytest.raises(ValueError):
        generate_pseudo_orbit(doubling, 0.2, sigma, 0, 20, -1.0, np.random.default_rng(9))


def test_decaying_profile(doubling, rng):
    sigma = SymbolWord.random(2, 0, 20, rng)
    zero = generate_decaying_pseudo_orbit(doubling, 0.4, sigma, 0, 20, lambda k: 0.0, rng)
    assert zero.points == generate_orbit(doubling, 0.4, sigma, 0, 20).points
    sh = shift_system(8)
    sig2 = SymbolWord.random(2, -20, 20, rng)
    prof = geometric_profile(0.01)
    po = generate_decaying_pseudo_orbit(sh, 3, sig2, -20, 20, prof, rng)
    errs = step_errors(sh, po)
    assert errs[10 + 20] <= 0.01 * 2 ** -10
    assert po.delta == 0.01
    po = generate_decaying_pseudo_orbit(doubling, 0.4, sigma, 0, 20, prof, rng)
    assert (step_errors(doubling, po) <= np.array([prof(k) for k in range(20)]) + 1e-12).all()


def _seq(values, base=0):
    return PseudoOrbit(base, tuple(values), SymbolWord(base, (0,) * (len(values) - 1)), 0.0)


def test_tilde_distance_examples():
    c = Circle()
    a = _seq([0.0] * 7, -3)
    b = _seq([0.0, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0], -3)
    assert tilde_distance(c, a, b).value == pytest.approx(0.1)
    b2 = _seq([0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.0], -3)
    assert tilde_distance(c, a, b2).value == pytest.approx(0.05)
    same = tilde_distance(c, a, a)
    assert same.value == 0.0 and same.error_bound == 0.5 / 2 ** 4
    with pytest.raises(InsufficientWindowError):
        tilde_distance(c, a, a, tail_bound_target=1e-6)
    with pytest.raises(ValueError):
        tilde_distance(c, _seq([0.0, 0.0], 0), _seq([0.0, 0.0], 5))


def test_tilde_metric_and_sandwich():
    c = Circle()
    rng = np.random.default_rng(1)
    M = 6
    seqs = [_seq(rng.random(2 * M + 1), -M) for _ in range(30)]
    for i in range(0, 30, 3):
        a, b, z = seqs[i:i + 3]
        ab = tilde_distance(c, a, b)
        assert ab.value == tilde_distance(c, b, a).value
        ac = tilde_distance(c, a, z).value
        assert ac <= ab.value + tilde_distance(c, b, z).value + 2 * ab.error_bound
        sup = max(c.distance(x, y) for x, y in zip(a.points, b.points))
        assert ab.value <= sup <= 2 ** M * ab.value


def test_extend_zplus_to_z():
    sh = shift_system(5)
    rng = np.random.default_rng(7)
    orbit = generate_orbit(sh, 100, SymbolWord.random(2, 0, 10, rng), 0, 10)
    ext = extend_zplus_to_z(sh, orbit.as_pseudo_orbit(), 1, 4)
    assert ext.lo == -4 and ext.points[4:] == orbit.points
    errs = step_errors(sh, ext)
    assert (errs == 0).all()
    po = generate_pseudo_orbit(sh, 9, SymbolWord.random(2, 0, 10, rng), 0, 10, 0.25, rng)
    ext = extend_zplus_to_z(sh, po, 0, 5)
    assert ext.delta == po.delta and verify_pseudo_orbit(sh, ext).ok
    assert (step_errors(sh, ext)[:5] == 0).all()
    with pytest.raises(NotInvertibleError):
        extend_zplus_to_z(doubling_family(), _seq([0.1, 0.2]), 0, 2)


def test_orbit_pseudo_orbit_round_trip(single_doubling):
    o = generate_orbit(single_doubling, 0.3, SymbolWord.constant(0), 0, 4)
    po = o.as_pseudo_orbit()
    assert po.delta == 0 and as_orbit(single_doubling, po) == o


def test_jsonl_round_trip(tmp_path, doubling, rng):
    po = generate_pseudo_orbit(doubling, 0.2, SymbolWord.random(2, -0, 15, rng), 0, 15, 0.01, rng)
    dump_jsonl(doubling, po, tmp_path / "po.jsonl")
    back = load_jsonl(doubling, tmp_path / "po.jsonl", delta=0.01)
    assert back.points == po.points and list(back.symbols()) == list(po.symbols())
    lines = (tmp_path / "po.jsonl").read_text().splitlines()
    assert len(lines) == 16 and '"step_error"' in lines[0]
    sh = shift_system(3)
    spo = generate_pseudo_orbit(sh, 3, SymbolWord.random(2, -4, 4, rng), -4, 4, 0.25, rng)
    dump_jsonl(sh, spo, tmp_path / "s.jsonl")
    assert load_jsonl(sh, tmp_path / "s.jsonl", 0.25).points == spo.points


def test_ensemble_round_trip(tmp_path, doubling, rng):
    members = [generate_pseudo_orbit(doubling, rng.random(), SymbolWord.random(2, 0, 8, rng), 0, 8, 0.01, rng)
               for _ in range(3)]
    ens = PseudoOrbitEnsemble(members, 0.01)
    check_ensemble(doubling, ens)
    save_ensemble(doubling, ens, tmp_path / "ens")
    sys_, back = load_ensemble(tmp_path / "ens")
    assert sys_ == doubling and [m.points for m in back] == [m.points for m in members]
