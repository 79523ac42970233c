import json

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from ifshadow.errors import NotInvertibleError, SizeCapError, SymbolError
from ifshadow.ifs_core import (CircleAffine, Composite, FiniteMap, IFSystem, IntervalClamp,
                               IntervalTent, ShiftMap, SymbolWord, apply, compose_backward,
                               compose_forward, expansion_constants, inverse_system,
                               lipschitz_constant, power_system, preimages)
from ifshadow.spaces import BinaryShift, Circle, Interval

from conftest import doubling_family, path_table, shift_system


def test_apply_examples(doubling):
    assert apply(doubling, 0, 0.3) == pytest.approx(0.6)
    assert apply(doubling, 1, 0.5) == pytest.approx(1 / 3)
    s = BinaryShift(3)
    sys_ = IFSystem(s, (ShiftMap(False),))
    x = s.from_bits([0, 1, 1, 0, 0, 1, 0])
    y = apply(sys_, 0, x)
    bx, by = s.bits(x), s.bits(y)
    assert all(by[p] == bx[p + 1] for p in range(s.nbits - 1))


def test_symbol_out_of_range(doubling):
    with pytest.raises(SymbolError):
        apply(doubling, 2, 0.1)
    with pytest.raises(SymbolError):
        apply(doubling, True, 0.1)


def test_preimage_examples():
    sys2 = IFSystem(Circle(), (CircleAffine(2, 0.0),))
    assert sorted(preimages(sys2, 0, 0.43)) == pytest.approx([0.215, 0.715])
    sys3 = IFSystem(Circle(), (CircleAffine(3, 0.0),))
    assert sorted(preimages(sys3, 0, 0.0)) == pytest.approx([0, 1 / 3, 2 / 3])
    sh = shift_system(3)
    assert len(preimages(sh, 0, 5)) == 1


def test_clamp_plateau_fiber():
    sys_ = IFSystem(Interval(), (IntervalClamp(),))
    fib = preimages(sys_, 0, 1.0)
    assert fib.plateau and sorted(fib) == [0.5, 1.0]
    assert list(preimages(sys_, 0, 0.99)) == [0.495]


@settings(max_examples=100)
@given(st.floats(0, 1, exclude_max=True), st.integers(2, 5), st.floats(0, 1))
def test_affine_preimages_property(y, a, b):
    sys_ = IFSystem(Circle(), (CircleAffine(a, b),))
    pts = preimages(sys_, 0, y)
    assert len(pts) == a
    for p in pts:
        assert Circle().distance(apply(sys_, 0, p), y) <= 1e-9
    arr = np.array(sorted(pts))
    gaps = np.diff(np.concatenate([arr, arr[:1] + 1]))
    assert (gaps >= 1 / a - 1e-9).all()


def test_compose_examples(doubling):
    w = SymbolWord(0, (0, 0), "fail_outside")
    assert compose_forward(doubling, w, 0, 0.1) == 0.1
    assert compose_forward(doubling, w, 2, 0.1) == pytest.approx(0.4)
    w01 = SymbolWord(0, (0, 1), "fail_outside")
    assert compose_forward(doubling, w01, 2, 0.1) == pytest.approx(0.4 + 1 / 3)
    with pytest.raises(SymbolError):
        compose_forward(doubling, w, 3, 0.1)
    with pytest.raises(NotInvertibleError):
        compose_backward(doubling, SymbolWord(-1, (0,), "fail_outside"), 1, 0.1)


@settings(max_examples=50)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=12), st.floats(0, 1, exclude_max=True))
def test_cocycle(word, x):
    sys_ = doubling_family()
    w = SymbolWord(0, tuple(word), "fail_outside")
    for n in range(len(word)):
        nxt = compose_forward(sys_, w, n + 1, x)
        assert nxt == apply(sys_, w.symbol_at(n), compose_forward(sys_, w, n, x))


def test_backward_undoes_forward_on_shift():
    sh = shift_system(4)
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(1, 10))
        word = tuple(int(v) for v in rng.integers(0, 2, n))
        x = int(rng.integers(sh.space.size))
        fwd = compose_forward(sh, SymbolWord(0, word, "fail_outside"), n, x)
        # the same symbols, now read at indices -n .. -1
        back = compose_backward(sh, SymbolWord(-n, word, "fail_outside"), n, fwd)
        assert back == x
    right = compose_backward(IFSystem(sh.space, (ShiftMap(False),)), SymbolWord.constant(0), 1, 6)
    assert right == ShiftMap(False, -1).apply(sh.space, 6)


def test_symbol_word_extensions():
    w = SymbolWord(-2, (0, 1, 2), "repeat_last")
    assert [w(i) for i in (-5, -2, 0, 7)] == [0, 0, 2, 2]
    c = SymbolWord(0, (0, 1, 2), "cyclic")
    assert [c(i) for i in (-1, 3, 4)] == [2, 0, 1]
    with pytest.raises(SymbolError):
        SymbolWord(0, (1,), "fail_outside")(1)
    r = SymbolWord(0, (0, 1, 1), "fail_outside").reversed()
    assert r.base == -3 and [r(i) for i in (-3, -2, -1)] == [1, 1, 0]
    assert SymbolWord.from_json(json.loads(json.dumps(w.to_json()))) == w


def _grid_expansion_oracle(a, n=10_000):
    # every grid pair (k/n, j/n), via its offset: arc metric and f are translation invariant
    pts = np.arange(n) / n
    out = []
    for start in range(0, n, 1000):
        x = pts[start:start + 1000, None]
        y = pts[None, :]
        d = np.abs(x - y) % 1.0
        d = np.minimum(d, 1 - d)
        fd = np.abs(a * x - a * y) % 1.0
        fd = np.minimum(fd, 1 - fd)
        out.append((d, fd))
    return out


@pytest.mark.parametrize("a", [2, 3])
def test_expansion_constants_match_grid_oracle(a):
    sys_ = IFSystem(Circle(), (CircleAffine(a, 0.0),) if a == 3 else (CircleAffine(2, 0.0), CircleAffine(2, 1 / 3)))
    rep = expansion_constants(sys_)
    assert rep.method == "analytic"
    assert (rep.beta, rep.delta0, rep.alpha) == (a, 1 / (2 * a), a)
    exact_max, broken_min = 0.0, 1.0
    ratio_max = 0.0
    for d, fd in _grid_expansion_oracle(a):
        pos = d > 0
        exact = np.abs(fd - a * d) <= 1e-9
        exact_max = max(exact_max, d[pos & exact].max())
        broken_min = min(broken_min, d[pos & ~exact].min())
        ratio_max = max(ratio_max, (fd[pos] / d[pos]).max())
    assert broken_min > 1 / (2 * a)  # every pair within delta0 is stretched by exactly a
    assert abs(exact_max - 1 / (2 * a)) <= 1e-4  # within one grid step
    assert ratio_max == pytest.approx(a)
    assert rep.beta >= rep.alpha > 1


def test_clamp_does_not_expand(clamp):
    rep = expansion_constants(clamp, samples=10_000, seed=1)
    assert rep.method == "sampled"
    assert rep.alpha <= 1 and not rep.expands_small_distances


def test_sampled_constants_reproducible():
    sys_ = IFSystem(Interval(), (IntervalTent(),))
    a = expansion_constants(sys_, seed=5, samples=2000)
    b = expansion_constants(sys_, seed=5, samples=2000)
    assert a == b


def test_lipschitz_examples():
    sh = shift_system(4)
    analytic = lipschitz_constant(sh)
    exhaustive = lipschitz_constant(sh, method="exhaustive")
    assert analytic.K == exhaustive.K == 2.0
    assert exhaustive.forward == exhaustive.inverse == 2.0
    rep = lipschitz_constant(IFSystem(Circle(), (CircleAffine(2, 0.0),)))
    assert rep.K == 2 and not rep.inverse_included
    ident = IFSystem(path_table(4), (FiniteMap((0, 1, 2, 3)),))
    assert lipschitz_constant(ident).K == 1.0


def test_power_system():
    base = IFSystem(Circle(), (CircleAffine(2, 0.0),))
    assert power_system(base, 1) == base
    p2 = power_system(base, 2)
    assert expansion_constants(p2).beta == 4
    fam = doubling_family()
    p3 = power_system(fam, 3)
    assert p3.m == 8 and p3.labels[5] == (1, 0, 1)
    x = 0.1234
    w = SymbolWord(0, (1, 0, 1), "fail_outside")
    assert p3.apply(5, x) == pytest.approx(compose_forward(fam, w, 3, x), abs=1e-12)
    with pytest.raises(SizeCapError):
        power_system(fam, 14)
    with pytest.raises(ValueError):
        power_system(fam, 0)
    sh2 = power_system(shift_system(3), 2)
    assert isinstance(sh2.maps[1], Composite)
    assert sh2.apply(1, 9) == shift_system(3).apply(1, shift_system(3).apply(0, 9))


def test_inverse_system():
    sh = shift_system(4)
    inv = inverse_system(sh)
    assert inv.maps[0] == ShiftMap(False, -1)
    assert inverse_system(inv) == sh
    pts = np.arange(sh.space.size)
    for lam in range(2):
        assert np.array_equal(inv.apply_array(lam, sh.apply_array(lam, pts)), pts)
    with pytest.raises(NotInvertibleError):
        inverse_system(doubling_family())


def test_system_json_round_trip():
    for sys_ in (doubling_family(), shift_system(2), IFSystem(path_table(3), (FiniteMap((1, 2, 0)),))):
        assert IFSystem.from_json(json.loads(json.dumps(sys_.to_json()))) == sys_
    with pytest.raises(ValueError):
        IFSystem(Circle(), ())
