"""Hot loops: circle-affine orbits and exact pair reachability.

Every kernel exists twice: a loop version compiled with numba, and a
vectorised numpy version.  ``IFSHADOW_DISABLE_NUMBA=1`` (or a missing numba)
selects the numpy path for the whole process; callers can also force one via
``backend=``.  Both paths must agree to rounding, which the test-suite checks.
"""
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def _env_disabled():
    return os.environ.get("IFSHADOW_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")


DEFAULT_BACKEND = "numba" if HAVE_NUMBA and not _env_disabled() else "numpy"


def resolve_backend(backend=None):
    backend = backend or DEFAULT_BACKEND
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        return "numpy"
    return backend


# ---------------------------------------------------------------- pullback


@njit(cache=True)
def _pullback_nb(xs, syms, a, b, radii, tol):
    R, n = xs.shape
    ys = np.empty_like(xs)
    fail = np.full(R, -1, dtype=np.int64)
    ties = np.zeros(R, dtype=np.int64)
    for r in range(R):
        y = xs[r, n - 1]
        ys[r, n - 1] = y
        for k in range(n - 2, -1, -1):
            s = syms[r, k]
            A = a[s]
            base = ((y - b[s]) % 1.0) / A
            best = -1.0
            bestd = np.inf
            hits = 0
            for t in range(A):
                p = base + t / A
                if p >= 1.0:
                    p -= 1.0
                d = abs(p - xs[r, k])
                if d > 0.5:
                    d = 1.0 - d
                if d <= radii[k] + tol:
                    hits += 1
                    if d < bestd:
                        bestd = d
                        best = p
            if hits == 0:
                fail[r] = k
                for q in range(k + 1):
                    ys[r, q] = np.nan
                break
            if hits > 1:
                ties[r] += 1
            ys[r, k] = best
            y = best
    return ys, fail, ties


def _pullback_np(xs, syms, a, b, radii, tol):
    R, n = xs.shape
    ys = np.full_like(xs, np.nan)
    fail = np.full(R, -1, dtype=np.int64)
    ties = np.zeros(R, dtype=np.int64)
    amax = int(a.max())
    t = np.arange(amax)
    y = xs[:, n - 1].copy()
    ys[:, n - 1] = y
    alive = np.ones(R, dtype=bool)
    for k in range(n - 2, -1, -1):
        s = syms[:, k]
        A = a[s].astype(np.float64)
        base = ((y - b[s]) % 1.0) / A
        cand = base[:, None] + t[None, :] / A[:, None]
        cand = np.where(cand >= 1.0, cand - 1.0, cand)
        d = np.abs(cand - xs[:, k, None])
        d = np.minimum(d, 1.0 - d)
        valid = (t[None, :] < a[s][:, None]) & (d <= radii[k] + tol)
        hits = valid.sum(axis=1)
        newly_failed = alive & (hits == 0)
        fail[newly_failed] = k
        alive &= hits > 0
        ties += (alive & (hits > 1)).astype(np.int64)
        d = np.where(valid, d, np.inf)
        pick = np.argmin(d, axis=1)
        y = np.where(alive, cand[np.arange(R), pick], np.nan)
        ys[:, k] = y
    return ys, fail, ties


def circle_pullback(xs, syms, a, b, radii, tol, backend=None):
    """Backward-preimage pullback for a batch of circle pseudo-orbits.

    ``xs`` is (R, n), ``syms`` is (R, n-1) with ``syms[:, k]`` the symbol
    carrying position k to k+1, ``radii[k]`` the admissible distance of the
    pulled-back point at position k.  Returns ``(ys, fail, ties)`` where
    ``fail[r]`` is the first position with no admissible branch (or -1).
    """
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    syms = np.ascontiguousarray(syms, dtype=np.int64)
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    radii = np.ascontiguousarray(radii, dtype=np.float64)
    if resolve_backend(backend) == "numba":
        return _pullback_nb(xs, syms, a, b, radii, float(tol))
    return _pullback_np(xs, syms, a, b, radii, float(tol))


# ------------------------------------------------------------ cell oracle


@njit(cache=True)
def _cell_oracle_nb(centers, h, xs, syms, a, b, eps, tol):
    G = centers.shape[0]
    n = xs.shape[0]
    accept = np.zeros(G, dtype=np.bool_)
    point_dev = np.zeros(G)
    lower_dev = np.zeros(G)
    for g in range(G):
        c = centers[g]
        r = h
        pmax = 0.0
        lmax = 0.0
        ok = True
        for i in range(n):
            d = abs(c - xs[i])
            if d > 0.5:
                d = 1.0 - d
            if d > pmax:
                pmax = d
            low = 0.0
            if r < 0.5:
                low = d - r
                if low < 0.0:
                    low = 0.0
            if low > lmax:
                lmax = low
            if lmax > eps + tol:
                ok = False
                break
            if i < n - 1:
                s = syms[i]
                c = (a[s] * c + b[s]) % 1.0
                r = a[s] * r + 1e-15
        accept[g] = ok
        point_dev[g] = pmax
        lower_dev[g] = lmax
    return accept, point_dev, lower_dev


def _cell_oracle_np(centers, h, xs, syms, a, b, eps, tol):
    G = centers.shape[0]
    n = xs.shape[0]
    c = centers.copy()
    r = h
    pmax = np.zeros(G)
    lmax = np.zeros(G)
    alive = np.ones(G, dtype=bool)
    for i in range(n):
        d = np.abs(c - xs[i])
        d = np.minimum(d, 1.0 - d)
        # deviations are only tracked while the cell is still a candidate,
        # matching the early exit of the loop kernel
        pmax = np.where(alive, np.maximum(pmax, d), pmax)
        low = np.maximum(d - r, 0.0) if r < 0.5 else np.zeros(G)
        lmax = np.where(alive, np.maximum(lmax, low), lmax)
        alive &= lmax <= eps + tol
        if i < n - 1:
            s = syms[i]
            c = (a[s] * c + b[s]) % 1.0
            r = a[s] * r + 1e-15
    return alive, pmax, lmax


def circle_cell_oracle(centers, h, xs, syms, a, b, eps, tol, backend=None):
    """Rigorous exclusion test for grid cells ``[c-h, c+h]`` on the circle.

    A cell is rejected only if for some index the forward image arc of the
    cell lies farther than ``eps`` from the pseudo-orbit point; accepted
    cells are those that may contain a point tracking within ``eps``.
    """
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    syms = np.ascontiguousarray(syms, dtype=np.int64)
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if resolve_backend(backend) == "numba":
        return _cell_oracle_nb(centers, float(h), xs, syms, a, b, float(eps), float(tol))
    return _cell_oracle_np(centers, float(h), xs, syms, a, b, float(eps), float(tol))


# --------------------------------------------------------- pair survival


@njit(cache=True)
def _survival_nb(x, y, prefixes, a, b, e, horizon, strong):
    P = x.shape[0]
    Q, D = prefixes.shape
    m = a.shape[0]
    best = np.zeros(P, dtype=np.int64)
    for p in range(P):
        for q in range(Q):
            cx = x[p]
            cy = y[p]
            d = abs(cx - cy)
            if d > 0.5:
                d = 1.0 - d
            if d > e:
                continue
            steps = 1
            for i in range(1, horizon + 1):
                if i - 1 < D:
                    code = prefixes[q, i - 1]
                    if strong:
                        sx = code // m
                        sy = code % m
                    else:
                        sx = code
                        sy = code
                    nx = (a[sx] * cx + b[sx]) % 1.0
                    ny = (a[sy] * cy + b[sy]) % 1.0
                    d = abs(nx - ny)
                    if d > 0.5:
                        d = 1.0 - d
                else:
                    d = np.inf
                    nx = cx
                    ny = cy
                    for sx in range(m):
                        for sy in range(m):
                            if not strong and sy != sx:
                                continue
                            tx = (a[sx] * cx + b[sx]) % 1.0
                            ty = (a[sy] * cy + b[sy]) % 1.0
                            dd = abs(tx - ty)
                            if dd > 0.5:
                                dd = 1.0 - dd
                            if dd < d:
                                d = dd
                                nx = tx
                                ny = ty
                if d > e:
                    break
                cx = nx
                cy = ny
                steps = i + 1
            if steps > best[p]:
                best[p] = steps
            if best[p] == horizon + 1:
                break
    return best


def _survival_np(x, y, prefixes, a, b, e, horizon, strong):
    P = x.shape[0]
    Q, D = prefixes.shape
    m = a.shape[0]
    if strong:
        pairs = [(sx, sy) for sx in range(m) for sy in range(m)]
    else:
        pairs = [(s, s) for s in range(m)]
    cx = np.repeat(x, Q)
    cy = np.repeat(y, Q)
    pref = np.tile(prefixes, (P, 1))
    d = np.abs(cx - cy)
    d = np.minimum(d, 1.0 - d)
    alive = d <= e
    steps = alive.astype(np.int64)
    for i in range(1, horizon + 1):
        if not alive.any():
            break
        if i - 1 < D:
            code = pref[:, i - 1]
            sx = code // m if strong else code
            sy = code % m if strong else code
            nx = (a[sx] * cx + b[sx]) % 1.0
            ny = (a[sy] * cy + b[sy]) % 1.0
            d = np.abs(nx - ny)
            d = np.minimum(d, 1.0 - d)
        else:
            d = np.full(cx.shape, np.inf)
            nx = cx.copy()
            ny = cy.copy()
            for sx, sy in pairs:
                tx = (a[sx] * cx + b[sx]) % 1.0
                ty = (a[sy] * cy + b[sy]) % 1.0
                dd = np.abs(tx - ty)
                dd = np.minimum(dd, 1.0 - dd)
                better = dd < d
                d = np.where(better, dd, d)
                nx = np.where(better, tx, nx)
                ny = np.where(better, ty, ny)
        alive &= d <= e
        cx = np.where(alive, nx, cx)
        cy = np.where(alive, ny, cy)
        steps = np.where(alive, i + 1, steps)
    return steps.reshape(P, Q).max(axis=1)


def circle_pair_survival(x, y, prefixes, a, b, e, horizon, strong=False, backend=None):
    """Longest run of consecutive forward steps (counting step 0) during which
    an adversarial word keeps ``x`` and ``y`` within ``e``.

    The adversary tries every row of ``prefixes`` for its first steps, then
    greedily picks the symbol (or symbol pair when ``strong``) minimising the
    next distance.  A value of ``horizon + 1`` means the pair survived.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    prefixes = np.ascontiguousarray(prefixes, dtype=np.int64)
    if prefixes.ndim != 2:
        raise ValueError("prefixes must be a 2-d array")
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if resolve_backend(backend) == "numba":
        return _survival_nb(x, y, prefixes, a, b, float(e), int(horizon), bool(strong))
    return _survival_np(x, y, prefixes, a, b, float(e), int(horizon), bool(strong))


# ------------------------------------------------------ pair reachability


@njit(cache=True)
def _pair_step_nb(S, imgx, imgy):
    n = S.shape[0]
    C = imgx.shape[0]
    out = np.zeros_like(S)
    changed = False
    for x in range(n):
        for y in range(n):
            if not S[x, y]:
                continue
            hit = False
            for c in range(C):
                if S[imgx[c, x], imgy[c, y]]:
                    hit = True
                    break
            out[x, y] = hit
            if not hit:
                changed = True
    return out, changed


def _pair_step_np(S, imgx, imgy):
    out = np.zeros_like(S)
    for c in range(imgx.shape[0]):
        out |= S[imgx[c]][:, imgy[c]]
    out &= S
    return out, bool((out != S).any())


def pair_step(S, imgx, imgy, backend=None):
    """One refinement of a pair-survival set on a finite space.

    ``S`` is a boolean matrix over pairs that is already closed downwards
    (``S_n`` is contained in ``S_{n-1}``), and row ``c`` of ``imgx``/``imgy``
    gives the images of every point under the ``c``-th symbol combination.
    Returns ``S & OR_c S[imgx[c]][:, imgy[c]]`` and whether it shrank.
    """
    S = np.ascontiguousarray(S, dtype=np.bool_)
    imgx = np.ascontiguousarray(imgx, dtype=np.int64)
    imgy = np.ascontiguousarray(imgy, dtype=np.int64)
    if resolve_backend(backend) == "numba":
        return _pair_step_nb(S, imgx, imgy)
    return _pair_step_np(S, imgx, imgy)
