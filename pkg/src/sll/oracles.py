"""Closed-form reference spectra.

Bessel functions are evaluated in-package: ``J_nu`` by its ascending
series for ``x <= 12`` and Miller's backward recurrence beyond, ``I_m``
by its ascending series. Zeros come from McMahon-initialized Newton
iterations confined to sign-change brackets.
"""
from dataclasses import dataclass
import math

import numpy as np

SERIES_LIMIT = 12.0
X_MAX = 200.0


def _check(nu, x):
    if int(nu) != nu or nu < 0:
        raise ValueError(f"order must be a nonnegative integer, got {nu}")
    if not 0.0 <= x <= X_MAX:
        raise ValueError(f"argument must lie in [0, {X_MAX}], got {x}")


def _series(nu, x, sign):
    half = 0.5 * x
    term = half ** nu / math.factorial(nu)
    total = term
    q = sign * half * half
    for m in range(1, 200):
        term *= q / (m * (m + nu))
        total += term
        if abs(term) <= 1e-17 * abs(total):
            break
    return total


def bessel_j(nu, x):
    """Bessel function of the first kind ``J_nu(x)`` for integer ``nu >= 0`` and ``0 <= x <= 200``."""
    _check(nu, x)
    return _bessel_j(int(nu), float(x))


def _bessel_j(nu, x):
    """Unchecked ``J_nu(x)``; the zero finder uses it past ``X_MAX`` for high zeros."""
    if x <= SERIES_LIMIT:
        return _series(nu, x, -1.0)
    # Miller's algorithm normalized by J_0 + 2 sum J_{2k} = 1
    top = int(max(nu, x) + 30 + 2 * math.sqrt(max(nu, x)))
    top += top % 2
    jp1, j = 0.0, 1e-300
    norm = 0.0
    out = 0.0
    for k in range(top, 0, -1):
        jm1 = 2.0 * k / x * j - jp1
        jp1, j = j, jm1
        if abs(j) > 1e250:
            j *= 1e-250
            jp1 *= 1e-250
            out *= 1e-250
            norm *= 1e-250
        if k - 1 == nu:
            out = j
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j
    norm += j  # J_0 term
    return out / norm


def bessel_j_prime(nu, x):
    _check(nu, x)
    return _bessel_j_prime(int(nu), float(x))


def _bessel_j_prime(nu, x):
    if nu == 0:
        return -_bessel_j(1, x)
    return 0.5 * (_bessel_j(nu - 1, x) - _bessel_j(nu + 1, x))


def bessel_i(m, x):
    """Modified Bessel function ``I_m(x)`` by its ascending series."""
    m = int(m)
    if m < 0 or x < 0:
        raise ValueError("bessel_i needs m >= 0 and x >= 0")
    return _series(m, float(x), 1.0)


def bessel_i_prime(m, x):
    if m == 0:
        return bessel_i(1, x)
    return 0.5 * (bessel_i(m - 1, x) + bessel_i(m + 1, x))


def _bracketed_newton(f, df, a, b, x0, tol=1e-13, maxit=100):
    """Newton from x0, falling back to bisection whenever a step leaves [a, b]."""
    fa = f(a)
    x = x0 if a < x0 < b else 0.5 * (a + b)
    for _ in range(maxit):
        fx = f(x)
        if fx == 0.0:
            return x
        if (fx > 0) == (fa > 0):
            a, fa = x, fx
        else:
            b = x
        d = df(x)
        step = fx / d if d != 0 else np.inf
        xn = x - step
        if not a < xn < b:
            xn = 0.5 * (a + b)
        if abs(xn - x) <= tol * max(1.0, abs(x)) or b - a <= tol * max(1.0, abs(x)):
            return xn
        x = xn
    return x


def _mcmahon(nu, k):
    beta = (k + 0.5 * nu - 0.25) * math.pi
    mu = 4.0 * nu * nu
    e = 8.0 * beta
    return beta - (mu - 1) / e - 4 * (mu - 1) * (7 * mu - 31) / (3 * e ** 3)


def _sign_brackets(f, start, count, step, limit):
    out = []
    x = start
    fx = f(x)
    while len(out) < count:
        y = min(x + step, limit)
        fy = f(y)
        if fx == 0.0:
            fx = f(x + 1e-9)
        if (fx > 0) != (fy > 0):
            out.append((x, y))
        if y >= limit:
            break
        x, fx = y, fy
    return out


@dataclass(frozen=True)
class BesselZeroTable:
    order: int
    zeros: tuple

    def __post_init__(self):
        z = np.asarray(self.zeros)
        if len(z) and not (np.all(np.diff(z) > 0) and z[0] > 0):
            raise ValueError("zeros must be positive and ascending")


def bessel_zeros(nu, K):
    """First ``K`` positive zeros of ``J_nu`` (K <= 100)."""
    if K > 100:
        raise ValueError("at most 100 zeros are tabulated")
    if int(nu) != nu or nu < 0:
        raise ValueError(f"order must be a nonnegative integer, got {nu}")
    nu = int(nu)
    # zeros are spaced by about pi, so the K-th lies below (K + nu / 2 + 1) pi
    limit = (K + 0.5 * nu + 1.0) * math.pi
    br = _sign_brackets(lambda x: _bessel_j(nu, x), max(nu, 1e-6), K, 0.1, limit)
    zeros = []
    for k, (a, b) in enumerate(br, start=1):
        zeros.append(_bracketed_newton(lambda x: _bessel_j(nu, x), lambda x: _bessel_j_prime(nu, x),
                                       a, b, _mcmahon(nu, k)))
    return BesselZeroTable(nu, tuple(zeros))


def check_interlacing(tables):
    """True iff j_{nu,k} < j_{nu+1,k} < j_{nu,k+1} for all consecutive stored orders."""
    by_order = {t.order: t.zeros for t in tables}
    for nu, z in by_order.items():
        nxt = by_order.get(nu + 1)
        if nxt is None:
            continue
        for k in range(min(len(z) - 1, len(nxt))):
            if not z[k] < nxt[k] < z[k + 1]:
                return False
    return True


def clamped_plate_roots(m, K):
    """First K roots kappa of ``J_m I_m' - J_m' I_m`` (clamped disk, angular index m)."""
    def f(x):
        return bessel_j(m, x) * bessel_i_prime(m, x) - bessel_j_prime(m, x) * bessel_i(m, x)

    def df(x, h=1e-6):
        return (f(x + h) - f(x - h)) / (2 * h)

    # roots sit near j_{m+1,k}-ish; scan with a step well below the spacing
    br = _sign_brackets(f, 0.5 + 0.5 * m, K, 0.05, 60.0)
    return [_bracketed_newton(f, df, a, b, 0.5 * (a + b)) for a, b in br[:K]]


# ------------------------------------------------------------------ spectra

def square_laplace_spectrum(bc, mu, count):
    """``mu pi^2 (m^2 + n^2)``: m, n >= 1 (Dirichlet) or >= 0 (Neumann), ascending."""
    if count > 100000:
        raise ValueError("count must be <= 1e5")
    lo = 1 if bc == "dirichlet" else 0
    if bc not in ("dirichlet", "neumann"):
        raise ValueError(f"unknown boundary condition {bc!r}")
    R = int(math.sqrt(4.0 * count / math.pi)) + 4
    while True:
        i = np.arange(lo, R + 1)
        s = (i[:, None] ** 2 + i[None, :] ** 2).ravel()
        s = np.sort(s[s <= R * R])
        if len(s) >= count:
            return mu * math.pi ** 2 * s[:count].astype(float)
        R *= 2


def disk_spectrum_table(kind, mu, count):
    """Rows ``(value, m, k, multiplicity)`` sorted by value, covering ``count`` eigenvalues."""
    if count > 200:
        raise ValueError("count must be <= 200")
    bound = 2.0 * math.sqrt(count) + 8.0
    while True:
        rows = []
        m = 0 if kind in ("laplace_dirichlet", "clamped_plate") else 1
        while True:
            if kind == "clamped_plate":
                K = max(1, int(bound / math.pi) + 2)
                roots = [r for r in clamped_plate_roots(m, K) if r < bound]
                vals = [mu * r * r for r in roots]
            else:
                if m > bound:
                    break
                K = max(1, int((bound - m) / math.pi) + 2)
                roots = [z for z in bessel_zeros(m, K).zeros if z < bound]
                vals = [mu * z * z for z in roots]
            if not roots:
                break
            if kind == "stokes_dirichlet_eq_buckling":
                mult = 1 if m == 1 else 2
            else:
                mult = 1 if m == 0 else 2
            rows += [(v, m, k + 1, mult) for k, v in enumerate(vals)]
            m += 1
        rows.sort()
        total = sum(r[3] for r in rows)
        if total >= count:
            out, n = [], 0
            for r in rows:
                if n >= count:
                    break
                out.append(r)
                n += r[3]
            return out
        bound *= 1.5


def disk_spectra(kind, mu, count):
    """Ascending disk eigenvalues with multiplicity (``count`` values)."""
    if kind not in ("laplace_dirichlet", "stokes_dirichlet_eq_buckling", "clamped_plate"):
        raise ValueError(f"unknown disk spectrum {kind!r}")
    vals = []
    for v, _, _, mult in disk_spectrum_table(kind, mu, count):
        vals += [v] * mult
    return np.array(vals[:count])


def brute_force_dense_check(spec, k=None):
    """Dense eigen-solve of the assembled pencil of ``spec`` (reduced dim <= 4000)."""
    from .lab import dense_spectrum

    return dense_spectrum(spec, k)
