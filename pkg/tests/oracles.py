"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written the slow, obvious way and with
arithmetic that does not share code with src/: exact rationals where the
quantity is rational, mpmath at 50 digits where it is not, and linear
scans instead of bisection or closed forms. Tests compare the fast
implementations against these.
"""

from fractions import Fraction
from math import comb

import mpmath

mpmath.mp.dps = 50


def q_mp(x):
    """High-precision Gaussian tail Q(x)."""
    return 0.5 * mpmath.erfc(mpmath.mpf(x) / mpmath.sqrt(2))


def q_inv_mp(p):
    """High-precision inverse of q_mp, by root finding."""
    p = mpmath.mpf(p)
    # crude bracket: Q maps [-40, 40] onto well past [1e-300, 1-1e-300]
    return mpmath.findroot(lambda x: q_mp(x) - p, mpmath.mpf(0))


def rep_tail_fraction(n_reps, eps):
    """Exact majority-vote error probability of an n_reps repetition code.

    eps must be a Fraction; the result is the exact rational
    sum_{j > n/2} C(n, j) eps^j (1 - eps)^(n - j).
    """
    if not isinstance(eps, Fraction):
        raise TypeError("eps must be a Fraction for the exact oracle")
    n = int(n_reps)
    total = Fraction(0)
    for j in range(n // 2 + 1, n + 1):
        total += comb(n, j) * eps**j * (1 - eps) ** (n - j)
    return total


def rep_tail_mp(n_reps, eps):
    """Majority-vote error probability at 50-digit precision."""
    n = int(n_reps)
    e = mpmath.mpf(eps)
    total = mpmath.mpf(0)
    for j in range(n // 2 + 1, n + 1):
        total += mpmath.binomial(n, j) * e**j * (1 - e) ** (n - j)
    return total


def min_reps_scan(mu, eps, r_max=5001):
    """Smallest odd repetition count whose tail is <= mu, by linear scan."""
    n = 1
    while n <= r_max:
        if rep_tail_mp(n, eps) <= mu:
            return n
        n += 2
    raise RuntimeError(f"no repetition count up to {r_max} meets {mu}")


def bler_mp(capacity, dispersion, n, k):
    """Normal-approximation block error rate at 50-digit precision."""
    c = mpmath.mpf(capacity)
    v = mpmath.mpf(dispersion)
    n = mpmath.mpf(n)
    arg = mpmath.log(2) * mpmath.sqrt(n / v) * (c - mpmath.mpf(k) / n)
    return q_mp(arg)


def min_n_scan(capacity, dispersion, k, target, n_max=100000):
    """Smallest blocklength meeting the target block error rate, by scan."""
    n = 1
    while n <= n_max:
        if bler_mp(capacity, dispersion, n, k) <= mpmath.mpf(target):
            return n
        n += 1
    raise RuntimeError(f"no blocklength up to {n_max} meets {target}")


def awgn_capacity_dispersion_mp(snr_linear):
    s = mpmath.mpf(snr_linear)
    c = mpmath.log(1 + s, 2)
    v = 1 - 1 / (1 + s) ** 2
    return c, v
