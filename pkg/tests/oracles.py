"""Independent reference computations used by the tests.

Nothing here imports the package: each routine is a separate code path
for a quantity the package computes.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np


def ml_series(alpha, rho, z, dps=None):
    """``E_{alpha,rho}(z)`` by Horner summation of the power series in high precision.

    The terms peak near ``exp(|z|**(1/alpha))`` before they cancel, so the
    working precision grows with that size.
    """
    z = complex(z)
    az = abs(z)
    peak = az ** (1.0 / alpha) if az > 0 else 0.0
    if dps is None:
        dps = 30 + int(peak / math.log(10)) + 5
    n_terms = 1
    while True:
        log_term = n_terms * math.log(max(az, 1e-300)) - math.lgamma(alpha * n_terms + rho)
        if alpha * n_terms + rho > 2 and log_term < -(dps + 5) * math.log(10) and n_terms > peak / alpha:
            break
        n_terms += 1
    with mpmath.workdps(dps):
        a, r = mpmath.mpf(alpha), mpmath.mpf(rho)
        zz = mpmath.mpc(z.real, z.imag)
        acc = mpmath.mpc(0)
        for j in range(n_terms, -1, -1):
            acc = acc * zz + mpmath.rgamma(a * j + r)
        return complex(acc)


def logistic(c, t):
    """Solution of ``u' = u^2 - u`` with ``u(0) = c``."""
    return c / (c + (1.0 - c) * math.exp(t))


def fractional_abm(alpha, c, T, n):
    """Adams-Bashforth-Moulton predictor-corrector for ``D^alpha u = u^2 - u``, ``u(0) = c``.

    Caputo derivative of order ``0 < alpha <= 1`` on ``n`` uniform steps.
    Returns the value at ``T``.
    """
    h = T / n
    f = lambda u: u * u - u
    u = np.empty(n + 1)
    fu = np.empty(n + 1)
    u[0] = c
    fu[0] = f(c)
    ga1 = math.gamma(alpha + 1.0)
    ga2 = math.gamma(alpha + 2.0)
    j = np.arange(n + 1, dtype=float)
    for k in range(n):
        # predictor weights b_{j,k+1}
        jj = j[: k + 1]
        b = ((k + 1 - jj) ** alpha - (k - jj) ** alpha) * h**alpha / ga1
        pred = c + np.dot(b, fu[: k + 1])
        # corrector weights a_{j,k+1}
        a = np.empty(k + 2)
        a[0] = k**(alpha + 1) - (k - alpha) * (k + 1) ** alpha
        if k >= 1:
            m = jj[1:]
            a[1 : k + 1] = (k - m + 2) ** (alpha + 1) + (k - m) ** (alpha + 1) - 2 * (k - m + 1) ** (alpha + 1)
        a[k + 1] = 1.0
        a *= h**alpha / ga2
        u[k + 1] = c + np.dot(a[: k + 1], fu[: k + 1]) + a[k + 1] * f(pred)
        fu[k + 1] = f(u[k + 1])
    return float(u[n])


def gaussian_pdf(x, var):
    return np.exp(-np.asarray(x) ** 2 / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def holm_rejections(pvalues, level):
    """Indices rejected by the Holm-Bonferroni step-down procedure."""
    order = np.argsort(pvalues)
    m = len(pvalues)
    rejected = []
    for rank, idx in enumerate(order):
        if pvalues[idx] <= level / (m - rank):
            rejected.append(int(idx))
        else:
            break
    return rejected
