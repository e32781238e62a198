"""Reference CDFs and Kolmogorov-Smirnov checks for the samplers."""

from __future__ import annotations

import math

import numpy as np
from scipy import interpolate, stats

from .kernels import KernelId, build_kernel_table, stable_table
from .mittag_leffler import branch_cdf

__all__ = ["KS_LEVEL", "clock_cdf", "kernel_cdf", "ks_summary", "stable_cdf"]

KS_LEVEL = 0.01

# Oracle tables use a fine grid and a loose window: the wrapped-tail
# correction keeps the CDF error ~1e-5 while resolving the cusp at x = 0.
ORACLE_POINTS = 2**18
ORACLE_TAIL = 1e-2


def clock_cdf(alpha: float):
    """CDF of the branching delay, ``1 - E_{alpha,1}(-t**alpha)``."""
    return lambda t: branch_cdf(alpha, np.maximum(np.asarray(t, dtype=float), 0.0))


def stable_cdf(beta: float, theta: float, lam: float):
    """CDF of the Feller stable law with characteristic function ``exp(-lam psi)``.

    For ``beta >= 1`` an FFT table; below that the heavy tails defeat the
    table and the law is mapped onto scipy's S1 parameterization instead.
    """
    if beta >= 1.0:
        return stable_table(beta, theta, lam, n_points=ORACLE_POINTS, tail_target=ORACLE_TAIL).cdf_at
    skew = -math.tan(theta * math.pi / 2.0) / math.tan(beta * math.pi / 2.0)
    scale = (lam * math.cos(theta * math.pi / 2.0)) ** (1.0 / beta)
    if stats.levy_stable.parameterization != "S1":
        raise RuntimeError("scipy.stats.levy_stable is not in its default S1 parameterization")
    law = stats.levy_stable(beta, skew, loc=0.0, scale=scale)
    # scipy's quadrature costs ~1 ms per point: tabulate on an asinh grid
    # (interpolation error ~1e-6) and clamp its rounding-level wiggles
    y = np.linspace(-math.asinh(1e7), math.asinh(1e7), 1601)
    cdf = np.maximum.accumulate(np.clip(law.cdf(scale * np.sinh(y)), 0.0, 1.0))
    spline = interpolate.PchipInterpolator(y, cdf, extrapolate=False)

    def evaluate(x):
        z = np.arcsinh(np.asarray(x, dtype=float) / scale)
        return np.nan_to_num(spline(np.clip(z, y[0], y[-1])), nan=0.0)

    return evaluate


def kernel_cdf(kid: KernelId):
    """CDF of ``G_{alpha,rho}(t, .)`` from an FFT table (``beta >= 1`` only)."""
    if kid.params.beta < 1.0:
        return None
    return build_kernel_table(kid, n_points=ORACLE_POINTS, tail_target=ORACLE_TAIL).cdf_at


def ks_summary(samples, cdf, level: float = KS_LEVEL) -> dict:
    """One-sample KS statistic, p-value and verdict; ``cdf=None`` reports no oracle."""
    samples = np.asarray(samples, dtype=float)
    if cdf is None:
        return {"n": int(samples.size), "statistic": None, "pvalue": None, "passed": None, "oracle": "none"}
    res = stats.kstest(samples, cdf)
    return {
        "n": int(samples.size),
        "statistic": float(res.statistic),
        "pvalue": float(res.pvalue),
        "level": level,
        "passed": bool(res.pvalue >= level),
    }
