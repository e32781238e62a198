"""Generalized Mittag-Leffler functions and their spectral decompositions.

The two-parameter function ``E_{a,r}(z) = sum_j z**j / Gamma(a*j + r)`` is
evaluated with three regimes that agree on their overlaps:

* a truncated Taylor series for ``|z| <= 1``;
* the algebraic asymptotic expansion (plus the exponential pole term when it
  lies on the principal sheet) for ``|z|`` beyond a radius where the
  expansion is accurate to ~1e-17 (orders ``0 < a <= 1`` only);
* numerical inversion of the Laplace transform ``s**(a-r) / (s**a - z)`` on
  an optimal parabolic contour, with explicit residues for the poles that
  lie to the right of the contour, in between.

For ``0 < a <= 1`` and ``r >= a`` the map ``x -> E_{a,r}(-x)`` is completely
monotone, i.e. ``E_{a,r}(-x) = int_0^inf exp(-r x) K(r) dr`` with ``K >= 0``.
:func:`ml_spectral_density` tabulates ``K`` on Gauss-Legendre panels and
validates the table by transforming it back.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import mpmath
import numpy as np
from numpy.polynomial import legendre
from scipy import integrate, special

from .exceptions import MLAccuracyError, ParameterError, SpectralTableError

__all__ = [
    "MLOrder",
    "SpectralTable",
    "asymptotic_radius",
    "branch_cdf",
    "branch_density",
    "ml_eval",
    "ml_spectral_density",
    "ml_survival",
]

_LOG_MACHINE_EPS = math.log(np.finfo(float).eps)
_LOG_TARGET_EPS = math.log(1e-15)
_TAYLOR_RADIUS = 1.0
_MAX_CONTOUR_NODES = 200
_CHUNK = 2048


@dataclass(frozen=True)
class MLOrder:
    """Order pair ``(alpha, rho)`` of a completely monotone Mittag-Leffler function."""

    alpha: float
    rho: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.rho < self.alpha:
            raise ParameterError(
                f"rho must be >= alpha for complete monotonicity, got rho={self.rho}, "
                f"alpha={self.alpha}"
            )


def _check_order(alpha: float, rho: float) -> None:
    if not (math.isfinite(alpha) and alpha > 0.0):
        raise ParameterError(f"alpha must be a positive finite number, got {alpha}")
    if not (math.isfinite(rho) and rho > 0.0):
        raise ParameterError(f"rho must be a positive finite number, got {rho}")


def asymptotic_radius(alpha: float) -> float:
    """Smallest ``|z|`` at which the asymptotic expansion is used (``alpha <= 1``).

    The optimally truncated expansion has remainder of order
    ``exp(-|z|**(1/alpha))``; the radius makes that ~1e-18.
    """
    return max(41.5**alpha, 2.0 * _TAYLOR_RADIUS)


# {{{ Taylor series


@lru_cache(maxsize=256)
def _taylor_coefficients(alpha: float, rho: float) -> np.ndarray:
    coeffs = []
    j = 0
    while True:
        arg = alpha * j + rho
        c = float(special.rgamma(arg))
        coeffs.append(c)
        if j > 4 and arg > 3.0 and abs(c) < 1e-18:
            break
        j += 1
    return np.array(coeffs)


def _ml_taylor(z: np.ndarray, alpha: float, rho: float) -> np.ndarray:
    coeffs = _taylor_coefficients(alpha, rho)
    result = np.full(z.shape, coeffs[-1], dtype=complex)
    for c in coeffs[-2::-1]:
        result = result * z + c
    return result


# }}}


# {{{ asymptotic expansion


def _ml_asymptotic(z: np.ndarray, alpha: float, rho: float) -> np.ndarray:
    """Optimally truncated asymptotic expansion for ``alpha < 1``."""
    absz = np.abs(z)
    arg = np.angle(z)
    out = np.zeros(z.shape, dtype=complex)

    has_pole = np.abs(arg) <= alpha * math.pi * (1.0 + 1e-14)
    if np.any(has_pole):
        s = absz[has_pole] ** (1.0 / alpha) * np.exp(1j * arg[has_pole] / alpha)
        out[has_pole] = s ** (1.0 - rho) * np.exp(s) / alpha

    # Optimal truncation: stop each element at the smallest term of the
    # envelope Gamma(alpha*k - rho + 1) / |z|**k.
    # Terms far below the leading one (>= |z|**-2 in size) are dropped early.
    # The truncation index depends on |z| only; it is found once per value of
    # log|z| rounded down to 1e-3 (a slightly smaller |z| is conservative).
    bins, where = np.unique(np.floor(np.log(absz).ravel() * 1e3), return_inverse=True)
    logz = bins * 1e-3
    threshold = math.log(1e-20) - 2.0 * logz
    best = np.full(logz.shape, np.inf)
    k_stop = np.ones(logz.shape, dtype=np.int64)
    active = np.arange(logz.size)
    for k in range(1, 400):
        log_env = special.gammaln(alpha * k - rho + 1.0) - k * logz[active]
        small = log_env < threshold[active]
        k_stop[active[small]] = k
        improve = ~small & (log_env < best[active])
        best[active[improve]] = log_env[improve]
        k_stop[active[improve]] = k
        keep = ~small
        # past the poles of Gamma the envelope is convex: once it rises the minimum is fixed
        if alpha * k - rho + 1.0 > 2.0:
            keep &= ~(log_env > best[active])
        active = active[keep]
        if active.size == 0:
            break

    k_stop = k_stop[where.ravel()]

    # Sum in order of decreasing truncation index so the live terms form a prefix.
    order = np.argsort(-k_stop, kind="stable")
    n_live = np.searchsorted(-k_stop[order], -np.arange(1, int(k_stop.max()) + 1), side="right")
    inv = 1.0 / z.ravel()[order]
    power = np.ones(inv.shape, dtype=complex)
    partial = np.zeros(inv.shape, dtype=complex)
    for k, m in enumerate(n_live, start=1):
        power[:m] *= inv[:m]
        g = float(special.rgamma(rho - alpha * k))
        if g != 0.0:
            partial[:m] -= g * power[:m]
    tail = np.empty(inv.shape, dtype=complex)
    tail[order] = partial
    tail = tail.reshape(z.shape)
    return out + tail


def _ml_alpha_one(z: np.ndarray, n: int) -> np.ndarray:
    """``E_{1,n}(z) = z**(1-n) * (exp(z) - sum_{j<n-1} z**j / j!)`` for integer ``n >= 1``."""
    partial = np.zeros(z.shape, dtype=complex)
    term = np.ones(z.shape, dtype=complex)
    for j in range(n - 1):
        partial += term
        term = term * z / (j + 1)
    return z ** (1 - n) * (np.exp(z) - partial)


# }}}


# {{{ optimal parabolic contour


def _params_bounded_region(
    phi_j: float, phi_j1: float, pj: float, qj: float, log_eps: float
) -> tuple[float, float, float]:
    fac = 1.01
    f_max = math.exp(log_eps - _LOG_MACHINE_EPS)
    sq_phi_j = math.sqrt(phi_j)
    threshold = 2.0 * math.sqrt(log_eps - _LOG_MACHINE_EPS)
    sq_phi_j1 = min(math.sqrt(phi_j1), threshold - sq_phi_j)

    f_bar = 1.0
    admissible = False
    if pj < 1e-14 and qj < 1e-14:
        sq_bar_j, sq_bar_j1 = sq_phi_j, sq_phi_j1
        admissible = True
    elif pj < 1e-14:
        sq_bar_j = sq_phi_j
        f_min = fac * (sq_phi_j / (sq_phi_j1 - sq_phi_j)) ** qj if sq_phi_j > 0 else fac
        if f_min < f_max:
            f_bar = f_min + f_min / f_max * (f_max - f_min)
            fq = f_bar ** (-1.0 / qj)
            sq_bar_j1 = (2.0 * sq_phi_j1 - fq * sq_phi_j) / (2.0 + fq)
            admissible = True
    elif qj < 1e-14:
        sq_bar_j1 = sq_phi_j1
        f_min = fac * (sq_phi_j1 / (sq_phi_j1 - sq_phi_j)) ** pj
        if f_min < f_max:
            f_bar = f_min + f_min / f_max * (f_max - f_min)
            fp = f_bar ** (-1.0 / pj)
            sq_bar_j = (2.0 * sq_phi_j + fp * sq_phi_j1) / (2.0 - fp)
            admissible = True
    else:
        f_min = fac * (sq_phi_j + sq_phi_j1) / (sq_phi_j1 - sq_phi_j) ** max(pj, qj)
        if f_min < f_max:
            f_min = max(f_min, 1.5)
            f_bar = f_min + f_min / f_max * (f_max - f_min)
            fp = f_bar ** (-1.0 / pj)
            fq = f_bar ** (-1.0 / qj)
            w = -phi_j1 / log_eps
            den = 2.0 + w - (1.0 + w) * fp + fq
            sq_bar_j = ((2.0 + w + fq) * sq_phi_j + fp * sq_phi_j1) / den
            sq_bar_j1 = (-(1.0 + w) * fq * sq_phi_j + (2.0 + w - (1.0 + w) * fp) * sq_phi_j1) / den
            admissible = True

    if not admissible:
        return 0.0, 0.0, math.inf
    log_eps = log_eps - math.log(f_bar)
    w = -(sq_bar_j1**2) / log_eps
    mu = (((1.0 + w) * sq_bar_j + sq_bar_j1) / (2.0 + w)) ** 2
    h = -2.0 * math.pi / log_eps * (sq_bar_j1 - sq_bar_j) / ((1.0 + w) * sq_bar_j + sq_bar_j1)
    n = math.ceil(math.sqrt(1.0 - log_eps / mu) / h)
    return mu, h, n


def _params_unbounded_region(phi_j: float, pj: float, log_eps: float) -> tuple[float, float, float]:
    sq_phi_j = math.sqrt(phi_j)
    phibar_j = phi_j * 1.01 if phi_j > 0 else 0.01
    sq_phibar_j = math.sqrt(phibar_j)
    f_min, f_max, f_tar = 1.0, 10.0, 5.0

    for _ in range(100):
        log_eps_phi = log_eps / phibar_j
        n = math.ceil(phibar_j / math.pi * (1.0 - 1.5 * log_eps_phi + math.sqrt(1.0 - 2.0 * log_eps_phi)))
        a = math.pi * n / phibar_j
        sq_mu = sq_phibar_j * abs(4.0 - a) / abs(7.0 - math.sqrt(1.0 + 12.0 * a))
        f_bar = ((sq_phibar_j - sq_phi_j) / sq_mu) ** (-pj)
        if pj < 1e-14 or f_min < f_bar < f_max:
            break
        sq_phibar_j = f_tar ** (-1.0 / pj) * sq_mu + sq_phi_j
        phibar_j = sq_phibar_j**2

    mu = sq_mu**2
    h = (-3.0 * a - 2.0 + 2.0 * math.sqrt(1.0 + 12.0 * a)) / (4.0 - a) / n

    threshold = log_eps - _LOG_MACHINE_EPS
    if mu > threshold:
        q = 0.0 if abs(pj) < 1e-14 else f_tar ** (-1.0 / pj) * math.sqrt(mu)
        phibar_j = (q + math.sqrt(phi_j)) ** 2
        if phibar_j < threshold:
            w = math.sqrt(_LOG_MACHINE_EPS / (_LOG_MACHINE_EPS - log_eps))
            u = math.sqrt(-phibar_j / _LOG_MACHINE_EPS)
            mu = threshold
            n = math.ceil(w * log_eps / 2.0 / math.pi / (u * w - 1.0))
            h = math.sqrt(_LOG_MACHINE_EPS / (_LOG_MACHINE_EPS - log_eps)) / n
        else:
            n, h = math.inf, 0.0
    return mu, h, n


def _contour_plan(z: complex, alpha: float, rho: float) -> tuple[float, float, int, np.ndarray, float]:
    """Choose contour parameters for one argument; returns ``(mu, h, N, residue_poles, log_eps)``."""
    theta = cmath.phase(z)
    kmin = math.ceil(-alpha / 2.0 - theta / (2.0 * math.pi))
    kmax = math.floor(alpha / 2.0 - theta / (2.0 * math.pi))
    ks = np.arange(kmin, kmax + 1)
    poles = abs(z) ** (1.0 / alpha) * np.exp(1j * (theta + 2.0 * math.pi * ks) / alpha)
    phi = (poles.real + np.abs(poles)) / 2.0
    order = np.argsort(phi, kind="stable")
    poles, phi = poles[order], phi[order]
    keep = phi > 1e-15
    poles = np.concatenate([[0.0 + 0.0j], poles[keep]])
    phi = np.concatenate([[0.0], phi[keep], [math.inf]])
    j1 = poles.size
    p = [max(0.0, -2.0 * (alpha - rho + 1.0))] + [1.0] * (j1 - 1)
    q = [1.0] * (j1 - 1) + [math.inf]

    log_eps = _LOG_TARGET_EPS
    while True:
        regions = [
            j for j in range(j1)
            if phi[j] < log_eps - _LOG_MACHINE_EPS and phi[j] < phi[j + 1]
        ]
        best = (math.inf, 0.0, 0.0, 0)
        for j in regions:
            if j < j1 - 1:
                mu, h, n = _params_bounded_region(phi[j], phi[j + 1], p[j], q[j], log_eps)
            else:
                mu, h, n = _params_unbounded_region(phi[j], p[j], log_eps)
            if n < best[0]:
                best = (n, mu, h, j)
        if best[0] <= _MAX_CONTOUR_NODES:
            break
        log_eps += math.log(10.0)
        if log_eps > -2.0:
            raise MLAccuracyError(
                f"no admissible contour for E_{{{alpha},{rho}}}({z})", achieved=math.exp(log_eps)
            )
    n, mu, h, j = best
    return mu, h, int(n), poles[j + 1:], log_eps


def _contour_sum(z: np.ndarray, alpha: float, rho: float, mu: float, h: float, n: int) -> np.ndarray:
    u = h * np.arange(-n, n + 1)
    s = mu * (1j * u + 1.0) ** 2
    ds = -2.0 * mu * u + 2.0j * mu
    weight = np.exp(s) * s ** (alpha - rho) * ds
    sa = s**alpha
    out = np.empty(z.shape, dtype=complex)
    for start in range(0, z.size, _CHUNK):
        zz = z[start:start + _CHUNK]
        out[start:start + _CHUNK] = (weight / (sa[None, :] - zz[:, None])).sum(axis=1)
    return out * h / (2.0j * math.pi)


@lru_cache(maxsize=256)
def _pole_free_plan(alpha: float, rho: float) -> tuple[float, float, int]:
    p = max(0.0, -2.0 * (alpha - rho + 1.0))
    mu, h, n = _params_unbounded_region(0.0, p, _LOG_TARGET_EPS)
    return mu, h, int(n)


def _ml_contour(z: np.ndarray, alpha: float, rho: float) -> np.ndarray:
    if rho > alpha + 1.0 + 1e-12:
        # E_{a,r}(z) = (E_{a,r-a}(z) - 1/Gamma(r-a)) / z keeps the Laplace
        # transform regular at the origin; only used for |z| > 1.
        lower = _ml_contour(z, alpha, rho - alpha)
        return (lower - float(special.rgamma(rho - alpha))) / z
    out = np.empty(z.shape, dtype=complex)
    if alpha < 1.0:
        pole_free = np.abs(np.angle(z)) > alpha * math.pi * (1.0 + 1e-12)
    else:
        pole_free = np.zeros(z.shape, dtype=bool)
    if np.any(pole_free):
        mu, h, n = _pole_free_plan(alpha, rho)
        out[pole_free] = _contour_sum(z[pole_free], alpha, rho, mu, h, n)
    for i in np.flatnonzero(~pole_free):
        zi = complex(z[i])
        mu, h, n, poles, log_eps = _contour_plan(zi, alpha, rho)
        if log_eps > _LOG_TARGET_EPS + 1e-9:
            raise MLAccuracyError(
                f"E_{{{alpha},{rho}}}({zi}) only reachable to ~{math.exp(log_eps):.1e}",
                achieved=math.exp(log_eps),
            )
        value = _contour_sum(np.array([zi]), alpha, rho, mu, h, n)[0]
        if poles.size:
            value += np.sum(poles ** (1.0 - rho) * np.exp(poles)) / alpha
        out[i] = value
    return out


# }}}


def ml_eval(alpha: float, rho: float, z):
    """Evaluate the generalized Mittag-Leffler function ``E_{alpha,rho}(z)``.

    Accepts ``0 < alpha <= 2`` and ``rho > 0``; ``z`` may be a scalar or an
    array and is treated as complex. Returns a complex scalar or array.
    """
    _check_order(alpha, rho)
    if alpha > 2.0:
        raise ParameterError(f"alpha must be <= 2, got {alpha}")
    z_arr = np.asarray(z, dtype=complex)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr).ravel()
    if not np.all(np.isfinite(z_arr)):
        raise ParameterError("Mittag-Leffler argument must be finite")

    out = np.empty(z_arr.shape, dtype=complex)
    absz = np.abs(z_arr)
    near = absz <= _TAYLOR_RADIUS
    if np.any(near):
        out[near] = _ml_taylor(z_arr[near], alpha, rho)
    far = ~near
    if np.any(far):
        zf = z_arr[far]
        if alpha == 1.0 and float(rho).is_integer():
            out[far] = _ml_alpha_one(zf, int(rho))
        elif alpha < 1.0:
            asym = np.abs(zf) >= asymptotic_radius(alpha)
            vals = np.empty(zf.shape, dtype=complex)
            if np.any(asym):
                vals[asym] = _ml_asymptotic(zf[asym], alpha, rho)
            if np.any(~asym):
                vals[~asym] = _ml_contour(zf[~asym], alpha, rho)
            out[far] = vals
        else:
            out[far] = _ml_contour(zf, alpha, rho)

    out = out.reshape(np.shape(z))
    return complex(out) if scalar else out


def _check_alpha_unit(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")


def _as_float_output(values: np.ndarray, scalar: bool):
    return float(values) if scalar else values


def ml_survival(alpha: float, t):
    """Survival probability ``E_{alpha,1}(-t**alpha)`` of the branching clock."""
    _check_alpha_unit(alpha)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or not np.all(np.isfinite(t_arr)):
        raise ParameterError("survival time must be finite and >= 0")
    values = np.real(ml_eval(alpha, 1.0, -(t_arr**alpha)))
    return _as_float_output(np.clip(values, 0.0, 1.0), t_arr.ndim == 0)


def branch_cdf(alpha: float, t):
    """Branching probability ``1 - E_{alpha,1}(-t**alpha)``, computed without cancellation."""
    _check_alpha_unit(alpha)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or not np.all(np.isfinite(t_arr)):
        raise ParameterError("branching time must be finite and >= 0")
    x = t_arr**alpha
    values = x * np.real(ml_eval(alpha, alpha + 1.0, -x))
    return _as_float_output(np.clip(values, 0.0, 1.0), t_arr.ndim == 0)


def branch_density(alpha: float, tau):
    """Branching-time density ``tau**(alpha-1) * E_{alpha,alpha}(-tau**alpha)``.

    The density is integrably singular at ``tau = 0`` for ``alpha < 1`` and is
    never evaluated there.
    """
    _check_alpha_unit(alpha)
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr <= 0) or not np.all(np.isfinite(tau_arr)):
        raise ParameterError("branching delay must be finite and > 0")
    x = tau_arr**alpha
    values = tau_arr ** (alpha - 1.0) * np.real(ml_eval(alpha, alpha, -x))
    return _as_float_output(np.maximum(values, 0.0), tau_arr.ndim == 0)


# {{{ spectral density


@dataclass(frozen=True)
class SpectralTable:
    """Nonnegative density ``K`` with ``E_{alpha,rho}(-x) = int exp(-r x) K(r) dr``.

    ``r_grid`` holds Gauss-Legendre nodes on the panels ``panel_edges`` and
    ``weights`` the matching quadrature weights. For ``alpha == 1`` the
    measure is the unit atom at ``r = 1`` and ``atom`` is ``(1.0, 1.0)``.
    """

    alpha: float
    rho: float
    r_grid: np.ndarray
    k_values: np.ndarray
    weights: np.ndarray
    panel_edges: np.ndarray
    total_mass: float
    max_residual: float
    atom: tuple[float, float] | None = None
    coefficients: np.ndarray | None = None

    @property
    def r_max(self) -> float:
        return float(self.panel_edges[-1])

    def laplace(self, x) -> np.ndarray:
        """Forward transform ``int exp(-r x) K(r) dr``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.atom is not None:
            loc, mass = self.atom
            return mass * np.exp(-loc * x)
        return np.exp(-np.outer(x, self.r_grid)) @ (self.weights * self.k_values)

    def density(self, r) -> np.ndarray:
        """Evaluate the interpolated density; zero outside ``[0, r_max]``."""
        if self.atom is not None:
            raise ValueError("the alpha = 1 spectral measure is an atom and has no density")
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros(r.shape)
        inside = (r >= 0.0) & (r <= self.r_max)
        ri = r[inside]
        edges = self.panel_edges
        idx = np.clip(np.searchsorted(edges, ri, side="right") - 1, 0, edges.size - 2)
        a, b = edges[idx], edges[idx + 1]
        xi = 2.0 * (ri - a) / (b - a) - 1.0
        basis = legendre.legvander(xi, self.coefficients.shape[1] - 1)
        out[inside] = np.einsum("ij,ij->i", basis, self.coefficients[idx])
        return np.maximum(out, 0.0)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            fh.write(f"# alpha = {self.alpha!r}\n# rho = {self.rho!r}\n")
            fh.write(f"# total_mass = {self.total_mass!r}\n# max_residual = {self.max_residual!r}\n")
            writer = csv.writer(fh)
            writer.writerow(["r", "K"])
            for r, k in zip(self.r_grid, self.k_values):
                writer.writerow([repr(float(r)), repr(float(k))])


def _log_abs_rgamma(x: float) -> float:
    if x > 0:
        return -math.lgamma(x)
    s = abs(math.sin(math.pi * x))
    if s == 0.0:
        return -math.inf
    return math.lgamma(1.0 - x) + math.log(s) - math.log(math.pi)


def _spectral_r_max(alpha: float, rho: float) -> float:
    decay = (1.0 - alpha) * alpha ** (alpha / (1.0 - alpha))
    base = (50.0 / decay) ** (1.0 - alpha)
    return 1.3 * base + 0.5 * abs(rho - 1.0) + 0.5


def _wright_series(alpha: float, rho: float, r: np.ndarray, r_max: float) -> np.ndarray:
    """``K(r) = sum_n (-r)**n / (n! Gamma(rho - alpha (n + 1)))`` in extended precision."""
    log_r = math.log(max(r_max, 1e-300))
    logs = []
    n = 0
    while True:
        lt = _log_abs_rgamma(rho - alpha * (n + 1)) - math.lgamma(n + 1) + n * log_r
        logs.append(lt)
        if n > 20 and lt < -80.0 and lt < logs[-2]:
            break
        n += 1
    peak = max(v for v in logs if math.isfinite(v))
    dps = int(max(peak, 0.0) / math.log(10.0)) + 30
    with mpmath.workdps(dps):
        coeffs = [
            mpmath.rgamma(mpmath.mpf(rho) - mpmath.mpf(alpha) * (k + 1)) / mpmath.factorial(k)
            for k in range(len(logs))
        ]
        values = np.empty(r.shape)
        for i, ri in enumerate(r):
            x = -mpmath.mpf(float(ri))
            acc = mpmath.mpf(0)
            for c in reversed(coeffs):
                acc = acc * x + c
            values[i] = float(acc)
    return values


def _kanter_density(alpha: float, r: np.ndarray) -> np.ndarray:
    """``K_{alpha,1}(r)`` from Kanter's integral for the one-sided stable law.

    With ``A(p) = sin(a p)**(a/(1-a)) sin((1-a) p) / sin(p)**(1/(1-a))``,
    ``K(r) = r**(a/(1-a)) / ((1-a) pi) * int_0^pi A exp(-r**(1/(1-a)) A) dp``.
    The integrand is positive, so there is no cancellation; it is used away
    from ``r = 0`` where the integrand develops a boundary layer.
    """
    c = r ** (1.0 / (1.0 - alpha))

    def integrand(phi):
        log_a = (
            alpha / (1.0 - alpha) * np.log(np.sin(alpha * phi))
            + np.log(np.sin((1.0 - alpha) * phi))
            - np.log(np.sin(phi)) / (1.0 - alpha)
        )
        return np.exp(log_a - c * np.exp(np.minimum(log_a, 700.0)))

    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        value, _ = integrate.quad_vec(integrand, 0.0, math.pi, epsrel=1e-13, epsabs=1e-250, norm="max")
    return r ** (alpha / (1.0 - alpha)) / ((1.0 - alpha) * math.pi) * value


def _spectral_values(alpha: float, rho: float, r: np.ndarray, r_max: float) -> np.ndarray:
    if rho not in (1.0, alpha):
        return _wright_series(alpha, rho, r, r_max)
    values = np.empty(r.shape)
    near = r <= 1.0
    if np.any(near):
        values[near] = _wright_series(alpha, 1.0, r[near], 1.0)
    # Panels are batched a few at a time so the adaptive rule's relative
    # tolerance applies to values of similar size.
    far = np.flatnonzero(~near)
    for chunk in np.array_split(far, max(1, far.size // 64)):
        if chunk.size:
            values[chunk] = _kanter_density(alpha, r[chunk])
    if rho == alpha:
        # E_{a,a}(z) = a d/dz E_{a,1}(z), hence K_{a,a}(r) = a r K_{a,1}(r).
        values = alpha * r * values
    return values


@lru_cache(maxsize=64)
def ml_spectral_density(
    alpha: float,
    rho: float,
    r_max: float | None = None,
    n_points: int = 16,
    tol: float = 1e-8,
) -> SpectralTable:
    """Tabulate the spectral density of ``x -> E_{alpha,rho}(-x)``.

    ``n_points`` is the number of Gauss-Legendre nodes per panel. The table
    is accepted only if its forward transform matches :func:`ml_eval` to
    relative error ``tol`` on ``x`` in ``[0, 100]``.
    """
    order = MLOrder(alpha, rho)
    alpha, rho = order.alpha, order.rho
    if alpha == 1.0:
        if rho != 1.0:
            raise ParameterError("for alpha = 1 only rho = 1 has a spectral representation")
        one = np.ones(1)
        return SpectralTable(
            alpha=1.0, rho=1.0, r_grid=one, k_values=one, weights=one,
            panel_edges=np.array([1.0, 1.0]), total_mass=1.0, max_residual=0.0,
            atom=(1.0, 1.0),
        )

    if r_max is None:
        r_max = _spectral_r_max(alpha, rho)
    width = min(0.5, max(0.05, r_max / 40.0))
    small = [0.0, 0.005, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32]
    small = [e for e in small if e < r_max]
    edges = np.unique(np.concatenate([small, np.arange(small[-1], r_max, width)[1:], [r_max]]))

    nodes, gw = legendre.leggauss(n_points)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    r_grid = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    weights = (half[:, None] * gw[None, :]).ravel()

    k_values = _spectral_values(alpha, rho, r_grid, r_max)
    if k_values.min() < -1e-12:
        raise SpectralTableError(
            f"spectral density of E_{{{alpha},{rho}}} has negative values "
            f"(min {k_values.min():.3e})",
            max_residual=float(-k_values.min()),
        )
    k_values = np.maximum(k_values, 0.0)

    vinv = np.linalg.inv(legendre.legvander(nodes, n_points - 1))
    coefficients = k_values.reshape(-1, n_points) @ vinv.T

    x = np.concatenate([[0.0], np.geomspace(1e-3, 100.0, 160)])
    forward = np.exp(-np.outer(x, r_grid)) @ (weights * k_values)
    reference = np.real(ml_eval(alpha, rho, -x))
    residual = float(np.max(np.abs(forward - reference) / np.abs(reference)))
    if residual > tol:
        raise SpectralTableError(
            f"spectral table for E_{{{alpha},{rho}}} misses its forward transform by {residual:.3e}",
            max_residual=residual,
        )
    return SpectralTable(
        alpha=alpha,
        rho=rho,
        r_grid=r_grid,
        k_values=k_values,
        weights=weights,
        panel_edges=edges,
        total_mass=float(np.sum(weights * k_values)),
        max_residual=residual,
        coefficients=coefficients,
    )


# }}}
