"""Random variates for the branching construction.

* branching clocks with ``P(T > t) = E_{alpha,1}(-t**alpha)``, by a tabulated
  inverse CDF;
* Feller stable variates with characteristic function ``exp(-lam psi(k))``,
  by the Chambers-Mallows-Stuck transformation;
* kernel displacements, by subordination: a spectral rate ``r`` drawn from
  ``exp(-r t**alpha) K_{alpha,rho}(r)``, then a stable variate with
  intensity ``r t**alpha / 2``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import interpolate, special

from .exceptions import ParameterError
from .kernels import FracParams, KernelId
from .mittag_leffler import branch_cdf, ml_spectral_density, ml_survival

__all__ = [
    "BranchOutcome",
    "ClockTable",
    "RngStream",
    "TiltedSampler",
    "clock_table",
    "sample_branch_time",
    "sample_branch_times",
    "sample_kernel_displacement",
    "sample_kernel_displacements",
    "sample_stable_feller",
    "tilted_sampler",
]


@dataclass(frozen=True)
class RngStream:
    """Substream ``stream_index`` of the master seed ``master_seed``.

    The generator is a pure function of the pair: a PCG64 seeded from
    ``SeedSequence(master_seed, spawn_key=(stream_index,))``.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self) -> None:
        for name in ("master_seed", "stream_index"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) < 2**64:
                raise ParameterError(f"{name} must be an integer in [0, 2**64), got {value!r}")
            object.__setattr__(self, name, int(value))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.PCG64(seq))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise ParameterError(f"expected an RngStream or numpy Generator, got {type(rng).__name__}")


@dataclass(frozen=True)
class BranchOutcome:
    """Either the particle survives to the horizon or it branches after ``tau``."""

    survived: bool
    tau: float | None = None

    @classmethod
    def survive(cls) -> BranchOutcome:
        return cls(True, None)

    @classmethod
    def branch_at(cls, tau: float) -> BranchOutcome:
        return cls(False, float(tau))


# {{{ branching clock


class ClockTable:
    """Inverse CDF of the branching delay for one ``alpha < 1``.

    The map ``logit F -> log tau`` is smooth and almost linear in both tails,
    so a cubic spline on a few thousand nodes reproduces it to ~1e-12 in
    probability. Beyond the table the leading small- and large-``tau``
    asymptotics ``F ~ tau**a / Gamma(1+a)`` and ``1 - F ~ tau**-a / Gamma(1-a)``
    are inverted directly.
    """

    def __init__(self, alpha: float, n_nodes: int = 4000, edge_prob: float = 1e-13):
        self.alpha = alpha
        a = alpha
        lo = math.log(edge_prob * special.gamma(1.0 + a)) / a
        hi = -math.log(edge_prob * special.gamma(1.0 - a)) / a
        self.log_tau = np.linspace(lo, hi, n_nodes)
        tau = np.exp(self.log_tau)
        cdf = branch_cdf(a, tau)
        surv = np.asarray(1.0 - cdf)
        # 1 - F loses accuracy near F = 1; use the survival function there.
        upper = cdf > 0.5
        surv[upper] = ml_survival(a, tau[upper])
        self.logit = np.log(cdf) - np.log(surv)
        self._spline = interpolate.CubicSpline(self.logit, self.log_tau)
        self.q_lo, self.q_hi = float(self.logit[0]), float(self.logit[-1])
        self.max_error = self._validate()

    def _validate(self) -> float:
        mid = 0.5 * (self.log_tau[1:] + self.log_tau[:-1])
        cdf = branch_cdf(self.alpha, np.exp(mid))
        q = np.log(cdf) - np.log1p(-cdf)
        back = branch_cdf(self.alpha, np.exp(self._spline(q)))
        return float(np.max(np.abs(back - cdf)))

    def quantile(self, u: np.ndarray) -> np.ndarray:
        """Delays with ``F(tau) = u`` for ``u`` in ``(0, 1)``."""
        a = self.alpha
        u = np.asarray(u, dtype=float)
        q = np.log(u) - np.log1p(-u)
        out = np.exp(self._spline(np.clip(q, self.q_lo, self.q_hi)))
        low = q < self.q_lo
        out[low] = (u[low] * special.gamma(1.0 + a)) ** (1.0 / a)
        high = q > self.q_hi
        out[high] = ((1.0 - u[high]) * special.gamma(1.0 - a)) ** (-1.0 / a)
        return out


@lru_cache(maxsize=32)
def clock_table(alpha: float) -> ClockTable:
    return ClockTable(alpha)


def _check_clock(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")


def sample_branch_times(alpha: float, rng, size) -> np.ndarray:
    """Unconditioned branching delays ``T`` with ``P(T > t) = E_{alpha,1}(-t**alpha)``."""
    _check_clock(alpha)
    gen = _as_generator(rng)
    if alpha == 1.0:
        return gen.standard_exponential(size)
    u = gen.random(size)
    # u = 0 has probability 2**-53; map it to the smallest positive double
    u = np.where(u > 0.0, u, np.finfo(float).tiny)
    return clock_table(alpha).quantile(u)


def sample_branch_time(alpha: float, horizon: float, rng) -> BranchOutcome:
    """Survive to ``horizon`` or branch at a delay in ``(0, horizon)``."""
    _check_clock(alpha)
    if not (math.isfinite(horizon) and horizon > 0.0):
        raise ParameterError(f"horizon must be finite and > 0, got {horizon}")
    tau = float(sample_branch_times(alpha, rng, 1)[0])
    if tau >= horizon:
        return BranchOutcome.survive()
    return BranchOutcome.branch_at(tau)


# }}}


# {{{ stable variates


def sample_stable_feller(beta: float, theta: float, lam, rng, size=None):
    """Draws with characteristic function ``exp(-lam |k|**beta exp(i sign(k) theta pi/2))``.

    ``lam`` may be an array broadcast against ``size``. For ``beta != 1`` the
    Feller pair equals the S1 pair with scale ``cos(theta pi/2)**(1/beta)``
    and skewness ``-tan(theta pi/2) / tan(beta pi/2)``; substituting into
    the Chambers-Mallows-Stuck formula gives

        X = sin(beta V - theta pi/2) / cos(V)**(1/beta)
            * (cos((1 - beta) V + theta pi/2) / W)**((1 - beta)/beta)

    with ``V ~ U(-pi/2, pi/2)`` and ``W ~ Exp(1)``. For ``beta == 1`` the law
    is Cauchy with scale ``cos(theta pi/2)`` shifted by ``-sin(theta pi/2)``.
    """
    FracParams(1.0, beta, theta)
    gen = _as_generator(rng)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0.0) or not np.all(np.isfinite(lam)):
        raise ParameterError("stable intensity must be finite and >= 0")
    if size is None:
        size = lam.shape
    if beta == 2.0:
        return np.sqrt(2.0 * lam) * gen.standard_normal(size)
    half_pi = 0.5 * math.pi
    v = gen.uniform(-half_pi, half_pi, size)
    if beta == 1.0:
        c = theta * half_pi
        return lam * (math.cos(c) * np.tan(v) - math.sin(c))
    w = gen.standard_exponential(size)
    c = theta * half_pi
    x = (
        np.sin(beta * v - c) / np.cos(v) ** (1.0 / beta)
        * (np.cos((1.0 - beta) * v + c) / w) ** ((1.0 - beta) / beta)
    )
    return lam ** (1.0 / beta) * x


# }}}


# {{{ subordinated kernel displacements


class TiltedSampler:
    """Spectral rates ``r`` with density proportional to ``exp(-r s) K_{alpha,rho}(r)``.

    Proposal tables are kept for quantized ``s_q <= s`` on a geometric grid;
    a proposal is accepted with probability ``exp(-r (s - s_q))``, so the
    quantization introduces no error. Each table is the piecewise-linear
    interpolant of the tilted density on a uniform grid and is inverted
    exactly (one quadratic per draw).
    """

    def __init__(self, alpha: float, rho: float, n_cells: int = 4096, ratio: float = 1.02, s_min: float = 1e-6):
        self.alpha, self.rho = alpha, rho
        self.spectral = ml_spectral_density(alpha, rho)
        self.r = np.linspace(0.0, self.spectral.r_max, n_cells + 1)
        self.k = self.spectral.density(self.r)
        self.log_ratio = math.log(ratio)
        self.s_min = s_min
        self._tables: dict[int, tuple[float, np.ndarray, np.ndarray]] = {}
        self._lock = threading.Lock()

    def _level(self, s: np.ndarray) -> np.ndarray:
        lev = np.floor(np.log(np.maximum(s, self.s_min) / self.s_min) / self.log_ratio).astype(np.int64)
        return np.where(s < self.s_min, -1, lev)

    def _table(self, level: int):
        table = self._tables.get(level)
        if table is None:
            s_q = 0.0 if level < 0 else self.s_min * math.exp(level * self.log_ratio)
            dens = self.k * np.exp(-self.r * s_q)
            h = self.r[1] - self.r[0]
            cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (dens[1:] + dens[:-1]))])
            table = (s_q, dens, cum)
            with self._lock:
                self._tables.setdefault(level, table)
        return table

    def _invert(self, level: int, u: np.ndarray) -> np.ndarray:
        _, dens, cum = self._table(level)
        target = u * cum[-1]
        idx = np.clip(np.searchsorted(cum, target, side="right") - 1, 0, dens.size - 2)
        h = self.r[1] - self.r[0]
        f0, f1 = dens[idx], dens[idx + 1]
        delta = target - cum[idx]
        slope = (f1 - f0) / h
        disc = np.maximum(f0 * f0 + 2.0 * slope * delta, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(f0 + np.sqrt(disc) > 0.0, 2.0 * delta / (f0 + np.sqrt(disc)), 0.0)
        return self.r[idx] + np.clip(step, 0.0, h)

    def sample(self, s, gen: np.random.Generator) -> np.ndarray:
        """One rate per entry of ``s`` (tilts may differ between entries)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty(s.shape)
        levels = self._level(s)
        pending = np.arange(s.size)
        while pending.size:
            lev = levels[pending]
            u = gen.random(pending.size)
            acc_u = gen.random(pending.size)
            r = np.empty(pending.size)
            for level in np.unique(lev):
                sel = lev == level
                r[sel] = self._invert(int(level), u[sel])
            s_q = np.where(lev < 0, 0.0, self.s_min * np.exp(lev * self.log_ratio))
            accept = acc_u < np.exp(-r * (s[pending] - s_q))
            out[pending[accept]] = r[accept]
            pending = pending[~accept]
        return out

    def normalizer(self, s: float) -> float:
        """``int exp(-r s) K(r) dr`` by Gauss-Legendre quadrature on the spectral table."""
        return float(self.spectral.laplace(s)[0])


@lru_cache(maxsize=32)
def tilted_sampler(alpha: float, rho: float) -> TiltedSampler:
    return TiltedSampler(alpha, rho)


def sample_kernel_displacements(params: FracParams, rho: float, durations, rng) -> np.ndarray:
    """One displacement from ``G_{alpha,rho}(t, .)`` for each duration ``t``.

    Durations equal to zero give the identity displacement (delta kernel).
    """
    gen = _as_generator(rng)
    t = np.atleast_1d(np.asarray(durations, dtype=float))
    if np.any(t < 0.0) or not np.all(np.isfinite(t)):
        raise ParameterError("durations must be finite and >= 0")
    if rho != 1.0 and rho != params.alpha:
        raise ParameterError(f"rho must be 1 or alpha={params.alpha}, got {rho}")
    s = t**params.alpha
    if params.alpha == 1.0:
        lam = 0.5 * s
    else:
        lam = 0.5 * s * tilted_sampler(params.alpha, float(rho)).sample(s, gen)
    return sample_stable_feller(params.beta, params.theta, lam, gen)


def sample_kernel_displacement(kid: KernelId, rng, size=None):
    """Displacements from the kernel ``kid`` (scalar when ``size`` is None)."""
    n = 1 if size is None else size
    out = sample_kernel_displacements(kid.params, kid.rho, np.full(n, kid.t), rng)
    return float(out[0]) if size is None else out


# }}}
