"""Deterministic reference solver: Picard iteration of the integral equation.

The mild form of the fractional KPP equation reads, in Fourier variables,

    u(t) = E_{a,1}(-lam t^a) u0 + int_0^t tau^(a-1) E_{a,a}(-lam tau^a) [u^2](t - tau) dtau

with ``lam(k) = 1 + psi(k) / 2``. Space is a periodic box ``[-L, L)`` handled
by real FFTs. In time the weight ``tau^(a-1) E_{a,a}(-lam tau^a)`` is integrated
exactly against the piecewise-linear interpolant of ``u^2`` (product
integration), separately for every Fourier mode, so the weakly singular
clock density and the delta-like short-time kernel need no special care.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy.interpolate import CubicSpline

from .branching import InitialCondition
from .exceptions import DomainTooSmallError, ParameterError, PicardDivergenceError
from .kernels import (
    FracParams,
    KernelId,
    _small_k_coefficient,
    _tail_masses,
    build_kernel_table,
    kernel_charfn,
    riesz_feller_symbol,
)
from .mittag_leffler import ml_eval

__all__ = ["GridSolution", "LEAK_TOL", "auto_halfwidth", "domain_leak", "residual_check", "solve_grid"]

LEAK_TOL = 1e-4
DIVERGENCE_CAP = 1e6


@dataclass
class GridSolution:
    """Values ``u(t_i, x_j)`` on a uniform space-time grid.

    ``values[0]`` is the initial datum, so ``t_grid`` has ``N_t + 1`` nodes.
    """

    params: FracParams
    t_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray
    iteration_count: int
    final_sup_change: float
    tol: float
    history: list = field(default_factory=list)
    leak: float = 0.0
    grid_error: np.ndarray | None = None
    u0_spec: dict = field(default_factory=dict)

    @property
    def grid_tolerance(self) -> float | None:
        """Grid tolerance at the horizon, where point values are compared."""
        return None if self.grid_error is None else float(self.grid_error[-1])

    def tolerance_at(self, t: float) -> float | None:
        """Grid tolerance at time ``t`` (largest of the two bracketing nodes)."""
        if self.grid_error is None:
            return None
        i = int(np.searchsorted(self.t_grid, t - 1e-12 * max(1.0, t)))
        return float(np.max(self.grid_error[max(i - 1, 0) : i + 1]))

    @property
    def halfwidth(self) -> float:
        return float(-self.x_grid[0])

    def _space_interp(self, x) -> np.ndarray:
        """Trigonometric interpolation of every time slice at the points ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        n = self.x_grid.size
        L = self.halfwidth
        coeff = np.fft.rfft(self.values, axis=1) / n
        weight = np.full(coeff.shape[1], 2.0)
        weight[0] = 1.0
        if n % 2 == 0:
            weight[-1] = 1.0
        k = 2.0 * math.pi * np.fft.rfftfreq(n, 2.0 * L / n)
        phase = np.exp(1j * np.outer(x + L, k))
        return ((coeff * weight) @ phase.T).real

    def at(self, t: float, x) -> np.ndarray:
        """``u(t, x)``; spectral in ``x`` and a cubic spline in ``t`` between nodes."""
        if not 0.0 <= t <= self.t_grid[-1] * (1 + 1e-12):
            raise ParameterError(f"t={t} outside the solved horizon [0, {self.t_grid[-1]}]")
        slices = self._space_interp(x)
        node = np.flatnonzero(np.isclose(self.t_grid, t, rtol=0.0, atol=1e-12 * max(1.0, t)))
        if node.size:
            return slices[node[0]]
        return CubicSpline(self.t_grid, slices, axis=0)(t)

    def metadata(self) -> dict:
        return {
            "params": {"alpha": self.params.alpha, "beta": self.params.beta, "theta": self.params.theta},
            "u0": self.u0_spec,
            "T": float(self.t_grid[-1]),
            "N_t": int(self.t_grid.size - 1),
            "N_x": int(self.x_grid.size),
            "halfwidth": self.halfwidth,
            "tol": self.tol,
            "iteration_count": self.iteration_count,
            "final_sup_change": self.final_sup_change,
            "history": self.history,
            "leak": self.leak,
            "grid_tolerance": self.grid_tolerance,
            "grid_error_by_t": None if self.grid_error is None else [float(v) for v in self.grid_error],
        }

    def to_json(self, extra: dict | None = None) -> str:
        meta = self.metadata()
        if extra:
            meta.update(extra)
        return json.dumps(meta, sort_keys=True)

    def to_csv(self, path, header: dict | None = None) -> None:
        meta = dict(self.metadata())
        if header:
            meta.update(header)
        with open(path, "w", newline="") as fh:
            for key in sorted(meta):
                fh.write(f"# {key} = {json.dumps(meta[key], sort_keys=True)}\n")
            writer = csv.writer(fh)
            writer.writerow(["t", "x", "u"])
            for i, t in enumerate(self.t_grid):
                for x, u in zip(self.x_grid, self.values[i]):
                    writer.writerow([repr(float(t)), repr(float(x)), repr(float(u))])


# {{{ discretization pieces


def _wavenumbers(n_x: int, halfwidth: float) -> np.ndarray:
    return 2.0 * math.pi * np.fft.rfftfreq(n_x, 2.0 * halfwidth / n_x)


def _lam(params: FracParams, k: np.ndarray) -> np.ndarray:
    # numpy's forward transform uses exp(-ikx), so the multiplier of a kernel
    # with characteristic function phi(k) is phi(-k)
    return 1.0 + 0.5 * riesz_feller_symbol(params.beta, params.theta, -k)


def _propagator(alpha: float, lam: np.ndarray, t_grid: np.ndarray) -> np.ndarray:
    """``E_{a,1}(-lam t^a)`` for every node (rows) and mode (columns)."""
    z = -np.outer(t_grid**alpha, lam)
    return np.asarray(ml_eval(alpha, 1.0, z), dtype=complex)


def _hat_weights(alpha: float, lam: np.ndarray, step: float, n_steps: int):
    """Exact integrals of the weight against the two hat halves on each cell.

    Returns ``(a, b)`` with ``a[j]`` multiplying the value at the right end of
    lag cell ``[t_j, t_{j+1}]`` in ``t - tau`` (i.e. ``tau = t_j``) and ``b[j]``
    the value at ``tau = t_{j+1}``.
    """
    nodes = step * np.arange(n_steps + 1)
    z = -np.outer(nodes**alpha, lam)
    e1 = np.asarray(ml_eval(alpha, alpha + 1.0, z), dtype=complex)
    e2 = np.asarray(ml_eval(alpha, alpha + 2.0, z), dtype=complex)
    p0 = (nodes**alpha)[:, None] * e1
    p1 = (nodes ** (alpha + 1.0))[:, None] * (e1 - e2)
    d0 = np.diff(p0, axis=0)
    d1 = np.diff(p1, axis=0)
    a = (nodes[1:, None] * d0 - d1) / step
    b = (d1 - nodes[:-1, None] * d0) / step
    return a, b


class _History:
    """History integrals ``sum_j a_j v[i-j] + b_j v[i-j-1]`` for all nodes ``i``.

    Both sums are causal convolutions along the time axis and are done by FFT.
    """

    def __init__(self, a: np.ndarray, b: np.ndarray):
        self.n_steps = a.shape[0]
        self.size = sfft.next_fast_len(2 * (self.n_steps + 1))
        # time runs along the last (contiguous) axis for the transforms
        self.a_hat = sfft.fft(np.ascontiguousarray(a.T), n=self.size, axis=-1)
        self.b_hat = sfft.fft(np.ascontiguousarray(b.T), n=self.size, axis=-1)

    def __call__(self, v_hat: np.ndarray, stride: int = 1) -> np.ndarray:
        n = self.n_steps
        v = np.ascontiguousarray(v_hat.T)
        conv_b = sfft.ifft(self.b_hat * sfft.fft(v, n=self.size, axis=-1), axis=-1, overwrite_x=True)
        v[:, 0] = 0.0
        conv_a = sfft.ifft(self.a_hat * sfft.fft(v, n=self.size, axis=-1), axis=-1, overwrite_x=True)
        out = np.zeros((n + 1, v_hat.shape[1]), dtype=complex)
        out[1:] = (conv_a[:, 1 : n + 1] + conv_b[:, :n]).T
        return out[::stride]


# }}}


def _tail_density(params: FracParams, T: float, halfwidth: float) -> float:
    """Largest kernel density at distance ``halfwidth`` over both kernels at horizon ``T``."""
    best = 0.0
    for rho in (1.0, params.alpha):
        kid = KernelId(params, rho, T)
        if params.beta == 2.0:
            table = build_kernel_table(kid, x_halfwidth=1.5 * halfwidth, n_points=2**14, check=False)
            dens = float(np.max(np.abs(table.density_at(np.array([-halfwidth, halfwidth])))))
        else:
            a_coef = _small_k_coefficient(lambda k: kernel_charfn(kid, k), params.beta, params.theta, kid.s)
            left, right = _tail_masses(a_coef, params.beta, params.theta, halfwidth)
            dens = params.beta * max(left, right) / halfwidth
        best = max(best, dens)
    return best


def domain_leak(params: FracParams, u0: InitialCondition, T: float, halfwidth: float, n_x: int) -> float:
    """Bound on the periodic-image error: ``||u0 - u0(edge)||_1`` times the kernel density at ``L``."""
    x = np.linspace(-halfwidth, halfwidth, n_x + 1)
    v = u0(x)
    edge = 0.5 * (v[0] + v[-1])
    l1 = float(np.sum(np.abs(v - edge)) * (2.0 * halfwidth / n_x))
    if l1 == 0.0:
        return 0.0
    return 2.0 * l1 * _tail_density(params, T, halfwidth)


def auto_halfwidth(params: FracParams, u0: InitialCondition, T: float, start: float = 64.0, limit: float = 2.0**16) -> float:
    """Smallest ``start * 2**m`` whose image leak is below ``LEAK_TOL / 10``."""
    L = start
    while L < limit and domain_leak(params, u0, T, L, max(64, 1 << math.ceil(math.log2(64.0 * L)))) > 0.1 * LEAK_TOL:
        L *= 2.0
    return L


def _validate(params, T, halfwidth, n_t, n_x, tol, max_iters):
    if not isinstance(params, FracParams):
        raise ParameterError("params must be a FracParams instance")
    if not (math.isfinite(T) and T > 0):
        raise ParameterError(f"T must be > 0, got {T}")
    if not (math.isfinite(halfwidth) and halfwidth > 0):
        raise ParameterError(f"domain halfwidth must be > 0, got {halfwidth}")
    if not (isinstance(n_x, (int, np.integer)) and n_x >= 8 and n_x & (n_x - 1) == 0):
        raise ParameterError(f"N_x must be a power of two >= 8, got {n_x}")
    if not (isinstance(n_t, (int, np.integer)) and n_t >= 1):
        raise ParameterError(f"N_t must be a positive integer, got {n_t}")
    if not tol > 0:
        raise ParameterError(f"tol must be > 0, got {tol}")
    if not (isinstance(max_iters, (int, np.integer)) and max_iters >= 1):
        raise ParameterError(f"max_iters must be a positive integer, got {max_iters}")


def _solve(params, u0, T, halfwidth, n_t, n_x, tol, max_iters):
    alpha = params.alpha
    x = -halfwidth + (2.0 * halfwidth / n_x) * np.arange(n_x)
    t_grid = np.linspace(0.0, T, n_t + 1)
    lam = _lam(params, _wavenumbers(n_x, halfwidth))
    u0_hat = np.fft.rfft(u0(x))
    first = _propagator(alpha, lam, t_grid) * u0_hat
    history_integral = _History(*_hat_weights(alpha, lam, T / n_t, n_t))

    values = np.fft.irfft(first, n=n_x, axis=1)
    history = []
    for _ in range(max_iters):
        v_hat = np.fft.rfft(values**2, axis=1)
        new = np.fft.irfft(first + history_integral(v_hat), n=n_x, axis=1)
        change = float(np.max(np.abs(new - values)))
        history.append(change)
        values = new
        if change <= tol:
            return t_grid, x, values, history
        if not math.isfinite(change) or change > DIVERGENCE_CAP:
            break
    raise PicardDivergenceError(
        f"Picard iteration did not reach tol={tol} in {len(history)} iterations (last change {history[-1]:.3e})",
        history,
    )


def solve_grid(
    params: FracParams,
    u0: InitialCondition,
    T: float,
    domain_halfwidth: float | None = None,
    N_t: int = 64,
    N_x: int | None = None,
    tol: float = 1e-8,
    max_iters: int = 200,
    grid_check: bool = False,
) -> GridSolution:
    """Fixed point of the discretized integral equation on ``[0, T] x [-L, L)``.

    Without an explicit ``domain_halfwidth`` the box starts at ``L = 64`` and
    doubles until the image leak is below ``LEAK_TOL / 10``; without ``N_x``
    the spacing is kept at or below ``1/32``. With ``grid_check`` the problem
    is solved again with ``N_t`` and ``N_x`` doubled; twice the largest change
    over ``x`` at each shared time node is stored as ``grid_error``.
    """
    if domain_halfwidth is None:
        _validate(params, T, 1.0, N_t, 8, tol, max_iters)
        domain_halfwidth = auto_halfwidth(params, u0, T)
    elif not (math.isfinite(domain_halfwidth) and domain_halfwidth > 0):
        raise ParameterError(f"domain halfwidth must be > 0, got {domain_halfwidth}")
    if N_x is None:
        N_x = max(64, 1 << math.ceil(math.log2(64.0 * domain_halfwidth)))
    _validate(params, T, domain_halfwidth, N_t, N_x, tol, max_iters)
    leak = domain_leak(params, u0, T, domain_halfwidth, N_x)
    if leak > LEAK_TOL:
        raise DomainTooSmallError(
            f"periodic domain halfwidth {domain_halfwidth} leaks {leak:.2e} > {LEAK_TOL:g}; widen the domain",
            leak,
        )
    t_grid, x, values, history = _solve(params, u0, T, domain_halfwidth, N_t, N_x, tol, max_iters)
    solution = GridSolution(
        params=params,
        t_grid=t_grid,
        x_grid=x,
        values=values,
        iteration_count=len(history),
        final_sup_change=history[-1],
        tol=tol,
        history=history,
        leak=leak,
        u0_spec=dict(u0.spec),
    )
    if grid_check:
        _, _, fine, _ = _solve(params, u0, T, domain_halfwidth, 2 * N_t, 2 * N_x, tol, max_iters)
        diff = np.max(np.abs(fine[::2, ::2] - values), axis=1)
        solution.grid_error = 2.0 * diff + 2.0 * tol
    return solution


def residual_check(solution: GridSolution, params: FracParams, u0: InitialCondition, refine: int = 4) -> float:
    """Sup-norm residual of the integral equation on a refined time quadrature.

    ``u^2`` is interpolated by a cubic spline in time onto a grid ``refine``
    times finer, and the history integral is recomputed there with exact
    product weights. The difference to the grid values measures iteration
    and time-discretization error together.
    """
    if refine < 1:
        raise ParameterError("refine must be >= 1")
    t_grid, x = solution.t_grid, solution.x_grid
    n_t, n_x = t_grid.size - 1, x.size
    L = solution.halfwidth
    lam = _lam(params, _wavenumbers(n_x, L))
    squares = solution.values**2
    fine_t = np.linspace(0.0, t_grid[-1], refine * n_t + 1)
    if n_t >= 2:
        fine_sq = CubicSpline(t_grid, squares, axis=0)(fine_t)
    else:
        fine_sq = squares[0] + (fine_t / t_grid[-1])[:, None] * (squares[-1] - squares[0])
    v_hat = np.fft.rfft(fine_sq, axis=1)
    history_integral = _History(*_hat_weights(params.alpha, lam, t_grid[-1] / (refine * n_t), refine * n_t))
    first = _propagator(params.alpha, lam, t_grid) * np.fft.rfft(u0(x))
    rhs = np.fft.irfft(first + history_integral(v_hat, stride=refine), n=n_x, axis=1)
    return float(np.max(np.abs(rhs - solution.values)))
