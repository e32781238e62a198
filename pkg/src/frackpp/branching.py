"""Branching-process estimator of ``u(t, x)`` for the fractional KPP equation.

A particle started at ``x`` with time-to-go ``t`` draws a branching delay
``tau`` from the fractional clock. If ``tau >= t`` it survives: it is moved
by the kernel ``G_{alpha,1}(t)`` and contributes the factor ``u0`` at its
final position. Otherwise it is moved by ``G_{alpha,alpha}(tau)`` and
replaced by two independent particles with time-to-go ``t - tau`` that start
from the same point. The product of all leaf factors is an unbiased sample
of ``u(t, x)`` whenever ``sup |u0| <= 1``.

Two engines implement the same tree law:

* the backward engine advances a population of pending particles
  generation by generation (clock, then displacement);
* the forward engine first grows every genealogy in absolute time, then
  draws all segment displacements, then sums them along the lineages.

Paths are processed in chunks of fixed size with one random stream per
chunk, so results depend on the master seed only, never on the number of
workers.
"""

from __future__ import annotations

import json
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .exceptions import BoundViolationError, ParameterError, RunawayTreeError
from .kernels import FracParams
from .samplers import (
    RngStream,
    clock_table,
    sample_branch_times,
    sample_kernel_displacements,
    tilted_sampler,
)

__all__ = [
    "CHUNK_PATHS",
    "Estimate",
    "InitialCondition",
    "estimate_point",
    "path_value",
    "simulate_forward_tree",
]

CHUNK_PATHS = 8192
DEFAULT_MAX_DEPTH = 10_000
DEFAULT_MAX_PARTICLES = 50_000_000


# {{{ initial conditions


@dataclass(frozen=True)
class InitialCondition:
    """Vectorized initial datum ``u0`` with a declared bound on ``sup |u0|``."""

    func: Callable[[np.ndarray], np.ndarray]
    sup_bound: float
    spec: dict = field(default_factory=dict)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    @classmethod
    def constant(cls, c: float) -> InitialCondition:
        c = float(c)
        return cls(lambda x: np.full(np.shape(x), c), abs(c), {"kind": "constant", "c": c})

    @classmethod
    def gaussian(cls, amplitude: float = 1.0, width: float = 1.0, center: float = 0.0) -> InitialCondition:
        """``amplitude * exp(-((x - center) / width)**2)``."""
        if not width > 0:
            raise ParameterError(f"gaussian width must be > 0, got {width}")
        a, w, c = float(amplitude), float(width), float(center)
        return cls(
            lambda x: a * np.exp(-(((x - c) / w) ** 2)),
            abs(a),
            {"kind": "gaussian", "amplitude": a, "width": w, "center": c},
        )

    @classmethod
    def tabulated(cls, x, values, source: str | None = None) -> InitialCondition:
        """Linear interpolation of ``values`` at ``x``, held constant beyond the ends."""
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != values.shape or x.size < 2:
            raise ParameterError("tabulated initial condition needs matching 1-d x and values (>= 2 points)")
        if np.any(np.diff(x) <= 0):
            order = np.argsort(x)
            x, values = x[order], values[order]
            if np.any(np.diff(x) <= 0):
                raise ParameterError("tabulated abscissae must be distinct")
        if not np.all(np.isfinite(values)):
            raise ParameterError("tabulated values must be finite")
        spec = {"kind": "tabulated", "n_points": int(x.size)}
        if source is not None:
            spec["source"] = source
        return cls(lambda q: np.interp(q, x, values), float(np.max(np.abs(values))), spec)

    @classmethod
    def from_file(cls, path) -> InitialCondition:
        """Two-column ``x, u0`` text file (comma or whitespace separated, ``#`` comments)."""
        path = Path(path)
        text = path.read_text().replace(",", " ")
        rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
        try:
            data = np.array([[float(v) for v in row[:2]] for row in rows])
        except ValueError:
            data = np.array([[float(v) for v in row[:2]] for row in rows[1:]])
        if data.ndim != 2 or data.shape[1] != 2:
            raise ParameterError(f"{path} must contain two numeric columns")
        return cls.tabulated(data[:, 0], data[:, 1], source=str(path))

    @classmethod
    def from_callable(cls, func, sup_bound: float) -> InitialCondition:
        return cls(func, float(sup_bound), {"kind": "callable", "name": getattr(func, "__name__", "u0")})


def _check_bound(u0: InitialCondition, allow_unbounded: bool) -> None:
    if u0.sup_bound > 1.0 and not allow_unbounded:
        raise BoundViolationError(
            f"sup |u0| = {u0.sup_bound} exceeds 1; pass allow_unbounded=True to run anyway"
        )


# }}}


# {{{ estimates


@dataclass
class Estimate:
    """Monte Carlo estimate of ``u(t, x)`` with its standard error."""

    mean: float
    stderr: float
    n_paths: int
    master_seed: int
    t: float
    x: float
    params: dict
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "t": self.t,
            "x": self.x,
            "n_paths": self.n_paths,
            "seed": self.master_seed,
            "mean": self.mean,
            "stderr": self.stderr,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _summarize(values, leaves, depths, n_paths, master_seed, params, u0, t, x, engine) -> Estimate:
    if np.all(values == values[0]):
        # identical samples: report them exactly, without summation rounding
        mean, stderr = float(values[0]), 0.0
    else:
        mean = float(np.mean(values))
        stderr = float(np.std(values, ddof=1) / math.sqrt(n_paths))
    diagnostics = {
        "engine": engine,
        "mean_leaf_count": float(np.mean(leaves)),
        "leaf_count_stderr": float(np.std(leaves, ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0,
        "max_depth": int(np.max(depths)),
        "min_path_product": float(np.min(values)),
        "max_path_product": float(np.max(values)),
        "max_abs_path_product": float(np.max(np.abs(values))),
        "u0": u0.spec,
        "u0_sup_bound": u0.sup_bound,
    }
    return Estimate(
        mean=mean,
        stderr=stderr,
        n_paths=n_paths,
        master_seed=master_seed,
        t=float(t),
        x=float(x),
        params={"alpha": params.alpha, "beta": params.beta, "theta": params.theta},
        diagnostics=diagnostics,
    )


# }}}


# {{{ single path (literal recursion)


def path_value(
    params: FracParams,
    u0: InitialCondition,
    t: float,
    x: float,
    stream,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> float:
    """One unbiased sample of ``u(t, x)``.

    The recursion is run with an explicit stack in depth-first order; the
    generator of ``stream`` is consumed in that order, so the value is a
    pure function of the stream.
    """
    if not (math.isfinite(t) and t >= 0.0):
        raise ParameterError(f"t must be finite and >= 0, got {t}")
    gen = stream.generator() if isinstance(stream, RngStream) else stream
    if t == 0.0:
        return float(u0(np.array([x]))[0])
    alpha = params.alpha
    product = 1.0
    stack = [(float(t), float(x), 0)]
    while stack:
        ttg, pos, depth = stack.pop()
        if depth > max_depth:
            raise RunawayTreeError(f"branching tree exceeded depth {max_depth}")
        tau = float(sample_branch_times(alpha, gen, 1)[0])
        if tau >= ttg:
            xi = sample_kernel_displacements(params, 1.0, [ttg], gen)[0]
            product *= float(u0(np.array([pos + xi]))[0])
        else:
            xi = sample_kernel_displacements(params, alpha, [tau], gen)[0]
            child = (ttg - tau, pos + xi, depth + 1)
            stack.append(child)
            stack.append(child)
    return product


# }}}


# {{{ backward population engine


def _backward_chunk(params, u0, t, x, n, stream, max_depth, max_particles):
    gen = stream.generator()
    alpha = params.alpha
    product = np.ones(n)
    leaves = np.zeros(n, dtype=np.int64)
    depth_max = np.zeros(n, dtype=np.int64)
    path = np.arange(n)
    ttg = np.full(n, float(t))
    pos = np.full(n, float(x))
    depth = 0
    while path.size:
        if depth > max_depth:
            raise RunawayTreeError(f"branching tree exceeded depth {max_depth} (alpha={alpha}, t={t})")
        if path.size > max_particles:
            raise RunawayTreeError(f"branching population exceeded {max_particles} particles")
        tau = sample_branch_times(alpha, gen, path.size)
        survive = tau >= ttg
        if np.any(survive):
            sp = path[survive]
            xi = sample_kernel_displacements(params, 1.0, ttg[survive], gen)
            np.multiply.at(product, sp, u0(pos[survive] + xi))
            np.add.at(leaves, sp, 1)
            depth_max[sp] = np.maximum(depth_max[sp], depth)
        split = ~survive
        if not np.any(split):
            break
        tau_b = tau[split]
        xi = sample_kernel_displacements(params, alpha, tau_b, gen)
        new_pos = pos[split] + xi
        new_ttg = ttg[split] - tau_b
        path = np.repeat(path[split], 2)
        pos = np.repeat(new_pos, 2)
        ttg = np.repeat(new_ttg, 2)
        depth += 1
    return product, leaves, depth_max


# }}}


# {{{ forward genealogy engine


def _forward_chunk(params, u0, t, x, n, stream, max_depth, max_particles):
    gen = stream.generator()
    alpha = params.alpha
    horizon = float(t)
    # Genealogy: each segment has a parent (-1 for roots), a tree index,
    # a birth time and an end time; segments ending before the horizon branch.
    parent_parts, tree_parts, start_parts, end_parts, final_parts = [], [], [], [], []
    n_seg = 0
    live_parent = np.full(n, -1, dtype=np.int64)
    live_tree = np.arange(n)
    live_birth = np.zeros(n)
    gen_index = 0
    while live_tree.size:
        if gen_index > max_depth:
            raise RunawayTreeError(f"branching tree exceeded depth {max_depth} (alpha={alpha}, t={t})")
        if n_seg + live_tree.size > max_particles:
            raise RunawayTreeError(f"branching genealogy exceeded {max_particles} segments")
        life = sample_branch_times(alpha, gen, live_tree.size)
        death = live_birth + life
        final = death >= horizon
        ids = n_seg + np.arange(live_tree.size)
        parent_parts.append(live_parent)
        tree_parts.append(live_tree)
        start_parts.append(live_birth)
        end_parts.append(np.where(final, horizon, death))
        final_parts.append(final)
        n_seg += live_tree.size
        branching = ~final
        live_parent = np.repeat(ids[branching], 2)
        live_tree = np.repeat(live_tree[branching], 2)
        live_birth = np.repeat(death[branching], 2)
        gen_index += 1

    parent = np.concatenate(parent_parts)
    tree = np.concatenate(tree_parts)
    duration = np.concatenate(end_parts) - np.concatenate(start_parts)
    final = np.concatenate(final_parts)

    xi = np.empty(n_seg)
    xi[final] = sample_kernel_displacements(params, 1.0, duration[final], gen)
    xi[~final] = sample_kernel_displacements(params, alpha, duration[~final], gen)

    # Parents precede children, so one pass in segment order accumulates
    # positions generation by generation.
    end_pos = np.empty(n_seg)
    offset = 0
    generation = np.empty(n_seg, dtype=np.int64)
    for g, part in enumerate(parent_parts):
        sl = slice(offset, offset + part.size)
        base = np.full(part.size, float(x)) if g == 0 else end_pos[part]
        end_pos[sl] = base + xi[sl]
        generation[sl] = g
        offset += part.size

    product = np.ones(n)
    np.multiply.at(product, tree[final], u0(end_pos[final]))
    leaves = np.bincount(tree[final], minlength=n)
    depth_max = np.zeros(n, dtype=np.int64)
    np.maximum.at(depth_max, tree[final], generation[final])
    return product, leaves, depth_max


# }}}


# Shared state of the running estimate. Workers are forked after it is set,
# so closures in ``u0`` never need to be pickled.
_JOB: dict = {}


def _run_chunk(index):
    job = _JOB
    func = _backward_chunk if job["engine"] == "backward" else _forward_chunk
    return func(
        job["params"], job["u0"], job["t"], job["x"], job["sizes"][index],
        RngStream(job["seed"], index), job["max_depth"], job["max_particles"],
    )


def _warm_caches(params: FracParams) -> None:
    if params.alpha < 1.0:
        clock_table(params.alpha)
        tilted_sampler(params.alpha, 1.0)
        tilted_sampler(params.alpha, params.alpha)


def _estimate(engine, params, u0, t, x, n_paths, master_seed, n_workers, max_depth, max_particles, allow_unbounded):
    if not isinstance(params, FracParams):
        raise ParameterError("params must be a FracParams instance")
    if not (isinstance(n_paths, (int, np.integer)) and n_paths >= 1):
        raise ParameterError(f"n_paths must be a positive integer, got {n_paths!r}")
    if not (math.isfinite(t) and t >= 0.0):
        raise ParameterError(f"t must be finite and >= 0, got {t}")
    if not math.isfinite(x):
        raise ParameterError(f"x must be finite, got {x}")
    RngStream(master_seed)
    _check_bound(u0, allow_unbounded)
    n_paths = int(n_paths)

    if t == 0.0:
        value = float(u0(np.array([x]))[0])
        values = np.full(n_paths, value)
        ones = np.ones(n_paths, dtype=np.int64)
        return _summarize(values, ones, ones * 0, n_paths, master_seed, params, u0, t, x, engine)

    sizes = [min(CHUNK_PATHS, n_paths - start) for start in range(0, n_paths, CHUNK_PATHS)]
    _warm_caches(params)
    _JOB.clear()
    _JOB.update(
        engine=engine, params=params, u0=u0, t=float(t), x=float(x), sizes=sizes,
        seed=master_seed, max_depth=max_depth, max_particles=max_particles,
    )
    try:
        if n_workers is None or n_workers <= 1 or len(sizes) == 1:
            results = [_run_chunk(i) for i in range(len(sizes))]
        else:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=n_workers, mp_context=ctx) as pool:
                results = list(pool.map(_run_chunk, range(len(sizes))))
    finally:
        _JOB.clear()
    values = np.concatenate([r[0] for r in results])
    leaves = np.concatenate([r[1] for r in results])
    depths = np.concatenate([r[2] for r in results])
    if u0.sup_bound <= 1.0 and np.max(np.abs(values)) > 1.0:
        raise BoundViolationError("a path product left [-1, 1] although sup |u0| <= 1")
    return _summarize(values, leaves, depths, n_paths, master_seed, params, u0, t, x, engine)


def estimate_point(
    params: FracParams,
    u0: InitialCondition,
    t: float,
    x: float,
    n_paths: int,
    master_seed: int,
    n_workers: int = 1,
    max_depth: int = DEFAULT_MAX_DEPTH,
    max_particles: int = DEFAULT_MAX_PARTICLES,
    allow_unbounded: bool = False,
) -> Estimate:
    """Mean and standard error of ``n_paths`` independent samples of ``u(t, x)``.

    Deterministic in ``master_seed``; ``n_workers`` only changes wall time.
    """
    return _estimate(
        "backward", params, u0, t, x, n_paths, master_seed, n_workers, max_depth, max_particles, allow_unbounded
    )


def simulate_forward_tree(
    params: FracParams,
    u0: InitialCondition,
    t: float,
    x: float,
    n_paths: int,
    master_seed: int,
    n_workers: int = 1,
    max_depth: int = DEFAULT_MAX_DEPTH,
    max_particles: int = DEFAULT_MAX_PARTICLES,
    allow_unbounded: bool = False,
) -> Estimate:
    """Same estimator as :func:`estimate_point`, built by forward genealogies."""
    return _estimate(
        "forward", params, u0, t, x, n_paths, master_seed, n_workers, max_depth, max_particles, allow_unbounded
    )
