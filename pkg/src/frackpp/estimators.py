"""scikit-learn style front ends for the two solvers.

``fit(X, y)`` takes samples of the initial datum (positions ``X`` and values
``y``) and stores a tabulated initial condition; ``predict(X)`` takes rows
``(t, x)`` and returns ``u(t, x)``. Passing ``initial_condition`` to the
constructor replaces the tabulated datum (``fit`` may then be called without
data).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .branching import InitialCondition, estimate_point, simulate_forward_tree
from .exceptions import ParameterError
from .kernels import FracParams
from .picard import solve_grid

__all__ = ["BranchingKPPSolver", "PicardKPPSolver"]


class _KPPBase(RegressorMixin, BaseEstimator):
    def _fit_initial(self, X, y):
        self.params_ = FracParams(self.alpha, self.beta, self.theta)
        if self.initial_condition is not None:
            if not isinstance(self.initial_condition, InitialCondition):
                raise ParameterError("initial_condition must be an InitialCondition")
            self.u0_ = self.initial_condition
            self.n_features_in_ = 1
            return
        if X is None or y is None:
            raise ParameterError("fit needs samples (X, y) of the initial datum or an initial_condition")
        X, y = check_X_y(X, y, ensure_min_samples=2, y_numeric=True)
        if X.shape[1] != 1:
            raise ParameterError(f"X must hold one column of positions, got {X.shape[1]}")
        self.n_features_in_ = 1
        self.u0_ = InitialCondition.tabulated(X[:, 0], y)

    @staticmethod
    def _points(X) -> np.ndarray:
        X = check_array(X, ensure_min_features=2)
        if X.shape[1] != 2:
            raise ParameterError(f"predict takes rows (t, x), got {X.shape[1]} columns")
        if np.any(X[:, 0] < 0):
            raise ParameterError("times must be >= 0")
        return X


class BranchingKPPSolver(_KPPBase):
    """Monte Carlo estimates of ``u(t, x)`` from the branching representation.

    Row ``i`` of ``predict`` uses master seed ``random_state + i`` so rows
    are independent and the whole call is reproducible.
    """

    def __init__(
        self,
        alpha=0.7,
        beta=1.5,
        theta=0.0,
        n_paths=10_000,
        random_state=0,
        n_workers=1,
        engine="backward",
        allow_unbounded=False,
        initial_condition=None,
    ):
        self.alpha = alpha
        self.beta = beta
        self.theta = theta
        self.n_paths = n_paths
        self.random_state = random_state
        self.n_workers = n_workers
        self.engine = engine
        self.allow_unbounded = allow_unbounded
        self.initial_condition = initial_condition

    def fit(self, X=None, y=None):
        if self.engine not in ("backward", "forward"):
            raise ParameterError(f"engine must be backward or forward, got {self.engine!r}")
        if not isinstance(self.random_state, (int, np.integer)) or self.random_state < 0:
            raise ParameterError("random_state must be a non-negative integer")
        self._fit_initial(X, y)
        return self

    def predict(self, X, return_std=False):
        check_is_fitted(self, "u0_")
        X = self._points(X)
        run = estimate_point if self.engine == "backward" else simulate_forward_tree
        means, errors = [], []
        for i, (t, x) in enumerate(X):
            est = run(
                self.params_,
                self.u0_,
                float(t),
                float(x),
                self.n_paths,
                int(self.random_state) + i,
                n_workers=self.n_workers,
                allow_unbounded=self.allow_unbounded,
            )
            means.append(est.mean)
            errors.append(est.stderr)
        if return_std:
            return np.array(means), np.array(errors)
        return np.array(means)


class PicardKPPSolver(_KPPBase):
    """Grid solution of the integral equation, interpolated at the query points."""

    def __init__(
        self,
        alpha=0.7,
        beta=1.5,
        theta=0.0,
        N_t=64,
        N_x=None,
        domain_halfwidth=None,
        tol=1e-8,
        max_iters=200,
        initial_condition=None,
    ):
        self.alpha = alpha
        self.beta = beta
        self.theta = theta
        self.N_t = N_t
        self.N_x = N_x
        self.domain_halfwidth = domain_halfwidth
        self.tol = tol
        self.max_iters = max_iters
        self.initial_condition = initial_condition

    def fit(self, X=None, y=None):
        self._fit_initial(X, y)
        self.solution_ = None
        return self

    def solve(self, T: float):
        """Solve up to ``T`` (reusing the last grid when it reaches far enough)."""
        check_is_fitted(self, "u0_")
        if self.solution_ is None or self.solution_.t_grid[-1] < T:
            self.solution_ = solve_grid(
                self.params_,
                self.u0_,
                T,
                domain_halfwidth=self.domain_halfwidth,
                N_t=self.N_t,
                N_x=self.N_x,
                tol=self.tol,
                max_iters=self.max_iters,
            )
        return self.solution_

    def predict(self, X):
        check_is_fitted(self, "u0_")
        X = self._points(X)
        T = float(np.max(X[:, 0]))
        if T == 0.0:
            return self.u0_(X[:, 1])
        solution = self.solve(T)
        out = np.empty(X.shape[0])
        for t in np.unique(X[:, 0]):
            rows = X[:, 0] == t
            out[rows] = solution.at(float(t), X[rows, 1])
        return out
