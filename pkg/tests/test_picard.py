import json
import math

import numpy as np
import pytest

from frackpp.branching import InitialCondition
from frackpp.exceptions import DomainTooSmallError, ParameterError, PicardDivergenceError
from frackpp.kernels import FracParams
from frackpp.picard import auto_halfwidth, domain_leak, residual_check, solve_grid
from oracles import fractional_abm, logistic

GAUSS = InitialCondition.gaussian()
# D^0.7 u = u^2 - u, u(0) = 0.5, frozen from oracles.fractional_abm
ABM_T1 = 0.25997295
ABM_T05 = 0.33984384


class TestConstantData:
    def test_unit_datum_is_stationary(self):
        sol = solve_grid(FracParams(0.7, 1.5, 0.0), InitialCondition.constant(1.0), 1.0, domain_halfwidth=8.0, tol=1e-14)
        assert np.max(np.abs(sol.values - 1.0)) <= 1e-14
        assert residual_check(sol, sol.params, InitialCondition.constant(1.0)) <= 1e-12

    @pytest.mark.parametrize("beta", [0.8, 1.5, 2.0])
    def test_logistic(self, beta):
        sol = solve_grid(FracParams(1.0, beta, 0.0), InitialCondition.constant(0.5), 1.0, domain_halfwidth=8.0)
        assert np.max(np.abs(sol.values[-1] - logistic(0.5, 1.0))) <= 1e-4
        assert sol.at(1.0, [0.0])[0] == pytest.approx(0.26894, abs=1e-4)

    def test_fractional_volterra(self):
        sol = solve_grid(FracParams(0.7, 1.5, 0.0), InitialCondition.constant(0.5), 1.0, domain_halfwidth=8.0)
        assert abs(sol.values[-1, 0] - ABM_T1) <= 1e-4
        assert abs(sol.at(0.5, [0.0])[0] - ABM_T05) <= 1e-4

    @pytest.mark.slow
    def test_frozen_volterra_values(self):
        assert fractional_abm(0.7, 0.5, 1.0, 4096) == pytest.approx(ABM_T1, abs=1e-7)
        assert fractional_abm(0.7, 0.5, 0.5, 2048) == pytest.approx(ABM_T05, abs=1e-7)

    def test_homogeneity(self):
        sol = solve_grid(FracParams(0.5, 1.2, 0.4), InitialCondition.constant(0.3), 2.0, domain_halfwidth=8.0)
        assert np.max(np.ptp(sol.values, axis=1)) <= 1e-10


@pytest.fixture(scope="module")
def heat():
    return solve_grid(FracParams(1.0, 2.0, 0.0), GAUSS, 0.5, N_t=64, grid_check=True)


class TestGaussianData:
    def test_symmetric_and_bounded(self, heat):
        v = heat.at(0.5, [-1.0, 0.0, 1.0])
        assert v[0] == pytest.approx(v[2], abs=1e-12)
        assert np.all(np.abs(heat.values) <= 1.0 + 1e-12)

    def test_grid_tolerance_covers_refinement(self, heat):
        finer = solve_grid(heat.params, GAUSS, 0.5, domain_halfwidth=heat.halfwidth, N_t=128, N_x=2 * heat.x_grid.size)
        x = np.array([-1.0, 0.0, 1.0])
        assert np.max(np.abs(finer.at(0.5, x) - heat.at(0.5, x))) <= heat.grid_tolerance

    def test_tolerance_profile(self, heat):
        assert heat.tolerance_at(0.5) == heat.grid_tolerance
        assert heat.tolerance_at(0.25) > 0

    def test_residual_fine_grid(self):
        sol = solve_grid(FracParams(1.0, 2.0, 0.0), GAUSS, 0.5, N_t=512)
        assert residual_check(sol, sol.params, GAUSS) <= 5 * sol.tol

    def test_residual_refinement_ratio(self):
        params = FracParams(1.0, 2.0, 0.0)
        coarse = residual_check(solve_grid(params, GAUSS, 0.5, N_t=32), params, GAUSS)
        fine = residual_check(solve_grid(params, GAUSS, 0.5, N_t=64), params, GAUSS)
        # a first-order scheme doubles the residual; allow a factor of 3 either way
        assert 2.0 / 3.0 <= coarse / fine / 2.0 <= 3.0

    @pytest.mark.parametrize("alpha,beta", [(1.0, 2.0), (0.7, 1.5), (0.5, 1.0)])
    def test_contraction(self, alpha, beta):
        sol = solve_grid(FracParams(alpha, beta, 0.0), GAUSS, 0.5, N_t=32)
        tail = [h for h in sol.history if h < 1.0]
        assert len(tail) >= 3
        ratios = np.array(tail[1:]) / np.array(tail[:-1])
        assert np.all(ratios < 1.0)
        assert sol.final_sup_change <= sol.tol

    def test_skew_breaks_symmetry(self):
        sol = solve_grid(FracParams(0.7, 1.5, 0.4), GAUSS, 0.5, N_t=32)
        left, right = sol.at(0.5, [-1.0, 1.0])
        assert abs(left - right) > 1e-4


class TestGates:
    def test_leak(self):
        with pytest.raises(DomainTooSmallError) as info:
            solve_grid(FracParams(0.5, 1.0, 0.0), GAUSS, 0.5, domain_halfwidth=4.0)
        assert info.value.leak > 1e-4

    def test_auto_halfwidth_grows_for_heavy_tails(self):
        light = auto_halfwidth(FracParams(1.0, 2.0, 0.0), GAUSS, 0.5)
        heavy = auto_halfwidth(FracParams(0.5, 1.0, 0.0), GAUSS, 0.5)
        assert heavy > light
        assert domain_leak(FracParams(0.5, 1.0, 0.0), GAUSS, 0.5, heavy, 4096) <= 1e-5

    def test_constant_has_no_leak(self):
        assert domain_leak(FracParams(0.5, 1.0, 0.0), InitialCondition.constant(0.5), 1.0, 2.0, 64) == 0.0

    def test_blowup_diverges(self):
        # u' = u^2 - u from u = 3 blows up at t = ln 1.5
        with pytest.raises(PicardDivergenceError) as info:
            solve_grid(FracParams(1.0, 2.0, 0.0), InitialCondition.constant(3.0), 1.0, domain_halfwidth=8.0)
        assert len(info.value.history) >= 1

    def test_iteration_budget(self):
        with pytest.raises(PicardDivergenceError) as info:
            solve_grid(FracParams(1.0, 2.0, 0.0), InitialCondition.constant(0.5), 1.0, domain_halfwidth=8.0, max_iters=2)
        assert len(info.value.history) == 2

    @pytest.mark.parametrize(
        "kwargs", [{"T": 0.0}, {"N_x": 100}, {"N_t": 0}, {"tol": 0.0}, {"max_iters": 0}, {"domain_halfwidth": -1.0}]
    )
    def test_validation(self, kwargs):
        args = {"T": 1.0, "domain_halfwidth": 8.0}
        args.update(kwargs)
        with pytest.raises(ParameterError):
            solve_grid(FracParams(1.0, 2.0, 0.0), InitialCondition.constant(0.5), **args)

    def test_outside_horizon(self):
        sol = solve_grid(FracParams(1.0, 2.0, 0.0), InitialCondition.constant(0.5), 1.0, domain_halfwidth=8.0, N_t=8)
        with pytest.raises(ParameterError):
            sol.at(1.5, [0.0])


class TestExport:
    def test_csv_and_json(self, tmp_path):
        sol = solve_grid(FracParams(0.7, 2.0, 0.0), GAUSS, 0.2, domain_halfwidth=16.0, N_t=4, N_x=64)
        path = tmp_path / "sol.csv"
        sol.to_csv(path)
        lines = path.read_text().splitlines()
        header = lines.index("t,x,u")
        assert len(lines) - header - 1 == 5 * 64
        meta = json.loads(sol.to_json())
        assert meta["N_t"] == 4 and meta["N_x"] == 64 and meta["halfwidth"] == 16.0
        assert meta["final_sup_change"] <= meta["tol"]
        t, x, u = (float(v) for v in lines[-1].split(","))
        assert t == pytest.approx(0.2) and u == pytest.approx(sol.values[-1, -1])
        assert math.isfinite(x)
