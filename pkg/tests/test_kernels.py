import json
import math

import numpy as np
import pytest
from scipy import stats

from frackpp.exceptions import KernelValidationError, ParameterError
from frackpp.kernels import (
    FracParams,
    KernelId,
    build_kernel_table,
    kernel_charfn,
    kernel_property_report,
    riesz_feller_symbol,
    stable_charfn,
    stable_table,
)
from oracles import gaussian_pdf

K_GRID = np.concatenate([-np.geomspace(1e-3, 50.0, 40), [0.0], np.geomspace(1e-3, 50.0, 40)])


class TestParams:
    @pytest.mark.parametrize("alpha,beta,theta", [(0.0, 1.0, 0.0), (1.2, 1.0, 0.0), (0.5, 0.0, 0.0), (0.5, 2.1, 0.0)])
    def test_out_of_range(self, alpha, beta, theta):
        with pytest.raises(ParameterError):
            FracParams(alpha, beta, theta)

    def test_skew_bound(self):
        with pytest.raises(ParameterError):
            FracParams(0.7, 1.5, 1.9)
        FracParams(0.7, 1.5, 0.5)
        with pytest.raises(ParameterError):
            FracParams(0.7, 1.5, 0.51)

    def test_nonfinite(self):
        with pytest.raises(ParameterError):
            FracParams(float("nan"), 1.0, 0.0)

    def test_kernel_id_aliases(self):
        p = FracParams(0.6, 1.5, 0.0)
        assert KernelId(p, "alpha", 1.0).rho == 0.6
        assert KernelId(p, "one", 1.0).rho == 1.0
        with pytest.raises(ParameterError):
            KernelId(p, 0.5, 1.0)
        with pytest.raises(ParameterError):
            KernelId(p, 1.0, 0.0)


class TestSymbol:
    def test_quadratic(self):
        assert riesz_feller_symbol(2.0, 0.0, 3.0) == 9 + 0j

    def test_absolute(self):
        assert riesz_feller_symbol(1.0, 0.0, -2.0) == 2 + 0j

    def test_skewed_phase(self):
        val = riesz_feller_symbol(1.5, 0.4, 1.0)
        assert val.real == pytest.approx(0.8090169944, abs=1e-10)
        assert val.imag == pytest.approx(0.5877852523, abs=1e-10)

    def test_conjugate_symmetry_exact(self):
        k = np.geomspace(1e-3, 1e3, 30)
        assert np.array_equal(riesz_feller_symbol(1.3, 0.5, -k), np.conj(riesz_feller_symbol(1.3, 0.5, k)))


class TestCharfn:
    @pytest.mark.parametrize("alpha,rho", [(0.5, 1.0), (0.5, 0.5), (1.0, 1.0)])
    def test_unit_at_origin(self, alpha, rho):
        kid = KernelId(FracParams(alpha, 1.2, 0.4), rho, 0.7)
        assert kernel_charfn(kid, 0.0) == 1.0

    def test_gaussian_reduction(self):
        kid = KernelId(FracParams(1.0, 2.0, 0.0), 1.0, 1.0)
        assert kernel_charfn(kid, 1.0).real == pytest.approx(0.6065306597, abs=1e-10)
        k = np.linspace(-6, 6, 41)
        assert np.allclose(kernel_charfn(kid, k), np.exp(-0.5 * k**2), atol=1e-13)

    def test_delta_limit(self):
        kid = KernelId(FracParams(0.6, 1.5, 0.3), 0.6, 1e-12)
        assert np.max(np.abs(kernel_charfn(kid, np.linspace(-10, 10, 21)) - 1)) < 1e-5

    @pytest.mark.parametrize("alpha,rho,beta,theta", [(0.5, 0.5, 1.0, 0.5), (0.7, 1.0, 1.5, -0.25), (0.3, 0.3, 0.6, 0.3)])
    def test_symmetry_and_bound(self, alpha, rho, beta, theta):
        kid = KernelId(FracParams(alpha, beta, theta), rho, 1.0)
        phi = kernel_charfn(kid, K_GRID)
        assert np.max(np.abs(kernel_charfn(kid, -K_GRID) - np.conj(phi))) <= 1e-14
        assert np.max(np.abs(phi)) <= 1.0 + 1e-12

    def test_stable_charfn(self):
        assert stable_charfn(2.0, 0.0, 0.5, 2.0) == pytest.approx(math.exp(-2.0))


class TestTables:
    def test_gaussian_density(self):
        kid = KernelId(FracParams(1.0, 2.0, 0.0), 1.0, 1.0)
        table = build_kernel_table(kid)
        assert table.density_at(0.0) == pytest.approx(0.3989422804, abs=1e-6)

    @pytest.mark.parametrize("t", [0.25, 1.0, 3.0])
    def test_gaussian_pointwise(self, t):
        table = build_kernel_table(KernelId(FracParams(1.0, 2.0, 0.0), 1.0, t))
        x = np.linspace(-4.0 * math.sqrt(t), 4.0 * math.sqrt(t), 101)
        assert np.max(np.abs(table.density_at(x) - gaussian_pdf(x, t))) <= 1e-6

    def test_invariants(self):
        table = build_kernel_table(KernelId(FracParams(0.7, 1.5, 0.0), 0.7, 0.8))
        assert abs(table.mass_defect) <= 1e-6
        assert table.min_density >= -1e-7
        assert table.max_imag_residual <= 1e-9
        assert np.all(np.diff(table.cdf) >= 0)
        assert table.cdf[0] <= 1e-6 and table.cdf[-1] >= 1 - 1e-6

    def test_inverse_cdf_roundtrip(self):
        table = build_kernel_table(KernelId(FracParams(0.5, 1.2, 0.3), 1.0, 1.0))
        u = np.linspace(0.001, 0.999, 57)
        assert np.max(np.abs(table.cdf_at(table.inverse_cdf(u)) - u)) < 1e-6

    def test_skewed_stable_against_scipy(self):
        # scipy's S1 form with skewness -tan(theta pi/2)/tan(beta pi/2)
        beta, theta, lam = 1.5, 0.4, 1.0
        table = stable_table(beta, theta, lam, n_points=2**18, tail_target=1e-2)
        skew = -math.tan(theta * math.pi / 2) / math.tan(beta * math.pi / 2)
        scale = (lam * math.cos(theta * math.pi / 2)) ** (1 / beta)
        x = np.linspace(-6.0, 6.0, 13)
        ref = stats.levy_stable(beta, skew, scale=scale).cdf(x)
        assert np.max(np.abs(table.cdf_at(x) - ref)) < 1e-4
        assert table.right_tail > table.left_tail

    def test_bad_n_points(self):
        kid = KernelId(FracParams(1.0, 2.0, 0.0), 1.0, 1.0)
        with pytest.raises(ParameterError):
            build_kernel_table(kid, n_points=1000)

    def test_undersized_window_flagged(self):
        kid = KernelId(FracParams(0.7, 1.0, 0.0), 1.0, 1.0)
        with pytest.raises(KernelValidationError) as info:
            build_kernel_table(kid, x_halfwidth=1.0)
        assert "normalization" in info.value.condition

    def test_csv(self, tmp_path):
        table = build_kernel_table(KernelId(FracParams(1.0, 2.0, 0.0), 1.0, 1.0), n_points=1024)
        path = tmp_path / "g.csv"
        table.to_csv(path)
        lines = path.read_text().splitlines()
        header = lines.index("x,density,cdf")
        assert all(line.startswith("#") for line in lines[:header])
        assert len(lines) - header - 1 == 1024


class TestReport:
    def test_gaussian_passes(self):
        report = kernel_property_report(KernelId(FracParams(1.0, 2.0, 0.0), 1.0, 1.0))
        assert report.passed

    def test_cauchy_type_passes(self):
        report = kernel_property_report(KernelId(FracParams(0.5, 1.0, 0.0), 0.5, 1.0))
        assert report.passed, report.conditions

    def test_json(self):
        report = kernel_property_report(KernelId(FracParams(0.7, 1.5, 0.25), 1.0, 0.5))
        data = json.loads(report.to_json())
        assert data["passed"] is True
        assert set(data["conditions"]) >= {"i_delta_limit", "ii_mass_defect", "iii_min_density"}

    def test_invalid_skew_rejected_before_report(self):
        with pytest.raises(ParameterError):
            kernel_property_report(KernelId(FracParams(0.7, 1.5, 1.9), 1.0, 1.0))
