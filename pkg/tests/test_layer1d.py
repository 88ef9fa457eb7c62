import numpy as np
import pytest

from saddlekit.kernels import frac_kernel, reduce_to_1d
from saddlekit.layer1d import (Nonlinearity, allen_cahn, peierls,
                               from_odd_coefficients, validate_nonlinearity,
                               solve_layer, check_layer_decay,
                               check_second_derivative, build_asymptotic_profile,
                               tail_amplitude, Profile1D)


class TestNonlinearity:
    def test_allen_cahn_flags(self):
        rep = validate_nonlinearity(allen_cahn())
        assert rep.all_passed
        assert rep.worst["fprime_0"] == pytest.approx(1.0)
        assert rep.worst["fprime_1"] == pytest.approx(-2.0)

    def test_peierls_flags(self):
        rep = validate_nonlinearity(peierls())
        assert rep.all_passed
        assert rep.worst["fprime_1"] == pytest.approx(-1.0)

    def test_non_odd_fails(self):
        nl = Nonlinearity(f=lambda u: u - u ** 2,
                          fprime=lambda u: 1 - 2 * u,
                          fsecond=lambda u: -2.0 + 0 * u)
        rep = validate_nonlinearity(nl)
        assert not rep.odd
        assert not rep.all_passed

    def test_polynomial_table(self):
        nl = from_odd_coefficients([1.0, -1.0])    # u - u^3
        u = np.linspace(-1.2, 1.2, 7)
        assert np.allclose(nl.f(u), u - u ** 3)
        assert np.allclose(nl.fprime(u), 1 - 3 * u ** 2)
        assert np.allclose(nl.fsecond(u), -6 * u)

    def test_shift_constant(self):
        assert allen_cahn().shift_constant() == pytest.approx(2.0, rel=1e-4)
        assert peierls().shift_constant() == pytest.approx(1.0, rel=1e-4)

    def test_nonfinite_raises(self):
        nl = Nonlinearity(f=lambda u: np.where(np.abs(u) > 1.2, np.nan, u),
                          fprime=lambda u: 1.0 + 0 * u,
                          fsecond=lambda u: 0.0 * u)
        with pytest.raises(ValueError, match="finite"):
            validate_nonlinearity(nl)


class TestLayerSolve:
    def test_arctan_oracle(self, layer_bank):
        lay = layer_bank[("peierls", "0.5")]
        exact = (2 / np.pi) * np.arctan(lay.x)
        mask = np.abs(lay.x) <= 5.0
        assert np.max(np.abs(lay.u - exact)[mask]) < 1e-2

    def test_tail_amplitude_closed_form(self, k1_half):
        # half Laplacian with the sine nonlinearity: exact amplitude 2/pi
        assert tail_amplitude(k1_half, peierls()) == pytest.approx(2 / np.pi, rel=1e-6)

    def test_origin_pin_and_oddness(self, layer_bank):
        for lay in layer_bank.values():
            mid = len(lay.x) // 2
            assert lay.u[mid] == 0.0
            assert np.max(np.abs(lay.u + lay.u[::-1])) == 0.0

    def test_monotone_and_range(self, layer_bank):
        for lay in layer_bank.values():
            assert np.all(np.diff(lay.u) > 0)
            assert np.all(np.abs(lay.u) < 1)

    def test_residual_certificate(self, layer_bank):
        for lay in layer_bank.values():
            assert lay.residual_sup < 1e-8

    def test_self_convergence_in_h(self, k1_half):
        nl = allen_cahn()
        a = solve_layer(k1_half, nl, L=12.0, h=0.05)
        b = solve_layer(k1_half, nl, L=12.0, h=0.025)
        vb = np.interp(a.x, b.x, b.u)
        assert np.max(np.abs(a.u - vb)) < 2e-3

    def test_rejects_bad_parameters(self, k1_half):
        with pytest.raises(ValueError, match="L >= 10"):
            solve_layer(k1_half, allen_cahn(), L=5.0, h=0.05)
        with pytest.raises(ValueError, match="h <= 0.05"):
            solve_layer(k1_half, allen_cahn(), L=12.0, h=0.1)
        nl = Nonlinearity(f=lambda u: u - u ** 2, fprime=lambda u: 1 - 2 * u,
                          fsecond=lambda u: -2.0 + 0 * u)
        with pytest.raises(ValueError, match="admissibility"):
            solve_layer(k1_half, nl, L=12.0, h=0.05)


class TestQualitativeLaws:
    def test_decay_exponents_arctan(self, layer_bank):
        rep = check_layer_decay(layer_bank[("peierls", "0.5")])
        assert rep.passed
        assert rep.gap_exponent == pytest.approx(-1.0, abs=0.2)
        assert rep.slope_exponent == pytest.approx(-2.0, abs=0.2)

    def test_decay_exponents_quarter_order(self, layer_bank):
        rep = check_layer_decay(layer_bank[("allen-cahn", "0.25")])
        assert rep.passed
        assert rep.gap_exponent == pytest.approx(-0.5, abs=0.2)
        assert rep.slope_exponent == pytest.approx(-1.5, abs=0.2)

    @pytest.mark.parametrize("name", ["allen-cahn", "peierls"])
    @pytest.mark.parametrize("gam", ["0.25", "0.5"])
    def test_concavity_of_profile(self, layer_bank, name, gam):
        rep = check_second_derivative(layer_bank[(name, gam)])
        assert rep.strictly_concave_right, rep
        assert rep.vanishing_at_ends, rep

    def test_second_derivative_odd_at_origin(self, layer_bank):
        lay = layer_bank[("allen-cahn", "0.5")]
        mid = len(lay.x) // 2
        assert abs(lay.ddu[mid]) < 1e-10


class TestAsymptoticProfile:
    def test_profile_values(self, layer_bank):
        lay = layer_bank[("allen-cahn", "0.5")]
        U = build_asymptotic_profile(lay)
        assert U(1.0, 1.0) == 0.0
        assert U(2.0, 0.0) == pytest.approx(float(lay.profile(np.sqrt(2.0))), rel=1e-12)
        assert U(0.5, 1.5) == pytest.approx(-U(1.5, 0.5), abs=1e-12)
        # far tail approaches 1 through the fitted algebraic law
        assert U(100.0, 0.0) == pytest.approx(1.0, abs=0.02)
        assert U(100.0, 0.0) < 1.0

    def test_profile1d_tail_rule(self):
        p = Profile1D(x=np.linspace(-2, 2, 5), values=np.linspace(-0.9, 0.9, 5),
                      tail_limit=1.0, tail_amplitude=0.5, tail_power=1.0)
        assert p(4.0) == pytest.approx(1.0 - 0.5 / 4.0)
        assert p(-4.0) == pytest.approx(-(1.0 - 0.5 / 4.0))
        assert p(0.0) == pytest.approx(0.0)

    def test_csv_dump(self, layer_bank, tmp_path):
        lay = layer_bank[("peierls", "0.5")]
        path = tmp_path / "layer.csv"
        lay.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# {")
        assert lines[1] == "x,u0,du0,ddu0"
        assert len(lines) == 2 + len(lay.x)
