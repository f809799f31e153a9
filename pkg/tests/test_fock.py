import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from qillum.fock import (
    FockMatrix,
    StateSpec,
    TruncationError,
    build_state,
    choose_cutoff,
    closed_form_state,
    dephase,
    displacement_operator,
    helstrom,
    helstrom_thermal_displaced,
    photon_number_pmf,
    required_cutoff,
    trace_norm,
)
from qillum.specfn import laguerre


def _dt_diag(d, e, n):
    # textbook Laguerre law, one element at a time
    y = abs(d) ** 2
    return e**n / (e + 1) ** (n + 1) * math.exp(-y / (e + 1)) * laguerre(n, -y / (e * (e + 1)))


def _pure_helstrom(x):
    return 0.5 * (1.0 - math.sqrt(-math.expm1(-x)))


class TestStateSpec:
    def test_kinds(self):
        assert StateSpec.thermal(0.3).mean_photons == pytest.approx(0.3)
        assert StateSpec.coherent(1 + 1j).mean_photons == pytest.approx(2.0)
        with pytest.raises(ValueError):
            StateSpec("squeezed")
        with pytest.raises(ValueError):
            StateSpec.thermal(-0.1)
        with pytest.raises(ValueError):
            StateSpec("coherent", 1.0, 0.5)

    def test_fock_matrix_is_read_only(self):
        rho = build_state(StateSpec.thermal(0.1), 20)
        with pytest.raises(ValueError):
            rho.data[0, 0] = 0.0

    def test_fock_matrix_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            FockMatrix(np.array([[0.5, 0.1], [0.2, 0.5]]))


class TestBuildState:
    def test_vacuum(self):
        rho = build_state(StateSpec.thermal(0.0), 10).data
        expected = np.zeros((10, 10))
        expected[0, 0] = 1.0
        np.testing.assert_array_equal(rho, expected)

    def test_thermal_geometric(self):
        n_occ = 0.7
        rho = build_state(StateSpec.thermal(n_occ), 120)
        n = np.arange(120)
        np.testing.assert_allclose(rho.diagonal, n_occ**n / (n_occ + 1) ** (n + 1), rtol=1e-12)

    def test_displaced_thermal_diagonal_vs_laguerre(self):
        rho = build_state(StateSpec.displaced_thermal(0.3, 0.2), 40)
        ref = [_dt_diag(0.3, 0.2, n) for n in range(40)]
        np.testing.assert_allclose(rho.diagonal, ref, atol=1e-10)

    def test_truncation_error(self):
        with pytest.raises(TruncationError):
            build_state(StateSpec.coherent(3.0), 8)

    def test_invalid_cutoff(self):
        with pytest.raises(ValueError):
            build_state(StateSpec.thermal(0.1), 0)

    @settings(max_examples=25, deadline=None)
    @given(
        r=st.floats(0.0, 3.0),
        phi=st.floats(-math.pi, math.pi),
        e=st.floats(0.0, 1.0),
    )
    def test_positive_unit_trace(self, r, phi, e):
        spec = StateSpec.displaced_thermal(r * complex(math.cos(phi), math.sin(phi)), e)
        rho = build_state(spec, required_cutoff(spec))
        rho.check()

    def test_displacement_operator_vs_expm(self):
        dim, d = 30, 0.7 - 0.4j
        a = np.diag(np.sqrt(np.arange(1, dim)), 1)
        ref = expm(d * a.T - np.conj(d) * a)
        np.testing.assert_allclose(displacement_operator(d, dim), ref, atol=1e-12)


class TestClosedForm:
    @pytest.mark.parametrize("d", [0.3, 1.2 + 0.5j, -2.0j, 3.0])
    @pytest.mark.parametrize("e", [0.0, 0.2, 1.0])
    @pytest.mark.parametrize("extra", [0, 25])
    def test_matches_conjugation(self, d, e, extra):
        spec = StateSpec.displaced_thermal(d, e)
        c = max(choose_cutoff(spec), required_cutoff(spec)) + extra
        np.testing.assert_allclose(closed_form_state(spec, c).data, build_state(spec, c).data, atol=1e-10)

    def test_diagonal_equals_pmf(self):
        spec = StateSpec.displaced_thermal(0.5, 0.1)
        c = choose_cutoff(spec)
        np.testing.assert_allclose(build_state(spec, c).diagonal, photon_number_pmf(spec, c - 1), atol=1e-12)


class TestPhotonNumberPmf:
    def test_coherent_is_poisson(self):
        d = 1.3
        p = photon_number_pmf(StateSpec.coherent(d), 30)
        n = np.arange(31)
        ref = np.exp(-(d**2) + 2 * n * math.log(d) - np.array([math.lgamma(k + 1) for k in n]))
        np.testing.assert_allclose(p, ref, rtol=1e-12)

    def test_thermal_is_geometric(self):
        e = 2.5
        p = photon_number_pmf(StateSpec.thermal(e), 50)
        n = np.arange(51)
        np.testing.assert_allclose(p, e**n / (e + 1) ** (n + 1), rtol=1e-12)

    def test_matches_build_state(self):
        spec = StateSpec.displaced_thermal(0.3, 0.2)
        np.testing.assert_allclose(photon_number_pmf(spec, 39), build_state(spec, 40).diagonal, atol=1e-10)

    def test_large_occupancy_no_overflow(self):
        p = photon_number_pmf(StateSpec.displaced_thermal(2.0, 20.0), 1500)
        assert np.all(np.isfinite(p))
        assert p.sum() == pytest.approx(1.0, abs=1e-12)

    def test_required_cutoff_meets_tolerance(self):
        spec = StateSpec.displaced_thermal(0.0, 20.0)
        c = required_cutoff(spec, 1e-10)
        assert 1 - photon_number_pmf(spec, c - 1).sum() <= 1e-10
        # the plain heuristic is not enough for a broad thermal law
        assert c > choose_cutoff(spec)


class TestDephase:
    def test_idempotent_on_diagonal(self):
        rho = build_state(StateSpec.thermal(0.4), 30)
        np.testing.assert_array_equal(dephase(rho).data, rho.data)

    def test_coherent_to_poisson(self):
        rho = dephase(build_state(StateSpec.coherent(1.0), 30))
        n = np.arange(30)
        ref = np.exp(-1.0) / np.array([math.factorial(k) for k in n], dtype=float)
        np.testing.assert_allclose(rho.diagonal, ref, atol=1e-12)
        assert not np.any(rho.data - np.diag(rho.diagonal))


class TestHelstrom:
    def test_identical(self):
        rho = build_state(StateSpec.displaced_thermal(0.4, 0.3), 30)
        assert helstrom(rho, rho) == 0.5

    def test_vacuum_vs_coherent(self):
        vac = build_state(StateSpec.thermal(0.0), 40)
        coh = build_state(StateSpec.coherent(1.0), 40)
        assert helstrom(vac, coh) == pytest.approx(_pure_helstrom(1.0), abs=1e-9)
        assert helstrom(vac, coh) == pytest.approx(0.102470, abs=1e-6)

    def test_vacuum_vs_dephased_coherent(self):
        vac = build_state(StateSpec.thermal(0.0), 40)
        coh = dephase(build_state(StateSpec.coherent(1.0), 40))
        assert helstrom(vac, coh) == pytest.approx(math.exp(-1.0) / 2, abs=1e-12)

    def test_trace_norm_of_difference(self):
        a = build_state(StateSpec.thermal(0.0), 20).data
        b = build_state(StateSpec.coherent(0.8), 20).data
        # pure states: ||a - b||_1 = 2 sqrt(1 - |<a|b>|^2)
        assert trace_norm(a - b) == pytest.approx(2 * math.sqrt(-math.expm1(-0.64)), abs=1e-10)

    def test_cutoff_mismatch(self):
        with pytest.raises(ValueError):
            helstrom(build_state(StateSpec.thermal(0.1), 10), build_state(StateSpec.thermal(0.1), 11))

    @pytest.mark.parametrize("x", [0.5, 2.0, 10.0, 30.0, 48.0])
    def test_structured_pure_limit(self, x):
        # relative precision far below machine epsilon of the error itself
        c = int(x + 12 * math.sqrt(x) + 40)
        val = helstrom_thermal_displaced(0.0, math.sqrt(x), 0.0, c)
        ref = _pure_helstrom(x) if x < 20 else 0.25 * math.exp(-x) * (1 + 0.25 * math.exp(-x))
        assert val == pytest.approx(ref, rel=1e-6)

    @pytest.mark.parametrize("x", [0.3, 3.0, 9.0])
    def test_structured_matches_generic(self, x):
        n_s, e = 0.02, 0.05
        d = math.sqrt(x)
        c = max(required_cutoff(StateSpec.thermal(n_s), 1e-13), required_cutoff(StateSpec.displaced_thermal(d, e), 1e-13))
        generic = helstrom(build_state(StateSpec.thermal(n_s), c), build_state(StateSpec.displaced_thermal(d, e), c))
        assert helstrom_thermal_displaced(n_s, d, e, c) == pytest.approx(generic, rel=1e-9, abs=1e-15)
