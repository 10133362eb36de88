import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diracsurf.errors import ConfigError, NotPositiveDefinite, ThetaZeroDivision
from diracsurf.grid import Lattice
from diracsurf.thetafun import (
    CONSTANT_KEYS,
    JacobianPointData,
    PeriodMatrix,
    SpectralCoordinates,
    baker_akhiezer,
    finite_zone_potentials,
    reality_check,
    surface_from_points,
    theta,
    theta_directional,
    theta_gradient,
)


def siegel(g, seed):
    """Random symmetric matrix with positive definite imaginary part."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(g, g))
    a = rng.normal(size=(g, g))
    return (x + x.T) / 2 + 1j * (a @ a.T / g + 0.6 * np.eye(g))


def random_u(g, seed, scale=0.7):
    rng = np.random.default_rng(seed + 1000)
    return scale * (rng.normal(size=g) + 1j * rng.normal(size=g))


def cauchy_gradient(u, omega, r=0.05, n=32):
    """Holomorphic derivative from a circle stencil (trapezoidal Cauchy formula)."""
    g = len(u)
    w = r * np.exp(2j * np.pi * np.arange(n) / n)
    out = np.zeros(g, complex)
    for j in range(g):
        pts = u + w[:, None] * np.eye(g)[j]
        out[j] = np.mean(theta(pts, omega) / w)
    return out


def central_gradient(u, omega, h=1e-3):
    g = len(u)
    out = np.zeros(g, complex)
    for j in range(g):
        e = h * np.eye(g)[j]
        f = lambda s: complex(theta(u + s * e, omega))
        out[j] = (8 * (f(1) - f(-1)) - (f(2) - f(-2))) / (12 * h)
    return out


genus = st.integers(1, 3)
seed = st.integers(0, 10_000)


class TestPeriodMatrix:
    def test_square_torus(self):
        pm = PeriodMatrix([[1j]])
        assert pm.g == 1 and pm.lambda_min == pytest.approx(1.0)

    def test_asymmetric(self):
        with pytest.raises(ConfigError):
            PeriodMatrix([[1j, 0.1], [0.2, 1j]])

    def test_not_positive(self):
        with pytest.raises(NotPositiveDefinite):
            PeriodMatrix([[1j, 0], [0, -1j]])

    def test_theta_rejects_bad_omega(self):
        with pytest.raises(NotPositiveDefinite):
            theta([0.1], [[0.5 + 0j]])

    def test_radius_grows_with_tol(self):
        pm = PeriodMatrix(siegel(2, 3))
        assert pm.radius(1e-30) > pm.radius(1e-6) >= 1


class TestTheta:
    def test_odd_half_period(self):
        assert abs(theta(0.5 + 0.5j, [[1j]])) < 1e-12

    def test_value_at_zero(self):
        # Jacobi: theta(0 | i) = pi^(1/4) / Gamma(3/4)
        from math import gamma, pi

        assert theta(0.0, [[1j]]) == pytest.approx(pi**0.25 / gamma(0.75), rel=1e-14)

    def test_scalar_and_batch_shapes(self):
        om = siegel(2, 0)
        pts = np.stack([random_u(2, s) for s in range(5)])
        batch = theta(pts, om)
        assert batch.shape == (5,)
        assert np.allclose(batch, [theta(p, om) for p in pts], rtol=1e-14)

    @settings(max_examples=25, deadline=None)
    @given(g=genus, s=seed)
    def test_even(self, g, s):
        om, u = siegel(g, s), random_u(g, s)
        assert abs(theta(-u, om) - theta(u, om)) < 1e-10 * max(1, abs(theta(u, om)))

    @settings(max_examples=25, deadline=None)
    @given(g=genus, s=seed, m=st.lists(st.integers(-2, 2), min_size=3, max_size=3))
    def test_periodic(self, g, s, m):
        om, u = siegel(g, s), random_u(g, s)
        shifted = theta(u + np.array(m[:g]), om)
        assert abs(shifted - theta(u, om)) < 1e-10 * max(1, abs(theta(u, om)))

    @settings(max_examples=25, deadline=None)
    @given(g=genus, s=seed, n=st.lists(st.integers(-1, 1), min_size=3, max_size=3))
    def test_quasi_periodic(self, g, s, n):
        om, u = siegel(g, s), random_u(g, s)
        n = np.array(n[:g])
        factor = np.exp(-1j * np.pi * (n @ om @ n) - 2j * np.pi * (n @ u))
        lhs = theta(u + om @ n, om)
        rhs = factor * theta(u, om)
        assert abs(lhs - rhs) < 1e-10 * max(1, abs(rhs))

    @pytest.mark.parametrize("g", [1, 2, 3])
    def test_doubling_radius(self, g, monkeypatch):
        om, u = siegel(g, 11), random_u(g, 11)
        tol = 1e-12
        base = theta(u, om, tol)
        original = PeriodMatrix.radius
        monkeypatch.setattr(PeriodMatrix, "radius", lambda self, t: 2 * original(self, t))
        assert abs(theta(u, om, tol) - base) < tol * max(1, abs(base))

    def test_large_imaginary_argument(self):
        # centring the box keeps the sum accurate far from the real axis
        om, u = 0.3 + 1.1j, 0.2 + 7.3j
        n = np.arange(-60, 61)
        direct = np.sum(np.exp(1j * np.pi * om * n * n + 2j * np.pi * n * u))
        assert theta(u, [[om]]) == pytest.approx(direct, rel=1e-12)


class TestThetaGradient:
    @pytest.mark.parametrize("g", [1, 2, 3])
    def test_zero_at_origin(self, g):
        assert np.max(np.abs(theta_gradient(np.zeros(g), siegel(g, g)))) < 1e-13

    @pytest.mark.parametrize("g,s", [(1, 0), (2, 1), (2, 7), (3, 2), (3, 9)])
    def test_central_difference(self, g, s):
        om, u = siegel(g, s), random_u(g, s)
        ref = central_gradient(u, om)
        assert np.max(np.abs(theta_gradient(u, om) - ref)) < 1e-8 * max(1, np.max(np.abs(ref)))

    @pytest.mark.parametrize("g,s", [(1, 4), (2, 5), (3, 6)])
    def test_circle_stencil(self, g, s):
        om, u = siegel(g, s), random_u(g, s)
        ref = cauchy_gradient(u, om)
        assert np.max(np.abs(theta_gradient(u, om) - ref)) < 1e-10 * max(1, np.max(np.abs(ref)))

    def test_nonzero_at_odd_half_period(self):
        assert abs(theta_gradient(0.5 + 0.5j, [[1j]])[0]) > 1.0

    def test_directional_orders(self):
        om, u, d = siegel(2, 3), random_u(2, 3), np.array([0.3, -1.1 + 0.2j])
        t0, t1 = theta_directional(u, om, d, 1)
        assert t0 == pytest.approx(theta(u, om), rel=1e-14)
        assert t1 == pytest.approx(theta_gradient(u, om) @ d, rel=1e-12)
        h = 1e-3
        second = (theta(u + h * d, om) - 2 * theta(u, om) + theta(u - h * d, om)) / h**2
        assert theta_directional(u, om, d, 2)[2] == pytest.approx(second, rel=1e-5)


# ---------------------------------------------------------------------------------
# genus-0 limits


def genus_zero(c1=1.0, c2=1.0, **consts):
    k = {key: 0j for key in CONSTANT_KEYS}
    k.update(consts)
    empty = np.zeros(0)
    return SpectralCoordinates(
        g=0, omega=np.zeros((0, 0)), a_inf_plus=empty, a_inf_minus=empty, u1_plus=empty,
        u1_minus=empty, u3_plus_plus_minus=empty, a_Q=empty, a_R=empty, a_P=[empty],
        a_Qj=[empty], a_Rj=[empty], delta=empty, eps=empty, consts=k, c1=c1, c2=c2,
    )


ZS = np.array([0.0, 0.3 + 0.1j, -1.2 + 2j, 4.0 - 0.5j])


class TestGenusZero:
    def test_constant_potential(self):
        sc = genus_zero(c1=0.25, c2=0.25, a1_plus=0.7, b1_plus=0.7, a1_minus=-0.2j, b1_minus=-0.2j)
        u, v = finite_zone_potentials(sc, ZS, np.conj(ZS))
        assert np.allclose(u, 0.25, atol=1e-15) and np.allclose(v, 0.25, atol=1e-15)

    def test_exponential_potential(self):
        sc = genus_zero(c1=2.0, a1_plus=0.5)
        u, _ = finite_zone_potentials(sc, ZS, np.conj(ZS))
        assert np.allclose(u, 2.0 * np.exp(0.5 * ZS), rtol=1e-14)

    def test_plane_waves(self):
        sc = genus_zero()
        k = 0.4 - 1.3j
        p = JacobianPointData(np.zeros(0), k, 1 / k)
        psi1, psi2 = baker_akhiezer(sc, p, ZS, np.conj(ZS))
        assert np.allclose(psi1, np.exp(k * ZS + np.conj(ZS) / k), rtol=1e-14)
        assert np.allclose(psi2, psi1, rtol=1e-14)

    def test_plane_wave_solves_free_dirac(self):
        # with U = V = 0 each component is (anti)holomorphic: psi1 = e^{kz}, psi2 = e^{zbar/k}
        sc = genus_zero(c1=0.0, c2=0.0)
        k = 2.0 + 0.5j
        p1 = baker_akhiezer(sc, JacobianPointData(np.zeros(0), k, 0j), ZS, np.conj(ZS))[0]
        p2 = baker_akhiezer(sc, JacobianPointData(np.zeros(0), 0j, 1 / k), ZS, np.conj(ZS))[1]
        assert np.allclose(p1, np.exp(k * ZS)) and np.allclose(p2, np.exp(np.conj(ZS) / k))

    def test_single_point_surface_is_plane(self):
        sc = genus_zero(c1=0.0, c2=0.0)
        lat = Lattice(1, 1j)
        s, d, _ = surface_from_points(sc, [JacobianPointData(np.zeros(0), 0j, 0j)], [1.0], lat, (8, 8))
        x = s.array()
        z = lat.points((8, 8))
        # psi = (1, 1): Phi = -(z - zbar) = -2iy, X3 = 2x
        assert np.allclose(x, [-2 * z.imag, 0 * z.real, 2 * z.real], atol=1e-13)
        assert np.allclose(d, (-2j, -2j, -2j), atol=1e-13)

    def test_point_count_mismatch(self):
        with pytest.raises(ConfigError):
            surface_from_points(genus_zero(), [], [], Lattice(1, 1j), (8, 8))


# ---------------------------------------------------------------------------------
# validation of spectral coordinates


def square_curve_data(**overrides):
    """Minimal consistent genus-1 data on the square curve (only invariants matter here)."""
    eps = 0.5 + 0.5j
    p1, p2 = 0.2 + 0.3j, -0.2 - 0.3j
    doc = dict(
        g=1, omega=[[1j]], a_inf_plus=[0.0], a_inf_minus=[eps], u1_plus=[-1.0], u1_minus=[1.0],
        u3_plus_plus_minus=[0.0], a_Q=[p1 + p2 - eps], a_R=[p1 + p2], a_P=[[p1], [p2]],
        a_Qj=[[p1 + p2 - eps], [eps]], a_Rj=[[p1 + p2], [0.0]], delta=[eps], eps=[eps],
        consts={k: 0j for k in CONSTANT_KEYS},
    )
    doc.update(overrides)
    return doc


class TestSpectralCoordinates:
    def test_valid(self):
        sc = SpectralCoordinates(**square_curve_data())
        assert sc.checks["theta_eps"] < 1e-12 and sc.checks["linear_equivalence"] < 1e-12

    def test_even_half_period_rejected(self):
        with pytest.raises(ConfigError):
            SpectralCoordinates(**square_curve_data(eps=[0.5]))

    def test_linear_equivalence(self):
        d = square_curve_data()
        d["a_P"] = [[0.21 + 0.3j], [-0.2 - 0.3j]]
        with pytest.raises(ConfigError):
            SpectralCoordinates(**d)

    def test_equivalence_mod_lattice_accepted(self):
        d = square_curve_data()
        d["a_P"] = [[0.2 + 1.3j], [-1.2 - 0.3j]]
        SpectralCoordinates(**d)

    def test_missing_constant(self):
        d = square_curve_data()
        d["consts"] = {k: 0j for k in CONSTANT_KEYS[:-1]}
        with pytest.raises(ConfigError):
            SpectralCoordinates(**d)

    def test_supplied_constant_mismatch_warns(self):
        sc = SpectralCoordinates(**square_curve_data())
        with pytest.warns(UserWarning, match="c1"):
            SpectralCoordinates(**square_curve_data(c1=sc.c1 * 1.01 + 1))

    def test_supplied_constant_match_silent(self):
        sc = SpectralCoordinates(**square_curve_data())
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            SpectralCoordinates(**square_curve_data(c1=sc.c1, c2=sc.c2))

    def test_json_round_trip(self):
        sc = SpectralCoordinates(**square_curve_data(consts={k: 0.1 * i + 0.2j for i, k in enumerate(CONSTANT_KEYS)}))
        back = SpectralCoordinates.from_json(sc.to_json())
        assert back.consts == sc.consts and back.c1 == sc.c1 and back.c2 == sc.c2
        assert np.array_equal(back.omega.omega, sc.omega.omega)
        assert all(np.array_equal(a, b) for a, b in zip(back.a_P, sc.a_P))

    def test_json_encodes_complex_pairs(self):
        doc = json.loads(SpectralCoordinates(**square_curve_data()).to_json())
        assert doc["eps"] == [[0.5, 0.5]] and doc["omega"] == [[[0.0, 1.0]]]

    def test_json_unknown_key(self):
        doc = json.loads(SpectralCoordinates(**square_curve_data()).to_json())
        doc["extra"] = 1
        with pytest.raises(ConfigError):
            SpectralCoordinates.from_json(json.dumps(doc))

    def test_json_missing_key(self):
        doc = json.loads(SpectralCoordinates(**square_curve_data()).to_json())
        del doc["delta"]
        with pytest.raises(ConfigError):
            SpectralCoordinates.from_json(json.dumps(doc))

    def test_pole_reported(self):
        sc = SpectralCoordinates(**square_curve_data())
        # U has a pole where A(inf_-) + F2 hits the zero eps of theta, i.e. at F2 = 0
        z0 = complex((sc.a_R - sc.delta)[0] / sc.u1_plus[0])
        zs = np.array([z0, z0 + 0.5])
        with pytest.raises(ThetaZeroDivision):
            finite_zone_potentials(sc, zs, np.zeros(2))


class TestRealityCheck:
    def test_equal_real(self):
        u = np.array([[0.1, 0.2], [0.3, 0.4]])
        assert reality_check(u, u) == (0.0, 0.0)

    def test_asymmetric(self):
        u = np.array([0.1, 0.2 + 0.1j])
        d_uv, d_re = reality_check(u, u + 0.5)
        assert d_uv == pytest.approx(0.5) and d_re == pytest.approx(0.2)
