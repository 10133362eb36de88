import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diracsurf.errors import DegenerateGrid
from diracsurf.grid import Lattice
from diracsurf.spectrum import (
    GalerkinFamily,
    Quasimomentum,
    ScanResult,
    SpectralSlice,
    assemble_dk,
    constant_potential_singular_bound,
    contour_cells,
    hausdorff,
    indicator,
    mode_indices,
    mode_vectors,
    quotient_by_dual,
    scan_slice,
    trace_zero_set,
)
from diracsurf.surfaces import CLIFFORD, torus_of_revolution
from diracsurf.weierstrass import PotentialField, spinor_from_immersion

SQUARE = Lattice(1, 1j)
SKEW = Lattice(1.2, 0.3 + 0.9j)


def constant(c, lat=SQUARE, shape=(8, 8)):
    return PotentialField.constant(lat, shape, c)


@pytest.fixture(scope="module")
def clifford_u():
    _, u = spinor_from_immersion(torus_of_revolution(CLIFFORD, 64, 64))
    return u


def analytic_cells(scan, centres, radius, samples=4000, inset=0.0):
    """Closed-form zero set (circles or points) in cell units.

    Points are kept inside the window shrunk by ``inset`` cells; a negative
    inset keeps a margin outside it.
    """
    h = np.array(scan.cell)
    lo = np.array([scan.t1[0], scan.t2[0]]) + inset * h
    hi = np.array([scan.t1[-1], scan.t2[-1]]) - inset * h
    if radius == 0:
        pts = np.column_stack([centres.real, centres.imag])
    else:
        th = np.linspace(0, 2 * np.pi, samples, endpoint=False)
        circ = centres[:, None] + radius * np.exp(1j * th)[None, :]
        pts = np.column_stack([circ.real.ravel(), circ.imag.ravel()])
    keep = np.all((pts >= lo) & (pts <= hi), axis=1)
    return (pts[keep] - np.array([scan.t1[0], scan.t2[0]])) / h


def zero_set_distance(traced, scan, centres, radius):
    """Hausdorff distance in cells; boundary effects excluded on both sides."""
    from scipy.spatial.distance import directed_hausdorff

    outer = analytic_cells(scan, centres, radius, inset=-3)
    inner = analytic_cells(scan, centres, radius, inset=1)
    assert len(inner) > 0
    return max(directed_hausdorff(traced, outer)[0], directed_hausdorff(inner, traced)[0])


def per_mode_symmetry(M):
    """Matrix S with D_{-k} = S conj(D_k) S^{-1}: (c1, c2)[n] -> (c2[-n], -c1[-n])."""
    p, q = mode_indices(M)
    n = p.size
    flip = np.array([np.flatnonzero((p == -pi) & (q == -qi))[0] for pi, qi in zip(p, q)])
    s = np.zeros((2 * n, 2 * n))
    s[np.arange(n), n + flip] = 1
    s[n + np.arange(n), flip] = -1
    return s


class TestAssembly:
    def test_free_kernel_at_origin(self):
        a = assemble_dk(constant(0.0), Quasimomentum(0, 0), 1)
        assert a.shape == (18, 18)
        p, q = mode_indices(1)
        zero = np.flatnonzero((p == 0) & (q == 0))[0]
        assert np.all(a[:, [zero, 9 + zero]] == 0)
        assert np.all(a[[zero, 9 + zero], :] == 0)
        # only the mode-diagonal 2x2 blocks are populated
        off = a.copy()
        idx = np.arange(9)
        for i, j in [(0, 0), (0, 9), (9, 0), (9, 9)]:
            off[idx + i, idx + j] = 0
        assert np.all(off == 0)

    @pytest.mark.parametrize("lat", [SQUARE, SKEW])
    def test_constant_potential_per_mode(self, lat):
        c, M = 0.7, 3
        k = Quasimomentum(0.13, -0.21)
        a = assemble_dk(constant(c, lat), k, M)
        kap = mode_vectors(lat, M)
        w = np.pi * np.abs(kap + k.k1 + 1j * k.k2)
        expected = np.sort(np.concatenate([c + w, c - w]))
        assert np.allclose(np.sort(np.linalg.eigvalsh(a)), expected, atol=1e-12)
        det_blocks = np.prod(c * c - w * w)
        assert np.linalg.det(a).real == pytest.approx(det_blocks, rel=1e-9)

    def test_hermitian_for_real_data(self, clifford_u):
        a = assemble_dk(clifford_u, Quasimomentum(0.05, -0.02, 0.3), 4)
        assert np.max(np.abs(a - a.conj().T)) < 1e-15

    def test_conjugation_symmetry(self, clifford_u):
        M = 4
        k = Quasimomentum(0.05, -0.02, 0.1)
        s = per_mode_symmetry(M)
        a = assemble_dk(clifford_u, k, M)
        b = assemble_dk(clifford_u, Quasimomentum(-k.k1, -k.k2, k.lam), M)
        assert np.max(np.abs(b - s @ a.conj() @ s.T)) < 1e-15

    def test_convolution_of_a_single_harmonic(self):
        # U = cos(2 pi x) couples modes p and p +- 1 with weight 1/2
        lat = SQUARE
        x = lat.points((8, 8)).real
        u = PotentialField.from_values(lat, np.cos(2 * np.pi * x))
        a = assemble_dk(u, Quasimomentum(0, 0), 2)
        p, q = mode_indices(2)
        i = np.flatnonzero((p == 0) & (q == 1))[0]
        j = np.flatnonzero((p == 1) & (q == 1))[0]
        assert a[i, j] == pytest.approx(0.5)
        assert a[i, i] == pytest.approx(0)


class TestIndicator:
    def test_free_origin(self):
        assert indicator(constant(0.0), Quasimomentum(0, 0), 3) < 1e-12

    @settings(max_examples=20, deadline=None)
    @given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-1, 1))
    def test_constant_potential_oracle(self, k1, k2, c):
        k = Quasimomentum(k1, k2)
        assert indicator(constant(c, SKEW), k, 2) == pytest.approx(
            constant_potential_singular_bound(c, SKEW, 2, k), abs=1e-12
        )

    def test_complex_quasimomentum_oracle(self):
        k = Quasimomentum(0.1 + 0.2j, -0.3 + 0.05j, 0.1j)
        assert indicator(constant(0.4), k, 2) == pytest.approx(
            constant_potential_singular_bound(0.4, SQUARE, 2, k), abs=1e-12
        )

    def test_dual_lattice_invariance_band_limited(self):
        from diracsurf.grid import unit_coordinates

        s, t = unit_coordinates((16, 16))
        u = PotentialField.from_values(SKEW, 0.3 + 0.2 * np.cos(2 * np.pi * s) + 0.1 * np.sin(2 * np.pi * (s + t)))
        fam = GalerkinFamily(u, 6)
        d1, d2 = SKEW.dual().generators
        k = Quasimomentum(0.1, -0.2)
        for shift in (d1, d2, d1 + d2, -2 * d2):
            moved = Quasimomentum(k.k1 + shift.real, k.k2 + shift.imag)
            assert abs(fam.indicator(k) - fam.indicator(moved)) < 1e-10

    def test_dual_lattice_invariance_clifford(self, clifford_u):
        # the Clifford potential is analytic, not band-limited: M = 16 resolves it
        fam = GalerkinFamily(clifford_u, 16)
        d1, d2 = clifford_u.lattice.dual().generators
        k = Quasimomentum(0.03, 0.05)
        for shift in (d1, d2, d1 - d2):
            moved = Quasimomentum(k.k1 + shift.real, k.k2 + shift.imag)
            assert abs(fam.indicator(k) - fam.indicator(moved)) < 1e-10

    def test_reality_symmetry(self, clifford_u):
        fam = GalerkinFamily(clifford_u, 5)
        k = Quasimomentum(0.031, -0.047, 0.02)
        assert fam.indicator(k) == pytest.approx(fam.indicator(Quasimomentum(-k.k1, -k.k2, k.lam)), abs=1e-13)

    def test_truncation_convergence_band_limited(self):
        from diracsurf.grid import unit_coordinates

        s, t = unit_coordinates((16, 16))
        u = PotentialField.from_values(SKEW, 0.3 + 0.2 * np.cos(2 * np.pi * s) + 0.1 * np.sin(2 * np.pi * (s + t)))
        k = Quasimomentum(0.11, 0.07)
        vals = [indicator(u, k, M) for M in (4, 6, 8)]
        assert abs(vals[1] - vals[0]) < 1e-8 and abs(vals[2] - vals[1]) < 1e-8

    def test_truncation_convergence_clifford(self, clifford_u):
        # analytic potential: the M -> M + 2 change decays geometrically
        k = Quasimomentum(0.0, 0.0)
        vals = [indicator(clifford_u, k, M) for M in (6, 8, 10, 12)]
        steps = np.abs(np.diff(vals))
        assert np.all(steps[1:] < steps[:-1] / 10)
        assert steps[-1] < 1e-6

    def test_refinement_decreases_on_spectrum(self, clifford_u):
        from scipy.optimize import minimize_scalar

        fine = GalerkinFamily(clifford_u, 12)
        # locate a zero along k2 = 0 with the finest truncation
        res = minimize_scalar(
            lambda t: fine.indicator(Quasimomentum(t, 0.0), fast=True),
            bounds=(0.0, 0.16),
            method="bounded",
            options={"xatol": 1e-12},
        )
        k = Quasimomentum(res.x, 0.0)
        vals = [indicator(clifford_u, k, M) for M in (2, 4, 6, 8, 12)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-6

    def test_fast_path_matches_svd(self, clifford_u):
        sl = SpectralSlice.real_k((-0.1, 0.07), (-0.05, 0.12))
        fast = scan_slice(clifford_u, sl, (3, 12), 5, workers=1)
        exact = scan_slice(clifford_u, sl, (3, 12), 5, exact=True, workers=1)
        assert np.max(np.abs(fast.values - exact.values)) < 1e-10


class TestQuotient:
    def test_canonical_unchanged(self):
        k = Quasimomentum(0.1, -0.2, 0.3)
        assert quotient_by_dual(k, SQUARE) == k

    @given(st.integers(-3, 3), st.integers(-3, 3))
    def test_shift_invariant(self, a, b):
        d1, d2 = SKEW.dual().generators
        k = Quasimomentum(0.1 + 0.5j, -0.2 - 0.1j, 0.2)
        kappa = a * d1 + b * d2
        moved = Quasimomentum(k.k1 + kappa.real, k.k2 + kappa.imag, k.lam)
        x, y = quotient_by_dual(k, SKEW), quotient_by_dual(moved, SKEW)
        assert np.allclose(x.vector, y.vector, atol=1e-12)
        assert np.allclose(np.imag(x.vector), np.imag(k.vector))


def _synthetic_scan(values, t1, t2):
    return ScanResult(SpectralSlice.real_k((t1[0], t1[-1]), (t2[0], t2[-1])), t1, t2, values, 0)


class TestTracing:
    def test_single_point(self):
        t = np.linspace(-1, 1, 41)
        k0 = (0.23, -0.31)
        vals = np.hypot(t[:, None] - k0[0], t[None, :] - k0[1])
        contours = trace_zero_set(_synthetic_scan(vals, t, t), threshold=0.04)
        assert len(contours) == 1 and contours[0].closed
        centre = contours[0].params.mean(axis=0)
        assert np.allclose(centre, k0, atol=0.01)
        assert np.max(np.hypot(*(contours[0].params - k0).T)) < 0.05

    def test_threshold_monotone(self, clifford_u):
        scan = scan_slice(clifford_u, SpectralSlice.real_k((-0.16, 0.16), (-0.16, 0.16)), (24, 24), 4)
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator((scan.t1, scan.t2), scan.values)
        low, high = 0.02, 0.05
        for c in trace_zero_set(scan, low):
            assert np.all(interp(c.params) <= high)

    def test_degenerate_grid(self):
        with pytest.raises(DegenerateGrid):
            trace_zero_set(_synthetic_scan(np.ones((1, 5)), np.zeros(1), np.arange(5.0)))
        with pytest.raises(DegenerateGrid):
            scan_slice(constant(0.0), SpectralSlice.real_k((0, 1), (0, 1)), (1, 4), 1)

    @pytest.mark.parametrize("lat,c", [(SQUARE, 0.0), (SQUARE, 0.5), (SKEW, 0.0), (SKEW, -0.8)])
    def test_constant_potential_zero_set(self, lat, c):
        M = 3
        sl = SpectralSlice.real_k((-0.9, 0.8), (-0.7, 1.0))
        scan = scan_slice(constant(c, lat), sl, (48, 48), M)
        traced = contour_cells(trace_zero_set(scan), scan)
        assert zero_set_distance(traced, scan, -mode_vectors(lat, M), abs(c) / np.pi) < 1.0

    def test_lambda_axis_slice(self):
        # k = 0, lam running: zeros at c +- pi |kappa|
        c, M = 0.3, 2
        sl = SpectralSlice((0, 0, 0), (0, 0, 1), (0.05, 0, 0), (-4, 4), (-1, 1))
        scan = scan_slice(constant(c), sl, (161, 5), M)
        col = scan.values[:, 2]
        minima = scan.t1[1:-1][(col[1:-1] < col[:-2]) & (col[1:-1] < col[2:])]
        w = np.unique(np.round(np.pi * np.abs(mode_vectors(SQUARE, M)), 12))
        expected = np.sort(np.concatenate([c + w, c - w]))
        expected = np.unique(expected[np.abs(expected) < 3.9])
        assert len(minima) == len(expected)
        assert np.max(np.abs(minima - expected)) <= scan.cell[0]

    def test_off_axis_lambda_has_no_zeros(self, clifford_u):
        # D_k is Hermitian for real k, so |D_k - lam| >= |Im lam|
        sl = SpectralSlice((0, 0, 0.5j), (1, 0, 0), (0, 1, 0), (-0.2, 0.2), (-0.2, 0.2))
        scan = scan_slice(clifford_u, sl, (9, 9), 4)
        assert scan.values.min() >= 0.5 - 1e-12
        assert trace_zero_set(scan) == []
