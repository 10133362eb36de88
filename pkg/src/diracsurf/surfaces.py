"""Analytic example surfaces and conformal maps of R^3."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PoleOnSurface, RegularityLost
from .grid import GridField, Lattice, unit_coordinates
from .weierstrass import SurfaceImmersion, area_density, surface_normal


@dataclass(frozen=True)
class RevolutionTorusSpec:
    """Circle of radius ``r`` revolved around an axis at distance ``R``."""

    R: float
    r: float

    def __post_init__(self):
        if not (self.R > self.r > 0):
            raise ValueError("need R > r > 0")

    @property
    def w_period(self) -> float:
        """Length of the conformal meridian coordinate, ``int_0^{2pi} r / (R + r cos v) dv``."""
        return 2 * np.pi * self.r / np.sqrt(self.R**2 - self.r**2)

    @property
    def lattice(self) -> Lattice:
        return Lattice(2 * np.pi, 1j * self.w_period)

    def meridian_angle(self, w):
        """Solution of ``dv/dw = (R + r cos v) / r`` with ``v(0) = 0``, continued monotonically."""
        R, r = self.R, self.r
        k = np.sqrt((R + r) / (R - r))
        theta = np.asarray(w) * np.sqrt(R * R - r * r) / (2 * r)
        # tan(v/2) = k tan(theta), unwrapped across the branch cuts of tan
        turns = np.round(theta / np.pi)
        return 2 * (np.arctan(k * np.tan(theta - turns * np.pi)) + turns * np.pi)

    def conformal_factor(self, w):
        return self.R + self.r * np.cos(self.meridian_angle(w))

    def gauss_curvature(self, w):
        v = self.meridian_angle(w)
        return np.cos(v) / (self.r * (self.R + self.r * np.cos(v)))

    def mean_curvature(self, w):
        """With the normal ``X_u x X_w`` (outward): ``H = -(R + 2 r cos v) / (2 r (R + r cos v))``."""
        v = self.meridian_angle(w)
        rho = self.R + self.r * np.cos(v)
        return -(rho + self.r * np.cos(v)) / (2 * self.r * rho)


CLIFFORD = RevolutionTorusSpec(np.sqrt(2.0), 1.0)


def torus_of_revolution(spec: RevolutionTorusSpec, N: int, M: int, origin: complex = 0j) -> SurfaceImmersion:
    """Torus of revolution in conformal coordinates ``z = u + i w``.

    ``N`` samples along the meridian generator ``i W`` and ``M`` along the
    parallel generator ``2 pi``.
    """
    lat = spec.lattice
    z = lat.points((N, M), origin)
    u, w = z.real, z.imag
    v = spec.meridian_angle(w)
    rho = spec.R + spec.r * np.cos(v)
    xyz = np.stack([rho * np.cos(u), rho * np.sin(u), spec.r * np.sin(v)])
    return SurfaceImmersion.from_array(lat, xyz, origin=origin)


def _require_closed(s: SurfaceImmersion):
    if np.any(s.periods != 0):
        raise ValueError("operation needs a closed surface (all translation periods zero)")


def moebius_invert(s: SurfaceImmersion, center, radius: float, min_distance: float = 1e-6) -> SurfaceImmersion:
    """Inversion ``x -> c + radius^2 (x - c) / |x - c|^2`` of a closed surface."""
    _require_closed(s)
    c = np.asarray(center, dtype=float).reshape(3, 1, 1)
    x = s.array() - c
    d2 = np.sum(x * x, axis=0)
    scale = np.max(np.abs(x))
    if np.sqrt(np.min(d2)) <= min_distance * scale:
        raise PoleOnSurface("inversion center lies on the surface")
    out = c + radius**2 * x / d2
    return SurfaceImmersion.from_array(s.lattice, out, origin=s.x1.origin, conformal=s.conformal)


def perturb(s: SurfaceImmersion, amplitude: float, mode=(1, 0)) -> SurfaceImmersion:
    """Normal bump ``X + a cos(2 pi (m s + n t)) N`` in lattice coordinates ``(s, t)``.

    The result is flagged non-conformal unless ``amplitude == 0``.
    """
    if amplitude == 0:
        return s
    _require_closed(s)
    m, n = mode
    sc, tc = unit_coordinates(s.shape)
    bump = amplitude * np.cos(2 * np.pi * (m * sc + n * tc))
    normal = surface_normal(s)
    out = SurfaceImmersion.from_array(
        s.lattice, s.array() + bump * normal, origin=s.x1.origin, conformal=False
    )
    try:
        new_normal = surface_normal(out)
        density = area_density(out).values
    except Exception as exc:  # singular area element
        raise RegularityLost(str(exc)) from exc
    old_density = area_density(s).values
    if np.min(np.sum(new_normal * normal, axis=0)) <= 0 or np.min(density / old_density) < 1e-3:
        raise RegularityLost("perturbation folds the surface (normal flips or area collapses)")
    return out


def plane(lattice: Lattice, shape, origin: complex = 0j) -> SurfaceImmersion:
    """The chart ``X = (x, 0, y)``; translation periods follow the lattice."""
    z = lattice.points(shape, origin)
    xyz = np.stack([z.real, np.zeros(z.shape), z.imag])
    g1, g2 = lattice.generators
    periods = [[g1.real, g2.real], [0, 0], [g1.imag, g2.imag]]
    return SurfaceImmersion.from_array(lattice, xyz, periods, origin=origin)


def cylinder(height: float, shape, origin: complex = 0j) -> SurfaceImmersion:
    """Unit cylinder ``(cos x, sin x, y)`` over the lattice ``2 pi Z + i height Z``."""
    lat = Lattice(2 * np.pi, 1j * height)
    z = lat.points(shape, origin)
    xyz = np.stack([np.cos(z.real), np.sin(z.real), z.imag])
    periods = [[0, 0], [0, 0], [0, height]]
    return SurfaceImmersion.from_array(lat, xyz, periods, origin=origin)


def field_of(s: SurfaceImmersion, values) -> GridField:
    return GridField(s.lattice, values, origin=s.x1.origin)


# --------------------------------------------------------------------------------
# isothermal resampling


def _unit_wavenumbers(shape):
    n, m = shape
    kt = 2j * np.pi * np.fft.fftfreq(n, 1.0 / n)
    ks = 2j * np.pi * np.fft.fftfreq(m, 1.0 / m)
    kt[n // 2] = 0
    ks[m // 2] = 0
    return kt[:, None], ks[None, :]


def _ds(f, ks):
    return np.fft.ifft(np.fft.fft(f, axis=1) * ks, axis=1)


def _dt(f, kt):
    return np.fft.ifft(np.fft.fft(f, axis=0) * kt, axis=0)


def _fourier_eval(coeffs, s, t):
    """Evaluate the trigonometric interpolant with FFT ``coeffs`` at unit coordinates."""
    n, m = coeffs.shape
    p = np.fft.fftfreq(m, 1.0 / m)
    q = np.fft.fftfreq(n, 1.0 / n)
    c = coeffs.copy()
    c[:, m // 2] = 0  # drop Nyquist: its interpolant is not real-analytic-consistent
    c[n // 2, :] = 0
    es = np.exp(2j * np.pi * np.outer(p, s.ravel()))  # (m, P)
    et = np.exp(2j * np.pi * np.outer(q, t.ravel()))  # (n, P)
    vals = np.einsum("np,np->p", c @ es, et) / coeffs.size
    return vals.reshape(s.shape)


def isothermal_resample(s: SurfaceImmersion, tol: float = 1e-12, newton_tol: float = 1e-13) -> SurfaceImmersion:
    """Resample a closed torus immersion in conformal coordinates.

    The harmonic 1-form ``h`` cohomologous to ``ds`` for the induced metric is
    found by conjugate gradients (spectral operator, constant-coefficient
    preconditioner); ``zeta = int (h + i *h)`` is then a conformal coordinate.
    The output lattice is ``zeta``'s period lattice rotated and scaled so its
    first generator equals ``|gamma1|`` of the input, and the surface is
    resampled on it by Newton inversion and Fourier interpolation.
    """
    from scipy.sparse.linalg import LinearOperator, cg

    from .errors import NumericalError

    _require_closed(s)
    shape = s.shape
    n, m = shape
    kt, ks = _unit_wavenumbers(shape)
    x = s.array()
    xs = np.stack([_ds(c, ks).real for c in x])
    xt = np.stack([_dt(c, kt).real for c in x])
    gss, gst, gtt = (xs * xs).sum(0), (xs * xt).sum(0), (xt * xt).sum(0)
    det = gss * gtt - gst * gst
    if np.min(det) <= 0:
        raise RegularityLost("degenerate metric")
    root = np.sqrt(det)
    # a^{ij} = sqrt(g) g^{ij}
    a_ss, a_st, a_tt = root * gtt / det, -root * gst / det, root * gss / det

    def flux(fs, ft):
        return a_ss * fs + a_st * ft, a_st * fs + a_tt * ft

    def div(vs, vt):
        return (_ds(vs, ks) + _dt(vt, kt)).real

    def apply(phi):
        phi = phi.reshape(shape)
        vs, vt = flux(_ds(phi, ks).real, _dt(phi, kt).real)
        return -div(vs, vt).ravel()

    lap = -(np.mean(a_ss) * ks**2 + 2 * np.mean(a_st) * ks * kt + np.mean(a_tt) * kt**2).real
    null = lap == 0  # constants and the Nyquist lines are in the kernel
    lap[null] = 1.0

    def precondition(r):
        rh = np.fft.fft2(r.reshape(shape))
        rh[null] = 0
        return np.fft.ifft2(rh / lap).real.ravel()

    op = LinearOperator((n * m, n * m), matvec=apply, dtype=float)
    pre = LinearOperator((n * m, n * m), matvec=precondition, dtype=float)
    rhs = div(a_ss, a_st).ravel()
    phi, info = cg(op, rhs, rtol=tol, atol=0.0, M=pre, maxiter=2000)
    if info != 0:
        raise NumericalError("harmonic form solve did not converge")
    phi = phi.reshape(shape)
    hs, ht = 1 + _ds(phi, ks).real, _dt(phi, kt).real
    fs, ft = flux(hs, ht)
    star_s, star_t = -ft, fs
    ws, wt = hs + 1j * star_s, ht + 1j * star_t
    om1, om2 = np.mean(ws), np.mean(wt)
    # periodic part P with dP = (ws - om1) ds + (wt - om2) dt, least squares per mode
    wsh, wth = np.fft.fft2(ws - om1), np.fft.fft2(wt - om2)
    den = np.abs(ks) ** 2 + np.abs(kt) ** 2
    zero = den == 0
    den[zero] = 1.0
    ph = (np.conj(ks) * wsh + np.conj(kt) * wth) / den
    ph[zero] = 0
    p0 = np.fft.ifft2(ph)[0, 0]
    ph[0, 0] = -p0 * ph.size  # anchor zeta(0, 0) = 0
    dps, dpt = ks * ph, kt * ph

    g1 = s.lattice.gamma1
    c = abs(g1) / om1
    new_lat = Lattice(c * om1, c * om2)
    target = new_lat.points(shape) / c

    # Newton: om1 s + om2 t + P(s, t) = target
    basis = np.array([[om1.real, om2.real], [om1.imag, om2.imag]])
    st = np.linalg.solve(basis, np.stack([target.real.ravel(), target.imag.ravel()]))
    sv, tv = st[0].reshape(shape), st[1].reshape(shape)
    for _ in range(50):
        f = om1 * sv + om2 * tv + _fourier_eval(ph, sv, tv) - target
        if np.max(np.abs(f)) < newton_tol * abs(om1):
            break
        js = om1 + _fourier_eval(dps, sv, tv)
        jt = om2 + _fourier_eval(dpt, sv, tv)
        det_j = js.real * jt.imag - jt.real * js.imag
        sv = sv - (jt.imag * f.real - jt.real * f.imag) / det_j
        tv = tv - (-js.imag * f.real + js.real * f.imag) / det_j
    else:
        raise NumericalError("coordinate inversion did not converge")
    out = np.stack([_fourier_eval(np.fft.fft2(comp), sv, tv).real for comp in x])
    return SurfaceImmersion.from_array(new_lat, out, origin=0j)
