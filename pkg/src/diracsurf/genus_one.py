"""Genus-1 finite-zone data on the uniformised curve ``C / (Z + tau Z)``, ``tau = iT``.

The holomorphic differential is ``d zeta`` (alpha = [0, 1], beta = [0, tau]), so
``Omega = tau`` and the Abel map is ``A(P) = zeta(P) - zeta0``.  With
``Lg(w) = d/dw log theta(w + eps)`` (periodic under ``w -> w + 1``, shifted by
``-2 pi i`` under ``w -> w + tau``) the normalised second-kind differentials are

    eta^1_pm = d(c_pm Lg(zeta - zeta_pm))
    eta^3_pm = d(c_pm^3 Lg''/2 - 3 c_pm^4 mu_pm Lg)

for the local parameters ``1/k_pm = w / c_pm + mu_pm w^3``, ``w = zeta - zeta_pm``.

The reality conditions (holomorphic involution ``sigma(zeta) = -zeta``,
antiholomorphic ``tau_r(zeta) = conj(zeta) + (1 + tau) / 2``, differentials
``omega`` and ``omega~`` with the prescribed double poles) force
``inf_+ = 0``, ``inf_- = (1 + tau) / 2``, ``c_- = -conj(c_+)``,
``mu_- = -conj(mu_+)`` and ``D = P + sigma(P)`` with ``P`` a double zero of
``c p(zeta) + conj(c) p(zeta - inf_-) + C`` (``p = -Lg'``) such that the
companion constant of ``omega~`` is imaginary.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError
from .grid import Lattice
from .thetafun import JacobianPointData, SpectralCoordinates, theta_directional


@dataclass(frozen=True)
class EllipticCurveData:
    """Uniformised genus-1 spectral curve with the reality structure built in."""

    T: float = 1.0
    x: float = 0.2
    mu: complex = 0j
    zeta0: complex = 0.31 + 0.17j

    # ------------------------------------------------------------------
    # theta log-derivative and its Laurent data

    @property
    def tau(self) -> complex:
        return 1j * self.T

    @property
    def eps(self) -> complex:
        return (1 + self.tau) / 2

    @property
    def inf_plus(self) -> complex:
        return 0j

    @property
    def inf_minus(self) -> complex:
        return self.eps

    def log_derivatives(self, w):
        """``Lg, Lg', Lg''`` at ``w``."""
        t0, t1, t2, t3 = theta_directional(np.asarray(w) + self.eps, [[self.tau]], 1, 3)
        lg = t1 / t0
        lg1 = t2 / t0 - lg**2
        lg2 = t3 / t0 - 3 * t2 * t1 / t0**2 + 2 * lg**3
        return lg, lg1, lg2

    def laurent(self, order: int = 3, radius: float = 0.1, samples: int = 64) -> np.ndarray:
        """Taylor coefficients ``kappa_n`` of ``Lg(w) - 1/w`` (Cauchy integral on a circle)."""
        w = radius * np.exp(2j * np.pi * np.arange(samples) / samples)
        coef = np.fft.fft(self.log_derivatives(w)[0] - 1 / w) / samples
        return coef[: order + 1] / radius ** np.arange(order + 1)

    # ------------------------------------------------------------------
    # divisor

    def _pp(self, w):
        return -self.log_derivatives(w)[2]

    def _p(self, w):
        return -self.log_derivatives(w)[1]

    def _phase(self, P: complex) -> complex:
        r = -self._pp(P - self.inf_minus) / self._pp(P)
        return complex(np.sqrt(r / abs(r)))

    def _imag_condition(self, P: complex) -> float:
        c = self._phase(P)
        return float((-c * self._p(P) + np.conj(c) * self._p(P - self.inf_minus)).real)

    @cached_property
    def divisor_point(self) -> complex:
        """``P_1`` with ``Re P_1 = x``; ``Im P_1`` solves the imaginary-constant condition."""
        # the double-zero condition reduces to |p'(P)| = |p'(P - inf_-)|; on the square curve
        # it holds on the line Re + Im = 1/2, and in general we bracket along Im for fixed Re
        def mod_condition(y):
            P = self.x + 1j * y
            return abs(self._pp(P - self.inf_minus)) - abs(self._pp(P))

        ys = np.linspace(0.02, 0.98, 97) * self.T
        vals = [mod_condition(y) for y in ys]
        for (y0, v0), (y1, v1) in zip(zip(ys, vals), zip(ys[1:], vals[1:])):
            if np.sign(v0) != np.sign(v1):
                y = brentq(mod_condition, y0, y1, xtol=1e-15, rtol=1e-15)
                P = self.x + 1j * y
                if abs(self._imag_condition(P)) < 1e-9 and self._generic(P):
                    return P
        raise ConfigError(f"no admissible divisor point with Re P = {self.x} on this curve")

    def _generic(self, P: complex) -> bool:
        """Reject points where ``P``, ``sigma(P)``, ``tau_r(P)`` coincide or hit the infinities."""
        lat = lambda v: min(abs(v - m - n * self.tau) for m in (-1, 0, 1) for n in (-1, 0, 1))
        pts = [P, -P, self.antiholomorphic(P)]
        if min(lat(p - q) for i, p in enumerate(pts) for q in pts[i + 1 :]) < 1e-6:
            return False
        return min(lat(P - self.inf_plus), lat(P - self.inf_minus)) > 1e-3

    @cached_property
    def c_plus(self) -> complex:
        return self._phase(self.divisor_point)

    # involutions of the reality structure
    def holomorphic(self, zeta):
        return -np.asarray(zeta)

    def antiholomorphic(self, zeta):
        return np.conj(zeta) + self.eps

    # ------------------------------------------------------------------
    # abelian integrals

    def _local(self):
        cp = self.c_plus
        return (cp, self.mu), (-np.conj(cp), -np.conj(self.mu))

    def _g3(self, w, c, mu):
        lg, _, lg2 = self.log_derivatives(w)
        return c**3 * lg2 / 2 - 3 * c**4 * mu * lg

    def point(self, zeta: complex) -> JacobianPointData:
        (cp, mp), (cm, mm) = self._local()
        z0, zp, zm = self.zeta0, self.inf_plus, self.inf_minus
        L = lambda w: self.log_derivatives(w)[0]
        i1p = cp * (L(zeta - zp) - L(z0 - zp))
        i1m = cm * (L(zeta - zm) - L(z0 - zm))
        i3 = (
            self._g3(zeta - zp, cp, mp) - self._g3(z0 - zp, cp, mp)
            + self._g3(zeta - zm, cm, mm) - self._g3(z0 - zm, cm, mm)
        )
        return JacobianPointData(np.array([zeta - z0]), complex(i1p), complex(i1m), complex(i3))

    def spectral_coordinates(self) -> SpectralCoordinates:
        (cp, mp), (cm, mm) = self._local()
        z0, zp, zm = self.zeta0, self.inf_plus, self.inf_minus
        k0, _, k2 = self.laurent(2)
        L = lambda w: complex(self.log_derivatives(w)[0])
        g3 = lambda w, c, mu: complex(self._g3(w, c, mu))
        consts = {
            "a1_plus": cp * (k0 - L(z0 - zp)),
            "a1_minus": cm * (k0 - L(z0 - zm)),
            "b1_plus": cp * (L(zm - zp) - L(z0 - zp)),
            "b1_minus": cm * (L(zp - zm) - L(z0 - zm)),
            "a3_plus": cp**3 * k2 - 3 * cp**4 * mp * k0 - g3(z0 - zp, cp, mp),
            "a3_minus": cm**3 * k2 - 3 * cm**4 * mm * k0 - g3(z0 - zm, cm, mm),
            "b3_plus": g3(zm - zp, cp, mp) - g3(z0 - zp, cp, mp),
            "b3_minus": g3(zp - zm, cm, mm) - g3(z0 - zm, cm, mm),
        }
        P1 = self.divisor_point
        a_p = [P1 - z0, -P1 - z0]
        a_inf_p, a_inf_m = zp - z0, zm - z0
        a_q1 = a_p[0] + a_p[1] - a_inf_m
        a_r1 = a_p[0] + a_p[1] - a_inf_p
        return SpectralCoordinates(
            g=1,
            omega=[[self.tau]],
            a_inf_plus=[a_inf_p],
            a_inf_minus=[a_inf_m],
            u1_plus=[-cp],
            u1_minus=[-cm],
            u3_plus_plus_minus=[3 * cp**4 * mp + 3 * cm**4 * mm],
            a_Q=[a_q1],
            a_R=[a_r1],
            a_P=[[a] for a in a_p],
            a_Qj=[[a_q1], [a_inf_m]],
            a_Rj=[[a_r1], [a_inf_p]],
            delta=[self.eps],
            eps=[self.eps],
            consts=consts,
        )

    # ------------------------------------------------------------------
    # geometry of the potential

    def potential_lattice(self, length: float = 1.0) -> Lattice:
        """Lattice of ``U``: ``U`` is constant along ``conj(c)`` and has period ``T`` across.

        ``U`` depends on ``s = Im(c z)`` only; ``s -> s + T/2`` flips its sign.
        """
        cbar = np.conj(self.c_plus)
        return Lattice(cbar * length, 1j * cbar * self.T)

    def flow_matched(self, shape=(64, 8)) -> "EllipticCurveData":
        """Copy with ``mu`` chosen so ``U_t`` matches :func:`diracsurf.mnv.mnv_rhs` exactly.

        ``mu`` only moves the potential along ``s``; the flow's auxiliary field has
        zero mode ``mean(U^2)``, which fixes one translation speed.  The speed is
        affine in real ``mu`` and is matched with two evaluations.
        """
        from .mnv import mnv_rhs
        from .thetafun import finite_zone_potentials, finite_zone_time_derivative
        from .weierstrass import PotentialField

        lat = self.potential_lattice()
        z = lat.points(shape)
        kt = 2j * np.pi * np.fft.fftfreq(shape[0], 1.0 / shape[0])
        kt[shape[0] // 2] = 0

        def mismatch(mu):
            sc = replace(self, mu=mu).spectral_coordinates()
            u0 = finite_zone_potentials(sc, z, np.conj(z))[0].real
            ut = finite_zone_time_derivative(sc, z, np.conj(z)).real
            rhs = mnv_rhs(PotentialField.from_values(lat, u0)).values
            # project on the translation direction along the second generator
            ds = np.fft.ifft(kt[:, None] * np.fft.fft(u0, axis=0), axis=0).real
            return float(np.sum((ut - rhs) * ds) / np.sum(ds * ds))

        m0, m1 = mismatch(0.0), mismatch(1.0)
        return replace(self, mu=complex(-m0 / (m1 - m0)))
