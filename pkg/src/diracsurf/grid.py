"""Lattices, sampled fields on flat tori and their spectral calculus.

A :class:`GridField` holds samples ``values[j, i] = f(z0 + (i/M) g1 + (j/N) g2)``
on the fundamental parallelogram of a lattice ``Z g1 + Z g2``.  Beyond plain
periodic functions it carries two kinds of quasi-periodicity:

* ``multipliers`` ``(mu1, mu2)``: ``f(z + g_a) = mu_a f(z)``.  ``(+-1, +-1)`` is a
  spinor character; any other nonzero pair is a Floquet multiplier.
* ``drift`` ``(d1, d2)``: ``f(z + g_a) = f(z) + d_a`` (only with trivial
  multipliers); this is how translation periods of immersions and of
  antiderivatives are stored.

Derivatives use the Wirtinger convention ``d = (d_x - i d_y)/2`` and
``dbar = (d_x + i d_y)/2``, evaluated exactly on the band-limited interpolant.
"""

from __future__ import annotations

import cmath
import functools
from dataclasses import dataclass

import numpy as np

from .errors import NotClosed

TWO_PI_I = 2j * np.pi


def pairing(a: complex, b: complex) -> float:
    """Euclidean pairing ``Re a Re b + Im a Im b`` of two complex numbers."""
    return a.real * b.real + a.imag * b.imag


@dataclass(frozen=True)
class Lattice:
    """Rank-2 lattice ``Z gamma1 + Z gamma2`` with positively oriented basis."""

    gamma1: complex
    gamma2: complex

    def __post_init__(self):
        object.__setattr__(self, "gamma1", complex(self.gamma1))
        object.__setattr__(self, "gamma2", complex(self.gamma2))
        if (self.gamma1.conjugate() * self.gamma2).imag <= 0:
            raise ValueError(
                "lattice basis must satisfy Im(conj(gamma1) * gamma2) > 0, got "
                f"{self.gamma1}, {self.gamma2}"
            )

    @property
    def area(self) -> float:
        return (self.gamma1.conjugate() * self.gamma2).imag

    @property
    def generators(self) -> tuple[complex, complex]:
        return (self.gamma1, self.gamma2)

    def dual(self) -> "Lattice":
        return dual_lattice(self)

    def points(self, shape, origin: complex = 0j) -> np.ndarray:
        """Complex sample positions ``z[j, i]`` for a grid of ``shape = (N, M)``."""
        s, t = unit_coordinates(shape)
        return origin + s * self.gamma1 + t * self.gamma2


def dual_lattice(lat: Lattice) -> Lattice:
    """Generators ``g*_b`` with ``pairing(g_a, g*_b) = delta_ab``."""
    g = np.array(
        [[lat.gamma1.real, lat.gamma1.imag], [lat.gamma2.real, lat.gamma2.imag]]
    )
    ginv = np.linalg.inv(g)
    return Lattice(complex(ginv[0, 0], ginv[1, 0]), complex(ginv[0, 1], ginv[1, 1]))


def unit_coordinates(shape) -> tuple[np.ndarray, np.ndarray]:
    """Lattice coordinates ``(s, t)`` in ``[0, 1)`` of each sample, both ``(N, M)``."""
    n, m = shape
    t, s = np.meshgrid(np.arange(n) / n, np.arange(m) / m, indexing="ij")
    return s, t


def floquet_exponent(mu: complex) -> complex:
    """``theta`` with ``exp(2 pi i theta) = mu`` and ``Re theta`` in ``(-1/2, 1/2]``."""
    mu = complex(mu)
    if mu == 0:
        raise ValueError("Floquet multiplier must be nonzero")
    theta = cmath.log(mu) / TWO_PI_I
    # cmath.log has Im in (-pi, pi], hence Re(theta) in (-1/2, 1/2] already;
    # snap round-off around the exact characters.
    if abs(theta.imag) < 1e-15:
        theta = complex(theta.real, 0.0)
    if abs(theta.real + 0.5) < 1e-15:
        theta = complex(0.5, theta.imag)
    return theta


def _check_shape(shape):
    n, m = shape
    if n < 4 or m < 4 or n % 2 or m % 2:
        raise ValueError(f"grid shape must be even and >= 4 in both axes, got {shape}")


@functools.lru_cache(maxsize=64)
def _symbols(lat: Lattice, shape, theta1: complex, theta2: complex):
    """Fourier symbols of d and dbar on the twisted mode grid, plus the twist."""
    n, m = shape
    dual = dual_lattice(lat)
    p = np.fft.fftfreq(m, 1.0 / m) + theta1
    q = np.fft.fftfreq(n, 1.0 / n) + theta2
    Q, P = np.meshgrid(q, p, indexing="ij")
    d = np.pi * 1j * (P * dual.gamma1.conjugate() + Q * dual.gamma2.conjugate())
    dbar = np.pi * 1j * (P * dual.gamma1 + Q * dual.gamma2)
    # The Nyquist row/column of an untwisted even grid has no well-defined
    # odd derivative; drop it.
    if theta1 == 0:
        d[:, m // 2] = 0
        dbar[:, m // 2] = 0
    if theta2 == 0:
        d[n // 2, :] = 0
        dbar[n // 2, :] = 0
    s, t = unit_coordinates(shape)
    twist = np.exp(TWO_PI_I * (theta1 * s + theta2 * t))
    for arr in (d, dbar, twist):
        arr.setflags(write=False)
    return d, dbar, twist


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples of a (quasi-)periodic function on a uniform lattice grid."""

    lattice: Lattice
    values: np.ndarray
    multipliers: tuple = (1, 1)
    drift: tuple = (0, 0)
    origin: complex = 0j

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 2:
            raise ValueError("GridField values must be a 2-D (N, M) array")
        if not np.iscomplexobj(vals):
            vals = vals.astype(np.float64, copy=False)
        else:
            vals = vals.astype(np.complex128, copy=False)
        _check_shape(vals.shape)
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        mult = tuple(complex(x) for x in self.multipliers)
        drift = tuple(complex(x) for x in self.drift)
        if any(x == 0 for x in mult):
            raise ValueError("multipliers must be nonzero")
        if any(drift) and mult != (1, 1):
            raise ValueError("drift is only allowed for fields with trivial multipliers")
        object.__setattr__(self, "multipliers", mult)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "origin", complex(self.origin))

    # -- construction -----------------------------------------------------------

    @classmethod
    def from_function(cls, fn, lattice: Lattice, shape, origin: complex = 0j, **kw):
        z = lattice.points(shape, origin)
        return cls(lattice, fn(z), origin=origin, **kw)

    def like(self, values, multipliers=None, drift=(0, 0)) -> "GridField":
        return GridField(
            self.lattice,
            values,
            self.multipliers if multipliers is None else multipliers,
            drift,
            self.origin,
        )

    # -- descriptors ------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def kind(self) -> str:
        if self.multipliers == (1, 1):
            return "periodic"
        if all(x in (1, -1) for x in self.multipliers):
            return "character"
        return "floquet"

    @property
    def epsilon(self) -> tuple[int, int]:
        if self.kind == "floquet":
            raise ValueError("a Floquet field has no +-1 character")
        return tuple(int(x.real) for x in self.multipliers)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def points(self) -> np.ndarray:
        return self.lattice.points(self.shape, self.origin)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    # -- arithmetic -------------------------------------------------------------

    def _compatible(self, other: "GridField"):
        if (
            other.lattice != self.lattice
            or other.shape != self.shape
            or other.origin != self.origin
        ):
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, GridField):
            self._compatible(other)
            if not np.allclose(other.multipliers, self.multipliers, rtol=1e-12, atol=0):
                raise ValueError("cannot add fields with different multipliers")
            drift = tuple(a + b for a, b in zip(self.drift, other.drift))
            return self.like(self.values + other.values, drift=drift)
        if self.multipliers != (1, 1) and other != 0:
            raise ValueError("adding a constant breaks the quasi-periodicity")
        return self.like(self.values + other, drift=self.drift)

    __radd__ = __add__

    def __neg__(self):
        return self.like(-self.values, drift=tuple(-d for d in self.drift))

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, GridField):
            self._compatible(other)
            if any(self.drift) or any(other.drift):
                raise ValueError("products of drifting fields are not quasi-periodic")
            mult = tuple(a * b for a, b in zip(self.multipliers, other.multipliers))
            return self.like(self.values * other.values, multipliers=mult)
        return self.like(self.values * other, drift=tuple(d * other for d in self.drift))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, GridField):
            self._compatible(other)
            if any(self.drift) or any(other.drift):
                raise ValueError("quotients of drifting fields are not quasi-periodic")
            mult = tuple(a / b for a, b in zip(self.multipliers, other.multipliers))
            return self.like(self.values / other.values, multipliers=mult)
        return self * (1.0 / other)

    def conj(self) -> "GridField":
        return self.like(
            np.conj(self.values),
            multipliers=tuple(np.conj(x) for x in self.multipliers),
            drift=tuple(np.conj(d) for d in self.drift),
        )

    @property
    def real(self) -> "GridField":
        if self.kind != "periodic":
            raise ValueError("real part of a twisted field is not quasi-periodic")
        return self.like(self.values.real, drift=tuple(d.real for d in self.drift))

    @property
    def imag(self) -> "GridField":
        if self.kind != "periodic":
            raise ValueError("imaginary part of a twisted field is not quasi-periodic")
        return self.like(self.values.imag, drift=tuple(d.imag for d in self.drift))

    def abs2(self) -> "GridField":
        return (self * self.conj()).real

    # -- spectral machinery -------------------------------------------------------

    def _exponents(self):
        return tuple(floquet_exponent(m) for m in self.multipliers)

    def symbols(self):
        """``(sym_d, sym_dbar, twist)`` for this field's mode grid."""
        return _symbols(self.lattice, self.shape, *self._exponents())

    def linear_part(self) -> np.ndarray:
        """Samples of ``d1 s + d2 t`` carrying the drift."""
        s, t = unit_coordinates(self.shape)
        return self.drift[0] * s + self.drift[1] * t

    def periodic_part(self) -> np.ndarray:
        """Samples with the drift removed (still twisted by the multipliers)."""
        if any(self.drift):
            return self.values - self.linear_part()
        return self.values

    def fourier(self) -> np.ndarray:
        """Twisted Fourier coefficients: ``f = twist * sum c[q, p] e_{p, q}``."""
        _, _, twist = self.symbols()
        return np.fft.fft2(self.periodic_part() / twist) / self.values.size

    def _apply(self, sym) -> np.ndarray:
        _, _, twist = self.symbols()
        hat = np.fft.fft2(self.periodic_part() / twist)
        return twist * np.fft.ifft2(sym * hat)

    def dz(self) -> "GridField":
        d, _, _ = self.symbols()
        out = self._apply(d)
        if any(self.drift):
            dual = self.lattice.dual()
            out = out + 0.5 * (
                self.drift[0] * dual.gamma1.conjugate()
                + self.drift[1] * dual.gamma2.conjugate()
            )
        return self.like(out)

    def dzbar(self) -> "GridField":
        _, db, _ = self.symbols()
        out = self._apply(db)
        if any(self.drift):
            dual = self.lattice.dual()
            out = out + 0.5 * (self.drift[0] * dual.gamma1 + self.drift[1] * dual.gamma2)
        return self.like(out)

    def dx(self) -> "GridField":
        a, b = self.dz(), self.dzbar()
        return self.like(a.values + b.values)

    def dy(self) -> "GridField":
        a, b = self.dz(), self.dzbar()
        return self.like(1j * (a.values - b.values))

    def mean(self) -> complex:
        return complex(np.mean(self.values))

    def filtered(self, mask: np.ndarray) -> "GridField":
        """Zero the Fourier modes where ``mask`` is False (drift preserved)."""
        _, _, twist = self.symbols()
        hat = np.fft.fft2(self.periodic_part() / twist)
        vals = twist * np.fft.ifft2(np.where(mask, hat, 0))
        if any(self.drift):
            vals = vals + self.linear_part()
        if self.is_real:
            vals = vals.real
        return self.like(vals, drift=self.drift)


def wirtinger_dz(f: GridField) -> GridField:
    return f.dz()


def wirtinger_dzbar(f: GridField) -> GridField:
    return f.dzbar()


def integrate_domain(f: GridField) -> complex:
    """Mean-value quadrature over the fundamental domain, measure ``dx dy``."""
    return f.lattice.area * f.mean()


def as_real(f: GridField, tol: float = 1e-10) -> GridField:
    """Drop a negligible imaginary part; raise if it is not negligible."""
    if f.is_real:
        return f
    scale = max(f.sup(), 1.0)
    if np.max(np.abs(f.values.imag)) > tol * scale:
        raise ValueError("field is not real within tolerance")
    return f.real


@dataclass(frozen=True)
class Complex1Form:
    """The 1-form ``fz dz + fzbar dzbar``."""

    fz: GridField
    fzbar: GridField

    def __post_init__(self):
        self.fz._compatible(self.fzbar)
        if not np.allclose(self.fz.multipliers, self.fzbar.multipliers, rtol=1e-12, atol=0):
            raise ValueError("form components must share their multipliers")

    def sup(self) -> float:
        return max(self.fz.sup(), self.fzbar.sup())

    def closedness_residual(self) -> float:
        """``|dbar fz - d fzbar|_inf`` relative to ``|w|_inf``."""
        scale = self.sup()
        if scale == 0:
            return 0.0
        r = self.fz.dzbar().values - self.fzbar.dz().values
        return float(np.max(np.abs(r)) / scale)


def antiderivative(
    w: Complex1Form, basepoint_value: complex = 0j, tol: float = 1e-8
) -> tuple[GridField, tuple[complex, complex]]:
    """Primitive ``F`` of a closed form with ``F(z0) = basepoint_value``.

    For periodic coefficients ``F = a (z - z0) + b conj(z - z0) + periodic``
    where ``a, b`` are the means of ``fz, fzbar``; the returned field carries
    the translation periods as its drift.  For twisted coefficients the
    primitive is the unique quasi-periodic one, no constant can be added and
    ``basepoint_value`` is ignored; its periods are reported as zero.
    """
    res = w.closedness_residual()
    if res > tol:
        raise NotClosed(f"closedness residual {res:.3e} exceeds tolerance {tol:.1e}")
    fz, fzb = w.fz, w.fzbar
    if any(fz.drift) or any(fzb.drift):
        raise ValueError("form coefficients must not drift")
    d, db, twist = fz.symbols()
    periodic = fz.multipliers == (1, 1)
    a = fz.mean() if periodic else 0j
    b = fzb.mean() if periodic else 0j
    hz = np.fft.fft2((fz.values - a) / twist)
    hzb = np.fft.fft2((fzb.values - b) / twist)
    denom = np.abs(d) ** 2 + np.abs(db) ** 2
    safe = np.where(denom > 0, denom, 1.0)
    hat = np.where(denom > 0, (np.conj(d) * hz + np.conj(db) * hzb) / safe, 0.0)
    per = twist * np.fft.ifft2(hat)
    if not periodic:
        return fz.like(per), (0j, 0j)
    lat = fz.lattice
    rel = lat.points(fz.shape, 0j)
    vals = a * rel + b * np.conj(rel) + per - per[0, 0] + basepoint_value
    periods = (a * lat.gamma1 + b * lat.gamma1.conjugate(), a * lat.gamma2 + b * lat.gamma2.conjugate())
    return fz.like(vals, drift=periods), periods
