import numpy as np
import pytest

from diracsurf.grid import GridField, Lattice


def smooth_random_field(lattice, shape, rng, band=3, complex_=True, multipliers=(1, 1)):
    """Random trigonometric polynomial with modes |p|, |q| <= band (well below Nyquist)."""
    n, m = shape
    coeffs = np.zeros(shape, dtype=complex)
    for q in range(-band, band + 1):
        for p in range(-band, band + 1):
            c = rng.normal() + (1j * rng.normal() if complex_ else 0)
            coeffs[q % n, p % m] = c / (1 + p * p + q * q)
    vals = np.fft.ifft2(coeffs) * coeffs.size
    if not complex_:
        vals = vals.real
    f = GridField(lattice, vals)
    if multipliers != (1, 1):
        from diracsurf.grid import floquet_exponent, unit_coordinates

        th = [floquet_exponent(mu) for mu in multipliers]
        s, t = unit_coordinates(shape)
        f = GridField(
            lattice, vals * np.exp(2j * np.pi * (th[0] * s + th[1] * t)), multipliers=multipliers
        )
    return f


@pytest.fixture
def rng():
    return np.random.default_rng(20260916)


@pytest.fixture
def unit_square():
    return Lattice(1, 1j)


@pytest.fixture
def skew_lattice():
    return Lattice(1.3 + 0.1j, 0.4 + 0.9j)
