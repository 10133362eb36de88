"""Spinor (Weierstrass) representation of conformally immersed tori.

Conventions used throughout:

* ``Phi = X2 + i X1``; a spinor reproduces the surface through
  ``Phi = -int(psi1^2 dz - psi2^2 dzbar)`` and
  ``X3 = int(psi1 conj(psi2) dz + conj(psi1) psi2 dzbar)``.
* In the other direction ``psi1^2 = -dPhi``, ``psi2^2 = dbar Phi`` and the two
  square roots are tied by ``psi1 conj(psi2) = dX3``.
* ``psi`` solves ``d psi2 + U psi1 = 0``, ``-dbar psi1 + U psi2 = 0`` with real
  ``U = H D / 2``.  ``H = (EN - 2FM + GL) / (2(EG - F^2))`` is taken with the
  normal ``X_x x X_y / |X_x x X_y|``; with this orientation the outward unit
  cylinder ``(cos x, sin x, y)`` has ``H = -1/2`` and ``U = -1/4``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChart, NonPositiveMetric, NotConformal, ZeroPotential
from .grid import (
    Complex1Form,
    GridField,
    Lattice,
    antiderivative,
    integrate_domain,
    unit_coordinates,
)

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class SurfaceImmersion:
    """Coordinates of an immersed surface sampled on a lattice grid.

    Each coordinate is a real :class:`GridField` whose drift holds its
    translation periods along ``(gamma1, gamma2)``.  ``quasi_periodic`` is
    False for surfaces assembled from Floquet spinors with nontrivial
    multipliers: their samples are exact but spectral derivatives are not
    available on this grid.
    """

    x1: GridField
    x2: GridField
    x3: GridField
    conformal: bool = True
    quasi_periodic: bool = True

    def __post_init__(self):
        for c in self.coords[1:]:
            self.x1._compatible(c)
        for c in self.coords:
            if not c.is_real:
                raise ValueError("immersion coordinates must be real fields")

    @classmethod
    def from_array(cls, lattice: Lattice, xyz, periods=None, origin: complex = 0j, **kw):
        """Build from a ``(3, N, M)`` array of samples and a ``3 x 2`` period matrix."""
        xyz = np.asarray(xyz, dtype=float)
        periods = np.zeros((3, 2)) if periods is None else np.asarray(periods, dtype=float)
        fields = [
            GridField(lattice, xyz[a], drift=tuple(periods[a]), origin=origin) for a in range(3)
        ]
        return cls(*fields, **kw)

    @property
    def coords(self) -> tuple[GridField, GridField, GridField]:
        return (self.x1, self.x2, self.x3)

    @property
    def lattice(self) -> Lattice:
        return self.x1.lattice

    @property
    def shape(self):
        return self.x1.shape

    @property
    def periods(self) -> np.ndarray:
        """``3 x 2`` real matrix of translation periods."""
        return np.array([[d.real for d in c.drift] for c in self.coords])

    def array(self) -> np.ndarray:
        return np.stack([c.values for c in self.coords])

    def _require_derivatives(self):
        if not self.quasi_periodic:
            raise ValueError("surface is not quasi-periodic on its grid; derivatives unavailable")

    def gradient(self):
        """``(X_x, X_y)`` as ``(3, N, M)`` arrays."""
        self._require_derivatives()
        xs = np.stack([c.dx().values.real for c in self.coords])
        ys = np.stack([c.dy().values.real for c in self.coords])
        return xs, ys

    def dz(self) -> np.ndarray:
        self._require_derivatives()
        return np.stack([c.dz().values for c in self.coords])

    def translated(self, offset) -> "SurfaceImmersion":
        offset = np.asarray(offset, dtype=float)
        fields = [c + float(o) for c, o in zip(self.coords, offset)]
        return SurfaceImmersion(*fields, conformal=self.conformal, quasi_periodic=self.quasi_periodic)


@dataclass(frozen=True)
class Spinor:
    """Pair ``(psi1, psi2)`` sharing one multiplier system (character or Floquet)."""

    psi1: GridField
    psi2: GridField

    def __post_init__(self):
        self.psi1._compatible(self.psi2)
        if not np.allclose(self.psi1.multipliers, self.psi2.multipliers, rtol=1e-10, atol=0):
            raise ValueError("spinor components must share their multipliers")

    @property
    def lattice(self) -> Lattice:
        return self.psi1.lattice

    @property
    def multipliers(self):
        return self.psi1.multipliers

    @property
    def epsilon(self) -> tuple[int, int]:
        return self.psi1.epsilon

    def __mul__(self, c) -> "Spinor":
        return Spinor(self.psi1 * c, self.psi2 * c)

    __rmul__ = __mul__

    def __neg__(self) -> "Spinor":
        return Spinor(-self.psi1, -self.psi2)


@dataclass(frozen=True)
class PotentialField:
    """Real periodic potential ``U``."""

    u: GridField

    def __post_init__(self):
        u = self.u
        if u.kind != "periodic" or any(u.drift):
            raise ValueError("a potential must be a periodic field")
        if not u.is_real:
            scale = max(u.sup(), 1.0)
            if np.max(np.abs(u.values.imag)) > 1e-8 * scale:
                raise ValueError("potential is not real")
            object.__setattr__(self, "u", u.real)

    @classmethod
    def from_values(cls, lattice: Lattice, values, origin: complex = 0j) -> "PotentialField":
        return cls(GridField(lattice, np.asarray(values), origin=origin))

    @classmethod
    def constant(cls, lattice: Lattice, shape, c: float) -> "PotentialField":
        return cls(GridField(lattice, np.full(shape, float(c))))

    @property
    def lattice(self) -> Lattice:
        return self.u.lattice

    @property
    def shape(self):
        return self.u.shape

    @property
    def values(self) -> np.ndarray:
        return self.u.values


# --------------------------------------------------------------------------------
# geometry of an immersion


def conformality_residual(s: SurfaceImmersion) -> float:
    """``max |sum (X^a_z)^2|`` relative to ``max sum |X^a_z|^2``."""
    xz = s.dz()
    num = np.max(np.abs(np.sum(xz**2, axis=0)))
    den = np.max(np.sum(np.abs(xz) ** 2, axis=0))
    return float(num / den)


def _fundamental_forms(s: SurfaceImmersion):
    s._require_derivatives()
    xs = [c.dx() for c in s.coords]
    ys = [c.dy() for c in s.coords]
    xx = np.stack([f.dx().values.real for f in xs])
    xy = np.stack([f.dy().values.real for f in xs])
    yy = np.stack([f.dy().values.real for f in ys])
    xs = np.stack([f.values.real for f in xs])
    ys = np.stack([f.values.real for f in ys])
    cross = np.cross(xs, ys, axis=0)
    area = np.linalg.norm(cross, axis=0)
    if np.min(area) <= 0:
        raise NonPositiveMetric("immersion is singular (vanishing area element)")
    n = cross / area
    E, F, G = (xs * xs).sum(0), (xs * ys).sum(0), (ys * ys).sum(0)
    L, M, N = (xx * n).sum(0), (xy * n).sum(0), (yy * n).sum(0)
    return E, F, G, L, M, N, area, n


def surface_normal(s: SurfaceImmersion) -> np.ndarray:
    return _fundamental_forms(s)[7]


def area_density(s: SurfaceImmersion) -> GridField:
    """``|X_x x X_y|``, equal to ``D^2`` for a conformal chart."""
    return GridField(s.lattice, _fundamental_forms(s)[6], origin=s.x1.origin)


def surface_mean_curvature(s: SurfaceImmersion) -> GridField:
    """Mean curvature from the first and second fundamental forms."""
    E, F, G, L, M, N, _, _ = _fundamental_forms(s)
    h = (E * N - 2 * F * M + G * L) / (2 * (E * G - F * F))
    return GridField(s.lattice, h, origin=s.x1.origin)


def surface_gauss_curvature(s: SurfaceImmersion) -> GridField:
    E, F, G, L, M, N, _, _ = _fundamental_forms(s)
    return GridField(s.lattice, (L * N - M * M) / (E * G - F * F), origin=s.x1.origin)


def metric_from_coordinates(s: SurfaceImmersion) -> GridField:
    """Conformal factor ``D = sqrt(2 sum |X^a_z|^2)``."""
    xz = s.dz()
    return GridField(s.lattice, np.sqrt(2 * np.sum(np.abs(xz) ** 2, axis=0)), origin=s.x1.origin)


# --------------------------------------------------------------------------------
# surface -> spinor


def _align_signs(c1: np.ndarray, c2: np.ndarray, axis: int, ambiguity: float):
    """Cumulative +-1 factors making neighbours along ``axis`` point the same way."""
    a1 = np.moveaxis(c1, axis, -1)
    a2 = np.moveaxis(c2, axis, -1)
    inner = (a1[..., :-1] * np.conj(a1[..., 1:]) + a2[..., :-1] * np.conj(a2[..., 1:])).real
    norms = np.sqrt(
        (np.abs(a1[..., :-1]) ** 2 + np.abs(a2[..., :-1]) ** 2)
        * (np.abs(a1[..., 1:]) ** 2 + np.abs(a2[..., 1:]) ** 2)
    )
    cos = inner / norms
    if np.any(np.abs(cos) < ambiguity):
        raise DegenerateChart(
            "spinor branch continuation is ambiguous (grid under-resolves the Gauss map)"
        )
    steps = np.sign(cos)
    signs = np.concatenate([np.ones(steps.shape[:-1] + (1,)), np.cumprod(steps, axis=-1)], axis=-1)
    return np.moveaxis(signs, -1, axis)


def continue_branch(c1: np.ndarray, c2: np.ndarray, order: str = "rows", ambiguity: float = 0.5):
    """Make a pointwise-defined-up-to-sign spinor continuous on the grid.

    ``order="rows"`` continues down the first column and then along every row;
    ``"columns"`` does the transpose.  Returns the re-signed arrays.
    """
    if order == "rows":
        first = _align_signs(c1[:, :1], c2[:, :1], 0, ambiguity)
        c1, c2 = c1 * first, c2 * first
        signs = _align_signs(c1, c2, 1, ambiguity)
    elif order == "columns":
        first = _align_signs(c1[:1, :], c2[:1, :], 1, ambiguity)
        c1, c2 = c1 * first, c2 * first
        signs = _align_signs(c1, c2, 0, ambiguity)
    else:
        raise ValueError("order must be 'rows' or 'columns'")
    return c1 * signs, c2 * signs


def _detect_character(c1: np.ndarray, c2: np.ndarray, snap_tol: float = 0.1) -> tuple[int, int]:
    eps = []
    for axis in (1, 0):
        a1 = np.moveaxis(c1, axis, -1)
        a2 = np.moveaxis(c2, axis, -1)
        # linear extrapolation one cell past the edge lands on z + gamma
        e1 = 2 * a1[..., -1] - a1[..., -2]
        e2 = 2 * a2[..., -1] - a2[..., -2]
        inner = (e1 * np.conj(a1[..., 0]) + e2 * np.conj(a2[..., 0])).real
        norm = np.sqrt((np.abs(e1) ** 2 + np.abs(e2) ** 2) * (np.abs(a1[..., 0]) ** 2 + np.abs(a2[..., 0]) ** 2))
        r = inner / norm
        value = float(np.mean(r))
        if abs(abs(value) - 1) > snap_tol or np.any(np.sign(r) != np.sign(value)):
            raise DegenerateChart(f"spinor character along generator is not +-1 (got {value:.3f})")
        eps.append(1 if value > 0 else -1)
    return eps[0], eps[1]


def spinor_candidates(s: SurfaceImmersion):
    """Pointwise spinor, defined up to an overall sign at each sample."""
    xz = s.dz()
    dphi = xz[1] + 1j * xz[0]
    dbphi = np.conj(xz[1]) + 1j * np.conj(xz[0])  # dbar(X2 + i X1) for real X
    dx3 = xz[2]
    use1 = np.abs(dphi) >= np.abs(dbphi)
    r1 = np.sqrt(-dphi)
    r2 = np.sqrt(dbphi)
    with np.errstate(divide="ignore", invalid="ignore"):
        c1 = np.where(use1, r1, dx3 / np.conj(r2))
        c2 = np.where(use1, np.conj(dx3 / r1), r2)
    return c1, c2


def spinor_from_immersion(
    s: SurfaceImmersion, tol: float = DEFAULT_TOL, order: str = "rows"
) -> tuple[Spinor, PotentialField]:
    """Spinor and potential of a conformal torus immersion.

    The square roots of ``-dPhi`` and ``dbar Phi`` are never taken where their
    radicand is the smaller of the two: there the other component is computed
    from ``psi1 conj(psi2) = dX3``.  Since ``|psi1|^2 + |psi2|^2 = D > 0`` the
    resulting pair never vanishes, and its global sign is fixed by continuation
    along a spanning tree of the grid.  The potential comes from the second
    fundamental form, independently of the spinor.
    """
    res = conformality_residual(s)
    if res > tol:
        raise NotConformal(f"conformality residual {res:.3e} exceeds {tol:.1e}")
    c1, c2 = spinor_candidates(s)
    c1, c2 = continue_branch(c1, c2, order)
    eps = _detect_character(c1, c2)
    lat, origin = s.lattice, s.x1.origin
    psi = Spinor(
        GridField(lat, c1, multipliers=eps, origin=origin),
        GridField(lat, c2, multipliers=eps, origin=origin),
    )
    h = surface_mean_curvature(s)
    d = np.sqrt(area_density(s).values)
    u = PotentialField(GridField(lat, h.values * d / 2, origin=origin))
    return psi, u


# --------------------------------------------------------------------------------
# spinor -> surface


def _group_by_multiplier(parts, rtol=1e-9):
    groups = []
    for mult, fz, fzb in parts:
        for g in groups:
            if np.allclose(g[0], mult, rtol=rtol, atol=rtol):
                g[1] = g[1] + fz.values
                g[2] = g[2] + fzb.values
                break
        else:
            groups.append([mult, fz.values.copy(), fzb.values.copy()])
    return groups


def _is_trivial(mult, rtol=1e-9) -> bool:
    return np.allclose(mult, (1, 1), rtol=rtol, atol=rtol)


def _integrate_groups(groups, template: GridField, tol: float):
    """Sum of primitives of the grouped closed forms; drift from the periodic group."""
    total = np.zeros(template.shape, dtype=complex)
    drift = (0j, 0j)
    closed = True
    for mult, fz, fzb in groups:
        trivial = _is_trivial(mult)
        mult = (1, 1) if trivial else mult
        w = Complex1Form(template.like(fz, multipliers=mult), template.like(fzb, multipliers=mult))
        F, periods = antiderivative(w, 0j, tol)
        total = total + F.values
        if trivial:
            drift = periods
        else:
            closed = False
    return total, drift, closed


def _bilinear_parts(terms):
    """Closed-form pieces of the two integrands for ``psi = sum a_i psi^(i)``."""
    phi_parts, x3_parts = [], []
    for i, (ai, pi) in enumerate(terms):
        for j, (aj, pj) in enumerate(terms):
            mu_i, mu_j = np.array(pi.multipliers), np.array(pj.multipliers)
            if j >= i:
                c = ai * aj * (1 if i == j else 2)
                phi_parts.append(
                    (tuple(mu_i * mu_j), c * pi.psi1 * pj.psi1, -c * pi.psi2 * pj.psi2)
                )
            c = ai * np.conj(aj)
            x3_parts.append(
                (tuple(mu_i * np.conj(mu_j)), c * pi.psi1 * pj.psi2.conj(), c * pj.psi1.conj() * pi.psi2)
            )
    return phi_parts, x3_parts


def immersion_from_terms(terms, origin=(0.0, 0.0, 0.0), tol: float = DEFAULT_TOL) -> SurfaceImmersion:
    """Surface of ``psi = sum a_i psi^(i)`` for spinors with possibly different multipliers."""
    origin = np.asarray(origin, dtype=float)
    template = terms[0][1].psi1
    phi_parts, x3_parts = _bilinear_parts(terms)
    phi_int, phi_drift, closed_phi = _integrate_groups(_group_by_multiplier(phi_parts), template, tol)
    x3_int, x3_drift, closed_x3 = _integrate_groups(_group_by_multiplier(x3_parts), template, tol)
    phi = -phi_int
    phi_drift = tuple(-d for d in phi_drift)
    quasi = closed_phi and closed_x3
    lat, z0 = template.lattice, template.origin
    # primitives vanish at z0 only for the periodic group; re-anchor the sum
    phi = phi - phi[0, 0]
    x3_int = x3_int - x3_int[0, 0]
    coords = [phi.imag + origin[0], phi.real + origin[1], x3_int.real + origin[2]]
    if quasi:
        drifts = [
            tuple(d.imag for d in phi_drift),
            tuple(d.real for d in phi_drift),
            tuple(d.real for d in x3_drift),
        ]
    else:
        drifts = [(0, 0)] * 3
    fields = [GridField(lat, c, drift=d, origin=z0) for c, d in zip(coords, drifts)]
    return SurfaceImmersion(*fields, quasi_periodic=quasi)


def immersion_from_spinor(
    psi: Spinor, u: PotentialField | None = None, origin=(0.0, 0.0, 0.0), tol: float = DEFAULT_TOL
) -> SurfaceImmersion:
    """Integrate the three closed forms built from ``psi`` with ``X(z0) = origin``.

    ``u`` is optional: when given, the Dirac residual is checked first so a
    failure is reported against the potential rather than as a non-closed form.
    """
    if u is not None:
        r = dirac_residual(psi, u)
        if r > max(tol, 1e-6):
            from .errors import NotClosed

            raise NotClosed(f"Dirac residual {r:.3e}: integrands of the representation are not closed")
    return immersion_from_terms([(1.0, psi)], origin=origin, tol=tol)


# --------------------------------------------------------------------------------
# induced geometry and residuals


def induced_metric(psi: Spinor) -> GridField:
    """``D = |psi1|^2 + |psi2|^2`` (a periodic real field)."""
    vals = np.abs(psi.psi1.values) ** 2 + np.abs(psi.psi2.values) ** 2
    return GridField(psi.lattice, vals, origin=psi.psi1.origin)


def _positive(d: GridField) -> np.ndarray:
    vals = np.real(d.values)
    if np.min(vals) <= 0:
        raise NonPositiveMetric("metric factor D must be strictly positive")
    return vals


def gauss_curvature(d: GridField) -> GridField:
    """``K = -(4 / D^2) d dbar log D``."""
    vals = _positive(d)
    logd = d.like(np.log(vals))
    lap = logd.dz().dzbar().values.real
    return d.like(-4.0 * lap / vals**2)


def mean_curvature(u: PotentialField, d: GridField) -> GridField:
    vals = _positive(d)
    return d.like(2.0 * u.values / vals)


def dirac_residual(psi: Spinor, u: PotentialField) -> float:
    """``|d psi2 + U psi1|_inf + |-dbar psi1 + U psi2|_inf`` over ``|psi|_inf``."""
    uv = u.values
    r1 = psi.psi2.dz().values + uv * psi.psi1.values
    r2 = -psi.psi1.dzbar().values + uv * psi.psi2.values
    scale = np.sqrt(np.max(np.abs(psi.psi1.values) ** 2 + np.abs(psi.psi2.values) ** 2))
    if scale == 0:
        return 0.0
    return float((np.max(np.abs(r1)) + np.max(np.abs(r2))) / scale)


def eisenhart_residual(psi1: GridField, u: PotentialField, delta: float = 1e-6) -> float:
    """Residual of ``d dbar psi1 - (dU / U) dbar psi1 + U^2 psi1`` over ``|psi1|_inf``.

    Samples with ``|U| < delta * |U|_inf`` are masked out.
    """
    uv = u.values
    umax = np.max(np.abs(uv))
    mask = np.abs(uv) >= delta * umax if umax > 0 else np.zeros(uv.shape, bool)
    if not np.any(mask):
        raise ZeroPotential("potential vanishes on the whole grid")
    dbpsi = psi1.dzbar()
    ddb = dbpsi.dz().values
    du = u.u.dz().values
    with np.errstate(divide="ignore", invalid="ignore"):
        r = ddb - du / uv * dbpsi.values + uv**2 * psi1.values
    scale = psi1.sup()
    return float(np.max(np.abs(r[mask])) / scale) if scale else 0.0


def periodicity_defects(psi: Spinor) -> tuple[complex, complex, complex]:
    """``int psi1^2``, ``int psi2^2``, ``int psi1 conj(psi2)`` against ``dz ^ dzbar``.

    Only the Lambda-periodic part of each integrand contributes; for a
    character spinor that is the whole integrand.
    """
    return periodic_defects_of_terms([(1.0, psi)])


def periodic_defects_of_terms(terms) -> tuple[complex, complex, complex]:
    area = terms[0][1].lattice.area
    out = [0j, 0j, 0j]
    for i, (ai, pi) in enumerate(terms):
        for j, (aj, pj) in enumerate(terms):
            mu_i, mu_j = np.array(pi.multipliers), np.array(pj.multipliers)
            if _is_trivial(tuple(mu_i * mu_j)):
                out[0] += ai * aj * np.mean(pi.psi1.values * pj.psi1.values)
                out[1] += ai * aj * np.mean(pi.psi2.values * pj.psi2.values)
            if _is_trivial(tuple(mu_i * np.conj(mu_j))):
                out[2] += ai * np.conj(aj) * np.mean(pi.psi1.values * np.conj(pj.psi2.values))
    return tuple(complex(-2j * area * v) for v in out)


def defects_from_periods(periods, lattice: Lattice) -> tuple[complex, complex, complex]:
    """Invert the linear map taking the three defects to translation periods.

    Each coordinate's period along ``g`` is ``2 Re(c g)`` with ``c`` the mean
    ``dz``-coefficient of its form; the ``c`` of ``X1, X2, X3`` are
    ``(i/2)(conj(I2) + I1)``, ``(conj(I2) - I1)/2`` and ``I3`` in terms of the
    domain means ``I`` of ``psi1^2, psi2^2, psi1 conj(psi2)``.
    """
    periods = np.asarray(periods, dtype=float)
    g1, g2 = lattice.generators
    # 2 Re(c g) = 2 (Re c Re g - Im c Im g)
    a = 2 * np.array([[g1.real, -g1.imag], [g2.real, -g2.imag]])
    c = [complex(*np.linalg.solve(a, periods[k])) for k in range(3)]
    i1 = -1j * c[0] - c[1]
    i2 = np.conj(-1j * c[0] + c[1])
    i3 = c[2]
    return tuple(complex(-2j * lattice.area * v) for v in (i1, i2, i3))


# --------------------------------------------------------------------------------
# Willmore functional


def willmore(s: SurfaceImmersion) -> float:
    """``int H^2 dmu`` from the fundamental forms of the immersion."""
    E, F, G, L, M, N, area, _ = _fundamental_forms(s)
    h = (E * N - 2 * F * M + G * L) / (2 * (E * G - F * F))
    return float(integrate_domain(GridField(s.lattice, h * h * area)).real)


def willmore_of_potential(u: PotentialField) -> float:
    """``4 int U^2 dx dy``."""
    return float(4 * integrate_domain(u.u * u.u).real)


def potential_of_immersion(s: SurfaceImmersion) -> PotentialField:
    h = surface_mean_curvature(s)
    d = np.sqrt(area_density(s).values)
    return PotentialField(GridField(s.lattice, h.values * d / 2, origin=s.x1.origin))
