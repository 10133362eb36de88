"""Riemann theta functions and finite-zone Dirac data in Jacobian coordinates.

Spectral data enters as Abel images and abelian-integral values.  Nothing here
works with an algebraic curve directly; :mod:`diracsurf.genus_one` derives all
coordinates for a uniformised elliptic curve.

Conventions: ``eta^l_pm`` has principal part ``d(k_pm^l)`` at ``inf_pm`` and zero
alpha-periods, ``U^l_pm = (1 / 2 pi i) * beta-period``.  With these,
``dA / d(1/k_pm) = -U^1_pm`` at ``inf_pm`` (Riemann bilinear relation).
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NotPositiveDefinite, ThetaZeroDivision

# --------------------------------------------------------------------------------
# period matrix and theta sums


@dataclass(frozen=True, eq=False)
class PeriodMatrix:
    omega: np.ndarray

    def __post_init__(self):
        om = np.atleast_2d(np.asarray(self.omega, dtype=complex))
        if om.shape[0] != om.shape[1]:
            raise ConfigError("period matrix must be square")
        if np.max(np.abs(om - om.T)) >= 1e-12:
            raise ConfigError("period matrix must be symmetric")
        try:
            chol = np.linalg.cholesky(om.imag)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite("imaginary part of the period matrix is not positive definite") from exc
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "_chol", chol)

    @property
    def g(self) -> int:
        return self.omega.shape[0]

    @property
    def lambda_min(self) -> float:
        return float(np.linalg.eigvalsh(self.omega.imag)[0])

    def radius(self, tol: float) -> int:
        """Box radius around the dominant index so the neglected tail is below ``tol``."""
        return int(np.ceil(0.5 + np.sqrt(-np.log(tol) / (np.pi * self.lambda_min))))


def _as_period_matrix(omega) -> PeriodMatrix:
    return omega if isinstance(omega, PeriodMatrix) else PeriodMatrix(omega)


def _as_points(u, g: int) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if g == 1 and (u.ndim == 0 or u.shape[-1] != 1):
        u = u[..., None]
    if u.shape[-1] != g:
        raise ConfigError(f"theta arguments need trailing dimension {g}")
    return u


def _box(g: int, radius: int) -> np.ndarray:
    r = range(-radius, radius + 1)
    return np.array(list(itertools.product(r, repeat=g)), dtype=float)


def _terms(u: np.ndarray, pm: PeriodMatrix, tol: float):
    """Summands ``exp(pi i ((Omega N, N) + 2 (N, u)))`` over a box centred on the dominant index.

    Returns the summands with shape ``(P, K)`` and the indices with shape ``(P, K, g)``.
    """
    flat = u.reshape(-1, pm.g)
    centre = -np.round(np.linalg.solve(pm.omega.imag, flat.imag.T).T)
    idx = centre[:, None, :] + _box(pm.g, pm.radius(tol))[None, :, :]
    quad = np.einsum("pki,ij,pkj->pk", idx, pm.omega, idx)
    lin = np.einsum("pki,pi->pk", idx, flat)
    return np.exp(1j * np.pi * (quad + 2 * lin)), idx


def theta(u, omega, tol: float = 1e-14) -> np.ndarray:
    """``sum_N exp(pi i ((Omega N, N) + 2 (N, u)))``; ``u`` has trailing dimension ``g``."""
    pm = _as_period_matrix(omega)
    u = _as_points(u, pm.g)
    terms, _ = _terms(u, pm, tol)
    return terms.sum(axis=1).reshape(u.shape[:-1])


def theta_gradient(u, omega, tol: float = 1e-14) -> np.ndarray:
    """Gradient of :func:`theta`; shape ``u.shape``."""
    pm = _as_period_matrix(omega)
    u = _as_points(u, pm.g)
    terms, idx = _terms(u, pm, tol)
    grad = np.einsum("pk,pki->pi", terms, 2j * np.pi * idx)
    return grad.reshape(u.shape)


def theta_directional(u, omega, direction, order: int, tol: float = 1e-14) -> np.ndarray:
    """Derivatives ``(v . grad)^k theta(u)`` for ``k = 0..order``; shape ``(order + 1,) + batch``."""
    pm = _as_period_matrix(omega)
    u = _as_points(u, pm.g)
    v = np.asarray(direction, dtype=complex).reshape(pm.g)
    terms, idx = _terms(u, pm, tol)
    w = 2j * np.pi * np.einsum("pki,i->pk", idx, v)
    out = np.stack([(terms * w**k).sum(axis=1) for k in range(order + 1)])
    return out.reshape((order + 1,) + u.shape[:-1])


# --------------------------------------------------------------------------------
# spectral coordinates


def _vec(x, g: int) -> np.ndarray:
    v = np.asarray(x, dtype=complex).reshape(-1)
    if v.size != g:
        raise ConfigError(f"expected a {g}-vector, got {v.size} entries")
    return v


def _vecs(xs, g: int, count: int, name: str) -> list[np.ndarray]:
    if len(xs) != count:
        raise ConfigError(f"{name} needs {count} vectors, got {len(xs)}")
    return [_vec(x, g) for x in xs]


CONSTANT_KEYS = ("a1_plus", "a1_minus", "b1_plus", "b1_minus", "a3_plus", "a3_minus", "b3_plus", "b3_minus")


@dataclass(frozen=True)
class JacobianPointData:
    """A point ``P`` of the curve: ``A(P)`` and the integrals of ``eta^1_pm`` and ``eta^3_+ + eta^3_-`` from ``P0``."""

    a: np.ndarray
    i1_plus: complex
    i1_minus: complex
    i3: complex = 0j


@dataclass(eq=False)
class SpectralCoordinates:
    """Finite-zone data in Jacobian coordinates; ``Q_{g+1} = inf_-`` and ``R_{g+1} = inf_+``."""

    g: int
    omega: PeriodMatrix
    a_inf_plus: np.ndarray
    a_inf_minus: np.ndarray
    u1_plus: np.ndarray
    u1_minus: np.ndarray
    u3_plus_plus_minus: np.ndarray
    a_Q: np.ndarray
    a_R: np.ndarray
    a_P: list
    a_Qj: list
    a_Rj: list
    delta: np.ndarray
    eps: np.ndarray
    consts: dict
    c1: complex | None = None
    c2: complex | None = None
    tol: float = 1e-14
    checks: dict = field(default_factory=dict)

    def __post_init__(self):
        g = int(self.g)
        if g < 0:
            raise ConfigError("genus must be non-negative")
        self.omega = _as_period_matrix(self.omega) if g > 0 else None
        for name in ("a_inf_plus", "a_inf_minus", "u1_plus", "u1_minus", "u3_plus_plus_minus", "a_Q", "a_R", "delta", "eps"):
            setattr(self, name, _vec(getattr(self, name), g))
        self.a_P = _vecs(self.a_P, g, g + 1, "a_P")
        self.a_Qj = _vecs(self.a_Qj, g, g + 1, "a_Qj")
        self.a_Rj = _vecs(self.a_Rj, g, g + 1, "a_Rj")
        missing = set(CONSTANT_KEYS) - set(self.consts)
        if missing:
            raise ConfigError(f"missing normalisation constants: {sorted(missing)}")
        self.consts = {k: complex(self.consts[k]) for k in CONSTANT_KEYS}
        if g > 0:
            self._validate()
        self._resolve_constants()

    # theta with the genus-0 convention "empty sum == 1"
    def th(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=complex)
        if self.g == 0:
            return np.ones(u.shape[:-1] if u.ndim else (), dtype=complex)
        return theta(u, self.omega, self.tol)

    def _lattice_residual(self, v) -> float:
        """Distance of ``v`` from the period lattice ``Z^g + Omega Z^g`` (sup norm)."""
        om = self.omega.omega
        n = np.linalg.solve(om.imag, np.asarray(v).imag)
        r = v - om @ np.round(n)
        r = r - np.round(r.real)
        return float(np.max(np.abs(r)))

    def _validate(self):
        te = abs(complex(self.th(self.eps)))
        half = self._lattice_residual(2 * self.eps)
        self.checks["theta_eps"] = te
        self.checks["two_eps"] = half
        if te >= 1e-10 or half >= 1e-10:
            raise ConfigError("eps must be an odd half-period (theta(eps) = 0, 2 eps in the lattice)")
        sp, sq, sr = sum(self.a_P), sum(self.a_Qj), sum(self.a_Rj)
        lin = max(self._lattice_residual(sp - sq), self._lattice_residual(sp - sr))
        self.checks["linear_equivalence"] = lin
        if lin >= 1e-8:
            raise ConfigError("divisor images are not linearly equivalent (sum A(P) vs A(Q), A(R))")
        # A(Q) and A(R) are the sums over the first g entries
        if max(np.max(np.abs(self.a_Q - sum(self.a_Qj[: self.g]))), np.max(np.abs(self.a_R - sum(self.a_Rj[: self.g])))) >= 1e-10:
            raise ConfigError("a_Q / a_R must equal the sums of a_Qj / a_Rj over j <= g")

    # ------------------------------------------------------------------
    # normalisation constants

    def _ratio_same_zero(self, num, den) -> complex:
        """``num / den`` where both vanish for genus-1 data with ``delta == eps`` (identical factors)."""
        if abs(den) < 1e-13:
            if self.g == 1 and np.allclose(self.delta, self.eps, atol=1e-14):
                return 1.0 + 0j
            raise ThetaZeroDivision("vanishing theta factor in the normalisation constant")
        return num / den

    def derived_constants(self) -> tuple[complex, complex]:
        """``c1, c2`` from the limits ``U = -xi^+_21`` and ``V = xi^-_11`` of the Baker-Akhiezer formulas."""
        if self.g == 0:
            return 0j, 0j
        th, e = self.th, self.eps
        ap, am = self.a_inf_plus, self.a_inf_minus
        grad = theta_gradient(e, self.omega, self.tol)
        dp, dm = complex(self.u1_plus @ grad), complex(self.u1_minus @ grad)
        p_m = np.prod([th(e + am - a) for a in self.a_P])
        p_p = np.prod([th(e + ap - a) for a in self.a_P])
        r_m = np.prod([th(e + am - a) for a in self.a_Rj])
        q_p = np.prod([th(e + ap - a) for a in self.a_Qj])
        r_inner = np.prod([th(e + ap - a) for a in self.a_Rj[: self.g]])
        q_inner = np.prod([th(e + am - a) for a in self.a_Qj[: self.g]])
        ratio_r = self._ratio_same_zero(r_inner, th(ap + self.delta - self.a_R))
        ratio_q = self._ratio_same_zero(q_inner, th(am + self.delta - self.a_Q))
        c1 = dp * th(am + self.delta - self.a_R) * ratio_r * p_m / (p_p * r_m)
        c2 = -dm * th(ap + self.delta - self.a_Q) * ratio_q * p_p / (p_m * q_p)
        return complex(c1), complex(c2)

    def closed_form_constants(self) -> tuple[complex, complex]:
        """``c1, c2`` from the closed-form theta products without the limiting ratios (a cross-check)."""
        if self.g == 0:
            return 0j, 0j
        th, e = self.th, self.eps
        ap, am = self.a_inf_plus, self.a_inf_minus
        grad = theta_gradient(e, self.omega, self.tol)
        c1 = -np.prod([th(e + am - a) for a in self.a_P]) / (
            np.prod([th(e + ap - a) for a in self.a_P]) * np.prod([th(e + am - a) for a in self.a_Rj])
        )
        c1 *= np.prod([th(e + ap - a) for a in self.a_Rj[: self.g]]) * (self.u1_plus @ grad)
        c2 = np.prod([th(e + ap - a) for a in self.a_P]) / (
            np.prod([th(e + am - a) for a in self.a_P]) * np.prod([th(e + ap - a) for a in self.a_Qj])
        )
        c2 *= np.prod([th(e + am - a) for a in self.a_Qj[: self.g]]) * (self.u1_minus @ grad)
        return complex(c1), complex(c2)

    def _resolve_constants(self):
        d1, d2 = self.derived_constants()
        for name, derived in (("c1", d1), ("c2", d2)):
            given = getattr(self, name)
            if given is None:
                setattr(self, name, derived)
                continue
            given = complex(given)
            setattr(self, name, given)
            if self.g > 0:
                mismatch = abs(given - derived) / max(abs(derived), 1e-300)
                self.checks[f"{name}_mismatch"] = mismatch
                if mismatch > 1e-6:
                    warnings.warn(f"supplied {name} differs from the recomputed value by {mismatch:.2e}", stacklevel=3)

    # ------------------------------------------------------------------

    @property
    def time_constant(self) -> complex:
        """Growth rate of the exponential prefactor of ``U`` in ``t`` (that of ``V`` is its negative)."""
        k = self.consts
        return k["a3_plus"] - k["b3_plus"] + k["b3_minus"] - k["a3_minus"]

    def to_json(self) -> str:
        def enc(x):
            if isinstance(x, (list, tuple)):
                return [enc(v) for v in x]
            if isinstance(x, np.ndarray):
                return [enc(v) for v in x.tolist()]
            if isinstance(x, (complex, np.complexfloating)):
                return [float(x.real), float(x.imag)]
            return x

        doc = {
            "g": self.g,
            "omega": enc(self.omega.omega if self.omega is not None else np.zeros((0, 0))),
            **{k: enc(getattr(self, k)) for k in (
                "a_inf_plus", "a_inf_minus", "u1_plus", "u1_minus", "u3_plus_plus_minus",
                "a_Q", "a_R", "a_P", "a_Qj", "a_Rj", "delta", "eps")},
            "consts": {k: enc(v) for k, v in self.consts.items()},
            "c1": enc(complex(self.c1)),
            "c2": enc(complex(self.c2)),
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SpectralCoordinates":
        doc = json.loads(text)
        known = {
            "g", "omega", "a_inf_plus", "a_inf_minus", "u1_plus", "u1_minus", "u3_plus_plus_minus",
            "a_Q", "a_R", "a_P", "a_Qj", "a_Rj", "delta", "eps", "consts", "c1", "c2",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown spectral-coordinate keys: {sorted(unknown)}")

        def dec(x):
            x = np.asarray(x, dtype=float)
            if x.shape[-1:] != (2,):
                raise ConfigError("complex numbers must be encoded as [re, im]")
            return x[..., 0] + 1j * x[..., 1]

        try:
            g = int(doc["g"])
            kw = {k: dec(doc[k]) for k in known - {"g", "consts", "c1", "c2", "a_P", "a_Qj", "a_Rj", "omega"}}
            kw["omega"] = dec(doc["omega"]).reshape(g, g) if g else np.zeros((0, 0))
            for k in ("a_P", "a_Qj", "a_Rj"):
                kw[k] = [dec(v).reshape(g) for v in doc[k]]
            consts = {k: complex(*doc["consts"][k]) for k in doc["consts"]}
            c1 = complex(*doc["c1"]) if doc.get("c1") is not None else None
            c2 = complex(*doc["c2"]) if doc.get("c2") is not None else None
        except KeyError as exc:
            raise ConfigError(f"missing spectral-coordinate key {exc}") from exc
        return cls(g=g, consts=consts, c1=c1, c2=c2, **kw)


# --------------------------------------------------------------------------------
# potentials and Baker-Akhiezer functions


def _guard(*values):
    for v in values:
        if np.any(np.abs(v) < 1e-13):
            raise ThetaZeroDivision("theta denominator vanishes (pole of the finite-zone data)")


def _shifts(sc: SpectralCoordinates, z, zbar, t):
    z = np.asarray(z, dtype=complex)
    zbar = np.asarray(zbar, dtype=complex)
    lin = z[..., None] * sc.u1_plus + zbar[..., None] * sc.u1_minus + t * sc.u3_plus_plus_minus
    return z, zbar, lin + sc.delta - sc.a_Q, lin + sc.delta - sc.a_R


def finite_zone_potentials(sc: SpectralCoordinates, z, zbar, t: float = 0.0):
    """``U`` and ``V`` of the finite-zone operator at ``(z, zbar, t)``; arrays broadcast."""
    z, zbar, f1, f2 = _shifts(sc, z, zbar, t)
    k = sc.consts
    th = sc.th
    ap, am = sc.a_inf_plus, sc.a_inf_minus
    d2 = th(am + f2)
    d1 = th(ap + f1)
    _guard(d1, d2)
    u = sc.c1 * np.exp(z * (k["a1_plus"] - k["b1_plus"]) + zbar * (k["b1_minus"] - k["a1_minus"]) + t * sc.time_constant)
    v = sc.c2 * np.exp(z * (k["b1_plus"] - k["a1_plus"]) + zbar * (k["a1_minus"] - k["b1_minus"]) - t * sc.time_constant)
    return u * th(ap + f2) / d2, v * th(am + f1) / d1


def finite_zone_time_derivative(sc: SpectralCoordinates, z, zbar, t: float = 0.0):
    """``dU/dt`` in closed form: ``d log U / dt = omega_t + U3 . (grad log theta(A+ + F2) - grad log theta(A- + F2))``."""
    u, _ = finite_zone_potentials(sc, z, zbar, t)
    if sc.g == 0:
        return sc.time_constant * u
    _, _, _, f2 = _shifts(sc, z, zbar, t)
    ap, am = sc.a_inf_plus, sc.a_inf_minus
    lp = theta_gradient(ap + f2, sc.omega, sc.tol) / theta(ap + f2, sc.omega, sc.tol)[..., None]
    lm = theta_gradient(am + f2, sc.omega, sc.tol) / theta(am + f2, sc.omega, sc.tol)[..., None]
    return u * (sc.time_constant + (lp - lm) @ sc.u3_plus_plus_minus)


def baker_akhiezer(sc: SpectralCoordinates, point: JacobianPointData, z, zbar, t: float = 0.0):
    """Components ``psi_1, psi_2`` of the Baker-Akhiezer function at ``point``."""
    z, zbar, f1, f2 = _shifts(sc, z, zbar, t)
    k = sc.consts
    th, e, a = sc.th, sc.eps, _vec(point.a, sc.g)
    ap, am = sc.a_inf_plus, sc.a_inf_minus
    e1 = z * (point.i1_plus - k["a1_plus"]) + zbar * (point.i1_minus - k["b1_minus"])
    e2 = z * (point.i1_plus - k["b1_plus"]) + zbar * (point.i1_minus - k["a1_minus"])
    e1 = e1 + t * (point.i3 - k["a3_plus"] - k["b3_minus"])
    e2 = e2 + t * (point.i3 - k["a3_minus"] - k["b3_plus"])
    den_p = np.prod([th(e + a - p) for p in sc.a_P])
    const1 = np.prod([th(e + a - q) * th(e + ap - p) for q, p in zip(sc.a_Qj, sc.a_P)]) / (
        den_p * np.prod([th(e + ap - q) for q in sc.a_Qj])
    )
    const2 = np.prod([th(e + a - r) * th(e + am - p) for r, p in zip(sc.a_Rj, sc.a_P)]) / (
        den_p * np.prod([th(e + am - r) for r in sc.a_Rj])
    )
    n1, n2 = th(a + sc.delta - sc.a_Q), th(a + sc.delta - sc.a_R)
    d1, d2 = th(ap + f1), th(am + f2)
    _guard(den_p, n1, n2, d1, d2)
    psi1 = np.exp(e1) * th(a + f1) / n1 * th(ap + sc.delta - sc.a_Q) / d1 * const1
    psi2 = np.exp(e2) * th(a + f2) / n2 * th(am + sc.delta - sc.a_R) / d2 * const2
    return psi1, psi2


def reality_check(u_field, v_field) -> tuple[float, float]:
    """``(|U - V|_inf, |U - conj U|_inf)``."""
    u = np.asarray(getattr(u_field, "values", u_field))
    v = np.asarray(getattr(v_field, "values", v_field))
    return float(np.max(np.abs(u - v))), float(np.max(np.abs(u - np.conj(u))))


# --------------------------------------------------------------------------------
# grid sampling and surfaces


def _grid_points(lattice, shape, origin):
    z = lattice.points(shape, origin)
    return z, np.conj(z)


def potential_field(sc: SpectralCoordinates, lattice, shape, origin: complex = 0j, t: float = 0.0, tol: float = 1e-8):
    """Real potential sampled on a grid; raises ComplexDrift unless ``U = V = conj U`` to ``tol``."""
    from .errors import ComplexDrift
    from .weierstrass import PotentialField

    z, zb = _grid_points(lattice, shape, origin)
    u, v = finite_zone_potentials(sc, z, zb, t)
    d_uv, d_re = reality_check(u, v)
    scale = max(float(np.max(np.abs(u))), 1.0)
    if max(d_uv, d_re) > tol * scale:
        raise ComplexDrift(f"finite-zone potential is not real (|U - V| = {d_uv:.2e}, |Im U| = {d_re / 2:.2e})")
    return PotentialField.from_values(lattice, u.real, origin)


def floquet_multipliers(sc, point, lattice, origin: complex = 0j, t: float = 0.0, probes: int = 5, rtol: float = 1e-8):
    """``psi(z + gamma) / psi(z)`` for both generators, checked to be independent of ``z``."""
    rng = np.random.default_rng(0)
    base = origin + lattice.points((4, 4))[rng.integers(0, 4, probes), rng.integers(0, 4, probes)]
    out = []
    for g in lattice.generators:
        ratios = []
        for z in base:
            a = np.array(baker_akhiezer(sc, point, z, np.conj(z), t))
            b = np.array(baker_akhiezer(sc, point, z + g, np.conj(z + g), t))
            k = int(np.argmax(np.abs(a)))
            ratios.append(b[k] / a[k])
            if np.max(np.abs(b - ratios[-1] * a)) > rtol * np.max(np.abs(b)):
                raise ConfigError("Baker-Akhiezer function is not Floquet on this lattice")
        if np.max(np.abs(np.array(ratios) - ratios[0])) > rtol * abs(ratios[0]):
            raise ConfigError("Floquet multiplier depends on the base point")
        out.append(complex(np.mean(ratios)))
    return tuple(out)


def spinor_at(sc, point, lattice, shape, origin: complex = 0j, t: float = 0.0):
    """Baker-Akhiezer spinor at one spectral point, sampled as a Floquet field."""
    from .grid import GridField
    from .weierstrass import Spinor

    mult = floquet_multipliers(sc, point, lattice, origin, t)
    z, zb = _grid_points(lattice, shape, origin)
    p1, p2 = baker_akhiezer(sc, point, z, zb, t)
    return Spinor(GridField(lattice, p1, multipliers=mult, origin=origin), GridField(lattice, p2, multipliers=mult, origin=origin))


def surface_from_points(sc, points, coeffs, lattice, shape, origin: complex = 0j, t: float = 0.0, x0=(0.0, 0.0, 0.0)):
    """Immersion of ``psi = sum a_j psi(., Q_j)`` and the three periodicity integrals.

    Requires a real potential.  Products of Floquet components whose
    multipliers do not cancel integrate to quasi-periodic pieces; the result is
    then flagged ``quasi_periodic=False``.  The defects only involve the
    Lambda-periodic pieces; they vanish iff those pieces close up.
    """
    from .weierstrass import immersion_from_terms, periodic_defects_of_terms

    if len(points) != len(coeffs) or not points:
        raise ConfigError("need one coefficient per spectral point")
    potential_field(sc, lattice, shape, origin, t)
    terms = [(complex(a), spinor_at(sc, p, lattice, shape, origin, t)) for a, p in zip(coeffs, points)]
    surf = immersion_from_terms(terms, origin=x0)
    return surf, periodic_defects_of_terms(terms), terms
