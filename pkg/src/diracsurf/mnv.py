"""First flow of the modified Novikov-Veselov hierarchy on torus potentials.

    U_t = 2 Re(U_zzz + 3 U_z V + (3/2) U V_z),   V_zbar = (U^2)_z

For ``U = U(x)`` on a lattice with real first generator this is the mKdV
equation ``U_t = U_xxx / 4 + 6 U^2 U_x``.  Time stepping is an
integrating-factor RK4 scheme: the dispersive part is diagonal in Fourier
space and integrated exactly, the nonlinear part is stepped explicitly and
dealiased with the 2/3 rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ComplexDrift, Instability
from .grid import GridField
from .weierstrass import PotentialField


@dataclass(frozen=True)
class AuxiliaryV:
    v: GridField

    def constraint_residual(self, u: PotentialField) -> float:
        """``|dbar V - d(U^2)|_inf`` relative to ``|d(U^2)|_inf`` (absolute if that vanishes)."""
        u2 = u.u * u.u
        lhs = self.v.dzbar().values
        rhs = u2.dz().values
        scale = np.max(np.abs(rhs))
        res = np.max(np.abs(lhs - rhs))
        return float(res / scale) if scale > 0 else float(res)


@dataclass(frozen=True)
class Diagnostics:
    t: float
    willmore: float
    mean_u: float
    min_u: float
    max_u: float
    constraint_residual: float

    FIELDS = ("t", "willmore", "mean_u", "min_u", "max_u", "constraint_residual")

    def row(self) -> tuple:
        return tuple(getattr(self, f) for f in self.FIELDS)


@dataclass(frozen=True)
class FlowState:
    u: PotentialField
    t: float = 0.0
    history: tuple = field(default_factory=tuple)

    @classmethod
    def start(cls, u: PotentialField, t: float = 0.0) -> "FlowState":
        return cls(u, t, (diagnose(u, t),))


def _ratio(u: GridField) -> np.ndarray:
    d, db, _ = u.symbols()
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(db != 0, d / np.where(db != 0, db, 1), 0)
    return r


def solve_v(u: PotentialField) -> AuxiliaryV:
    """``V`` with ``dbar V = d(U^2)``; its zero mode is fixed to ``mean(U^2)``."""
    u2 = u.u * u.u
    coeff = np.fft.fft2(u2.values)
    vh = _ratio(u.u) * coeff
    vh[0, 0] = coeff[0, 0]
    return AuxiliaryV(u.u.like(np.fft.ifft2(vh)))


def _dealias_mask(shape) -> np.ndarray:
    n, m = shape
    q = np.abs(np.fft.fftfreq(n, 1.0 / n))
    p = np.abs(np.fft.fftfreq(m, 1.0 / m))
    return (q[:, None] < n / 3) & (p[None, :] < m / 3)


def _linear_symbol(u: GridField) -> np.ndarray:
    """Fourier symbol of ``U_zzz + U_zbarzbarzbar`` (purely imaginary)."""
    d, db, _ = u.symbols()
    return 1j * (d**3 + db**3).imag


def _halves(uf: GridField):
    """The two conjugate summands of the right-hand side, nonlinear parts only."""
    v = solve_v(PotentialField(uf)).v
    uz = uf.dz()
    s1 = 3 * uz.values * v.values + 1.5 * uf.values * v.dz().values
    uzb = uf.dzbar()
    vb = v.conj()
    s2 = 3 * uzb.values * vb.values + 1.5 * uf.values * vb.dzbar().values
    return s1, s2


def mnv_rhs(u: PotentialField, tol: float = 1e-10) -> GridField:
    """Right-hand side of the first flow, including the dispersive part."""
    uf = u.u
    d, db, _ = uf.symbols()
    coeff = np.fft.fft2(uf.values)
    lin1 = np.fft.ifft2(d**3 * coeff)
    lin2 = np.fft.ifft2(db**3 * coeff)
    s1, s2 = _halves(uf)
    total = lin1 + s1 + lin2 + s2
    scale = max(np.max(np.abs(total)), 1.0)
    if np.max(np.abs(total.imag)) > tol * scale:
        raise ComplexDrift("right-hand side of the flow is not real")
    return uf.like(total.real)


def _nonlinear_hat(uh: np.ndarray, template: GridField, mask: np.ndarray) -> np.ndarray:
    uf = template.like(np.fft.ifft2(uh).real)
    s1, s2 = _halves(uf)
    return mask * np.fft.fft2((s1 + s2).real)


def diagnose(u: PotentialField, t: float) -> Diagnostics:
    vals = u.values
    area = u.lattice.area
    return Diagnostics(
        t=float(t),
        willmore=float(4 * area * np.mean(vals * vals)),
        mean_u=float(np.mean(vals)),
        min_u=float(np.min(vals)),
        max_u=float(np.max(vals)),
        constraint_residual=solve_v(u).constraint_residual(u),
    )


def stable_dt(u: PotentialField, safety: float = 0.5) -> float:
    """Explicit bound for the nonlinear part: RK4 stays stable for ``|lambda dt| < 2.8``."""
    d, _, _ = u.u.symbols()
    kmax = np.max(np.abs(d))
    amp = np.max(np.abs(u.values)) ** 2
    if amp == 0:
        return np.inf
    return safety * 2.8 / (12 * amp * kmax)


def step(state: FlowState, dt: float, tol: float = 1e-10, record: bool = True) -> FlowState:
    """One integrating-factor RK4 step."""
    uf = state.u.u
    mask = _dealias_mask(uf.shape)
    lin = _linear_symbol(uf)
    e_half = np.exp(lin * dt / 2)
    e_full = e_half * e_half
    uh = mask * np.fft.fft2(uf.values)

    def nl(x):
        return _nonlinear_hat(x, uf, mask)

    a = dt * nl(uh)
    b = dt * nl(e_half * (uh + a / 2))
    c = dt * nl(e_half * uh + b / 2)
    d = dt * nl(e_full * uh + e_half * c)
    new = e_full * uh + (e_full * a + 2 * e_half * (b + c) + d) / 6
    vals = np.fft.ifft2(new)
    if not np.all(np.isfinite(vals)):
        raise Instability("flow produced non-finite values")
    scale = max(np.max(np.abs(vals.real)), 1.0)
    if np.max(np.abs(vals.imag)) > tol * scale:
        raise Instability("flow lost reality of the potential")
    u_new = PotentialField(uf.like(vals.real))
    t_new = state.t + dt
    hist = state.history + (diagnose(u_new, t_new),) if record else state.history
    return FlowState(u_new, t_new, hist)


def evolve(state: FlowState, T: float, dt: float, monitor_every: int = 1) -> FlowState:
    """Advance to ``state.t + T`` with steps of at most ``dt``.

    Diagnostics are recorded every ``monitor_every`` steps and at the end.
    """
    if T < 0 or dt <= 0:
        raise ValueError("need T >= 0 and dt > 0")
    if T == 0:
        return state
    nsteps = int(np.ceil(T / dt - 1e-12))
    h = T / nsteps
    for i in range(nsteps):
        last = i == nsteps - 1
        state = step(state, h, record=last or (i + 1) % monitor_every == 0)
    return replace(state, t=float(state.history[-1].t if state.history else state.t))


def project(u: PotentialField) -> PotentialField:
    """Apply the 2/3 dealiasing filter to a potential."""
    mask = _dealias_mask(u.shape)
    return PotentialField(u.u.like(np.fft.ifft2(mask * np.fft.fft2(u.values)).real))
