"""Zero Floquet spectrum of the periodic Dirac operator.

For a quasimomentum ``(k1, k2)`` the Floquet problem reduces to the
Lambda-periodic operator

    D_k = [[U - lam, d + pi (k2 + i k1)], [-dbar + pi (k2 - i k1), U - lam]]

which is truncated to the Fourier modes ``exp(2 pi i <kappa, z>)`` with
``kappa = p g1* + q g2*`` and ``|p|, |q| <= M``.  The singularity indicator is
the smallest singular value of the truncated matrix.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateGrid
from .grid import Lattice
from .weierstrass import PotentialField


@dataclass(frozen=True)
class Quasimomentum:
    k1: complex
    k2: complex
    lam: complex = 0j

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.k1, self.k2, self.lam], dtype=complex)

    @property
    def is_real(self) -> bool:
        return not np.any(np.imag(self.vector))


@dataclass(frozen=True)
class FloquetSample:
    k: Quasimomentum
    indicator: float
    truncation: int
    index: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class SpectralSlice:
    """Affine map ``(t1, t2) -> origin + t1 dir1 + t2 dir2`` into ``(k1, k2, lam)``."""

    origin: tuple[complex, complex, complex]
    dir1: tuple[complex, complex, complex]
    dir2: tuple[complex, complex, complex]
    range1: tuple[float, float]
    range2: tuple[float, float]

    @classmethod
    def real_k(cls, k1_range, k2_range, lam: float = 0.0) -> "SpectralSlice":
        """The real ``(k1, k2)`` plane at fixed ``lam``."""
        return cls((0, 0, lam), (1, 0, 0), (0, 1, 0), tuple(k1_range), tuple(k2_range))

    def axes(self, grid) -> tuple[np.ndarray, np.ndarray]:
        n1, n2 = grid
        return np.linspace(*self.range1, n1), np.linspace(*self.range2, n2)

    def point(self, t1: float, t2: float) -> Quasimomentum:
        v = np.asarray(self.origin, complex) + t1 * np.asarray(self.dir1, complex) + t2 * np.asarray(self.dir2, complex)
        return Quasimomentum(complex(v[0]), complex(v[1]), complex(v[2]))

    def centrally_symmetric(self) -> bool:
        """Real ``k``-plane slice at real ``lam`` whose grid is symmetric under ``k -> -k``."""
        o, d1, d2 = (np.asarray(v, complex) for v in (self.origin, self.dir1, self.dir2))
        return bool(
            np.all(o[:2] == 0)
            and o[2].imag == 0
            and d1[2] == 0
            and d2[2] == 0
            and not np.any(np.imag(d1))
            and not np.any(np.imag(d2))
            and self.range1[0] == -self.range1[1]
            and self.range2[0] == -self.range2[1]
        )

    def lipschitz(self) -> tuple[float, float]:
        """Bound on the indicator's change per unit of ``t1`` and ``t2``."""
        out = []
        for d in (self.dir1, self.dir2):
            d = np.asarray(d, complex)
            out.append(float(np.pi * np.linalg.norm(d[:2]) + abs(d[2])))
        return out[0], out[1]


@dataclass(frozen=True)
class ZeroContour:
    """Polyline in slice parameters ``(t1, t2)`` together with its quasimomenta."""

    params: np.ndarray
    points: tuple[Quasimomentum, ...]
    closed: bool
    threshold: float


@dataclass
class ScanResult:
    """Indicator samples on a slice grid; ``values[i1, i2]`` sits at ``(t1[i1], t2[i2])``."""

    slice: SpectralSlice
    t1: np.ndarray
    t2: np.ndarray
    values: np.ndarray
    truncation: int
    samples: list = field(default_factory=list)

    @property
    def cell(self) -> tuple[float, float]:
        return float(self.t1[1] - self.t1[0]), float(self.t2[1] - self.t2[0])

    def default_threshold(self) -> float:
        """Indicator bound at a cell's half-diagonal from a zero.

        Every cell that contains a zero then has a vertex below the threshold.
        """
        l1, l2 = self.slice.lipschitz()
        h1, h2 = self.cell
        return 1.01 * 0.5 * float(np.hypot(l1 * h1, l2 * h2))


def mode_indices(M: int) -> tuple[np.ndarray, np.ndarray]:
    q, p = np.meshgrid(np.arange(-M, M + 1), np.arange(-M, M + 1), indexing="ij")
    return p.ravel(), q.ravel()


def mode_vectors(lattice: Lattice, M: int) -> np.ndarray:
    d1, d2 = lattice.dual().generators
    p, q = mode_indices(M)
    return p * d1 + q * d2


def potential_coefficients(u: PotentialField) -> np.ndarray:
    """Fourier coefficients of ``U`` (mean-normalised) indexed ``[q % N, p % M]``."""
    return np.asarray(u.u.fourier())


class GalerkinFamily:
    """Truncated ``D_k`` for one potential; only the diagonals depend on ``k``."""

    def __init__(self, u: PotentialField, M: int):
        if M < 1:
            raise ValueError("truncation M must be >= 1")
        self.u = u
        self.M = M
        lat = u.lattice
        kappa = mode_vectors(lat, M)
        p, q = mode_indices(M)
        ng, mg = u.shape
        coeff = potential_coefficients(u)
        dp = p[:, None] - p[None, :]
        dq = q[:, None] - q[None, :]
        inside = (np.abs(dp) < mg / 2) & (np.abs(dq) < ng / 2)
        conv = np.where(inside, coeff[dq % ng, dp % mg], 0)
        n = kappa.size
        base = np.zeros((2 * n, 2 * n), dtype=complex)
        base[:n, :n] = conv
        base[n:, n:] = conv
        self.n = n
        self.kappa = kappa
        self.base = base
        self.d_sym = np.pi * 1j * np.conj(kappa)
        self.db_sym = np.pi * 1j * kappa

    @property
    def size(self) -> int:
        return 2 * self.n

    def matrix(self, k: Quasimomentum) -> np.ndarray:
        n = self.n
        a = np.pi * (k.k2 + 1j * k.k1)
        b = np.pi * (k.k2 - 1j * k.k1)
        m = self.base.copy()
        idx = np.arange(n)
        m[idx, idx] -= k.lam
        m[idx + n, idx + n] -= k.lam
        m[idx, idx + n] = self.d_sym + a
        m[idx + n, idx] = -self.db_sym + b
        return m

    def indicator(self, k: Quasimomentum, fast: bool = False) -> float:
        """Smallest singular value; Hermitian matrices (real ``k``, ``lam``) use ``eigvalsh``."""
        a = self.matrix(k)
        if fast:
            return _smallest_singular(a, None)[0]
        if k.is_real:
            return float(np.min(np.abs(sla.eigvalsh(a, check_finite=False))))
        return float(sla.svdvals(a, check_finite=False)[-1])


def assemble_dk(u: PotentialField, k: Quasimomentum, M: int) -> np.ndarray:
    """Galerkin matrix of ``D_k - lam`` on the modes ``|p|, |q| <= M``.

    Unknowns are ordered ``[phi1 modes, phi2 modes]``, modes by ``(q, p)``
    row-major with ``p, q`` running from ``-M`` to ``M``.
    """
    return GalerkinFamily(u, M).matrix(k)


def indicator(u: PotentialField, k: Quasimomentum, M: int) -> float:
    """Smallest singular value of ``assemble_dk(u, k, M)``."""
    return GalerkinFamily(u, M).indicator(k)


def _smallest_singular(a: np.ndarray, start: np.ndarray | None, rtol: float = 1e-12, maxiter: int = 30):
    """Block inverse iteration on ``(A^H A)^{-1}`` with Rayleigh-Ritz; full SVD fallback."""
    n = a.shape[0]
    block = 6
    try:
        # exactly singular matrices fall back to the SVD below
        with np.errstate(all="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu = sla.lu_factor(a, check_finite=False)
        if not np.all(np.isfinite(lu[0])) or np.min(np.abs(np.diag(lu[0]))) == 0:
            raise np.linalg.LinAlgError
        x = start
        if x is None:
            x = np.random.default_rng(0).standard_normal((n, block)) + 0j
        prev = np.inf
        for _ in range(maxiter):
            y = sla.lu_solve(lu, sla.lu_solve(lu, x, trans=2, check_finite=False), check_finite=False)
            if not np.all(np.isfinite(y)):
                raise np.linalg.LinAlgError
            qmat, _ = np.linalg.qr(y)
            _, sv, vh = np.linalg.svd(a @ qmat, full_matrices=False)
            x = qmat @ vh.conj().T
            sigma = sv[-1]
            if abs(prev - sigma) <= rtol * sigma or sigma < 1e-14 * np.abs(lu[0]).max():
                return float(sigma), x
            prev = sigma
        return float(sigma), x
    except (np.linalg.LinAlgError, ValueError):
        return float(sla.svdvals(a, check_finite=False)[-1]), None


def _scan_row(args):
    u_values, lattice, origin, M, points, exact = args
    fam = GalerkinFamily(PotentialField.from_values(lattice, u_values, origin), M)
    out = []
    start = None
    for k in points:
        a = fam.matrix(k)
        if exact:
            out.append(fam.indicator(k))
        else:
            sigma, start = _smallest_singular(a, start)
            out.append(sigma)
    return out


def worker_count() -> int:
    env = os.environ.get("DIRAC_SURF_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def scan_slice(u: PotentialField, sl: SpectralSlice, grid, M: int, exact: bool = False, workers: int | None = None) -> ScanResult:
    """Indicator on an ``n1 x n2`` grid of the slice.

    Rows (fixed ``t1``) are independent tasks; inside a row the inverse
    iteration is warm-started from the neighbouring sample.  Results do not
    depend on the number of workers.
    """
    n1, n2 = grid
    if n1 < 2 or n2 < 2:
        raise DegenerateGrid("slice grid needs at least 2 x 2 samples")
    t1, t2 = sl.axes(grid)
    rows = [[sl.point(a, b) for b in t2] for a in t1]
    # real slices symmetric about k = 0: indicator(k) = indicator(-k) exactly
    mirrored = sl.centrally_symmetric()
    todo = rows[: (n1 + 1) // 2] if mirrored else rows
    tasks = [(u.values, u.lattice, u.u.origin, M, row, exact) for row in todo]
    workers = min(workers or worker_count(), len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(_scan_row, tasks))
    else:
        vals = [_scan_row(t) for t in tasks]
    if mirrored:
        vals = vals + [vals[n1 - 1 - i][::-1] for i in range(len(vals), n1)]
    values = np.array(vals)
    samples = [
        FloquetSample(rows[i][j], float(values[i, j]), M, (i, j)) for i in range(n1) for j in range(n2)
    ]
    return ScanResult(sl, t1, t2, values, M, samples)


def trace_zero_set(scan: ScanResult, threshold: float | None = None) -> list[ZeroContour]:
    """Contours of the indicator at ``threshold`` around its zero locus.

    Marching squares with linear sub-cell interpolation of the indicator
    itself: near a simple zero it grows like the distance to the zero set, so
    linear interpolation is exact there (interpolating its log is not).  Thin
    zero curves appear as the two edges of a band, isolated zeros as small
    loops.  Contours are either closed or end on the slice boundary.
    """
    from skimage.measure import find_contours

    values = np.asarray(scan.values, dtype=float)
    if values.ndim != 2 or min(values.shape) < 2 or not np.all(np.isfinite(values)):
        raise DegenerateGrid("indicator samples must be a finite grid of at least 2 x 2")
    tau = scan.default_threshold() if threshold is None else float(threshold)
    contours = []
    h1, h2 = scan.cell
    for c in find_contours(values, tau):
        params = np.column_stack([scan.t1[0] + c[:, 0] * h1, scan.t2[0] + c[:, 1] * h2])
        closed = bool(np.allclose(c[0], c[-1]))
        pts = tuple(scan.slice.point(a, b) for a, b in params)
        contours.append(ZeroContour(params, pts, closed, tau))
    return contours


def contour_cells(contours: list[ZeroContour], scan: ScanResult, densify: int = 8) -> np.ndarray:
    """Contour polylines in grid-cell units, each segment subdivided ``densify`` times."""
    if not contours:
        return np.zeros((0, 2))
    h = np.array(scan.cell)
    origin = np.array([scan.t1[0], scan.t2[0]])
    out = []
    for c in contours:
        pts = (c.params - origin) / h
        if len(pts) > 1:
            f = np.linspace(0, 1, densify, endpoint=False)[:, None, None]
            seg = pts[:-1] + f * (pts[1:] - pts[:-1])
            pts = np.concatenate([seg.transpose(1, 0, 2).reshape(-1, 2), pts[-1:]])
        out.append(pts)
    return np.concatenate(out)


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    from scipy.spatial.distance import directed_hausdorff

    if len(a) == 0 and len(b) == 0:
        return 0.0
    if len(a) == 0 or len(b) == 0:
        return float("inf")
    return float(max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0]))


def quotient_by_dual(k: Quasimomentum, lat: Lattice) -> Quasimomentum:
    """Canonical representative of ``(Re k1, Re k2)`` modulo the dual lattice.

    The dual coordinates of ``Re k1 + i Re k2`` are reduced into ``[-1/2, 1/2)``;
    imaginary parts and ``lam`` are untouched.
    """
    d1, d2 = lat.dual().generators
    basis = np.array([[d1.real, d2.real], [d1.imag, d2.imag]])
    kr = np.array([np.real(k.k1), np.real(k.k2)])
    c = np.linalg.solve(basis, kr)
    c = c - np.floor(c + 0.5)
    r = basis @ c
    return Quasimomentum(complex(r[0], np.imag(k.k1)), complex(r[1], np.imag(k.k2)), k.lam)


def conformal_compare(
    u1: PotentialField,
    u2: PotentialField,
    sl: SpectralSlice,
    grid,
    M: int,
    threshold: float | None = None,
    workers: int | None = None,
) -> float:
    """Symmetric Hausdorff distance (grid cells) between the traced zero sets."""
    s1 = scan_slice(u1, sl, grid, M, workers=workers)
    s2 = scan_slice(u2, sl, grid, M, workers=workers)
    tau = s1.default_threshold() if threshold is None else threshold
    c1 = contour_cells(trace_zero_set(s1, tau), s1)
    c2 = contour_cells(trace_zero_set(s2, tau), s2)
    return hausdorff(c1, c2)


def constant_potential_zero_set(c: float, lattice: Lattice, M: int, lam: float = 0.0):
    """Per-mode closed form: ``pi |kappa + k1 + i k2| = |c - lam|`` for real ``k``.

    Returns ``(centres, radius)``: circles centred at ``-kappa``.
    """
    return -mode_vectors(lattice, M), abs(c - lam) / np.pi


def constant_potential_singular_bound(c: float, lattice: Lattice, M: int, k: Quasimomentum) -> float:
    """Exact smallest singular value for constant ``U = c`` (modes decouple)."""
    kap = mode_vectors(lattice, M)
    w = np.abs(kap + k.k1 + 1j * k.k2) * np.pi
    if k.is_real:
        return float(np.min(np.abs(np.concatenate([c - k.lam.real + w, c - k.lam.real - w]))))
    vals = []
    a = np.pi * (k.k2 + 1j * k.k1)
    b = np.pi * (k.k2 - 1j * k.k1)
    for kk in kap:
        blk = np.array([[c - k.lam, np.pi * 1j * np.conj(kk) + a], [-np.pi * 1j * kk + b, c - k.lam]])
        vals.append(np.linalg.svd(blk, compute_uv=False)[-1])
    return float(min(vals))
