"""Command-line front end: ``diracsurf <command> [config.json] [--grid N M] [--out DIR] [--tol T]``.

Every command reads a JSON job document (validated, unknown keys rejected),
writes its artifacts under the run directory and a ``manifest.json`` with the
config hash and library versions.  Exit codes: 0 success, 2 validation
failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from importlib import metadata
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import io
from .errors import ConfigError, NumericalError

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3

Pair = tuple[float, float]


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _grid_ok(v):
    if v is not None and any(n < 4 or n % 2 for n in v):
        raise ValueError("grid sizes must be even and >= 4")
    return v


# ---------------------------------------------------------------------------------
# sources


class Inversion(Strict):
    center: tuple[float, float, float]
    radius: float = 1.0


class Bump(Strict):
    amplitude: float
    mode: tuple[int, int] = (1, 0)


class TorusSource(Strict):
    type: Literal["torus"] = "torus"
    R: float = float(np.sqrt(2.0))
    r: float = 1.0
    invert: Optional[Inversion] = None
    perturb: Optional[Bump] = None


class PlaneSource(Strict):
    type: Literal["plane"]
    lattice: tuple[Pair, Pair] = ((1.0, 0.0), (0.0, 1.0))


class CylinderSource(Strict):
    type: Literal["cylinder"]
    height: float = 2 * np.pi


class SurfaceFile(Strict):
    type: Literal["file"]
    path: str


SurfaceSource = Annotated[Union[TorusSource, PlaneSource, CylinderSource, SurfaceFile], Field(discriminator="type")]


class ConstantPotential(Strict):
    type: Literal["constant"]
    value: float
    lattice: tuple[Pair, Pair] = ((1.0, 0.0), (0.0, 1.0))


class FieldPotential(Strict):
    type: Literal["field"]
    path: str


class SurfacePotential(Strict):
    type: Literal["surface"]
    surface: SurfaceSource = TorusSource()


PotentialSource = Annotated[Union[ConstantPotential, FieldPotential, SurfacePotential], Field(discriminator="type")]


class Common(Strict):
    grid: Optional[tuple[int, int]] = None
    out: str = "run"
    tol: float = 1e-8
    seed: int = 0

    @field_validator("grid")
    @classmethod
    def _even_grid(cls, v):
        return _grid_ok(v)


# ---------------------------------------------------------------------------------
# job documents


class AnalyzeConfig(Common):
    surface: SurfaceSource = TorusSource()
    grid: Optional[tuple[int, int]] = (128, 128)


class ReconstructConfig(Common):
    surface: Optional[SurfaceSource] = None
    psi1: Optional[str] = None
    psi2: Optional[str] = None
    potential: Optional[str] = None
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    grid: Optional[tuple[int, int]] = (128, 128)


class SliceSpec(Strict):
    k1_range: Pair = (-0.5, 0.5)
    k2_range: Pair = (-0.5, 0.5)
    lam: float = 0.0
    origin: Optional[tuple[Pair, Pair, Pair]] = None
    dir1: Optional[tuple[Pair, Pair, Pair]] = None
    dir2: Optional[tuple[Pair, Pair, Pair]] = None


class SpectrumConfig(Common):
    potential: PotentialSource = SurfacePotential(type="surface")
    compare: Optional[PotentialSource] = None
    slice: SliceSpec = SliceSpec()
    scan: tuple[int, int] = (32, 32)
    M: int = Field(4, ge=1)
    threshold: Optional[float] = None
    dual_shift: Optional[tuple[int, int]] = None
    grid: Optional[tuple[int, int]] = (64, 64)


class FlowConfig(Common):
    potential: PotentialSource = SurfacePotential(type="surface")
    T: float = Field(0.01, ge=0)
    dt: Optional[float] = Field(None, gt=0)
    monitor_every: int = Field(1, ge=1)
    checkpoint_every: Optional[int] = Field(None, ge=1)
    grid: Optional[tuple[int, int]] = (64, 64)


class CurveSpec(Strict):
    T: float = 1.0
    x: float = 0.2
    zeta0: Pair = (0.31, 0.17)
    mu: Optional[Pair] = None


class ThetaConfig(Common):
    mode: Literal["identities", "evaluate", "genus1"] = "identities"
    omega: Optional[list[list[Pair]]] = None
    points: Optional[list[list[Pair]]] = None
    samples: int = Field(20, ge=1)
    curve: CurveSpec = CurveSpec()
    t: float = 0.0
    spectral_points: list[Pair] = []
    grid: Optional[tuple[int, int]] = (64, 16)


class ExportConfig(Common):
    surface: SurfaceSource = TorusSource()
    wrap: Optional[bool] = None
    grid: Optional[tuple[int, int]] = (64, 64)


CONFIGS = {
    "analyze": AnalyzeConfig,
    "reconstruct": ReconstructConfig,
    "spectrum": SpectrumConfig,
    "flow": FlowConfig,
    "theta": ThetaConfig,
    "export-mesh": ExportConfig,
}


# ---------------------------------------------------------------------------------
# builders


def _lattice(p):
    from .grid import Lattice

    return Lattice(complex(*p[0]), complex(*p[1]))


def build_surface(src, grid):
    from .surfaces import RevolutionTorusSpec, cylinder, moebius_invert, perturb, plane, torus_of_revolution

    n, m = grid
    if src.type == "file":
        return io.load_surface(src.path)
    if src.type == "plane":
        return plane(_lattice(src.lattice), (n, m))
    if src.type == "cylinder":
        return cylinder(src.height, (n, m))
    s = torus_of_revolution(RevolutionTorusSpec(src.R, src.r), n, m)
    if src.invert is not None:
        s = moebius_invert(s, src.invert.center, src.invert.radius)
    if src.perturb is not None:
        s = perturb(s, src.perturb.amplitude, src.perturb.mode)
    return s


def build_potential(src, grid, tol):
    from .weierstrass import PotentialField, spinor_from_immersion

    if src.type == "constant":
        return PotentialField.constant(_lattice(src.lattice), grid, src.value)
    if src.type == "field":
        return io.load_potential(src.path)
    return spinor_from_immersion(build_surface(src.surface, grid), tol=tol)[1]


def _c(z) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


# ---------------------------------------------------------------------------------
# commands


def cmd_analyze(cfg: AnalyzeConfig, out: Path) -> dict:
    from .weierstrass import (
        conformality_residual,
        dirac_residual,
        eisenhart_residual,
        gauss_curvature,
        induced_metric,
        mean_curvature,
        periodicity_defects,
        spinor_from_immersion,
        willmore,
        willmore_of_potential,
    )

    s = build_surface(cfg.surface, cfg.grid)
    psi, u = spinor_from_immersion(s, tol=cfg.tol)
    d = induced_metric(psi)
    h = mean_curvature(u, d)
    k = gauss_curvature(d)
    for name, f in (("u", u), ("psi1", psi.psi1), ("psi2", psi.psi2), ("D", d), ("H", h), ("K", k)):
        io.save_field(out / f"{name}.json", f)
    closed = not np.any(s.periods)
    return {
        "shape": list(s.shape),
        "epsilon": list(psi.epsilon),
        "willmore_potential": willmore_of_potential(u),
        "willmore_surface": willmore(s) if closed else None,
        "u_max_abs": float(np.max(np.abs(u.values))),
        "u_mean": float(np.mean(u.values)),
        "conformality_residual": conformality_residual(s),
        "dirac_residual": dirac_residual(psi, u),
        "eisenhart_residual": eisenhart_residual(psi.psi1, u) if np.any(u.values) else 0.0,
        "defects": [_c(x) for x in periodicity_defects(psi)],
        "periods": s.periods.tolist(),
    }


def cmd_reconstruct(cfg: ReconstructConfig, out: Path) -> dict:
    from .weierstrass import Spinor, defects_from_periods, immersion_from_spinor, periodicity_defects, spinor_from_immersion

    report = {}
    if cfg.surface is not None:
        src = build_surface(cfg.surface, cfg.grid)
        psi, u = spinor_from_immersion(src, tol=cfg.tol)
    elif cfg.psi1 and cfg.psi2:
        psi = Spinor(io.load_field(cfg.psi1), io.load_field(cfg.psi2))
        u = io.load_potential(cfg.potential) if cfg.potential else None
        src = None
    else:
        raise ConfigError("reconstruct needs either 'surface' or both 'psi1' and 'psi2'")
    s = immersion_from_spinor(psi, u, origin=cfg.origin, tol=cfg.tol)
    io.save_surface(out, s)
    defects = periodicity_defects(psi)
    report["periods"] = s.periods.tolist()
    report["defects"] = [_c(x) for x in defects]
    report["defects_vs_periods"] = float(np.max(np.abs(np.subtract(defects, defects_from_periods(s.periods, s.lattice)))))
    if src is not None:
        diff = s.array() - src.array()
        diff -= diff.reshape(3, -1).mean(axis=1)[:, None, None]
        report["round_trip_error"] = float(np.max(np.abs(diff)))
    return report


def _slice(cfg: SliceSpec):
    from .spectrum import SpectralSlice

    if cfg.origin is None:
        return SpectralSlice.real_k(cfg.k1_range, cfg.k2_range, cfg.lam)
    if cfg.dir1 is None or cfg.dir2 is None:
        raise ConfigError("a general slice needs origin, dir1 and dir2")
    vec = lambda v: tuple(complex(*p) for p in v)
    return SpectralSlice(vec(cfg.origin), vec(cfg.dir1), vec(cfg.dir2), cfg.k1_range, cfg.k2_range)


def cmd_spectrum(cfg: SpectrumConfig, out: Path) -> dict:
    from .grid import dual_lattice
    from .spectrum import contour_cells, hausdorff, scan_slice, trace_zero_set

    u = build_potential(cfg.potential, cfg.grid, cfg.tol)
    sl = _slice(cfg.slice)
    scan = scan_slice(u, sl, cfg.scan, cfg.M)
    tau = scan.default_threshold() if cfg.threshold is None else cfg.threshold
    contours = trace_zero_set(scan, tau)
    io.write_spectrum_csv(out / "spectrum.csv", scan)
    io.write_contours(out / "contours.json", contours)
    report = {"threshold": tau, "contours": len(contours), "indicator_min": float(scan.values.min())}
    if cfg.dual_shift is not None:
        from dataclasses import replace

        p, q = cfg.dual_shift
        d = dual_lattice(u.lattice)
        shift = p * d.gamma1 + q * d.gamma2
        o = np.asarray(sl.origin, complex) + np.array([shift.real, shift.imag, 0])
        shifted = scan_slice(u, replace(sl, origin=tuple(o)), cfg.scan, cfg.M)
        report["dual_shift_max_difference"] = float(np.max(np.abs(shifted.values - scan.values)))
    if cfg.compare is not None:
        u2 = build_potential(cfg.compare, cfg.grid, cfg.tol)
        scan2 = scan_slice(u2, sl, cfg.scan, cfg.M)
        c2 = trace_zero_set(scan2, tau)
        io.write_spectrum_csv(out / "spectrum_compare.csv", scan2)
        io.write_contours(out / "contours_compare.json", c2)
        report["hausdorff_cells"] = hausdorff(contour_cells(contours, scan), contour_cells(c2, scan2))
    return report


def cmd_flow(cfg: FlowConfig, out: Path) -> dict:
    from .mnv import FlowState, evolve, project, stable_dt

    u = project(build_potential(cfg.potential, cfg.grid, cfg.tol))
    dt = cfg.dt if cfg.dt is not None else min(stable_dt(u), 1e-3)
    state = FlowState.start(u)
    chunk = cfg.checkpoint_every * dt if cfg.checkpoint_every else cfg.T
    history = list(state.history)
    k = 0
    io.save_field(out / "checkpoints" / f"u_{k:04d}.json", state.u, meta={"t": state.t})
    while state.t < cfg.T - 1e-12 * max(cfg.T, 1):
        span = min(chunk, cfg.T - state.t)
        state = evolve(FlowState(state.u, state.t, ()), span, dt, cfg.monitor_every)
        history.extend(state.history)
        k += 1
        io.save_field(out / "checkpoints" / f"u_{k:04d}.json", state.u, meta={"t": state.t})
    io.write_trajectory(out / "trajectory.csv", history)
    io.save_field(out / "final.json", state.u, meta={"t": state.t})
    w = [h.willmore for h in history]
    return {
        "T": state.t,
        "dt": dt,
        "willmore_initial": w[0],
        "willmore_drift": float(max(abs(x - w[0]) for x in w)),
        "constraint_residual_max": float(max(h.constraint_residual for h in history)),
        "checkpoints": k + 1,
    }


def _theta_identities(cfg: ThetaConfig) -> dict:
    from .thetafun import theta, theta_gradient

    rng = np.random.default_rng(cfg.seed)
    worst = {"even": 0.0, "periodic": 0.0, "quasi_periodic": 0.0, "gradient": 0.0}
    for i in range(cfg.samples):
        g = int(rng.integers(1, 4))
        x, a = rng.normal(size=(g, g)), rng.normal(size=(g, g))
        om = (x + x.T) / 2 + 1j * (a @ a.T / g + 0.6 * np.eye(g))
        u = 0.7 * (rng.normal(size=g) + 1j * rng.normal(size=g))
        n, m = rng.integers(-1, 2, size=g), rng.integers(-2, 3, size=g)
        t0 = theta(u, om)
        scale = max(1.0, abs(t0))
        worst["even"] = max(worst["even"], abs(theta(-u, om) - t0) / scale)
        worst["periodic"] = max(worst["periodic"], abs(theta(u + m, om) - t0) / scale)
        q = np.exp(-1j * np.pi * (n @ om @ n) - 2j * np.pi * (n @ u)) * t0
        worst["quasi_periodic"] = max(worst["quasi_periodic"], abs(theta(u + om @ n, om) - q) / max(1.0, abs(q)))
        w = 0.05 * np.exp(2j * np.pi * np.arange(32) / 32)
        ref = np.array([np.mean(theta(u + w[:, None] * np.eye(g)[j], om) / w) for j in range(g)])
        worst["gradient"] = max(worst["gradient"], float(np.max(np.abs(theta_gradient(u, om) - ref))) / max(1.0, np.max(np.abs(ref))))
    worst["odd_half_period"] = float(abs(theta(0.5 + 0.5j, [[1j]])))
    return {"max_errors": worst, "passed": all(v < 1e-10 for v in worst.values())}


def cmd_theta(cfg: ThetaConfig, out: Path) -> dict:
    from .thetafun import PeriodMatrix, theta, theta_gradient

    if cfg.mode == "identities":
        return _theta_identities(cfg)
    if cfg.mode == "evaluate":
        if cfg.omega is None or cfg.points is None:
            raise ConfigError("evaluate needs 'omega' and 'points'")
        om = PeriodMatrix(np.array([[complex(*e) for e in row] for row in cfg.omega]))
        rows = []
        for p in cfg.points:
            u = np.array([complex(*e) for e in p])
            if u.shape != (om.g,):
                raise ConfigError(f"point of length {u.shape[0]} for genus {om.g}")
            rows.append({"u": [_c(x) for x in u], "theta": _c(theta(u, om.omega, cfg.tol)),
                         "gradient": [_c(x) for x in theta_gradient(u, om.omega, cfg.tol)]})
        (out / "theta.json").write_text(json.dumps(rows, indent=1))
        return {"points": len(rows)}
    return _theta_genus1(cfg, out)


def _theta_genus1(cfg: ThetaConfig, out: Path) -> dict:
    from dataclasses import replace

    from .genus_one import EllipticCurveData
    from .mnv import mnv_rhs
    from .thetafun import finite_zone_potentials, finite_zone_time_derivative, potential_field, reality_check, spinor_at
    from .weierstrass import dirac_residual

    c = cfg.curve
    curve = EllipticCurveData(T=c.T, x=c.x, zeta0=complex(*c.zeta0))
    curve = curve.flow_matched() if c.mu is None else replace(curve, mu=complex(*c.mu))
    sc = curve.spectral_coordinates()
    lat = curve.potential_lattice()
    (out / "spectral_coordinates.json").write_text(sc.to_json())
    u = potential_field(sc, lat, cfg.grid, t=cfg.t)
    io.save_field(out / "u.json", u, meta={"t": cfg.t, "mu": _c(curve.mu)})
    z = lat.points(cfg.grid)
    uu, vv = finite_zone_potentials(sc, z, np.conj(z), cfg.t)
    d_uv, d_re = reality_check(uu, vv)
    rhs = mnv_rhs(u).values
    exact = finite_zone_time_derivative(sc, z, np.conj(z), cfg.t).real
    residuals = {}
    for p in cfg.spectral_points or [(0.37, 0.61)]:
        psi = spinor_at(sc, curve.point(complex(*p)), lat, cfg.grid, t=cfg.t)
        residuals[f"{p[0]}+{p[1]}i"] = dirac_residual(psi, u)
    return {
        "mu": _c(curve.mu),
        "c1": _c(sc.c1),
        "c2": _c(sc.c2),
        "lattice": [_c(g) for g in lat.generators],
        "reality": {"u_minus_v": d_uv, "u_minus_conj_u": d_re},
        "flow_mismatch": float(np.max(np.abs(exact - rhs))),
        "dirac_residual": residuals,
    }


def cmd_export_mesh(cfg: ExportConfig, out: Path) -> dict:
    s = build_surface(cfg.surface, cfg.grid)
    io.write_obj(out / "mesh.obj", s, wrap=cfg.wrap)
    io.save_surface(out, s)
    return {"vertices": int(np.prod(s.shape)), "periods": s.periods.tolist()}


COMMANDS = {
    "analyze": cmd_analyze,
    "reconstruct": cmd_reconstruct,
    "spectrum": cmd_spectrum,
    "flow": cmd_flow,
    "theta": cmd_theta,
    "export-mesh": cmd_export_mesh,
}


# ---------------------------------------------------------------------------------
# plumbing


def versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("artifact", "numpy", "scipy", "scikit-image", "pydantic"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def config_hash(doc: dict) -> str:
    """SHA-256 of the canonical job document; the output directory is not part of the job."""
    job = {k: v for k, v in doc.items() if k != "out"}
    return hashlib.sha256(json.dumps(job, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, float) and not np.isfinite(x):
        return repr(x)
    return x


def load_config(command: str, args) -> BaseModel:
    doc = {}
    if args.config:
        text = sys.stdin.read() if args.config == "-" else Path(args.config).read_text()
        doc = json.loads(text)
        if not isinstance(doc, dict):
            raise ConfigError("the job document must be a JSON object")
    if args.grid is not None:
        doc["grid"] = list(args.grid)
    if args.out is not None:
        doc["out"] = args.out
    if args.tol is not None:
        doc["tol"] = args.tol
    return CONFIGS[command].model_validate(doc)


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diracsurf", description="Spinor representation of tori: analysis pipelines.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("config", nargs="?", help="JSON job document ('-' reads stdin)")
        s.add_argument("--grid", nargs=2, type=int, metavar=("N", "M"))
        s.add_argument("--out")
        s.add_argument("--tol", type=float)
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    out = Path(args.out or "run")
    manifest = {"command": args.command}
    try:
        cfg = load_config(args.command, args)
    except (ValidationError, ConfigError, ValueError, OSError) as exc:
        print(f"diracsurf: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    doc = cfg.model_dump(mode="json")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    from .spectrum import worker_count

    manifest.update(config=doc, config_hash=config_hash(doc), versions=versions(), workers=worker_count())
    code = EXIT_OK
    try:
        report = COMMANDS[args.command](cfg, out)
        manifest["status"] = "ok"
    except NumericalError as exc:
        code, report = EXIT_NUMERICAL, None
        manifest.update(status="numerical_failure", error=f"{type(exc).__name__}: {exc}")
    except (ConfigError, ValidationError, ValueError, OSError) as exc:
        code, report = EXIT_INVALID, None
        manifest.update(status="validation_failure", error=f"{type(exc).__name__}: {exc}")
    if report is not None:
        (out / "report.json").write_text(json.dumps(_jsonable(report), indent=1))
    manifest["outputs"] = sorted(str(p.relative_to(out)) for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    manifest["exit_code"] = code
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=1))
    if code:
        print(f"diracsurf: {manifest['error']}", file=sys.stderr)
    else:
        print(json.dumps(_jsonable(report), indent=1))
    return code


if __name__ == "__main__":
    sys.exit(main())
