"""File formats: field files, surfaces, OBJ meshes, trajectory and spectrum tables.

A field file is a JSON manifest plus a raw little-endian binary of row-major
float64 values (``re, im`` interleaved for complex fields)::

    {"lattice": [[re, im], [re, im]], "shape": [N, M], "kind": "periodic",
     "epsilon": [1, 1], "dtype": "f64", "data": "u.bin"}

Extra keys ``multipliers``, ``drift``, ``origin`` (and any caller metadata
under ``meta``) make Floquet fields and non-closing coordinates round-trip too.
Round trips are bit-exact.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import GridField, Lattice
from .weierstrass import PotentialField, SurfaceImmersion

_LE = "<f8"


def _pair(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _complex(p) -> complex:
    try:
        re, im = p
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"expected [re, im], got {p!r}") from exc
    return complex(float(re), float(im))


def save_field(path, f: GridField | PotentialField, meta: dict | None = None) -> Path:
    """Write ``path`` (manifest) and ``path.with_suffix('.bin')`` (samples)."""
    f = f.u if isinstance(f, PotentialField) else f
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = path.with_suffix(".bin")
    if f.is_real:
        raw = np.ascontiguousarray(f.values, dtype=_LE)
        dtype = "f64"
    else:
        vals = np.ascontiguousarray(f.values, dtype=np.complex128)
        raw = np.ascontiguousarray(vals.view(np.float64).astype(_LE))
        dtype = "c128"
    raw.tofile(data)
    kind = f.kind
    doc = {
        "lattice": [_pair(f.lattice.gamma1), _pair(f.lattice.gamma2)],
        "shape": list(f.shape),
        "kind": kind,
        "epsilon": list(f.epsilon) if kind != "floquet" else None,
        "dtype": dtype,
        "data": data.name,
        "multipliers": [_pair(m) for m in f.multipliers],
        "drift": [_pair(d) for d in f.drift],
        "origin": _pair(f.origin),
    }
    if meta:
        doc["meta"] = meta
    path.write_text(json.dumps(doc, indent=1))
    return path


def read_manifest(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read field manifest {path}: {exc}") from exc


def load_field(path) -> GridField:
    path = Path(path)
    doc = read_manifest(path)
    try:
        lat = Lattice(*(_complex(g) for g in doc["lattice"]))
        n, m = (int(x) for x in doc["shape"])
        dtype = doc["dtype"]
        data = path.parent / doc["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed field manifest {path}: {exc}") from exc
    if dtype not in ("f64", "c128"):
        raise ConfigError(f"unknown dtype {dtype!r}")
    raw = np.fromfile(data, dtype=_LE)
    expected = n * m * (2 if dtype == "c128" else 1)
    if raw.size != expected:
        raise ConfigError(f"{data.name}: expected {expected} float64 values, found {raw.size}")
    raw = raw.astype(np.float64)
    vals = raw.view(np.complex128).reshape(n, m) if dtype == "c128" else raw.reshape(n, m)
    if "multipliers" in doc:
        mult = tuple(_complex(x) for x in doc["multipliers"])
    else:
        mult = tuple(doc.get("epsilon") or (1, 1))
    drift = tuple(_complex(x) for x in doc.get("drift", [[0, 0], [0, 0]]))
    origin = _complex(doc.get("origin", [0, 0]))
    return GridField(lat, vals, multipliers=mult, drift=drift, origin=origin)


def load_potential(path) -> PotentialField:
    f = load_field(path)
    if not f.is_real:
        if np.max(np.abs(f.values.imag)) > 0:
            raise ConfigError("potential field must be real")
        f = f.like(f.values.real)
    return PotentialField(f)


# ---------------------------------------------------------------------------------
# surfaces


def save_surface(directory, s: SurfaceImmersion, name: str = "surface") -> Path:
    """Three coordinate field files plus ``<name>.json`` listing them."""
    directory = Path(directory)
    names = []
    for a, c in enumerate(s.coords, 1):
        names.append(save_field(directory / f"{name}_x{a}.json", c).name)
    doc = {"coords": names, "conformal": s.conformal, "quasi_periodic": s.quasi_periodic}
    out = directory / f"{name}.json"
    out.write_text(json.dumps(doc, indent=1))
    return out


def load_surface(path) -> SurfaceImmersion:
    path = Path(path)
    doc = read_manifest(path)
    try:
        coords = [load_field(path.parent / n) for n in doc["coords"]]
    except KeyError as exc:
        raise ConfigError(f"surface manifest {path} lacks 'coords'") from exc
    if len(coords) != 3:
        raise ConfigError("a surface needs exactly three coordinate fields")
    return SurfaceImmersion(*coords, conformal=doc.get("conformal", True), quasi_periodic=doc.get("quasi_periodic", True))


def write_obj(path, s: SurfaceImmersion, wrap: bool | None = None) -> Path:
    """Vertices in grid order (row ``j``, column ``i``), quad faces with torus wraparound.

    Wraparound faces are dropped along generators with a nonzero period
    unless ``wrap`` forces them.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    xyz = s.array()
    n, m = s.shape
    periods = s.periods
    wrap_i = bool(np.all(periods[:, 0] == 0)) if wrap is None else wrap
    wrap_j = bool(np.all(periods[:, 1] == 0)) if wrap is None else wrap
    idx = lambda j, i: (j % n) * m + (i % m) + 1
    lines = [f"# {n}x{m} grid, periods {periods.tolist()}"]
    for j in range(n):
        for i in range(m):
            lines.append("v {:.17g} {:.17g} {:.17g}".format(*xyz[:, j, i]))
    for j in range(n if wrap_j else n - 1):
        for i in range(m if wrap_i else m - 1):
            lines.append(f"f {idx(j, i)} {idx(j, i + 1)} {idx(j + 1, i + 1)} {idx(j + 1, i)}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_obj(path) -> tuple[np.ndarray, np.ndarray]:
    verts, faces = [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(x.split("/")[0]) - 1 for x in parts[1:]])
    return np.array(verts), np.array(faces, dtype=int)


# ---------------------------------------------------------------------------------
# tables


def write_trajectory(path, history) -> Path:
    from .mnv import Diagnostics

    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(Diagnostics.FIELDS)
        for d in history:
            w.writerow([repr(float(x)) for x in d.row()])
    return path


def read_trajectory(path) -> list[dict]:
    with Path(path).open() as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


SPECTRUM_COLUMNS = ("re_k1", "im_k1", "re_k2", "im_k2", "re_lambda", "im_lambda", "indicator", "M")


def write_spectrum_csv(path, scan) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SPECTRUM_COLUMNS)
        for s in scan.samples:
            k = s.k
            w.writerow([repr(x) for x in (k.k1.real, k.k1.imag, k.k2.real, k.k2.imag, k.lam.real, k.lam.imag, s.indicator)] + [s.truncation])
    return path


def write_contours(path, contours) -> Path:
    """Polylines in slice parameters and in ``(k1, k2, lambda)`` as ``[re, im]`` triples."""
    doc = [
        {
            "closed": c.closed,
            "threshold": c.threshold,
            "params": np.asarray(c.params).tolist(),
            "k": [[_pair(p.k1), _pair(p.k2), _pair(p.lam)] for p in c.points],
        }
        for c in contours
    ]
    path = Path(path)
    path.write_text(json.dumps(doc))
    return path
