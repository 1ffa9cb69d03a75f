"""JSON, CSV and OBJ formats, atomic writes and run manifests.

Floats are written with ``repr`` (the shortest string that round-trips),
so ``load(save(x)) == x`` holds exactly.
"""
import csv
import io as _io
import json
import os
import tempfile
import warnings
from dataclasses import asdict, dataclass
from importlib import metadata
from pathlib import Path

import numpy as np

from . import _linalg
from .cone import build_cone, polar
from .errors import ConeminqError, InputError, InvalidDirection
from .measures import DiscreteMeasure
from .polytope import CPolytope, wulff_shape

NORMALISE_WARN = 1e-6


def atomic_write(path, data):
    """Write text or bytes via a temporary file in the same directory plus rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj):
    return json.dumps(obj, indent=2) + "\n"


def load_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: "
                         f"{exc.msg}", field=str(path)) from exc


def _vec(value, field, dim=None):
    try:
        v = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise InputError("expected a list of numbers", field) from None
    if v.ndim != 1 or (dim is not None and len(v) != dim) or not np.all(np.isfinite(v)):
        raise InputError(f"expected {dim or 'a'}-vector of finite numbers", field)
    return v


def _num(value, field):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputError("expected a number", field)
    return float(value)


def _require(d, key, field):
    if not isinstance(d, dict):
        raise InputError("expected an object", field)
    if key not in d:
        raise InputError(f"missing key {key!r}", field)
    return d[key]


def _normalised(v, field):
    norm = np.linalg.norm(v)
    if norm == 0:
        raise InputError("zero vector", field)
    if abs(norm - 1) > NORMALISE_WARN:
        warnings.warn(f"{field}: vector normalised (length {norm:.6g})")
    return _linalg.unit(v)


# -- cones ---------------------------------------------------------------

def cone_to_dict(cone):
    if cone.kind == "circular":
        return {"dim": cone.dim, "kind": "circular",
                "axis": cone.axis.tolist(), "half_angle": cone.half_angle}
    return {"dim": cone.dim, "kind": "polyhedral",
            "generators": cone.generators.tolist()}


def cone_from_dict(d, field="cone"):
    dim = _require(d, "dim", field)
    if isinstance(dim, bool) or not isinstance(dim, int):
        raise InputError("dim must be an integer", f"{field}.dim")
    kind = d.get("kind", "circular" if "axis" in d else "polyhedral")
    try:
        if kind == "circular":
            axis = _vec(_require(d, "axis", field), f"{field}.axis", dim)
            alpha = _num(_require(d, "half_angle", field), f"{field}.half_angle")
            return build_cone(dim, axis=axis, half_angle=alpha)
        if kind != "polyhedral":
            raise InputError(f"unknown kind {kind!r}", f"{field}.kind")
        gens = _require(d, "generators", field)
        if not isinstance(gens, list) or not gens:
            raise InputError("expected a non-empty list", f"{field}.generators")
        G = [_normalised(_vec(g, f"{field}.generators[{i}]", dim), f"{field}.generators[{i}]")
             for i, g in enumerate(gens)]
        return build_cone(dim, np.array(G))
    except InputError:
        raise
    except ConeminqError as exc:
        raise InputError(f"{type(exc).__name__}: {exc}", field) from exc


def load_cone(path):
    return cone_from_dict(load_json(path), str(path))


def _cone_ref(value, base, field):
    if isinstance(value, str):
        p = Path(value)
        return load_cone(p if p.is_absolute() else Path(base) / p)
    return cone_from_dict(value, field)


# -- polytopes -----------------------------------------------------------

def polytope_to_dict(P):
    return {"cone": cone_to_dict(P.cone),
            "facets": [{"u": u.tolist(), "h": float(h)} for u, h in zip(P.normals, P.h)]}


def polytope_from_dict(d, base=".", field="polytope"):
    cone = _cone_ref(_require(d, "cone", field), base, f"{field}.cone")
    facets = _require(d, "facets", field)
    if not isinstance(facets, list) or not facets:
        raise InputError("expected a non-empty list", f"{field}.facets")
    U, f = [], []
    for i, fc in enumerate(facets):
        fld = f"{field}.facets[{i}]"
        U.append(_normalised(_vec(_require(fc, "u", fld), f"{fld}.u", cone.dim), f"{fld}.u"))
        h = _num(_require(fc, "h", fld), f"{fld}.h")
        if h >= 0:
            raise InputError("support value must be negative", f"{fld}.h")
        f.append(-h)
    U, f = np.array(U), np.array(f)
    try:
        return wulff_shape(cone, U, f)
    except InvalidDirection as exc:
        # copolar sets may carry normals on the boundary of the polar domain
        if _closed_polar(cone, U):
            return CPolytope(cone, U, -f)
        raise InputError(f"{type(exc).__name__}: {exc}", f"{field}.facets") from exc
    except ConeminqError as exc:
        raise InputError(f"{type(exc).__name__}: {exc}", f"{field}.facets") from exc


def _closed_polar(cone, U, tol=1e-12):
    pc = polar(cone)
    if pc.kind == "circular" and pc.dim > 2:
        return bool(np.all(U @ pc.axis >= np.cos(pc.half_angle) - tol))
    return bool(np.all(U @ pc.facet_normals.T <= tol))


def load_polytope(path):
    return polytope_from_dict(load_json(path), Path(path).parent, str(path))


# -- measures ------------------------------------------------------------

def measure_to_dict(mu):
    atoms = []
    for k, (u, m) in enumerate(zip(mu.directions, mu.masses)):
        atom = {"u": u.tolist(), "mass": float(m)}
        if mu.errors is not None:
            atom["error"] = float(mu.errors[k])
        atoms.append(atom)
    return {"domain": mu.domain, "atoms": atoms}


def measure_from_dict(d, field="measure"):
    domain = d.get("domain", "omega_polar") if isinstance(d, dict) else None
    atoms = _require(d, "atoms", field)
    if not isinstance(atoms, list) or not atoms:
        raise InputError("expected a non-empty list", f"{field}.atoms")
    U, M, E = [], [], []
    for i, a in enumerate(atoms):
        fld = f"{field}.atoms[{i}]"
        U.append(_normalised(_vec(_require(a, "u", fld), f"{fld}.u"), f"{fld}.u"))
        M.append(_num(_require(a, "mass", fld), f"{fld}.mass"))
        if "error" in a:
            E.append(_num(a["error"], f"{fld}.error"))
    try:
        return DiscreteMeasure(np.array(U), np.array(M), domain,
                               np.array(E) if len(E) == len(M) else None)
    except ValueError as exc:
        raise InputError(str(exc), field) from exc


def load_measure(path):
    return measure_from_dict(load_json(path), str(path))


# -- solutions -----------------------------------------------------------

def solution_to_dict(sol, p, q):
    out = polytope_to_dict(sol.polytope)
    out.update({
        "p": p, "q": q,
        "tau1": sol.tau1,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "regime": sol.regime,
        "residuals": [float(r) for r in sol.residuals],
        "objective_trace": [float(v) for v in sol.objective_trace],
        "achieved": measure_to_dict(sol.achieved),
    })
    if sol.dual is not None:
        out["dual"] = polytope_to_dict(sol.dual)
    return out


# -- CSV and OBJ ---------------------------------------------------------

def read_columns(path, names):
    """Read named float columns from a CSV file with a header row."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    if not rows:
        raise InputError("empty CSV", str(path))
    header = [h.strip() for h in rows[0]]
    cols = []
    for name in names:
        if name not in header:
            raise InputError(f"missing column {name!r}", str(path))
        j = header.index(name)
        try:
            cols.append(np.array([float(r[j]) for r in rows[1:] if r]))
        except (ValueError, IndexError):
            raise InputError(f"non-numeric value in column {name!r}", str(path)) from None
    return cols


def csv_text(header, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def obj_text(polygons):
    """Wavefront OBJ with each planar polygon fan-triangulated."""
    lines = []
    faces = []
    base = 1
    for poly in polygons:
        for v in poly:
            lines.append("v " + " ".join(repr(float(c)) for c in v))
        for j in range(1, len(poly) - 1):
            faces.append(f"f {base} {base + j} {base + j + 1}")
        base += len(poly)
    return "\n".join(lines + faces) + "\n"


# -- run manifests -------------------------------------------------------

def tool_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


@dataclass
class RunManifest:
    command: str
    inputs: dict
    params: dict
    outputs: list
    version: str = ""
    wall_time: float = 0.0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        for key in ("command", "inputs", "params", "outputs"):
            _require(d, key, "manifest")
        return cls(d["command"], dict(d["inputs"]), dict(d["params"]), list(d["outputs"]),
                   d.get("version", ""), float(d.get("wall_time", 0.0)))


def manifest_path(output):
    return Path(f"{output}.manifest.json")


def save_manifest(manifest, output):
    atomic_write(manifest_path(output), dumps(manifest.to_dict()))


def load_manifest(path):
    return RunManifest.from_dict(load_json(path))
