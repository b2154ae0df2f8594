"""JSON and CSV serialization, schema validation and run manifests."""

import csv
import hashlib
import json
import platform
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from .errors import SchemaError
from .pathalg import HermitianPath, UnitaryPath

FORMAT_VERSION = 1


def _schema(name):
    text = resources.files("celkit.schemas").joinpath(f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc, name):
    try:
        jsonschema.validate(doc, _schema(name))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{name} schema: {exc.message} at {where}") from None


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays, tuples and fractions to JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if np.isfinite(x):
            return x
        return None
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def canonical_dumps(doc):
    return json.dumps(to_jsonable(doc), sort_keys=True, separators=(",", ":"))


def digest(doc):
    return hashlib.sha256(canonical_dumps(doc).encode()).hexdigest()


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_json(doc, path):
    text = json.dumps(to_jsonable(doc), sort_keys=True, indent=1) + "\n"
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None


def _pack(samples):
    s = np.asarray(samples, dtype=complex)
    g, n = s.shape[0], s.shape[1]
    flat = s.reshape(g, n * n)
    return np.stack([flat.real, flat.imag], axis=-1).tolist()


def _unpack(samples, n):
    a = np.asarray(samples, dtype=float)
    if a.ndim != 3 or a.shape[1] != n * n or a.shape[2] != 2:
        raise SchemaError(f"samples must be (points, {n * n}, 2)")
    return (a[..., 0] + 1j * a[..., 1]).reshape(a.shape[0], n, n)


def path_to_dict(P, kind="unitary"):
    return {"format": "celkit-path", "version": FORMAT_VERSION, "kind": kind, "n": int(P.n),
            "grid": P.grid.tolist(), "samples": _pack(P.samples),
            "meta": to_jsonable(getattr(P, "meta", None) or {})}


def path_from_dict(doc, check=True):
    validate(doc, "path")
    n = int(doc["n"])
    samples = _unpack(doc["samples"], n)
    meta = doc.get("meta", {})
    if doc.get("kind", "unitary") == "hermitian":
        return HermitianPath(doc["grid"], samples, check=check)
    P = UnitaryPath(doc["grid"], samples, meta=meta, check=check)
    _attach_generator(P)
    return P


def _attach_generator(P):
    """Restore the analytic form of generated paths so refinement stays exact."""
    from . import examples

    g = P.meta.get("generator")
    try:
        if g == "uniexam":
            ref = examples.gen_uniexam(int(P.meta["n"]), grid=P.grid)[0]
        elif g == "ex2":
            ref = examples.gen_ex2(examples.Ex2Params(
                n=int(P.meta["n"]), m=int(P.meta["m"]), k=int(P.meta["k"]),
                defect_phases=tuple(P.meta["defect_phases"]), grid=P.grid))
        elif g == "random-detone":
            ref = examples.gen_random_detone(int(P.meta["n"]), seed=int(P.meta["seed"]), grid=P.grid)
        else:
            return
    except (KeyError, ValueError):
        return
    if ref.samples.shape == P.samples.shape and np.allclose(ref.samples, P.samples, atol=1e-12):
        P.func = ref.func


def write_path(P, path, manifest_digest=None, kind="unitary"):
    doc = path_to_dict(P, kind)
    if manifest_digest is not None:
        doc["manifest_digest"] = manifest_digest
    write_json(doc, path)
    return doc


def read_path(path, check=True):
    return path_from_dict(read_json(path), check=check)


def write_csv(rows, header, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_csv_cell(x) for x in r])


def _csv_cell(x):
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def versions():
    from . import __version__

    return {"celkit": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def make_manifest(command, parameters, seed=None, tolerances=None, inputs=()):
    """Run manifest; ``digest`` covers everything except the output list."""
    core = {"command": command, "parameters": to_jsonable(parameters), "seed": seed,
            "tolerances": to_jsonable(tolerances or {}), "versions": versions(),
            "inputs": {str(p): file_digest(p) for p in inputs}}
    return {"core": core, "digest": digest(core), "outputs": {}}


def finalize_manifest(manifest, outputs, path):
    manifest["outputs"] = {str(p): file_digest(p) for p in outputs}
    validate(manifest, "manifest")
    write_json(manifest, path)
    return manifest
