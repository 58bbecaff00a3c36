"""JSON serialisation of models, reduced models and manifold maps.

Floats are written with ``repr`` precision by the standard ``json`` module,
which round-trips every double exactly.
"""
from __future__ import annotations

import json

import numpy as np

from .errors import SchemaError
from .model import ModalModel, PhysicalModel, canonical_entries, dense_to_entries
from .reduced import ManifoldMap, ReducedModel


def _rows(A):
    return [[float(v) for v in row] for row in np.asarray(A)]


def physical_to_dict(model):
    """Core model layout with canonical sorted-index tensor entries."""
    n = model.n
    mass = "identity" if np.array_equal(model.mass, np.eye(n)) else _rows(model.mass)
    quad = canonical_entries(model.quad_idx, model.quad_val, 3)
    cubic = canonical_entries(model.cubic_idx, model.cubic_val, 4)
    return {"n": n, "mass": mass, "stiffness": _rows(model.stiffness),
            "quad": [[int(s), int(i), int(j), float(v)] for s, i, j, v in quad if v != 0.0],
            "cubic": [[int(s), int(i), int(j), int(k), float(v)]
                      for s, i, j, k, v in cubic if v != 0.0]}


def _canonical_rows(rows, order, n, name):
    seen = set()
    out = []
    for r, row in enumerate(rows):
        if not isinstance(row, (list, tuple)) or len(row) != order + 1:
            raise SchemaError(f"field '{name}' row {r} must have {order} indices and a value")
        try:
            idx = tuple(int(v) for v in row[:order])
            val = float(row[order])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"field '{name}' row {r} is malformed: {exc}") from exc
        if any(i != v for i, v in zip(idx, row[:order])):
            raise SchemaError(f"field '{name}' row {r} has non-integer indices")
        if min(idx) < 0 or max(idx) >= n:
            raise SchemaError(f"field '{name}' row {r} index out of range for n={n}")
        if list(idx) != sorted(idx):
            raise SchemaError(f"field '{name}' row {r} is not in canonical sorted index order")
        if idx in seen:
            raise SchemaError(f"field '{name}' row {r} duplicates index {idx}")
        seen.add(idx)
        out.append(idx + (val,))
    return out


def physical_from_dict(data):
    for key in ("n", "stiffness"):
        if key not in data:
            raise SchemaError(f"model file is missing field '{key}'")
    n = data["n"]
    if not isinstance(n, int) or n < 1:
        raise SchemaError("field 'n' must be a positive integer")
    mass = data.get("mass", "identity")
    M = np.eye(n) if mass == "identity" else np.asarray(mass, dtype=float)
    K = np.asarray(data["stiffness"], dtype=float)
    if M.shape != (n, n):
        raise SchemaError(f"field 'mass' must be {n}x{n} or 'identity'")
    if K.shape != (n, n):
        raise SchemaError(f"field 'stiffness' must be {n}x{n}")
    quad = _canonical_rows(data.get("quad", []), 3, n, "quad")
    cubic = _canonical_rows(data.get("cubic", []), 4, n, "cubic")
    return PhysicalModel.from_canonical(M, K, quad, cubic)


def modal_to_dict(mm):
    g = dense_to_entries(mm.g)
    h = dense_to_entries(mm.h)
    out = {"kind": "modal", "omega": [float(w) for w in mm.omega], "V": _rows(mm.V),
           "g": [[int(s), int(i), int(j), float(v)] for s, i, j, v in
                 canonical_entries(g[:, :3], g[:, 3], 3) if v != 0.0],
           "h": [[int(s), int(i), int(j), int(k), float(v)] for s, i, j, k, v in
                 canonical_entries(h[:, :4], h[:, 4], 4) if v != 0.0]}
    if mm.damping_ratio is not None:
        out["damping_ratio"] = [float(x) for x in mm.damping_ratio]
    return out


def modal_from_dict(data):
    from .model import expand_canonical, entries_to_dense

    for key in ("omega", "g", "h"):
        if key not in data:
            raise SchemaError(f"modal file is missing field '{key}'")
    omega = np.asarray(data["omega"], dtype=float)
    N = omega.size
    V = np.asarray(data["V"], dtype=float) if "V" in data else np.eye(N)
    tens = []
    for name, order in (("g", 3), ("h", 4)):
        rows = expand_canonical(_canonical_rows(data[name], order, N, name), order)
        idx = np.array([r[:order] for r in rows], dtype=int).reshape(-1, order)
        val = np.array([r[order] for r in rows])
        tens.append(entries_to_dense(idx, val, N, order))
    return ModalModel(omega, V, tens[0], tens[1], data.get("damping_ratio"))


def model_to_dict(model):
    if isinstance(model, PhysicalModel):
        return physical_to_dict(model)
    if isinstance(model, ModalModel):
        return modal_to_dict(model)
    raise TypeError("expected a PhysicalModel or ModalModel")


def model_from_dict(data):
    if not isinstance(data, dict):
        raise SchemaError("model file must hold a JSON object")
    if data.get("kind") == "modal" or "omega" in data:
        return modal_from_dict(data)
    return physical_from_dict(data)


def rom_to_dict(rm, mp=None, extra=None):
    """ROM layout ``{method, masters, omega, monomials, map, ...}``."""
    out = rm.to_dict()
    if mp is not None:
        out["map"] = mp.to_dict()
    if extra:
        out.update(extra)
    return out


def rom_from_dict(data):
    """Return ``(ReducedModel, ManifoldMap or None)``."""
    if not isinstance(data, dict):
        raise SchemaError("ROM file must hold a JSON object")
    rm = ReducedModel.from_dict(data)
    mp = ManifoldMap.from_dict(data["map"]) if data.get("map") else None
    return rm, mp


def save_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc


def save_model(model, path):
    save_json(model_to_dict(model), path)


def load_model(path):
    return model_from_dict(load_json(path))


def save_rom(rm, path, mp=None, extra=None):
    save_json(rom_to_dict(rm, mp, extra), path)


def load_rom(path):
    return rom_from_dict(load_json(path))
