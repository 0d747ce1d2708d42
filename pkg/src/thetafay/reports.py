"""Deterministic report serialization and the surface cache.

JSON reports are rendered with a fixed 17-significant-digit float
format and sorted keys so that identical inputs produce byte-identical
files.  Sampled fields go to CSV with the same float format.  The
surface cache stores the built period data keyed by the config content
hash, with an embedded checksum.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import sys

import numpy as np

from .surfaces import SurfaceError, SurfaceModel, build_surface, config_hash

FLOAT_FORMAT = "%.17g"


def format_float(x) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        raise ValueError("non-finite value in report: %r" % x)
    # -0.0 and 0.0 compare equal but render differently; pin one form
    if x == 0.0:
        x = 0.0
    return FLOAT_FORMAT % x


def _canonical(obj):
    """Reduce to JSON-safe types; complex -> [re, im], floats wrapped so
    the serializer can emit them with the fixed format."""
    if isinstance(obj, dict):
        out = {}
        for k in obj:
            if not isinstance(k, str):
                raise ValueError("report keys must be strings: %r" % (k,))
            out[k] = _canonical(obj[k])
        return out
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_canonical(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        c = complex(obj)
        return [_Float(c.real), _Float(c.imag)]
    if isinstance(obj, (float, np.floating)):
        return _Float(float(obj))
    if obj is None or isinstance(obj, str):
        return obj
    raise ValueError("unserializable report value: %r" % (obj,))


class _Float(float):
    pass


def _render(obj) -> str:
    if isinstance(obj, _Float):
        return format_float(obj)
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, list):
        return "[" + ", ".join(_render(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ", ".join(
            json.dumps(k) + ": " + _render(obj[k])
            for k in sorted(obj)) + "}"
    raise ValueError("unserializable value: %r" % (obj,))


def dumps(obj) -> str:
    return _render(_canonical(obj))


def write_report(path, obj) -> str:
    text = dumps(obj) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return text


def write_field_csv(path, header, rows):
    """Sampled field table: header is a list of column names, each row a
    sequence of real numbers (split complex values upstream)."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_float(v) for v in row) + "\n")


def sample_arguments(B, count, seed):
    """count random theta arguments z = 2*pi*i u + B v with u, v drawn
    uniformly from [0,1)^g -- lossless coverage by quasi-periodicity."""
    B = np.asarray(B, dtype=complex)
    g = B.shape[0]
    rng = np.random.default_rng(int(seed))
    out = []
    for _ in range(int(count)):
        u = rng.random(g)
        v = rng.random(g)
        out.append(2j * np.pi * u + B @ v)
    return out


# ---------------------------------------------------------------------------
# surface cache


def surface_payload(surface: SurfaceModel) -> dict:
    rs = surface.real_structure
    return {
        "genus": surface.genus,
        "B": surface.B.entries,
        "oddChar": {"deltaPrime": list(surface.odd_char.delta_prime),
                    "deltaDoublePrime":
                        list(surface.odd_char.delta_double_prime)},
        "H": None if rs is None else np.asarray(rs.H),
        "tauKind": None if rs is None else rs.tau_kind,
        "strategy": surface.metadata["strategy"],
        "buildDefect": float(surface.metadata["build_defect"]),
    }


def _cache_path(cache_dir, key):
    return os.path.join(cache_dir, "surface-%s.json" % key)


def cache_surface(config, cache_dir, quadrature_order=24):
    """Build (or reuse) a surface and keep its period data in the cache.

    Returns (surface, cache_path, status) with status one of
    {"built", "cached", "rebuilt"}.  A cache file whose embedded config
    differs from the requested one is a hash collision and is refused;
    a file failing its checksum is rebuilt with a warning.
    """
    key = config_hash(config)
    path = _cache_path(cache_dir, key)
    config_text = dumps(config)
    status = "built"
    if os.path.exists(path):
        entry = _load_cache_entry(path)
        if entry is not None and entry["config"] != config_text:
            raise SurfaceError(
                "cache hash collision at %s: stored config differs from "
                "the requested one; refusing to overwrite" % path)
        if entry is not None:
            surface = build_surface(config, quadrature_order)
            return surface, path, "cached"
        print("warning: corrupted cache entry %s; rebuilding" % path,
              file=sys.stderr)
        status = "rebuilt"
    surface = build_surface(config, quadrature_order)
    payload_text = dumps(surface_payload(surface))
    entry = {
        "configHash": key,
        "config": config_text,
        "payload": payload_text,
        "checksum": hashlib.sha256(payload_text.encode()).hexdigest(),
    }
    os.makedirs(cache_dir, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(dumps(entry) + "\n")
    return surface, path, status


def _load_cache_entry(path):
    """Parsed cache entry with a valid checksum, else None."""
    try:
        with open(path) as fh:
            entry = json.load(fh)
        payload = entry["payload"]
        if hashlib.sha256(payload.encode()).hexdigest() != entry["checksum"]:
            return None
        json.loads(payload)
        return entry
    except (ValueError, KeyError, TypeError):
        return None
