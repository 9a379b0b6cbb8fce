"""Material configuration files.

A material file is a JSON object with a ``name``, a density ``rho`` (kg/m^3)
and either isotropic constants ``E_gpa``, ``nu`` or the 21 upper-triangle
entries ``c_voigt_gpa`` of the 6x6 Voigt stiffness (row-major, order
11, 22, 33, 23, 13, 12).  Moduli are given in GPa and converted to Pa here.

The names ``copper``, ``aluminum`` and ``steel`` resolve to bundled files.
"""

from __future__ import annotations

import hashlib
import json
import re
from importlib import resources
from pathlib import Path

import numpy as np

from .elastic import ElasticMaterial, ElasticTensor, IsotropicParams, isotropic_material
from .errors import ConfigError, InvalidParameterError

__all__ = ["BUNDLED", "load_material", "parse_material", "resolve_material_path", "config_hash"]

BUNDLED = ("copper", "aluminum", "steel")
_ISO_KEYS = {"name", "E_gpa", "nu", "rho"}
_ANISO_KEYS = {"name", "c_voigt_gpa", "rho"}
GPA = 1e9


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(r'"' + re.escape(key) + r'"\s*:')
    for i, line in enumerate(text.splitlines(), 1):
        if pat.search(line):
            return i
    return None


def _fail(source: str, text: str, key: str | None, msg: str):
    line = _line_of(text, key) if key else None
    where = f"{source}:{line}" if line else source
    raise ConfigError(f"{where}: {msg}")


def _number(source, text, data, key) -> float:
    val = data[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        _fail(source, text, key, f"key '{key}' must be a number, got {val!r}")
    return float(val)


def parse_material(text: str, source: str = "<string>") -> ElasticMaterial:
    """Parse material JSON ``text``; errors name the key and line."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be an object")
    keys = set(data)
    if "c_voigt_gpa" in keys and ("E_gpa" in keys or "nu" in keys):
        _fail(source, text, "c_voigt_gpa", "key 'c_voigt_gpa' cannot be combined with 'E_gpa'/'nu'")
    allowed = _ANISO_KEYS if "c_voigt_gpa" in keys else _ISO_KEYS
    for key in sorted(keys - allowed):
        _fail(source, text, key, f"unknown key '{key}'")
    for key in sorted(allowed - keys):
        raise ConfigError(f"{source}: missing key '{key}'")
    name = data["name"]
    if not isinstance(name, str) or not name:
        _fail(source, text, "name", "key 'name' must be a nonempty string")
    rho = _number(source, text, data, "rho")
    if not rho > 0:
        _fail(source, text, "rho", f"key 'rho' must be positive, got {rho!r}")
    try:
        if "c_voigt_gpa" in data:
            entries = data["c_voigt_gpa"]
            if not isinstance(entries, list) or len(entries) != 21 or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in entries
            ):
                _fail(source, text, "c_voigt_gpa", "key 'c_voigt_gpa' must be a list of 21 numbers")
            V = np.zeros((6, 6))
            V[np.triu_indices(6)] = np.asarray(entries, dtype=float) * GPA
            V = V + np.triu(V, 1).T
            try:
                tensor = ElasticTensor.from_voigt(V)
            except InvalidParameterError as exc:
                _fail(source, text, "c_voigt_gpa", f"key 'c_voigt_gpa': {exc}")
            return ElasticMaterial(tensor, rho, name)
        E = _number(source, text, data, "E_gpa") * GPA
        nu = _number(source, text, data, "nu")
        if not E > 0:
            _fail(source, text, "E_gpa", f"key 'E_gpa' must be positive, got {data['E_gpa']!r}")
        if not -1.0 < nu < 0.5:
            _fail(source, text, "nu", f"key 'nu' must lie in (-1, 0.5), got {nu!r}")
        return isotropic_material(IsotropicParams(E, nu, rho), name)
    except InvalidParameterError as exc:
        key = next((k for k in ("rho", "nu", "E_gpa") if k in str(exc)), None)
        _fail(source, text, key, str(exc))


def resolve_material_path(spec: str | Path) -> Path | None:
    """Filesystem path for ``spec``; ``None`` for a bundled material name."""
    if str(spec) in BUNDLED and not Path(spec).exists():
        return None
    return Path(spec)


def _read(spec: str | Path) -> tuple[str, str]:
    path = resolve_material_path(spec)
    if path is None:
        text = resources.files("strohsign").joinpath("materials").joinpath(f"{spec}.json").read_text(encoding="utf-8")
        return text, f"<bundled:{spec}>"
    try:
        return path.read_text(encoding="utf-8"), str(path)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read material file: {exc.strerror}") from None


def load_material(spec: str | Path) -> ElasticMaterial:
    """Load a material from a JSON file or a bundled name."""
    text, source = _read(spec)
    return parse_material(text, source)


def config_hash(*parts) -> str:
    """Short SHA-256 digest of the run parameters (reprs joined by NUL)."""
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode())
        h.update(b"\0")
    return h.hexdigest()[:16]
