"""Geometry files, run configuration and CSV output."""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import MultiPatchGeometry
from .splines import KnotError, KnotVector, NurbsPatch

FORMAT_HEADER = "NURBS_MULTIPATCH"
FORMAT_VERSION = 1


class GeometryParseError(ValueError):
    """Malformed geometry file; the message carries line and column."""


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


# --------------------------------------------------------------------------
# geometry


class _Tokens:
    def __init__(self, text: str, source: str):
        self.source = source
        self.lines = text.splitlines()
        self.row = 0

    def _loc(self, row, col=1):
        return f"{self.source}: line {row + 1}, column {col}"

    def line(self, expected: str):
        while self.row < len(self.lines):
            raw = self.lines[self.row].split("#", 1)[0]
            self.row += 1
            if raw.strip():
                toks, cols, pos = [], [], 0
                for t in raw.split():
                    pos = raw.index(t, pos)
                    toks.append(t)
                    cols.append(pos + 1)
                    pos += len(t)
                return toks, cols, self.row - 1
        raise GeometryParseError(f"{self._loc(len(self.lines))}: unexpected end of file, expected {expected}")

    def keyword(self, word: str, nargs: int | None = None):
        toks, cols, row = self.line(f"'{word}'")
        if toks[0] != word:
            raise GeometryParseError(f"{self._loc(row, cols[0])}: expected '{word}', found '{toks[0]}'")
        if nargs is not None and len(toks) - 1 != nargs:
            col = cols[min(len(toks) - 1, nargs)] if len(toks) > 1 else cols[0] + len(word)
            raise GeometryParseError(f"{self._loc(row, col)}: '{word}' takes {nargs} value(s), got {len(toks) - 1}")
        return toks[1:], cols[1:], row

    def number(self, tok, col, row, kind=float):
        try:
            val = kind(tok)
        except ValueError:
            name = "integer" if kind is int else "number"
            raise GeometryParseError(f"{self._loc(row, col)}: expected {name}, found '{tok}'") from None
        if kind is float and not math.isfinite(val):
            raise GeometryParseError(f"{self._loc(row, col)}: non-finite value '{tok}'")
        return val


def parse_geometry_text(text: str, source: str = "<string>", name: str | None = None) -> MultiPatchGeometry:
    t = _Tokens(text, source)
    vals, cols, row = t.keyword(FORMAT_HEADER, 1)
    version = t.number(vals[0], cols[0], row, int)
    if version != FORMAT_VERSION:
        raise GeometryParseError(f"{t._loc(row, cols[0])}: unsupported format version {version}")
    vals, cols, row = t.keyword("patches", 1)
    npatch = t.number(vals[0], cols[0], row, int)
    if npatch < 1:
        raise GeometryParseError(f"{t._loc(row, cols[0])}: need at least one patch")
    patches = []
    for _ in range(npatch):
        vals, cols, row = t.keyword("patch", 1)
        pid = vals[0]
        vals, cols, row = t.keyword("degrees", 2)
        degs = [t.number(v, c, row, int) for v, c in zip(vals, cols)]
        knots = []
        for key, deg in zip(("knots_u", "knots_v"), degs):
            vals, cols, row = t.keyword(key)
            if not vals:
                raise GeometryParseError(f"{t._loc(row)}: '{key}' needs a count")
            count = t.number(vals[0], cols[0], row, int)
            if len(vals) - 1 != count:
                raise GeometryParseError(
                    f"{t._loc(row, cols[0])}: patch {pid}: '{key}' declares {count} values, found {len(vals) - 1}")
            kv = np.array([t.number(v, c, row) for v, c in zip(vals[1:], cols[1:])])
            try:
                knots.append(KnotVector(kv, deg))
            except KnotError as err:
                raise GeometryParseError(f"{t._loc(row)}: patch {pid}: {err}") from None
        vals, cols, row = t.keyword("net", 2)
        k1, k2 = (t.number(v, c, row, int) for v, c in zip(vals, cols))
        expect = (knots[0].num_basis, knots[1].num_basis)
        if (k1, k2) != expect:
            raise GeometryParseError(
                f"{t._loc(row, cols[0])}: patch {pid}: net {k1}x{k2} does not match knot vectors ({expect[0]}x{expect[1]})")
        ctrl = np.empty((k1, k2, 3))
        w = np.empty((k1, k2))
        for j in range(k2):
            for i in range(k1):
                toks, cols, row = t.line(f"control point 'x y z w' ({i + j * k1 + 1} of {k1 * k2}) of patch {pid}")
                if len(toks) != 4:
                    raise GeometryParseError(f"{t._loc(row, cols[0])}: patch {pid}: control point needs 'x y z w'")
                nums = [t.number(v, c, row) for v, c in zip(toks, cols)]
                if nums[3] <= 0:
                    raise GeometryParseError(f"{t._loc(row, cols[3])}: patch {pid}: weight must be positive")
                ctrl[i, j] = nums[:3]
                w[i, j] = nums[3]
        patches.append(NurbsPatch(knots[0], knots[1], ctrl, w))
    try:
        toks, cols, row = t.line("end of file")
    except GeometryParseError:
        pass
    else:
        raise GeometryParseError(f"{t._loc(row, cols[0])}: unexpected trailing content '{toks[0]}'")
    return MultiPatchGeometry(patches, name=name or Path(source).stem)


def parse_geometry(path) -> MultiPatchGeometry:
    """Read a multipatch NURBS geometry file."""
    path = Path(path)
    return parse_geometry_text(path.read_text(), str(path), name=path.stem)


def format_geometry(geometry: MultiPatchGeometry) -> str:
    out = [f"{FORMAT_HEADER} {FORMAT_VERSION}", f"patches {len(geometry)}"]
    for n, p in enumerate(geometry):
        out.append(f"patch {n}")
        out.append(f"degrees {p.knots_u.degree} {p.knots_v.degree}")
        for key, kv in (("knots_u", p.knots_u), ("knots_v", p.knots_v)):
            out.append(f"{key} {kv.values.size} " + " ".join(repr(float(v)) for v in kv.values))
        k1, k2 = p.weights.shape
        out.append(f"net {k1} {k2}")
        for j in range(k2):
            for i in range(k1):
                x, y, z = p.control[i, j]
                out.append(" ".join(repr(float(v)) for v in (x, y, z, p.weights[i, j])))
    return "\n".join(out) + "\n"


def write_geometry(geometry: MultiPatchGeometry, path) -> None:
    Path(path).write_text(format_geometry(geometry))


def bundled_geometry(name: str) -> Path:
    """Path of a bundled fixture (``sphere``, ``unit_square``, ``two_squares``)."""
    path = Path(__file__).with_name("data") / f"{name}.geo"
    if not path.exists():
        raise FileNotFoundError(f"no bundled geometry named {name!r}")
    return path


# --------------------------------------------------------------------------
# configuration


def _floats(text: str, n: int | None = None):
    try:
        vals = tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"expected numbers, got '{text}'") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"expected {n} numbers, got '{text}'")
    return vals


def _ints(text: str):
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"expected integers, got '{text}'") from None


def _bool(text: str):
    t = text.strip().lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"expected on/off, got '{text}'")


def _opt_int(text: str):
    return None if text.strip().lower() in ("auto", "none") else int(text)


def _choice(*options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ConfigError(f"expected one of {', '.join(options)}, got '{t}'")
        return t
    return parse


def _sign(text):
    v = int(text)
    if v not in (-1, 1):
        raise ConfigError(f"expected -1 or +1, got '{text}'")
    return v


@dataclass
class RunConfig:
    """All settings of a run; keys mirror the config file."""

    frequency: float = 3e6
    frequency_min: float = 1e-9
    frequency_max: float = 1e9
    frequency_count: int = 19
    degree: int = 1
    level: int = 2
    degrees: tuple = (1, 2)
    levels: tuple = (1, 2, 3)
    excitation: str = "dipole"
    dipole_position: tuple = (0.2, 0.2, 0.2)
    dipole_moment: tuple = (0.0, 0.1, 0.1)
    dipole_phase: str = "outgoing"
    excitation_pairing: str = "tangential"
    medium_epsilon: float = 8.8541878128e-12
    medium_mu: float = 4.0e-7 * math.pi
    quadrature_base_degree: int | None = None
    quadrature_alpha: float = 1.0
    quadrature_singular_degree: int | None = None
    quadrature_local_degree: int | None = None
    quadrature_max_degree: int = 20
    deflation: bool = True
    system_scaling: str = "normalized"
    system_continuity_sign: int = -1
    postprocess_reference_sign: int = -1
    samples_count: int = 100
    samples_radius: float = 2.0
    condition_method: str = "svd"
    assembly_workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.frequency < 0 or self.frequency_min < 0:
            raise ConfigError("frequencies must be >= 0")
        if self.frequency_min > self.frequency_max:
            raise ConfigError("frequency.min must not exceed frequency.max")
        if self.frequency_count < 1:
            raise ConfigError("frequency.count must be >= 1")
        if self.degree < 1 or any(p < 1 for p in self.degrees):
            raise ConfigError("spline degree must be >= 1")
        if self.level < 0 or any(lv < 0 for lv in self.levels):
            raise ConfigError("refinement level must be >= 0")
        if list(self.levels) != sorted(self.levels):
            raise ConfigError("levels must be ascending")
        if self.medium_epsilon <= 0 or self.medium_mu <= 0:
            raise ConfigError("medium constants must be positive")
        if self.assembly_workers < 1:
            raise ConfigError("assembly.workers must be >= 1")
        if self.samples_count < 1:
            raise ConfigError("samples.count must be >= 1")

    def frequency_grid(self) -> np.ndarray:
        if self.frequency_count == 1:
            return np.array([self.frequency_min])
        if self.frequency_min == 0:
            raise ConfigError("log-spaced sweep needs frequency.min > 0")
        return np.logspace(np.log10(self.frequency_min), np.log10(self.frequency_max), self.frequency_count)


_PARSERS = {
    "frequency": float,
    "frequency.min": float,
    "frequency.max": float,
    "frequency.count": int,
    "degree": int,
    "level": int,
    "degrees": _ints,
    "levels": _ints,
    "excitation": _choice("dipole", "none"),
    "dipole.position": lambda s: _floats(s, 3),
    "dipole.moment": lambda s: _floats(s, 3),
    "dipole.phase": _choice("outgoing", "printed"),
    "excitation.pairing": _choice("tangential", "rotated"),
    "medium.epsilon": float,
    "medium.mu": float,
    "quadrature.base_degree": _opt_int,
    "quadrature.alpha": float,
    "quadrature.singular_degree": _opt_int,
    "quadrature.local_degree": _opt_int,
    "quadrature.max_degree": int,
    "system.deflation": _bool,
    "system.scaling": _choice("normalized", "si"),
    "system.continuity_sign": _sign,
    "postprocess.reference_sign": _sign,
    "samples.count": int,
    "samples.radius": float,
    "system.condition_estimator": _choice("svd", "norm1", "mp", "none"),
    "assembly.workers": int,
}


_ATTRS = {"system.deflation": "deflation", "system.condition_estimator": "condition_method"}


def _attr(key: str) -> str:
    return _ATTRS.get(key, key.replace(".", "_"))


def parse_config_text(text: str, source: str = "<string>", base: RunConfig | None = None) -> RunConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = dataclasses.asdict(base) if base is not None else {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {n}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"{source}: line {n}: unknown key '{key}'")
        try:
            values[_attr(key)] = _PARSERS[key](val)
        except (ValueError, ConfigError) as err:
            raise ConfigError(f"{source}: line {n}: {key}: {err}") from None
    return RunConfig(**values)


def parse_config(path) -> RunConfig:
    path = Path(path)
    return parse_config_text(path.read_text(), str(path))


def _format_value(v):
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "on" if v else "off"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_format_value(x) for x in v)
    return str(v)


def format_config(config: RunConfig) -> str:
    lines = [f"{key} = {_format_value(getattr(config, _attr(key)))}" for key in _PARSERS]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# csv


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".16e")
    return str(v)


def write_csv(rows, schema, path) -> None:
    """Write dict rows with the given column order; floats keep 17 digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(schema)
        for row in rows:
            missing = [c for c in schema if c not in row]
            if missing:
                raise KeyError(f"row lacks columns {missing}")
            w.writerow([_cell(row[c]) for c in schema])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
