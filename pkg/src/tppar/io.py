"""Problem specifications, field files and deterministic report writers.

Problem specs are YAML documents; see README.md for the schema.  Field files
use the little-endian ``TPFIELD1`` layout documented in ``write_field``.
"""

import io as _io
import math
import struct
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import BadMagic, MeanModePresent, SchemaError, SizeMismatch
from .grid import GroupGrid, TPField, extend_zero, make_grid
from .oracles import ModeSpec
from .symbols import DifferentialSymbol, OperatorTuple

MAGIC = b"TPFIELD1"
VERSION = 1
FLOAT_FMT = "%.16e"


# ------------------------------------------------------------------ YAML with lines

class _LineLoader(yaml.SafeLoader):
    pass


class _Node(dict):
    """Mapping that remembers the source line of itself and of each key."""
    line = 0
    key_lines: dict = {}


def _construct_mapping(loader, node, deep=False):
    loader.flatten_mapping(node)
    out = _Node()
    out.line = node.start_mark.line + 1
    out.key_lines = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        out[key] = loader.construct_object(value_node, deep=True)
        out.key_lines[key] = key_node.start_mark.line + 1
    return out


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _line(obj, key=None):
    if isinstance(obj, _Node):
        return obj.key_lines.get(key, obj.line) if key is not None else obj.line
    return None


def _err(msg, obj=None, key=None, cls=SchemaError, witness=None):
    ln = _line(obj, key)
    where = f"line {ln}: " if ln else ""
    w = dict(witness or {})
    if ln:
        w["line"] = ln
    return cls(where + msg, w or None)


def _get(obj, key, kind, default=None, required=False):
    if key not in obj:
        if required:
            raise _err(f"missing required key '{key}'", obj)
        return default
    val = obj[key]
    ok = {
        "int": isinstance(val, int) and not isinstance(val, bool),
        "num": isinstance(val, (int, float)) and not isinstance(val, bool),
        "str": isinstance(val, str),
        "list": isinstance(val, list),
        "map": isinstance(val, dict),
    }[kind]
    if not ok:
        raise _err(f"key '{key}' must be of type {kind}, got {type(val).__name__}", obj, key)
    return val


# ----------------------------------------------------------------------- spec

@dataclass
class ProblemSpec:
    T: float
    n: int
    m: int
    interior: DifferentialSymbol
    boundary: list
    domain: str
    boundary_kind: str
    trace_flavor: str
    N_t: int
    axes: list
    f_modes: list = field(default_factory=list)
    g_modes: list = field(default_factory=list)
    f_file: str = None
    tolerances: dict = field(default_factory=dict)
    tasks: list = field(default_factory=list)
    sweep: dict = field(default_factory=dict)
    p: float = 2.0

    @property
    def tuple_(self):
        if self.domain == "whole":
            return None
        if self.boundary_kind == "dirichlet":
            from .halfspace import dirichlet_tuple
            return dirichlet_tuple(self.interior)
        return OperatorTuple(self.interior, tuple(self.boundary))

    def grid(self):
        half = self.n - 1 if self.domain == "half" else None
        return make_grid(self.T, self.n, self.N_t, self.axes, half)


DEFAULT_TOLERANCES = {"residual": 1e-2, "oracle": 1e-3, "sweep_drift": 0.05}
KNOWN_TASKS = ("check", "solve", "verify", "sweep", "oracle-compare")


def _parse_symbol(terms, n, where, label):
    if not isinstance(terms, list) or not terms:
        raise _err(f"{label} must be a non-empty list of terms", where)
    coeffs = {}
    order = 0
    for t in terms:
        if not isinstance(t, dict):
            raise _err(f"{label}: each term must be a mapping", where)
        alpha = _get(t, "alpha", "list", required=True)
        if len(alpha) != n or not all(isinstance(a, int) and a >= 0 for a in alpha):
            raise _err(f"{label}: alpha must be {n} non-negative integers", t, "alpha")
        c = complex(float(_get(t, "re", "num", 0.0)), float(_get(t, "im", "num", 0.0)))
        coeffs[tuple(alpha)] = coeffs.get(tuple(alpha), 0) + c
        if c != 0:
            order = max(order, sum(alpha))
    return DifferentialSymbol(n, order, coeffs)


def _parse_modes(items, n_freq, T, where, label, half_profile=False):
    if not isinstance(items, list):
        raise _err(f"{label} must be a list of modes", where)
    out = []
    for it in items:
        if not isinstance(it, dict):
            raise _err(f"{label}: each mode must be a mapping", where)
        q = _get(it, "k", "int", required=True)
        if q == 0:
            raise _err(f"{label}: mode with k = 0 carries a time mean", it, "k", MeanModePresent)
        key = "xi_prime" if "xi_prime" in it else "xi"
        xi = it.get(key, [])
        if not isinstance(xi, list) or len(xi) != n_freq:
            raise _err(f"{label}: '{key}' must list {n_freq} frequencies", it, key)
        amp = _get(it, "amplitude", "map", {"re": 1.0, "im": 0.0})
        a = complex(float(_get(amp, "re", "num", 0.0)), float(_get(amp, "im", "num", 0.0)))
        center, width = None, 1.0
        prof = it.get("profile")
        if prof is not None:
            if not isinstance(prof, dict) or prof.get("kind", "gaussian") != "gaussian":
                raise _err(f"{label}: only gaussian profiles are supported", it, "profile")
            center = float(_get(prof, "center", "num", required=True))
            width = float(_get(prof, "width", "num", 1.0))
        elif half_profile:
            raise _err(f"{label}: half-space right-hand sides need a normal profile", it)
        out.append(ModeSpec(2 * math.pi * q / T, tuple(float(v) for v in xi), a, center, width))
    return out


def parse_spec(text):
    """Parse and validate a YAML problem spec; errors name the offending line."""
    try:
        doc = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        ln = mark.line + 1 if mark is not None else None
        raise SchemaError(f"line {ln}: malformed YAML ({exc})" if ln else f"malformed YAML ({exc})",
                          {"line": ln} if ln else None) from None
    if not isinstance(doc, dict):
        raise SchemaError("spec must be a mapping at top level")
    T = float(_get(doc, "period", "num", 2 * math.pi))
    if T <= 0:
        raise _err("period must be positive", doc, "period")
    n = _get(doc, "dimension", "int", required=True)
    if n < 1:
        raise _err("dimension must be >= 1", doc, "dimension")
    domain = _get(doc, "domain", "str", "whole")
    if domain not in ("whole", "half"):
        raise _err("domain must be 'whole' or 'half'", doc, "domain")
    interior = _parse_symbol(_get(doc, "interior", "list", required=True), n, doc, "interior")
    m = _get(doc, "m", "int", interior.order // 2)
    if interior.order != 2 * m:
        raise _err(f"interior operator has order {interior.order}, expected 2m = {2 * m}", doc, "interior")
    kind = _get(doc, "boundary_kind", "str", "dirichlet" if domain == "half" else "none")
    flavor = _get(doc, "trace_flavor", "str", "partial")
    if flavor not in ("partial", "symbol"):
        raise _err("trace_flavor must be 'partial' or 'symbol'", doc, "trace_flavor")
    boundary = []
    if domain == "half" and kind not in ("dirichlet", "general"):
        raise _err("boundary_kind must be 'dirichlet' or 'general'", doc, "boundary_kind")
    if domain == "half" and kind == "general":
        ops = _get(doc, "boundary", "list", required=True)
        if len(ops) != m:
            raise _err(f"expected {m} boundary operators, got {len(ops)}", doc, "boundary")
        boundary = [_parse_symbol(b, n, doc, f"boundary[{j}]") for j, b in enumerate(ops)]

    grid = _get(doc, "grid", "map", required=True)
    N_t = _get(grid, "N_t", "int", required=True)
    axes_raw = _get(grid, "axes", "list", required=True)
    if len(axes_raw) != n:
        raise _err(f"grid.axes must list {n} axes", grid, "axes")
    axes = []
    for ax in axes_raw:
        if not isinstance(ax, dict):
            raise _err("each axis needs L and N", grid, "axes")
        axes.append((float(_get(ax, "L", "num", required=True)), _get(ax, "N", "int", required=True)))

    data = _get(doc, "data", "map", {})
    n_f = n - 1 if domain == "half" else n
    f_modes = _parse_modes(data.get("f", []), n_f, T, data, "data.f", half_profile=domain == "half")
    g_modes = []
    if domain == "half":
        g_raw = data.get("g", [[] for _ in range(m)])
        if not isinstance(g_raw, list) or len(g_raw) != m:
            raise _err(f"data.g must hold {m} mode lists", data, "g")
        g_modes = [_parse_modes(gm, n - 1, T, data, f"data.g[{j}]") for j, gm in enumerate(g_raw)]
    tol = dict(DEFAULT_TOLERANCES)
    for k, v in _get(doc, "tolerances", "map", {}).items():
        tol[k] = float(v)
    tasks = _get(doc, "tasks", "list", ["check"])
    for t in tasks:
        if t not in KNOWN_TASKS:
            raise _err(f"unknown task '{t}'", doc, "tasks")
    sweep = dict(_get(doc, "sweep", "map", {}))
    spec = ProblemSpec(T, n, m, interior, boundary, domain, kind, flavor, N_t, axes,
                       f_modes, g_modes, data.get("f_file"), tol, tasks, sweep,
                       float(_get(doc, "p", "num", 2.0)))
    try:
        spec.grid()
    except Exception as exc:
        raise _err(str(exc), doc, "grid") from None
    return spec


def wire_to_symbol_traces(spec, g_modes):
    """Convert ∂-trace Dirichlet data to symbol traces: D^j = (-i)^j ∂^j."""
    if spec.domain != "half" or spec.boundary_kind != "dirichlet" or spec.trace_flavor == "symbol":
        return g_modes
    return [[ModeSpec(md.k, md.xi, md.amplitude * (-1j) ** j, md.center, md.width) for md in gm]
            for j, gm in enumerate(g_modes)]


# ----------------------------------------------------------------- field files

def write_field(path, u):
    """Binary field file.

    Layout: b"TPFIELD1", then little-endian u32 version, u32 n, u32 N_t,
    per axis (u32 N_i, f64 L_i), f64 T, u8 state (0 physical, 1 spectral), then
    N_t * prod N_i complex values (f64 re, f64 im) in time-major row-major order.
    Half fields are stored zero-extended to the full box.
    """
    if u.half:
        u = extend_zero(u)
    g = u.grid
    buf = _io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<III", VERSION, g.n, g.N_t))
    for N, L in zip(g.N, g.L):
        buf.write(struct.pack("<Id", N, L))
    buf.write(struct.pack("<d", g.T))
    buf.write(struct.pack("<B", 0 if u.state == "physical" else 1))
    buf.write(np.ascontiguousarray(u.data, dtype="<c16").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def read_field(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != MAGIC:
        raise BadMagic(f"{path}: not a TPFIELD1 file")
    pos = 8
    try:
        version, n, N_t = struct.unpack_from("<III", raw, pos)
        pos += 12
        if version != VERSION:
            raise BadMagic(f"{path}: unsupported version {version}")
        axes = []
        for _ in range(n):
            N, L = struct.unpack_from("<Id", raw, pos)
            pos += 12
            axes.append((L, N))
        (T,) = struct.unpack_from("<d", raw, pos)
        pos += 8
        (state,) = struct.unpack_from("<B", raw, pos)
        pos += 1
    except struct.error:
        raise SizeMismatch(f"{path}: truncated header") from None
    shape = (N_t,) + tuple(N for _, N in axes)
    expected = pos + 16 * int(np.prod(shape))
    if len(raw) != expected:
        raise SizeMismatch(f"{path}: expected {expected} bytes, found {len(raw)}",
                           {"expected": expected, "found": len(raw)})
    data = np.frombuffer(raw, dtype="<c16", offset=pos).reshape(shape).astype(np.complex128)
    grid = GroupGrid(T, n, N_t, tuple(L for L, _ in axes), tuple(N for _, N in axes))
    return TPField(grid, data, "physical" if state == 0 else "spectral")


# --------------------------------------------------------------------- reports

def fmt_float(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return FLOAT_FMT % x


def _json(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return {True: "true", False: "false", None: "null"}[obj]
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        s = fmt_float(obj)
        return s if s[-1].isdigit() else f'"{s}"'
    if isinstance(obj, complex):
        return _json({"re": obj.real, "im": obj.imag}, indent, level)
    if isinstance(obj, str):
        return _json_str(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json_str(str(k))}: {_json(v, indent, level + 1)}"
                 for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{_json(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _json_str(s):
    import json
    return json.dumps(s)


def dumps_json(obj, indent=2):
    """JSON text with every float in fixed 17-significant-digit notation."""
    return _json(obj, indent, 0) + "\n"


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(obj))


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                cells.append(fmt_float(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
