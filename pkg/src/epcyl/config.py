"""Scenario files: YAML with sections params, domain, boundary, solver,
coercivity, norms, sweep and output.

Every key is checked against a schema. Unknown keys, wrong types and
out-of-range values are collected with the line they appear on and
raised together as one `ConfigError`.
"""

from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError, EpcylError

_NUM = (int, float)


class _Opt:
    """Schema entry: accepted types, default and an optional range check."""

    def __init__(self, types, default=None, check=None, desc="", required=False):
        self.types = types if isinstance(types, tuple) else (types,)
        self.default = default
        self.check = check
        self.desc = desc
        self.required = required


def _pos(v):
    return v > 0


def _in(*vals):
    return lambda v: v in vals


def _between(lo, hi):
    return lambda v: lo <= v <= hi


PARAMS = {
    "gamma": _Opt(_NUM, required=True, desc="> 1"),
    "J0": _Opt(_NUM, required=True, desc="> 0"),
    "S0": _Opt(_NUM, required=True, desc="> 0"),
    "b0": _Opt(_NUM, required=True, desc="in (0, rho_s)"),
    "rho0": _Opt(_NUM, required=True, desc="in (0, rho_s)"),
    "E0": _Opt(_NUM, 0.0, desc="must be 0"),
}
DOMAIN = {
    "shape": _Opt(str, "disk", _in("disk", "rectangle"), "disk or rectangle"),
    "L": _Opt((int, float, str), "auto",
              lambda v: v == "auto" or (not isinstance(v, str) and v > 0),
              "positive number or 'auto'"),
    "nx1": _Opt(int, 32, _between(16, 512), "in [16, 512]"),
    "nr": _Opt((int, type(None)), None, lambda v: v is None or 16 <= v <= 1024, "in [16, 1024]"),
    "ncross": _Opt((int, type(None)), None, lambda v: v is None or 9 <= v <= 257, "in [9, 257]"),
    "n_modes": _Opt(int, 8, _between(1, 32), "in [1, 32]"),
    "n_steps": _Opt(int, 4096, _between(16, 10 ** 6), "in [16, 1e6]"),
    "delta_bar": _Opt((int, float, type(None)), None, lambda v: v is None or v > 0, "> 0"),
}
PROFILE = {
    "family": _Opt(str, "constant", _in("constant", "bump", "cosine", "power", "poly", "csv")),
    "amplitude": _Opt(_NUM, 0.0),
    "base": _Opt((int, float, type(None)), None),
    "r0": _Opt(_NUM, 0.1),
    "r1": _Opt(_NUM, 0.6),
    "k": _Opt(_NUM, 1.0),
    "carrier": _Opt(_NUM, 0.0),
    "power": _Opt(_NUM, 1.0),
    "path": _Opt((str, type(None)), None),
}
PROFILE_NAMES = ("b", "u_en", "v_en", "w_en", "S_en", "E_en", "E_ex")
BOUNDARY = {
    "eps_bar": _Opt(_NUM, 0.25, lambda v: 0 < v <= 0.25, "in (0, 1/4]"),
}
SOLVER = {
    "tol": _Opt(_NUM, 1e-10, _pos, "> 0"),
    "max_iters": _Opt(int, 50, _between(1, 10000), "in [1, 10000]"),
    "damping": _Opt(_NUM, 1.0, lambda v: 0 < v <= 1, "in (0, 1]"),
    "inner_tol": _Opt(_NUM, 1e-12, _pos, "> 0"),
    "max_sweeps": _Opt(int, 200, _between(1, 100000), "in [1, 1e5]"),
    "norm_order": _Opt(int, 3, _between(1, 4), "in [1, 4]"),
    "sigma_max": _Opt((int, float, type(None)), None, lambda v: v is None or v > 0, "> 0"),
    "check_bands": _Opt(bool, True),
    "outer_tol": _Opt(_NUM, 1e-10, _pos, "> 0"),
    "max_outer": _Opt(int, 40, _between(1, 1000), "in [1, 1000]"),
    "initial": _Opt(str, "entrance", _in("entrance", "background"), "entrance or background"),
}
COERCIVITY = {
    "a_frak": _Opt((int, float, type(None)), None, lambda v: v is None or v > 0, "> 0"),
    "L": _Opt(_NUM, 0.02, _pos, "> 0"),
    "refine": _Opt(int, 4, _between(1, 64), "in [1, 64]"),
    "oracle": _Opt(bool, True),
}
NORMS = {
    "field": _Opt((str, type(None)), None),
    "order": _Opt(int, 3, _between(1, 4), "in [1, 4]"),
    "columns": _Opt((list, type(None)), None),
}
SWEEP = {
    "subcommand": _Opt(str, "axisym",
                       _in("background", "potential", "axisym", "coercivity", "validate")),
    "key": _Opt(str, required=True, desc="dotted path such as boundary.profiles.u_en.amplitude"),
    "values": _Opt(list, required=True),
}
OUTPUT = {
    "dir": _Opt(str, "out"),
    "streamlines": _Opt(bool, False),
    "verbosity": _Opt(int, 1, _between(0, 2), "in [0, 2]"),
}
SECTIONS = {"params": PARAMS, "domain": DOMAIN, "boundary": BOUNDARY, "solver": SOLVER,
            "coercivity": COERCIVITY, "norms": NORMS, "sweep": SWEEP, "output": OUTPUT}


# ----------------------------------------------------------------- loading

def _lines(node, path=(), out=None, dups=None):
    """Map key paths to 1-based line numbers; record duplicate keys."""
    out = {} if out is None else out
    dups = [] if dups is None else dups
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        seen = set()
        for k, v in node.value:
            key = k.value
            if key in seen:
                dups.append((path + (key,), k.start_mark.line + 1))
            seen.add(key)
            out[path + (key,)] = k.start_mark.line + 1
            _lines(v, path + (key,), out, dups)
    return out, dups


def load_yaml(text: str):
    """(data, line map). YAML syntax errors become ConfigError with a line."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError(f"{where}invalid YAML: {getattr(exc, 'problem', exc)}",
                          errors=[str(exc)]) from None
    if node is None:
        raise ConfigError("empty configuration", errors=["empty configuration"])
    lines, dups = _lines(node)
    return data, lines, dups


# -------------------------------------------------------------- validation

class _Errors(list):
    def add(self, lines, path, msg):
        ln = None
        for i in range(len(path), -1, -1):
            if tuple(path[:i]) in lines:
                ln = lines[tuple(path[:i])]
                break
        where = ".".join(path) if path else "<root>"
        self.append(f"line {ln}: {where}: {msg}" if ln else f"{where}: {msg}")


def _type_ok(v, types) -> bool:
    if isinstance(v, bool) and bool not in types:
        return False
    if float in types and isinstance(v, int) and not isinstance(v, bool):
        return True
    return isinstance(v, types)


def _section(raw, schema, path, lines, errs) -> dict:
    out = {}
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        errs.add(lines, path, "must be a mapping")
        raw = {}
    for key in raw:
        if key not in schema:
            errs.add(lines, path + (str(key),), f"unknown key (allowed: {', '.join(schema)})")
    for key, opt in schema.items():
        if key not in raw:
            if opt.required:
                errs.add(lines, path, f"missing required key {key!r}")
            out[key] = copy.deepcopy(opt.default)
            continue
        v = raw[key]
        if isinstance(v, str) and float in opt.types:
            try:
                v = float(v)  # YAML 1.1 reads 1e-10 as a string
            except ValueError:
                pass
        if not _type_ok(v, opt.types):
            errs.add(lines, path + (key,), f"wrong type {type(v).__name__}")
            out[key] = copy.deepcopy(opt.default)
            continue
        if float in opt.types and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)  # 2 and 2.0 hash alike
        if opt.check is not None and not opt.check(v):
            errs.add(lines, path + (key,), f"value {v!r} out of range ({opt.desc})")
        out[key] = v
    return out


def _profile(raw, path, lines, errs, base_dir: Path) -> dict:
    p = _section(raw, PROFILE, path, lines, errs)
    if p["family"] == "csv":
        if not p["path"]:
            errs.add(lines, path, "csv profiles need a 'path'")
            return p
        fp = Path(p["path"])
        fp = fp if fp.is_absolute() else base_dir / fp
        from .boundary_data import read_profile_csv
        try:
            p["_table"] = read_profile_csv(fp)
            p["sha256"] = hashlib.sha256(fp.read_bytes()).hexdigest()
        except ConfigError as exc:
            errs.add(lines, path + ("path",), str(exc))
    elif p["path"] is not None:
        errs.add(lines, path + ("path",), "path is only used by the csv family")
    return p


@dataclass
class Scenario:
    """A validated scenario.

    ``canonical`` holds every section with defaults filled in; it is what
    the scenario hash is computed from.
    """

    params: object
    domain: dict
    boundary: dict
    solver: dict
    coercivity: dict
    norms: dict
    sweep: dict | None
    output: dict
    canonical: dict
    base_dir: Path = field(default_factory=Path)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def hash(self) -> str:
        from ._io import scenario_hash
        return scenario_hash(self.canonical)

    # builders used by the runner
    def profiles(self) -> dict:
        from .boundary_data import Profile
        out = {}
        for name, p in self.boundary["profiles"].items():
            kw = {k: p[k] for k in ("family", "amplitude", "base", "r0", "r1", "k", "carrier",
                                    "power")}
            if p["family"] == "csv":
                kw["table"] = p["_table"]
            out[name] = Profile(**kw)
        return out

    def boundary_data(self, E_exit: float):
        """BoundaryData against a background whose exit field is E_exit."""
        from .boundary_data import BoundaryData, Profile, background_reference
        ax = self.boundary.get("b_axial")
        kwargs = {}
        if ax is not None:
            kw = {k: ax[k] for k in ("family", "amplitude", "base", "r0", "r1", "k", "carrier",
                                     "power")}
            if ax["family"] == "csv":
                kw["table"] = ax["_table"]
            kwargs["b_axial"] = Profile(**kw)
        return BoundaryData(self.domain["shape"], self.boundary["eps_bar"], self.profiles(),
                            background_reference(self.params, E_exit), **kwargs)


def parse_config(text: str, base_dir=None) -> Scenario:
    """Parse and validate scenario text.

    Raises
    ------
    ConfigError
        With ``info["errors"]`` listing every problem as "line N: key: message".
    """
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    data, lines, dups = load_yaml(text)
    errs = _Errors()
    for path, ln in dups:
        errs.append(f"line {ln}: {'.'.join(path)}: duplicate key")
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping of sections",
                          errors=["configuration must be a mapping of sections"])
    for key in data:
        if key not in SECTIONS:
            errs.add(lines, (str(key),), f"unknown section (allowed: {', '.join(SECTIONS)})")
    if "params" not in data:
        errs.append("params: section is required")
    if "domain" not in data:
        errs.append("domain: section is required")
    sec = {}
    params_ok = True
    for name, schema in SECTIONS.items():
        if name == "boundary" or (name == "sweep" and "sweep" not in data):
            continue
        n0 = len(errs)
        sec[name] = _section(data.get(name), schema, (name,), lines, errs)
        if name == "params":
            params_ok = len(errs) == n0
    if "sweep" not in data:
        sec["sweep"] = None

    # boundary: eps_bar plus nested profiles and b_axial
    braw = data.get("boundary") or {}
    if not isinstance(braw, dict):
        errs.add(lines, ("boundary",), "must be a mapping")
        braw = {}
    flat = {k: v for k, v in braw.items() if k not in ("profiles", "b_axial")}
    bnd = _section(flat, BOUNDARY, ("boundary",), lines, errs)
    praw = braw.get("profiles") or {}
    if not isinstance(praw, dict):
        errs.add(lines, ("boundary", "profiles"), "must be a mapping")
        praw = {}
    bnd["profiles"] = {}
    for name, p in praw.items():
        path = ("boundary", "profiles", str(name))
        if name not in PROFILE_NAMES:
            errs.add(lines, path, f"unknown profile (allowed: {', '.join(PROFILE_NAMES)})")
            continue
        bnd["profiles"][name] = _profile(p, path, lines, errs, base_dir)
    bnd["b_axial"] = (_profile(braw["b_axial"], ("boundary", "b_axial"), lines, errs, base_dir)
                      if "b_axial" in braw else None)
    sec["boundary"] = bnd

    params = None
    if "params" in data and params_ok:
        from .background import GasParams
        try:
            params = GasParams(**sec["params"])
        except EpcylError as exc:
            msg = str(exc)
            bad = msg.split()[0] if msg.split() and msg.split()[0] in PARAMS else None
            errs.add(lines, ("params",) + ((bad,) if bad else ()), msg)
    if sec["domain"]["shape"] == "rectangle" and sec["domain"]["nr"] is not None:
        errs.add(lines, ("domain", "nr"), "nr applies to the disk only")
    if errs:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errs), errors=list(errs))

    canonical = copy.deepcopy(sec)
    for p in list(canonical["boundary"]["profiles"].values()) + [canonical["boundary"]["b_axial"]]:
        if p is not None:
            p.pop("_table", None)
    canonical["output"] = {k: v for k, v in canonical["output"].items() if k != "dir"}
    return Scenario(params, sec["domain"], sec["boundary"], sec["solver"], sec["coercivity"],
                    sec["norms"], sec["sweep"], sec["output"], canonical, base_dir, data)


def load_config(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", errors=[f"missing file {path}"])
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise ConfigError(f"{path}: not UTF-8 text", errors=["not UTF-8"]) from None
    return parse_config(text, base_dir=path.parent)


def set_dotted(raw: dict, key: str, value) -> dict:
    """Copy of `raw` with the dotted key set (intermediate mappings created)."""
    out = copy.deepcopy(raw)
    cur = out
    parts = key.split(".")
    for p in parts[:-1]:
        nxt = cur.get(p)
        if not isinstance(nxt, dict):
            nxt = {}
            cur[p] = nxt
        cur = nxt
    cur[parts[-1]] = value
    return out
