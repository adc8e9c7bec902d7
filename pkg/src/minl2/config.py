"""Experiment configuration: TOML parsing, canonical serialization, hashing.

A config file is flat TOML with typed sections (see docs/config-grammar.md).
Parsing validates everything eagerly and raises ConfigError with the file,
section, and field named, so the CLI can map any config problem to exit
code 2 before touching output paths. serialize_config emits a canonical
form; the config hash is the SHA-256 of that canonical text, which makes
it independent of comments, key order, and whitespace in the source file.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import weights as wt
from .domains import DomainError, DomainModel, PhiSpec
from .minimizer import IdealSpec, MinimizerError
from .polynomials import normalize

SUBCOMMANDS = ("compute-g", "check-concavity", "check-linearity",
               "bergman-ratio", "verify-ode", "verify-identities",
               "extension-check")

DEFAULT_TOLERANCES = {
    "check": 1e-8,
    "layer_cake": 1e-6,
    "int_parts": 1e-9,
    "pythagoras": 1e-10,
    "extension": 1e-9,
    "decay": 1e-4,
}

_SECTIONS = ("run", "domain", "phi", "ideal", "weight", "weights", "datum",
             "grid", "solver", "tolerances", "extension", "output")


class ConfigError(ValueError):
    """Malformed, incomplete, or inconsistent experiment configuration."""


class _Section:
    """Typed key extraction with leftover-key detection."""

    def __init__(self, name: str, data: dict, where: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{where}: [{name}] must be a table")
        self.name = name
        self.data = dict(data)
        self.where = where

    def take(self, key, kinds, default=None, required=False):
        if key not in self.data:
            if required:
                raise ConfigError(
                    f"{self.where}: [{self.name}] is missing required "
                    f"key '{key}'")
            return default
        value = self.data.pop(key)
        if kinds is float and isinstance(value, int) \
                and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, kinds) or isinstance(value, bool) \
                and kinds is not bool:
            raise ConfigError(
                f"{self.where}: [{self.name}] key '{key}' has the wrong "
                f"type (got {type(value).__name__})")
        return value

    def finish(self):
        if self.data:
            extra = ", ".join(sorted(self.data))
            raise ConfigError(
                f"{self.where}: unknown key(s) in [{self.name}]: {extra}")


def _index_tuple(raw, n, where):
    if not isinstance(raw, list) or len(raw) != n or \
            not all(isinstance(k, int) and not isinstance(k, bool) and k >= 0
                    for k in raw):
        raise ConfigError(f"{where}: datum index must be a list of {n} "
                          f"nonnegative integers, got {raw!r}")
    return tuple(int(k) for k in raw)


def _complex_value(raw, where):
    if isinstance(raw, bool):
        raise ConfigError(f"{where}: datum value must be numeric")
    if isinstance(raw, (int, float)):
        return complex(float(raw), 0.0)
    if isinstance(raw, list) and len(raw) == 2 and \
            all(isinstance(v, (int, float)) and not isinstance(v, bool)
                for v in raw):
        return complex(float(raw[0]), float(raw[1]))
    raise ConfigError(f"{where}: datum value must be a number or a "
                      f"[re, im] pair, got {raw!r}")


@dataclass(frozen=True)
class WeightSpec:
    """Declarative weight family; build() constructs the WeightFunction."""

    family: str
    params: tuple

    def param(self, key, default=None):
        return dict(self.params).get(key, default)

    def build(self, base_dir: str = ".") -> wt.WeightFunction:
        p = dict(self.params)
        try:
            if self.family == "constant":
                return wt.constant(p["value"], T=p["T"])
            if self.family == "exp_rate":
                return wt.exp_rate(p["alpha"], T=p["T"])
            if self.family == "rational":
                return wt.rational(list(p["num"]), list(p["den"]), T=p["T"])
            if self.family == "tabulated":
                ts, cs = _read_weight_table(Path(base_dir) / p["path"])
                return wt.tabulated(ts, cs)
        except wt.WeightError as exc:
            raise ConfigError(f"[weight] {self.family}: {exc}") from exc
        raise ConfigError(f"unknown weight family '{self.family}'")


def _read_weight_table(path: Path):
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"[weight] tabulated: cannot read {path}: "
                          f"{exc}") from exc
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["t", "c"]:
        raise ConfigError(f"[weight] tabulated: {path} must start with "
                          f"header 't,c'")
    ts, cs = [], []
    for i, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            ts.append(float(row[0]))
            cs.append(float(row[1]))
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"[weight] tabulated: {path} line {i}: "
                              f"{exc}") from exc
    return ts, cs


def _parse_weight(sec: _Section) -> WeightSpec:
    family = sec.take("family", str, required=True)
    if family == "constant":
        params = (("T", sec.take("T", float, 0.0)),
                  ("value", sec.take("value", float, 1.0)))
    elif family == "exp_rate":
        params = (("T", sec.take("T", float, 0.0)),
                  ("alpha", sec.take("alpha", float, required=True)))
    elif family == "rational":
        num = sec.take("num", list, required=True)
        den = sec.take("den", list, required=True)
        for name, coeffs in (("num", num), ("den", den)):
            if not coeffs or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool)
                    for v in coeffs):
                raise ConfigError(f"{sec.where}: [{sec.name}] '{name}' must "
                                  f"be a nonempty numeric list")
        params = (("T", sec.take("T", float, 0.0)),
                  ("den", tuple(float(v) for v in den)),
                  ("num", tuple(float(v) for v in num)))
    elif family == "tabulated":
        params = (("path", sec.take("path", str, required=True)),)
    else:
        raise ConfigError(f"{sec.where}: unknown weight family '{family}'")
    sec.finish()
    return WeightSpec(family=family, params=params)


@dataclass(frozen=True)
class GridSpec:
    """Evaluation grid in the exhaustion parameter t."""

    t_min: float = 0.0
    t_max: float = 8.0
    count: int = 81
    spacing: str = "linear"

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.t_min])
        if self.spacing == "log":
            return np.geomspace(self.t_min, self.t_max, self.count)
        return np.linspace(self.t_min, self.t_max, self.count)


@dataclass(frozen=True)
class ExtensionSpec:
    """Cutoff placement for the extension feasibility check."""

    t0: float = 1.0
    widths: tuple = (1.0, 0.5, 0.25)
    pole_weighted: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    label: str
    op: str | None
    domain: DomainModel
    phi: PhiSpec
    ideal_order: int
    weights: tuple
    datum: tuple
    grid: GridSpec
    resolution: int
    degree: int
    method: str
    angular_nodes: int
    tolerances: tuple
    extension: ExtensionSpec
    csv_name: str
    json_name: str
    base_dir: str = field(default=".", compare=False)

    def tol(self, name: str) -> float:
        table = dict(DEFAULT_TOLERANCES)
        table.update(dict(self.tolerances))
        return table[name]

    def weight(self, index: int = 0) -> wt.WeightFunction:
        return self.weights[index].build(self.base_dir)

    def datum_dict(self) -> dict:
        return {idx: val for idx, val in self.datum}

    def ideal(self) -> IdealSpec:
        return IdealSpec(self.ideal_order)

    def t_values(self) -> np.ndarray:
        return self.grid.values()

    def artifact_names(self):
        csv_name = self.csv_name or f"{self.label}.csv"
        json_name = self.json_name or f"{self.label}.json"
        return csv_name, json_name


def _from_mapping(data: dict, *, label_default: str, base_dir: str,
                  where: str) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: top level must be a table")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"{where}: unknown section(s): "
                          f"{', '.join(sorted(unknown))}")

    run = _Section("run", data.get("run", {}), where)
    label = run.take("label", str, label_default)
    op = run.take("op", str)
    run.finish()
    if op is not None and op not in SUBCOMMANDS:
        raise ConfigError(f"{where}: [run] op must be one of "
                          f"{', '.join(SUBCOMMANDS)}; got '{op}'")

    dom_sec = _Section("domain", data.get("domain", {}), where)
    kind = dom_sec.take("kind", str, "disk")
    n = dom_sec.take("n", int, None)
    radii = dom_sec.take("radii", list, None)
    pole_codim = dom_sec.take("pole_codim", int, None)
    dom_sec.finish()
    try:
        if kind == "disk":
            if (n or 1) != 1 or radii not in (None, [1.0]) or \
                    pole_codim not in (None, 1):
                raise ConfigError(f"{where}: [domain] disk admits no "
                                  f"parameters beyond n = 1")
            domain = DomainModel.disk()
        elif kind == "ball":
            if n is None:
                raise ConfigError(f"{where}: [domain] ball requires n")
            if radii is not None or pole_codim not in (None, n):
                raise ConfigError(f"{where}: [domain] ball admits only n")
            domain = DomainModel.ball(n)
        elif kind == "polydisc":
            if n is None:
                raise ConfigError(f"{where}: [domain] polydisc requires n")
            r = tuple(float(v) for v in radii) if radii else (1.0,) * n
            if pole_codim is None or pole_codim == n:
                domain = DomainModel.polydisc(n, radii=r)
            else:
                domain = DomainModel.slice_pole(n, pole_codim, radii=r)
        else:
            raise ConfigError(f"{where}: [domain] unknown kind '{kind}'")
    except (DomainError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: [domain] {exc}") from exc

    phi_sec = _Section("phi", data.get("phi", {}), where)
    family = phi_sec.take("family", str, "zero")
    try:
        if family == "zero":
            phi = PhiSpec.zero()
        elif family == "radial_power":
            phi = PhiSpec.radial_power(phi_sec.take("coeff", float,
                                                    required=True))
        elif family == "log_modulus":
            mono = phi_sec.take("monomial", list, required=True)
            phi = PhiSpec.log_modulus(tuple(int(m) for m in mono))
        else:
            raise ConfigError(f"{where}: [phi] unknown family '{family}'")
    except (DomainError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: [phi] {exc}") from exc
    phi_sec.finish()
    if phi.tag != "zero":
        try:
            phi._check_dim(domain.n)
        except DomainError as exc:
            raise ConfigError(f"{where}: [phi] {exc}") from exc

    ideal_sec = _Section("ideal", data.get("ideal", {}), where)
    order = ideal_sec.take("order", int, 1)
    ideal_sec.finish()
    try:
        IdealSpec(order)
    except MinimizerError as exc:
        raise ConfigError(f"{where}: [ideal] {exc}") from exc

    if "weight" in data and "weights" in data:
        raise ConfigError(f"{where}: give either [weight] or [[weights]], "
                          f"not both")
    if "weights" in data:
        entries = data["weights"]
        if not isinstance(entries, list) or not entries:
            raise ConfigError(f"{where}: [[weights]] must be a nonempty "
                              f"array of tables")
        weight_specs = tuple(
            _parse_weight(_Section("weights", entry, where))
            for entry in entries)
    else:
        weight_specs = (_parse_weight(
            _Section("weight", data.get("weight", {"family": "constant"}),
                     where)),)
    for spec in weight_specs:
        spec.build(base_dir)

    datum_sec = _Section("datum", data.get("datum", {}), where)
    terms = datum_sec.take("terms", list, None)
    datum_sec.finish()
    if terms is None:
        datum = (((0,) * domain.n, complex(1.0)),)
    else:
        pairs = {}
        for term in terms:
            tsec = _Section("datum.terms", term, where)
            idx = _index_tuple(tsec.take("index", list, required=True),
                               domain.n, where)
            val = _complex_value(tsec.take("value", (int, float, list),
                                           required=True), where)
            tsec.finish()
            if idx in pairs:
                raise ConfigError(f"{where}: duplicate datum index {idx}")
            pairs[idx] = val
        try:
            normalize(pairs, domain.n)
        except ValueError as exc:
            raise ConfigError(f"{where}: [datum] {exc}") from exc
        datum = tuple(sorted(pairs.items()))

    grid_sec = _Section("grid", data.get("grid", {}), where)
    grid = GridSpec(t_min=grid_sec.take("t_min", float, 0.0),
                    t_max=grid_sec.take("t_max", float, 8.0),
                    count=grid_sec.take("count", int, 81),
                    spacing=grid_sec.take("spacing", str, "linear"))
    grid_sec.finish()
    if grid.count < 1:
        raise ConfigError(f"{where}: [grid] empty t grid (count = "
                          f"{grid.count})")
    if grid.t_min < 0:
        raise ConfigError(f"{where}: [grid] t_min must be >= 0")
    if grid.count > 1 and grid.t_max <= grid.t_min:
        raise ConfigError(f"{where}: [grid] t_max must exceed t_min")
    if grid.spacing not in ("linear", "log"):
        raise ConfigError(f"{where}: [grid] spacing must be linear or log")
    if grid.spacing == "log" and grid.t_min <= 0:
        raise ConfigError(f"{where}: [grid] log spacing needs t_min > 0")

    solver = _Section("solver", data.get("solver", {}), where)
    resolution = solver.take("resolution", int, 64)
    degree = solver.take("degree", int, 8)
    method = solver.take("method", str, "radial")
    angular = solver.take("angular_nodes", int, 0)
    solver.finish()
    if resolution < 2:
        raise ConfigError(f"{where}: [solver] resolution must be >= 2")
    if degree < 0:
        raise ConfigError(f"{where}: [solver] degree must be >= 0")
    if method not in ("radial", "quadrature"):
        raise ConfigError(f"{where}: [solver] method must be radial or "
                          f"quadrature")
    if angular < 0:
        raise ConfigError(f"{where}: [solver] angular_nodes must be >= 0")

    tol_sec = _Section("tolerances", data.get("tolerances", {}), where)
    tol_pairs = []
    for name in sorted(DEFAULT_TOLERANCES):
        value = tol_sec.take(name, float, None)
        if value is not None:
            if value <= 0:
                raise ConfigError(f"{where}: [tolerances] {name} must be "
                                  f"positive")
            tol_pairs.append((name, value))
    tol_sec.finish()

    ext_sec = _Section("extension", data.get("extension", {}), where)
    widths_raw = ext_sec.take("widths", list, [1.0, 0.5, 0.25])
    if not widths_raw or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool)
            and v > 0 for v in widths_raw):
        raise ConfigError(f"{where}: [extension] widths must be a nonempty "
                          f"list of positive numbers")
    extension = ExtensionSpec(
        t0=ext_sec.take("t0", float, 1.0),
        widths=tuple(float(v) for v in widths_raw),
        pole_weighted=ext_sec.take("pole_weighted", bool, True))
    ext_sec.finish()

    out_sec = _Section("output", data.get("output", {}), where)
    csv_name = out_sec.take("csv", str, "")
    json_name = out_sec.take("json", str, "")
    out_sec.finish()

    return ExperimentConfig(label=label, op=op, domain=domain, phi=phi,
                            ideal_order=order, weights=weight_specs,
                            datum=datum, grid=grid, resolution=resolution,
                            degree=degree, method=method,
                            angular_nodes=angular, tolerances=tuple(tol_pairs),
                            extension=extension, csv_name=csv_name,
                            json_name=json_name, base_dir=str(base_dir))


def parse_config_text(text: str, *, label_default: str = "experiment",
                      base_dir: str = ".",
                      where: str = "<config>") -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    return _from_mapping(data, label_default=label_default,
                         base_dir=base_dir, where=where)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, label_default=path.stem,
                             base_dir=str(path.parent), where=str(path))


# ---------------------------------------------------------------------------
# canonical serialization and hashing


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            raise ConfigError("non-finite float in config")
        text = repr(value)
        return text if ("." in text or "e" in text or "E" in text) \
            else text + ".0"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize {type(value).__name__}")


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = ["[run]", f"label = {_toml_scalar(cfg.label)}"]
    if cfg.op is not None:
        lines.append(f"op = {_toml_scalar(cfg.op)}")

    lines += ["", "[domain]", f"kind = {_toml_scalar(cfg.domain.kind)}",
              f"n = {cfg.domain.n}"]
    if cfg.domain.kind == "polydisc":
        lines.append(f"radii = {_toml_scalar(list(cfg.domain.radii))}")
        lines.append(f"pole_codim = {cfg.domain.pole_codim}")

    lines += ["", "[phi]", f"family = {_toml_scalar(cfg.phi.tag)}"]
    if cfg.phi.tag == "radial_power":
        lines.append(f"coeff = {_toml_scalar(cfg.phi.coeff)}")
    elif cfg.phi.tag == "log_modulus":
        lines.append(f"monomial = {_toml_scalar(list(cfg.phi.monomial))}")

    lines += ["", "[ideal]", f"order = {cfg.ideal_order}"]

    single = len(cfg.weights) == 1
    for spec in cfg.weights:
        lines += ["", "[weight]" if single else "[[weights]]",
                  f"family = {_toml_scalar(spec.family)}"]
        for key, value in spec.params:
            lines.append(f"{key} = {_toml_scalar(value)}")

    terms = []
    for idx, val in cfg.datum:
        value = ([val.real, val.imag] if val.imag != 0.0 else val.real)
        terms.append(f"{{index = {_toml_scalar(list(idx))}, "
                     f"value = {_toml_scalar(value)}}}")
    lines += ["", "[datum]", "terms = [" + ", ".join(terms) + "]"]

    lines += ["", "[grid]",
              f"t_min = {_toml_scalar(cfg.grid.t_min)}",
              f"t_max = {_toml_scalar(cfg.grid.t_max)}",
              f"count = {cfg.grid.count}",
              f"spacing = {_toml_scalar(cfg.grid.spacing)}"]

    lines += ["", "[solver]",
              f"resolution = {cfg.resolution}",
              f"degree = {cfg.degree}",
              f"method = {_toml_scalar(cfg.method)}",
              f"angular_nodes = {cfg.angular_nodes}"]

    if cfg.tolerances:
        lines += ["", "[tolerances]"]
        for name, value in cfg.tolerances:
            lines.append(f"{name} = {_toml_scalar(value)}")

    lines += ["", "[extension]",
              f"t0 = {_toml_scalar(cfg.extension.t0)}",
              f"widths = {_toml_scalar(list(cfg.extension.widths))}",
              f"pole_weighted = {_toml_scalar(cfg.extension.pole_weighted)}"]

    if cfg.csv_name or cfg.json_name:
        lines += ["", "[output]"]
        if cfg.csv_name:
            lines.append(f"csv = {_toml_scalar(cfg.csv_name)}")
        if cfg.json_name:
            lines.append(f"json = {_toml_scalar(cfg.json_name)}")

    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()
