"""Text configuration grammar for schemas, oracle fixtures, and runs.

One INI-style document can declare all three layers:

    [schema]                      # optional, version only
    version = 1

    [attribute orientation]      # one section per attribute, in order
    kind = circular               # circular | linear
    domain = 0 360                # lo hi (degrees for circular)
    components = 6                # optional, default 1
    fixed_sigma = 10
    grid = 0:330:30               # lo:hi:step | segments:n | explicit list

    [oracle]                      # optional: synthetic renderer fixture
    feature_dim = 8
    mixing_seed = 7
    noise_sigma = 0.05
    separable = false
    planted_means = 45 45 135 225 225 315 117 0.73 6.3 11.0

    [run]                         # optional: optimization run settings
    method = descent              # descent | random_search | reinforce | random_attributes
    renderer = oracle             # oracle | external <command> | external tcp:host:port
    samples_per_eval = 500
    epochs = 2
    budget = 224
    seed = 0
    common_random_numbers = true
    output = runs/out
    targets = cam01.fstat cam02.fstat
    parallel = 1

Grid forms: an explicit list ("0, 30, 60" or space separated), an
inclusive stepped range "lo:hi:step", or "segments:n" for the n+1
endpoints of n equal segments of the domain.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .attributes import (
    AttributeDecl,
    AttributeSchema,
    DistributionParams,
    uniform_weights,
    validate_params,
    validate_schema,
)
from .errors import SchemaError
from .oracle import OracleConfig
from .optimize import EvalConfig

__all__ = [
    "RunConfig",
    "load_document",
    "parse_schema",
    "parse_oracle",
    "parse_run",
    "load_schema_file",
    "load_oracle_file",
    "load_run_file",
    "profile_path",
]

_ATTR_SECTION = re.compile(r"^attribute\s+(\S.*)$")

METHODS = ("descent", "random_search", "reinforce", "random_attributes")


def load_document(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path, "r", encoding="utf-8") as f:
            cp.read_file(f, source=str(path))
    except configparser.Error as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    return cp


def _floats(text: str) -> list[float]:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise SchemaError(f"bad number in {text!r}") from exc


def _parse_grid(text: str, lo: float, hi: float) -> tuple[float, ...]:
    text = text.strip()
    if text.startswith("segments:"):
        try:
            n = int(text.split(":", 1)[1])
        except ValueError as exc:
            raise SchemaError(f"bad segment count in grid {text!r}") from exc
        if n < 1:
            raise SchemaError("grid needs at least 1 segment")
        return tuple(float(v) for v in np.linspace(lo, hi, n + 1))
    stepped = re.fullmatch(
        r"([-+0-9.eE]+):([-+0-9.eE]+):([-+0-9.eE]+)", text
    )
    if stepped:
        start, stop, step = (float(g) for g in stepped.groups())
        if step <= 0:
            raise SchemaError(f"grid step must be positive in {text!r}")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        if count < 1:
            raise SchemaError(f"empty stepped grid {text!r}")
        return tuple(start + i * step for i in range(count))
    values = _floats(text)
    return tuple(values)


def _fields(cp: configparser.ConfigParser, section: str) -> dict[str, str]:
    return {k: v for k, v in cp.items(section)}


def parse_schema(cp: configparser.ConfigParser, source: str = "<config>") -> AttributeSchema:
    version = 1
    if cp.has_section("schema") and cp.has_option("schema", "version"):
        version = cp.getint("schema", "version")
    attrs = []
    for section in cp.sections():
        m = _ATTR_SECTION.match(section)
        if not m:
            continue
        name = m.group(1).strip()
        fields = _fields(cp, section)
        unknown = set(fields) - {"kind", "domain", "components", "fixed_sigma", "grid"}
        if unknown:
            raise SchemaError(f"{source}: [{section}]: unknown keys {sorted(unknown)}")
        for required in ("kind", "domain", "fixed_sigma", "grid"):
            if required not in fields:
                raise SchemaError(f"{source}: [{section}]: missing key {required!r}")
        domain = _floats(fields["domain"])
        if len(domain) != 2:
            raise SchemaError(f"{source}: [{section}]: domain needs exactly two numbers")
        grid = _parse_grid(fields["grid"], domain[0], domain[1])
        attrs.append(
            AttributeDecl(
                name=name,
                kind=fields["kind"].strip(),
                domain=(domain[0], domain[1]),
                components=int(fields.get("components", "1")),
                fixed_sigma=float(fields["fixed_sigma"]),
                grid=grid,
            )
        )
    if not attrs:
        raise SchemaError(f"{source}: no [attribute <name>] sections found")
    return validate_schema(AttributeSchema(attributes=tuple(attrs), version=version))


def parse_oracle(
    cp: configparser.ConfigParser, schema: AttributeSchema, source: str = "<config>"
) -> OracleConfig:
    if not cp.has_section("oracle"):
        raise SchemaError(f"{source}: missing [oracle] section")
    fields = _fields(cp, "oracle")
    unknown = set(fields) - {
        "feature_dim",
        "mixing_seed",
        "noise_sigma",
        "separable",
        "planted_means",
    }
    if unknown:
        raise SchemaError(f"{source}: [oracle]: unknown keys {sorted(unknown)}")
    if "planted_means" not in fields:
        raise SchemaError(f"{source}: [oracle]: missing key 'planted_means'")
    means = tuple(_floats(fields["planted_means"]))
    planted = DistributionParams(means=means, component_weights=uniform_weights(schema))
    validate_params(schema, planted)
    return OracleConfig(
        schema=schema,
        planted_means=planted,
        feature_dim=int(fields.get("feature_dim", "8")),
        mixing_seed=int(fields.get("mixing_seed", "0")),
        noise_sigma=float(fields.get("noise_sigma", "0.05")),
        separable=cp.getboolean("oracle", "separable", fallback=False),
    )


@dataclass
class RunConfig:
    """Everything cmd_optimize needs, merged from file, flags, and environment."""

    schema: AttributeSchema
    renderer_spec: str  # "oracle" or "external <command or tcp:host:port>"
    oracle: OracleConfig | None
    method: str
    eval_cfg: EvalConfig
    budget: int | None
    targets: tuple[str, ...]
    output_dir: str
    parallel: int
    seed: int
    schema_ref: str
    config_text: str


def parse_run(cp: configparser.ConfigParser, source: str = "<config>") -> dict:
    """The [run] section as a plain dict of typed values (no defaults applied)."""
    if not cp.has_section("run"):
        return {}
    fields = _fields(cp, "run")
    known = {
        "method",
        "renderer",
        "samples_per_eval",
        "epochs",
        "budget",
        "seed",
        "common_random_numbers",
        "output",
        "targets",
        "parallel",
    }
    unknown = set(fields) - known
    if unknown:
        raise SchemaError(f"{source}: [run]: unknown keys {sorted(unknown)}")
    out: dict = {}
    if "method" in fields:
        method = fields["method"].strip()
        if method not in METHODS:
            raise SchemaError(f"{source}: [run]: unknown method {method!r}")
        out["method"] = method
    if "renderer" in fields:
        out["renderer"] = fields["renderer"].strip()
    for key in ("samples_per_eval", "epochs", "budget", "seed", "parallel"):
        if key in fields:
            try:
                out[key] = int(fields[key])
            except ValueError as exc:
                raise SchemaError(f"{source}: [run]: {key} must be an integer") from exc
    if "common_random_numbers" in fields:
        out["common_random_numbers"] = cp.getboolean("run", "common_random_numbers")
    if "output" in fields:
        out["output"] = fields["output"].strip()
    if "targets" in fields:
        out["targets"] = tuple(p for p in fields["targets"].split() if p)
    return out


def load_schema_file(path) -> AttributeSchema:
    return parse_schema(load_document(path), source=str(path))


def load_oracle_file(path) -> OracleConfig:
    cp = load_document(path)
    return parse_oracle(cp, parse_schema(cp, source=str(path)), source=str(path))


def load_run_file(path) -> tuple[AttributeSchema, OracleConfig | None, dict, str]:
    """Schema, oracle (if present), [run] values, and the raw document text."""
    cp = load_document(path)
    schema = parse_schema(cp, source=str(path))
    oracle = parse_oracle(cp, schema, source=str(path)) if cp.has_section("oracle") else None
    run = parse_run(cp, source=str(path))
    text = Path(path).read_text(encoding="utf-8")
    return schema, oracle, run, text


def profile_path(name: str) -> Path:
    """Path of a profile shipped with the package (e.g. "vehiclex5")."""
    ref = resources.files("attrdesc") / "profiles" / f"{name}.cfg"
    if not ref.is_file():
        raise SchemaError(f"no shipped profile named {name!r}")
    return Path(str(ref))
