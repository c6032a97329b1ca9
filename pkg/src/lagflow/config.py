"""JSON run configurations: schema validation and conversion to specs."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import jsonschema

from . import expr as ex
from . import presets
from .errors import ConfigError
from .flows import AffineSpec, BetaPath, FlowSpec, LinearDependentSpec, RotationalSpec
from .harmonic import Disk, Domain, HarmonicMap, Rectangle
from .verify import Tolerances

DEFAULT_TIMES = [0.0, 0.5, 1.0, 2.0]
DEFAULT_FORMATS = ["csv", "json"]


def schema() -> dict:
    text = resources.files("lagflow").joinpath("config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def config_hash(raw: dict) -> str:
    """sha256 of the canonical JSON form of ``raw`` minus its ``output`` section.

    Where results are written does not change them, so it is left out.
    """
    raw = {k: v for k, v in raw.items() if k != "output"}
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# -- value conversion -----------------------------------------------------------

def to_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def complex_json(v: complex):
    """A real number when the imaginary part is zero, else ``[re, im]``."""
    v = complex(v)
    return v.real if v.imag == 0 else [v.real, v.imag]


def domain_from_dict(d: dict) -> Domain:
    if "rectangle" in d:
        shape = Rectangle(*(float(x) for x in d["rectangle"]))
    else:
        disk = d["disk"]
        shape = Disk(to_complex(disk.get("center", 0)), float(disk["radius"]))
    n_a, n_b = d.get("grid", (41, 41))
    return Domain(shape, int(n_a), int(n_b))


def domain_to_dict(domain: Domain) -> dict:
    s = domain.shape
    if isinstance(s, Rectangle):
        out: dict[str, Any] = {"rectangle": [s.a_min, s.a_max, s.b_min, s.b_max]}
    else:
        out = {"disk": {"center": complex_json(s.center), "radius": s.radius}}
    out["grid"] = [domain.n_a, domain.n_b]
    return out


def _params(d: dict) -> dict:
    return {k: to_complex(v) for k, v in d.get("params", {}).items()}


def _parse(source: str, what: str) -> ex.Expr:
    try:
        return ex.parse(source)
    except ex.ExprSyntaxError as err:
        raise ConfigError(f"{what}: {err}") from err


def spec_from_dict(d: dict) -> FlowSpec:
    if "preset" in d:
        kwargs = dict(d.get("args", {}))
        if "domain" in d:
            kwargs["domain"] = domain_from_dict(d["domain"])
        try:
            return presets.resolve(d["preset"], **kwargs)
        except TypeError as err:
            raise ConfigError(f"preset {d['preset']}: {err}") from err
    params = _params(d)
    domain = domain_from_dict(d["domain"])
    F0 = _parse(d["F0"], "F0")
    family = d["family"]
    if family == "linear_dependent":
        beta = BetaPath(_parse(d["beta"], "beta"), params)
        return LinearDependentSpec(F0, to_complex(d["lambda"]), beta, float(d["nu0"]), domain, params)
    G0 = _parse(d["G0"], "G0")
    if family == "affine":
        beta = BetaPath(_parse(d["beta"], "beta"), params)
        return AffineSpec(F0, G0, beta, float(d["nu0"]), domain, params)
    return RotationalSpec(F0, G0, float(d["nu0"]), float(d["xi0"]), domain, params)


def spec_to_dict(spec: FlowSpec) -> dict:
    out: dict[str, Any] = {"family": spec.family, "F0": ex.to_source(spec.F0)}
    if isinstance(spec, LinearDependentSpec):
        out["lambda"] = complex_json(spec.lam)
    else:
        out["G0"] = ex.to_source(spec.G0)
    if not isinstance(spec, RotationalSpec):
        out["beta"] = ex.to_source(spec.beta.expr)
    out["nu0"] = spec.nu0
    if isinstance(spec, RotationalSpec):
        out["xi0"] = spec.xi0
    if spec.params:
        out["params"] = {k: complex_json(v) for k, v in sorted(spec.params.items())}
    out["domain"] = domain_to_dict(spec.domain)
    return out


def map_from_dict(d: dict, domain: Domain) -> HarmonicMap:
    return HarmonicMap(_parse(d["F"], "F"), _parse(d["G"], "G"), domain, _params(d))


def map_to_dict(m: HarmonicMap) -> dict:
    out: dict[str, Any] = {"F": ex.to_source(m.F), "G": ex.to_source(m.G)}
    if m.params:
        out["params"] = {k: complex_json(v) for k, v in sorted(m.params.items())}
    return out


# -- run configuration ------------------------------------------------------------

@dataclass
class Config:
    raw: dict
    times: list
    grid: Optional[tuple[int, int]]
    out_dir: Path
    formats: list
    tolerances: Tolerances
    tamper: Optional[dict] = None
    hash: str = ""

    def spec(self) -> FlowSpec:
        if "flow" not in self.raw:
            raise ConfigError("config has no 'flow' section")
        spec = spec_from_dict(self.raw["flow"])
        if self.grid is not None:
            spec = replace(spec, domain=spec.domain.with_grid(*self.grid))
        return spec

    def relation_maps(self) -> tuple[HarmonicMap, HarmonicMap]:
        if "relation" not in self.raw:
            raise ConfigError("config has no 'relation' section")
        r = self.raw["relation"]
        domain = domain_from_dict(r["domain"])
        if self.grid is not None:
            domain = domain.with_grid(*self.grid)
        return map_from_dict(r["map1"], domain), map_from_dict(r["map2"], domain)


def parse_grid(text: str) -> tuple[int, int]:
    try:
        n, m = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"grid must look like NxM, got {text!r}") from None
    if n < 2 or m < 2:
        raise ConfigError("grid needs at least 2 points per axis")
    return n, m


def parse_times(text: str) -> list:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"times must be comma-separated numbers, got {text!r}") from None


def load(
    path: Optional[str | Path] = None,
    data: Optional[dict] = None,
    out: Optional[str] = None,
    grid: Optional[str] = None,
    times: Optional[str] = None,
    tol: Optional[float] = None,
) -> Config:
    """Read, validate and apply command-line overrides to a configuration."""
    if data is None:
        if path is None:
            raise ConfigError("no configuration given")
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as err:
            raise ConfigError(f"cannot read config: {err}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from err
    raw = copy.deepcopy(data)
    if grid is not None:
        raw["grid"] = list(parse_grid(grid))
    if times is not None:
        raw["times"] = parse_times(times)
    if tol is not None:
        tols = raw.setdefault("tolerances", {})
        for name in ("mass_conservation", "governing_re", "governing_im_drift"):
            tols[name] = float(tol)
    if out is not None:
        raw.setdefault("output", {})["dir"] = out

    try:
        jsonschema.validate(raw, schema())
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {err.message}") from None

    t = [float(x) for x in raw.get("times", DEFAULT_TIMES)]
    if any(b <= a for a, b in zip(t, t[1:])):
        raise ConfigError("times must be strictly ascending")
    output = raw.get("output", {})
    return Config(
        raw=raw,
        times=t,
        grid=tuple(raw["grid"]) if "grid" in raw else None,
        out_dir=Path(output.get("dir", ".")),
        formats=list(output.get("formats", DEFAULT_FORMATS)),
        tolerances=Tolerances(**raw.get("tolerances", {})),
        tamper=raw.get("tamper"),
        hash=config_hash(raw),
    )
