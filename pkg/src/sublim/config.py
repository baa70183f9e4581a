"""JSON run configurations.

A config looks like::

    {
      "family": [{"atoms": [[-1], [1]], "weights": [0.5, 0.5]},
                 {"atoms": [[-2], [2]], "weights": [0.5, 0.5]}],
      "function": "cos(x)",
      "command": "compare",
      "params": {"n_list": [4, 16, 64, 256], "dx": 0.01}
    }

``function`` may also be ``{"builtin": "cos", "params": {"k": 1}}``.  Every
failure, including undecodable bytes, surfaces as ``ConfigError``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from sublim.errors import ConfigError, ExprError, SublimError
from sublim.expr import Expr, parse_expr
from sublim.measures import AmbiguitySet, DiscreteMeasure, Event

COMMANDS = ("expect", "clt", "pde", "compare", "check")

BUILTINS = {
    "cos": ("cos({k} * x)", {"k": 1.0}),
    "sin": ("sin({k} * x)", {"k": 1.0}),
    "tanh": ("tanh({k} * x)", {"k": 1.0}),
    "abs_clamped": ("clamp(abs(x), 0, {cap})", {"cap": 5.0}),
    "square_clamped": ("clamp(x^2, 0, {cap})", {"cap": 25.0}),
    "constant": ("{c}", {"c": 1.0}),
}


@dataclass
class PdeParams:
    half_width: float | None = None
    dx: float = 0.01
    T: float = 1.0
    gamma: float = 0.9
    snapshot_times: list = field(default_factory=list)


@dataclass
class Params:
    n_list: list = field(default_factory=lambda: [4, 16, 64, 256])
    dx: float = 0.01
    radius: float | None = None
    mode: str = "dp"
    pde: PdeParams = field(default_factory=PdeParams)
    eps: float = 0.1
    l: float = 2.0
    events: list = field(default_factory=list)
    dictionary_size: int = 4
    dictionary_radius: float | None = None
    seed: int = 0
    instances: int = 100


@dataclass
class RunConfig:
    family: list
    function: str | dict
    params: Params
    command: str | None = None

    def measures(self) -> AmbiguitySet:
        return AmbiguitySet([DiscreteMeasure(m["atoms"], m["weights"]) for m in self.family])

    def function_source(self) -> str:
        if isinstance(self.function, str):
            return self.function
        template, defaults = BUILTINS[self.function["builtin"]]
        values = {**defaults, **self.function.get("params", {})}
        return template.format(**{k: repr(float(v)) for k, v in values.items()})

    def expression(self) -> Expr:
        return parse_expr(self.function_source())

    def events(self) -> list[Event]:
        return [_event(e) for e in self.params.events]

    def to_dict(self) -> dict:
        out = {"family": self.family, "function": self.function, "params": asdict(self.params)}
        if self.command is not None:
            out["command"] = self.command
        return out


def dump_config(cfg: RunConfig) -> str:
    """Canonical text form; ``dump_config(parse_config(dump_config(c)))`` equals ``dump_config(c)``."""
    return json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n"


def _event(spec: dict) -> Event:
    if "norm_gt" in spec:
        return Event.norm_greater(spec["norm_gt"])
    if "norm_ge" in spec:
        return Event.norm_at_least(spec["norm_ge"])
    if "interval" in spec:
        lo, hi = spec["interval"]
        return Event.interval(lo, hi)
    return Event.points(spec["points"])


def _number(v, where, positive=False, allow_none=False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {type(v).__name__}", where)
    try:
        v = float(v)
    except OverflowError:
        raise ConfigError("number out of range", where) from None
    if not math.isfinite(v):
        raise ConfigError("number must be finite", where)
    if positive and v <= 0:
        raise ConfigError("must be positive", where)
    return v


def _integer(v, where, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {type(v).__name__}", where)
    if minimum is not None and v < minimum:
        raise ConfigError(f"must be at least {minimum}", where)
    return v


def _list(v, where, nonempty=True):
    if not isinstance(v, list):
        raise ConfigError(f"expected an array, got {type(v).__name__}", where)
    if nonempty and not v:
        raise ConfigError("must be nonempty", where)
    return v


def _object(v, where, allowed):
    if not isinstance(v, dict):
        raise ConfigError(f"expected an object, got {type(v).__name__}", where)
    extra = sorted(set(v) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) {extra}", where)
    return v


def _family(raw) -> list:
    out = []
    for i, m in enumerate(_list(raw, "family")):
        where = f"family[{i}]"
        _object(m, where, ("atoms", "weights"))
        if "atoms" not in m or "weights" not in m:
            raise ConfigError("needs 'atoms' and 'weights'", where)
        atoms = []
        for j, a in enumerate(_list(m["atoms"], f"{where}.atoms")):
            aw = f"{where}.atoms[{j}]"
            coords = a if isinstance(a, list) else [a]
            atoms.append([_number(c, f"{aw}[{k}]") for k, c in enumerate(_list(coords, aw))])
        weights = [_number(w, f"{where}.weights[{j}]") for j, w in enumerate(_list(m["weights"], f"{where}.weights"))]
        try:
            DiscreteMeasure(atoms, weights)
        except SublimError as exc:
            raise ConfigError(str(exc), where) from None
        out.append({"atoms": atoms, "weights": weights})
    try:
        AmbiguitySet([DiscreteMeasure(m["atoms"], m["weights"]) for m in out])
    except SublimError as exc:
        raise ConfigError(str(exc), "family") from None
    return out


def _function(raw):
    if isinstance(raw, str):
        src = raw
        out = raw
    else:
        _object(raw, "function", ("builtin", "params"))
        name = raw.get("builtin")
        if name not in BUILTINS:
            raise ConfigError(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}", "function.builtin")
        given = _object(raw.get("params", {}), "function.params", BUILTINS[name][1])
        p = {k: _number(v, f"function.params.{k}") for k, v in given.items()}
        out = {"builtin": name, "params": p}
        src = RunConfig([], out, Params()).function_source()
    try:
        parse_expr(src)
    except ExprError as exc:
        raise ConfigError(str(exc), "function") from None
    return out


def _event_spec(raw, where) -> dict:
    _object(raw, where, ("norm_gt", "norm_ge", "interval", "points"))
    if len(raw) != 1:
        raise ConfigError("an event has exactly one key", where)
    (key, v), = raw.items()
    if key in ("norm_gt", "norm_ge"):
        return {key: _number(v, f"{where}.{key}")}
    if key == "interval":
        v = _list(v, f"{where}.interval")
        if len(v) != 2:
            raise ConfigError("interval needs [lo, hi]", where)
        return {"interval": [_number(x, f"{where}.interval") for x in v]}
    pts = []
    for j, p in enumerate(_list(v, f"{where}.points", nonempty=False)):
        coords = p if isinstance(p, list) else [p]
        pts.append([_number(c, f"{where}.points[{j}]") for c in _list(coords, f"{where}.points[{j}]")])
    return {"points": pts}


def _pde_params(raw) -> PdeParams:
    names = [f.name for f in fields(PdeParams)]
    _object(raw, "params.pde", names)
    p = PdeParams()
    if "half_width" in raw:
        p.half_width = _number(raw["half_width"], "params.pde.half_width", positive=True, allow_none=True)
    for key in ("dx", "T", "gamma"):
        if key in raw:
            setattr(p, key, _number(raw[key], f"params.pde.{key}", positive=True))
    if p.gamma > 1:
        raise ConfigError("gamma must lie in (0, 1]", "params.pde.gamma")
    if "snapshot_times" in raw:
        times = _list(raw["snapshot_times"], "params.pde.snapshot_times", nonempty=False)
        p.snapshot_times = [_number(t, "params.pde.snapshot_times") for t in times]
        if any(t < 0 or t > p.T for t in p.snapshot_times):
            raise ConfigError("snapshot times must lie in [0, T]", "params.pde.snapshot_times")
    return p


def _params(raw) -> Params:
    names = [f.name for f in fields(Params)]
    _object(raw, "params", names)
    p = Params()
    if "n_list" in raw:
        p.n_list = [_integer(n, f"params.n_list[{i}]", 1) for i, n in enumerate(_list(raw["n_list"], "params.n_list"))]
        if any(b <= a for a, b in zip(p.n_list, p.n_list[1:])):
            raise ConfigError("must be strictly increasing", "params.n_list")
    for key in ("dx", "eps", "l"):
        if key in raw:
            setattr(p, key, _number(raw[key], f"params.{key}", positive=True))
    for key in ("radius", "dictionary_radius"):
        if key in raw:
            setattr(p, key, _number(raw[key], f"params.{key}", positive=True, allow_none=True))
    if "mode" in raw:
        if raw["mode"] not in ("dp", "exact"):
            raise ConfigError("mode is 'dp' or 'exact'", "params.mode")
        p.mode = raw["mode"]
    if "pde" in raw:
        p.pde = _pde_params(raw["pde"])
    if "events" in raw:
        p.events = [_event_spec(e, f"params.events[{i}]") for i, e in enumerate(_list(raw["events"], "params.events", False))]
    if "dictionary_size" in raw:
        p.dictionary_size = _integer(raw["dictionary_size"], "params.dictionary_size", 1)
    if "seed" in raw:
        p.seed = _integer(raw["seed"], "params.seed", 0)
    if "instances" in raw:
        p.instances = _integer(raw["instances"], "params.instances", 1)
    return p


def parse_config(text: str | bytes) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from None
    except (UnicodeDecodeError, RecursionError, ValueError, TypeError) as exc:
        raise ConfigError(f"unreadable config: {type(exc).__name__}") from None
    try:
        _object(raw, "", ("family", "function", "command", "params"))
        for key in ("family", "function"):
            if key not in raw:
                raise ConfigError(f"missing top-level key {key!r}")
        command = raw.get("command")
        if command is not None and command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}", "command")
        if not isinstance(raw["function"], (str, dict)):
            raise ConfigError("expected an expression string or a builtin object", "function")
        return RunConfig(_family(raw["family"]), _function(raw["function"]), _params(raw.get("params", {})), command)
    except ConfigError:
        raise
    except (SublimError, TypeError, ValueError, OverflowError, RecursionError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None


def load_config(path: str | Path) -> RunConfig:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(data)
