"""TOML run configuration with strict, field-addressed validation.

Layout::

    [model]
    lambda = 1.0
    service = "exponential"        # deterministic | exponential | erlang | hyperexponential | uniform
    service_params = [1.0]         # same layout as ServiceDistribution.params
    N = 4
    nu = [[1, 1.0]]                # [packets, probability] pairs
    p = 0.0

    [command]
    name = "analyze"               # analyze | asymptote | simulate | compare | redundancy
    seed = 0
    replications = 1
    n_busy_periods = 10000
    zeta_mode = "iid_per_arrival"
    threshold = 3.0
    k_range = [0, 3]               # inclusive, redundancy only
    q = 0.01                       # per-packet corruption, redundancy only
    l = 10                         # base packets per message, redundancy only

    [output]
    path = ""                      # empty: stdout
    format = "csv"                 # csv | json
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Any, Optional

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ValidationError
from .packetization import PacketLaw, zeta_bounds
from .service_models import Kind, ServiceDistribution
from .simulator import ZetaMode

COMMANDS = ("analyze", "asymptote", "simulate", "compare", "redundancy")
FORMATS = ("csv", "json")


@dataclass(frozen=True)
class ModelConfig:
    lam: float
    dist: ServiceDistribution
    N: int
    nu: PacketLaw = field(default_factory=lambda: PacketLaw.fixed(1))
    p: float = 0.0


@dataclass(frozen=True)
class CommandConfig:
    name: str
    seed: int = 0
    replications: int = 1
    n_busy_periods: int = 10_000
    zeta_mode: ZetaMode = ZetaMode.IID_PER_ARRIVAL
    threshold: float = 3.0
    k_range: tuple[int, int] = (0, 3)
    q: float = 0.0
    l: Optional[int] = None


@dataclass(frozen=True)
class OutputConfig:
    path: str = ""
    format: str = "csv"


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    command: CommandConfig
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        m, c, o = self.model, self.command, self.output
        cmd = {
            "name": c.name,
            "seed": c.seed,
            "replications": c.replications,
            "n_busy_periods": c.n_busy_periods,
            "zeta_mode": c.zeta_mode.value,
            "threshold": c.threshold,
            "k_range": list(c.k_range),
            "q": c.q,
        }
        if c.l is not None:
            cmd["l"] = c.l
        return {
            "model": {
                "lambda": m.lam,
                "service": m.dist.kind.value,
                "service_params": list(m.dist.params),
                "N": m.N,
                "nu": [[v, p] for v, p in zip(m.nu.values, m.nu.probs)],
                "p": m.p,
            },
            "command": cmd,
            "output": {"path": o.path, "format": o.format},
        }


def dumps(cfg: RunConfig) -> str:
    """Canonical TOML for ``cfg``; parsing it gives back an equal RunConfig."""
    return tomli_w.dumps(cfg.to_dict())


# ---- typed getters -------------------------------------------------------


def _take(table: dict, key: str, path: str, kind, default=...):
    where = f"{path}.{key}"
    if key not in table:
        if default is ...:
            raise ValidationError("missing required key", field=where)
        return default
    return _coerce(table[key], kind, where)


def _coerce(value, kind, where):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"expected a number, got {type(value).__name__}", field=where)
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"expected an integer, got {type(value).__name__}", field=where)
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ValidationError(f"expected a string, got {type(value).__name__}", field=where)
        return value
    if kind is list:
        if not isinstance(value, list):
            raise ValidationError(f"expected an array, got {type(value).__name__}", field=where)
        return value
    raise TypeError(kind)


def _reject_unknown(table: dict, allowed, path: str):
    for key in table:
        if key not in allowed:
            raise ValidationError("unknown key", field=f"{path}.{key}")


def _table(doc: dict, name: str, required: bool) -> dict:
    if name not in doc:
        if required:
            raise ValidationError("missing required section", field=name)
        return {}
    if not isinstance(doc[name], dict):
        raise ValidationError("expected a table", field=name)
    return doc[name]


def _wrap(where, fn, *args):
    """Run a constructor, tagging any validation failure with ``where``."""
    try:
        return fn(*args)
    except ValidationError as exc:
        if exc.field:
            raise
        raise ValidationError(str(exc), field=where) from exc


# ---- sections ------------------------------------------------------------

_MODEL_KEYS = ("lambda", "service", "service_params", "N", "nu", "p")
_COMMAND_KEYS = (
    "name", "seed", "replications", "n_busy_periods", "zeta_mode",
    "threshold", "k_range", "q", "l",
)
_OUTPUT_KEYS = ("path", "format")


def _parse_model(t: dict) -> ModelConfig:
    _reject_unknown(t, _MODEL_KEYS, "model")
    lam = _take(t, "lambda", "model", float)
    if not lam > 0:
        raise ValidationError(f"must be > 0, got {lam}", field="model.lambda")

    kind_name = _take(t, "service", "model", str)
    try:
        kind = Kind(kind_name)
    except ValueError:
        choices = ", ".join(k.value for k in Kind)
        raise ValidationError(f"unknown service {kind_name!r} (one of {choices})", field="model.service") from None
    raw = _take(t, "service_params", "model", list)
    params = tuple(_coerce(x, float, f"model.service_params[{i}]") for i, x in enumerate(raw))
    dist = _wrap("model.service_params", ServiceDistribution, kind, params)

    N = _take(t, "N", "model", int)
    raw_nu = _take(t, "nu", "model", list, [[1, 1.0]])
    values, probs = [], []
    for i, pair in enumerate(raw_nu):
        where = f"model.nu[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise ValidationError("expected a [packets, probability] pair", field=where)
        values.append(_coerce(pair[0], int, where))
        probs.append(_coerce(pair[1], float, where))
    nu = _wrap("model.nu", PacketLaw, tuple(values), tuple(probs))
    _wrap("model.N", zeta_bounds, nu, N)

    p = _take(t, "p", "model", float, 0.0)
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"must lie in [0, 1], got {p}", field="model.p")
    return ModelConfig(lam=lam, dist=dist, N=N, nu=nu, p=p)


def _parse_command(t: dict, name_override: Optional[str]) -> CommandConfig:
    _reject_unknown(t, _COMMAND_KEYS, "command")
    name = name_override or _take(t, "name", "command", str)
    if name not in COMMANDS:
        raise ValidationError(f"unknown command {name!r} (one of {', '.join(COMMANDS)})", field="command.name")
    d = CommandConfig(name=name)

    seed = _take(t, "seed", "command", int, d.seed)
    if not 0 <= seed < 2**64:
        raise ValidationError("must be a 64-bit unsigned integer", field="command.seed")
    reps = _take(t, "replications", "command", int, d.replications)
    if reps < 1:
        raise ValidationError("must be >= 1", field="command.replications")
    nbp = _take(t, "n_busy_periods", "command", int, d.n_busy_periods)
    if nbp < 1:
        raise ValidationError("must be >= 1", field="command.n_busy_periods")
    mode_name = _take(t, "zeta_mode", "command", str, d.zeta_mode.value)
    try:
        mode = ZetaMode(mode_name)
    except ValueError:
        raise ValidationError(f"unknown zeta_mode {mode_name!r}", field="command.zeta_mode") from None
    threshold = _take(t, "threshold", "command", float, d.threshold)
    if not threshold > 0:
        raise ValidationError("must be > 0", field="command.threshold")

    raw_k = _take(t, "k_range", "command", list, list(d.k_range))
    if len(raw_k) != 2:
        raise ValidationError("expected [first, last]", field="command.k_range")
    k_range = tuple(_coerce(x, int, "command.k_range") for x in raw_k)
    if k_range[0] < 0 or k_range[1] < k_range[0]:
        raise ValidationError("need 0 <= first <= last", field="command.k_range")
    q = _take(t, "q", "command", float, d.q)
    if not 0.0 <= q <= 1.0:
        raise ValidationError(f"must lie in [0, 1], got {q}", field="command.q")
    l = _take(t, "l", "command", int, None)
    if l is not None and l < 1:
        raise ValidationError("must be >= 1", field="command.l")
    if name == "redundancy" and l is None:
        raise ValidationError("required by the redundancy command", field="command.l")
    return CommandConfig(
        name=name, seed=seed, replications=reps, n_busy_periods=nbp, zeta_mode=mode,
        threshold=threshold, k_range=k_range, q=q, l=l,
    )


def _parse_output(t: dict) -> OutputConfig:
    _reject_unknown(t, _OUTPUT_KEYS, "output")
    path = _take(t, "path", "output", str, "")
    fmt = _take(t, "format", "output", str, "csv")
    if fmt not in FORMATS:
        raise ValidationError(f"expected csv or json, got {fmt!r}", field="output.format")
    return OutputConfig(path=path, format=fmt)


def parse_config(text: str, command: Optional[str] = None) -> RunConfig:
    """Parse and validate a TOML document.

    ``command`` (from the command line) takes precedence over ``command.name``.
    """
    try:
        doc: dict[str, Any] = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"malformed TOML: {exc}", field="config") from None
    _reject_unknown(doc, ("model", "command", "output"), "config")
    model = _parse_model(_table(doc, "model", True))
    cmd = _parse_command(_table(doc, "command", command is None), command)
    out = _parse_output(_table(doc, "output", False))
    return RunConfig(model=model, command=cmd, output=out)


def load_config(path: str, command: Optional[str] = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), command)
