"""Line-oriented ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored.  ``grid.<key> = v1, v2, ...``
lines declare a parameter grid over any ordinary key; they are expanded by
:func:`expand_grid` into one :class:`RunConfig` per combination.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .problems import FAMILIES, ProblemSpec
from .solver import StoppingRule, TuningParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProxConfig:
    q0: float | None = None        # None: max(0.5 |x_start - z0|^2, 1)
    z0: str = "start"              # start | zero
    preconditioner: str = "identity"   # identity | jacobi

    def __post_init__(self):
        if self.q0 is not None and not (self.q0 > 0 and math.isfinite(self.q0)):
            raise ValueError(f"prox.q0 must be positive, got {self.q0}")
        if self.z0 not in ("start", "zero"):
            raise ValueError(f"prox.z0 must be 'start' or 'zero', got {self.z0!r}")
        if self.preconditioner not in ("identity", "jacobi"):
            raise ValueError(
                f"prox.preconditioner must be 'identity' or 'jacobi', got {self.preconditioner!r}")


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    tuning: TuningParams = field(default_factory=TuningParams)
    stop: StoppingRule = field(default_factory=StoppingRule)
    prox: ProxConfig = field(default_factory=ProxConfig)
    start: str = "zeros"           # zeros | ones | random
    mu_policy: str = "declared"    # declared | zero
    diagnostics: bool = False
    skip_x_prime: bool = False
    history_out: str | None = None
    report_out: str | None = None

    def __post_init__(self):
        if self.start not in ("zeros", "ones", "random"):
            raise ValueError(f"start must be zeros, ones or random, got {self.start!r}")
        if self.mu_policy not in ("declared", "zero"):
            raise ValueError(f"mu_policy must be 'declared' or 'zero', got {self.mu_policy!r}")

    def to_text(self) -> str:
        lines = []
        for key, (path, kind) in KEYS.items():
            lines.append(f"{key} = {_format(_get(self, path), kind)}")
        return "\n".join(lines) + "\n"


# flat key -> (attribute path, value kind)
KEYS: dict[str, tuple[tuple[str, ...], str]] = {
    "problem.family": (("problem", "family"), "str"),
    "problem.n": (("problem", "n"), "int"),
    "problem.m": (("problem", "m"), "int?"),
    "problem.k": (("problem", "k"), "int?"),
    "problem.rank": (("problem", "rank"), "int?"),
    "problem.cond": (("problem", "cond"), "float"),
    "problem.seed": (("problem", "seed"), "int"),
    "tuning.lambda": (("tuning", "lam"), "float"),
    "tuning.alpha_max": (("tuning", "alpha_max"), "float"),
    "tuning.kappa": (("tuning", "kappa"), "float"),
    "tuning.kappa_prime": (("tuning", "kappa_prime"), "float"),
    "stop.eps": (("stop", "eps"), "float"),
    "stop.f_target": (("stop", "f_target"), "float"),
    "stop.max_iterations": (("stop", "max_iterations"), "int"),
    "stop.max_oracle_calls": (("stop", "max_oracle_calls"), "int?"),
    "prox.q0": (("prox", "q0"), "float?"),
    "prox.z0": (("prox", "z0"), "str"),
    "prox.preconditioner": (("prox", "preconditioner"), "str"),
    "start": (("start",), "str"),
    "mu_policy": (("mu_policy",), "str"),
    "diagnostics": (("diagnostics",), "bool"),
    "skip_x_prime": (("skip_x_prime",), "bool"),
    "output.history": (("history_out",), "str?"),
    "output.report": (("report_out",), "str?"),
}

_NONE_WORDS = {"none", "auto", "unlimited", ""}


def _get(obj, path):
    for p in path:
        obj = getattr(obj, p)
    return obj


def _format(value, kind: str) -> str:
    if value is None:
        return "auto" if kind == "float?" else "none"
    if kind == "bool":
        return "on" if value else "off"
    if kind.startswith("float"):
        return repr(float(value))
    return str(value)


def convert(raw: str, kind: str):
    raw = raw.strip()
    if kind.endswith("?"):
        if raw.lower() in _NONE_WORDS:
            return None
        kind = kind[:-1]
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        low = raw.lower()
        if low in ("on", "true", "yes", "1"):
            return True
        if low in ("off", "false", "no", "0"):
            return False
        raise ValueError(f"expected on/off, got {raw!r}")
    if not raw:
        raise ValueError("empty value")
    return raw


def _split_lines(text: str):
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        yield lineno, key, value


def _parse(text: str) -> tuple[RunConfig, list[tuple[str, list[str]]]]:
    values: dict[str, object] = {}
    grid: list[tuple[str, list[str]]] = []
    for lineno, key, raw in _split_lines(text):
        if key.startswith("grid."):
            sub = key[len("grid."):]
            if sub not in KEYS:
                raise ConfigError(f"line {lineno}: unknown grid key {sub!r}")
            items = [v.strip() for v in raw.split(",")]
            try:
                for v in items:
                    convert(v, KEYS[sub][1])
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {key}: {exc}") from None
            grid.append((sub, items))
            continue
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = convert(raw, KEYS[key][1])
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None
    return build_config(values), grid


def build_config(values: dict[str, object]) -> RunConfig:
    """Build a validated config from flat keys; missing keys take defaults."""
    sections: dict[str, dict] = {"problem": {}, "tuning": {}, "stop": {}, "prox": {}, "": {}}
    for key, value in values.items():
        path = KEYS[key][0]
        if len(path) == 2:
            sections[path[0]][path[1]] = value
        else:
            sections[""][path[0]] = value
    try:
        return RunConfig(
            problem=ProblemSpec(**sections["problem"]),
            tuning=TuningParams(**sections["tuning"]),
            stop=StoppingRule(**sections["stop"]),
            prox=ProxConfig(**sections["prox"]),
            **sections[""],
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def parse_config(text: str) -> RunConfig:
    """Parse a single-run config; ``grid.*`` keys are rejected here."""
    cfg, grid = _parse(text)
    if grid:
        raise ConfigError("grid.* keys are only valid for the grid command")
    return cfg


def parse_grid(text: str) -> list[RunConfig]:
    cfg, grid = _parse(text)
    return expand_grid(cfg, grid)


def expand_grid(base: RunConfig, grid: list[tuple[str, list[str]]]) -> list[RunConfig]:
    """Cartesian product over grid keys, last key varying fastest."""
    if not grid:
        return [base]
    flat = {k: _get(base, KEYS[k][0]) for k in KEYS}
    out = []
    for combo in itertools.product(*(vals for _, vals in grid)):
        values = dict(flat)
        for (key, _), raw in zip(grid, combo):
            values[key] = convert(raw, KEYS[key][1])
        out.append(build_config(values))
    return out


def apply_overrides(cfg: RunConfig, overrides: dict[str, object]) -> RunConfig:
    flat = {k: _get(cfg, KEYS[k][0]) for k in KEYS}
    flat.update(overrides)
    return build_config(flat)


__all__ = ["ConfigError", "ProxConfig", "RunConfig", "KEYS", "FAMILIES", "parse_config",
           "parse_grid", "expand_grid", "apply_overrides", "build_config"]
