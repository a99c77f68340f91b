"""Flat ``section.key = value`` run configuration.

One assignment per line, ``#`` starts a comment. ``scheme`` takes one
scheme or a comma-separated list (LDA, SIC, HF). Unknown keys, bad values
and violated preconditions raise ConfigError naming the key and line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .dynamics import DynamicsConfig
from .errors import ConfigError
from .grid import Grid1D
from .hamiltonians import Scheme
from .model import ModelParams
from .static import StaticConfig


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _schemes(text):
    out = tuple(Scheme.parse(t) for t in text.split(",") if t.strip())
    if not out:
        raise ValueError("no scheme given")
    return out


# key -> (parser, default)
KEYS = {
    "model.a": (float, 0.8),
    "model.b": (float, 0.5),
    "model.R": (float, 1.5),
    "model.z": (float, 0.4),
    "model.n_electrons": (int, 2),
    "model.gamma": (float, 1.0),
    "grid.n": (int, 512),
    "grid.dx": (float, 0.25),
    "scheme": (_schemes, (Scheme.LDA,)),
    "static.delta_step": (float, 0.3),
    "static.e_damp": (float, 1.0),
    "static.eta": (float, 0.2),
    "static.tol_residual": (float, 1e-7),
    "static.tol_sym": (float, 1e-7),
    "static.max_iter": (int, 20000),
    "static.localize_every": (int, 200),
    "static.complex_kick": (float, 0.1),
    "dynamics.dt": (float, 0.005),
    "dynamics.t_final": (float, 0.0),
    "dynamics.boost_p": (float, 0.0),
    "dynamics.mask_width": (int, 48),
    "dynamics.mask_exponent": (float, 0.25),
    "dynamics.sym_tol_td": (float, 1e-9),
    "dynamics.exp_order": (int, 4),
    "dynamics.reortho_every": (int, 0),
    "dynamics.sample_every": (int, 20),
    "output.prefix": (str, "run"),
    "output.spectrum": (_bool, False),
}


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    grid: Grid1D
    schemes: tuple
    static: StaticConfig
    dynamics: DynamicsConfig
    prefix: str = "run"
    spectrum: bool = False
    source: str | None = None
    values: dict = field(default_factory=dict, repr=False)


def parse_text(text, source="<string>") -> dict:
    """Return ``{key: (value, line_number)}`` for every assignment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}", key=key, line=lineno)
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}", key=key, line=lineno)
        parser = KEYS[key][0]
        try:
            out[key] = (parser(value), lineno)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}", key=key, line=lineno) from None
    return out


def _build(section_cls, prefix, values, lines, source, rename=None, **extra):
    rename = rename or {}
    kwargs = dict(extra)
    for key, val in values.items():
        if key.startswith(prefix + "."):
            name = key.split(".", 1)[1]
            kwargs[rename.get(name, name)] = val
    try:
        return section_cls(**kwargs)
    except (ValueError, TypeError) as exc:
        # attribute the failure to the first key whose name appears in the message
        msg = str(exc)
        key = next((k for k in values if k.startswith(prefix + ".") and k.split(".", 1)[1] in msg), None)
        line = lines.get(key)
        where = f"{source}:{line}: " if line else f"{source}: "
        raise ConfigError(f"{where}invalid {key or prefix}: {msg}", key=key, line=line) from None


def build_config(parsed: dict, source="<string>") -> RunConfig:
    values = {k: d for k, (_, d) in KEYS.items()}
    values.update({k: v for k, (v, _) in parsed.items()})
    lines = {k: ln for k, (_, ln) in parsed.items()}
    model = _build(ModelParams, "model", values, lines, source)
    grid = _build(Grid1D, "grid", values, lines, source, rename={"n": "n_points", "dx": "spacing"})
    static = _build(StaticConfig, "static", values, lines, source)
    dyn = _build(DynamicsConfig, "dynamics", values, lines, source)
    try:
        dyn.check_grid(grid)
    except ValueError as exc:
        line = lines.get("dynamics.mask_width")
        where = f"{source}:{line}: " if line else f"{source}: "
        raise ConfigError(f"{where}{exc}", key="dynamics.mask_width", line=line) from None
    prefix = values["output.prefix"]
    if not prefix:
        raise ConfigError(f"{source}: output.prefix must not be empty", key="output.prefix", line=lines.get("output.prefix"))
    return RunConfig(model, grid, values["scheme"], static, dyn, prefix, values["output.spectrum"], source, values)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return build_config(parse_text(text, str(path)), str(path))


def loads_config(text, source="<string>") -> RunConfig:
    return build_config(parse_text(text, source), source)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for key in KEYS:
        val = cfg.values.get(key, KEYS[key][1])
        if key == "scheme":
            val = ", ".join(s.value for s in val)
        elif isinstance(val, bool):
            val = "true" if val else "false"
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def replace_values(cfg: RunConfig, **updates) -> RunConfig:
    """Copy with some flat keys changed (``model__a=...`` style names map to ``model.a``)."""
    vals = dict(cfg.values)
    for name, val in updates.items():
        key = name.replace("__", ".")
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", key=key)
        vals[key] = val
    parsed = {k: (v, None) for k, v in vals.items()}
    return build_config(parsed, cfg.source or "<string>")


__all__ = ["KEYS", "RunConfig", "build_config", "dump_config", "load_config", "loads_config", "parse_text", "replace_values"]
