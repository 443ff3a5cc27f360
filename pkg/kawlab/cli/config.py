"""
Experiment configuration files.

Sectioned ``key = value`` text::

    [experiment]
    name = tumor-demo
    seed = 3

    [operator]
    kind = fourier
    r = 7

Lists are whitespace or comma separated, ``none`` clears an optional value,
and ``#`` / ``;`` start comments. Sections map onto ExperimentConfig; keys in
``[params]`` are experiment-specific and kept as typed scalars.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
from pydantic import ValidationError

from kawlab.common.errors import ConfigError
from kawlab.common.models import ExperimentConfig

logger = logging.getLogger(__name__)

MODEL_SECTIONS = ("operator", "levels", "solver", "train", "output")
LIST_FIELDS = {("operator", "budgets"), ("operator", "omega"), ("levels", "local_sparsities")}

Located = Dict[str, Dict[str, Tuple[str, int]]]


def parse_sections(text: str) -> Located:
    """Section -> key -> (raw value, line number)."""
    sections: Located = {}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"unterminated section header {line!r}", line=lineno)
            current = line[1:-1].strip().lower()
            if current in sections:
                raise ConfigError(f"section [{current}] appears twice", line=lineno)
            sections[current] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
        if current is None:
            raise ConfigError("key outside of any section", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r} in [{current}]", line=lineno)
        sections[current][key] = (value, lineno)
    return sections


def _scalar(value: str) -> Any:
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def _field_value(section: str, key: str, value: str) -> Any:
    if value.lower() == "none":
        return None
    if (section, key) in LIST_FIELDS:
        return [v for v in value.replace(",", " ").split()]
    return value


def _line_of(sections: Located, loc: Tuple) -> Optional[int]:
    """Best line number for a pydantic error location."""
    if not loc:
        return None
    head = str(loc[0])
    if head in ("experiment", "seed"):
        entry = sections.get("experiment", {}).get("name" if head == "experiment" else "seed")
        return entry[1] if entry else None
    if head == "train" and len(loc) > 1 and loc[1] == "adam" and len(loc) > 2:
        entry = sections.get("adam", {}).get(str(loc[2]))
        return entry[1] if entry else None
    if len(loc) > 1:
        entry = sections.get(head, {}).get(str(loc[1]))
        if entry:
            return entry[1]
    return None


def load_config(text: str, experiment: Optional[str] = None) -> ExperimentConfig:
    """Parse and validate config text; ``experiment`` fills a missing name."""
    sections = parse_sections(text)
    known = {"experiment", "params", "adam"} | set(MODEL_SECTIONS)
    for name, entries in sections.items():
        if name not in known:
            line = min((ln for _, ln in entries.values()), default=None)
            raise ConfigError(f"unknown section [{name}]", line=line)

    data: Dict[str, Any] = {}
    head = sections.get("experiment", {})
    for key, (_, lineno) in head.items():
        if key not in ("name", "seed"):
            raise ConfigError(f"unknown key {key!r} in [experiment]", line=lineno)
    name = head.get("name", (experiment, None))[0] or experiment
    if name is None:
        raise ConfigError("missing [experiment] name", line=1)
    data["experiment"] = name
    if "seed" in head:
        data["seed"] = head["seed"][0]
    for section in MODEL_SECTIONS:
        if section in sections:
            data[section] = {k: _field_value(section, k, v) for k, (v, _) in sections[section].items()}
    if "adam" in sections:
        data.setdefault("train", {})["adam"] = {k: v for k, (v, _) in sections["adam"].items()}
    if "params" in sections:
        data["params"] = {k: _scalar(v) for k, (v, _) in sections["params"].items()}

    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        loc = tuple(first.get("loc", ()))
        where = ".".join(str(p) for p in loc)
        raise ConfigError(f"{where}: {first.get('msg')}", line=_line_of(sections, loc)) from e
    logger.debug(f"Loaded configuration for {cfg.experiment}")
    return cfg


def read_config(path: Path, experiment: Optional[str] = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    return load_config(text, experiment)


def _format(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return " ".join(_format(v) for v in value)
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; load_config(dump_config(cfg)) == cfg."""
    data = cfg.model_dump()
    lines: List[str] = ["[experiment]", f"name = {cfg.experiment}", f"seed = {cfg.seed}"]
    for section in MODEL_SECTIONS:
        values = dict(data[section])
        adam = values.pop("adam", None) if section == "train" else None
        lines.append("")
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {_format(v)}" for k, v in values.items())
        if adam is not None:
            lines.append("")
            lines.append("[adam]")
            lines.extend(f"{k} = {_format(v)}" for k, v in adam.items())
    if cfg.params:
        lines.append("")
        lines.append("[params]")
        lines.extend(f"{k} = {_format(v)}" for k, v in sorted(cfg.params.items()))
    return "\n".join(lines) + "\n"


def apply_overrides(cfg: ExperimentConfig, seed: Optional[int] = None, out: Optional[str] = None,
                    params: Tuple[str, ...] = (), kind: Optional[str] = None,
                    r: Optional[int] = None) -> ExperimentConfig:
    """Command-line values win over file values."""
    update: Dict[str, Any] = {}
    operator = {k: v for k, v in (("kind", kind), ("r", r)) if v is not None}
    if operator:
        try:
            update["operator"] = cfg.operator.model_validate(
                {**cfg.operator.model_dump(exclude_unset=True), **operator})
        except ValidationError as e:
            raise click.BadParameter(str(e.errors()[0].get("msg")), param_hint="--kind/--r") from e
    if seed is not None:
        update["seed"] = seed
    if out is not None:
        update["output"] = cfg.output.model_validate({**cfg.output.model_dump(exclude_unset=True), "directory": out})
    if params:
        merged = dict(cfg.params)
        for item in params:
            if "=" not in item:
                raise click.BadParameter(f"expected key=value, got {item!r}", param_hint="--set")
            key, value = (p.strip() for p in item.split("=", 1))
            merged[key] = _scalar(value)
        update["params"] = merged
    return cfg.model_copy(update=update) if update else cfg
