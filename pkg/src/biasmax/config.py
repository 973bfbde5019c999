"""Plain-text ``key = value`` configuration files.

Blank lines and lines starting with ``#`` are ignored. Keys are dotted
names such as ``curve.1`` or ``bias.2.1``; values are kept as strings.
"""

from __future__ import annotations

from .errors import FormatError


def parse_config(text: str, source: str = "<config>") -> dict[str, str]:
    cfg: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise FormatError(f"{source}:{line_no}: expected 'key = value'")
        cfg[key.strip()] = value.strip()
    return cfg


def read_config(path) -> dict[str, str]:
    with open(path) as fh:
        return parse_config(fh.read(), str(path))


def format_config(cfg: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.items())


def floats(value: str) -> list[float]:
    """Comma-separated reals."""
    try:
        return [float(x) for x in value.split(",") if x.strip()]
    except ValueError as exc:
        raise FormatError(f"expected comma-separated reals, got {value!r}") from exc


def ints(value: str) -> list[int]:
    try:
        return [int(x) for x in value.split(",") if x.strip()]
    except ValueError as exc:
        raise FormatError(f"expected comma-separated integers, got {value!r}") from exc
