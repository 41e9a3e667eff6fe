"""Flat key-value configuration files.

Format: one `key = value` per line, `#` comments, optional `[section]`
headers that prefix subsequent keys as `section.key`.  A `scenario` key (or
`[scenario]` / `name`) selects built-in defaults which individual keys
override.  Values parse as int, float, bool or string.
"""

from __future__ import annotations

from pathlib import Path


def parse_value(s: str):
    s = s.strip()
    low = s.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            continue
    if low in ("inf", "infinity"):
        return float("inf")
    return s


def load_config(path: str | Path) -> dict:
    """Parse a config file into a flat dict (section-prefixed keys)."""
    cfg: dict = {}
    section = ""
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        full = f"{section}.{key}" if section else key
        cfg[full] = parse_value(val)
    # normalize the scenario selector
    if "scenario.name" in cfg and "scenario" not in cfg:
        cfg["scenario"] = cfg.pop("scenario.name")
    return cfg


def dump_config(cfg: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in sorted(cfg.items()))
