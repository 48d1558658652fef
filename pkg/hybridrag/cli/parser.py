from pathlib import Path
from typing import Dict, List, Union

from hybridrag.exceptions import InvalidConfig


def parse_config_file(config_file: Union[Path, str]) -> Dict[str, str]:
    """Read a flat ``key=value`` configuration file.

    Blank lines and lines starting with ``#`` are ignored. Keys are returned
    as written, values are stripped strings.
    """
    values = {}
    with open(config_file, "r", encoding="utf_8") as cfg:
        for line_no, line in enumerate(cfg, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise InvalidConfig(
                    f"{config_file}:{line_no}: expected key=value, received {line!r}"
                )
            values[key.strip()] = value.strip()
    return values


def parse_n_values(raw: str) -> List[int]:
    """Parse ``"5,10,15,20"`` into ``[5, 10, 15, 20]``. Empty means no rows."""
    result = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            value = int(item)
        except ValueError:
            raise InvalidConfig(f"Invalid N value: {item!r}")
        if value < 1:
            raise InvalidConfig(f"N values must be >= 1, received {value}")
        result.append(value)
    return result
