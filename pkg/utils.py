import hashlib
import logging
import math
import re
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, List

import numpy as np
from dateutil import parser as date_parser

logger = logging.getLogger(__name__)

# 9 significant digits, fixed width, identical on every platform
NUMBER_FORMAT = "{:.8e}"


def normalize_name(name: str) -> str:
    """Normalize a registry name for comparison (``Map Elites`` -> ``map_elites``)."""
    normalized = name.lower()
    normalized = re.sub(r'[^\w\s]', '_', normalized)
    normalized = re.sub(r'\s+', '_', normalized)
    normalized = re.sub(r'_+', '_', normalized)
    return normalized.strip('_')


def stable_hash(*parts: Any) -> int:
    """
    Hash arbitrary parts to a 63-bit integer that is stable across runs and platforms.

    Python's builtin ``hash`` is salted per process, so seeds are derived from
    SHA-256 of the joined string representation instead.
    """
    text = "\x1f".join(str(part) for part in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & ((1 << 63) - 1)


def format_number(value: Any) -> str:
    """Format a number for CSV and trace files; integers stay integers."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    return NUMBER_FORMAT.format(value)


def format_vector(values: Iterable[Any], sep: str = " ") -> str:
    return sep.join(format_number(v) for v in values)


def parse_vector(text: str, sep: str = " ") -> List[float]:
    text = text.strip()
    if not text:
        return []
    return [float(token) for token in text.split(sep)]


def file_digest(path: Path) -> str:
    """SHA-256 hex digest of a file's content."""
    sha = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            sha.update(chunk)
    return sha.hexdigest()


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def source_digest(root: Path, patterns: Iterable[str] = ("*.py",)) -> str:
    """SHA-256 over the relative names and contents of the files under ``root`` matching ``patterns``."""
    root = Path(root)
    sha = hashlib.sha256()
    paths = sorted({path for pattern in patterns for path in root.glob(pattern) if path.is_file()})
    for path in paths:
        sha.update(path.relative_to(root).as_posix().encode("utf-8"))
        sha.update(file_digest(path).encode("ascii"))
    return sha.hexdigest()


def utc_timestamp() -> str:
    """Current UTC time as an ISO-8601 string."""
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def compact_timestamp() -> str:
    """Current UTC time for directory names (``20240101T120000``)."""
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")


def parse_timestamp(value: str) -> datetime:
    """Parse a timestamp written by :func:`utc_timestamp` (or anything ISO-like)."""
    try:
        parsed = date_parser.isoparse(value)
    except (ValueError, TypeError):
        parsed = date_parser.parse(value)
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed
