"""Content-addressed store of sweep results.

Entries are keyed by the SHA-256 of the canonical configuration text plus the package
version, and hold the CSV text together with its own digest so that a
damaged entry is detected and dropped instead of served.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path

from .. import __version__

__all__ = ["CACHE_ENV", "cache_dir", "spec_key", "lookup", "store"]

log = logging.getLogger("robust_uplink")

CACHE_ENV = "ROBUST_UPLINK_CACHE"


def cache_dir() -> Path:
    """``$ROBUST_UPLINK_CACHE`` if set, else ``~/.cache/robust_uplink``."""
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else Path.home() / ".cache" / "robust_uplink"


def spec_key(canonical: str, version: str = __version__) -> str:
    return hashlib.sha256(f"{version}\n{canonical}".encode()).hexdigest()


def _entry(key: str, root: Path | None) -> Path:
    return (root or cache_dir()) / f"{key}.json"


def lookup(key: str, root: Path | None = None) -> str | None:
    """Cached CSV text for ``key``, or ``None`` on a miss or a damaged entry."""
    path = _entry(key, root)
    try:
        raw = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        return None
    except OSError as exc:
        log.warning("cache entry %s unreadable (%s); ignoring it", path, exc)
        return None
    try:
        data = json.loads(raw)
        text = data["csv"]
        ok = data["key"] == key and hashlib.sha256(text.encode()).hexdigest() == data["sha256"]
    except (ValueError, KeyError, TypeError, AttributeError):
        ok = False
    if not ok:
        log.warning("cache entry %s is corrupt; discarding it", path)
        try:
            path.unlink()
        except OSError:
            pass
        return None
    return text


def store(key: str, text: str, root: Path | None = None) -> Path:
    """Write an entry atomically; ``OSError`` propagates."""
    path = _entry(key, root)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = json.dumps({"key": key, "sha256": hashlib.sha256(text.encode()).hexdigest(), "csv": text})
    tmp = path.with_suffix(f".tmp{os.getpid()}")
    tmp.write_text(body, encoding="utf-8")
    os.replace(tmp, path)
    return path
