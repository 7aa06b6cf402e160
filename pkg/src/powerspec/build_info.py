"""Build fingerprint.

Records which package versions produced a result, so an output file together
with its embedded config identifies the run completely.
"""

from __future__ import annotations

import platform
from importlib import metadata

from powerspec import __version__

_TRACKED = ("numpy", "scipy", "mpmath")


def _version_of(dist: str) -> str | None:
    try:
        return metadata.version(dist)
    except metadata.PackageNotFoundError:
        return None


def build_fingerprint() -> dict[str, str]:
    """Return package versions and interpreter info as a flat dict."""
    info = {"powerspec": __version__, "python": platform.python_version()}
    for dist in _TRACKED:
        version = _version_of(dist)
        if version is not None:
            info[dist] = version
    return info
