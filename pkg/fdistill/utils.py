"""Utility functions for printing version information."""

# Debugging aid only, excluded from tests and coverage with `  # pragma: no cover`.

import importlib.metadata
import locale
import os
import platform
import struct
import sys
from typing import Optional

from fdistill.models import DEFAULT_ENUM_CAP, ENUM_CAP_ENV


def _get_sys_info() -> list:  # pragma: no cover
    """Return system information as a list of name-value pairs."""
    (sysname, _, release, _, machine, processor) = platform.uname()
    return [
        ("python", sys.version),
        ("python-bits", struct.calcsize("P") * 8),
        ("OS", f"{sysname}"),
        ("OS-release", f"{release}"),
        ("machine", f"{machine}"),
        ("processor", f"{processor}"),
        ("byteorder", f"{sys.byteorder}"),
        ("cpu-count", f"{os.cpu_count()}"),
        ("LC_ALL", f"{os.environ.get('LC_ALL', 'None')}"),
        ("LANG", f"{os.environ.get('LANG', 'None')}"),
        ("LOCALE", f"{locale.getlocale()}"),
        (ENUM_CAP_ENV, f"{os.environ.get(ENUM_CAP_ENV, DEFAULT_ENUM_CAP)}"),
    ]


#: Distributions reported by ``versions``: runtime, then test/lint, then docs.
_REPORTED = (
    "fdistill",
    "numpy",
    "scipy",
    "setuptools",
    "pip",
    "coverage",
    "ruff",
    "mypy",
    "pytest",
    "pytest-mock",
    "hypothesis",
    "sphinx",
    "sphinx-rtd-theme",
)


def _installed_versions() -> list[tuple[str, Optional[str]]]:  # pragma: no cover
    """Return the installed version of each reported distribution, None if absent."""
    blob: list[tuple[str, Optional[str]]] = []
    for dist in _REPORTED:
        try:
            blob.append((dist, importlib.metadata.version(dist)))
        except importlib.metadata.PackageNotFoundError:
            blob.append((dist, None))
    return blob


def versions() -> None:  # pragma: no cover
    """Print the versions of fdistill and its dependencies to screen."""
    print("\nSYSTEM INFORMATION")
    print("------------------")
    for k, stat in _get_sys_info():
        print(f"{k}: {stat}")

    print("")
    print("\nINSTALLED VERSIONS")
    print("------------------")
    for k, stat in _installed_versions():
        print(f"{k}: {stat}")
