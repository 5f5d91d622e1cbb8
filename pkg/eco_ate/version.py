import subprocess
from functools import lru_cache
from importlib import metadata
from pathlib import Path

from django.conf import settings

__version__ = "0.1.0"


def _package_version():
    try:
        return metadata.version("eco-ate")
    except metadata.PackageNotFoundError:
        return __version__


def _git_commit():
    root = Path(__file__).resolve().parents[1]
    try:
        result = subprocess.run(
            ["git", "rev-parse", "--short=12", "HEAD"],
            cwd=root,
            capture_output=True,
            text=True,
            check=False,
        )
    except OSError:
        return None
    if result.returncode != 0:
        return None
    return result.stdout.strip() or None


@lru_cache(maxsize=1)
def build_identifier():
    """Return a git-style build identifier for run stamping.

    ``ECO_ATE_BUILD_ID`` wins when set; otherwise the package version is combined
    with the short commit hash of the working tree, or ``nogit`` outside a checkout.

    Returns
    -------
    str
        Identifier such as ``0.1.0+3f2a9c1d0b7e``
    """
    configured = getattr(settings, "ECO_ATE_BUILD_ID", "")
    if configured:
        return configured
    commit = _git_commit() or "nogit"
    return f"{_package_version()}+{commit}"
