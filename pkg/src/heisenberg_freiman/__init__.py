"""Heisenberg Freiman - a workbench for Freiman models of dense subsets of H(p)."""

try:
    from importlib.metadata import version

    __version__ = version("heisenberg-freiman")
except Exception:
    # Fallback when package metadata is not available (e.g., running from a checkout)
    import tomllib
    from pathlib import Path

    pyproject_path = Path(__file__).parent.parent.parent / "pyproject.toml"

    __version__ = "0.0.0"
    if pyproject_path.exists():
        try:
            with open(pyproject_path, "rb") as f:
                __version__ = tomllib.load(f)["project"]["version"]
        except Exception:
            pass
