"""Engine selection: the compiled kernel when importable, else pure Python.

Set ``CONTRACT_LENS_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from ._pyengine import PyEngine

try:  # pragma: no cover - depends on the build
    from ._cengine import CEngine
except ImportError:  # pragma: no cover
    CEngine = None


def _env_forces_python() -> bool:
    return os.environ.get("CONTRACT_LENS_PURE_PYTHON", "").strip().lower() in ("1", "true", "yes")


def compiled_available() -> bool:
    return CEngine is not None


def select_engine(name: str | None = None):
    """Engine class for ``name`` in {None, "auto", "c", "python"}."""
    if name in (None, "auto"):
        if CEngine is not None and not _env_forces_python():
            return CEngine
        return PyEngine
    if name == "python":
        return PyEngine
    if name == "c":
        if CEngine is None:
            raise RuntimeError("compiled engine not built; reinstall with Cython available")
        return CEngine
    raise ValueError(f"unknown engine {name!r}")


def engine_label(cls) -> str:
    return "python" if cls is PyEngine else "c"
