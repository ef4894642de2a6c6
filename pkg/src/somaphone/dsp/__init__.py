"""DSP package: kernel backend selection and the block engine.

Two interchangeable kernel sets exist: a compiled extension (_kernels) and
a NumPy fallback (kernels_py). Selection order: the SOMAPHONE_DSP_BACKEND
environment variable ("ext" or "py"), else the extension when importable,
else the fallback. Both expose the same functions and agree numerically to
float32 rounding; per-backend output is bit-stable run to run.
"""

from __future__ import annotations

import os


def load_kernels(name: str = "auto"):
    """Return the kernel module for `name` ("auto", "ext" or "py")."""
    if name == "auto":
        name = os.environ.get("SOMAPHONE_DSP_BACKEND", "auto")
    if name == "py":
        from . import kernels_py
        return kernels_py
    if name == "ext":
        from . import _kernels
        return _kernels
    if name == "auto":
        try:
            from . import _kernels
            return _kernels
        except ImportError:
            from . import kernels_py
            return kernels_py
    raise ValueError(f"unknown DSP backend {name!r} (use 'auto', 'ext' or 'py')")


kernels = load_kernels()
BACKEND = "ext" if kernels.__name__.endswith("_kernels") else "py"

from .engine import Engine, EngineConfig  # noqa: E402

__all__ = ["Engine", "EngineConfig", "kernels", "load_kernels", "BACKEND"]
