"""Chooses the Earley kernel at import time.

The compiled kernel is used when it was built; set ``ARTDIRECTOR_PURE_PYTHON=1``
to force the fallback.
"""
from __future__ import annotations

import importlib
import os

from . import _earley_py


def available() -> list[str]:
    names = ["python"]
    try:
        importlib.import_module("artdirector.grammar._earley_ext")
        names.insert(0, "cython")
    except ImportError:
        pass
    return names


def load(name: str | None = None):
    if name is None:
        if os.environ.get("ARTDIRECTOR_PURE_PYTHON", "") not in ("", "0"):
            return _earley_py
        try:
            return importlib.import_module("artdirector.grammar._earley_ext")
        except ImportError:
            return _earley_py
    if name == "python":
        return _earley_py
    if name == "cython":
        return importlib.import_module("artdirector.grammar._earley_ext")
    raise ValueError(f"unknown kernel {name!r}")


kernel = load()
