"""Select the quote kernel at import: compiled if available, else pure.

Set EVAUCTION_PURE_PYTHON=1 to force the fallback (used by the benchmark
and the kernel-equivalence tests).
"""

import os

__all__ = ["BACKEND", "available_backends", "quote_options"]


def _pure():
    from . import _quote_py

    return _quote_py.quote_options


def _compiled():
    from . import _quote_cy

    return _quote_cy.quote_options


if os.environ.get("EVAUCTION_PURE_PYTHON", "") not in ("", "0"):
    quote_options = _pure()
    BACKEND = "python"
else:
    try:
        quote_options = _compiled()
        BACKEND = "compiled"
    except ImportError:
        quote_options = _pure()
        BACKEND = "python"


def available_backends() -> dict:
    """Importable kernel implementations, keyed by backend name."""
    found = {"python": _pure()}
    try:
        found["compiled"] = _compiled()
    except ImportError:
        pass
    return found
