"""Backend selection for the APDU scanner.

Prefers the compiled extension when it was built; falls back to the pure
Python implementation otherwise. Set GOOSEWATCH_PURE_PY=1 to force the
fallback (used by tests and the benchmark to compare both paths).
"""

import os

if os.environ.get("GOOSEWATCH_PURE_PY") == "1":
    from goosewatch._scan_py import scan_apdu

    BACKEND = "python"
else:
    try:
        from goosewatch._scan_c import scan_apdu  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        from goosewatch._scan_py import scan_apdu  # type: ignore[no-redef]

        BACKEND = "python"

__all__ = ["scan_apdu", "BACKEND"]
