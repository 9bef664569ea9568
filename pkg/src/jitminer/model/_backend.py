"""Kernel backend selection.

Tries the compiled extension first and falls back to the numpy kernels.
JITMINER_BACKEND=python|compiled forces a choice (compiled raises if the
extension is missing); anything else means auto.
"""

from __future__ import annotations

import os

_requested = os.environ.get("JITMINER_BACKEND", "auto").lower()

if _requested == "python":
    from . import _purenet as kernels
elif _requested == "compiled":
    from . import _fastnet as kernels  # type: ignore[no-redef]
else:
    try:
        from . import _fastnet as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _purenet as kernels  # type: ignore[no-redef]

BACKEND = kernels.NAME


def available_backends() -> dict[str, object]:
    """All importable kernel modules keyed by name (for benchmarks/tests)."""
    from . import _purenet

    found: dict[str, object] = {_purenet.NAME: _purenet}
    try:
        from . import _fastnet  # type: ignore[attr-defined]

        found[_fastnet.NAME] = _fastnet
    except ImportError:
        pass
    return found
