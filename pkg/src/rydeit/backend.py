"""Hot-kernel backend selection.

The Doppler-averaged susceptibility sum is the one performance-critical loop
in the package. A compiled Cython implementation is built when Cython and a C
compiler are available; otherwise a pure-numpy twin with the identical
contract is used. Selection happens once at import.

Set the environment variable RYDEIT_BACKEND to "numpy" or "cython" to force a
choice; forcing "cython" when the extension is absent raises ImportError so
misconfiguration never silently degrades.
"""

from __future__ import annotations

import os

from . import _chi_numpy

_FORCED = os.environ.get("RYDEIT_BACKEND", "").strip().lower()

if _FORCED == "numpy":
    _impl = _chi_numpy
elif _FORCED == "cython":
    from . import _chi_fast as _impl  # noqa: F401
else:
    if _FORCED:
        raise ImportError(
            f"RYDEIT_BACKEND={_FORCED!r} not recognized; use 'numpy' or 'cython'"
        )
    try:
        from . import _chi_fast as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _chi_numpy

averaged_chi = _impl.averaged_chi
BACKEND_NAME = _impl.BACKEND_NAME


def available_backends():
    """Names of the backends importable in this environment."""
    names = ["numpy"]
    try:
        from . import _chi_fast  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    return names
