# SPDX-License-Identifier: Apache-2.0
"""Python surface of the cdi3d pipeline core.

Everything lives in the compiled module; this package just re-exports it. A
wheel ships _cdi3d inside the package, a plain CMake build leaves it on
PYTHONPATH as a top-level module — support both.
"""

try:
    from ._cdi3d import *  # noqa: F401,F403
except ImportError:
    from _cdi3d import *  # noqa: F401,F403

__version__ = "0.1.0"
