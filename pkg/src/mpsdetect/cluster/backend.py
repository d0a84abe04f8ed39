"""Select the compiled search kernels, falling back to pure Python.

Set MPSDETECT_PURE_PYTHON=1 to force the fallback (used by the
benchmark and the backend-parity tests).
"""

import os

if os.environ.get("MPSDETECT_PURE_PYTHON") == "1":
    from mpsdetect.cluster._kernels_py import enumerate_feasible, solve_disjoint

    USING_COMPILED = False
else:
    try:
        from mpsdetect.cluster._kernels import enumerate_feasible, solve_disjoint

        USING_COMPILED = True
    except ImportError:
        from mpsdetect.cluster._kernels_py import enumerate_feasible, solve_disjoint

        USING_COMPILED = False

__all__ = ["enumerate_feasible", "solve_disjoint", "USING_COMPILED"]
