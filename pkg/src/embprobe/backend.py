"""Selects the compiled kernel extension, falling back to pure numpy.

Set EMBPROBE_BACKEND=python to force the fallback even when the
extension is built (used by the backend-parity tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("EMBPROBE_BACKEND", "").lower() == "python":
    kernels = _kernels_py
else:
    try:
        from . import _kernels_c as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_py

BACKEND = kernels.BACKEND_NAME
smo_solve = kernels.smo_solve
tsne_step = kernels.tsne_step
