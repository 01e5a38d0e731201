"""Hot kernels, compiled when available.

The Cython module ``_ckernel`` is preferred; ``_pykernel`` is the numpy
fallback with identical semantics.  Set ``BLOCKL0_PURE_PYTHON=1`` to force
the fallback.  ``BACKEND`` names the active implementation.
"""

import os

from . import _pykernel

if os.environ.get("BLOCKL0_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernel
    BACKEND = "python"
else:
    try:
        from . import _ckernel as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernel
        BACKEND = "python"

fitted_norm = _impl.fitted_norm
fitted_norms = _impl.fitted_norms
mcmc_chain = _impl.mcmc_chain

__all__ = ["BACKEND", "fitted_norm", "fitted_norms", "mcmc_chain"]
