"""Kernel selection: compiled extension when available, numpy otherwise.

Set BANDITLAB_KERNELS=python to force the fallback (used by the benchmark
and the parity tests).
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("BANDITLAB_KERNELS", "").lower() == "python":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pykernels

IMPL = _impl.IMPL
sm_loglik = _impl.sm_loglik
probit_loglik = _impl.probit_loglik
qcare_loglik = _impl.qcare_loglik
log_ndtr_vec = _impl.log_ndtr_vec
