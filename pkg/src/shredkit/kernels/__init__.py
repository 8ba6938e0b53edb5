"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``SHREDKIT_DISABLE_NUMBA`` is unset or ``0``. Both paths return
identical results (up to float rounding); the test-suite checks this.
"""

import logging
import os

from . import _numpy

log = logging.getLogger(__name__)

__all__ = ["BACKEND", "midranks", "inscale_counts", "backoff_scores", "nb_log_joint"]


def _numba_requested():
    flag = os.environ.get("SHREDKIT_DISABLE_NUMBA", "0").strip().lower()
    return flag in ("", "0", "false", "no")


_impl = _numpy
BACKEND = "numpy"
if _numba_requested():
    try:
        from . import _numba

        _impl = _numba
        BACKEND = "numba"
    except ImportError as exc:  # pragma: no cover - depends on environment
        log.info("numba unavailable (%s); using numpy kernels", exc)

midranks = _impl.midranks
inscale_counts = _impl.inscale_counts
backoff_scores = _impl.backoff_scores
nb_log_joint = _impl.nb_log_joint
