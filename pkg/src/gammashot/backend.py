"""Backend selection for the hot numeric kernels.

The numba-compiled kernels are used by default; set GAMMASHOT_DISABLE_NUMBA=1
(or any of "true", "yes", "on") to force the pure-numpy path instead, e.g. on
platforms without a working numba. Both backends compute identical quantities;
they agree to floating-point noise. RNG-dependent sampling lives outside the
kernels, so random streams are byte-identical across backends.

GAMMASHOT_WORKERS caps the numba threading layer; every kernel here is
single-threaded, so results do not depend on it.
"""

import os

from . import _kernels_np


def _flag(name):
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


USING_NUMBA = False

if not _flag("GAMMASHOT_DISABLE_NUMBA"):
    try:
        workers = os.environ.get("GAMMASHOT_WORKERS")
        if workers:
            import numba

            numba.set_num_threads(max(1, int(workers)))
        from . import _kernels_nb

        USING_NUMBA = True
    except ImportError:
        USING_NUMBA = False

if USING_NUMBA:
    ncg_logpdf = _kernels_nb.ncg_logpdf
    gauss_log_kernel = _kernels_nb.gauss_log_kernel
    rect_mass = _kernels_nb.rect_mass
else:
    ncg_logpdf = _kernels_np.ncg_logpdf
    gauss_log_kernel = _kernels_np.gauss_log_kernel
    rect_mass = _kernels_np.rect_mass
