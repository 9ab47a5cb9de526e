"""Pick the compiled kernel module when it is built, else the numpy fallback.

Set ``MSOKSQ_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

if os.environ.get("MSOKSQ_PURE_PYTHON", "").strip() not in ("", "0"):
    impl = _pykernels
    NAME = "python"
else:
    try:
        from . import _ckernels as impl
        NAME = "cython"
    except ImportError:  # extension not built
        impl = _pykernels
        NAME = "python"

fallback = _pykernels
