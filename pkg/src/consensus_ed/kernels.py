"""Backend selection for the hot averaging loop.

The compiled extension is used when it was built; otherwise, or when
``CONSENSUS_ED_PURE_PYTHON=1`` is set, the numpy implementation is used.
"""

import os

from . import _averaging_py

BACKEND = "python"
average_rounds_py = _averaging_py.average_rounds
average_rounds = average_rounds_py
average_rounds_ext = None

try:
    from ._averaging import average_rounds as average_rounds_ext
except ImportError:  # extension not built
    pass

if average_rounds_ext is not None and os.environ.get("CONSENSUS_ED_PURE_PYTHON", "") != "1":
    average_rounds = average_rounds_ext
    BACKEND = "cython"
