"""Hot loops behind one interface.

The compiled extension (``_ckernels``) is used when it was built; otherwise the
numpy/pure-Python versions in ``_pykernels`` are used.  Set ``GEST_PURE_PYTHON=1``
to force the fallback.
"""

import os

from . import _pykernels as python

compiled = None
if not os.environ.get("GEST_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled
    except ImportError:  # extension not built
        compiled = None

BACKEND = "cython" if compiled is not None else "python"
_active = compiled if compiled is not None else python


def backends():
    """Available backends by name."""
    out = {"python": python}
    if compiled is not None:
        out["cython"] = compiled
    return out


fill_edge_affinity = _active.fill_edge_affinity
greedy_discretize = _active.greedy_discretize
brute_force = _active.brute_force
lcs_length = _active.lcs_length

__all__ = ["BACKEND", "backends", "fill_edge_affinity", "greedy_discretize", "brute_force", "lcs_length"]
