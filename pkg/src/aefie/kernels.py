"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
implementation is used. Set ``AEFIE_KERNELS=python`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
regular_pairs = _kernels_py.regular_pairs
pointwise_pairs = _kernels_py.pointwise_pairs

if os.environ.get("AEFIE_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        regular_pairs = _ckernels.regular_pairs
        pointwise_pairs = _ckernels.pointwise_pairs


def get_backend(name: str | None = None):
    """Return ``(regular_pairs, pointwise_pairs)`` for a backend name."""
    if name is None:
        return regular_pairs, pointwise_pairs
    if name == "python":
        return _kernels_py.regular_pairs, _kernels_py.pointwise_pairs
    if name == "cython":
        from . import _ckernels

        return _ckernels.regular_pairs, _ckernels.pointwise_pairs
    raise ValueError(f"unknown kernel backend {name!r}")
