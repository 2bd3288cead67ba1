"""Backend selection for the integration kernel.

Uses the compiled ``_kernel_c`` extension when it is importable and the
``ETCONSENSUS_PURE`` environment variable is unset; otherwise falls back
to the NumPy implementation. Both expose the same ``Kernel`` class.
"""
import os

from . import _kernel_py
from ._kernel_py import STATUS_DONE, STATUS_EVENT, STATUS_NONFINITE

PythonKernel = _kernel_py.Kernel

try:
    from ._kernel_c import Kernel as CythonKernel
except ImportError:  # extension not built
    CythonKernel = None

if CythonKernel is not None and not os.environ.get("ETCONSENSUS_PURE"):
    Kernel = CythonKernel
    BACKEND = "cython"
else:
    Kernel = PythonKernel
    BACKEND = "python"


def get_kernel_class(backend=None):
    """Return the kernel class for ``"cython"``, ``"python"`` or the default (None)."""
    if backend is None:
        return Kernel
    if backend == "python":
        return PythonKernel
    if backend == "cython":
        if CythonKernel is None:
            raise ImportError("the compiled kernel is not available; reinstall with Cython present")
        return CythonKernel
    raise ValueError(f"unknown backend {backend!r}")


__all__ = ["Kernel", "BACKEND", "PythonKernel", "CythonKernel", "get_kernel_class",
           "STATUS_DONE", "STATUS_EVENT", "STATUS_NONFINITE"]
