"""Kernel backend selection: compiled extension if built, pure Python otherwise."""

try:
    from . import _kernels as _impl

    BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on build environment
    from . import _kernels_py as _impl

    BACKEND = "python"

from . import _kernels_py as python_impl

bilinear_elements = _impl.bilinear_elements
rank_word = _impl.rank_word

__all__ = ["BACKEND", "bilinear_elements", "rank_word", "python_impl"]
