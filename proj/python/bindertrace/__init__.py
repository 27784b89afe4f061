"""Binder-style interception pipeline: parcel codec, framed transport and
past-LTL runtime verification."""

try:
    from ._bindertrace import *  # noqa: F401,F403  (installed wheel layout)
    from . import _bindertrace as _impl
except ImportError:
    from _bindertrace import *  # noqa: F401,F403  (in-tree build on PYTHONPATH)
    import _bindertrace as _impl

__all__ = [n for n in dir(_impl) if not n.startswith("_")]
