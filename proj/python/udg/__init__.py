"""Unsupervised dual grouping for semantically coherent OOD detection."""

try:
    from ._udg import *  # noqa: F401,F403
    from ._udg import __doc__  # noqa: F401
except ImportError:  # in-tree builds put the module next to this package
    from _udg import *  # noqa: F401,F403
    from _udg import __doc__  # noqa: F401
