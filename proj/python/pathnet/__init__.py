"""Modular super-network with evolutionary pathway selection."""

try:
    # installed wheel: the extension lives inside the package
    from ._pathnet import *  # noqa: F401,F403
    from ._pathnet import __doc__  # noqa: F401
except ImportError:
    # development tree: the extension sits on sys.path next to the build
    from _pathnet import *  # noqa: F401,F403
    from _pathnet import __doc__  # noqa: F401
