"""Truncated generalized Langevin dynamics with power-law memory."""

try:
    from ._gle import *  # noqa: F401,F403
    from ._gle import __version__  # noqa: F401
except ImportError:  # in-tree build: the extension sits next to, not inside, the package
    from _gle import *  # noqa: F401,F403
    from _gle import __version__  # noqa: F401
