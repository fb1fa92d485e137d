"""Hierarchical low-rank matrices in HODLR and HSS format."""

from .cluster import *  # noqa: F401,F403
from .compressors import *  # noqa: F401,F403
from .hodlr import *  # noqa: F401,F403
from .hss import *  # noqa: F401,F403
from .convert import *  # noqa: F401,F403
from .apps import *  # noqa: F401,F403
from . import container  # noqa: F401

__version__ = "0.1.0"
