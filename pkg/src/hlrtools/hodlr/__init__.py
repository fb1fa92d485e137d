"""Hierarchically off-diagonal low-rank matrices."""

from ._core import *  # noqa: F401,F403
from .construct import *  # noqa: F401,F403
from .arith import *  # noqa: F401,F403
from .factor import *  # noqa: F401,F403
