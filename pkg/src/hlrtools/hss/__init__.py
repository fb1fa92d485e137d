"""Hierarchically semiseparable matrices."""

from ._core import *  # noqa: F401,F403
from .construct import *  # noqa: F401,F403
from .compress import *  # noqa: F401,F403
from .arith import *  # noqa: F401,F403
from .solve import *  # noqa: F401,F403
