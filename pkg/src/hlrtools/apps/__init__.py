"""Application drivers: Toeplitz solver, matrix exponential, Lyapunov solver."""

from .expm import *  # noqa: F401,F403
from .fractional import *  # noqa: F401,F403
from .lyap import *  # noqa: F401,F403
from .toeplitz import *  # noqa: F401,F403
