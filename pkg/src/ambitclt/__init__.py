"""Weak dependence coefficients, moments, simulation and CLT experiments for
mixed moving average and ambit fields driven by Levy bases.

The estimator (``ambitclt.gmm``) and the command line (``ambitclt.cli``) are
not imported here to keep the import light.
"""

from .exceptions import *  # noqa: F401,F403
from .levy import *  # noqa: F401,F403
from .geometry import *  # noqa: F401,F403
from .kernels import *  # noqa: F401,F403
from .moments import *  # noqa: F401,F403
from .coefficients import *  # noqa: F401,F403
from .simulation import *  # noqa: F401,F403
from .harness import *  # noqa: F401,F403

__version__ = "0.1.0"
