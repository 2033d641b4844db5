from ._riskgrid import *  # noqa: F401,F403
from ._riskgrid import __doc__  # noqa: F401
