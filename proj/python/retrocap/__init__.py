from ._retrocap import *  # noqa: F401,F403
from ._retrocap import __doc__  # noqa: F401
