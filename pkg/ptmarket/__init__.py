from .util import *
from .market import *
from .debate import *
from .pqr import *
from .rule import *
from .traces import *
from .config import *
from .simulation import *
from .report import *

__version__ = package_version()

__all__ = (
    util.__all__
    + market.__all__
    + debate.__all__
    + pqr.__all__
    + rule.__all__
    + traces.__all__
    + config.__all__
    + simulation.__all__
    + report.__all__
)
