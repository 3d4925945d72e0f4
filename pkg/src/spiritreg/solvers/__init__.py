from .fista import LineSearch, fista_ls
from .lm import LMResult, LMSettings, levenberg_marquardt
from .lsqr import lsqr
from .pdhg import PDHGLineSearch, operator_norm, pdhg_ls
from .trace import SolverError, SolverTrace

__all__ = [
    "LineSearch",
    "LMResult",
    "LMSettings",
    "PDHGLineSearch",
    "SolverError",
    "SolverTrace",
    "fista_ls",
    "levenberg_marquardt",
    "lsqr",
    "operator_norm",
    "pdhg_ls",
]
