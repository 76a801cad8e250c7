from .tensor import Tensor, as_tensor, no_grad
from . import ops  # noqa: F401  (attaches operator sugar to Tensor)
from .params import ParamStore, PARAM_GROUPS, glorot_uniform
from .optim import Adam
from .gradcheck import GradCheckReport, finite_difference_check

__all__ = [
    "Tensor",
    "as_tensor",
    "no_grad",
    "ops",
    "ParamStore",
    "PARAM_GROUPS",
    "glorot_uniform",
    "Adam",
    "GradCheckReport",
    "finite_difference_check",
]
