"""Multi-objective deformable image registration by hypervolume maximization.

One shared-encoder, multi-head registration network is trained so that its
head outputs approximate the Pareto front of (image similarity, deformation
smoothness, segmentation similarity); run bundles feed a browser-based
explorer for a-posteriori selection among the trade-off solutions.
"""

from modir.autodiff import Tensor
from modir.estimators import GridSearchRegistration, HypervolumeRegistration
from modir.hypervolume import dominates, dynamic_weights, hv_gradient, hypervolume, nondominated_sort
from modir.network import RegistrationPair

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "RegistrationPair",
    "dominates",
    "nondominated_sort",
    "hypervolume",
    "hv_gradient",
    "dynamic_weights",
    "HypervolumeRegistration",
    "GridSearchRegistration",
    "__version__",
]
