"""Language-guided volumetric exploration: simulator, mapper, planner, harness."""

from ._kernels import COMPILED as KERNELS_COMPILED

__version__ = "0.1.0"

__all__ = ["KERNELS_COMPILED", "__version__"]
