from .backend import BACKEND, make_kernel
from .cache import ElementQuadCache
from .elements import (mech_force_element, mech_tangent_blocks,
                       phase_blocks_element)
from .system import Constraints, GlobalSystem, apply_constraints, assemble

__all__ = ["BACKEND", "make_kernel", "ElementQuadCache", "Constraints",
           "GlobalSystem", "apply_constraints", "assemble",
           "mech_force_element", "mech_tangent_blocks", "phase_blocks_element"]
