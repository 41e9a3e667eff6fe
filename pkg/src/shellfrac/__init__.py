"""shellfrac: phase-field brittle fracture of thin shells on LR NURBS meshes."""

from .assembly import BACKEND
from .material import MaterialParams

__version__ = "0.1.0"
__all__ = ["BACKEND", "MaterialParams", "__version__"]
