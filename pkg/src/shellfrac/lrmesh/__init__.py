from .dump import dump_parametric_mesh, mesh_polylines
from .knots import local_bspline
from .mesh import (LRBasisFunction, LRElement, LRMesh, MeshLine,
                   RefinementResult, insert_mesh_line, refine_rounds,
                   refine_structured, transfer_field)

__all__ = [
    "LRBasisFunction", "LRElement", "LRMesh", "MeshLine", "RefinementResult",
    "insert_mesh_line", "refine_rounds", "refine_structured", "transfer_field",
    "local_bspline", "dump_parametric_mesh", "mesh_polylines",
]
