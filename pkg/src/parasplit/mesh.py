"""Structured triangulations of the unit square."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

_BOUNDARY_TOL = 1e-14


def _check_bc(bc: str) -> str:
    if bc not in (DIRICHLET, NEUMANN):
        raise ValueError(f"unknown boundary-condition mode: {bc!r}")
    return bc


@dataclass(frozen=True)
class TriMesh:
    """Conforming triangulation of [0,1]^2 with boundary/interior node sets.

    Nodes are 2D coordinates, elements are counterclockwise vertex-index
    triples.  ``h`` is the maximum element diameter.
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary_nodes: np.ndarray
    interior_nodes: np.ndarray
    h: float

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.ascontiguousarray(self.nodes, dtype=float))
        object.__setattr__(self, "elements", np.ascontiguousarray(self.elements, dtype=np.int64))

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    def element_coords(self) -> np.ndarray:
        """Vertex coordinates per element, shape (num_elements, 3, 2)."""
        return self.nodes[self.elements]

    def signed_areas(self) -> np.ndarray:
        xy = self.element_coords()
        e1 = xy[:, 1] - xy[:, 0]
        e2 = xy[:, 2] - xy[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def uniform_unit_square(n: int) -> TriMesh:
    """Criss-cross mesh: n x n grid cells, each split along the same diagonal.

    Nodes are ordered lexicographically by (x2, x1) so runs are reproducible
    across refinement levels.
    """
    if n < 1:
        raise ValueError(f"subdivision count must be >= 1, got {n}")
    grid = np.linspace(0.0, 1.0, n + 1)
    x1, x2 = np.meshgrid(grid, grid, indexing="xy")
    nodes = np.column_stack([x1.ravel(), x2.ravel()])

    def nid(i, j):
        return j * (n + 1) + i

    elements = []
    for j in range(n):
        for i in range(n):
            v00, v10 = nid(i, j), nid(i + 1, j)
            v01, v11 = nid(i, j + 1), nid(i + 1, j + 1)
            # split along the (v00, v11) diagonal, counterclockwise
            elements.append((v00, v10, v11))
            elements.append((v00, v11, v01))
    elements = np.asarray(elements, dtype=np.int64)

    on_boundary = (
        (np.abs(nodes[:, 0]) < _BOUNDARY_TOL)
        | (np.abs(nodes[:, 0] - 1.0) < _BOUNDARY_TOL)
        | (np.abs(nodes[:, 1]) < _BOUNDARY_TOL)
        | (np.abs(nodes[:, 1] - 1.0) < _BOUNDARY_TOL)
    )
    boundary = np.flatnonzero(on_boundary)
    interior = np.flatnonzero(~on_boundary)
    return TriMesh(
        nodes=nodes,
        elements=elements,
        boundary_nodes=boundary,
        interior_nodes=interior,
        h=np.sqrt(2.0) / n,
    )


def node_classification(mesh: TriMesh, bc: str) -> np.ndarray:
    """Ordered degree-of-freedom map: node indices in DOF order.

    Dirichlet mode keeps the interior nodes only; Neumann mode lists the
    interior nodes first and the boundary nodes after them, matching the
    interior/boundary block ordering of the assembled matrices.
    """
    _check_bc(bc)
    if bc == DIRICHLET:
        return mesh.interior_nodes.copy()
    return np.concatenate([mesh.interior_nodes, mesh.boundary_nodes])
