"""Structured triangulation of a rectangular duct and the dof numbering.

The computational domain is the truncated duct ]-R, R[ x ]-h, h[. The flow
is along x; the horizontal sides y = +-h are rigid walls where the normal
displacement is eliminated strongly, the vertical sides x = +-R are the
artificial boundaries carrying the absorbing condition.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

# Marker stored in DofMap.node_dofs for an eliminated component. Never a
# valid dof index.
CONSTRAINED = -1


class BoundaryTag(IntEnum):
    WALL_BOTTOM = 0
    WALL_TOP = 1
    GAMMA_MINUS = 2  # inflow side x = -R
    GAMMA_PLUS = 3   # outflow side x = +R


@dataclass(frozen=True)
class DuctGeometry:
    """Half-length R and half-height h of the rectangular duct."""

    R: float
    h: float

    def __post_init__(self) -> None:
        if self.R <= 0 or self.h <= 0:
            raise ValueError("duct half-length and half-height must be positive")

    @property
    def area(self) -> float:
        return 4.0 * self.R * self.h


@dataclass(frozen=True)
class Mesh:
    """Immutable triangle mesh with tagged boundary edges.

    Attributes
    ----------
    geometry : DuctGeometry
    nodes : (n_nodes, 2) float array of coordinates.
    triangles : (n_tri, 3) int array, counterclockwise vertex order.
    boundary_edges : (n_edges, 2) int array; each edge is oriented along the
        counterclockwise traversal of the rectangle, so its tangent on
        Gamma+ is (0, 1) and on Gamma- it is (0, -1).
    boundary_tags : (n_edges,) int array of BoundaryTag values.
    """

    geometry: DuctGeometry
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def triangle_areas(self) -> np.ndarray:
        """Signed areas; positive for counterclockwise triangles."""
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edges_with_tag(self, tag: BoundaryTag) -> np.ndarray:
        return self.boundary_edges[self.boundary_tags == int(tag)]

    def wall_node_mask(self) -> np.ndarray:
        """Boolean mask of nodes lying on the rigid walls y = +-h."""
        mask = np.zeros(self.n_nodes, dtype=bool)
        for tag in (BoundaryTag.WALL_BOTTOM, BoundaryTag.WALL_TOP):
            mask[self.edges_with_tag(tag).ravel()] = True
        return mask

    def gamma_node_mask(self) -> np.ndarray:
        """Boolean mask of nodes on the artificial boundaries x = +-R."""
        mask = np.zeros(self.n_nodes, dtype=bool)
        for tag in (BoundaryTag.GAMMA_MINUS, BoundaryTag.GAMMA_PLUS):
            mask[self.edges_with_tag(tag).ravel()] = True
        return mask


@dataclass(frozen=True)
class DofMap:
    """Mapping from (node, component) pairs to global dof indices.

    Numbering is node major with the x component first; eliminated
    components hold CONSTRAINED. Constrained components are simply absent
    from the algebraic system (strong elimination, homogeneous).
    """

    n_nodes: int
    n_dofs: int
    node_dofs: np.ndarray  # (n_nodes, 2) int, CONSTRAINED where eliminated

    def dof(self, node: int, component: int) -> int:
        """Global index of a component at a node, or CONSTRAINED."""
        return int(self.node_dofs[node, component])

    def expand(self, x: np.ndarray) -> np.ndarray:
        """Scatter a dof vector to a (n_nodes, 2) nodal field, zeros at
        constrained components."""
        field = np.zeros((self.n_nodes, 2))
        free = self.node_dofs >= 0
        field[free] = x[self.node_dofs[free]]
        return field

    def restrict(self, field: np.ndarray) -> np.ndarray:
        """Gather a (n_nodes, 2) nodal field into a dof vector, dropping
        constrained components."""
        free = self.node_dofs >= 0
        x = np.zeros(self.n_dofs)
        x[self.node_dofs[free]] = field[free]
        return x


def build_duct_mesh(geom: DuctGeometry, nx: int, ny: int) -> Mesh:
    """Triangulate the duct with a structured grid of nx by ny cells.

    Every cell is split along the same diagonal (lower-left to upper-right),
    giving 2*nx*ny congruent counterclockwise triangles over
    (nx+1)*(ny+1) nodes. Boundary edges are tagged by side and oriented
    counterclockwise.

    Parameters
    ----------
    geom : DuctGeometry
    nx, ny : int
        Cells along x and y, at least 1 each.
    """
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be at least 1")

    xs = np.linspace(-geom.R, geom.R, nx + 1)
    ys = np.linspace(-geom.h, geom.h, ny + 1)
    X, Y = np.meshgrid(xs, ys)  # row j = constant y
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i: int | np.ndarray, j: int | np.ndarray) -> np.ndarray:
        return j * (nx + 1) + i

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    ii = ii.ravel()
    jj = jj.ravel()
    n00 = nid(ii, jj)
    n10 = nid(ii + 1, jj)
    n01 = nid(ii, jj + 1)
    n11 = nid(ii + 1, jj + 1)
    lower = np.column_stack([n00, n10, n11])
    upper = np.column_stack([n00, n11, n01])
    triangles = np.vstack([lower, upper]).astype(np.int64)

    edges = []
    tags = []
    for i in range(nx):  # bottom, left to right
        edges.append((nid(i, 0), nid(i + 1, 0)))
        tags.append(BoundaryTag.WALL_BOTTOM)
    for j in range(ny):  # right side, upward
        edges.append((nid(nx, j), nid(nx, j + 1)))
        tags.append(BoundaryTag.GAMMA_PLUS)
    for i in range(nx, 0, -1):  # top, right to left
        edges.append((nid(i, ny), nid(i - 1, ny)))
        tags.append(BoundaryTag.WALL_TOP)
    for j in range(ny, 0, -1):  # left side, downward
        edges.append((nid(0, j), nid(0, j - 1)))
        tags.append(BoundaryTag.GAMMA_MINUS)

    return Mesh(
        geometry=geom,
        nodes=nodes,
        triangles=triangles,
        boundary_edges=np.asarray(edges, dtype=np.int64),
        boundary_tags=np.asarray([int(t) for t in tags], dtype=np.int64),
    )


def build_dof_map(mesh: Mesh, closed_box: bool = False) -> DofMap:
    """Number the unknowns, eliminating wall-normal components.

    On the walls y = +-h the normal is vertical, so the y component is
    eliminated (corners included). With closed_box=True the vertical sides
    x = +-R are treated as rigid walls too and lose their x component; this
    variant serves the reflection-free conservation checks.

    Numbering is deterministic: nodes in index order, x before y.
    """
    node_dofs = np.full((mesh.n_nodes, 2), CONSTRAINED, dtype=np.int64)
    wall = mesh.wall_node_mask()
    gamma_wall = mesh.gamma_node_mask() if closed_box else np.zeros(mesh.n_nodes, bool)
    counter = 0
    for node in range(mesh.n_nodes):
        if not gamma_wall[node]:
            node_dofs[node, 0] = counter
            counter += 1
        if not wall[node]:
            node_dofs[node, 1] = counter
            counter += 1
    return DofMap(n_nodes=mesh.n_nodes, n_dofs=counter, node_dofs=node_dofs)
