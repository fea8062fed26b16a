"""Structured quadrilateral meshes of the plate and constrained-DOF bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Nodal fields, in storage order. DOF index of (node, field) is 5*node + field.
FIELDS = ("u", "v", "w", "tx", "ty")
U, V, W, TX, TY = range(5)
N_FIELDS = 5

BOUNDARY_KINDS = ("simply-supported-all", "clamped-all", "cantilever-clamped-at-x0", "free")


@dataclass(frozen=True)
class Mesh:
    """Structured quad mesh: nodes (n, 2) [m], elements (e, 4) counterclockwise."""

    nodes: np.ndarray
    elements: np.ndarray
    nx: int
    ny: int

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def element_coords(self, e: int) -> np.ndarray:
        return self.nodes[self.elements[e]]


@dataclass(frozen=True)
class DofMap:
    """Standard 5-DOF-per-node map with a constrained index set.

    Free and constrained sets partition the 5*n_nodes standard DOFs; `free`
    maps free-equation number -> global DOF index.
    """

    n_nodes: int
    constrained: np.ndarray
    free: np.ndarray

    @property
    def n_dofs(self) -> int:
        return N_FIELDS * self.n_nodes

    @property
    def n_free(self) -> int:
        return self.free.size

    def dof_index(self, node: int, f: int) -> int:
        return N_FIELDS * node + f


def generate_structured(a: float, b: float, nx: int, ny: int) -> Mesh:
    """Uniform grid over [0, a] x [0, b] with nx * ny bilinear quads."""
    if nx < 1 or ny < 1:
        raise ValueError(f"subdivision counts must be >= 1, got nx={nx}, ny={ny}")
    if a <= 0.0 or b <= 0.0:
        raise ValueError("plate dimensions must be positive")

    xs = np.linspace(0.0, a, nx + 1)
    ys = np.linspace(0.0, b, ny + 1)
    xg, yg = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([xg.ravel(), yg.ravel()])

    elements = np.empty((nx * ny, 4), dtype=int)
    e = 0
    for j in range(ny):
        for i in range(nx):
            n0 = j * (nx + 1) + i
            elements[e] = (n0, n0 + 1, n0 + nx + 2, n0 + nx + 1)
            e += 1
    return Mesh(nodes=nodes, elements=elements, nx=nx, ny=ny)


def apply_boundary(mesh: Mesh, kind: str) -> DofMap:
    """Constrained-DOF set for the supported boundary kinds.

    simply-supported-all: u, w, ty on x = 0, a and v, w, tx on y = 0, b.
    clamped-all: all five fields on all edges.
    cantilever-clamped-at-x0: all five fields on x = 0 only.
    free: no constraints.
    """
    if kind not in BOUNDARY_KINDS:
        raise ValueError(f"unknown boundary kind {kind!r}; expected one of {BOUNDARY_KINDS}")

    x = mesh.nodes[:, 0]
    y = mesh.nodes[:, 1]
    a = x.max()
    b = y.max()
    tol_x = 1e-9 * max(a, 1.0)
    tol_y = 1e-9 * max(b, 1.0)
    on_x_edges = (np.abs(x) < tol_x) | (np.abs(x - a) < tol_x)
    on_y_edges = (np.abs(y) < tol_y) | (np.abs(y - b) < tol_y)

    constrained = set()

    def fix(nodes_mask, fields_):
        for n in np.nonzero(nodes_mask)[0]:
            for f in fields_:
                constrained.add(N_FIELDS * int(n) + f)

    if kind == "simply-supported-all":
        fix(on_x_edges, (U, W, TY))
        fix(on_y_edges, (V, W, TX))
    elif kind == "clamped-all":
        fix(on_x_edges | on_y_edges, (U, V, W, TX, TY))
    elif kind == "cantilever-clamped-at-x0":
        fix(np.abs(x) < tol_x, (U, V, W, TX, TY))

    n_dofs = N_FIELDS * mesh.n_nodes
    constrained_arr = np.array(sorted(constrained), dtype=int)
    mask = np.ones(n_dofs, dtype=bool)
    mask[constrained_arr] = False
    free = np.nonzero(mask)[0]
    return DofMap(n_nodes=mesh.n_nodes, constrained=constrained_arr, free=free)


def write_csv(mesh: Mesh, nodes_path, elements_path) -> None:
    """Dump node and element tables as CSV for debugging."""
    with open(nodes_path, "w") as f:
        f.write("node,x,y\n")
        for i, (xi, yi) in enumerate(mesh.nodes):
            f.write(f"{i},{xi!r},{yi!r}\n")
    with open(elements_path, "w") as f:
        f.write("element,n0,n1,n2,n3\n")
        for e, conn in enumerate(mesh.elements):
            f.write(f"{e},{conn[0]},{conn[1]},{conn[2]},{conn[3]}\n")
