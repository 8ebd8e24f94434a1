"""Nested structured triangulations of the unit interval and the unit square.

Two mesh families are provided, both uniform and quasi-uniform:

* ``interval``: 2^level equal subintervals of [0, 1];
* ``square``: (2^level)^2 equal squares of [0, 1]^2, each split into two
  right triangles along the lower-left to upper-right diagonal.

The diagonal direction is the same at every level, so the vertex set of a
level-j mesh is contained in that of level j+1 and every coarse cell is a
union of fine cells.  Piecewise-linear interpolation between levels is
therefore exact, which is what makes nodal error comparison against a fine
reference solution meaningful.
"""

import numpy as np
from scipy import sparse

INTERVAL = "interval"
SQUARE = "square"


class Mesh:
    """Simplicial mesh, immutable after construction.

    Attributes
    ----------
    family : str
        "interval" or "square".
    level : int
        Refinement level j; the nominal mesh size is 2^-j.
    vertices : (n_vertices, dim) float array
    cells : (n_cells, dim+1) int array
        Vertex indices per cell (2 per segment, 3 per triangle).
    h_max : float
        Maximal cell diameter.
    """

    def __init__(self, family, level, vertices, cells):
        self.family = family
        self.level = int(level)
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.cells = np.ascontiguousarray(cells, dtype=np.int64)
        self.dim = self.vertices.shape[1]
        self.n_vertices = self.vertices.shape[0]
        self.n_cells = self.cells.shape[0]
        self.cell_measures = _cell_measures(self.vertices, self.cells)
        if np.any(self.cell_measures <= 0.0):
            raise ValueError("mesh contains a cell with nonpositive measure")
        self.h_max = float(_cell_diameters(self.vertices, self.cells).max())
        self.vertices.setflags(write=False)
        self.cells.setflags(write=False)
        self.cell_measures.setflags(write=False)

    def __repr__(self):
        return (f"Mesh({self.family}, level={self.level}, "
                f"{self.n_vertices} vertices, {self.n_cells} cells)")


def _cell_measures(vertices, cells):
    p = vertices[cells]
    if cells.shape[1] == 2:
        return np.abs(p[:, 1, 0] - p[:, 0, 0])
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _cell_diameters(vertices, cells):
    p = vertices[cells]
    if cells.shape[1] == 2:
        return np.abs(p[:, 1, 0] - p[:, 0, 0])
    d01 = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    d12 = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
    d20 = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
    return np.max(np.stack([d01, d12, d20]), axis=0)


def build_interval_mesh(level):
    """Uniform mesh of [0, 1] with 2^level cells."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    n = 2 ** level
    vertices = (np.arange(n + 1, dtype=np.float64) / n)[:, None]
    cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    return Mesh(INTERVAL, level, vertices, cells)


def build_square_mesh(level):
    """Criss-cross triangulation of [0, 1]^2 with 2*(2^level)^2 triangles.

    Every unit square of the grid is split along the diagonal running from
    its lower-left to its upper-right corner; both triangles are oriented
    counterclockwise.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    n = 2 ** level
    coords = np.arange(n + 1, dtype=np.float64) / n
    xx, yy = np.meshgrid(coords, coords, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(ix, iy):
        return iy * (n + 1) + ix

    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    ix = ix.ravel()
    iy = iy.ravel()
    v00 = vid(ix, iy)
    v10 = vid(ix + 1, iy)
    v01 = vid(ix, iy + 1)
    v11 = vid(ix + 1, iy + 1)
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.empty((2 * n * n, 3), dtype=np.int64)
    cells[0::2] = lower
    cells[1::2] = upper
    return Mesh(SQUARE, level, vertices, cells)


class ProlongationMap:
    """Exact evaluation of a coarse P1 field at every fine-mesh vertex.

    For each fine vertex this stores the containing coarse cell and the
    barycentric weights of the vertex within it.  Because the families nest
    and all coordinates are dyadic rationals, weights at shared vertices are
    exactly {1, 0, ...} and prolongation reproduces coarse nodal values
    bit-exactly.
    """

    def __init__(self, coarse, fine, cell_index, weights):
        self.coarse = coarse
        self.fine = fine
        self.cell_index = cell_index
        self.weights = weights
        self.nodes = coarse.cells[cell_index]

    def apply(self, coarse_values):
        """Map nodal values (n_coarse, ...) to fine nodal values."""
        vals = coarse_values[self.nodes]  # (n_fine, nloc, ...)
        w = self.weights
        if vals.ndim == 3:
            return np.einsum("fl,flk->fk", w, vals)
        return np.einsum("fl,fl->f", w, vals)

    def matrix(self):
        """Sparse (n_fine, n_coarse) interpolation matrix."""
        nf = self.fine.n_vertices
        nloc = self.nodes.shape[1]
        rows = np.repeat(np.arange(nf), nloc)
        cols = self.nodes.ravel()
        return sparse.coo_matrix(
            (self.weights.ravel(), (rows, cols)),
            shape=(nf, self.coarse.n_vertices)).tocsr()


def prolongation_map(coarse, fine):
    """Build the coarse-to-fine evaluation table for two nested meshes."""
    if coarse.family != fine.family:
        raise ValueError(
            f"mesh families do not match: {coarse.family!r} vs {fine.family!r}")
    if fine.level < coarse.level:
        raise ValueError("fine mesh must be at least as refined as the coarse one")

    nc = 2 ** coarse.level
    if coarse.family == INTERVAL:
        x = fine.vertices[:, 0]
        idx = np.minimum((x * nc).astype(np.int64), nc - 1)
        xi = x * nc - idx
        weights = np.column_stack([1.0 - xi, xi])
        return ProlongationMap(coarse, fine, idx, weights)

    x = fine.vertices[:, 0]
    y = fine.vertices[:, 1]
    ix = np.minimum((x * nc).astype(np.int64), nc - 1)
    iy = np.minimum((y * nc).astype(np.int64), nc - 1)
    xi = x * nc - ix
    eta = y * nc - iy
    square = iy * nc + ix
    lower = eta <= xi
    cell_index = 2 * square + np.where(lower, 0, 1)
    weights = np.where(
        lower[:, None],
        np.column_stack([1.0 - xi, xi - eta, eta]),
        np.column_stack([1.0 - eta, xi, eta - xi]))
    return ProlongationMap(coarse, fine, cell_index, weights)
