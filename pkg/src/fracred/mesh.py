"""Simplicial interval and rectangle meshes with labeled scenario regions.

The computational domain is a bounded axis-aligned box standing in for the
whole space; nodes on the outer box boundary carry a homogeneous Dirichlet
condition imposed at assembly time.  Scenario geometry consists of an
inhomogeneity region OMEGA strictly inside the box, two exterior data windows
W and WTILDE, and a far set E.  Regions are axis-aligned boxes and an element
belongs to a region iff its barycenter does; discrete closure disjointness
between OMEGA and each window means the element sets share no node, so at
least one untagged buffer element separates them.

W and WTILDE may coincide or overlap (same-window Cauchy data is a legitimate
scenario); OMEGA must stay buffered from both.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

OMEGA = "OMEGA"
W = "W"
WTILDE = "WTILDE"
E = "E"
OTHER_EXTERIOR = "OTHER_EXTERIOR"

#: node/element tag vocabulary, in priority order for single-tag reporting
REGION_TAGS = (OMEGA, W, WTILDE, E, OTHER_EXTERIOR)


class MeshError(ValueError):
    """Degenerate or inconsistent mesh construction input."""


class RegionError(ValueError):
    """Region boxes violate emptiness or closure-disjointness requirements."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming simplicial mesh of an axis-aligned box.

    Attributes
    ----------
    dim : int
        Ambient dimension, 1 or 2.
    nodes : ndarray, shape (n_nodes, dim)
        Node coordinates.
    elements : ndarray, shape (n_elements, dim + 1)
        Node indices per element (2 per interval, 3 per triangle),
        positively oriented.
    box : ndarray, shape (dim, 2)
        The bounding box, rows are (min, max) per coordinate.
    """

    dim: int
    nodes: np.ndarray
    elements: np.ndarray
    box: np.ndarray

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.elements.setflags(write=False)
        self.box.setflags(write=False)

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    @property
    def element_count(self) -> int:
        return self.elements.shape[0]

    def element_measures(self) -> np.ndarray:
        """Length (1D) or area (2D) of every element."""
        pts = self.nodes[self.elements]
        if self.dim == 1:
            return pts[:, 1, 0] - pts[:, 0, 0]
        d1 = pts[:, 1] - pts[:, 0]
        d2 = pts[:, 2] - pts[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def element_barycenters(self) -> np.ndarray:
        return self.nodes[self.elements].mean(axis=1)

    def boundary_nodes(self) -> np.ndarray:
        """Indices of nodes on the outer box boundary (Dirichlet set)."""
        on = np.zeros(self.node_count, dtype=bool)
        for d in range(self.dim):
            on |= self.nodes[:, d] == self.box[d, 0]
            on |= self.nodes[:, d] == self.box[d, 1]
        return np.flatnonzero(on)


def build_interval_mesh(xmin: float, xmax: float, n_cells: int) -> Mesh:
    """Uniform mesh of the interval (xmin, xmax) with n_cells elements.

    Parameters
    ----------
    xmin, xmax : float
        Interval endpoints, xmin < xmax.
    n_cells : int
        Number of elements, at least 2 so an interior node exists.

    Returns
    -------
    Mesh
        Nodes at xmin + i*h with h = (xmax - xmin)/n_cells.
    """
    if n_cells < 2:
        raise MeshError(f"need at least 2 cells, got {n_cells}")
    if not xmin < xmax:
        raise MeshError(f"degenerate interval [{xmin}, {xmax}]")
    nodes = np.linspace(xmin, xmax, n_cells + 1).reshape(-1, 1)
    idx = np.arange(n_cells)
    elements = np.column_stack([idx, idx + 1])
    box = np.array([[float(xmin), float(xmax)]])
    return Mesh(1, nodes, elements.astype(np.intp), box)


def build_rect_mesh(box, nx: int, ny: int) -> Mesh:
    """Structured triangulation of a rectangle.

    Each of the nx*ny grid cells is split along the same diagonal
    (lower-left to upper-right), giving 2*nx*ny positively oriented
    triangles on (nx+1)*(ny+1) nodes.

    Parameters
    ----------
    box : array_like, shape (2, 2)
        ((xmin, xmax), (ymin, ymax)).
    nx, ny : int
        Cells per direction, at least 2 each.
    """
    box = np.asarray(box, dtype=float)
    if box.shape != (2, 2):
        raise MeshError(f"2D box must have shape (2, 2), got {box.shape}")
    if nx < 2 or ny < 2:
        raise MeshError(f"need at least 2 cells per direction, got {(nx, ny)}")
    if not (box[0, 0] < box[0, 1] and box[1, 0] < box[1, 1]):
        raise MeshError("degenerate box")
    xs = np.linspace(box[0, 0], box[0, 1], nx + 1)
    ys = np.linspace(box[1, 0], box[1, 1], ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            n00, n10 = nid(i, j), nid(i + 1, j)
            n01, n11 = nid(i, j + 1), nid(i + 1, j + 1)
            # split along the n00-n11 diagonal, both triangles CCW
            tris.append((n00, n10, n11))
            tris.append((n00, n11, n01))
    elements = np.array(tris, dtype=np.intp)
    return Mesh(2, nodes, elements, box)


def _as_box(box, dim: int) -> np.ndarray:
    b = np.asarray(box, dtype=float).reshape(dim, 2)
    if np.any(b[:, 0] >= b[:, 1]):
        raise RegionError(f"empty or inverted box {b.tolist()}")
    return b


def _inside(points: np.ndarray, box: np.ndarray) -> np.ndarray:
    ok = np.ones(points.shape[0], dtype=bool)
    for d in range(box.shape[0]):
        ok &= (points[:, d] > box[d, 0]) & (points[:, d] < box[d, 1])
    return ok


@dataclass(frozen=True, eq=False)
class RegionLabels:
    """Element and node membership for the scenario regions.

    Per-region index sets may overlap only between W and WTILDE; the
    element_tags / node_tags arrays resolve overlaps by the priority order
    OMEGA > W > WTILDE > E > OTHER_EXTERIOR and are what serialization and
    block tiling use.  boundary_omega_nodes collects nodes shared by an
    OMEGA element and a non-OMEGA element; omega_interior_nodes is the
    OMEGA node set with those removed.
    """

    omega_box: np.ndarray
    w_box: np.ndarray
    wtilde_box: np.ndarray
    element_tags: np.ndarray
    node_tags: np.ndarray
    omega_elements: np.ndarray
    w_elements: np.ndarray
    wtilde_elements: np.ndarray
    e_elements: np.ndarray
    omega_nodes: np.ndarray
    w_nodes: np.ndarray
    wtilde_nodes: np.ndarray
    e_nodes: np.ndarray
    boundary_omega_nodes: np.ndarray
    omega_interior_nodes: np.ndarray

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            getattr(self, name).setflags(write=False)

    def element_set(self, tag: str) -> np.ndarray:
        return {
            OMEGA: self.omega_elements,
            W: self.w_elements,
            WTILDE: self.wtilde_elements,
            E: self.e_elements,
        }[tag]

    def node_set(self, tag: str) -> np.ndarray:
        return {
            OMEGA: self.omega_nodes,
            W: self.w_nodes,
            WTILDE: self.wtilde_nodes,
            E: self.e_nodes,
        }[tag]

    def matches(self, other: "RegionLabels") -> bool:
        """True when both labelings tag every element and node identically."""
        return self is other or (
            np.array_equal(self.element_tags, other.element_tags)
            and np.array_equal(self.node_tags, other.node_tags)
        )


def _element_nodes(mesh: Mesh, element_idx: np.ndarray) -> np.ndarray:
    if element_idx.size == 0:
        return np.empty(0, dtype=np.intp)
    return np.unique(mesh.elements[element_idx])


def label_regions(mesh: Mesh, omega_box, w_box, wtilde_box) -> RegionLabels:
    """Tag elements and nodes by barycenter membership in region boxes.

    An element is OMEGA/W/WTILDE iff its barycenter lies in the open box; E
    collects untagged elements that share no node with any tagged element
    (one buffer element away from everything); the remaining untagged
    elements are OTHER_EXTERIOR.  OMEGA must be strictly inside the mesh
    box and its closure must be disjoint from both window closures, i.e.
    the element sets share no node.  W and WTILDE may overlap each other.

    Raises
    ------
    RegionError
        If any region comes out empty, OMEGA touches the outer boundary,
        or closure disjointness fails (including OMEGA/window overlap).
    """
    omega_box = _as_box(omega_box, mesh.dim)
    w_box = _as_box(w_box, mesh.dim)
    wtilde_box = _as_box(wtilde_box, mesh.dim)
    if np.any(omega_box[:, 0] <= mesh.box[:, 0]) or np.any(
        omega_box[:, 1] >= mesh.box[:, 1]
    ):
        raise RegionError("omega box must be strictly inside the mesh box")

    bary = mesh.element_barycenters()
    in_omega = _inside(bary, omega_box)
    in_w = _inside(bary, w_box)
    in_wt = _inside(bary, wtilde_box)

    if np.any(in_omega & in_w) or np.any(in_omega & in_wt):
        raise RegionError("omega overlaps a data window")
    for name, mask in ((OMEGA, in_omega), (W, in_w), (WTILDE, in_wt)):
        if not mask.any():
            raise RegionError(f"region {name} is empty")

    omega_elements = np.flatnonzero(in_omega)
    w_elements = np.flatnonzero(in_w)
    wtilde_elements = np.flatnonzero(in_wt)

    omega_nodes = _element_nodes(mesh, omega_elements)
    w_nodes = _element_nodes(mesh, w_elements)
    wtilde_nodes = _element_nodes(mesh, wtilde_elements)

    # discrete closure disjointness: one untagged element must separate
    # omega from each window, so their node sets may not intersect
    if np.intersect1d(omega_nodes, w_nodes).size:
        raise RegionError("omega and W closures touch (no buffer element)")
    if np.intersect1d(omega_nodes, wtilde_nodes).size:
        raise RegionError("omega and WTILDE closures touch (no buffer element)")

    tagged = in_omega | in_w | in_wt
    tagged_nodes = np.unique(
        np.concatenate([omega_nodes, w_nodes, wtilde_nodes])
    )
    touches_tagged = np.isin(mesh.elements, tagged_nodes).any(axis=1)
    e_mask = ~tagged & ~touches_tagged
    e_elements = np.flatnonzero(e_mask)
    e_nodes = _element_nodes(mesh, e_elements)
    if e_elements.size == 0:
        raise RegionError("far region E is empty; enlarge the mesh box")

    element_tags = np.full(mesh.element_count, OTHER_EXTERIOR, dtype="<U14")
    element_tags[e_mask] = E
    element_tags[in_wt] = WTILDE
    element_tags[in_w] = W
    element_tags[in_omega] = OMEGA

    node_tags = np.full(mesh.node_count, OTHER_EXTERIOR, dtype="<U14")
    node_tags[e_nodes] = E
    node_tags[wtilde_nodes] = WTILDE
    node_tags[w_nodes] = W
    node_tags[omega_nodes] = OMEGA

    # boundary nodes of omega: in an OMEGA element and in a non-OMEGA element
    non_omega_nodes = _element_nodes(mesh, np.flatnonzero(~in_omega))
    boundary_omega = np.intersect1d(omega_nodes, non_omega_nodes)
    omega_interior = np.setdiff1d(omega_nodes, boundary_omega)
    if boundary_omega.size == 0 or omega_interior.size == 0:
        raise RegionError("omega region too thin to have interior and boundary")

    return RegionLabels(
        omega_box=omega_box,
        w_box=w_box,
        wtilde_box=wtilde_box,
        element_tags=element_tags,
        node_tags=node_tags,
        omega_elements=omega_elements,
        w_elements=w_elements,
        wtilde_elements=wtilde_elements,
        e_elements=e_elements,
        omega_nodes=omega_nodes,
        w_nodes=w_nodes,
        wtilde_nodes=wtilde_nodes,
        e_nodes=e_nodes,
        boundary_omega_nodes=boundary_omega,
        omega_interior_nodes=omega_interior,
    )


# ---------------------------------------------------------------------------
# JSON serialization, 17 significant digits so floats round-trip exactly


def _fmt_float(x: float) -> str:
    if not np.isfinite(x):
        raise ValueError(f"non-finite value {x} in serialization")
    return format(float(x), ".17g")


def dump_json(obj) -> str:
    """Serialize nested dict/list/scalar data with full-precision floats."""
    if isinstance(obj, dict):
        items = ", ".join(
            f"{json.dumps(str(k))}: {dump_json(v)}" for k, v in obj.items()
        )
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dump_json(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return dump_json(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(obj)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")


def mesh_to_json(mesh: Mesh, labels: RegionLabels | None = None) -> str:
    """Serialize a mesh (and optionally its region labels) to JSON text."""
    doc = {
        "dim": mesh.dim,
        "box": mesh.box,
        "nodes": mesh.nodes,
        "elements": mesh.elements,
    }
    if labels is not None:
        doc["labels"] = {
            "boxes": {
                "omega": labels.omega_box,
                "w": labels.w_box,
                "wtilde": labels.wtilde_box,
            },
            "element_tags": labels.element_tags.tolist(),
            "node_tags": labels.node_tags.tolist(),
            "boundary_omega_nodes": labels.boundary_omega_nodes,
        }
    return dump_json(doc)


def mesh_from_json(text: str):
    """Inverse of mesh_to_json.

    Returns
    -------
    (Mesh, RegionLabels or None)
        Labels are rebuilt from the stored region boxes (labeling is
        deterministic in the boxes) and checked against the stored tags.
    """
    doc = json.loads(text)
    dim = int(doc["dim"])
    mesh = Mesh(
        dim,
        np.asarray(doc["nodes"], dtype=float).reshape(-1, dim),
        np.asarray(doc["elements"], dtype=np.intp),
        np.asarray(doc["box"], dtype=float).reshape(dim, 2),
    )
    labels = None
    if "labels" in doc:
        boxes = doc["labels"]["boxes"]
        labels = label_regions(mesh, boxes["omega"], boxes["w"], boxes["wtilde"])
        stored = np.asarray(doc["labels"]["element_tags"])
        if not np.array_equal(stored, labels.element_tags):
            raise RegionError("stored labels disagree with recomputed labels")
    return mesh, labels
