"""Affine simplicial meshes: generation, Gmsh 2.2 input, geometry, connectivity."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from pathlib import Path

import numpy as np

from .bernstein import index_lookup, multi_indices, num_basis
from .quadrature import cart_to_bary, simplex_volume

log = logging.getLogger(__name__)


class MeshError(ValueError):
    pass


@dataclass
class Mesh:
    """Conforming affine simplex mesh.

    Face ``f`` of an element is the one opposite local vertex ``f``; its
    vertices are the remaining local vertices in increasing order.
    ``G[k, i, j] = d r_j / d x_i``; ``Jf`` is physical face measure over the
    measure of the bi-unit reference face.
    """

    dim: int
    vertices: np.ndarray
    elements: np.ndarray
    J: np.ndarray = None
    G: np.ndarray = None
    Jf: np.ndarray = None
    normals: np.ndarray = None
    EToE: np.ndarray = None
    EToF: np.ndarray = None
    boundary: np.ndarray = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.elements = np.asarray(self.elements, dtype=np.int64)
        _fix_orientation(self)
        geometric_factors(self)
        _connect(self)

    @property
    def K(self) -> int:
        return len(self.elements)

    @property
    def num_faces(self) -> int:
        return self.dim + 1

    def element_vertices(self) -> np.ndarray:
        return self.vertices[self.elements]

    def h_min(self) -> float:
        """Smallest ``d * volume / max face area`` over elements (an inradius-like length)."""
        vol = self.J * simplex_volume(self.dim)
        face = self.Jf * simplex_volume(self.dim - 1)
        return float(np.min(self.dim * vol / face.max(axis=1)))

    def h_max_edge(self) -> float:
        X = self.element_vertices()
        return float(max(np.linalg.norm(X[:, a] - X[:, b], axis=1).max()
                         for a, b in itertools.combinations(range(self.dim + 1), 2)))

    def map_points(self, ref_points: np.ndarray) -> np.ndarray:
        """Physical coordinates ``(K, n, d)`` of reference points ``(n, d)``."""
        return np.einsum("qv,kvx->kqx", cart_to_bary(ref_points), self.element_vertices())

    def volume(self) -> float:
        return float(self.J.sum() * simplex_volume(self.dim))


def _jacobian(X: np.ndarray) -> np.ndarray:
    # columns d x / d r_j = (X_{j+1} - X_0) / 2
    return 0.5 * np.transpose(X[:, 1:, :] - X[:, :1, :], (0, 2, 1))


def _fix_orientation(mesh: Mesh) -> int:
    A = _jacobian(mesh.element_vertices())
    neg = np.linalg.det(A) < 0
    if np.any(neg):
        e = mesh.elements
        e[neg, 1], e[neg, 2] = e[neg, 2].copy(), e[neg, 1].copy()
    return int(neg.sum())


def geometric_factors(mesh: Mesh) -> Mesh:
    """Fill ``J, G, Jf, normals``; affine elements give constants per element."""
    d = mesh.dim
    X = mesh.element_vertices()
    A = _jacobian(X)
    J = np.linalg.det(A)
    h = mesh.h_max_edge()
    if np.any(J <= 1e-14 * h**d):
        raise MeshError("degenerate element")
    G = np.transpose(np.linalg.inv(A), (0, 2, 1))
    # grad_x lambda_i: lambda_{j+1} = (1 + r_j) / 2, lambda_0 = 1 - sum
    grad_rest = 0.5 * G  # [k, x, j] = d lambda_{j+1} / d x
    grad = np.concatenate([-grad_rest.sum(axis=2, keepdims=True), grad_rest], axis=2)
    grad = np.transpose(grad, (0, 2, 1))  # [k, f, x]
    normals = -grad / np.linalg.norm(grad, axis=2, keepdims=True)
    ref_face = simplex_volume(d - 1)
    Jf = np.empty((mesh.K, d + 1))
    for f in range(d + 1):
        fv = X[:, [v for v in range(d + 1) if v != f], :]
        Jf[:, f] = _simplex_measure(fv) / ref_face
    mesh.J, mesh.G, mesh.Jf, mesh.normals = J, G, Jf, normals
    return mesh


def _simplex_measure(V: np.ndarray) -> np.ndarray:
    """Measure of (K, m+1, d) simplices embedded in d dimensions."""
    E = V[:, 1:, :] - V[:, :1, :]
    gram = np.einsum("kix,kjx->kij", E, E)
    m = E.shape[1]
    return np.sqrt(np.maximum(np.linalg.det(gram), 0.0)) / factorial(m)


def _connect(mesh: Mesh) -> None:
    d = mesh.dim
    K = mesh.K
    EToE = np.tile(np.arange(K)[:, None], (1, d + 1))
    EToF = np.tile(np.arange(d + 1)[None, :], (K, 1))
    faces = {}
    for f in range(d + 1):
        local = [v for v in range(d + 1) if v != f]
        keys = np.sort(mesh.elements[:, local], axis=1)
        for k in range(K):
            key = tuple(keys[k])
            other = faces.pop(key, None)
            if other is None:
                faces[key] = (k, f)
            else:
                k2, f2 = other
                EToE[k, f], EToF[k, f] = k2, f2
                EToE[k2, f2], EToF[k2, f2] = k, f
    mesh.EToE, mesh.EToF = EToE, EToF
    mesh.boundary = EToE == np.arange(K)[:, None]


# -- generation and input -------------------------------------------------------------


def uniform_mesh(d: int, cells_per_dim: int, lo: float = -1.0, hi: float = 1.0) -> Mesh:
    """``[lo, hi]^d`` split into squares (2 triangles) or cubes (6 Kuhn tetrahedra)."""
    n = int(cells_per_dim)
    if n < 1:
        raise ValueError("cells_per_dim must be >= 1")
    x = np.linspace(lo, hi, n + 1)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    verts = np.column_stack([g.ravel() for g in grids])
    strides = np.array([(n + 1) ** (d - 1 - i) for i in range(d)])
    cells = np.array(list(itertools.product(range(n), repeat=d)))
    base = cells @ strides
    elems = []
    for perm in itertools.permutations(range(d)):
        offs = [0]
        acc = 0
        for axis in perm:
            acc += strides[axis]
            offs.append(acc)
        elems.append(base[:, None] + np.array(offs)[None, :])
    elements = np.concatenate(elems, axis=0)
    return Mesh(d, verts, elements)


def read_gmsh(path, dim: int | None = None) -> Mesh:
    """Read a Gmsh MSH 2.2 ASCII file with linear triangles (2) or tetrahedra (4)."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    sections = {}
    i = 0
    while i < len(lines):
        ln = lines[i]
        if not ln:
            i += 1
            continue
        if not ln.startswith("$"):
            raise MeshError(f"line {i + 1}: expected a section header, got {ln!r}")
        name = ln[1:]
        try:
            end = lines.index("$End" + name, i + 1)
        except ValueError:
            raise MeshError(f"section ${name} is not terminated") from None
        sections[name] = lines[i + 1 : end]
        i = end + 1
    if "MeshFormat" not in sections:
        raise MeshError("missing $MeshFormat section")
    fmt = (sections["MeshFormat"] or [""])[0].split()
    if not fmt or not fmt[0].startswith("2") or (len(fmt) > 1 and fmt[1] != "0"):
        raise MeshError("only ASCII MSH 2.x files are supported")
    for req in ("Nodes", "Elements"):
        if req not in sections:
            raise MeshError(f"missing ${req} section")

    node_lines = sections["Nodes"]
    try:
        nn = int(node_lines[0])
        node_rows = [ln.split() for ln in node_lines[1 : nn + 1]]
        ids = np.array([int(r[0]) for r in node_rows])
        coords = np.array([[float(v) for v in r[1:4]] for r in node_rows])
    except (ValueError, IndexError) as exc:
        raise MeshError(f"malformed $Nodes section: {exc}") from None
    if len(ids) != nn:
        raise MeshError("node count does not match $Nodes header")
    lookup = {nid: j for j, nid in enumerate(ids)}

    el_lines = sections["Elements"]
    try:
        ne = int(el_lines[0])
    except (ValueError, IndexError):
        raise MeshError("malformed $Elements header") from None
    if len(el_lines) - 1 < ne:
        raise MeshError("element count does not match $Elements header")
    by_type = {2: [], 4: []}
    skipped = 0
    for row in el_lines[1 : ne + 1]:
        parts = [int(v) for v in row.split()]
        etype, ntags = parts[1], parts[2]
        conn = parts[3 + ntags :]
        if etype not in by_type:
            skipped += 1
            continue
        try:
            by_type[etype].append([lookup[v] for v in conn])
        except KeyError as exc:
            raise MeshError(f"element references unknown node {exc}") from None
    if dim is None:
        dim = 3 if by_type[4] else 2
    etype = 4 if dim == 3 else 2
    other = by_type[2] if dim == 3 else by_type[4]
    skipped += len(other)
    if skipped:
        log.warning("read_gmsh: ignored %d elements of other types", skipped)
    if not by_type[etype]:
        raise MeshError(f"no {'tetrahedra' if dim == 3 else 'triangles'} in file")
    elements = np.array(by_type[etype], dtype=np.int64)
    used = np.unique(elements)
    remap = -np.ones(len(ids), dtype=np.int64)
    remap[used] = np.arange(len(used))
    mesh = Mesh(dim, coords[used, :dim], remap[elements])
    mesh.skipped_elements = skipped
    return mesh


def write_gmsh(mesh: Mesh, path) -> Path:
    path = Path(path)
    etype = 4 if mesh.dim == 3 else 2
    with open(path, "w") as fh:
        fh.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n")
        fh.write(f"{len(mesh.vertices)}\n")
        for i, v in enumerate(mesh.vertices):
            xyz = list(v) + [0.0] * (3 - mesh.dim)
            fh.write(f"{i + 1} " + " ".join(f"{c:.17g}" for c in xyz) + "\n")
        fh.write("$EndNodes\n$Elements\n")
        fh.write(f"{mesh.K}\n")
        for k, e in enumerate(mesh.elements):
            fh.write(f"{k + 1} {etype} 2 0 1 " + " ".join(str(v + 1) for v in e) + "\n")
        fh.write("$EndElements\n")
    return path


# -- face degrees of freedom -------------------------------------------------------------


@lru_cache(maxsize=None)
def face_volume_indices(N: int, d: int) -> tuple[np.ndarray, ...]:
    """Volume positions of face-``f`` coefficients, in face multi-index order."""
    vol = index_lookup(N, d)
    out = []
    for f in range(d + 1):
        pos = []
        for a in multi_indices(N, d - 1):
            full = list(a[:f]) + [0] + list(a[f:])
            pos.append(vol[tuple(full)])
        out.append(np.array(pos))
    return tuple(out)


@lru_cache(maxsize=None)
def _canonical_tables(N: int, d: int) -> dict:
    """For each ordering ``perm`` of face vertices: local face dof -> canonical dof."""
    face_idx = multi_indices(N, d - 1)
    look = index_lookup(N, d - 1)
    tables = {}
    for perm in itertools.permutations(range(d)):
        tables[perm] = np.array([look[tuple(a[p] for p in perm)] for a in face_idx])
    return tables


@dataclass
class FaceTraceMap:
    """Per element face: volume positions of my face dofs and the neighbor's.

    ``nbr_flat[f]`` indexes the flattened ``(Np, K)`` field so that
    ``u.ravel()[nbr_flat[f]]`` is the neighbor trace matched to
    ``u.ravel()[my_flat[f]]`` (boundary faces point back at themselves).
    """

    N: int
    my_flat: list
    nbr_flat: list
    nbr_perm: np.ndarray


def face_trace_map(mesh: Mesh, N: int) -> FaceTraceMap:
    d, K = mesh.dim, mesh.K
    fvi = face_volume_indices(N, d)
    Npf = num_basis(N, d - 1)
    tables = _canonical_tables(N, d)
    perm_ids = list(tables)
    table_arr = np.stack([tables[p] for p in perm_ids])  # (nperm, Npf)
    inv_arr = np.argsort(table_arr, axis=1)
    perm_index = {p: i for i, p in enumerate(perm_ids)}

    canon = np.empty((K, d + 1), dtype=np.int64)
    for f in range(d + 1):
        local = [v for v in range(d + 1) if v != f]
        order = np.argsort(mesh.elements[:, local], axis=1, kind="stable")
        codes = np.array([perm_index[tuple(o)] for o in order])
        canon[:, f] = codes

    nbr_perm = np.empty((K, d + 1, Npf), dtype=np.int64)
    ks = np.arange(K)
    for f in range(d + 1):
        k2 = mesh.EToE[:, f]
        f2 = mesh.EToF[:, f]
        mine = table_arr[canon[:, f]]  # (K, Npf) canonical dof of local dof i
        theirs_inv = inv_arr[canon[k2, f2]]  # canonical -> neighbor local
        nbr_perm[:, f, :] = np.take_along_axis(theirs_inv, mine, axis=1)
    my_flat, nbr_flat = [], []
    for f in range(d + 1):
        my_flat.append(fvi[f][:, None] * K + ks[None, :])
        k2 = mesh.EToE[:, f]
        f2 = mesh.EToF[:, f]
        vol2 = np.empty((Npf, K), dtype=np.int64)
        for g in range(d + 1):
            sel = f2 == g
            vol2[:, sel] = fvi[g][nbr_perm[sel, f, :].T]
        nbr_flat.append(vol2 * K + k2[None, :])
    return FaceTraceMap(N, my_flat, nbr_flat, nbr_perm)


def face_domain_points(mesh: Mesh, N: int, f: int) -> np.ndarray:
    """Physical domain points ``(K, Npf, d)`` of the face-``f`` dofs."""
    d = mesh.dim
    local = [v for v in range(d + 1) if v != f]
    a = np.array(multi_indices(N, d - 1), dtype=float) / max(N, 1)
    X = mesh.element_vertices()[:, local, :]
    if N == 0:
        a = np.full((1, d), 1.0 / d)
    return np.einsum("iv,kvx->kix", a, X)
