"""1D meshes with crack interfaces, DOF numbering and global assembly."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .basis import DEFAULT_ELEMENT_BASIS, BSWIElementBasis
from .elements import (
    STEEL,
    ElementError,
    ElementMatrices,
    MaterialProps,
    NoCrack,
    SectionProps,
    blocked_to_interleaved,
    bswi_beam_matrices,
    bswi_rod_matrices,
    conventional_beam_matrices,
    conventional_rod_matrices,
    crack_flexibilities,
    crack_spring_matrices,
)

KINDS = ("bswi_rod", "bswi_beam", "fem_rod", "fem_beam")
COMPONENTS = {"rod": ("axial",), "beam": ("deflection", "rotation")}


class MeshError(ValueError):
    pass


class LoadError(ValueError):
    pass


@dataclass(frozen=True)
class CrackSpec:
    position: float
    depth: float
    c_b: float = 0.0
    c_s: float = 0.0

    @property
    def is_open(self) -> bool:
        return self.c_b > 0.0 and self.c_s > 0.0


@dataclass(frozen=True)
class Element:
    x0: float
    length: float

    @property
    def x1(self) -> float:
        return self.x0 + self.length


@dataclass
class Mesh1D:
    length: float
    kind: str
    elements: list[Element]
    cracks: list[CrackSpec]
    bc: tuple[str, str]
    material: MaterialProps
    section: SectionProps
    ebasis: BSWIElementBasis = field(default=DEFAULT_ELEMENT_BASIS, repr=False)

    @property
    def structure(self) -> str:
        return self.kind.split("_")[1]

    @property
    def is_bswi(self) -> bool:
        return self.kind.startswith("bswi")

    @property
    def n_comp(self) -> int:
        return len(COMPONENTS[self.structure])

    @property
    def local_coords(self) -> np.ndarray:
        return self.ebasis.nodes.array if self.is_bswi else np.array([0.0, 1.0])

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def element_matrices(self, l_e: float) -> ElementMatrices:
        """Element matrices in interleaved nodal DOF order."""
        mat, sec = self.material, self.section
        if self.kind == "bswi_rod":
            return bswi_rod_matrices(mat, sec, l_e, self.ebasis)
        if self.kind == "bswi_beam":
            em = bswi_beam_matrices(mat, sec, l_e, self.ebasis)
            p = blocked_to_interleaved(self.ebasis.basis.n_funcs)
            return ElementMatrices(em.K[np.ix_(p, p)], em.M[np.ix_(p, p)], "interleaved")
        if self.kind == "fem_rod":
            return conventional_rod_matrices(mat, sec, l_e)
        return conventional_beam_matrices(mat, sec, l_e)


def build_mesh(
    L: float,
    n_elements: int,
    kind: str = "bswi_beam",
    cracks=(),
    bc=("free", "free"),
    material: MaterialProps = STEEL,
    section: SectionProps | None = None,
    ebasis: BSWIElementBasis = DEFAULT_ELEMENT_BASIS,
) -> Mesh1D:
    """Uniform mesh of ``n_elements``; every crack position becomes an element interface.

    ``cracks`` is a sequence of ``(position, depth)`` pairs (metres).  A crack
    lying inside an element splits that element in two.  Zero-depth cracks
    keep the split but merge the interface nodes.
    """
    if kind not in KINDS:
        raise MeshError(f"unknown element kind {kind!r}; expected one of {KINDS}")
    if not L > 0:
        raise MeshError(f"length must be positive, got {L}")
    if int(n_elements) != n_elements or n_elements < 1:
        raise MeshError(f"n_elements must be a positive integer, got {n_elements}")
    bc = tuple(bc)
    if len(bc) != 2 or any(b not in ("free", "clamped") for b in bc):
        raise MeshError(f"bc must be two of 'free'/'clamped', got {bc}")
    if section is None:
        section = SectionProps(0.02, 0.02)
    structure = kind.split("_")[1]

    crack_list = sorted((float(x), float(a)) for x, a in cracks)
    if crack_list and structure != "beam":
        raise MeshError("crack springs are only defined for beam meshes")
    tol = 1e-9 * L
    for x, _ in crack_list:
        if not (tol < x < L - tol):
            raise MeshError(f"crack position {x} must lie strictly inside (0, {L})")
    for (x1, _), (x2, _) in zip(crack_list, crack_list[1:]):
        if x2 - x1 < tol:
            raise MeshError(f"cracks at {x1} and {x2} are closer than {tol:g} m")

    n = int(n_elements)
    bounds = [i * L / n for i in range(n + 1)]
    bounds[-1] = L
    for x, _ in crack_list:
        j = int(np.argmin([abs(b - x) for b in bounds]))
        if abs(bounds[j] - x) <= tol:
            bounds[j] = x
        else:
            bounds.append(x)
    bounds.sort()
    elements = [Element(a, b - a) for a, b in zip(bounds[:-1], bounds[1:])]

    specs = []
    for x, a in crack_list:
        try:
            c_b, c_s = crack_flexibilities(material, section, a)
        except ElementError as exc:
            raise MeshError(str(exc)) from exc
        specs.append(CrackSpec(x, a, c_b, c_s))
    return Mesh1D(L, kind, elements, specs, bc, material, section, ebasis)


@dataclass
class ElementBlock:
    """One element (or crack spring) scattered into the global system.

    ``dofs`` are global indices in local order; ``interior`` / ``boundary``
    index into that local order.
    """

    dofs: np.ndarray
    K: np.ndarray
    M: np.ndarray
    boundary: np.ndarray
    interior: np.ndarray
    group: int
    element_index: int | None = None


@dataclass
class GlobalSystem:
    M: sp.csr_matrix
    K: sp.csr_matrix
    dof_map: dict
    boundary: np.ndarray
    interior: np.ndarray
    fixed: np.ndarray
    blocks: list[ElementBlock]
    node_x: np.ndarray
    n_comp: int
    mesh: Mesh1D | None = None

    @classmethod
    def from_matrices(cls, K, M, interior=(), fixed=()) -> GlobalSystem:
        """Bare system without element structure (one component per DOF)."""
        K = sp.csr_matrix(np.atleast_2d(np.asarray(K, dtype=float)))
        M = sp.csr_matrix(np.atleast_2d(np.asarray(M, dtype=float)))
        if K.shape != M.shape or K.shape[0] != K.shape[1]:
            raise MeshError(f"K {K.shape} and M {M.shape} must be square and equal-sized")
        n = K.shape[0]
        interior = np.asarray(sorted(interior), dtype=int)
        boundary = np.setdiff1d(np.arange(n), interior)
        return cls(
            M=M,
            K=K,
            dof_map={(i, 0): i for i in range(n)},
            boundary=boundary,
            interior=interior,
            fixed=np.asarray(sorted(fixed), dtype=int),
            blocks=[],
            node_x=np.arange(n, dtype=float),
            n_comp=1,
        )

    @property
    def n_dof(self) -> int:
        return self.K.shape[0]

    @cached_property
    def free(self) -> np.ndarray:
        mask = np.ones(self.n_dof, bool)
        mask[self.fixed] = False
        return np.flatnonzero(mask)

    @property
    def components(self) -> tuple[str, ...]:
        if self.mesh is not None:
            return COMPONENTS[self.mesh.structure]
        return tuple(f"c{i}" for i in range(self.n_comp))

    def dof(self, node: int, component: str) -> int:
        return self.dof_map[(node, self.components.index(component))]

    def dof_labels(self) -> list[str]:
        labels = [""] * self.n_dof
        for (node, c), i in self.dof_map.items():
            labels[i] = f"{self.components[c]}@x={self.node_x[node]:.6g}#n{node}"
        return labels

    def end_node(self, side: str) -> int:
        return 0 if side == "left" else len(self.node_x) - 1

    def nodes_at(self, x: float, tol: float = 1e-9) -> np.ndarray:
        scale = max(1.0, float(np.max(np.abs(self.node_x))))
        return np.flatnonzero(np.abs(self.node_x - x) <= tol * scale)

    def observation_row(self, x: float, component: str) -> np.ndarray:
        """Weights ``w`` such that ``w @ u`` is the field value at position ``x``.

        Points on a crack interface take the left-hand node.
        """
        c = self.components.index(component)
        row = np.zeros(self.n_dof)
        hit = self.nodes_at(x)
        if hit.size:
            row[self.dof_map[(int(hit[0]), c)]] = 1.0
            return row
        mesh = self.mesh
        if mesh is None or not (0.0 <= x <= mesh.length):
            raise MeshError(f"observation point {x} outside the mesh")
        for blk in self.blocks:
            if blk.element_index is None:
                continue
            el = mesh.elements[blk.element_index]
            if el.x0 <= x <= el.x1:
                xi = (x - el.x0) / el.length
                if mesh.is_bswi:
                    N = mesh.ebasis.shape_functions(xi)
                else:
                    N = np.array([1.0 - xi, xi])
                local = blk.dofs.reshape(-1, self.n_comp)[:, c]
                row[local] = N
                return row
        raise MeshError(f"observation point {x} not inside any element")

    def element_containing(self, x: float) -> int | None:
        if self.mesh is None:
            return None
        for blk in self.blocks:
            if blk.element_index is None:
                continue
            el = self.mesh.elements[blk.element_index]
            if el.x0 < x < el.x1:
                return blk.element_index
        return None


def assemble(mesh: Mesh1D) -> GlobalSystem:
    """Number nodes along x, scatter element and spring matrices."""
    c = mesh.n_comp
    xi = mesh.local_coords
    nloc = len(xi)
    open_at = {round(ck.position / mesh.length, 12): ck for ck in mesh.cracks if ck.is_open}

    node_x: list[float] = []
    blocks: list[ElementBlock] = []
    groups: dict[float, int] = {}
    mats: list[ElementMatrices] = []
    end_nodes: set[int] = set()
    springs = []
    prev_right = None
    for e, el in enumerate(mesh.elements):
        key = round(el.x0 / mesh.length, 12)
        if prev_right is None:
            left = 0
            node_x.append(el.x0)
        elif key in open_at:
            left = len(node_x)
            node_x.append(el.x0)
            springs.append((prev_right, left, open_at[key]))
        else:
            left = prev_right
        ids = [left]
        for x in xi[1:]:
            ids.append(len(node_x))
            node_x.append(el.x0 + x * el.length)
        node_x[ids[-1]] = el.x1
        end_nodes.update((ids[0], ids[-1]))
        prev_right = ids[-1]

        gkey = round(el.length, 15)
        if gkey not in groups:
            groups[gkey] = len(mats)
            mats.append(mesh.element_matrices(el.length))
        g = groups[gkey]
        dofs = (np.asarray(ids)[:, None] * c + np.arange(c)[None, :]).ravel()
        bnd = np.r_[np.arange(c), (nloc - 1) * c + np.arange(c)]
        inner = np.arange(c, (nloc - 1) * c)
        blocks.append(ElementBlock(dofs, mats[g].K, mats[g].M, bnd, inner, g, e))

    for left, right, ck in springs:
        try:
            sm = crack_spring_matrices(ck.c_b, ck.c_s)
        except NoCrack:  # pragma: no cover - open_at filters these
            continue
        dofs = np.r_[left * c + np.arange(c), right * c + np.arange(c)]
        blocks.append(ElementBlock(dofs, sm.K, sm.M, np.arange(2 * c), np.arange(0), -1, None))

    n_nodes = len(node_x)
    n_dof = n_nodes * c
    rows, cols, kv, mv = [], [], [], []
    for blk in blocks:
        r, cc = np.meshgrid(blk.dofs, blk.dofs, indexing="ij")
        rows.append(r.ravel())
        cols.append(cc.ravel())
        kv.append(blk.K.ravel())
        mv.append(blk.M.ravel())
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    K = sp.csr_matrix((np.concatenate(kv), (rows, cols)), shape=(n_dof, n_dof))
    M = sp.csr_matrix((np.concatenate(mv), (rows, cols)), shape=(n_dof, n_dof))
    K.sum_duplicates()
    M.sum_duplicates()

    dof_map = {(nd, k): nd * c + k for nd in range(n_nodes) for k in range(c)}
    bnodes = np.array(sorted(end_nodes))
    boundary = (bnodes[:, None] * c + np.arange(c)).ravel()
    interior = np.setdiff1d(np.arange(n_dof), boundary)
    fixed = []
    if mesh.bc[0] == "clamped":
        fixed.extend(range(c))
    if mesh.bc[1] == "clamped":
        fixed.extend((n_nodes - 1) * c + k for k in range(c))
    system = GlobalSystem(
        M=M,
        K=K,
        dof_map=dof_map,
        boundary=boundary,
        interior=interior,
        fixed=np.array(sorted(fixed), dtype=int),
        blocks=blocks,
        node_x=np.asarray(node_x),
        n_comp=c,
        mesh=mesh,
    )
    assert len(system.boundary) + len(system.interior) == n_dof
    return system


@dataclass(frozen=True)
class LoadSpec:
    """Point load at an end ('left'/'right'), a position in metres, or a node id."""

    where: str | float | int
    component: str
    signal: object = None

    def node(self, system: GlobalSystem) -> int:
        if isinstance(self.where, str):
            if self.where not in ("left", "right"):
                raise LoadError(f"unknown load location {self.where!r}")
            return system.end_node(self.where)
        if isinstance(self.where, (int, np.integer)) and not isinstance(self.where, bool):
            return int(self.where)
        hit = system.nodes_at(float(self.where))
        if hit.size == 0:
            raise LoadError(f"no node at x = {self.where}")
        return int(hit[0])


def build_load_vector(system: GlobalSystem, load: LoadSpec, amplitude: float = 1.0) -> np.ndarray:
    """Nodal point-load vector.

    Loads must act on boundary DOFs; interior loads are rejected because the
    condensed solver assumes the force can be transferred to the boundary.
    """
    try:
        dof = system.dof(load.node(system), load.component)
    except (KeyError, ValueError) as exc:
        raise LoadError(f"invalid load {load}: {exc}") from exc
    if dof not in set(system.boundary.tolist()):
        raise LoadError(
            f"load on interior DOF {dof}: loads must act on (or be transferred "
            "equivalently to) boundary DOFs for condensation"
        )
    f = np.zeros(system.n_dof)
    f[dof] = amplitude
    return f

