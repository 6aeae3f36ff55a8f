"""Edge traces, jumps, lifting and reconstruction for broken spaces.

Conventions: on an internal edge the jump is plus-trace minus minus-trace and
the dyadic jump is jump tensor canonical-normal (equal to the labeling-free
sum v+ (x) n+ + v- (x) n-).  On a boundary edge the jump is the one-sided
trace minus the boundary datum, and the average is the one-sided trace.
The broken W^{1,p} seminorm sums elementwise gradient p-norms and
internal-edge jump terms weighted by h^(1-p); boundary edges never enter it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .quadrature import edge_rule, triangle_rule
from .space import DGField, DGSpace


class EdgeTables:
    """Per-edge basis traces at edge quadrature points, shared by assemblers."""

    def __init__(self, space: DGSpace, degree: int):
        self.rule = edge_rule(degree)
        mesh = space.mesh
        ts = self.rule.points
        self.ts, self.weights = ts, self.rule.weights
        a = mesh.vertices[mesh.edge_vertices[:, 0]]
        b = mesh.vertices[mesh.edge_vertices[:, 1]]
        self.points = a[:, None, :] + ts[None, :, None] * (b - a)[:, None, :]  # (E,n,2)
        self.internal = mesh.edge_minus >= 0

        def side_tables(tri_idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            rel = self.points - space.origin[tri_idx][:, None, :]
            ref = np.einsum("tij,tqj->tqi", space.inv_jac[tri_idx], rel)
            flat = ref.reshape(-1, 2)
            vals = space.basis_values(flat).reshape(ref.shape[0], len(ts), space.n_basis)
            grads = space.basis_gradients(flat).reshape(
                ref.shape[0], len(ts), space.n_basis, 2)
            grads = np.einsum("tjm,tqkm->tqkj", space.inv_jac_t[tri_idx], grads)
            return vals, grads

        self.val_plus, self.grad_plus = side_tables(mesh.edge_plus)
        minus = np.where(self.internal, mesh.edge_minus, 0)
        self.val_minus, self.grad_minus = side_tables(minus)
        self.val_minus[~self.internal] = 0.0
        self.grad_minus[~self.internal] = 0.0


def get_edge_tables(space: DGSpace, degree: int) -> EdgeTables:
    cache = getattr(space, "_edge_tables", None)
    if cache is None:
        cache = {}
        space._edge_tables = cache
    if degree not in cache:
        cache[degree] = EdgeTables(space, degree)
    return cache[degree]


def gradient_space(space: DGSpace) -> DGSpace:
    """The broken P_(q-1) space on the same mesh (scalar structure reused)."""
    gs = getattr(space, "_gradient_space", None)
    if gs is None:
        gs = DGSpace(space.mesh, space.q - 1, space.value_dim)
        space._gradient_space = gs
    return gs


@dataclass(frozen=True)
class EdgeTraceBatch:
    edge: int
    params: np.ndarray
    points: np.ndarray
    normal: np.ndarray
    length: float
    value_plus: np.ndarray
    grad_plus: np.ndarray
    value_minus: np.ndarray | None
    grad_minus: np.ndarray | None


def edge_trace_batch(field: DGField, e: int, params: np.ndarray) -> EdgeTraceBatch:
    space, mesh = field.space, field.space.mesh
    a = mesh.vertices[mesh.edge_vertices[e, 0]]
    b = mesh.vertices[mesh.edge_vertices[e, 1]]
    pts = a[None, :] + params[:, None] * (b - a)[None, :]
    plus = int(mesh.edge_plus[e])
    ref_p = space.to_reference(plus, pts)
    vp = field.element_values(plus, ref_p)
    gp = field.element_gradients(plus, ref_p)
    minus = int(mesh.edge_minus[e])
    if minus >= 0:
        ref_m = space.to_reference(minus, pts)
        vm = field.element_values(minus, ref_m)
        gm = field.element_gradients(minus, ref_m)
    else:
        vm = gm = None
    return EdgeTraceBatch(e, params, pts, mesh.edge_normal[e],
                          float(mesh.edge_length[e]), vp, gp, vm, gm)


def jump(field: DGField, e: int, params: np.ndarray,
         datum: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """(n, N) jump at edge parameter points; boundary edges require a datum."""
    batch = edge_trace_batch(field, e, params)
    if batch.value_minus is not None:
        return batch.value_plus - batch.value_minus
    if datum is None:
        raise ValueError(f"edge {e} is a boundary edge: a boundary datum is required")
    return batch.value_plus - np.asarray(datum(batch.points), dtype=float)


def average_gradient(field: DGField, e: int, params: np.ndarray) -> np.ndarray:
    batch = edge_trace_batch(field, e, params)
    if batch.grad_minus is not None:
        return 0.5 * (batch.grad_plus + batch.grad_minus)
    return batch.grad_plus


def jump_dyadic(field: DGField, e: int, params: np.ndarray,
                datum: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """(n, N, 2) tensor product of the jump with the canonical normal."""
    j = jump(field, e, params, datum)
    n = field.space.mesh.edge_normal[e]
    return j[:, :, None] * n[None, None, :]


def _default_degrees(space: DGSpace, p: float) -> tuple[int, int]:
    bulk = max(2, int(np.ceil((space.q - 1) * p)))
    edge = max(2, int(np.ceil(p * space.q)) + 2)
    return bulk, edge


def broken_seminorm_pow(field: DGField, p: float,
                        bulk_degree: int | None = None,
                        edge_degree: int | None = None) -> float:
    """|v|^p in broken W^{1,p}: elementwise gradients plus internal jumps."""
    space = field.space
    dflt_bulk, dflt_edge = _default_degrees(space, p)
    tri = triangle_rule(bulk_degree if bulk_degree is not None else dflt_bulk)
    grads = field.gradients(tri.points)  # (T,q,N,2)
    gn = np.sqrt(np.einsum("tqcj,tqcj->tq", grads, grads))
    bulk = float(np.einsum("t,q,tq->", space.det_jac, tri.weights, gn ** p))

    tables = get_edge_tables(space, edge_degree if edge_degree is not None else dflt_edge)
    mesh = space.mesh
    internal = mesh.internal_edges()
    vp = np.einsum("ekc,eqk->eqc", field.coeffs[mesh.edge_plus[internal]],
                   tables.val_plus[internal])
    vm = np.einsum("ekc,eqk->eqc", field.coeffs[mesh.edge_minus[internal]],
                   tables.val_minus[internal])
    jn = np.sqrt(np.einsum("eqc,eqc->eq", vp - vm, vp - vm))
    h = mesh.edge_length[internal]
    edge_sum = float(np.einsum("e,q,eq->", h ** (2.0 - p), tables.weights, jn ** p))
    return bulk + edge_sum


def broken_seminorm(field: DGField, p: float, **kw) -> float:
    return broken_seminorm_pow(field, p, **kw) ** (1.0 / p)


@dataclass
class MatrixField:
    """Piecewise-polynomial matrix field (N x 2 per point) of degree q-1."""
    space: DGSpace  # the degree-(q-1) scalar-structure space
    coeffs: np.ndarray  # (T, n_basis, N, 2)

    def values(self, ref_pts: np.ndarray) -> np.ndarray:
        phi = self.space.basis_values(ref_pts)
        return np.einsum("tmcj,qm->tqcj", self.coeffs, phi)

    def lp_norm_pow(self, p: float, degree: int | None = None) -> float:
        deg = degree if degree is not None else max(2, int(np.ceil(self.space.q * p)))
        tri = triangle_rule(deg)
        vals = self.values(tri.points)
        fro = np.sqrt(np.einsum("tqcj,tqcj->tq", vals, vals))
        return float(np.einsum("t,q,tq->", self.space.det_jac, tri.weights, fro ** p))

    def __sub__(self, other: "MatrixField") -> "MatrixField":
        return MatrixField(self.space, self.coeffs - other.coeffs)


def _mass_inverses(space2: DGSpace) -> np.ndarray:
    """(T, nb, nb) inverses of the P_(q-1) element mass matrices."""
    cached = getattr(space2, "_mass_inv", None)
    if cached is not None:
        return cached
    tri = triangle_rule(max(2 * space2.q, 1))
    phi = space2.basis_values(tri.points)
    mref = np.einsum("q,qa,qb->ab", tri.weights, phi, phi)
    minv = np.linalg.inv(mref)[None, :, :] / space2.det_jac[:, None, None]
    space2._mass_inv = minv
    return minv


def lift(field: DGField, edge_degree: int | None = None) -> MatrixField:
    """Lifting of internal-edge dyadic jumps into the broken P_(q-1) space.

    Defined by (R(u), w) = sum over internal edges of ({{w}}, [[u (x) n]])
    for all matrix-valued w of degree q-1; assembled by per-element mass solves.
    """
    space = field.space
    if space.q < 1:
        raise ValueError("lifting needs degree q >= 1")
    space2 = gradient_space(space)
    mesh = space.mesh
    deg = edge_degree if edge_degree is not None else 2 * space.q + 2
    tab = get_edge_tables(space, deg)
    tab2 = get_edge_tables(space2, deg)

    internal = mesh.internal_edges()
    plus, minus = mesh.edge_plus[internal], mesh.edge_minus[internal]
    vp = np.einsum("ekc,eqk->eqc", field.coeffs[plus], tab.val_plus[internal])
    vm = np.einsum("ekc,eqk->eqc", field.coeffs[minus], tab.val_minus[internal])
    jumps = vp - vm
    n = mesh.edge_normal[internal]
    h = mesh.edge_length[internal]
    # dyadic jump integrand against each of the element's q-1 basis functions
    jdy = jumps[:, :, :, None] * n[:, None, None, :]          # (Ei,nq,N,2)
    wh = 0.5 * h[:, None] * tab2.rule.weights[None, :]        # (Ei,nq)
    contrib_p = np.einsum("eq,eqm,eqcj->emcj", wh, tab2.val_plus[internal], jdy)
    contrib_m = np.einsum("eq,eqm,eqcj->emcj", wh, tab2.val_minus[internal], jdy)

    T = mesh.num_triangles
    rhs = np.zeros((T, space2.n_basis, space.value_dim, 2))
    np.add.at(rhs, plus, contrib_p)
    np.add.at(rhs, minus, contrib_m)
    minv = _mass_inverses(space2)
    return MatrixField(space2, np.einsum("tab,tbcj->tacj", minv, rhs))


def broken_gradient(field: DGField) -> MatrixField:
    """Elementwise gradient as a degree-(q-1) matrix field."""
    space2 = gradient_space(field.space)
    coeffs = field.gradients(space2.nodes)  # nodal values of the P_(q-1) gradient
    return MatrixField(space2, coeffs)


def discrete_gradient(field: DGField) -> MatrixField:
    """Broken gradient corrected by the jump lifting."""
    return broken_gradient(field) - lift(field)


def node_groups(space: DGSpace) -> tuple[np.ndarray, int]:
    """Group (element, node) pairs by geometric coincidence within 1e-10."""
    cached = getattr(space, "_node_groups", None)
    if cached is not None:
        return cached
    keys = np.round(space.element_nodes * 1e10).astype(np.int64)
    flat = keys.reshape(-1, 2)
    _, group_id = np.unique(flat, axis=0, return_inverse=True)
    out = group_id.reshape(space.element_nodes.shape[:2]), int(group_id.max()) + 1
    space._node_groups = out
    return out


def reconstruct_continuous(field: DGField) -> DGField:
    """Averaged continuous field: each Lagrange node takes the arithmetic mean
    of the values carried by the elements sharing it."""
    space = field.space
    gid, n_groups = node_groups(space)
    N = space.value_dim
    sums = np.zeros((n_groups, N))
    counts = np.zeros(n_groups)
    np.add.at(sums, gid.reshape(-1), field.coeffs.reshape(-1, N))
    np.add.at(counts, gid.reshape(-1), 1.0)
    means = sums / counts[:, None]
    return DGField(space, means[gid.reshape(-1)].reshape(field.coeffs.shape))
