"""Broken Lagrange spaces on triangulations.

A DGSpace holds piecewise polynomial data of a fixed degree q with no
continuity across edges.  Basis functions are Lagrange polynomials on the
equispaced lattice of the reference triangle (vertices (0,0), (1,0), (0,1)),
expressed in the monomial basis through an inverted Vandermonde matrix; this
is well conditioned for the moderate degrees used here.  Vector-valued fields
store coefficients as (triangles, basis, components).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import Mesh


def reference_nodes(q: int) -> np.ndarray:
    if q == 0:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]])
    nodes = [(i / q, j / q) for j in range(q + 1) for i in range(q + 1 - j)]
    return np.array(nodes)


def _monomial_exponents(q: int) -> list[tuple[int, int]]:
    return [(a, d - a) for d in range(q + 1) for a in range(d + 1)]


class DGSpace:
    """Discontinuous piecewise-P_q space with value_dim components per point."""

    def __init__(self, mesh: Mesh, q: int, value_dim: int = 2):
        if q < 0:
            raise ValueError(f"degree must be >= 0, got {q}")
        self.mesh = mesh
        self.q = q
        self.value_dim = value_dim
        self.nodes = reference_nodes(q)
        self.n_basis = len(self.nodes)
        self._exps = _monomial_exponents(q)
        vand = np.array([[x ** a * y ** b for a, b in self._exps] for x, y in self.nodes])
        self._coeff = np.linalg.inv(vand)  # basis j = sum_k coeff[k, j] * monomial k

        tri = mesh.vertices[mesh.triangles]
        self.origin = tri[:, 0]
        self.jac = np.stack([tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]], axis=2)  # (T,2,2)
        self.det_jac = np.linalg.det(self.jac)
        self.inv_jac = np.linalg.inv(self.jac)
        self.inv_jac_t = np.transpose(self.inv_jac, (0, 2, 1))
        # physical node positions, (T, n_basis, 2)
        self.element_nodes = self.origin[:, None, :] + np.einsum(
            "tij,nj->tni", self.jac, self.nodes)

    @property
    def num_dofs(self) -> int:
        return self.mesh.num_triangles * self.n_basis * self.value_dim

    def basis_values(self, ref_pts: np.ndarray) -> np.ndarray:
        """(npts, n_basis) Lagrange basis values at reference points."""
        x, y = ref_pts[:, 0], ref_pts[:, 1]
        mono = np.stack([x ** a * y ** b for a, b in self._exps], axis=1)
        return mono @ self._coeff

    def basis_gradients(self, ref_pts: np.ndarray) -> np.ndarray:
        """(npts, n_basis, 2) reference gradients of the basis."""
        x, y = ref_pts[:, 0], ref_pts[:, 1]
        dx = np.stack([a * x ** max(a - 1, 0) * y ** b if a else np.zeros_like(x)
                       for a, b in self._exps], axis=1)
        dy = np.stack([b * x ** a * y ** max(b - 1, 0) if b else np.zeros_like(x)
                       for a, b in self._exps], axis=1)
        return np.stack([dx @ self._coeff, dy @ self._coeff], axis=2)

    def physical_gradients(self, ref_pts: np.ndarray) -> np.ndarray:
        """(T, npts, n_basis, 2) physical basis gradients at shared ref points."""
        ref = self.basis_gradients(ref_pts)
        return np.einsum("tjm,qkm->tqkj", self.inv_jac_t, ref)

    def to_reference(self, t: int | np.ndarray, x: np.ndarray) -> np.ndarray:
        """Pull physical points (n, 2) back to element t's reference coordinates."""
        return np.einsum("...ij,...nj->...ni", self.inv_jac[t], x - self.origin[t][..., None, :])

    def zero_field(self) -> "DGField":
        T = self.mesh.num_triangles
        return DGField(self, np.zeros((T, self.n_basis, self.value_dim)))


@dataclass
class DGField:
    space: DGSpace
    coeffs: np.ndarray  # (T, n_basis, value_dim)

    def __post_init__(self):
        T = self.space.mesh.num_triangles
        expected = (T, self.space.n_basis, self.space.value_dim)
        if self.coeffs.shape != expected:
            raise ValueError(f"coefficient shape {self.coeffs.shape}, expected {expected}")

    def copy(self) -> "DGField":
        return DGField(self.space, self.coeffs.copy())

    def ravel(self) -> np.ndarray:
        return self.coeffs.reshape(-1)

    @classmethod
    def from_flat(cls, space: DGSpace, flat: np.ndarray) -> "DGField":
        T = space.mesh.num_triangles
        return cls(space, flat.reshape(T, space.n_basis, space.value_dim))

    def __add__(self, other: "DGField") -> "DGField":
        return DGField(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other: "DGField") -> "DGField":
        return DGField(self.space, self.coeffs - other.coeffs)

    def __rmul__(self, s: float) -> "DGField":
        return DGField(self.space, s * self.coeffs)

    def values(self, ref_pts: np.ndarray) -> np.ndarray:
        """(T, npts, value_dim) values at shared reference points."""
        phi = self.space.basis_values(ref_pts)
        return np.einsum("tkc,qk->tqc", self.coeffs, phi)

    def gradients(self, ref_pts: np.ndarray) -> np.ndarray:
        """(T, npts, value_dim, 2) gradients at shared reference points."""
        g = self.space.physical_gradients(ref_pts)
        return np.einsum("tkc,tqkj->tqcj", self.coeffs, g)

    def element_values(self, t: int, ref_pts: np.ndarray) -> np.ndarray:
        phi = self.space.basis_values(ref_pts)
        return phi @ self.coeffs[t]

    def element_gradients(self, t: int, ref_pts: np.ndarray) -> np.ndarray:
        ref = self.space.basis_gradients(ref_pts)
        phys = np.einsum("jm,qkm->qkj", self.space.inv_jac_t[t], ref)
        return np.einsum("kc,qkj->qcj", self.coeffs[t], phys)

    def eval_at_points(self, pts: np.ndarray) -> np.ndarray:
        """Values at arbitrary physical points (n, 2).

        Points on an edge are attributed to the lowest-index containing
        triangle, so the one-sided trace from that element is reported.
        """
        tri = locate_points(self.space.mesh, pts)
        out = np.empty((len(pts), self.space.value_dim))
        for i, (t, x) in enumerate(zip(tri, pts)):
            ref = self.space.to_reference(int(t), x[None, :])
            out[i] = self.element_values(int(t), ref)[0]
        return out


def locate_points(mesh: Mesh, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Lowest containing triangle index per point; raises if a point is outside."""
    tri = mesh.vertices[mesh.triangles]
    d1 = tri[:, 1] - tri[:, 0]
    d2 = tri[:, 2] - tri[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    rel = pts[None, :, :] - tri[:, None, 0, :]  # (T, n, 2)
    lam1 = (rel[:, :, 0] * d2[:, None, 1] - rel[:, :, 1] * d2[:, None, 0]) / det[:, None]
    lam2 = (d1[:, None, 0] * rel[:, :, 1] - d1[:, None, 1] * rel[:, :, 0]) / det[:, None]
    inside = (lam1 >= -tol) & (lam2 >= -tol) & (lam1 + lam2 <= 1.0 + tol)
    found = inside.argmax(axis=0)
    if not inside[found, np.arange(len(pts))].all():
        missing = np.flatnonzero(~inside.any(axis=0))
        raise ValueError(f"points outside the mesh: indices {missing.tolist()}")
    return found


def interpolate(space: DGSpace, fn: Callable[[np.ndarray], np.ndarray]) -> DGField:
    """Elementwise nodal interpolation of fn: (n, 2) -> (n, value_dim)."""
    T = space.mesh.num_triangles
    flatpts = space.element_nodes.reshape(-1, 2)
    vals = np.asarray(fn(flatpts), dtype=float)
    if vals.shape != (flatpts.shape[0], space.value_dim):
        raise ValueError(f"interpolant returned shape {vals.shape}, "
                         f"expected {(flatpts.shape[0], space.value_dim)}")
    return DGField(space, vals.reshape(T, space.n_basis, space.value_dim))
