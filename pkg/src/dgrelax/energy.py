"""Stabilized discrete energies on broken spaces.

Two formulations are assembled over the same penalty machinery:

* interior_penalty: elementwise stored energy, minus an internal-edge
  consistency term pairing DW of the average gradient with the dyadic jump,
  plus alpha times a sublinear jump penalty;
* lifted_gradient: stored energy evaluated on the discrete gradient
  (broken gradient corrected by the jump lifting), plus the same penalty,
  with no consistency term.

The jump aggregate J sums h^(1-p) integral |jump|^p over all edges, boundary
edges entering through the trace minus the boundary datum.  Penalty variants:

* energy_based:   (1 + bulk + J)^((p-1)/p) * J^(1/p)
* seminorm_based: (1 + |u|^p_W1p)^((p-1)/p) * J^(1/p)   (the default)
* convex_style:   (1 + |u|^(p-2)_W1p) * J^(2/p)

where |u|^p_W1p is the broken seminorm (internal jumps only).  The roots are
smoothed by eps_pen inside the radicand; stable_rewrite computes J through
jumps rescaled by h (equivalent algebraically, avoids underflow of |jump|^p
at large p) and combines the energy_based factors in the half/doubled form
(area + bulk + J)^((p-1)/p) * (2^p J)^(1/p) / 2, which coincides with the
plain form on unit-area domains.

Gradients are exact derivatives of the assembled value, which for the
consistency term requires the second derivative of the density.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .models import EnergyModel
from .quadrature import triangle_rule
from .space import DGField, DGSpace
from .traces import get_edge_tables, gradient_space, _mass_inverses

PENALTY_VARIANTS = ("energy_based", "seminorm_based", "convex_style")
FORMULATIONS = ("interior_penalty", "lifted_gradient")


class NonFiniteEnergyError(RuntimeError):
    def __init__(self, element: int, message: str):
        super().__init__(message)
        self.element = element


@dataclass(frozen=True)
class DiscreteEnergyConfig:
    formulation: str = "interior_penalty"
    penalty_variant: str = "seminorm_based"
    alpha: float = 20.0
    p: float | None = None  # defaults to the model growth exponent
    stable_rewrite: bool = False
    eps_pen: float = 1e-14
    bulk_degree: int | None = None
    edge_degree: int | None = None

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.penalty_variant not in PENALTY_VARIANTS:
            raise ValueError(f"unknown penalty variant {self.penalty_variant!r}")
        if self.alpha < 0 or self.eps_pen < 0:
            raise ValueError("alpha and eps_pen must be nonnegative")


@dataclass(frozen=True)
class AssembledEnergy:
    total: float
    bulk: float
    consistency: float
    penalty: float  # unscaled; total = bulk + consistency + alpha * penalty
    alpha: float
    jump_internal: float
    jump_boundary: float
    seminorm_pow: float | None = None

    @property
    def jump_total(self) -> float:
        return self.jump_internal + self.jump_boundary


class EnergyAssembler:
    """Precomputed tables for one (space, model, config, datum) combination."""

    def __init__(self, space: DGSpace, model: EnergyModel,
                 config: DiscreteEnergyConfig = DiscreteEnergyConfig(),
                 boundary_datum: Callable[[np.ndarray], np.ndarray] | None = None):
        self.space = space
        self.model = model
        self.config = config
        self.p = float(config.p if config.p is not None else model.p)
        if self.p < 2.0:
            raise ValueError(f"penalty exponent p = {self.p} must be >= 2")
        mesh = space.mesh
        self.area = float(mesh.areas.sum())

        bulk_deg = (config.bulk_degree if config.bulk_degree is not None
                    else max(2, int(np.ceil(2 * (space.q - 1) * self.p))))
        edge_deg = (config.edge_degree if config.edge_degree is not None
                    else max(2, int(np.ceil(self.p * space.q)) + 2))
        self.tri = triangle_rule(bulk_deg)
        self.phys_grad = space.physical_gradients(self.tri.points)  # (T,nq,nb,2)
        self.tables = get_edge_tables(space, edge_deg)

        self.internal = mesh.internal_edges()
        self.boundary = mesh.boundary_edges()
        self.h_int = mesh.edge_length[self.internal]
        self.h_bnd = mesh.edge_length[self.boundary]
        self.n_int = mesh.edge_normal[self.internal]
        self.plus_int = mesh.edge_plus[self.internal]
        self.minus_int = mesh.edge_minus[self.internal]
        self.plus_bnd = mesh.edge_plus[self.boundary]
        if boundary_datum is None:
            self.datum_vals = np.zeros(
                (len(self.boundary), len(self.tables.ts), space.value_dim))
        else:
            pts = self.tables.points[self.boundary].reshape(-1, 2)
            self.datum_vals = np.asarray(boundary_datum(pts), dtype=float).reshape(
                len(self.boundary), len(self.tables.ts), space.value_dim)

        self.needs_seminorm = config.penalty_variant in ("seminorm_based", "convex_style")
        if config.formulation == "lifted_gradient":
            space2 = gradient_space(space)
            self.space2 = space2
            self.phi2 = space2.basis_values(self.tri.points)            # (nq,nb2)
            self.grad_nodes = space.physical_gradients(space2.nodes)    # (T,nb2,nb,2)
            self.mass_inv = _mass_inverses(space2)
            self.tables2 = get_edge_tables(space2, edge_deg)

    # -- shared pieces ---------------------------------------------------

    def _as_coeffs(self, x: np.ndarray | DGField) -> np.ndarray:
        if isinstance(x, DGField):
            return x.coeffs
        space = self.space
        return np.asarray(x).reshape(
            space.mesh.num_triangles, space.n_basis, space.value_dim)

    def _jumps(self, coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(internal jumps (Ei,nq,N), boundary jumps (Eb,nq,N))."""
        tab = self.tables
        vp = np.einsum("ekc,eqk->eqc", coeffs[self.plus_int], tab.val_plus[self.internal])
        vm = np.einsum("ekc,eqk->eqc", coeffs[self.minus_int], tab.val_minus[self.internal])
        vb = np.einsum("ekc,eqk->eqc", coeffs[self.plus_bnd], tab.val_plus[self.boundary])
        return vp - vm, vb - self.datum_vals

    def _jump_aggregate(self, jumps: np.ndarray, h: np.ndarray) -> float:
        """sum_e h^(1-p) int |jump|^p, via the rescaled path under stable_rewrite."""
        w = self.tables.weights
        if self.config.stable_rewrite:
            r = np.sqrt(np.einsum("eqc,eqc->eq", jumps, jumps)) / h[:, None]
            return float(np.einsum("e,q,eq->", h * h, w, r ** self.p))
        jn = np.sqrt(np.einsum("eqc,eqc->eq", jumps, jumps))
        return float(np.einsum("e,q,eq->", h ** (2.0 - self.p), w, jn ** self.p))

    def _bulk_gradients(self, coeffs: np.ndarray) -> np.ndarray:
        return np.einsum("tkc,tqkj->tqcj", coeffs, self.phys_grad)

    def _seminorm_pow(self, coeffs: np.ndarray, grads: np.ndarray, j_int: float) -> float:
        gn = np.sqrt(np.einsum("tqcj,tqcj->tq", grads, grads))
        bulk_p = float(np.einsum("t,q,tq->", self.space.det_jac, self.tri.weights,
                                 gn ** self.p))
        return bulk_p + j_int

    def _lifted_gradient_coeffs(self, coeffs: np.ndarray,
                                j_int_vals: np.ndarray) -> np.ndarray:
        """Coefficients of G(u) = broken gradient - lifting, (T,nb2,N,2)."""
        grad_c = np.einsum("tkc,tmkj->tmcj", coeffs, self.grad_nodes)
        n, h = self.n_int, self.h_int
        jdy = j_int_vals[:, :, :, None] * n[:, None, None, :]
        wh = 0.5 * h[:, None] * self.tables.weights[None, :]
        cp = np.einsum("eq,eqm,eqcj->emcj", wh, self.tables2.val_plus[self.internal], jdy)
        cm = np.einsum("eq,eqm,eqcj->emcj", wh, self.tables2.val_minus[self.internal], jdy)
        rhs = np.zeros_like(grad_c)
        np.add.at(rhs, self.plus_int, cp)
        np.add.at(rhs, self.minus_int, cm)
        lift_c = np.einsum("tab,tbcj->tacj", self.mass_inv, rhs)
        return grad_c - lift_c

    # -- penalty chain ---------------------------------------------------

    def _penalty(self, bulk_w: float, semi_pow: float | None,
                 j_int: float, j_bnd: float):
        """Value and partial derivatives wrt (bulk_w, seminorm_pow, j_int, j_bnd)."""
        p, eps = self.p, self.config.eps_pen
        J = j_int + j_bnd
        Je = J + eps
        variant = self.config.penalty_variant

        if variant == "convex_style":
            Ne = semi_pow + eps
            root_j = Je ** (2.0 / p) if Je > 0 else 0.0
            root_n = Ne ** ((p - 2.0) / p) if Ne > 0 else 0.0
            pen = (1.0 + root_n) * root_j
            if Je > 0:
                d_j = (1.0 + root_n) * (2.0 / p) * Je ** (2.0 / p - 1.0)
            else:
                d_j = 0.0
            if Ne > 0 and p != 2.0:
                d_n = ((p - 2.0) / p) * Ne ** (-2.0 / p) * root_j
            else:
                d_n = 0.0
            return pen, 0.0, d_n, d_n + d_j, d_j

        if variant == "energy_based":
            A = (self.area if self.config.stable_rewrite else 1.0) + bulk_w + J
        else:
            A = 1.0 + semi_pow
        Afac = A ** ((p - 1.0) / p)
        if self.config.stable_rewrite:
            root = 0.5 * (2.0 ** p * Je) ** (1.0 / p) if Je > 0 else 0.0
            d_root = 0.5 * (2.0 ** p) * (1.0 / p) * (2.0 ** p * Je) ** (1.0 / p - 1.0) \
                if Je > 0 else 0.0
        else:
            root = Je ** (1.0 / p) if Je > 0 else 0.0
            d_root = (1.0 / p) * Je ** (1.0 / p - 1.0) if Je > 0 else 0.0
        pen = Afac * root
        dA = ((p - 1.0) / p) * A ** (-1.0 / p) * root
        d_je = Afac * d_root
        if variant == "energy_based":
            return pen, dA, 0.0, dA + d_je, dA + d_je
        return pen, 0.0, dA, dA + d_je, d_je

    # -- public API ------------------------------------------------------

    def assemble(self, x: np.ndarray | DGField) -> AssembledEnergy:
        """Energy breakdown; raises NonFiniteEnergyError naming the first
        element whose stored energy overflows."""
        out = self._energy(self._as_coeffs(x), diagnose=True)
        assert out is not None
        return out

    def energy_value(self, x: np.ndarray | DGField) -> float:
        out = self._energy(self._as_coeffs(x), diagnose=False)
        return out.total if out is not None else np.inf

    def _energy(self, coeffs: np.ndarray, diagnose: bool) -> AssembledEnergy | None:
        cfg = self.config
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            j_int_vals, j_bnd_vals = self._jumps(coeffs)
            j_int = self._jump_aggregate(j_int_vals, self.h_int)
            j_bnd = self._jump_aggregate(j_bnd_vals, self.h_bnd)
            grads = self._bulk_gradients(coeffs)

            consistency = 0.0
            if cfg.formulation == "interior_penalty":
                wvals = self.model.W(grads)
                if not np.all(np.isfinite(wvals)):
                    if not diagnose:
                        return None
                    bad = int(np.argwhere(~np.isfinite(wvals))[0][0])
                    raise NonFiniteEnergyError(
                        bad, f"stored energy not finite on element {bad}")
                bulk = float(np.einsum("t,q,tq->", self.space.det_jac,
                                       self.tri.weights, wvals))
                tab = self.tables
                gp = np.einsum("ekc,eqkj->eqcj", coeffs[self.plus_int],
                               tab.grad_plus[self.internal])
                gm = np.einsum("ekc,eqkj->eqcj", coeffs[self.minus_int],
                               tab.grad_minus[self.internal])
                dw_avg = self.model.DW(0.5 * (gp + gm))
                pair = np.einsum("eqc,eqcj,ej->eq", j_int_vals, dw_avg, self.n_int)
                consistency = -float(np.einsum("e,q,eq->", self.h_int,
                                               tab.weights, pair))
            else:
                gc = self._lifted_gradient_coeffs(coeffs, j_int_vals)
                fvals = np.einsum("tmcj,qm->tqcj", gc, self.phi2)
                wvals = self.model.W(fvals)
                if not np.all(np.isfinite(wvals)):
                    if not diagnose:
                        return None
                    bad = int(np.argwhere(~np.isfinite(wvals))[0][0])
                    raise NonFiniteEnergyError(
                        bad, f"stored energy not finite on element {bad}")
                bulk = float(np.einsum("t,q,tq->", self.space.det_jac,
                                       self.tri.weights, wvals))

            semi = (self._seminorm_pow(coeffs, grads, j_int)
                    if self.needs_seminorm else None)
            pen, *_ = self._penalty(bulk, semi, j_int, j_bnd)
            total = bulk + consistency + cfg.alpha * pen
            if not np.isfinite(total) and not diagnose:
                return None
            return AssembledEnergy(total, bulk, consistency, pen, cfg.alpha,
                                   j_int, j_bnd, semi)

    def gradient(self, x: np.ndarray | DGField) -> np.ndarray:
        """Exact derivative of the assembled total wrt every DG coefficient."""
        coeffs = self._as_coeffs(x)
        cfg, p, model = self.config, self.p, self.model
        space, tab = self.space, self.tables
        w_e = tab.weights
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            j_int_vals, j_bnd_vals = self._jumps(coeffs)
            j_int = self._jump_aggregate(j_int_vals, self.h_int)
            j_bnd = self._jump_aggregate(j_bnd_vals, self.h_bnd)
            grads = self._bulk_gradients(coeffs)
            semi = (self._seminorm_pow(coeffs, grads, j_int)
                    if self.needs_seminorm else None)

            g = np.zeros_like(coeffs)
            if cfg.formulation == "interior_penalty":
                wvals = model.W(grads)
                bulk = float(np.einsum("t,q,tq->", space.det_jac, self.tri.weights, wvals))
                _, d_bw, d_sp, d_ji, d_jb = self._penalty(bulk, semi, j_int, j_bnd)
                scale_bw = 1.0 + cfg.alpha * d_bw
                dwb = model.DW(grads)
                g += scale_bw * np.einsum("q,t,tqcj,tqkj->tkc", self.tri.weights,
                                          space.det_jac, dwb, self.phys_grad)
                # consistency: data part and average-gradient part
                gp = np.einsum("ekc,eqkj->eqcj", coeffs[self.plus_int],
                               tab.grad_plus[self.internal])
                gm = np.einsum("ekc,eqkj->eqcj", coeffs[self.minus_int],
                               tab.grad_minus[self.internal])
                avg = 0.5 * (gp + gm)
                dw_avg = model.DW(avg)
                wh = self.h_int[:, None] * w_e[None, :]
                vec = np.einsum("eq,eqcj,ej->eqc", wh, dw_avg, self.n_int)
                np.add.at(g, self.plus_int,
                          -np.einsum("eqc,eqk->ekc", vec, tab.val_plus[self.internal]))
                np.add.at(g, self.minus_int,
                          np.einsum("eqc,eqk->ekc", vec, tab.val_minus[self.internal]))
                jdy = j_int_vals[:, :, :, None] * self.n_int[:, None, None, :]
                m2 = model.D2W(avg, jdy)
                half = np.einsum("eq,eqcj->eqcj", 0.5 * wh, m2)
                np.add.at(g, self.plus_int,
                          -np.einsum("eqcj,eqkj->ekc", half, tab.grad_plus[self.internal]))
                np.add.at(g, self.minus_int,
                          -np.einsum("eqcj,eqkj->ekc", half, tab.grad_minus[self.internal]))
            else:
                gc = self._lifted_gradient_coeffs(coeffs, j_int_vals)
                fvals = np.einsum("tmcj,qm->tqcj", gc, self.phi2)
                wvals = model.W(fvals)
                bulk = float(np.einsum("t,q,tq->", space.det_jac, self.tri.weights, wvals))
                _, d_bw, d_sp, d_ji, d_jb = self._penalty(bulk, semi, j_int, j_bnd)
                scale_bw = 1.0 + cfg.alpha * d_bw
                dwg = model.DW(fvals)
                lam = np.einsum("q,t,tqcj,qm->tmcj", self.tri.weights, space.det_jac,
                                dwg, self.phi2)
                g += scale_bw * np.einsum("tmcj,tmkj->tkc", lam, self.grad_nodes)
                mu = np.einsum("tab,tbcj->tacj", self.mass_inv, lam)
                mu_avg = 0.5 * (
                    np.einsum("emcj,eqm->eqcj", mu[self.plus_int],
                              self.tables2.val_plus[self.internal])
                    + np.einsum("emcj,eqm->eqcj", mu[self.minus_int],
                                self.tables2.val_minus[self.internal]))
                wh = self.h_int[:, None] * w_e[None, :]
                vec = np.einsum("eq,eqcj,ej->eqc", wh, mu_avg, self.n_int)
                np.add.at(g, self.plus_int, -scale_bw *
                          np.einsum("eqc,eqk->ekc", vec, tab.val_plus[self.internal]))
                np.add.at(g, self.minus_int, scale_bw *
                          np.einsum("eqc,eqk->ekc", vec, tab.val_minus[self.internal]))

            # seminorm part of the penalty
            if d_sp != 0.0 and semi is not None:
                gn2 = np.einsum("tqcj,tqcj->tq", grads, grads)
                fac = gn2 ** ((p - 2.0) / 2.0) if p != 2.0 else np.ones_like(gn2)
                g += (cfg.alpha * d_sp * p) * np.einsum(
                    "q,t,tq,tqcj,tqkj->tkc", self.tri.weights, space.det_jac,
                    fac, grads, self.phys_grad)
                # internal jump part of the seminorm reuses the d_ji slot below

            # jump aggregates
            for jvals, h, edges_sel, dcoef, trip, trim in (
                    (j_int_vals, self.h_int, self.internal, d_ji,
                     self.plus_int, self.minus_int),
                    (j_bnd_vals, self.h_bnd, self.boundary, d_jb,
                     self.plus_bnd, None)):
                if dcoef == 0.0 or len(h) == 0:
                    continue
                if cfg.stable_rewrite:
                    r = jvals / h[:, None, None]
                    rn = np.sqrt(np.einsum("eqc,eqc->eq", r, r))
                    core = (p * rn ** (p - 2.0))[:, :, None] * r * h[:, None, None]
                else:
                    jn = np.sqrt(np.einsum("eqc,eqc->eq", jvals, jvals))
                    core = (p * jn ** (p - 2.0))[:, :, None] * jvals \
                        * (h ** (2.0 - p))[:, None, None]
                core = cfg.alpha * dcoef * w_e[None, :, None] * core
                np.add.at(g, trip,
                          np.einsum("eqc,eqk->ekc", core, tab.val_plus[edges_sel]))
                if trim is not None:
                    np.add.at(g, trim,
                              -np.einsum("eqc,eqk->ekc", core, tab.val_minus[edges_sel]))
        return g.reshape(-1)
