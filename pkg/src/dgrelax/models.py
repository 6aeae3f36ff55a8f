"""Stored energy densities on 2x2 deformation gradients.

Each model packs the density W, its first derivative DW and the directional
second derivative D2W (needed for exact consistency-term gradients), together
with growth and Lipschitz constants used by the property tests.  All
evaluators are vectorized over leading batch axes.

The two-well density uses C = F^T F and wells SO(2) and SO(2)V with V the
symmetric stretch built from b0 (second eigenvalue sqrt(2 - b0^2), so the
squared eigenvalues sum to 2).  The default form squares both factors,
|C - V^2|^2 |C - I|^2, which is smooth and grows like |F|^8; the historical
single-bar variant |C - V^2| |C - I|^2 is available behind a flag but is not
differentiable where C = V^2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

Array = np.ndarray


@dataclass(frozen=True)
class EnergyModel:
    name: str
    p: float
    W: Callable[[Array], Array]
    DW: Callable[[Array], Array]
    D2W: Callable[[Array, Array], Array]  # directional: (F, H) -> d/dt DW(F + tH)
    growth_c0: float
    growth_c1: float
    growth_c2: float
    lipschitz: float
    meta: dict = field(default_factory=dict)


def _frob2(A: Array) -> Array:
    return np.einsum("...ij,...ij->...", A, A)


def _cof(F: Array) -> Array:
    c = np.empty_like(F)
    c[..., 0, 0] = F[..., 1, 1]
    c[..., 0, 1] = -F[..., 1, 0]
    c[..., 1, 0] = -F[..., 0, 1]
    c[..., 1, 1] = F[..., 0, 0]
    return c


def _det(F: Array) -> Array:
    return F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]


def model_quadratic(fbar: Array | None = None) -> EnergyModel:
    """W(F) = |F - Fbar|^2, the convex baseline."""
    fbar = np.zeros((2, 2)) if fbar is None else np.asarray(fbar, dtype=float)
    fb2 = float(_frob2(fbar))

    def W(F: Array) -> Array:
        return _frob2(F - fbar)

    def DW(F: Array) -> Array:
        return 2.0 * (F - fbar)

    def D2W(F: Array, H: Array) -> Array:
        return 2.0 * H

    return EnergyModel("quadratic", 2.0, W, DW, D2W,
                       growth_c0=fb2, growth_c1=0.5,
                       growth_c2=2.0 * max(1.0, fb2),
                       lipschitz=2.0 + 2.0 * np.sqrt(fb2),
                       meta={"fbar": fbar})


def model_detsq() -> EnergyModel:
    """W(F) = (det F)^2, polyconvex with p = 4 growth bound above.

    The lower growth bound fails (W vanishes on singular matrices), recorded
    as growth_c1 = 0.
    """

    def W(F: Array) -> Array:
        return _det(F) ** 2

    def DW(F: Array) -> Array:
        return 2.0 * _det(F)[..., None, None] * _cof(F)

    def D2W(F: Array, H: Array) -> Array:
        cf = _cof(F)
        return (2.0 * np.einsum("...ij,...ij->...", cf, H)[..., None, None] * cf
                + 2.0 * _det(F)[..., None, None] * _cof(H))

    return EnergyModel("detsq", 4.0, W, DW, D2W,
                       growth_c0=0.0, growth_c1=0.0, growth_c2=1.0,
                       lipschitz=2.0)


def stretch_matrix(b0: float) -> Array:
    """Symmetric V with eigenvalues b0 and a0 = sqrt(2 - b0^2) along (1,1), (1,-1)."""
    a0 = np.sqrt(2.0 - b0 * b0)
    return np.array([[(a0 + b0) / 2.0, (b0 - a0) / 2.0],
                     [(b0 - a0) / 2.0, (a0 + b0) / 2.0]])


def model_twowell(b0: float = 0.9, squared: bool = True) -> EnergyModel:
    if not 0.0 < b0 < 1.0:
        raise ValueError(f"need 0 < b0 < 1, got {b0}")
    V = stretch_matrix(b0)
    V2 = V @ V
    eye = np.eye(2)

    def parts(F: Array):
        C = np.swapaxes(F, -1, -2) @ F
        A = C - V2
        B = C - eye
        return A, B, _frob2(A), _frob2(B)

    if squared:
        def W(F: Array) -> Array:
            _, _, a, b = parts(F)
            return a * b

        def S_of(F: Array) -> Array:
            A, B, a, b = parts(F)
            return 2.0 * (b[..., None, None] * A + a[..., None, None] * B)

        def DW(F: Array) -> Array:
            return 2.0 * F @ S_of(F)

        def D2W(F: Array, H: Array) -> Array:
            A, B, a, b = parts(F)
            dC = np.swapaxes(H, -1, -2) @ F + np.swapaxes(F, -1, -2) @ H
            da = 2.0 * np.einsum("...ij,...ij->...", A, dC)
            db = 2.0 * np.einsum("...ij,...ij->...", B, dC)
            S = 2.0 * (b[..., None, None] * A + a[..., None, None] * B)
            dS = 2.0 * (db[..., None, None] * A + b[..., None, None] * dC
                        + da[..., None, None] * B + a[..., None, None] * dC)
            return 2.0 * (H @ S + F @ dS)

        name, p = "twowell", 8.0
        c0, c1, c2, lip = 24.0, 1.0 / 64.0, 35.0, 150.0
    else:
        def W(F: Array) -> Array:
            _, _, a, b = parts(F)
            return np.sqrt(a) * b

        def DW(F: Array) -> Array:
            A, B, a, b = parts(F)
            ra = np.sqrt(np.maximum(a, 1e-300))
            S = (b / ra)[..., None, None] * A + 2.0 * ra[..., None, None] * B
            return 2.0 * F @ S

        def D2W(F: Array, H: Array) -> Array:
            A, B, a, b = parts(F)
            ra = np.sqrt(np.maximum(a, 1e-300))
            dC = np.swapaxes(H, -1, -2) @ F + np.swapaxes(F, -1, -2) @ H
            da = 2.0 * np.einsum("...ij,...ij->...", A, dC)
            db = 2.0 * np.einsum("...ij,...ij->...", B, dC)
            S = (b / ra)[..., None, None] * A + 2.0 * ra[..., None, None] * B
            dS = ((db / ra - 0.5 * b * da / (a * ra))[..., None, None] * A
                  + (b / ra)[..., None, None] * dC
                  + (da / ra)[..., None, None] * B
                  + 2.0 * ra[..., None, None] * dC)
            return 2.0 * (H @ S + F @ dS)

        name, p = "twowell_singlebar", 6.0
        c0, c1, c2, lip = 12.0, 1.0 / 32.0, 20.0, 80.0

    return EnergyModel(name, p, W, DW, D2W,
                       growth_c0=c0, growth_c1=c1, growth_c2=c2, lipschitz=lip,
                       meta={"b0": b0, "V": V, "squared": squared})


@dataclass(frozen=True)
class TwinningSystem:
    theta: float
    rotation: Array  # R with det(R V - I) = 0
    d: Array         # R V - I = d (x) n
    n: Array         # unit, first nonzero component positive


def _rotation(theta: float) -> Array:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def solve_twinning(V: Array, det_tol: float = 1e-13,
                   rank_tol: float = 1e-10) -> tuple[TwinningSystem, TwinningSystem]:
    """Rotations R with R V - I rank one, i.e. twin interfaces between the wells.

    Scans det(R(theta) V - I) for sign changes on (-pi, pi], polishes each
    bracket by scalar root finding, then factors R V - I = d (x) n through its
    dominant singular pair.  Returns the two systems ordered so that the first
    normal is the one closest to the x-axis.
    """
    V = np.asarray(V, dtype=float)
    ew = np.linalg.eigvalsh(V)
    if not (ew[0] < 1.0 < ew[1]):
        raise ValueError(f"stretch eigenvalues {ew} must straddle 1")

    def f(theta: float) -> float:
        return float(np.linalg.det(_rotation(theta) @ V - np.eye(2)))

    grid = np.linspace(-np.pi, np.pi, 4097)
    vals = np.array([f(t) for t in grid])
    roots: list[float] = []
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0.0:
            roots.append(float(brentq(f, grid[i], grid[i + 1], xtol=1e-15, rtol=8.9e-16)))
    roots = [r for i, r in enumerate(roots)
             if not any(abs(r - r2) < 1e-8 for r2 in roots[:i])]
    if len(roots) != 2:
        raise ValueError(f"expected 2 twinning rotations, found {len(roots)}")

    systems = []
    for theta in roots:
        if abs(f(theta)) > det_tol:
            raise ValueError(f"root at theta={theta} has |det| = {abs(f(theta)):.2e}")
        R = _rotation(theta)
        M = R @ V - np.eye(2)
        U, s, Vt = np.linalg.svd(M)
        if s[1] > rank_tol:
            raise ValueError(f"rank-one defect {s[1]:.2e} at theta={theta}")
        d = s[0] * U[:, 0]
        n = Vt[0]
        lead = n[np.flatnonzero(np.abs(n) > 1e-12)[0]]
        if lead < 0:
            d, n = -d, -n
        systems.append(TwinningSystem(float(theta), R, d, n))

    systems.sort(key=lambda s: -abs(s.n[0]))
    return systems[0], systems[1]
